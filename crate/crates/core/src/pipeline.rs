//! Frame recurrence: colorize, warp, mask, composite.
//!
//! Frame 0 and every scene cut take the colorizer's output directly. Every
//! other frame warps the previous final chroma along the backward flow,
//! flags corrupted pixels, and fills them from the colorizer.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::colorizer::{
    colorize_frame, ColorizeRequest, Colorizer, ExternalColorizer, ExternalSpec, OracleColorizer, PaletteColorizer,
};
use crate::colorspace::{lab_to_rgb, rgb_to_lab, LabFrame};
use crate::config::{ColorizerSpec, FlowConfig, PipelineConfig, SceneConfig};
use crate::correction::{composite, correction_mask, CorrectionOptions, DEFAULT_TAU_DB};
use crate::error::{Error, Result};
use crate::flow::{FloDirectory, FlowParams, FlowSource, PyramidalLucasKanade};
use crate::frames::{ensure_dir, list_frames, read_label_png, read_luma_png, read_rgb_sequence, write_rgb_png};
use crate::plane::{LabelMap, LumaPlane};
use crate::prompt::{load_prompt_file, refresh_interval_frames, PromptMode, PromptOrigin, PromptSchedule};
use crate::scene::{detect_cuts, load_cut_list, SceneParams};
use crate::warp::{assemble_warp_frame, warp_chroma};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagationOptions {
    pub tau_db: f64,
    pub correction: CorrectionOptions,
    pub no_correction: bool,
    pub no_warp: bool,
    pub lazy_colorize: bool,
}

impl Default for PropagationOptions {
    fn default() -> Self {
        PropagationOptions {
            tau_db: DEFAULT_TAU_DB,
            correction: CorrectionOptions::default(),
            no_correction: false,
            no_warp: false,
            lazy_colorize: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub frame: usize,
    pub prompt: String,
    pub prompt_origin: PromptOrigin,
    pub scene_change: bool,
    /// Fraction of pixels taken from the colorizer; absent where warping was skipped.
    pub corrected_fraction: Option<f64>,
    /// Fraction of pixels whose warp sample fell outside the previous frame.
    pub invalid_fraction: Option<f64>,
    pub flow_provider: String,
    pub colorizer_invoked: bool,
    pub timing_ms: f64,
}

impl FrameRecord {
    /// Equality ignoring wall-clock timing.
    pub fn same_outcome(&self, other: &FrameRecord) -> bool {
        FrameRecord { timing_ms: 0.0, ..self.clone() } == FrameRecord { timing_ms: 0.0, ..other.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub colorizer: String,
    pub tau_db: f64,
    pub frame_count: usize,
    pub frames: Vec<FrameRecord>,
    pub completed: bool,
    #[serde(default)]
    pub error: Option<String>,
}

impl RunManifest {
    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// Sequential propagation state for one video.
#[derive(Debug)]
pub struct Propagator {
    options: PropagationOptions,
    previous: Option<(LumaPlane, LabFrame)>,
    next_index: usize,
}

/// Per-frame inputs to [`Propagator::step`].
pub struct StepInput<'a> {
    pub luma: &'a LumaPlane,
    pub masks: Option<&'a LabelMap>,
    pub prompt: crate::prompt::PromptRecord,
    pub scene_change: bool,
}

impl Propagator {
    pub fn new(options: PropagationOptions) -> Result<Self> {
        if !options.tau_db.is_finite() {
            return Err(Error::Config("tau_db must be finite".into()));
        }
        Ok(Propagator {
            options,
            previous: None,
            next_index: 0,
        })
    }

    pub fn frame_index(&self) -> usize {
        self.next_index
    }

    pub fn step(
        &mut self,
        input: StepInput<'_>,
        colorizer: &mut (impl Colorizer + ?Sized),
        flow: &mut (impl FlowSource + ?Sized),
    ) -> Result<(LabFrame, FrameRecord)> {
        let started = Instant::now();
        let t = self.next_index;
        if let Some((prev_luma, _)) = &self.previous {
            if prev_luma.dims() != input.luma.dims() {
                return Err(Error::dims("frame size drift", prev_luma.dims(), input.luma.dims()));
            }
        }
        let request = ColorizeRequest::new(t, input.luma.clone(), input.masks.cloned(), input.prompt.clone())?;
        let scene_change = t == 0 || input.scene_change;

        let mut record = FrameRecord {
            frame: t,
            prompt: input.prompt.text.clone(),
            prompt_origin: input.prompt.origin,
            scene_change,
            corrected_fraction: None,
            invalid_fraction: None,
            flow_provider: "none".into(),
            colorizer_invoked: false,
            timing_ms: 0.0,
        };

        let final_frame = match &self.previous {
            Some((prev_luma, prev_final)) if !scene_change && !self.options.no_warp => {
                let field = flow.backward_flow(t, input.luma, prev_luma)?;
                record.flow_provider = flow.name().to_string();
                let chroma = warp_chroma(prev_final, &field)?;
                record.invalid_fraction = Some(chroma.invalid_count() as f64 / input.luma.len() as f64);
                let warped = assemble_warp_frame(input.luma, &chroma)?;
                if self.options.no_correction {
                    warped
                } else {
                    let mask = correction_mask(
                        &warped,
                        &chroma.valid,
                        prev_final,
                        self.options.tau_db,
                        &self.options.correction,
                    )?;
                    record.corrected_fraction = Some(mask.corrected_fraction());
                    if self.options.lazy_colorize && mask.is_empty() {
                        warped
                    } else {
                        record.colorizer_invoked = true;
                        let colorized = colorize_frame(colorizer, &request)?;
                        composite(&warped, &colorized, &mask)?
                    }
                }
            }
            _ => {
                record.colorizer_invoked = true;
                colorize_frame(colorizer, &request)?
            }
        };

        self.previous = Some((input.luma.clone(), final_frame.clone()));
        self.next_index += 1;
        record.timing_ms = started.elapsed().as_secs_f64() * 1e3;
        Ok((final_frame, record))
    }
}

/// In-memory inputs for a whole video.
pub struct Sequence<'a> {
    pub lumas: &'a [LumaPlane],
    pub masks: Option<&'a [LabelMap]>,
    pub scene_cuts: &'a BTreeSet<usize>,
    pub schedule: &'a PromptSchedule,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub frames: Vec<LabFrame>,
    pub manifest: RunManifest,
}

/// A failed run together with everything produced before the failure.
#[derive(Debug)]
pub struct RunFailure {
    pub error: Error,
    pub partial: RunOutput,
}

impl std::fmt::Display for RunFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} (after {} frames)", self.error, self.partial.frames.len())
    }
}

impl std::error::Error for RunFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

/// Run the recurrence over a whole in-memory sequence, calling `sink` on each
/// finished frame.
pub fn propagate_with(
    seq: &Sequence<'_>,
    options: PropagationOptions,
    colorizer: &mut (impl Colorizer + ?Sized),
    flow: &mut (impl FlowSource + ?Sized),
    mut sink: impl FnMut(usize, &LabFrame) -> Result<()>,
) -> std::result::Result<RunOutput, RunFailure> {
    let mut out = RunOutput {
        frames: Vec::with_capacity(seq.lumas.len()),
        manifest: RunManifest {
            colorizer: colorizer.name().to_string(),
            tau_db: options.tau_db,
            frame_count: seq.lumas.len(),
            frames: Vec::with_capacity(seq.lumas.len()),
            completed: false,
            error: None,
        },
    };
    let fail = |error: Error, mut partial: RunOutput| {
        partial.manifest.error = Some(error.to_string());
        RunFailure { error, partial }
    };

    if seq.lumas.is_empty() {
        return Err(fail(Error::Sequence("no input frames".into()), out));
    }
    if let Some(m) = seq.masks {
        if m.len() != seq.lumas.len() {
            let e = Error::Sequence(format!("{} mask maps for {} frames", m.len(), seq.lumas.len()));
            return Err(fail(e, out));
        }
    }
    let mut prop = match Propagator::new(options) {
        Ok(p) => p,
        Err(e) => return Err(fail(e, out)),
    };

    for (t, luma) in seq.lumas.iter().enumerate() {
        let input = StepInput {
            luma,
            masks: seq.masks.map(|m| &m[t]),
            prompt: seq.schedule.prompt_for_frame(t, seq.scene_cuts),
            scene_change: seq.scene_cuts.contains(&t),
        };
        match prop.step(input, colorizer, flow).and_then(|(frame, record)| {
            sink(t, &frame)?;
            Ok((frame, record))
        }) {
            Ok((frame, record)) => {
                out.frames.push(frame);
                out.manifest.frames.push(record);
            }
            Err(e) => {
                let _ = colorizer.shutdown();
                return Err(fail(e, out));
            }
        }
    }
    if let Err(e) = colorizer.shutdown() {
        return Err(fail(e, out));
    }
    out.manifest.completed = true;
    Ok(out)
}

pub fn propagate(
    seq: &Sequence<'_>,
    options: PropagationOptions,
    colorizer: &mut (impl Colorizer + ?Sized),
    flow: &mut (impl FlowSource + ?Sized),
) -> std::result::Result<RunOutput, RunFailure> {
    propagate_with(seq, options, colorizer, flow, |_, _| Ok(()))
}

pub const MANIFEST_FILE: &str = "manifest.json";

/// Build the configured colorizer.
pub fn open_colorizer(spec: &ColorizerSpec) -> Result<Box<dyn Colorizer>> {
    Ok(match spec {
        ColorizerSpec::Oracle { gt_dir } => {
            let list = list_frames(gt_dir)?;
            let frames = read_rgb_sequence(&list)?.iter().map(rgb_to_lab).collect();
            Box::new(OracleColorizer::new(frames))
        }
        ColorizerSpec::Palette { file: None } => Box::new(PaletteColorizer::default()),
        ColorizerSpec::Palette { file: Some(f) } => Box::new(PaletteColorizer::load(f)?),
        ColorizerSpec::External { command, workdir, .. } => {
            let (program, args) = command
                .split_first()
                .ok_or_else(|| Error::Config("external colorizer needs a command".into()))?;
            let mut ext = ExternalSpec::new(program).timeout(spec.timeout());
            ext.args = args.to_vec();
            ext.workdir = workdir.clone();
            Box::new(ExternalColorizer::launch(&ext)?)
        }
    })
}

/// Run the pipeline on frame directories. The manifest is written next to
/// the output frames whether or not the run completes.
pub fn run(config: &PipelineConfig) -> Result<RunManifest> {
    config.validate()?;
    let list = list_frames(&config.input_dir)?;
    let lumas: Vec<LumaPlane> = (0..list.len()).map(|i| read_luma_png(list.path(i))).collect::<Result<_>>()?;
    let dims = lumas[0].dims();
    if let Some((i, l)) = lumas.iter().enumerate().find(|(_, l)| l.dims() != dims) {
        return Err(Error::Sequence(format!(
            "frame {} is {}x{}, expected {}x{}",
            list.stems[i],
            l.width(),
            l.height(),
            dims.0,
            dims.1
        )));
    }

    let masks: Option<Vec<LabelMap>> = match &config.masks_dir {
        Some(dir) => Some(
            list.stems
                .iter()
                .map(|s| read_label_png(dir.join(format!("{s}.png"))))
                .collect::<Result<_>>()?,
        ),
        None => None,
    };

    let scene_cuts = match &config.scenes {
        SceneConfig::Detect {
            histogram_bins,
            change_threshold,
        } => detect_cuts(
            &lumas,
            &SceneParams {
                histogram_bins: *histogram_bins,
                change_threshold: *change_threshold,
            },
        )?,
        SceneConfig::File { file } => load_cut_list(file)?,
    };

    let mut schedule = match config.prompt.mode {
        PromptMode::Generic => PromptSchedule::generic_with(config.prompt.generic_text.clone()),
        PromptMode::Detailed => {
            let file = config.prompt.file.as_ref().expect("validated");
            PromptSchedule::detailed(
                load_prompt_file(file)?,
                refresh_interval_frames(config.refresh_seconds, config.fps),
            )?
        }
    };
    if config.ablation.fixed_prompt {
        schedule = schedule.fixed_to_first();
    }

    let mut flow: Box<dyn FlowSource> = match &config.flow {
        FlowConfig::Builtin {
            pyramid_levels,
            window_radius,
            iterations,
        } => Box::new(PyramidalLucasKanade::new(FlowParams {
            pyramid_levels: *pyramid_levels,
            window_radius: *window_radius,
            iterations: *iterations,
        })?),
        FlowConfig::FloDir { dir } => Box::new(FloDirectory::new(dir, list.stems.clone())),
    };

    let mut colorizer = open_colorizer(&config.colorizer)?;
    ensure_dir(&config.output_dir)?;

    let options = PropagationOptions {
        tau_db: config.tau_db,
        correction: config.correction,
        no_correction: config.ablation.no_correction,
        no_warp: config.ablation.no_warp,
        lazy_colorize: config.ablation.lazy_colorize,
    };
    let seq = Sequence {
        lumas: &lumas,
        masks: masks.as_deref(),
        scene_cuts: &scene_cuts,
        schedule: &schedule,
    };
    let out_dir = config.output_dir.clone();
    let stems = list.stems.clone();
    let manifest_path = out_dir.join(MANIFEST_FILE);
    let result = propagate_with(&seq, options, colorizer.as_mut(), flow.as_mut(), |t, frame| {
        write_rgb_png(&lab_to_rgb(frame), out_dir.join(format!("{}.png", stems[t])))
    });
    match result {
        Ok(out) => {
            out.manifest.write_json(&manifest_path)?;
            Ok(out.manifest)
        }
        Err(failure) => {
            failure.partial.manifest.write_json(&manifest_path)?;
            Err(failure.error)
        }
    }
}
