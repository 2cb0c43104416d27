//! Pipeline configuration, loadable from TOML.
//!
//! ```toml
//! input_dir = "frames/gray"
//! output_dir = "frames/out"
//! fps = 24.0
//! tau_db = 25.0
//! refresh_seconds = 1.0
//! masks_dir = "frames/masks"   # optional, 16-bit label PNGs named like the frames
//!
//! [flow]
//! source = "builtin"           # or "flo_dir" with dir = "..."
//! pyramid_levels = 3
//! window_radius = 4
//! iterations = 12
//!
//! [colorizer]
//! kind = "palette"             # "oracle" (gt_dir), "palette" (file), "external" (command, timeout_secs)
//!
//! [prompt]
//! mode = "generic"             # or "detailed" with file = "prompts.json"
//!
//! [scenes]
//! source = "detect"            # or "file" with file = "cuts.json"
//! histogram_bins = 64
//! change_threshold = 0.5
//!
//! [ablation]
//! no_correction = false
//! no_warp = false
//! fixed_prompt = false
//! lazy_colorize = false
//!
//! [correction]
//! norm = "chroma"              # or "full_lab"
//! peak = "per_frame"           # or { fixed = 127.0 }
//! ```

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::correction::{CorrectionOptions, DEFAULT_TAU_DB};
use crate::error::{Error, Result};
use crate::flow::FlowParams;
use crate::prompt::{PromptMode, GENERIC_PROMPT};
use crate::scene::SceneParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum FlowConfig {
    Builtin {
        #[serde(default = "default_levels")]
        pyramid_levels: usize,
        #[serde(default = "default_radius")]
        window_radius: usize,
        #[serde(default = "default_iterations")]
        iterations: usize,
    },
    /// `<frame stem>.flo` holds the backward flow of that frame into its predecessor.
    FloDir { dir: PathBuf },
}

fn default_levels() -> usize {
    FlowParams::default().pyramid_levels
}
fn default_radius() -> usize {
    FlowParams::default().window_radius
}
fn default_iterations() -> usize {
    FlowParams::default().iterations
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig::from(FlowParams::default())
    }
}

impl From<FlowParams> for FlowConfig {
    fn from(p: FlowParams) -> Self {
        FlowConfig::Builtin {
            pyramid_levels: p.pyramid_levels,
            window_radius: p.window_radius,
            iterations: p.iterations,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ColorizerSpec {
    Oracle {
        gt_dir: PathBuf,
    },
    Palette {
        #[serde(default)]
        file: Option<PathBuf>,
    },
    External {
        command: Vec<String>,
        #[serde(default)]
        timeout_secs: Option<f64>,
        #[serde(default)]
        workdir: Option<PathBuf>,
    },
}

impl Default for ColorizerSpec {
    fn default() -> Self {
        ColorizerSpec::Palette { file: None }
    }
}

impl ColorizerSpec {
    /// Parse `oracle:<gt dir>`, `palette`, `palette:<file>` or `external:<command line>`.
    pub fn parse(text: &str) -> Result<Self> {
        let (kind, rest) = match text.split_once(':') {
            Some((k, r)) => (k, Some(r)),
            None => (text, None),
        };
        match (kind, rest) {
            ("oracle", Some(dir)) if !dir.is_empty() => Ok(ColorizerSpec::Oracle { gt_dir: dir.into() }),
            ("palette", None) => Ok(ColorizerSpec::Palette { file: None }),
            ("palette", Some(f)) if !f.is_empty() => Ok(ColorizerSpec::Palette { file: Some(f.into()) }),
            ("external", Some(cmd)) => {
                let command: Vec<String> = cmd.split_whitespace().map(String::from).collect();
                if command.is_empty() {
                    return Err(Error::Config("external colorizer needs a command".into()));
                }
                Ok(ColorizerSpec::External {
                    command,
                    timeout_secs: None,
                    workdir: None,
                })
            }
            _ => Err(Error::Config(format!(
                "unknown colorizer '{text}', expected oracle:<dir>, palette[:<file>] or external:<command>"
            ))),
        }
    }

    pub fn timeout(&self) -> Duration {
        match self {
            ColorizerSpec::External { timeout_secs: Some(s), .. } => Duration::from_secs_f64(*s),
            _ => crate::colorizer::DEFAULT_TIMEOUT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PromptConfig {
    pub mode: PromptMode,
    pub file: Option<PathBuf>,
    pub generic_text: String,
}

impl Default for PromptConfig {
    fn default() -> Self {
        PromptConfig {
            mode: PromptMode::Generic,
            file: None,
            generic_text: GENERIC_PROMPT.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum SceneConfig {
    Detect {
        #[serde(default = "default_bins")]
        histogram_bins: usize,
        #[serde(default = "default_threshold")]
        change_threshold: f64,
    },
    File {
        file: PathBuf,
    },
}

fn default_bins() -> usize {
    SceneParams::default().histogram_bins
}
fn default_threshold() -> f64 {
    SceneParams::default().change_threshold
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig::Detect {
            histogram_bins: default_bins(),
            change_threshold: default_threshold(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Ablation {
    /// Use the warped frame as final output without repairing corrupted pixels.
    pub no_correction: bool,
    /// Colorize every frame independently.
    pub no_warp: bool,
    /// Keep frame 0's prompt for the whole video.
    pub fixed_prompt: bool,
    /// Skip the colorizer on frames whose correction mask is empty.
    pub lazy_colorize: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub input_dir: PathBuf,
    pub output_dir: PathBuf,
    pub fps: f64,
    #[serde(default = "default_tau")]
    pub tau_db: f64,
    #[serde(default = "default_refresh")]
    pub refresh_seconds: f64,
    #[serde(default)]
    pub masks_dir: Option<PathBuf>,
    #[serde(default)]
    pub flow: FlowConfig,
    #[serde(default)]
    pub colorizer: ColorizerSpec,
    #[serde(default)]
    pub prompt: PromptConfig,
    #[serde(default)]
    pub scenes: SceneConfig,
    #[serde(default)]
    pub ablation: Ablation,
    #[serde(default)]
    pub correction: CorrectionOptions,
}

fn default_tau() -> f64 {
    DEFAULT_TAU_DB
}
fn default_refresh() -> f64 {
    1.0
}

impl PipelineConfig {
    pub fn new(input_dir: impl Into<PathBuf>, output_dir: impl Into<PathBuf>, fps: f64) -> Self {
        PipelineConfig {
            input_dir: input_dir.into(),
            output_dir: output_dir.into(),
            fps,
            tau_db: DEFAULT_TAU_DB,
            refresh_seconds: default_refresh(),
            masks_dir: None,
            flow: FlowConfig::default(),
            colorizer: ColorizerSpec::default(),
            prompt: PromptConfig::default(),
            scenes: SceneConfig::default(),
            ablation: Ablation::default(),
            correction: CorrectionOptions::default(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fps > 0.0 && self.fps.is_finite()) {
            return Err(Error::Config(format!("fps must be positive, got {}", self.fps)));
        }
        if !self.tau_db.is_finite() {
            return Err(Error::Config(format!("tau_db must be finite, got {}", self.tau_db)));
        }
        if !(self.refresh_seconds > 0.0 && self.refresh_seconds.is_finite()) {
            return Err(Error::Config("refresh_seconds must be positive".into()));
        }
        if self.input_dir.as_os_str().is_empty() {
            return Err(Error::Config("input_dir is required".into()));
        }
        if self.prompt.mode == PromptMode::Detailed && self.prompt.file.is_none() {
            return Err(Error::Config("detailed prompt mode needs a prompt file".into()));
        }
        if let FlowConfig::Builtin { pyramid_levels, window_radius, iterations } = self.flow {
            FlowParams { pyramid_levels, window_radius, iterations }.validate()?;
        }
        if let SceneConfig::Detect { histogram_bins, change_threshold } = self.scenes {
            SceneParams { histogram_bins, change_threshold }.validate()?;
        }
        if let ColorizerSpec::External { timeout_secs: Some(s), .. } = self.colorizer {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::Config("colorizer timeout must be positive".into()));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correction::{NormChannels, PeakMode};

    #[test]
    fn minimal_toml_uses_defaults() {
        let c = PipelineConfig::from_toml_str("input_dir = \"in\"\noutput_dir = \"out\"\nfps = 24.0\n").unwrap();
        assert_eq!(c.tau_db, 25.0);
        assert_eq!(c.flow, FlowConfig::default());
        assert_eq!(c.prompt.generic_text, "a colorful image");
        assert_eq!(c.scenes, SceneConfig::default());
        assert!(c.validate().is_ok());
    }

    #[test]
    fn full_toml() {
        let text = r#"
            input_dir = "in"
            output_dir = "out"
            fps = 30
            tau_db = 20
            [flow]
            source = "flo_dir"
            dir = "flow"
            [colorizer]
            kind = "external"
            command = ["python3", "server.py", "--provider", "sepia"]
            timeout_secs = 5
            [prompt]
            mode = "detailed"
            file = "p.json"
            [scenes]
            source = "file"
            file = "cuts.json"
            [ablation]
            no_correction = true
            [correction]
            norm = "full_lab"
            peak = { fixed = 127.0 }
        "#;
        let c = PipelineConfig::from_toml_str(text).unwrap();
        assert_eq!(c.flow, FlowConfig::FloDir { dir: "flow".into() });
        assert_eq!(c.colorizer.timeout(), Duration::from_secs(5));
        assert!(c.ablation.no_correction && !c.ablation.no_warp);
        assert_eq!(c.correction.norm, NormChannels::FullLab);
        assert_eq!(c.correction.peak, PeakMode::Fixed(127.0));
        assert!(c.validate().is_ok());
    }

    #[test]
    fn validation_failures() {
        let mut c = PipelineConfig::new("in", "out", 0.0);
        assert!(c.validate().is_err());
        c.fps = 24.0;
        c.tau_db = f64::INFINITY;
        assert!(c.validate().is_err());
        c.tau_db = 25.0;
        c.prompt.mode = PromptMode::Detailed;
        assert!(c.validate().is_err());
        assert!(PipelineConfig::from_toml_str("fps = 1").is_err());
    }

    #[test]
    fn colorizer_spec_strings() {
        assert_eq!(ColorizerSpec::parse("oracle:gt").unwrap(), ColorizerSpec::Oracle { gt_dir: "gt".into() });
        assert_eq!(ColorizerSpec::parse("palette").unwrap(), ColorizerSpec::Palette { file: None });
        assert_eq!(
            ColorizerSpec::parse("palette:p.json").unwrap(),
            ColorizerSpec::Palette { file: Some("p.json".into()) }
        );
        match ColorizerSpec::parse("external:python3 serve.py --provider sepia").unwrap() {
            ColorizerSpec::External { command, .. } => assert_eq!(command.len(), 4),
            other => panic!("{other:?}"),
        }
        assert!(ColorizerSpec::parse("external:").is_err());
        assert!(ColorizerSpec::parse("lcad").is_err());
    }
}
