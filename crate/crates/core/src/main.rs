use std::io::{BufRead, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use log::info;

use vcolor::config::{ColorizerSpec, FlowConfig, PipelineConfig, SceneConfig};
use vcolor::flow::{estimate_flow, load_flo, write_flo, FlowParams};
use vcolor::frames::{list_frames, read_luma_png, read_rgb_sequence, write_ab_png};
use vcolor::metrics::{evaluate, MetricsReport};
use vcolor::plane::Plane;
use vcolor::prompt::PromptMode;
use vcolor::scene::{detect_cuts, write_cut_list, SceneParams};
use vcolor::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "vcolor", version, about = "Flow-guided video colorization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Colorize a directory of grayscale frames.
    Colorize(ColorizeArgs),
    /// Compare a colorized sequence with ground truth.
    Evaluate(EvaluateArgs),
    /// Write the detected scene cuts of a sequence as a JSON list.
    DetectScenes(DetectArgs),
    /// Precompute backward flow into a directory of .flo files.
    Flow(FlowArgs),
    /// Print the size and magnitude range of a .flo file.
    InspectFlow { file: PathBuf },
    #[command(hide = true)]
    MockProvider {
        #[arg(long, value_enum, default_value_t = MockKind::Sepia)]
        kind: MockKind,
        #[arg(long, default_value_t = 0)]
        after: usize,
    },
}

#[derive(clap::Args, Debug)]
struct ColorizeArgs {
    /// TOML configuration; flags given alongside override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    fps: Option<f64>,
    /// Correction threshold in dB.
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    refresh_seconds: Option<f64>,
    /// Use precomputed .flo files instead of the built-in estimator.
    #[arg(long)]
    flow_dir: Option<PathBuf>,
    /// oracle:<gt dir>, palette[:<file>] or external:<command line>.
    #[arg(long)]
    colorizer: Option<String>,
    #[arg(long)]
    timeout_secs: Option<f64>,
    #[arg(long, value_enum)]
    prompt_mode: Option<CliPromptMode>,
    #[arg(long)]
    prompt_file: Option<PathBuf>,
    /// JSON list of frame indices that start a new scene.
    #[arg(long)]
    scene_cuts: Option<PathBuf>,
    #[arg(long)]
    masks: Option<PathBuf>,
    #[arg(long)]
    no_correction: bool,
    #[arg(long)]
    no_warp: bool,
    #[arg(long)]
    fixed_prompt: bool,
    #[arg(long)]
    lazy: bool,
}

#[derive(clap::Args, Debug)]
struct EvaluateArgs {
    /// Takes the result directory from output_dir and ground truth from an oracle colorizer.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    result: Option<PathBuf>,
    #[arg(long)]
    gt: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Video name used in the CSV row.
    #[arg(long, default_value = "video")]
    name: String,
}

#[derive(clap::Args, Debug)]
struct DetectArgs {
    /// Takes input_dir and detection parameters from the file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    bins: Option<usize>,
    #[arg(long)]
    threshold: Option<f64>,
}

#[derive(clap::Args, Debug)]
struct FlowArgs {
    /// Takes input_dir, flow parameters and (for flo_dir sources) the output directory from the file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    levels: Option<usize>,
    #[arg(long)]
    radius: Option<usize>,
    #[arg(long)]
    iterations: Option<usize>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum CliPromptMode {
    Generic,
    Detailed,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum MockKind {
    Sepia,
    EchoGray,
    WrongDims,
    Malformed,
    DieAfter,
    Hang,
    ReportError,
    NoReady,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("vcolor: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Colorize(args) => colorize(args),
        Command::Evaluate(args) => evaluate_cmd(args),
        Command::DetectScenes(args) => detect_scenes(args),
        Command::Flow(args) => flow_cmd(args),
        Command::InspectFlow { file } => {
            let flow = load_flo(&file)?;
            let max = flow
                .u
                .as_slice()
                .iter()
                .zip(flow.v.as_slice())
                .map(|(u, v)| u.hypot(*v))
                .fold(0.0f32, f32::max);
            println!("{}x{} max magnitude {max:.3}", flow.width(), flow.height());
            Ok(())
        }
        Command::MockProvider { kind, after } => mock_provider(kind, after),
    }
}

fn colorize(args: ColorizeArgs) -> Result<()> {
    let mut config = match &args.config {
        Some(path) => PipelineConfig::load(path)?,
        None => {
            let input = args.input.clone().ok_or_else(|| Error::Config("--input or --config is required".into()))?;
            let output = args.output.clone().ok_or_else(|| Error::Config("--output or --config is required".into()))?;
            PipelineConfig::new(input, output, args.fps.unwrap_or(24.0))
        }
    };
    if let Some(v) = args.input {
        config.input_dir = v;
    }
    if let Some(v) = args.output {
        config.output_dir = v;
    }
    if let Some(v) = args.fps {
        config.fps = v;
    }
    if let Some(v) = args.tau {
        config.tau_db = v;
    }
    if let Some(v) = args.refresh_seconds {
        config.refresh_seconds = v;
    }
    if let Some(dir) = args.flow_dir {
        config.flow = FlowConfig::FloDir { dir };
    }
    if let Some(spec) = args.colorizer {
        config.colorizer = ColorizerSpec::parse(&spec)?;
    }
    if let Some(secs) = args.timeout_secs {
        match &mut config.colorizer {
            ColorizerSpec::External { timeout_secs, .. } => *timeout_secs = Some(secs),
            _ => return Err(Error::Config("--timeout-secs applies to external colorizers only".into())),
        }
    }
    if let Some(mode) = args.prompt_mode {
        config.prompt.mode = match mode {
            CliPromptMode::Generic => PromptMode::Generic,
            CliPromptMode::Detailed => PromptMode::Detailed,
        };
    }
    if let Some(file) = args.prompt_file {
        config.prompt.file = Some(file);
        if args.prompt_mode.is_none() {
            config.prompt.mode = PromptMode::Detailed;
        }
    }
    if let Some(file) = args.scene_cuts {
        config.scenes = SceneConfig::File { file };
    }
    if let Some(dir) = args.masks {
        config.masks_dir = Some(dir);
    }
    config.ablation.no_correction |= args.no_correction;
    config.ablation.no_warp |= args.no_warp;
    config.ablation.fixed_prompt |= args.fixed_prompt;
    config.ablation.lazy_colorize |= args.lazy;

    let manifest = vcolor::run(&config)?;
    let invoked = manifest.frames.iter().filter(|f| f.colorizer_invoked).count();
    let cuts = manifest.frames.iter().filter(|f| f.scene_change).count();
    println!(
        "colorized {} frames with {} ({} colorizer calls, {} scene starts) into {}",
        manifest.frames.len(),
        manifest.colorizer,
        invoked,
        cuts,
        config.output_dir.display()
    );
    Ok(())
}

fn load_config(path: &Option<PathBuf>) -> Result<Option<PipelineConfig>> {
    path.as_ref().map(PipelineConfig::load).transpose()
}

fn required(value: Option<PathBuf>, flag: &str) -> Result<PathBuf> {
    value.ok_or_else(|| Error::Config(format!("--{flag} or --config is required")))
}

fn detect_scenes(args: DetectArgs) -> Result<()> {
    let config = load_config(&args.config)?;
    let mut params = SceneParams::default();
    if let Some(SceneConfig::Detect { histogram_bins, change_threshold }) = config.as_ref().map(|c| &c.scenes) {
        params = SceneParams { histogram_bins: *histogram_bins, change_threshold: *change_threshold };
    }
    params.histogram_bins = args.bins.unwrap_or(params.histogram_bins);
    params.change_threshold = args.threshold.unwrap_or(params.change_threshold);
    params.validate()?;
    let input = required(args.input.or(config.map(|c| c.input_dir)), "input")?;
    let list = list_frames(&input)?;
    let lumas = (0..list.len()).map(|i| read_luma_png(list.path(i))).collect::<Result<Vec<_>>>()?;
    let cuts = detect_cuts(&lumas, &params)?;
    match args.output {
        Some(path) => write_cut_list(&cuts, path)?,
        None => println!("{}", serde_json::to_string(&cuts).expect("cut list serializes")),
    }
    Ok(())
}

fn flow_cmd(args: FlowArgs) -> Result<()> {
    let config = load_config(&args.config)?;
    let mut params = FlowParams::default();
    let mut output = args.output;
    match config.as_ref().map(|c| &c.flow) {
        Some(FlowConfig::Builtin { pyramid_levels, window_radius, iterations }) => {
            params = FlowParams {
                pyramid_levels: *pyramid_levels,
                window_radius: *window_radius,
                iterations: *iterations,
            };
        }
        Some(FlowConfig::FloDir { dir }) => {
            output = output.or_else(|| Some(dir.clone()));
        }
        None => {}
    }
    params.pyramid_levels = args.levels.unwrap_or(params.pyramid_levels);
    params.window_radius = args.radius.unwrap_or(params.window_radius);
    params.iterations = args.iterations.unwrap_or(params.iterations);
    params.validate()?;
    let input = required(args.input.or(config.map(|c| c.input_dir)), "input")?;
    let output = required(output, "output")?;

    let list = list_frames(&input)?;
    vcolor::frames::ensure_dir(&output)?;
    let mut prev = read_luma_png(list.path(0))?;
    for i in 1..list.len() {
        let cur = read_luma_png(list.path(i))?;
        let flow = estimate_flow(&cur, &prev, &params)?;
        write_flo(&flow, output.join(format!("{}.flo", list.stems[i])))?;
        info!("flow {}", list.stems[i]);
        prev = cur;
    }
    println!("wrote {} flow fields to {}", list.len() - 1, output.display());
    Ok(())
}

fn evaluate_cmd(args: EvaluateArgs) -> Result<()> {
    let config = load_config(&args.config)?;
    let gt_from_config = match config.as_ref().map(|c| &c.colorizer) {
        Some(ColorizerSpec::Oracle { gt_dir }) => Some(gt_dir.clone()),
        _ => None,
    };
    let result_dir = required(args.result.or(config.map(|c| c.output_dir)), "result")?;
    let gt_dir = required(args.gt.or(gt_from_config), "gt")?;
    let result = read_rgb_sequence(&list_frames(&result_dir)?)?;
    let gt = read_rgb_sequence(&list_frames(&gt_dir)?)?;
    let report: MetricsReport = evaluate(&result, &gt)?;
    if let Some(path) = &args.report {
        report.write_json(path)?;
    }
    if let Some(path) = &args.csv {
        report.write_csv(&args.name, path)?;
    }
    let ratio = |r: Option<f64>| r.map_or("n/a".to_string(), |v| format!("{v:.4}"));
    println!(
        "psnr {:.3} dB  colorfulness {:.3} (ratio {})  cdc {:.6} (ratio {})",
        report.psnr_db,
        report.colorfulness,
        ratio(report.colorfulness_ratio),
        report.cdc,
        ratio(report.cdc_ratio)
    );
    Ok(())
}

/// Scripted provider speaking the external protocol, for exercising the
/// engine's side of it.
fn mock_provider(kind: MockKind, after: usize) -> Result<()> {
    let stdin = std::io::stdin();
    let emit = |line: &str| -> Result<()> {
        let mut out = std::io::stdout().lock();
        writeln!(out, "{line}").and_then(|_| out.flush()).map_err(|e| Error::io("<stdout>", e))
    };
    let reply = |v: serde_json::Value| emit(&v.to_string());
    let mut workdir = PathBuf::new();
    let mut served = 0usize;
    for line in stdin.lock().lines() {
        let line = line.map_err(|e| Error::io("<stdin>", e))?;
        let msg: serde_json::Value = serde_json::from_str(&line).map_err(|e| Error::Config(e.to_string()))?;
        match msg["type"].as_str() {
            Some("hello") => {
                if kind == MockKind::NoReady {
                    reply(serde_json::json!({"type": "result", "frame": 0, "ab": "x"}))?;
                    continue;
                }
                workdir = PathBuf::from(msg["workdir"].as_str().unwrap_or("."));
                reply(serde_json::json!({"type": "ready", "name": format!("mock-{kind:?}").to_lowercase()}))?;
            }
            Some("colorize") => {
                let frame = msg["frame"].as_u64().unwrap_or(0) as usize;
                if kind == MockKind::DieAfter && served >= after {
                    std::process::exit(3);
                }
                served += 1;
                match kind {
                    MockKind::Malformed => {
                        emit("this is not json")?;
                        continue;
                    }
                    MockKind::Hang => {
                        std::thread::sleep(std::time::Duration::from_secs(3600));
                    }
                    MockKind::ReportError => {
                        reply(serde_json::json!({"type": "error", "frame": frame, "message": "model failed"}))?;
                        continue;
                    }
                    _ => {}
                }
                let luma = read_luma_png(msg["luma"].as_str().unwrap_or_default())?;
                let (mut w, h) = luma.dims();
                if kind == MockKind::WrongDims {
                    w += 1;
                }
                let (a, b) = match kind {
                    MockKind::EchoGray => (0.0, 0.0),
                    _ => (12.0, 24.0),
                };
                let name = format!("ab_{frame:06}.png");
                write_ab_png(&Plane::filled(w, h, a)?, &Plane::filled(w, h, b)?, workdir.join(&name))?;
                reply(serde_json::json!({"type": "result", "frame": frame, "ab": name}))?;
            }
            Some("shutdown") => return Ok(()),
            _ => {}
        }
    }
    Ok(())
}
