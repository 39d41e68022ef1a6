use std::ops::ControlFlow;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use palmkey_gateway::{Gateway, GatewayOptions};
use palmkey_pipeline::bench::bench;
use palmkey_pipeline::model_file::save_model;
use palmkey_pipeline::{open_source, run_calibration, run_loop, FrameReport, LoopObserver, NoObserver, Pipeline, PipelineConfig};

#[derive(Parser)]
#[command(name = "palmkey", version, about = "Contactless hand-driven keyboard and mouse")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Configuration file; relative paths inside it are resolved against its directory.
    #[arg(long)]
    config: PathBuf,

    /// Frame source: seq:<dir>, script:<file> or camera:<id>.
    #[arg(long)]
    source: Option<String>,

    /// Override any configuration key, as key=value. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(clap::Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,

    /// Interface XML file, or builtin:keyboard / builtin:mouse.
    #[arg(long)]
    interface: Option<String>,

    /// Engine backend: ic, dsi or record.
    #[arg(long)]
    backend: Option<String>,

    /// Recorder output file (with --backend record).
    #[arg(long)]
    record: Option<PathBuf>,

    /// Mapping mode: absolute, linear or nonlinear.
    #[arg(long)]
    mapping: Option<String>,

    /// Gateway port; 0 picks a free one.
    #[arg(long)]
    port: Option<u16>,

    /// Process frames without starting the gateway.
    #[arg(long)]
    headless: bool,

    /// Process frames as fast as possible instead of at the source frame rate.
    #[arg(long)]
    no_pacing: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Calibrate, then drive the interface from the frame source.
    Run(RunArgs),

    /// Learn a background model and write it to a file.
    Calibrate {
        #[command(flatten)]
        common: Common,

        #[arg(long, default_value_t = 30)]
        frames: usize,

        #[arg(long)]
        out: PathBuf,
    },

    /// Measure per-stage processing time.
    Bench {
        #[command(flatten)]
        common: Common,

        /// Frames to measure after calibration.
        #[arg(long, default_value_t = 100)]
        frames: usize,

        /// Run the FIZI branches concurrently.
        #[arg(long)]
        parallel: bool,
    },

    /// Print the default configuration.
    Defaults,
}

fn load_config(common: &Common) -> Result<PipelineConfig> {
    let mut config = PipelineConfig::load(&common.config)?;
    let base = common.config.parent().unwrap_or(Path::new("."));
    config.resolve_paths(base);
    if let Some(src) = &common.source {
        config.set("source", src)?;
    }
    for kv in &common.overrides {
        let (k, v) = kv
            .split_once('=')
            .with_context(|| format!("--set expects key=value, got {kv:?}"))?;
        config.set(k.trim(), v.trim())?;
    }
    Ok(config)
}

fn source_of(config: &PipelineConfig) -> Result<Box<dyn palmkey_pipeline::FrameSource>> {
    let spec = config
        .source
        .as_deref()
        .context("no frame source: pass --source or set `source` in the configuration")?;
    Ok(open_source(spec)?)
}

/// Sleeps so that frames are processed no faster than the source rate.
struct Paced<O> {
    inner: O,
    period: Duration,
    next: Option<Instant>,
}

impl<O: LoopObserver> LoopObserver for Paced<O> {
    fn between_frames(&mut self, pipeline: &mut Pipeline) -> ControlFlow<()> {
        let now = Instant::now();
        match self.next {
            Some(t) if t > now => std::thread::sleep(t - now),
            _ => {}
        }
        self.next = Some(self.next.unwrap_or(now).max(now) + self.period);
        self.inner.between_frames(pipeline)
    }

    fn on_report(&mut self, pipeline: &Pipeline, report: &FrameReport) {
        self.inner.on_report(pipeline, report);
    }
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let RunArgs {
        common,
        interface,
        backend,
        record,
        mapping,
        port,
        headless,
        no_pacing,
    } = args;
    let mut config = load_config(&common)?;
    let flags = [
        ("interface.path", interface),
        ("engine.backend", backend),
        ("engine.record_path", record.map(|p| p.display().to_string())),
        ("mapping.mode", mapping),
        ("gateway.port", port.map(|p| p.to_string())),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            config.set(key, &v)?;
        }
    }
    let mut source = source_of(&config)?;
    let mut pipeline = Pipeline::new(config.clone(), source.dims(), source.fps_hint())?;

    let summary = if headless {
        run_loop(&mut pipeline, source.as_mut(), &mut NoObserver)?
    } else {
        let addr = format!("127.0.0.1:{}", config.gateway_port);
        let gateway = Gateway::for_pipeline(addr.as_str(), &pipeline, GatewayOptions::default())?;
        println!("gateway listening on ws://{}", gateway.local_addr());
        let fps = source.fps_hint();
        let period = if no_pacing || fps <= 0.0 {
            Duration::ZERO
        } else {
            Duration::from_secs_f64(1.0 / fps)
        };
        let mut observer = Paced {
            inner: gateway,
            period,
            next: None,
        };
        let summary = run_loop(&mut pipeline, source.as_mut(), &mut observer)?;
        observer.inner.shutdown();
        summary
    };

    println!("frames {}", summary.frames);
    for o in &summary.orders {
        let [c, p1, p2] = o.triple();
        println!("order {} {c} {p1} {p2}", o.action);
    }
    if let Some(text) = &summary.text_buffer {
        println!("text {text:?}");
    }
    if summary.stage_errors > 0 {
        println!("stage errors {}", summary.stage_errors);
    }
    println!("elapsed {:.3}s", summary.elapsed.as_secs_f64());
    Ok(())
}

fn cmd_calibrate(common: Common, frames: usize, out: PathBuf) -> Result<()> {
    let config = load_config(&common)?;
    let mut source = source_of(&config)?;
    let model = run_calibration(source.as_mut(), frames, config.fizi.sigma_min)?;
    save_model(&model, &out).with_context(|| format!("writing {}", out.display()))?;
    let (w, h) = model.dims();
    println!("wrote {} ({w}x{h}, {} frames)", out.display(), model.sample_count());
    Ok(())
}

fn cmd_bench(common: Common, frames: usize, parallel: bool) -> Result<()> {
    let mut config = load_config(&common)?;
    if parallel {
        config.parallel = true;
    }
    let mut source = source_of(&config)?;
    let report = bench(&config, source.as_mut(), frames)?;
    if report.frames.is_empty() {
        bail!("source ended before any frame was measured");
    }
    print!("{}", report.table());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Defaults => {
            print!("{}", PipelineConfig::default().to_text());
            Ok(())
        }
        Command::Calibrate { common, frames, out } => cmd_calibrate(common, frames, out),
        Command::Bench {
            common,
            frames,
            parallel,
        } => cmd_bench(common, frames, parallel),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("palmkey: {e:#}");
            ExitCode::FAILURE
        }
    }
}
