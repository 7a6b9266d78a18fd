use clap::{Args, Parser, Subcommand};
use holoqa_cli::{commands, parse_external_flag, CliError, Context, PipelineConfig, RunManifest};
use serde_json::json;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "holoqa", version, about = "Hologram synthesis, compression and subjective-quality pipeline")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Pipeline configuration (TOML).
    #[arg(long, global = true, env = "HOLOQA_CONFIG", default_value = "holoqa.toml")]
    config: PathBuf,
    /// Output directory.
    #[arg(long, global = true, env = "HOLOQA_OUT_DIR", default_value = "out")]
    out_dir: PathBuf,
    /// Overrides the synthesis and study seeds.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Extra ladder codec as `name=ENCODE|DECODE` command templates.
    #[arg(long = "external-codec", global = true, value_name = "NAME=ENCODE|DECODE")]
    external_codec: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize the Fourier hologram of the configured scene.
    Synth,
    /// Reconstruct the full object plane at one or more refocus offsets.
    Reconstruct {
        /// Hologram to reconstruct (default: the synthesized one).
        #[arg(long)]
        input: Option<PathBuf>,
        /// Refocus offset in meters, positive = deeper; repeatable.
        #[arg(long = "dz", allow_hyphen_values = true)]
        dz: Vec<f64>,
    },
    /// Compress the hologram with every codec at every target rate.
    Ladder {
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Render the configured views and draft the study.
    Render,
    /// Run the scoring session service.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
        /// Study data and journals (default: <out-dir>/sessions).
        #[arg(long, env = "HOLOQA_DATA_DIR")]
        data_dir: Option<PathBuf>,
    },
    /// Compute MOS, Z-scores, setup fits and boxplots from a score table.
    Analyze {
        /// Score CSV (default: stats.scores, else the exported study scores).
        #[arg(long, env = "HOLOQA_SCORES")]
        scores: Option<PathBuf>,
    },
    /// Aggregate the run manifests into a report.
    Report,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Synth => "synth",
            Command::Reconstruct { .. } => "reconstruct",
            Command::Ladder { .. } => "ladder",
            Command::Render => "render",
            Command::Serve { .. } => "serve",
            Command::Analyze { .. } => "analyze",
            Command::Report => "report",
        }
    }
}

fn load(global: &Global) -> Result<Context, CliError> {
    let mut config = PipelineConfig::load(&global.config)?;
    if let Some(seed) = global.seed {
        config.cgh.seed = seed;
        config.study.seed = seed;
    }
    for flag in &global.external_codec {
        config.ladder.external.push(parse_external_flag(flag)?);
    }
    config.validate()?;
    Ok(Context::new(config, &global.out_dir))
}

fn serve(ctx: &Context, addr: &str, data_dir: &Path) -> Result<RunManifest, CliError> {
    let (state, study) = commands::prepare_serve(ctx, data_dir)?;
    let runtime = tokio::runtime::Runtime::new().map_err(|source| CliError::Io { path: data_dir.into(), source })?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .map_err(|source| CliError::Io { path: addr.into(), source })?;
        let local = listener.local_addr().map_err(|source| CliError::Io { path: addr.into(), source })?;
        println!("{}", json!({ "listening": format!("http://{local}"), "study": study }));
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
        };
        holoqa_session::serve_until(listener, state, shutdown)
            .await
            .map_err(|source| CliError::Io { path: addr.into(), source })
    })?;
    Ok(RunManifest {
        tool: concat!("holoqa ", env!("CARGO_PKG_VERSION")).into(),
        command: "serve".into(),
        config_sha256: ctx.config_sha256(),
        inputs: Vec::new(),
        outputs: Vec::new(),
        summary: json!({ "study": study }),
    })
}

fn run(cli: &Cli) -> Result<RunManifest, CliError> {
    if let Some(jobs) = cli.global.jobs {
        // only fails when a pool already exists, which cannot happen here
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build_global();
    }
    let ctx = load(&cli.global)?;
    match &cli.command {
        Command::Synth => commands::synth(&ctx),
        Command::Reconstruct { input, dz } => commands::reconstruct(&ctx, input.as_deref(), dz),
        Command::Ladder { input } => commands::ladder(&ctx, input.as_deref()),
        Command::Render => commands::render(&ctx),
        Command::Serve { addr, data_dir } => {
            let dir = data_dir.clone().unwrap_or_else(|| ctx.out_dir.join("sessions"));
            serve(&ctx, addr, &dir)
        }
        Command::Analyze { scores } => commands::analyze(&ctx, scores.as_deref()),
        Command::Report => commands::report(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(manifest) => {
            let path = RunManifest::path(&cli.global.out_dir, &manifest.command);
            println!(
                "{}",
                json!({
                    "command": manifest.command,
                    "manifest": path,
                    "outputs": manifest.outputs.len(),
                    "summary": manifest.summary,
                })
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            let field = match &e {
                CliError::Config(c) => Some(c.field.clone()),
                _ => None,
            };
            eprintln!(
                "{}",
                json!({ "command": cli.command.name(), "error": e.kind(), "field": field, "message": e.to_string() })
            );
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
