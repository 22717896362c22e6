use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use gunsmoke_pipeline::fixture::write_fixture;
use gunsmoke_pipeline::stages::REPORT_TEXT;
use gunsmoke_pipeline::{service, Config, Pipeline, RunOptions, Stage};

#[derive(Parser)]
#[command(
    name = "gunsmoke",
    version,
    about = "Find gunshots in video audio, then localize smoke, shooter and muzzle"
)]
struct Cli {
    /// Configuration file.
    #[arg(long, global = true, default_value = "gunsmoke.toml")]
    config: PathBuf,
    /// Run to create or resume; defaults to a hash of the configuration.
    #[arg(long, global = true)]
    run_id: Option<String>,
    /// Confirm every gated segment without human review.
    #[arg(long, global = true)]
    no_review: bool,
    /// Worker threads for per-frame and per-segment work.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract audio features and build the codebook.
    Ingest,
    /// Train the classifier and rank segments.
    ScoreAudio,
    /// Rerank with self-paced pseudo-labeling.
    Rerank,
    /// Gate the ranked list by confidence.
    Threshold,
    /// Serve the review interface for gated segments.
    Serve {
        #[arg(long)]
        bind: Option<String>,
    },
    /// Optical flow over frames of confirmed segments.
    Flow,
    /// Smoke blobs from the flow fields.
    DetectSmoke,
    /// Shooter matching and muzzle placement.
    Localize,
    /// Score localizations against annotations and print the report.
    Evaluate,
    /// Every stage through evaluation.
    RunAll,
    /// Show the stage table of the run.
    Status,
    /// Write the synthetic demo corpus.
    Fixture {
        dir: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("thread pool")?;
    }
    let stage = match &cli.command {
        Command::Fixture { dir, seed } => {
            let s = write_fixture(dir, *seed)?;
            println!(
                "wrote {} videos ({} with a shot); config {}",
                s.videos,
                s.shots,
                s.config.display()
            );
            return Ok(());
        }
        Command::Ingest => Some(Stage::Audio),
        Command::ScoreAudio => Some(Stage::Score),
        Command::Rerank => Some(Stage::Rerank),
        Command::Threshold => Some(Stage::Threshold),
        Command::Flow => Some(Stage::Flow),
        Command::DetectSmoke => Some(Stage::Smoke),
        Command::Localize => Some(Stage::Localize),
        Command::Evaluate | Command::RunAll => Some(Stage::Eval),
        Command::Serve { .. } | Command::Status => None,
    };
    let config = Config::load(&cli.config)?;
    let opts = RunOptions {
        run_id: cli.run_id.clone(),
        no_review: cli.no_review,
    };
    let pipeline = Pipeline::open(config, &opts)?;
    match (&cli.command, stage) {
        (Command::Serve { bind }, _) => {
            let bind = bind.clone().unwrap_or_else(|| pipeline.config.service.bind.clone());
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(service::serve(&pipeline, &bind))?;
        }
        (Command::Status, _) => print!("{}", pipeline.manifest()?.summary()),
        (_, Some(stage)) => {
            let manifest = pipeline.run(&[stage])?;
            if stage == Stage::Eval {
                let report = std::fs::read_to_string(pipeline.run_dir.join(REPORT_TEXT))?;
                print!("{report}");
            } else {
                print!("{}", manifest.summary());
            }
        }
        (_, None) => unreachable!("every other command names a stage"),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
