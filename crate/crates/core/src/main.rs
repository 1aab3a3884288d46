use clap::{Args, Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use mlog::cli::{cmd_detect, cmd_eval, cmd_localize, cmd_simulate, preset, summarize, Config, PRESET_NAMES};

#[derive(Parser)]
#[command(name = "mlog", version, about = "Monocular 5-DoF localization over a grid-line floor")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON configuration file.
    #[arg(long, global = true, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in configuration: default, paper-trial-1, paper-trial-2, paper-trial-3, overspeed.
    #[arg(long, global = true)]
    preset: Option<String>,
    /// Seed for every random generator; overrides the config value.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    output: PathBuf,
    /// Allow overspeed trajectories and overwrite existing output files.
    #[arg(long, global = true)]
    force: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Render a synthetic flight: lines.jsonl, truth.csv, config.json, calibration.json.
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Detect lines in PGM (P5) images, one frame per image: lines.jsonl.
    Detect {
        #[arg(required = true)]
        images: Vec<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Localize a line stream: trajectory.csv, diagnostics.json, timings.json.
    Localize {
        lines: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Compare a trajectory with ground truth: report.json, aligned.csv.
    Eval {
        trajectory: PathBuf,
        truth: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

fn load_config(c: &Common) -> mlog::Result<Config> {
    let cfg = match (&c.config, &c.preset) {
        (Some(path), _) => Config::load(path)?,
        (None, Some(name)) => preset(name)?,
        (None, None) => Config::default(),
    };
    Ok(cfg.with_seed(c.seed))
}

fn run(cli: Cli) -> mlog::Result<()> {
    match cli.command {
        Command::Simulate { common } => {
            let cfg = load_config(&common)?;
            let s = cmd_simulate(&cfg, &common.output, common.force)?;
            report(&common.output, &format!("{} frames simulated", s.frames.len()));
        }
        Command::Detect { images, common } => {
            let cfg = load_config(&common)?;
            let frames = cmd_detect(&cfg, &images, &common.output, common.force)?;
            let n: usize = frames.iter().map(|f| f.lines.len()).sum();
            report(&common.output, &format!("{n} lines in {} images", frames.len()));
        }
        Command::Localize { lines, common } => {
            let cfg = load_config(&common)?;
            let out = cmd_localize(&cfg, &lines, &common.output, common.force)?;
            let s = summarize(&out);
            report(
                &common.output,
                &format!("{} frames: {} accepted, {} partial, {} dropped", s.n_frames, s.accepted, s.partial, s.dropped),
            );
        }
        Command::Eval { trajectory, truth, common } => {
            let cfg = load_config(&common)?;
            let r = cmd_eval(&cfg, &trajectory, &truth, &common.output, common.force)?;
            for s in &r.report.states {
                println!("{:<6} mean {:>9.4}  rmse {:>9.4}  sd {:>9.4}", s.state, s.mean, s.rmse, s.sd);
            }
            report(&common.output, &format!("{} frames evaluated", r.report.n_frames));
        }
    }
    Ok(())
}

fn report(dir: &Path, what: &str) {
    eprintln!("{what}; wrote {}", dir.display());
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, mlog::Error::InvalidConfig { ref field, .. } if field == "preset") {
                eprintln!("presets: {}", PRESET_NAMES.join(", "));
            }
            ExitCode::FAILURE
        }
    }
}
