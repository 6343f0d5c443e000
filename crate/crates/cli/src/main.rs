use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use limsup_cli::commands::{cmd_covering, cmd_figures, cmd_hull, cmd_operator, describe, CoveringOutcome};
use limsup_cli::config::{CoveringMode, ExperimentConfig, Overrides};
use limsup_cli::verify::{cmd_verify, Faults, IDS};
use limsup_cli::{output_root, CliError, OUT_ENV};

#[derive(Parser)]
#[command(name = "limsup", version, about = "Random covering sets on [0,1]: measures, hitting operator, Monte Carlo experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON experiment config; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, env = OUT_ENV)]
    out: Option<PathBuf>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    depth: Option<u32>,
    /// Replaces the schedule with r_k = k^-alpha, keeping K_max.
    #[arg(long)]
    alpha: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Fault {
    HullShift,
}

#[derive(Subcommand)]
enum Command {
    /// Increasing 1-Lipschitz hull of a (t, value) CSV curve.
    Hull {
        input: PathBuf,
        /// Defaults to hull.csv in the output root.
        #[arg(long, short)]
        output: Option<PathBuf>,
        #[arg(long, env = OUT_ENV)]
        out: Option<PathBuf>,
    },
    /// Iterate the hitting operator to a fixed point.
    Operator {
        #[command(flatten)]
        common: Common,
        /// Start from the ordinal tower K_n instead of the configured set.
        #[arg(long, value_name = "N")]
        ordinal_demo: Option<u32>,
    },
    /// Covering-set experiments.
    Covering {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        mode: Option<CoveringMode>,
    },
    /// Data behind the three figures.
    Figures {
        #[arg(long, env = OUT_ENV)]
        out: Option<PathBuf>,
    },
    /// Run the acceptance suite.
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, env = OUT_ENV)]
        out: Option<PathBuf>,
        /// Comma-separated criteria, e.g. A1,A6.
        #[arg(long, value_delimiter = ',')]
        only: Vec<String>,
        #[arg(long, value_enum, hide = true)]
        fault: Option<Fault>,
    },
}

fn load(common: &Common, mode: Option<CoveringMode>) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    cfg.apply(&Overrides {
        seed: common.seed,
        out: common.out.clone(),
        trials: common.trials,
        depth: common.depth,
        alpha: common.alpha,
        mode,
    })?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Hull { input, output, out } => {
            let output = output.unwrap_or_else(|| output_root(out).join("hull.csv"));
            let h = cmd_hull(&input, &output)?;
            println!("hull of {} points written to {}", h.len(), output.display());
        }
        Command::Operator { common, ordinal_demo } => {
            let cfg = load(&common, None)?;
            let trace = cmd_operator(&cfg, ordinal_demo)?;
            let counts: Vec<usize> = trace.stages.iter().map(|s| s.1).collect();
            println!("trace {counts:?}; fixed point {}", describe(&trace.fixed_point));
        }
        Command::Covering { common, mode } => {
            let cfg = load(&common, mode)?;
            match cmd_covering(&cfg)? {
                CoveringOutcome::Dim(r) => println!("estimate {:.4} ± {:.4}", r.estimate.value, r.estimate.stderr),
                CoveringOutcome::Hit(r) => println!("hit rate {:.2} over {} trials", r.hit_rate, r.trials),
                CoveringOutcome::Dichotomy(d) => println!(
                    "fixed point {}; hit rate {:.2}; agree {}",
                    describe(&d.trace.fixed_point),
                    d.hit_rate,
                    d.agrees()
                ),
            }
        }
        Command::Figures { out } => {
            let out = output_root(out);
            cmd_figures(&out)?;
            println!("figure data written to {}", out.display());
        }
        Command::Verify { seed, out, only, fault } => {
            let ids: Vec<String> = if only.is_empty() {
                IDS.iter().map(|s| s.to_string()).collect()
            } else {
                only
            };
            let faults = Faults {
                hull_shift: matches!(fault, Some(Fault::HullShift)),
            };
            cmd_verify(&ids, seed, &output_root(out), faults)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("limsup: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
