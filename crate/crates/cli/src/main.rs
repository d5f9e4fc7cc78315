//! `decaylab`: validate and run declarative decay experiments.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use decaylab::experiment::{self, emit_plotdata, ExperimentBundle, ExperimentConfig, Study};

#[derive(Parser)]
#[command(name = "decaylab", version, about = "Decay experiments for 1D damped waves with potential")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a config and check its guards without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run a config, writing the manifest and per-study CSV tables.
    Run {
        #[command(flatten)]
        common: RunArgs,
        /// Also write plot data next to the tables.
        #[arg(long)]
        plots: bool,
    },
    /// Run a config and write only the plot-data files.
    Plotdata {
        #[command(flatten)]
        common: RunArgs,
    },
    /// Run a single study on a grid given by flags.
    Study(StudyArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct StudyArgs {
    /// harmonic, spectrum, heat-decay, wave-decay, diffusion, lower-bound,
    /// matsumura, inequality, gaussian or beta1.
    study: String,
    #[arg(long, default_value = "bump")]
    potential: String,
    #[arg(long, default_value_t = 400.0)]
    half_width: f64,
    #[arg(long, default_value_t = 8001)]
    nodes: usize,
    #[arg(long, default_value = "bump")]
    profile: String,
    #[arg(long, default_value = "zero")]
    velocity: String,
    #[arg(long)]
    t_max: Option<f64>,
    /// Comma-separated weight exponents.
    #[arg(long, value_delimiter = ',')]
    betas: Option<Vec<f64>>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Extra check, e.g. `heat-decay.l2.exponent ~ -0.75 +- 0.05`.
    #[arg(long = "assert")]
    assertions: Vec<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> Result<bool> {
    if let Some(k) = cli.jobs {
        decaylab::set_threads(k)?;
    }
    match cli.command {
        Command::Validate { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            for note in experiment::validate(&cfg)? {
                println!("{note}");
            }
            println!("ok");
            Ok(true)
        }
        Command::Run { common, plots } => {
            let (cfg, out) = load(&common)?;
            let bundle = experiment::run(&cfg)?;
            bundle.write(&out).with_context(|| format!("writing {}", out.display()))?;
            if plots {
                emit_plotdata(&bundle, &out)?;
            }
            Ok(report(&bundle, &out))
        }
        Command::Plotdata { common } => {
            let (cfg, out) = load(&common)?;
            let bundle = experiment::run(&cfg)?;
            for p in emit_plotdata(&bundle, &out)? {
                println!("{}", p.display());
            }
            Ok(bundle.manifest.passed)
        }
        Command::Study(a) => {
            let study: Study = a.study.parse()?;
            let mut cfg = ExperimentConfig::from_toml(&format!(
                "potential = {:?}\nhalf_width = {:?}\nnodes = {}\nstudies = [{:?}]\n",
                a.potential,
                a.half_width,
                a.nodes,
                study.to_string()
            ))?;
            cfg.name = study.to_string();
            cfg.profile = a.profile;
            cfg.velocity = a.velocity;
            cfg.t_max = a.t_max;
            if let Some(b) = a.betas {
                cfg.betas = b;
            }
            if let Some(s) = a.seed {
                cfg.seed = s;
            }
            cfg.assertions = a.assertions;
            let bundle = experiment::run(&cfg)?;
            for (study, values) in &bundle.manifest.values {
                for (k, v) in values {
                    println!("{study}.{k} = {v:.6e}");
                }
            }
            match a.out {
                Some(out) => {
                    bundle.write(&out)?;
                    emit_plotdata(&bundle, &out)?;
                    Ok(report(&bundle, &out))
                }
                None => Ok(bundle.manifest.passed),
            }
        }
    }
}

fn load(a: &RunArgs) -> Result<(ExperimentConfig, PathBuf)> {
    let mut cfg = ExperimentConfig::load(&a.config)?;
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    let out = a
        .out
        .clone()
        .or_else(|| cfg.output.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| Path::new("out").join(&cfg.name));
    Ok((cfg, out))
}

/// Prints guards and assertion outcomes; true when all assertions hold.
fn report(bundle: &ExperimentBundle, out: &Path) -> bool {
    let m = &bundle.manifest;
    for g in &m.guards {
        eprintln!("guard [{}]: {}", g.study, g.message);
    }
    for a in &m.assertions {
        let v = a.value.map_or("missing".to_string(), |v| format!("{v:.6}"));
        println!("{} {} (value {v}, half-width {:.3})", if a.passed { "PASS" } else { "FAIL" }, a.assertion, a.half_width);
    }
    println!("wrote {}", out.join("manifest.json").display());
    if !m.passed {
        let studies: std::collections::BTreeSet<&str> =
            m.failing().iter().filter_map(|a| a.split('.').next()).collect();
        eprintln!("failing studies: {}", studies.into_iter().collect::<Vec<_>>().join(", "));
    }
    m.passed
}
