use std::fs;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use ggm_langevin::baselines::bootstrap_fix;
use ggm_langevin::covsel::{ObservationSet, SolverOptions};
use ggm_langevin::harness::{likelihood_score_audit, run_experiment, stream_rng, ExperimentConfig, Stream};
use ggm_langevin::nalgebra::DMatrix;
use ggm_langevin::scores::GraphDataset;

#[derive(Parser)]
#[command(name = "ggm-langevin", version, about = "Graph recovery experiments for Gaussian graphical models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a graph dataset from the configured family.
    Generate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 100)]
        count: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run an experiment and write instances.csv, summary.json and timings.json.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        instances: Option<usize>,
        #[arg(long)]
        num_samples: Option<usize>,
        #[arg(long)]
        prior_dir: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Failed (instance, method) runs tolerated before exiting with an error.
        #[arg(long, default_value_t = 0)]
        max_failures: usize,
    },
    /// Compare the likelihood score with finite differences on random instances.
    ScoreCheck {
        #[arg(long, default_value_t = 50)]
        instances: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-5)]
        tolerance: f64,
    },
    /// Fix confidently estimated entries from bootstrapped graphical lasso fits.
    BootstrapFix {
        /// Whitespace-separated matrix, one row per variable, one column per observation.
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        lambda: f64,
        #[arg(long, default_value_t = 50)]
        b: usize,
        #[arg(long, default_value_t = 0.2)]
        p_m: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_config(path: Option<&Path>) -> Result<ExperimentConfig> {
    match path {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Ok(ExperimentConfig::from_toml_str(&text)?)
        }
        None => Ok(ExperimentConfig::default()),
    }
}

fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (no, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .with_context(|| format!("line {}", no + 1))?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                bail!("line {}: expected {} values, found {}", no + 1, first.len(), row.len());
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        bail!("{} holds no data", path.display());
    }
    let k = rows[0].len();
    Ok(DMatrix::from_fn(rows.len(), k, |i, j| rows[i][j]))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Generate {
            config,
            count,
            seed,
            out,
        } => {
            let cfg = load_config(config.as_deref())?;
            let seed = seed.unwrap_or(cfg.seed);
            let graphs = (0..count)
                .map(|i| cfg.family.generate(&mut stream_rng(seed, Stream::Prior, i as u64)))
                .collect::<Result<Vec<_>, _>>()?;
            GraphDataset::new(graphs)?.save_dir(&out)?;
            log::info!("wrote {count} graphs to {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Run {
            config,
            seed,
            instances,
            num_samples,
            prior_dir,
            out,
            max_failures,
        } => {
            let mut cfg = load_config(config.as_deref())?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(r) = instances {
                cfg.instances = r;
            }
            if let Some(m) = num_samples {
                cfg.num_samples = m;
            }
            if prior_dir.is_some() {
                cfg.prior_dir = prior_dir;
            }
            let output = run_experiment(&cfg)?;
            output.write_to(&out)?;
            for s in &output.report.summaries {
                let f1 = s.f1.as_ref().map_or("n/a".to_string(), |r| format!("{:.4} ± {:.4}", r.mean, r.std));
                log::info!("{:<10} k={:<8} F1 {f1} ({} ok, {} failed)", s.method, s.k_label, s.succeeded, s.failed);
            }
            let failures = output.report.failures;
            if failures > max_failures {
                log::error!("{failures} failed runs exceed the tolerance of {max_failures}");
                return Ok(ExitCode::from(1));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::ScoreCheck {
            instances,
            seed,
            tolerance,
        } => {
            let audit = likelihood_score_audit(instances, seed)?;
            println!(
                "{} instances, {} components, max relative error {:.3e}",
                audit.instances, audit.components, audit.max_relative_error
            );
            Ok(if audit.max_relative_error < tolerance {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Command::BootstrapFix {
            data,
            lambda,
            b,
            p_m,
            seed,
            out,
        } => {
            let obs = ObservationSet::new(read_matrix(&data)?)?;
            let mut rng = stream_rng(seed, Stream::Bootstrap, 0);
            let result = bootstrap_fix(&obs, lambda, b, p_m, &SolverOptions::default(), &mut rng)?;
            let mut sink: Box<dyn Write> = match &out {
                Some(p) => Box::new(fs::File::create(p).with_context(|| format!("creating {}", p.display()))?),
                None => Box::new(io::stdout().lock()),
            };
            writeln!(sink, "# n {} B {} failures {} p_m {}", obs.n(), result.b, result.failures, result.p_m)?;
            writeln!(sink, "# i j value frequency")?;
            for (i, j, value, freq) in result.fixed_entries() {
                writeln!(sink, "{i} {j} {} {freq}", u8::from(value))?;
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
