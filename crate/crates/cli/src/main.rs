//! Command-line driver: simulation runs, limit-law evaluation, lemma
//! diagnostics, and re-analysis of sample files.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use minormax_core::ensembles::{EnsembleSpec, EntryDistribution};
use minormax_core::experiments::{ks_distance, read_samples_csv, run_mc, write_report, ExperimentConfig};
use minormax_core::kernels::{chores_limits, KernelContext};
use minormax_core::laws::{feng_consistency_delta, law_for, LimitLaw};
use minormax_core::special::QuadratureSpec;
use minormax_core::Error;

#[derive(Parser)]
#[command(name = "minormax", version, about = "Pair-maximum eigenvalue statistics for deformed GOE and Wishart ensembles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum LawArg {
    Auto,
    Gumbel,
    Gxi,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum DistArg {
    Gaussian,
    Rademacher,
    Uniform,
}

impl From<DistArg> for EntryDistribution {
    fn from(d: DistArg) -> Self {
        match d {
            DistArg::Gaussian => EntryDistribution::StdGaussian,
            DistArg::Rademacher => EntryDistribution::Rademacher,
            DistArg::Uniform => EntryDistribution::UniformVar1,
        }
    }
}

#[derive(Args)]
struct LawSelect {
    /// Limit law to evaluate or score against.
    #[arg(long, value_enum, default_value = "auto")]
    law: LawArg,
    /// Diagonal-variance parameter; selects the law when --law auto/gxi.
    #[arg(long)]
    xi: Option<f64>,
}

impl LawSelect {
    fn resolve(&self) -> Result<LimitLaw, Error> {
        match self.law {
            LawArg::Gumbel => Ok(LimitLaw::Gumbel),
            LawArg::Auto | LawArg::Gxi => {
                let xi = self.xi.ok_or_else(|| {
                    Error::Domain("--xi is required with --law auto/gxi".to_string())
                })?;
                let law = law_for(xi)?;
                if matches!(self.law, LawArg::Gxi) && law == LimitLaw::Gumbel {
                    return Err(Error::Domain(format!(
                        "--law gxi needs xi > 2, got {xi} (that xi falls in the Gumbel range)"
                    )));
                }
                Ok(law)
            }
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run Monte Carlo replicates and write a goodness-of-fit report.
    Simulate {
        /// Diagonal variance for the deformed GOE.
        #[arg(long)]
        xi: Option<f64>,
        /// Matrix dimension p (number of columns for Wishart).
        #[arg(long)]
        p: usize,
        /// Sample size n; presence selects the Wishart ensemble.
        #[arg(long)]
        n: Option<usize>,
        /// Wishart entry distribution.
        #[arg(long, value_enum, default_value = "gaussian")]
        dist: DistArg,
        #[arg(long)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Worker threads; "auto" uses all cores.
        #[arg(long, default_value = "auto")]
        threads: String,
        /// JSON report path; the sample CSV lands next to it.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "auto")]
        law: LawArg,
        /// Comma-separated p grid for a trend study; reports get -p<value>
        /// suffixes.
        #[arg(long)]
        pgrid: Option<String>,
    },
    /// Evaluate a limit-law distribution function.
    Cdf {
        #[command(flatten)]
        law: LawSelect,
        #[arg(long)]
        z: f64,
    },
    /// Evaluate a limit-law quantile.
    Quantile {
        #[command(flatten)]
        law: LawSelect,
        #[arg(long)]
        q: f64,
    },
    /// Quadrature diagnostics: kernel limits against their closed-form predictions over a p grid.
    VerifyLemmas {
        #[arg(long)]
        xi: f64,
        /// Comma-separated p values (reals; 1e100 is fine).
        #[arg(long, default_value = "1e10,1e100")]
        pgrid: String,
        #[arg(long, default_value_t = 0.0)]
        y: f64,
        #[arg(long, default_value_t = 0.0)]
        z: f64,
        /// Highest moment order j to check.
        #[arg(long, default_value_t = 3)]
        jmax: u32,
        /// Optional CSV output path (columns diagnostic,p,value,predicted_limit,ratio).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-analyze an existing samples CSV: recompute the KS distance.
    Ks {
        /// Path to a samples CSV written by `simulate`.
        #[arg(long = "in")]
        input: PathBuf,
        #[command(flatten)]
        law: LawSelect,
    },
    /// Agreement table between the two ξ = 2 limit forms.
    Consistency {
        #[arg(long, default_value = "1e8,1e100")]
        pgrid: String,
        /// Comma-separated z values.
        #[arg(long, default_value = "-2,0,2")]
        z: String,
    },
}

fn parse_f64_list(s: &str, what: &str) -> Result<Vec<f64>, Error> {
    s.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<f64>()
                .map_err(|e| Error::Domain(format!("bad {what} entry {tok:?}: {e}")))
        })
        .collect()
}

fn parse_usize_list(s: &str, what: &str) -> Result<Vec<usize>, Error> {
    s.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<usize>()
                .map_err(|e| Error::Domain(format!("bad {what} entry {tok:?}: {e}")))
        })
        .collect()
}

fn run(cli: Cli) -> Result<(), Error> {
    let spec = QuadratureSpec::default();
    match cli.command {
        Command::Simulate { xi, p, n, dist, reps, seed, threads, out, law, pgrid } => {
            let threads = match threads.as_str() {
                "auto" => None,
                t => Some(t.parse::<usize>().map_err(|e| Error::Domain(format!("--threads: {e}")))?),
            };
            let dist: EntryDistribution = dist.into();
            let p_values = match &pgrid {
                Some(g) => parse_usize_list(g, "--pgrid")?,
                None => vec![p],
            };
            for &pv in &p_values {
                let ensemble = match n {
                    Some(n) => EnsembleSpec::Wishart { n, p: pv, dist },
                    None => {
                        let xi = xi.ok_or_else(|| Error::Domain("--xi is required for GOE runs".to_string()))?;
                        EnsembleSpec::DeformedGoe { xi, p: pv }
                    }
                };
                let out_path = out.as_ref().map(|base| {
                    if p_values.len() == 1 {
                        base.clone()
                    } else {
                        let stem = base.file_stem().and_then(|s| s.to_str()).unwrap_or("run");
                        base.with_file_name(format!("{stem}-p{pv}.json"))
                    }
                });
                let config = ExperimentConfig {
                    ensemble,
                    replicates: reps,
                    master_seed: seed,
                    threads,
                    law_override: match law {
                        LawArg::Auto => None,
                        other => Some(LawSelect { law: other, xi: Some(ensemble.xi()) }.resolve()?),
                    },
                    output_path: out_path,
                    grid: pgrid.as_ref().map(|_| p_values.clone()),
                };
                let stats = run_mc(&config)?;
                let law = config.law()?;
                let report = write_report(&stats, &law, &config, &spec)?;
                println!(
                    "p={pv} reps={} law={} ks={:.6} median={:.6} hash={}",
                    reps, report.law, report.ks, report.sample_median, report.config_hash
                );
            }
        }
        Command::Cdf { law, z } => {
            let law = law.resolve()?;
            println!("{:.17}", law.cdf(z, &spec)?);
        }
        Command::Quantile { law, q } => {
            let law = law.resolve()?;
            println!("{:.17}", law.quantile(q, &spec)?);
        }
        Command::VerifyLemmas { xi, pgrid, y, z, jmax, out } => {
            let kernel_spec = QuadratureSpec::new(1e-280, 1e-9, 48)?;
            let ps = parse_f64_list(&pgrid, "--pgrid")?;
            let mut lines = vec!["diagnostic,p,value,predicted_limit,ratio".to_string()];
            println!("{:<20} {:>10} {:>14} {:>16} {:>10}", "diagnostic", "p", "value", "predicted_limit", "ratio");
            for &pv in &ps {
                let ctx = KernelContext::new(xi, pv, y, z)?;
                for d in chores_limits(&ctx, jmax, &kernel_spec)? {
                    println!(
                        "{:<20} {:>10.3e} {:>14.6e} {:>16.6e} {:>10.6}",
                        d.name, d.p, d.value, d.predicted_limit, d.ratio()
                    );
                    lines.push(format!("{},{},{},{},{}", d.name, d.p, d.value, d.predicted_limit, d.ratio()));
                }
            }
            if let Some(path) = out {
                std::fs::write(path, lines.join("\n") + "\n")?;
            }
        }
        Command::Ks { input, law } => {
            let law = law.resolve()?;
            let stats = read_samples_csv(&input)?;
            let samples: Vec<f64> = stats.iter().map(|s| s.normalized).collect();
            let ks = ks_distance(&samples, &law, &spec)?;
            println!("n={} law={} ks={:.17}", samples.len(), law.describe(), ks);
        }
        Command::Consistency { pgrid, z } => {
            let ps = parse_f64_list(&pgrid, "--pgrid")?;
            let zs = parse_f64_list(&z, "--z")?;
            println!("{:<12} {:>6} {:>14}", "p", "z", "delta");
            for &pv in &ps {
                for &zv in &zs {
                    println!("{:<12.3e} {:>6.2} {:>14.6e}", pv, zv, feng_consistency_delta(pv, zv)?);
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
