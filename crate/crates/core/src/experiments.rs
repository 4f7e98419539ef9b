//! Batch experiment runner, goodness-of-fit analysis, and report files.

use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::ensembles::{EnsembleSpec, SeedSpec};
use crate::error::{Error, Result};
use crate::laws::{law_for, LimitLaw};
use crate::special::QuadratureSpec;
use crate::stats::{goe_pair_max, wishart_pair_max};

/// One batch run: ensemble, replicate count, seeding and output knobs.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub ensemble: EnsembleSpec,
    pub replicates: usize,
    pub master_seed: u64,
    /// None means use the rayon default ("auto").
    pub threads: Option<usize>,
    /// Overrides the law implied by the ensemble's ξ.
    pub law_override: Option<LimitLaw>,
    /// JSON report path; the sample CSV lands next to it. None skips I/O.
    pub output_path: Option<PathBuf>,
    /// Optional p (or n) grid for trend studies; recorded in the config hash.
    pub grid: Option<Vec<usize>>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::domain("replicates must be >= 1".to_string()));
        }
        if self.threads == Some(0) {
            return Err(Error::domain("threads must be >= 1 or auto".to_string()));
        }
        self.ensemble.validate()
    }

    /// Canonical one-line-per-field text form; the report hash is the FNV-1a
    /// of this string, so any field change shows up in the outputs.
    pub fn canonical_text(&self) -> String {
        let ens = match self.ensemble {
            EnsembleSpec::DeformedGoe { xi, p } => format!("deformed_goe xi={xi} p={p}"),
            EnsembleSpec::Wishart { n, p, dist } => {
                format!("wishart n={n} p={p} dist={}", dist.label())
            }
        };
        let law = match &self.law_override {
            Some(l) => l.describe(),
            None => "auto".to_string(),
        };
        let grid = match &self.grid {
            Some(g) => g.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","),
            None => "none".to_string(),
        };
        format!(
            "ensemble={ens}\nreplicates={}\nmaster_seed={}\nthreads={}\nlaw={law}\ngrid={grid}\nout={}\n",
            self.replicates,
            self.master_seed,
            self.threads.map_or("auto".to_string(), |t| t.to_string()),
            self.output_path.as_deref().unwrap_or(Path::new("none")).display(),
        )
    }

    pub fn config_hash(&self) -> String {
        format!("{:016x}", fnv1a64(self.canonical_text().as_bytes()))
    }

    /// The limit law this run is scored against.
    pub fn law(&self) -> Result<LimitLaw> {
        match self.law_override {
            Some(l) => Ok(l),
            None => law_for(self.ensemble.xi()),
        }
    }
}

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// One replicate's statistic.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ReplicateStat {
    pub replicate: usize,
    pub raw: f64,
    pub normalized: f64,
}

/// Runs the configured number of replicates, work-stealing over replicate
/// indices; outputs are gathered by index, so the result is a pure function
/// of (config, master_seed) whatever the thread count.
pub fn run_mc(config: &ExperimentConfig) -> Result<Vec<ReplicateStat>> {
    config.validate()?;
    let body = |k: usize| -> Result<ReplicateStat> {
        let seed = SeedSpec::new(config.master_seed, k as u64);
        let r = match config.ensemble {
            EnsembleSpec::DeformedGoe { xi, p } => goe_pair_max(xi, p, seed)?,
            EnsembleSpec::Wishart { n, p, dist } => wishart_pair_max(n, p, dist, seed)?,
        };
        Ok(ReplicateStat { replicate: k, raw: r.raw_max, normalized: r.normalized })
    };
    let run = || (0..config.replicates).into_par_iter().map(body).collect::<Result<Vec<_>>>();
    match config.threads {
        None => run(),
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::domain(format!("thread pool: {e}")))?
            .install(run),
    }
}

/// Two-sided one-sample Kolmogorov-Smirnov distance between the samples and
/// the law: max over order statistics of max(F(x_(i)) − (i−1)/R, i/R − F(x_(i))).
pub fn ks_distance(samples: &[f64], law: &LimitLaw, spec: &QuadratureSpec) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::domain("ks_distance: empty sample".to_string()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("non-NaN statistics"));
    let n = sorted.len() as f64;
    let mut d = 0.0f64;
    for (i, x) in sorted.iter().enumerate() {
        let f = law.cdf(*x, spec)?;
        let hi = (i as f64 + 1.0) / n - f;
        let lo = f - i as f64 / n;
        d = d.max(hi).max(lo);
    }
    Ok(d.clamp(0.0, 1.0))
}

/// Goodness-of-fit report persisted as JSON alongside the sample CSV.
#[derive(Clone, Debug, Serialize)]
pub struct GofReport {
    pub ks: f64,
    pub n_samples: usize,
    pub law: String,
    pub sample_median: f64,
    pub config_hash: String,
    /// Unix seconds at write time; not part of the hash.
    pub timestamp: u64,
    pub ecdf_grid: Vec<(f64, f64)>,
    pub theory_grid: Vec<(f64, f64)>,
}

const GRID_POINTS: usize = 201;

fn median_of_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Builds the report and, when the config names an output path, writes the
/// JSON report there and the samples as CSV next to it
/// (`replicate,raw_stat,normalized_stat`, shortest round-trip decimals, LF).
pub fn write_report(
    stats: &[ReplicateStat],
    law: &LimitLaw,
    config: &ExperimentConfig,
    spec: &QuadratureSpec,
) -> Result<GofReport> {
    if stats.is_empty() {
        return Err(Error::domain("write_report: no statistics".to_string()));
    }
    let mut sorted: Vec<f64> = stats.iter().map(|s| s.normalized).collect();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("non-NaN statistics"));
    let ks = ks_distance(&sorted, law, spec)?;
    let (lo, hi) = (sorted[0], sorted[sorted.len() - 1]);
    let span = (hi - lo).max(1e-12);
    let mut ecdf_grid = Vec::with_capacity(GRID_POINTS);
    let mut theory_grid = Vec::with_capacity(GRID_POINTS);
    for k in 0..GRID_POINTS {
        let z = lo + span * k as f64 / (GRID_POINTS - 1) as f64;
        let count = sorted.partition_point(|&v| v <= z);
        ecdf_grid.push((z, count as f64 / sorted.len() as f64));
        theory_grid.push((z, law.cdf(z, spec)?));
    }
    let report = GofReport {
        ks,
        n_samples: stats.len(),
        law: law.describe(),
        sample_median: median_of_sorted(&sorted),
        config_hash: config.config_hash(),
        timestamp: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        ecdf_grid,
        theory_grid,
    };
    if let Some(json_path) = &config.output_path {
        let file = std::fs::File::create(json_path)?;
        let mut w = std::io::BufWriter::new(file);
        serde_json::to_writer_pretty(&mut w, &report)?;
        w.write_all(b"\n")?;
        write_samples_csv(&csv_path_for(json_path), stats)?;
    }
    Ok(report)
}

/// The CSV sits next to the JSON report with the extension swapped.
pub fn csv_path_for(json_path: &Path) -> PathBuf {
    json_path.with_extension("csv")
}

pub fn write_samples_csv(path: &Path, stats: &[ReplicateStat]) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    w.write_all(b"replicate,raw_stat,normalized_stat\n")?;
    for s in stats {
        writeln!(w, "{},{},{}", s.replicate, s.raw, s.normalized)?;
    }
    Ok(())
}

/// Parses a samples CSV written by [`write_samples_csv`].
pub fn read_samples_csv(path: &Path) -> Result<Vec<ReplicateStat>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if idx == 0 {
            if line != "replicate,raw_stat,normalized_stat" {
                return Err(Error::CsvParse { line: 1, msg: format!("unexpected header {line:?}") });
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let parse_err = |msg: &str| Error::CsvParse { line: idx + 1, msg: msg.to_string() };
        let replicate = parts
            .next()
            .ok_or_else(|| parse_err("missing replicate"))?
            .parse::<usize>()
            .map_err(|e| parse_err(&format!("replicate: {e}")))?;
        let raw = parts
            .next()
            .ok_or_else(|| parse_err("missing raw_stat"))?
            .parse::<f64>()
            .map_err(|e| parse_err(&format!("raw_stat: {e}")))?;
        let normalized = parts
            .next()
            .ok_or_else(|| parse_err("missing normalized_stat"))?
            .parse::<f64>()
            .map_err(|e| parse_err(&format!("normalized_stat: {e}")))?;
        out.push(ReplicateStat { replicate, raw, normalized });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::EntryDistribution;

    fn goe_config(xi: f64, p: usize, reps: usize, seed: u64) -> ExperimentConfig {
        ExperimentConfig {
            ensemble: EnsembleSpec::DeformedGoe { xi, p },
            replicates: reps,
            master_seed: seed,
            threads: None,
            law_override: None,
            output_path: None,
            grid: None,
        }
    }

    #[test]
    fn run_mc_deterministic_and_prefix_preserving() {
        let a = run_mc(&goe_config(1.0, 40, 30, 9)).unwrap();
        let b = run_mc(&goe_config(1.0, 40, 30, 9)).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.normalized.to_bits(), y.normalized.to_bits());
        }
        let longer = run_mc(&goe_config(1.0, 40, 60, 9)).unwrap();
        for (x, y) in a.iter().zip(longer.iter().take(30)) {
            assert_eq!(x.normalized.to_bits(), y.normalized.to_bits());
        }
        assert_eq!(a.len(), 30);
        assert_eq!(longer.len(), 60);
    }

    #[test]
    fn run_mc_thread_invariance() {
        let mut one = goe_config(2.0, 64, 24, 123);
        one.threads = Some(1);
        let mut four = goe_config(2.0, 64, 24, 123);
        four.threads = Some(4);
        let a = run_mc(&one).unwrap();
        let b = run_mc(&four).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.replicate, y.replicate);
            assert_eq!(x.raw.to_bits(), y.raw.to_bits());
            assert_eq!(x.normalized.to_bits(), y.normalized.to_bits());
        }
    }

    #[test]
    fn ks_constructed_cases() {
        let spec = QuadratureSpec::default();
        let law = LimitLaw::Gumbel;
        // samples at quantiles (i-0.5)/R give exactly 0.5/R
        let r = 200;
        let samples: Vec<f64> = (1..=r)
            .map(|i| law.quantile((i as f64 - 0.5) / r as f64, &spec).unwrap())
            .collect();
        let d = ks_distance(&samples, &law, &spec).unwrap();
        assert!((d - 0.5 / r as f64).abs() < 1e-12, "d = {d}");
        // a single sample at the median
        let med = law.quantile(0.5, &spec).unwrap();
        let d1 = ks_distance(&[med], &law, &spec).unwrap();
        assert!((d1 - 0.5).abs() < 1e-12);
        // shifting the grid by +10 pushes KS near 1
        let shifted: Vec<f64> = samples.iter().map(|v| v + 10.0).collect();
        let d2 = ks_distance(&shifted, &law, &spec).unwrap();
        assert!(d2 >= 0.9, "d2 = {d2}");
        assert!(ks_distance(&[], &law, &spec).is_err());
    }

    #[test]
    fn config_hash_sensitivity() {
        let base = goe_config(1.0, 50, 10, 7);
        let mut other = base.clone();
        other.master_seed = 8;
        assert_ne!(base.config_hash(), other.config_hash());
        let mut other = base.clone();
        other.replicates = 11;
        assert_ne!(base.config_hash(), other.config_hash());
        let mut other = base.clone();
        other.ensemble = EnsembleSpec::Wishart { n: 100, p: 50, dist: EntryDistribution::Rademacher };
        assert_ne!(base.config_hash(), other.config_hash());
        assert_eq!(base.config_hash(), base.clone().config_hash());
    }

    #[test]
    fn csv_roundtrip_exact() {
        let dir = std::env::temp_dir().join(format!("minormax-test-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("samples.csv");
        let stats = run_mc(&goe_config(0.5, 30, 20, 3)).unwrap();
        write_samples_csv(&path, &stats).unwrap();
        let back = read_samples_csv(&path).unwrap();
        assert_eq!(back.len(), stats.len());
        for (a, b) in stats.iter().zip(&back) {
            assert_eq!(a.replicate, b.replicate);
            assert_eq!(a.raw.to_bits(), b.raw.to_bits());
            assert_eq!(a.normalized.to_bits(), b.normalized.to_bits());
        }
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn report_fields() {
        let spec = QuadratureSpec::default();
        let mut config = goe_config(4.0, 40, 50, 5);
        config.law_override = None;
        let stats = run_mc(&config).unwrap();
        let law = config.law().unwrap();
        let report = write_report(&stats, &law, &config, &spec).unwrap();
        assert_eq!(report.n_samples, 50);
        assert!(report.law.contains("eta="), "GXi law must record eta: {}", report.law);
        assert_eq!(report.config_hash, config.config_hash());
        assert_eq!(report.ecdf_grid.len(), report.theory_grid.len());
        // recomputing KS from the raw samples reproduces the report value
        let samples: Vec<f64> = stats.iter().map(|s| s.normalized).collect();
        let ks = ks_distance(&samples, &law, &spec).unwrap();
        assert!((ks - report.ks).abs() <= 1e-15);
    }
}
