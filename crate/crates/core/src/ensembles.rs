//! Seedable, reproducible samplers for the deformed GOE and for Wishart data
//! matrices with pluggable entry distributions.
//!
//! Reproducibility contract: every replicate owns a ChaCha8 stream whose
//! 256-bit key is derived from (master_seed, replicate_index) by SplitMix64,
//! and all normal variates come from `rand_distr::StandardNormal` (ziggurat).
//! Per-replicate output is therefore a pure function of the seed pair,
//! independent of thread count and execution order.

use crate::error::{Error, Result};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, StudentT, Uniform};
use serde::Serialize;

/// Refuse Wishart draws above this many matrix entries (n·p).
pub const WISHART_ENTRY_BUDGET: usize = 200_000_000;

/// Entry distribution for the Wishart data matrix: mean 0, variance 1, with a
/// known diagonal-variance parameter ξ = Var(x²) = E x⁴ − 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum EntryDistribution {
    /// Standard normal, ξ = 2.
    StdGaussian,
    /// ±1 with probability 1/2 each, ξ = 0.
    Rademacher,
    /// Uniform on [−√3, √3], ξ = E u⁴ − 1 = 9/5 − 1 = 4/5.
    UniformVar1,
    /// Student t with df > 6 scaled to unit variance; ξ = 2 + 6/(df − 4) > 2
    /// and the sixth moment is finite, as the Wishart limit theorem requires.
    ScaledStudent { df: f64 },
}

impl EntryDistribution {
    /// The population ξ = Var(x²) this distribution reports for normalization.
    pub fn xi(&self) -> f64 {
        match *self {
            EntryDistribution::StdGaussian => 2.0,
            EntryDistribution::Rademacher => 0.0,
            EntryDistribution::UniformVar1 => 0.8,
            EntryDistribution::ScaledStudent { df } => 2.0 + 6.0 / (df - 4.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let EntryDistribution::ScaledStudent { df } = *self {
            if !(df > 6.0) {
                return Err(Error::domain(format!(
                    "ScaledStudent requires df > 6 for a finite sixth moment, got {df}"
                )));
            }
        }
        Ok(())
    }

    pub fn label(&self) -> String {
        match *self {
            EntryDistribution::StdGaussian => "gaussian".to_string(),
            EntryDistribution::Rademacher => "rademacher".to_string(),
            EntryDistribution::UniformVar1 => "uniform".to_string(),
            EntryDistribution::ScaledStudent { df } => format!("student(df={df})"),
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match *self {
            EntryDistribution::StdGaussian => rng.sample(StandardNormal),
            EntryDistribution::Rademacher => {
                if rng.gen::<u64>() & 1 == 0 {
                    1.0
                } else {
                    -1.0
                }
            }
            EntryDistribution::UniformVar1 => {
                let root3 = 3.0f64.sqrt();
                Uniform::new_inclusive(-root3, root3).sample(rng)
            }
            EntryDistribution::ScaledStudent { df } => {
                let t: f64 = StudentT::new(df).expect("validated df").sample(rng);
                t * ((df - 2.0) / df).sqrt()
            }
        }
    }
}

/// Which ensemble a run samples from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum EnsembleSpec {
    DeformedGoe { xi: f64, p: usize },
    Wishart { n: usize, p: usize, dist: EntryDistribution },
}

impl EnsembleSpec {
    /// ξ used for the limit-law normalization of this ensemble.
    pub fn xi(&self) -> f64 {
        match *self {
            EnsembleSpec::DeformedGoe { xi, .. } => xi,
            EnsembleSpec::Wishart { dist, .. } => dist.xi(),
        }
    }

    pub fn p(&self) -> usize {
        match *self {
            EnsembleSpec::DeformedGoe { p, .. } | EnsembleSpec::Wishart { p, .. } => p,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            EnsembleSpec::DeformedGoe { xi, p } => {
                if !(xi >= 0.0) || !xi.is_finite() {
                    return Err(Error::domain(format!("deformed GOE: xi={xi} must be >= 0")));
                }
                if p < 2 {
                    return Err(Error::domain(format!("deformed GOE: p={p} must be >= 2")));
                }
                Ok(())
            }
            EnsembleSpec::Wishart { n, p, dist } => {
                if n < 1 || p < 2 {
                    return Err(Error::domain(format!("wishart: need n >= 1, p >= 2 (got {n}, {p})")));
                }
                dist.validate()?;
                if n.saturating_mul(p) > WISHART_ENTRY_BUDGET {
                    return Err(Error::Budget(format!(
                        "wishart draw of {n}x{p} = {} entries exceeds budget {WISHART_ENTRY_BUDGET}",
                        n.saturating_mul(p)
                    )));
                }
                Ok(())
            }
        }
    }
}

/// Identifies one replicate's random stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub replicate_index: u64,
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E3779B97F4A7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

impl SeedSpec {
    pub fn new(master_seed: u64, replicate_index: u64) -> Self {
        SeedSpec { master_seed, replicate_index }
    }

    /// The replicate's generator: ChaCha8 keyed by four SplitMix64 outputs.
    /// The first output mixes the master seed alone, then the replicate index
    /// is folded in with a Weyl multiplier before the key words are drawn.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut state = self.master_seed;
        let _ = splitmix64(&mut state);
        state ^= self.replicate_index.wrapping_mul(0xD1B54A32D192ED03);
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        ChaCha8Rng::from_seed(key)
    }
}

/// The p diagonal entries of a deformed GOE replicate: i.i.d. N(0, ξ).
///
/// The stream always consumes exactly p normal draws, so the off-diagonal
/// block that follows starts at the same position whatever ξ is; at ξ = 0 the
/// returned vector is exactly zero.
pub fn draw_goe_diag(xi: f64, p: usize, seed: SeedSpec) -> Result<Vec<f64>> {
    if !(xi >= 0.0) || !xi.is_finite() {
        return Err(Error::domain(format!("draw_goe_diag: xi={xi} must be >= 0")));
    }
    let mut rng = seed.rng();
    let sd = xi.sqrt();
    let mut out = Vec::with_capacity(p);
    for _ in 0..p {
        let g: f64 = rng.sample(StandardNormal);
        out.push(if xi == 0.0 { 0.0 } else { sd * g });
    }
    Ok(out)
}

/// Streams the p(p−1)/2 i.i.d. N(0, 1) upper-triangular entries in row-major
/// (i < j, 0-based) order without materializing the matrix. The consumer
/// returns false to stop early. The replicate stream's first p draws belong
/// to the diagonal block and are skipped here.
pub fn stream_goe_offdiag<F>(p: usize, seed: SeedSpec, mut consumer: F) -> Result<()>
where
    F: FnMut(usize, usize, f64) -> bool,
{
    if p < 2 {
        return Err(Error::domain(format!("stream_goe_offdiag: p={p} must be >= 2")));
    }
    let mut rng = seed.rng();
    for _ in 0..p {
        let _: f64 = rng.sample(StandardNormal);
    }
    for i in 0..p {
        for j in (i + 1)..p {
            let z: f64 = rng.sample(StandardNormal);
            if !consumer(i, j, z) {
                return Ok(());
            }
        }
    }
    Ok(())
}

/// An n×p data matrix with i.i.d. entries from `dist`, stored column-major
/// (column j occupies `out[j*n .. (j+1)*n]`). Unlike the full ensemble this
/// accepts p = 1; only the entry budget and the distribution are checked.
pub fn draw_wishart_x(n: usize, p: usize, dist: EntryDistribution, seed: SeedSpec) -> Result<Vec<f64>> {
    if n < 1 || p < 1 {
        return Err(Error::domain(format!("draw_wishart_x: need n >= 1, p >= 1 (got {n}, {p})")));
    }
    dist.validate()?;
    if n.saturating_mul(p) > WISHART_ENTRY_BUDGET {
        return Err(Error::Budget(format!(
            "wishart draw of {n}x{p} = {} entries exceeds budget {WISHART_ENTRY_BUDGET}",
            n.saturating_mul(p)
        )));
    }
    let mut rng = seed.rng();
    let mut out = Vec::with_capacity(n * p);
    for _ in 0..n * p {
        out.push(dist.sample(&mut rng));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diag_zero_at_xi0_and_stream_alignment() {
        let seed = SeedSpec::new(7, 3);
        let d0 = draw_goe_diag(0.0, 64, seed).unwrap();
        assert!(d0.iter().all(|&v| v == 0.0));
        // the off-diagonal stream is unaffected by the value of xi
        let mut a = Vec::new();
        stream_goe_offdiag(8, seed, |_, _, z| {
            a.push(z);
            true
        })
        .unwrap();
        let d1 = draw_goe_diag(3.0, 8, seed).unwrap();
        assert!(d1.iter().any(|&v| v != 0.0));
        let mut b = Vec::new();
        stream_goe_offdiag(8, seed, |_, _, z| {
            b.push(z);
            true
        })
        .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn diag_variance_near_xi() {
        let p = 1_000_000;
        let d = draw_goe_diag(3.0, p, SeedSpec::new(11, 0)).unwrap();
        let mean = d.iter().sum::<f64>() / p as f64;
        let var = d.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (p as f64 - 1.0);
        assert!((var / 3.0 - 1.0).abs() < 0.02, "var {var}");
    }

    #[test]
    fn offdiag_order_count_and_replay() {
        let seed = SeedSpec::new(42, 0);
        let mut seen = Vec::new();
        stream_goe_offdiag(3, seed, |i, j, z| {
            seen.push((i, j, z));
            true
        })
        .unwrap();
        assert_eq!(seen.len(), 3);
        assert_eq!(
            seen.iter().map(|&(i, j, _)| (i, j)).collect::<Vec<_>>(),
            vec![(0, 1), (0, 2), (1, 2)]
        );
        let mut replay = Vec::new();
        stream_goe_offdiag(3, seed, |i, j, z| {
            replay.push((i, j, z));
            true
        })
        .unwrap();
        assert_eq!(seen, replay);
        // early stop
        let mut n = 0;
        stream_goe_offdiag(40, seed, |_, _, _| {
            n += 1;
            n < 5
        })
        .unwrap();
        assert_eq!(n, 5);
    }

    #[test]
    fn offdiag_empirical_variance() {
        let p = 2000;
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        let mut count = 0usize;
        stream_goe_offdiag(p, SeedSpec::new(5, 9), |_, _, z| {
            sum += z;
            sum2 += z * z;
            count += 1;
            true
        })
        .unwrap();
        assert_eq!(count, p * (p - 1) / 2);
        let mean = sum / count as f64;
        let var = sum2 / count as f64 - mean * mean;
        assert!((var - 1.0).abs() < 0.01, "var {var}");
    }

    #[test]
    fn wishart_entries_and_replay() {
        let x = draw_wishart_x(50, 4, EntryDistribution::Rademacher, SeedSpec::new(1, 2)).unwrap();
        assert_eq!(x.len(), 200);
        assert!(x.iter().all(|&v| v == 1.0 || v == -1.0));
        let y = draw_wishart_x(50, 4, EntryDistribution::Rademacher, SeedSpec::new(1, 2)).unwrap();
        assert_eq!(x, y);
        // column mean of a long Gaussian draw: CLT bound 4/sqrt(n)
        let n = 1_000_000;
        let g = draw_wishart_x(n, 1, EntryDistribution::StdGaussian, SeedSpec::new(3, 0)).unwrap();
        let mean = g.iter().sum::<f64>() / n as f64;
        assert!(mean.abs() < 4.0 / (n as f64).sqrt(), "mean {mean}");
    }

    #[test]
    fn wishart_budget() {
        let r = draw_wishart_x(300_000_000, 2, EntryDistribution::StdGaussian, SeedSpec::new(0, 0));
        assert!(matches!(r, Err(Error::Budget(_))));
    }

    #[test]
    fn entry_moments_match_reported_xi() {
        // 1e7 draws: |mean| <= 4e-3.5, |var-1| <= 0.01, |xi_hat/xi - 1| <= 3%.
        let dists = [
            EntryDistribution::StdGaussian,
            EntryDistribution::Rademacher,
            EntryDistribution::UniformVar1,
            EntryDistribution::ScaledStudent { df: 9.0 },
        ];
        let n = 10_000_000usize;
        for (k, dist) in dists.iter().enumerate() {
            dist.validate().unwrap();
            let mut rng = SeedSpec::new(2024, k as u64).rng();
            let (mut s1, mut s2, mut s4) = (0.0, 0.0, 0.0);
            for _ in 0..n {
                let v = dist.sample(&mut rng);
                s1 += v;
                s2 += v * v;
                s4 += v * v * v * v;
            }
            let mean = s1 / n as f64;
            let var = s2 / n as f64 - mean * mean;
            let xi_hat = s4 / n as f64 - 1.0;
            assert!(mean.abs() <= 4.0 * 10f64.powf(-3.5), "{}: mean {mean}", dist.label());
            assert!((var - 1.0).abs() <= 0.01, "{}: var {var}", dist.label());
            let xi = dist.xi();
            if xi == 0.0 {
                assert!(xi_hat.abs() <= 1e-12, "{}: xi_hat {xi_hat}", dist.label());
            } else {
                assert!((xi_hat / xi - 1.0).abs() <= 0.03, "{}: xi_hat {xi_hat} vs {xi}", dist.label());
            }
        }
    }

    #[test]
    fn student_df_guard() {
        assert!(EntryDistribution::ScaledStudent { df: 6.0 }.validate().is_err());
        assert!(EntryDistribution::ScaledStudent { df: 9.0 }.validate().is_ok());
    }

    #[test]
    fn replicate_streams_uncorrelated() {
        // scalar summary per replicate: mean of 32 draws; adjacent replicates
        // over 10^4 pairs should show |corr| <= 0.05
        let reps = 10_001;
        let mut summaries = Vec::with_capacity(reps);
        for k in 0..reps {
            let mut rng = SeedSpec::new(99, k as u64).rng();
            let mut s = 0.0;
            for _ in 0..32 {
                let g: f64 = rng.sample(StandardNormal);
                s += g;
            }
            summaries.push(s / 32.0);
        }
        let x: &[f64] = &summaries[..reps - 1];
        let y: &[f64] = &summaries[1..];
        let n = x.len() as f64;
        let mx = x.iter().sum::<f64>() / n;
        let my = y.iter().sum::<f64>() / n;
        let mut cov = 0.0;
        let mut vx = 0.0;
        let mut vy = 0.0;
        for i in 0..x.len() {
            cov += (x[i] - mx) * (y[i] - my);
            vx += (x[i] - mx).powi(2);
            vy += (y[i] - my).powi(2);
        }
        let corr = cov / (vx * vy).sqrt();
        assert!(corr.abs() <= 0.05, "corr {corr}");
    }
}
