//! The pair statistics: largest eigenvalue of every 2×2 principal minor, the
//! maximum over all index pairs, and its normalization to the limit-law scale.

use crate::ensembles::{draw_goe_diag, draw_wishart_x, stream_goe_offdiag, EntryDistribution, SeedSpec};
use crate::error::{Error, Result};
use crate::laws::NormConstants;

/// Column-block width for the Wishart Gram products.
const GRAM_BLOCK: usize = 64;

/// Result of one pair-maximum evaluation.
#[derive(Clone, Copy, Debug)]
pub struct PairMaxResult {
    /// The raw maximum over pairs (i < j) of the top minor eigenvalue.
    pub raw_max: f64,
    /// The pair attaining it, 0-based, ties broken toward the row-major first.
    pub argmax_pair: (usize, usize),
    /// The statistic mapped to the limit-law scale.
    pub normalized: f64,
}

/// Largest eigenvalue of [[a, b], [b, d]]: √(b² + (a−d)²/4) + (a+d)/2.
#[inline]
pub fn top_eig_2x2(a: f64, d: f64, b: f64) -> f64 {
    let half_diff = 0.5 * (a - d);
    (b * b + half_diff * half_diff).sqrt() + 0.5 * (a + d)
}

/// Normalizing constants for the pair statistics, which accept any p ≥ 2;
/// every branch formula is still well defined there (ln 2 > 0).
fn constants_for(xi: f64, p: usize) -> Result<NormConstants> {
    if p < 2 {
        return Err(Error::domain(format!("pair statistics need p >= 2, got {p}")));
    }
    crate::laws::constants_raw(xi, p as f64)
}

/// Pair maximum for one deformed GOE replicate: draws the diagonal, streams
/// the off-diagonal entries once, and keeps the running maximum of
/// √(z_ij² + (z_ii − z_jj)²/4) + (z_ii + z_jj)/2. O(p) memory.
pub fn goe_pair_max(xi: f64, p: usize, seed: SeedSpec) -> Result<PairMaxResult> {
    let nc = constants_for(xi, p)?;
    let diag = draw_goe_diag(xi, p, seed)?;
    let mut best = f64::NEG_INFINITY;
    let mut best_pair = (0usize, 0usize);
    stream_goe_offdiag(p, seed, |i, j, z| {
        let l = top_eig_2x2(diag[i], diag[j], z);
        if l > best || (l == best && (i, j) < best_pair) {
            best = l;
            best_pair = (i, j);
        }
        true
    })?;
    Ok(PairMaxResult {
        raw_max: best,
        argmax_pair: best_pair,
        normalized: nc.scale * (best - nc.location),
    })
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    // Fixed 8-lane reduction order: bit-stable and wide enough to keep the
    // FPU pipeline busy.
    let mut acc = [0.0f64; 8];
    let chunks = a.len() / 8;
    for k in 0..chunks {
        let base = k * 8;
        for lane in 0..8 {
            acc[lane] += a[base + lane] * b[base + lane];
        }
    }
    let mut tail = 0.0;
    for k in chunks * 8..a.len() {
        tail += a[k] * b[k];
    }
    (((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]))) + tail
}

/// Pair maximum for one Wishart replicate: forms the Gram entries
/// w_ij = x_i·x_j by column dot products in blocks of [`GRAM_BLOCK`] columns,
/// scans max over i < j of the top minor eigenvalue, and normalizes the
/// centered statistic scale·((raw − n)/√n − location) with ξ taken from the
/// entry distribution (not estimated from data).
pub fn wishart_pair_max(
    n: usize,
    p: usize,
    dist: EntryDistribution,
    seed: SeedSpec,
) -> Result<PairMaxResult> {
    let nc = constants_for(dist.xi(), p)?;
    let x = draw_wishart_x(n, p, dist, seed)?;
    let col = |i: usize| &x[i * n..(i + 1) * n];
    let diag: Vec<f64> = (0..p).map(|i| dot(col(i), col(i))).collect();
    let mut best = f64::NEG_INFINITY;
    let mut best_pair = (0usize, 0usize);
    let blocks = p.div_ceil(GRAM_BLOCK);
    for bi in 0..blocks {
        let i_range = bi * GRAM_BLOCK..((bi + 1) * GRAM_BLOCK).min(p);
        for bj in bi..blocks {
            let j_range = bj * GRAM_BLOCK..((bj + 1) * GRAM_BLOCK).min(p);
            for i in i_range.clone() {
                for j in j_range.clone().filter(|&j| j > i) {
                    let w_ij = dot(col(i), col(j));
                    let l = top_eig_2x2(diag[i], diag[j], w_ij);
                    if l > best || (l == best && (i, j) < best_pair) {
                        best = l;
                        best_pair = (i, j);
                    }
                }
            }
        }
    }
    let n_f = n as f64;
    Ok(PairMaxResult {
        raw_max: best,
        argmax_pair: best_pair,
        normalized: nc.scale * ((best - n_f) / n_f.sqrt() - nc.location),
    })
}

/// The m = 1 sanity statistic: maximum of the p diagonal entries, normalized
/// as α_p(max/√ξ − β_p). Requires ξ > 0 (the all-zero diagonal has no
/// continuous maximum law) and p ≥ 2 (α_1 = 0 leaves the normalization
/// undefined).
pub fn diag_max(xi: f64, p: usize, seed: SeedSpec) -> Result<f64> {
    if !(xi > 0.0) {
        return Err(Error::domain(format!("diag_max: xi={xi} must be > 0")));
    }
    if p < 2 {
        return Err(Error::domain(format!("diag_max: p={p} must be >= 2")));
    }
    let alpha = (2.0 * (p as f64).ln()).sqrt();
    let beta = alpha - (2.5066282746310002 * alpha).ln() / alpha;
    let diag = draw_goe_diag(xi, p, seed)?;
    let max = diag.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(alpha * (max / xi.sqrt() - beta))
}
