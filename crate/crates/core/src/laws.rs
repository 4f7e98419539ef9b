//! Normalizing constants and limiting distributions for the pair-maximum
//! statistic: Gumbel on ξ ∈ [0, 2], the one-parameter family G(·; η) above it,
//! plus the m = 2 squared-statistic cross-form for the ξ = 2 special case.

use crate::error::{Error, Result};
use crate::special::{adaptive_integrate, lower_incomplete_gamma, QuadratureSpec};

/// Shape parameters η this close to 1 (ξ barely above 2) are refused: the
/// Γ(1-η) factor in the inner integral blows up and the family is not defined
/// at η = 1.
pub const ETA_MAX: f64 = 1.0 - 1e-6;

/// Normalizing constants for dimension `p` and diagonal variance `xi`:
/// `scale·(statistic − location)` converges to the limit law.
///
/// `p` is accepted as a real so the constants can be evaluated at p = 1e100
/// for asymptotic checks; only ln p enters.
#[derive(Clone, Copy, Debug)]
pub struct NormConstants {
    pub xi: f64,
    pub p: f64,
    /// α_p = √(2 ln p)
    pub alpha_p: f64,
    /// β_p = α_p − ln(√(2π) α_p)/α_p
    pub beta_p: f64,
    /// Scale factor (A_{p,ξ} in the usual notation).
    pub scale: f64,
    /// Centering constant (B_{p,ξ}).
    pub location: f64,
}

/// Piecewise constants of the limit theorem. The three branches are genuinely
/// discontinuous across ξ = 2; the branch point itself belongs to the ξ = 2
/// formula.
pub fn norm_constants(xi: f64, p: f64) -> Result<NormConstants> {
    if !(p > std::f64::consts::E) {
        return Err(Error::domain(format!("norm_constants: p={p} must exceed e")));
    }
    constants_raw(xi, p)
}

/// The branch formulas themselves, valid for any p > 1; the p > e guard on
/// the public entry point keeps ln p away from 0 for the asymptotic work,
/// but the pair statistics are defined down to p = 2.
pub(crate) fn constants_raw(xi: f64, p: f64) -> Result<NormConstants> {
    if !(xi >= 0.0) || !xi.is_finite() {
        return Err(Error::domain(format!("norm_constants: xi={xi} must be >= 0")));
    }
    if !(p > 1.0) {
        return Err(Error::domain(format!("norm_constants: p={p} must exceed 1")));
    }
    let alpha = (2.0 * p.ln()).sqrt();
    let beta = alpha - (SQRT_2PI * alpha).ln() / alpha;
    let (scale, location) = if xi < 2.0 {
        let s = (2.0 + xi).sqrt();
        (
            2.0 / s * alpha,
            s * alpha - (s / 2.0) * ((2.0 * std::f64::consts::PI * (2.0 - xi)).sqrt() * alpha).ln() / alpha,
        )
    } else if xi == 2.0 {
        (alpha, 2.0 * alpha - XI2_LOG_CONST / alpha)
    } else {
        let r = xi.sqrt();
        (
            (2.0 + r) / (xi + r) * alpha,
            (xi + 2.0 * r + 2.0) / (2.0 + r) * beta - ((1.0 + r).sqrt() / (2.0 + r)).ln() / alpha,
        )
    };
    Ok(NormConstants { xi, p, alpha_p: alpha, beta_p: beta, scale, location })
}

const SQRT_2PI: f64 = 2.5066282746310002;
/// ln(√2·π / arcsin(√2 − 1)), the ξ = 2 centering correction.
const XI2_LOG_CONST: f64 = 2.3420907157430196;

/// Shape η = (2 + √ξ)/(ξ + √ξ) ∈ (0, 1), defined for ξ > 2 and strictly
/// decreasing in ξ.
pub fn eta(xi: f64) -> Result<f64> {
    if !(xi > 2.0) {
        return Err(Error::domain(format!("eta: xi={xi} must exceed 2")));
    }
    let r = xi.sqrt();
    Ok((2.0 + r) / (xi + r))
}

/// Gumbel distribution function Λ(z) = exp(−e^{−z}).
pub fn gumbel_cdf(z: f64) -> f64 {
    (-(-z).exp()).exp()
}

/// Gumbel density λ(z) = exp(−z − e^{−z}).
pub fn gumbel_pdf(z: f64) -> f64 {
    (-z - (-z).exp()).exp()
}

/// Gumbel quantile, the exact inverse of [`gumbel_cdf`].
pub fn gumbel_quantile(q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::domain(format!("gumbel_quantile: q={q} outside (0,1)")));
    }
    Ok(-(-q.ln()).ln())
}

fn check_eta(eta: f64, what: &str) -> Result<()> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::domain(format!("{what}: eta={eta} outside (0,1)")));
    }
    if eta >= ETA_MAX {
        return Err(Error::domain(format!(
            "{what}: eta={eta} too close to 1 (xi barely above 2); refusing above {ETA_MAX}"
        )));
    }
    if eta > 0.999 {
        log::warn!("{what}: eta={eta} > 0.999, Γ(1-η) is large and results lose accuracy");
    }
    Ok(())
}

/// ∫₀^τ s^{−1−η}(1 − e^{−s}) ds, by the integration-by-parts closed form
/// (γ(1−η, τ) − τ^{−η}(1 − e^{−τ}))/η. The boundary term at 0 vanishes since
/// the integrand behaves like s^{−η} there.
pub fn inner_integral(tau: f64, eta: f64) -> Result<f64> {
    check_eta(eta, "inner_integral")?;
    if tau.is_nan() || tau < 0.0 {
        return Err(Error::domain(format!("inner_integral: tau={tau} must be >= 0")));
    }
    if tau == 0.0 {
        return Ok(0.0);
    }
    if tau.is_infinite() {
        return Ok(libm::tgamma(1.0 - eta) / eta);
    }
    let g = lower_incomplete_gamma(1.0 - eta, tau)?;
    Ok((g - tau.powf(-eta) * (-(-tau).exp_m1())) / eta)
}

fn gxi_integrand(y: f64, z: f64, eta: f64) -> f64 {
    let lambda = (-y - (-y).exp()).exp();
    if lambda == 0.0 {
        return 0.0;
    }
    let arg = (y - z) / eta;
    let tau = if arg > 690.0 { f64::INFINITY } else { arg.exp() };
    let inner = if tau.is_infinite() {
        libm::tgamma(1.0 - eta) / eta
    } else {
        match inner_integral(tau, eta) {
            Ok(v) => v,
            Err(_) => return f64::NAN,
        }
    };
    let penalty = if inner == 0.0 { 0.0 } else { eta * (-z).exp() * inner };
    let expo = -tau - penalty;
    if expo < -745.0 {
        return 0.0;
    }
    expo.exp() * lambda
}

/// Distribution function of the ξ > 2 limit family,
/// G(z; η) = ∫ exp(−e^{(y−z)/η} − η e^{−z} ∫₀^{e^{(y−z)/η}} s^{−1−η}(1−e^{−s}) ds) λ(y) dy.
///
/// The outer integral is truncated to [−15, z + 40η] and both endpoints are
/// pushed outward until the integrand falls below 1e−14 there; λ has a
/// double-exponential left tail and the exp(−e^{(y−z)/η}) factor kills the
/// right tail, so the discarded mass is far below the quadrature tolerance.
pub fn gxi_cdf(z: f64, eta: f64, spec: &QuadratureSpec) -> Result<f64> {
    check_eta(eta, "gxi_cdf")?;
    if !z.is_finite() {
        return Err(Error::domain(format!("gxi_cdf: z={z} not finite")));
    }
    let mut lo = -15.0_f64;
    let mut hi = z + 40.0 * eta;
    let mut guard = 0;
    while gxi_integrand(lo, z, eta) > 1e-14 && guard < 64 {
        lo -= 5.0;
        guard += 1;
    }
    while gxi_integrand(hi, z, eta) > 1e-14 && guard < 128 {
        hi += 5.0;
        guard += 1;
    }
    let v = adaptive_integrate(|y| gxi_integrand(y, z, eta), lo, hi.max(lo + 1.0), spec)?;
    Ok(v.clamp(0.0, 1.0))
}

/// A limiting distribution: Gumbel on ξ ∈ [0, 2], the η-family above.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LimitLaw {
    Gumbel,
    GXi { eta: f64 },
}

impl LimitLaw {
    pub fn cdf(&self, z: f64, spec: &QuadratureSpec) -> Result<f64> {
        match *self {
            LimitLaw::Gumbel => Ok(gumbel_cdf(z)),
            LimitLaw::GXi { eta } => gxi_cdf(z, eta, spec),
        }
    }

    /// Quantile by bisection on the cdf (the Gumbel branch inverts exactly).
    pub fn quantile(&self, q: f64, spec: &QuadratureSpec) -> Result<f64> {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::domain(format!("quantile: q={q} outside (0,1)")));
        }
        match *self {
            LimitLaw::Gumbel => gumbel_quantile(q),
            LimitLaw::GXi { eta } => {
                let mut lo = -20.0;
                let mut hi = 40.0;
                let mut guard = 0;
                while gxi_cdf(hi, eta, spec)? < q {
                    hi += 20.0;
                    guard += 1;
                    if guard > 40 {
                        return Err(Error::Bracket(format!("no upper bracket for q={q}")));
                    }
                }
                while gxi_cdf(lo, eta, spec)? > q {
                    lo -= 20.0;
                    guard += 1;
                    if guard > 80 {
                        return Err(Error::Bracket(format!("no lower bracket for q={q}")));
                    }
                }
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if hi - lo < 1e-11 * (1.0 + mid.abs()) {
                        break;
                    }
                    if gxi_cdf(mid, eta, spec)? < q {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                Ok(0.5 * (lo + hi))
            }
        }
    }

    pub fn describe(&self) -> String {
        match *self {
            LimitLaw::Gumbel => "gumbel".to_string(),
            LimitLaw::GXi { eta } => format!("gxi(eta={eta})"),
        }
    }
}

/// The limit law for a given ξ: Gumbel on the closed interval [0, 2], the
/// η-family beyond.
pub fn law_for(xi: f64) -> Result<LimitLaw> {
    if !(xi >= 0.0) || !xi.is_finite() {
        return Err(Error::domain(format!("law_for: xi={xi} must be >= 0")));
    }
    if xi <= 2.0 {
        Ok(LimitLaw::Gumbel)
    } else {
        let e = eta(xi)?;
        check_eta(e, "law_for")?;
        Ok(LimitLaw::GXi { eta: e })
    }
}

/// c₂ = −1/(2√2) + (√2/π)·arcsin(2^{−1/4}), the m = 2 constant of the squared
/// statistic's Gumbel form; frozen here and checked against a high-precision
/// oracle in tests. Algebraically equal to arcsin(√2 − 1)/(√2 π).
pub const FENG_C2: f64 = 0.09612645490261462;

/// The m = 2 cross-form: exp(−c₂ e^{−(t² − 8 ln p)/4}) as a distribution
/// function in t for fixed p.
pub fn feng_m2_cdf(t: f64, p: f64) -> Result<f64> {
    if !(p > std::f64::consts::E) {
        return Err(Error::domain(format!("feng_m2_cdf: p={p} must exceed e")));
    }
    let expo = (8.0 * p.ln() - t * t) / 4.0;
    Ok((-FENG_C2 * expo.exp()).exp())
}

/// |Λ(z) − feng_m2_cdf(B_{p,2} + z/A_{p,2}, p)|: the two ξ = 2 limit forms
/// evaluated against each other; decreases toward 0 as p grows.
pub fn feng_consistency_delta(p: f64, z: f64) -> Result<f64> {
    let nc = norm_constants(2.0, p)?;
    let t = nc.location + z / nc.scale;
    Ok((gumbel_cdf(z) - feng_m2_cdf(t, p)?).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn constants_match_printed_formulas() {
        let e8 = (8.0f64).exp();
        let c = norm_constants(0.0, e8).unwrap();
        assert_relative_eq!(c.alpha_p, 4.0, max_relative = 1e-14);
        assert_relative_eq!(c.scale, 4.0 * std::f64::consts::SQRT_2, max_relative = 1e-14);

        let c2 = norm_constants(2.0, e8).unwrap();
        assert_relative_eq!(c2.scale, 4.0, max_relative = 1e-14);
        // B = 8 − ln(√2·π / arcsin(√2−1))/4, evaluated independently.
        let want = 8.0 - ((2.0f64).sqrt() * std::f64::consts::PI / ((2.0f64).sqrt() - 1.0).asin()).ln() / 4.0;
        assert_relative_eq!(c2.location, want, max_relative = 1e-14);
        assert_relative_eq!(c2.location, 7.414477321064245, max_relative = 1e-14);

        // A = α_p exactly at ξ = 2, for any p.
        for p in [10.0, 1e4, 1e100] {
            let c = norm_constants(2.0, p).unwrap();
            assert_eq!(c.scale, c.alpha_p);
            assert!(c.scale > 0.0);
        }

        // branch re-evaluation, ξ < 2 and ξ > 2
        let xi = 1.25;
        let p = 3.5e7;
        let c = norm_constants(xi, p).unwrap();
        let a = (2.0 * p.ln()).sqrt();
        assert_relative_eq!(c.scale, 2.0 / (2.0 + xi).sqrt() * a, max_relative = 1e-14);
        assert_relative_eq!(
            c.location,
            (2.0 + xi).sqrt() * a
                - (2.0 + xi).sqrt() / 2.0 * ((2.0 * std::f64::consts::PI * (2.0 - xi)).sqrt() * a).ln() / a,
            max_relative = 1e-14
        );
        let xi = 5.0;
        let c = norm_constants(xi, p).unwrap();
        let b = a - (SQRT_2PI * a).ln() / a;
        assert_relative_eq!(c.scale, (2.0 + xi.sqrt()) / (xi + xi.sqrt()) * a, max_relative = 1e-14);
        assert_relative_eq!(
            c.location,
            (xi + 2.0 * xi.sqrt() + 2.0) / (2.0 + xi.sqrt()) * b - ((1.0 + xi.sqrt()).sqrt() / (2.0 + xi.sqrt())).ln() / a,
            max_relative = 1e-14
        );
        assert_relative_eq!(c.beta_p, b, max_relative = 1e-15);
    }

    #[test]
    fn constants_domain() {
        assert!(norm_constants(-0.1, 100.0).is_err());
        assert!(norm_constants(1.0, 2.0).is_err());
        assert!(norm_constants(1.0, std::f64::consts::E).is_err());
    }

    #[test]
    fn eta_values() {
        assert_relative_eq!(eta(4.0).unwrap(), 2.0 / 3.0, max_relative = 1e-15);
        assert_relative_eq!(eta(9.0).unwrap(), 5.0 / 12.0, max_relative = 1e-15);
        let near = eta(2.0 + 1e-6).unwrap();
        assert!(near < 1.0 && near > 1.0 - 1e-5);
        assert!(eta(2.0).is_err());
        // strictly decreasing
        let mut prev = 1.0;
        for i in 1..100 {
            let v = eta(2.0 + 0.5 * i as f64).unwrap();
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn gumbel_basics() {
        let e_inv = (-1.0f64).exp();
        assert_relative_eq!(gumbel_cdf(0.0), e_inv, max_relative = 1e-15);
        assert_relative_eq!(gumbel_pdf(0.0), e_inv, max_relative = 1e-15);
        for q in [0.1, 0.5, 0.9] {
            let z = gumbel_quantile(q).unwrap();
            assert!((gumbel_cdf(z) - q).abs() < 1e-12);
        }
        assert_relative_eq!(gumbel_quantile(e_inv).unwrap(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn inner_integral_basics() {
        assert_eq!(inner_integral(0.0, 0.5).unwrap(), 0.0);
        // leading order I ~ τ^{1-η}/(1-η) as τ -> 0
        let tau = 1e-8;
        let v = inner_integral(tau, 0.5).unwrap();
        let lead = tau.powf(0.5) / 0.5;
        assert!((v / lead - 1.0).abs() < 1e-6, "ratio {}", v / lead);
        // frozen singular-quadrature oracle value
        assert_relative_eq!(inner_integral(1.0, 0.5).unwrap(), 1.7230554135925926, max_relative = 1e-9);
        // monotone in tau
        let mut prev = 0.0;
        for i in 1..=40 {
            let v = inner_integral(0.5 * i as f64, 2.0 / 3.0).unwrap();
            assert!(v >= prev);
            prev = v;
        }
        assert!(inner_integral(-1.0, 0.5).is_err());
        assert!(inner_integral(1.0, 1.0 - 1e-8).is_err());
        assert!(inner_integral(1.0, 0.0).is_err());
    }

    #[test]
    fn gxi_limits_and_frozen_value() {
        let spec = QuadratureSpec::default();
        let eta = 2.0 / 3.0;
        assert!(gxi_cdf(-40.0, eta, &spec).unwrap() < 1e-6);
        assert!(gxi_cdf(80.0, eta, &spec).unwrap() > 1.0 - 1e-6);
        // frozen 2-D tensor-quadrature oracle value at (z=0, η=2/3)
        assert!((gxi_cdf(0.0, eta, &spec).unwrap() - 0.06863597020175671).abs() < 1e-7);
        // coarse monotonicity (the acceptance suite runs the 200-point grid)
        let mut prev = -1.0;
        for i in 0..=40 {
            let z = -10.0 + i as f64;
            let v = gxi_cdf(z, eta, &spec).unwrap();
            assert!(v >= prev - 1e-9);
            assert!((0.0..=1.0).contains(&v));
            prev = v;
        }
    }

    #[test]
    fn law_selection() {
        assert_eq!(law_for(1.5).unwrap(), LimitLaw::Gumbel);
        assert_eq!(law_for(2.0).unwrap(), LimitLaw::Gumbel);
        match law_for(4.0).unwrap() {
            LimitLaw::GXi { eta } => assert_relative_eq!(eta, 2.0 / 3.0, max_relative = 1e-15),
            _ => panic!("expected GXi"),
        }
        // barely above 2: η ≥ 1 − 1e−6 is refused
        assert!(law_for(2.0 + 1e-9).is_err());
    }

    #[test]
    fn quantile_roundtrip() {
        let spec = QuadratureSpec::default();
        let gx = LimitLaw::GXi { eta: 2.0 / 3.0 };
        for q in [0.01, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.99] {
            let z = gx.quantile(q, &spec).unwrap();
            assert!((gx.cdf(z, &spec).unwrap() - q).abs() < 1e-8, "q={q}");
        }
        let gu = LimitLaw::Gumbel;
        assert_relative_eq!(gu.quantile((-1.0f64).exp(), &spec).unwrap(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn feng_constant_and_cdf() {
        // high-precision oracle recomputation of the frozen constant
        let c2 = -1.0 / (2.0 * (2.0f64).sqrt())
            + (2.0f64).sqrt() / std::f64::consts::PI * (2.0f64.powf(-0.25)).asin();
        assert_relative_eq!(FENG_C2, c2, max_relative = 1e-14);
        let alt = ((2.0f64).sqrt() - 1.0).asin() / ((2.0f64).sqrt() * std::f64::consts::PI);
        assert_relative_eq!(FENG_C2, alt, max_relative = 1e-14);
        assert_relative_eq!(XI2_LOG_CONST, -(FENG_C2.ln()), max_relative = 1e-14);

        let p: f64 = 1e8;
        // t² = 8 ln p makes the exponent zero
        let t0 = (8.0 * p.ln()).sqrt();
        assert_relative_eq!(feng_m2_cdf(t0, p).unwrap(), (-FENG_C2).exp(), max_relative = 1e-13);
        assert!(feng_m2_cdf(1e6, p).unwrap() > 1.0 - 1e-12);
    }

    #[test]
    fn feng_delta_shrinks_in_p() {
        for z in [-2.0, 0.0, 2.0] {
            let big = feng_consistency_delta(1e100, z).unwrap();
            let small = feng_consistency_delta(1e8, z).unwrap();
            assert!(big <= 0.01, "delta at 1e100, z={z}: {big}");
            assert!(big < small, "no improvement at z={z}: {big} vs {small}");
        }
    }
}
