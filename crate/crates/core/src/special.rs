//! Scalar special functions and adaptive quadrature.
//!
//! Everything here is deterministic and allocation-free on the hot path; the
//! rest of the crate funnels every integral through [`adaptive_integrate`].

use crate::error::{Error, Result};

const FRAC_1_SQRT_2PI: f64 = 0.3989422804014327;

/// Standard normal density. Underflows to zero for |x| beyond ~38.6 where
/// exp(-x^2/2) leaves the double range; callers needing the tail should work
/// with logarithms (`ln φ(x) = -x²/2 - ln√(2π)`).
pub fn std_normal_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal distribution function Φ(x).
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * std::f64::consts::FRAC_1_SQRT_2)
}

/// Survival function 1 - Φ(x), computed through the complementary error
/// function so the right tail keeps full relative accuracy instead of
/// cancelling against 1. Below ~2.9e-316 (x ≈ 38) results are subnormal.
pub fn std_normal_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x * std::f64::consts::FRAC_1_SQRT_2)
}

/// Scaled survival function exp(x²/2)·(1 - Φ(x)). Stays O(1/x) for large x,
/// usable far beyond the underflow point of the raw tail.
///
/// For x < 8 the plain product is already accurate; beyond that the Mills
/// ratio continued fraction 1/(x + 1/(x + 2/(x + ...))) is evaluated bottom-up
/// with a fixed depth, which keeps the function deterministic.
pub fn std_normal_sf_scaled(x: f64) -> f64 {
    if x < 8.0 {
        return std_normal_sf(x) * (0.5 * x * x).exp();
    }
    let mut tail = 0.0;
    for k in (1..=200u32).rev() {
        tail = f64::from(k) / (x + tail);
    }
    FRAC_1_SQRT_2PI / (x + tail)
}

/// Lower incomplete gamma function γ(a, x) for a ∈ (0, 1], x ≥ 0.
///
/// Kummer's series for x < a + 1, otherwise the Lentz continued fraction for
/// the upper tail subtracted from Γ(a). For x beyond ~700 the upper tail is
/// below one ulp of Γ(a) and Γ(a) is returned directly.
pub fn lower_incomplete_gamma(a: f64, x: f64) -> Result<f64> {
    if !(a > 0.0 && a <= 1.0) {
        return Err(Error::domain(format!("incomplete gamma: a={a} outside (0,1]")));
    }
    if !(x >= 0.0) {
        return Err(Error::domain(format!("incomplete gamma: x={x} < 0")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    let gamma_a = libm::tgamma(a);
    if x > 700.0 {
        return Ok(gamma_a);
    }
    if x < a + 1.0 {
        // γ(a,x) = x^a e^{-x} Σ_{n≥0} x^n / (a (a+1) ⋯ (a+n))
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut n = 0.0;
        while term.abs() > sum.abs() * 1e-17 {
            n += 1.0;
            term *= x / (a + n);
            sum += term;
            if n > 500.0 {
                break;
            }
        }
        Ok(sum * (a * x.ln() - x).exp())
    } else {
        // Γ(a,x) via modified Lentz on the classical continued fraction.
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..=300 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                break;
            }
        }
        let upper = (a * x.ln() - x).exp() * h;
        Ok(gamma_a - upper)
    }
}

/// Tolerances and subdivision cap for [`adaptive_integrate`].
#[derive(Clone, Copy, Debug)]
pub struct QuadratureSpec {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_depth: u32,
}

impl QuadratureSpec {
    pub fn new(abs_tol: f64, rel_tol: f64, max_depth: u32) -> Result<Self> {
        if !(abs_tol > 0.0) || !(rel_tol > 0.0) || max_depth == 0 {
            return Err(Error::domain(format!(
                "quadrature spec requires abs_tol > 0, rel_tol > 0, max_depth >= 1 (got {abs_tol}, {rel_tol}, {max_depth})"
            )));
        }
        Ok(QuadratureSpec { abs_tol, rel_tol, max_depth })
    }
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec { abs_tol: 1e-12, rel_tol: 1e-10, max_depth: 48 }
    }
}

// 15-point Gauss-Kronrod rule (QUADPACK abscissae/weights).
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];

fn rescale_error(err: f64, res_abs: f64, res_asc: f64) -> f64 {
    let mut scaled = err.abs();
    if res_asc != 0.0 && scaled != 0.0 {
        let scale = (200.0 * scaled / res_asc).powf(1.5);
        scaled = if scale < 1.0 { res_asc * scale } else { res_asc };
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        let min_err = 50.0 * f64::EPSILON * res_abs;
        if min_err > scaled {
            scaled = min_err;
        }
    }
    scaled
}

struct GkEstimate {
    result: f64,
    err: f64,
    res_abs: f64,
}

fn qk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Result<GkEstimate> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    if fc.is_nan() {
        return Err(Error::Quadrature(format!("integrand returned NaN at {center}")));
    }
    let mut fv1 = [0.0f64; 7];
    let mut fv2 = [0.0f64; 7];
    let mut res_g = 0.0;
    let mut res_k = fc * WGK[7];
    let mut res_abs = res_k.abs();
    for j in 0..3 {
        let jtw = j * 2 + 1;
        let x = half * XGK[jtw];
        let f1 = f(center - x);
        let f2 = f(center + x);
        if f1.is_nan() || f2.is_nan() {
            return Err(Error::Quadrature(format!("integrand returned NaN near {center}")));
        }
        fv1[jtw] = f1;
        fv2[jtw] = f2;
        res_g += WG[j] * (f1 + f2);
        res_k += WGK[jtw] * (f1 + f2);
        res_abs += WGK[jtw] * (f1.abs() + f2.abs());
    }
    res_g += WG[3] * fc;
    for j in 0..4 {
        let jtw = j * 2;
        let x = half * XGK[jtw];
        let f1 = f(center - x);
        let f2 = f(center + x);
        if f1.is_nan() || f2.is_nan() {
            return Err(Error::Quadrature(format!("integrand returned NaN near {center}")));
        }
        fv1[jtw] = f1;
        fv2[jtw] = f2;
        res_k += WGK[jtw] * (f1 + f2);
        res_abs += WGK[jtw] * (f1.abs() + f2.abs());
    }
    let mean = res_k * 0.5;
    let mut res_asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let err = ((res_k - res_g) * half).abs();
    Ok(GkEstimate {
        result: res_k * half,
        err: rescale_error(err, res_abs * half.abs(), res_asc * half.abs()),
        res_abs: res_abs * half.abs(),
    })
}

fn integrate_rec<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    tol: f64,
    depth: u32,
    spec: &QuadratureSpec,
) -> Result<f64> {
    let est = qk15(f, a, b)?;
    // Accept on tolerance, on hitting the per-interval roundoff floor, or when
    // the interval is no longer numerically splittable.
    let floor = 100.0 * f64::EPSILON * est.res_abs;
    let width_limit = (b - a).abs() <= f64::EPSILON * (a.abs() + b.abs() + 1.0);
    if est.err <= tol || est.err <= floor || width_limit {
        return Ok(est.result);
    }
    if depth >= spec.max_depth {
        return Err(Error::Quadrature(format!(
            "max depth {} reached on [{a}, {b}] with error {:.3e} > tol {:.3e}",
            spec.max_depth, est.err, tol
        )));
    }
    let mid = 0.5 * (a + b);
    let left = integrate_rec(f, a, mid, 0.5 * tol, depth + 1, spec)?;
    let right = integrate_rec(f, mid, b, 0.5 * tol, depth + 1, spec)?;
    Ok(left + right)
}

/// One non-adaptive Gauss-Kronrod pass over [a, b]; used by callers that
/// pre-scan segmented integrands to fix a common absolute tolerance.
pub(crate) fn gk15_estimate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Result<f64> {
    Ok(qk15(f, a, b)?.result)
}

/// Adaptive Gauss-Kronrod (7,15) integration of `f` over [a, b].
///
/// A first full-interval pass fixes the target tolerance
/// `max(abs_tol, rel_tol·|estimate|)`; intervals are then bisected until each
/// local error estimate passes. The subdivision order is fixed, so identical
/// inputs give bit-identical results. Integrable endpoint singularities are
/// the caller's job to transform away.
pub fn adaptive_integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    spec: &QuadratureSpec,
) -> Result<f64> {
    if !a.is_finite() || !b.is_finite() || a > b {
        return Err(Error::domain(format!("bad integration interval [{a}, {b}]")));
    }
    if a == b {
        return Ok(0.0);
    }
    let first = qk15(&f, a, b)?;
    let tol = spec.abs_tol.max(spec.rel_tol * first.result.abs());
    integrate_rec(&f, a, b, tol, 0, spec)
}
