//! Deterministic quadrature of the pair-exceedance kernels
//! q(x, y; t) = P(z² > (t − √ξ x)(t − √ξ y)) and of every closed-form
//! asymptotic prediction attached to them, so the analytic core of the limit
//! theorem can be checked numerically at arbitrarily large p.
//!
//! p enters only through ln p, so the checks run at p = 1e100 where
//! c_p ≈ 21.3 and the kernels sit near 1e-200, comfortably inside the double
//! range. Moments E[q^j] for j ≥ 2 leave that range, so the integrals are
//! evaluated in p-scaled form (p·q)^j · p·φ and only divided down on request.

use std::cell::RefCell;
use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::laws::{eta as eta_of, norm_constants};
use crate::special::{adaptive_integrate, gk15_estimate, std_normal_cdf, std_normal_pdf, std_normal_sf, QuadratureSpec};

/// Frozen evaluation point for the kernel quadratures: (ξ, p) fix the
/// constants, (y, z) fix the conditioning level c_p = β_p + y/α_p and the
/// threshold t_p = B_{p,ξ} + z/A_{p,ξ}.
#[derive(Clone, Copy, Debug)]
pub struct KernelContext {
    pub xi: f64,
    pub p: f64,
    pub y: f64,
    pub z: f64,
    pub alpha_p: f64,
    pub beta_p: f64,
    pub c_p: f64,
    pub t_p: f64,
    /// Regime-boundary buffer b_p (any sequence with b_p → ∞, b_p/c_p → 0);
    /// defaults to ln(c_p).
    pub b_p: f64,
}

impl KernelContext {
    pub fn new(xi: f64, p: f64, y: f64, z: f64) -> Result<Self> {
        if !(xi > 0.0) || !xi.is_finite() {
            return Err(Error::domain(format!("kernel context: xi={xi} must be > 0")));
        }
        let nc = norm_constants(xi, p)?;
        let c_p = nc.beta_p + y / nc.alpha_p;
        let t_p = nc.location + z / nc.scale;
        if !(t_p - xi.sqrt() * c_p > 0.0) {
            return Err(Error::domain(format!(
                "kernel context: t_p - sqrt(xi) c_p = {} must be positive (xi={xi}, p={p}, y={y}, z={z})",
                t_p - xi.sqrt() * c_p
            )));
        }
        if p >= 1e6 {
            let r = t_p / c_p;
            if !(r > xi.sqrt() && r < xi.sqrt() + 2.0 / xi.sqrt()) {
                return Err(Error::domain(format!(
                    "kernel context: t_p/c_p = {r} outside (sqrt(xi), sqrt(xi) + 2/sqrt(xi))"
                )));
            }
        }
        Ok(KernelContext {
            xi,
            p,
            y,
            z,
            alpha_p: nc.alpha_p,
            beta_p: nc.beta_p,
            c_p,
            t_p,
            b_p: c_p.ln(),
        })
    }

    /// η = (2 + √ξ)/(ξ + √ξ) when ξ > 2.
    pub fn eta(&self) -> Option<f64> {
        eta_of(self.xi).ok()
    }

    /// τ = e^{(y−z)/η}, the ξ > 2 limit of p·q(c_p; t_p).
    pub fn tau(&self) -> Option<f64> {
        self.eta().map(|e| ((self.y - self.z) / e).exp())
    }

    /// Lower edge of the bulk regime, x_p = (t_p − 2c_p/√ξ)/√ξ + b_p.
    pub fn bulk_lower(&self) -> f64 {
        let sx = self.xi.sqrt();
        (self.t_p - 2.0 * self.c_p / sx) / sx + self.b_p
    }

    /// Upper edge of the small-x regime, x̄_p = (t_p − 2c_p/√ξ)/√ξ − b_p.
    pub fn small_x_upper(&self) -> f64 {
        let sx = self.xi.sqrt();
        (self.t_p - 2.0 * self.c_p / sx) / sx - self.b_p
    }
}

/// q(x, y; t) = 2(1 − Φ(√((t−√ξx)(t−√ξy)))) when the product is positive,
/// and 1 otherwise (the minor then exceeds t with certainty).
pub fn q_xy(x: f64, y: f64, t: f64, xi: f64) -> f64 {
    let sx = xi.sqrt();
    let prod = (t - sx * x) * (t - sx * y);
    if prod > 0.0 {
        2.0 * std_normal_sf(prod.sqrt())
    } else {
        1.0
    }
}

/// q(x; t_p) = E q(x, z̄; t_p) over the truncated normal z̄ ~ φ(·)/Φ(c_p) on
/// (−∞, c_p].
///
/// Completing the square puts a unit-variance Gaussian factor centered at
/// μ = ½√ξ(t_p − √ξ x) under the integral; integration runs over
/// [min(μ, c_p) − 12, c_p], extended leftward until the integrand is below
/// 1e-18 of its peak probe.
pub fn q_x(x: f64, ctx: &KernelContext, spec: &QuadratureSpec) -> Result<f64> {
    if !(x <= ctx.c_p) {
        return Err(Error::domain(format!("q_x: x={x} must be <= c_p={}", ctx.c_p)));
    }
    let (t, xi, cp) = (ctx.t_p, ctx.xi, ctx.c_p);
    let g = |u: f64| q_xy(x, u, t, xi) * std_normal_pdf(u);
    let mu = 0.5 * xi.sqrt() * (t - xi.sqrt() * x);
    let peak = g(mu.min(cp)).max(g(cp));
    let mut lo = mu.min(cp) - 12.0;
    let mut guard = 0;
    while peak > 0.0 && g(lo) > 1e-18 * peak && guard < 16 {
        lo -= 4.0;
        guard += 1;
    }
    let v = adaptive_integrate(g, lo, cp, spec)?;
    Ok(v / std_normal_cdf(cp))
}

/// Scaled moment integrals m_j = p^{j+1}·E[q(z̄; t_p)^j] for j = 1..=j_max,
/// all from one pass so the q(x; t_p) evaluations are shared through a memo
/// table confined to this call.
fn scaled_moments(j_max: u32, ctx: &KernelContext, spec: &QuadratureSpec) -> Result<Vec<f64>> {
    if j_max == 0 {
        return Ok(Vec::new());
    }
    let (t, xi, cp, p) = (ctx.t_p, ctx.xi, ctx.c_p, ctx.p);
    let sx = xi.sqrt();
    let cache: RefCell<HashMap<u64, f64>> = RefCell::new(HashMap::new());
    let failed = RefCell::new(None::<Error>);
    // p·q_x with memoization; errors surface as NaN and are rethrown below.
    let sqx = |u: f64| -> f64 {
        if let Some(v) = cache.borrow().get(&u.to_bits()) {
            return *v;
        }
        let v = match q_x(u, ctx, spec) {
            Ok(q) => p * q,
            Err(e) => {
                *failed.borrow_mut() = Some(e);
                f64::NAN
            }
        };
        cache.borrow_mut().insert(u.to_bits(), v);
        v
    };

    // The weight p·φ(x) rises steeply toward c_p while p·q_x falls away from
    // it; for ξ > 2 a second hump sits near μ₄ = ½√ξ(t_p − √ξ c_p). Segment
    // boundaries bracket both humps and the bulk saddle √ξ t_p/(2+ξ).
    let s1 = sx * t / (2.0 + xi);
    let mu4 = 0.5 * sx * (t - sx * cp);
    let sigma_bulk = if xi == 2.0 { 20.0 } else { 14.0 * 2.0 / ((4.0 - xi * xi).abs()).sqrt() };
    let lo = (mu4 - 13.0).min(s1 - sigma_bulk).min(cp - 30.0);
    let mut pts = vec![mu4 - 3.0, mu4 + 3.0, s1 - 3.0, s1, s1 + 3.0, cp - 2.0, cp - 0.5];
    pts.retain(|&u| u > lo + 1e-9 && u < cp - 1e-9);
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup_by(|a, b| (*a - *b).abs() < 1e-6);
    let mut edges = Vec::with_capacity(pts.len() + 2);
    edges.push(lo);
    edges.extend(pts);
    edges.push(cp);

    let phi_cdf = std_normal_cdf(cp);
    let mut out = Vec::with_capacity(j_max as usize);
    for j in 1..=j_max {
        let integrand = |u: f64| {
            let q = sqx(u);
            let w = p * std_normal_pdf(u);
            q.powi(j as i32) * w
        };
        // common absolute floor from a first non-adaptive pass over segments
        let mut scale = 0.0;
        for w in edges.windows(2) {
            scale += gk15_estimate(&integrand, w[0], w[1])?.abs();
        }
        if let Some(e) = failed.borrow_mut().take() {
            return Err(e);
        }
        let seg_spec = QuadratureSpec {
            abs_tol: spec.abs_tol.max(spec.rel_tol * scale * 1e-2),
            rel_tol: spec.rel_tol,
            max_depth: spec.max_depth,
        };
        let mut total = 0.0;
        for w in edges.windows(2) {
            total += adaptive_integrate(&integrand, w[0], w[1], &seg_spec)?;
        }
        if let Some(e) = failed.borrow_mut().take() {
            return Err(e);
        }
        out.push(total / phi_cdf);
    }
    Ok(out)
}

/// q(t_p) = E q(z̄₁, z̄₂; t_p), the double truncated-normal average.
pub fn q_tp(ctx: &KernelContext, spec: &QuadratureSpec) -> Result<f64> {
    Ok(scaled_moments(1, ctx, spec)?[0] / (ctx.p * ctx.p))
}

/// E[q(z̄; t_p)^j] for j ≥ 2. At extreme p this underflows f64 (the j = 3
/// moment is ~p^{-4}); [`q_moment_scaled`] keeps the p^{j+1}-scaled value.
pub fn q_moment(j: u32, ctx: &KernelContext, spec: &QuadratureSpec) -> Result<f64> {
    if j < 2 {
        return Err(Error::domain(format!("q_moment: j={j} must be >= 2")));
    }
    Ok(q_moment_scaled(j, ctx, spec)? / ctx.p.powi(j as i32 + 1))
}

/// p^{j+1}·E[q(z̄; t_p)^j], the scaled form whose limit stays O(1) in p.
pub fn q_moment_scaled(j: u32, ctx: &KernelContext, spec: &QuadratureSpec) -> Result<f64> {
    if j < 1 {
        return Err(Error::domain("q_moment_scaled: j must be >= 1"));
    }
    Ok(scaled_moments(j, ctx, spec)?[j as usize - 1])
}

/// The asymptotic regime a prediction formula is valid in.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Regime {
    /// Upper bound, uniform over x ≤ c_p.
    Upper,
    /// Two-sided approximation on x_p ≤ x ≤ c_p.
    Bulk,
    /// Two-sided approximation for x ≤ x̄_p.
    SmallX,
}

/// The closed-form predictions for q(x; t_p) in each regime, prefactors
/// included.
pub fn predict_q_x(x: f64, ctx: &KernelContext, regime: Regime) -> Result<f64> {
    let (t, xi, cp) = (ctx.t_p, ctx.xi, ctx.c_p);
    let sx = xi.sqrt();
    let expo = -0.5 * ((4.0 - xi) / 4.0 * t * t - xi * xi / 4.0 * x * x - (2.0 - xi) * sx / 2.0 * x * t);
    match regime {
        Regime::Upper => {
            if !(x <= cp) {
                return Err(Error::domain(format!("predict upper: x={x} > c_p")));
            }
            let cbar = cp - 0.5 * sx * (t - sx * x);
            Ok(2.0 / (SQRT_2PI * (t - sx * x).sqrt()) * std_normal_cdf(cbar) / (t - sx * cp).sqrt()
                * expo.exp())
        }
        Regime::Bulk => {
            if !(ctx.bulk_lower() <= x && x <= cp) {
                return Err(Error::domain(format!(
                    "predict bulk: x={x} outside [{}, {}]",
                    ctx.bulk_lower(),
                    cp
                )));
            }
            let h2 = (t - sx * x) * ((1.0 - 0.5 * xi) * t + 0.5 * xi * sx * x);
            Ok(2.0 * expo.exp() / (SQRT_2PI * h2.sqrt()))
        }
        Regime::SmallX => {
            if !(x <= ctx.small_x_upper()) {
                return Err(Error::domain(format!(
                    "predict small-x: x={x} above x̄_p={}",
                    ctx.small_x_upper()
                )));
            }
            Ok(2.0 * (-0.5 * cp * cp).exp() / (std::f64::consts::PI * (t - sx * cp).sqrt())
                * (-0.5 * (t - sx * x) * (t - sx * cp)).exp()
                / ((t - sx * x).sqrt() * (sx * (t - sx * x) - 2.0 * cp)))
        }
    }
}

const SQRT_2PI: f64 = 2.5066282746310002;

/// The case-matched closed-form prediction for q(t_p): the Laplace form for
/// ξ ∈ (0,2); for ξ = 2 the Beta(1/2,1/2)-integral form, evaluated through
/// its arcsine antiderivative at the finite-p ratio r = t_p/c_p (which tends
/// to the printed arcsin(√2−1) constant as r → 2); for ξ > 2 the form driven
/// by q(c_p; t_p) and φ(c_p).
pub fn predict_q_tp(ctx: &KernelContext, spec: &QuadratureSpec) -> Result<f64> {
    let (t, xi, cp) = (ctx.t_p, ctx.xi, ctx.c_p);
    if xi < 2.0 {
        Ok((2.0 * (2.0 + xi) / (std::f64::consts::PI * (2.0 - xi))).sqrt() * (-t * t / (2.0 + xi)).exp() / t)
    } else if xi == 2.0 {
        let r = t / cp;
        let s_hi: f64 = (2.0f64).sqrt() / r;
        let s_lo = 1.0 - s_hi;
        if !(s_hi > 0.0 && s_hi < 1.0 && s_lo > 0.0) {
            return Err(Error::domain(format!("predict q(t_p): ratio r={r} leaves the Beta support")));
        }
        let beta_int = 2.0 / std::f64::consts::PI * (s_hi.sqrt().asin() - s_lo.sqrt().asin());
        Ok((-t * t / 4.0).exp() / (2.0f64).sqrt() * beta_int)
    } else {
        let qcp = q_x(cp, ctx, spec)?;
        Ok(8.0 * qcp * std_normal_pdf(cp) / ((xi * xi - 4.0) * cp - (xi - 2.0) * xi.sqrt() * t))
    }
}

/// One finite-p diagnostic paired with the limit the lemmas predict for it.
#[derive(Clone, Debug)]
pub struct LimitDiagnostic {
    pub name: String,
    pub p: f64,
    pub value: f64,
    pub predicted_limit: f64,
}

impl LimitDiagnostic {
    pub fn ratio(&self) -> f64 {
        self.value / self.predicted_limit
    }
}

/// Evaluates the finite-p quantities against their predicted limits:
/// p·φ(c_p)/c_p → e^{−y}; p²·q(t_p) → 2e^{−z} for ξ ∈ (0,2] and
/// 2ητe^{−y}/(1−η) for ξ > 2; and, for ξ > 2, p·q(c_p;t_p) → τ and
/// p^{j+1}·E[q^j] → η(j−η)^{−1}τ^j e^{−y} for
/// 2 ≤ j ≤ j_max.
pub fn chores_limits(ctx: &KernelContext, j_max: u32, spec: &QuadratureSpec) -> Result<Vec<LimitDiagnostic>> {
    if j_max > 8 {
        return Err(Error::domain(format!("chores_limits: j_max={j_max} must be <= 8")));
    }
    let p = ctx.p;
    let ey = (-ctx.y).exp();
    let mut out = Vec::new();
    out.push(LimitDiagnostic {
        name: "p_phi_cp_over_cp".into(),
        p,
        value: p * std_normal_pdf(ctx.c_p) / ctx.c_p,
        predicted_limit: ey,
    });
    if ctx.xi <= 2.0 {
        let m = scaled_moments(1, ctx, spec)?;
        out.push(LimitDiagnostic {
            name: "p2_qtp".into(),
            p,
            value: m[0],
            predicted_limit: 2.0 * (-ctx.z).exp(),
        });
    } else {
        let eta = ctx.eta().expect("xi > 2");
        let tau = ctx.tau().expect("xi > 2");
        let j_top = j_max.max(1);
        let m = scaled_moments(j_top, ctx, spec)?;
        out.push(LimitDiagnostic {
            name: "p_qx_cp".into(),
            p,
            value: p * q_x(ctx.c_p, ctx, spec)?,
            predicted_limit: tau,
        });
        out.push(LimitDiagnostic {
            name: "p2_qtp".into(),
            p,
            value: m[0],
            predicted_limit: 2.0 * eta * tau * ey / (1.0 - eta),
        });
        for j in 2..=j_max {
            out.push(LimitDiagnostic {
                name: format!("p{}_qmom{}", j + 1, j),
                p,
                value: m[j as usize - 1],
                predicted_limit: eta / (j as f64 - eta) * tau.powi(j as i32) * ey,
            });
        }
    }
    Ok(out)
}

/// Partial sums of Σ_{j≥1} (−1)^{j−1} γ_j/j! with γ_j = η(j−η)^{−1}τ^j e^{−y}
/// against the integral identity η e^{−z} ∫₀^τ s^{−1−η}(1−e^{−s}) ds.
#[derive(Clone, Debug)]
pub struct SeriesCheck {
    /// S_{j_max}
    pub partial_sum: f64,
    /// All partial sums S_1..S_{j_max}, for alternation checks.
    pub partials: Vec<f64>,
    pub integral_value: f64,
    /// Alternating-series truncation bound γ_{j_max+1}/(j_max+1)!.
    pub alternating_bound: f64,
}

/// Checks the series-to-integral identity behind the ξ > 2 limit. Requires
/// τ = e^{(y−z)/η} (the series and the integral both implicitly carry it).
pub fn series_identity_check(tau: f64, eta: f64, y: f64, z: f64, j_max: u32) -> Result<SeriesCheck> {
    if !(tau > 0.0) {
        return Err(Error::domain(format!("series check: tau={tau} must be > 0")));
    }
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::domain(format!("series check: eta={eta} outside (0,1)")));
    }
    let implied = ((y - z) / eta).exp();
    if !((tau.ln() - (y - z) / eta).abs() <= 1e-9 * (1.0 + tau.ln().abs())) {
        return Err(Error::domain(format!(
            "series check: tau={tau} inconsistent with e^((y-z)/eta)={implied}"
        )));
    }
    let ey = (-y).exp();
    let gamma = |j: f64| eta / (j - eta) * tau.powf(j) * ey;
    let mut partials = Vec::with_capacity(j_max as usize);
    let mut sum = 0.0;
    let mut fact = 1.0;
    for j in 1..=j_max {
        fact *= j as f64;
        let term = gamma(j as f64) / fact;
        sum += if j % 2 == 1 { term } else { -term };
        partials.push(sum);
    }
    let bound = gamma(j_max as f64 + 1.0) / (fact * (j_max as f64 + 1.0));
    let integral_value = eta * (-z).exp() * crate::laws::inner_integral(tau, eta)?;
    Ok(SeriesCheck { partial_sum: sum, partials, integral_value, alternating_bound: bound })
}
