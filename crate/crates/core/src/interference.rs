//! Laplace transforms of femto-tier and macro-tier interference, and the
//! `H` / `G` kernels that appear in the coverage expressions.
//!
//! All macro-tier transforms reduce to the tail integral
//! `T(a) = ∫_a^∞ du / (1 + u^{1/δ})`, which is `arctan(1/a)` for `δ = 1/2`
//! and is integrated numerically otherwise.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::geometry::RegionThreshold;
use crate::quad::{integrate, QuadOptions};

/// Power-law path loss `r^{-α}` with cached `δ = 2/α`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct PathLossModel {
    alpha: f64,
    delta: f64,
}

impl PathLossModel {
    pub fn new(alpha: f64) -> Result<Self> {
        ensure(alpha > 2.0 && alpha.is_finite(), "alpha", || {
            format!("path-loss exponent must exceed 2, got {alpha}")
        })?;
        Ok(PathLossModel {
            alpha,
            delta: 2.0 / alpha,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }
}

impl TryFrom<f64> for PathLossModel {
    type Error = Error;
    fn try_from(alpha: f64) -> Result<Self> {
        PathLossModel::new(alpha)
    }
}

impl From<PathLossModel> for f64 {
    fn from(p: PathLossModel) -> f64 {
        p.alpha
    }
}

/// Per-channel transmit powers of the two tiers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TierPowers {
    pub mbs_w: f64,
    pub fap_w: f64,
}

impl TierPowers {
    pub fn new(mbs_w: f64, fap_w: f64) -> Result<Self> {
        ensure(mbs_w > 0.0, "p_b_w", || {
            format!("must be positive, got {mbs_w}")
        })?;
        ensure(fap_w > 0.0, "p_f_w", || {
            format!("must be positive, got {fap_w}")
        })?;
        Ok(TierPowers { mbs_w, fap_w })
    }

    /// `P_F / P_B`.
    pub fn fap_relative(&self) -> f64 {
        self.fap_w / self.mbs_w
    }
}

fn check_delta(delta: f64) -> Result<()> {
    ensure(delta > 0.0 && delta < 1.0, "delta", || {
        format!("must lie in (0, 1), got {delta}")
    })
}

fn is_half(delta: f64) -> bool {
    (delta - 0.5).abs() < 1e-15
}

fn kernel_quad_options() -> QuadOptions {
    QuadOptions {
        abs_tol: 1e-15,
        rel_tol: 1e-12,
        max_subdivisions: 4000,
    }
}

/// `πδ / sin(πδ) = ∫_0^∞ du / (1 + u^{1/δ})`.
pub fn full_tail(delta: f64) -> f64 {
    PI * delta / (PI * delta).sin()
}

/// `∫_a^∞ du / (1 + u^{1/δ})` without the `δ = 1/2` closed form: quadrature
/// up to `max(a, 4)` and the convergent expansion in `u^{-1/δ}` beyond.
pub fn tail_integral_numeric(a: f64, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    if a.is_infinite() {
        return Ok(0.0);
    }
    let p = 1.0 / delta;
    let f = |u: f64| 1.0 / (1.0 + u.powf(p));
    let opts = kernel_quad_options();
    let lo = a.max(0.0);
    let cut = lo.max(4.0);
    let mut head = 0.0;
    if lo < 1.0 {
        head += integrate(f, lo, 1.0, opts)?.value;
        head += integrate(f, 1.0, cut, opts)?.value;
    } else if lo < cut {
        head += integrate(f, lo, cut, opts)?.value;
    }
    Ok(head + algebraic_tail(cut, p))
}

// ∫_A^∞ du/(1+u^p) = Σ_k (-1)^k A^{1-p(k+1)} / (p(k+1) - 1), A > 1
fn algebraic_tail(cut: f64, p: f64) -> f64 {
    let ratio = cut.powf(-p);
    let mut power = cut * ratio;
    let mut sum = 0.0;
    for k in 0..500 {
        let term = power / (p * (k + 1) as f64 - 1.0);
        if k % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
        if term < 1e-17 * sum.abs() {
            break;
        }
        power *= ratio;
    }
    sum
}

/// `∫_a^∞ du / (1 + u^{1/δ})`; closed form at `δ = 1/2`.
pub fn tail_integral(a: f64, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    if a <= 0.0 {
        return Ok(full_tail(delta));
    }
    if a.is_infinite() {
        return Ok(0.0);
    }
    if is_half(delta) {
        Ok((1.0 / a).atan())
    } else {
        tail_integral_numeric(a, delta)
    }
}

/// `∫_a^b du / (1 + u^{1/δ})` for `0 ≤ a ≤ b`.
pub fn band_integral(a: f64, b: f64, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    if b <= a {
        return Ok(0.0);
    }
    if is_half(delta) {
        // arctan(b) - arctan(a) without cancellation for large a
        let (a, b) = (a.max(0.0), b);
        if b.is_infinite() {
            return Ok((1.0 / a).atan());
        }
        return Ok(((b - a) / (1.0 + a * b)).atan());
    }
    if b.is_infinite() {
        return tail_integral(a, delta);
    }
    let p = 1.0 / delta;
    Ok(integrate(
        |u: f64| 1.0 / (1.0 + u.powf(p)),
        a,
        b,
        kernel_quad_options(),
    )?
    .value)
}

fn check_kernel_args(beta: f64, delta: f64) -> Result<()> {
    check_delta(delta)?;
    ensure(beta >= 0.0 && beta.is_finite(), "beta", || {
        format!("SIR threshold must be non-negative, got {beta}")
    })
}

/// `H(β, δ, R) = β^δ ∫_{R^{-2} β^{-δ}}^∞ du / (1 + u^{1/δ})`.
pub fn kernel_h(beta: f64, delta: f64, threshold: RegionThreshold) -> Result<f64> {
    check_kernel_args(beta, delta)?;
    if beta == 0.0 {
        return Ok(0.0);
    }
    if is_half(delta) {
        let sb = beta.sqrt();
        return Ok(sb * (threshold.squared() * sb).atan());
    }
    let bd = beta.powf(delta);
    Ok(bd * tail_integral_numeric(1.0 / (threshold.squared() * bd), delta)?)
}

/// `H` by quadrature regardless of `δ` (cross-check of the closed form).
pub fn kernel_h_numeric(beta: f64, delta: f64, threshold: RegionThreshold) -> Result<f64> {
    check_kernel_args(beta, delta)?;
    if beta == 0.0 {
        return Ok(0.0);
    }
    let bd = beta.powf(delta);
    Ok(bd * tail_integral_numeric(1.0 / (threshold.squared() * bd), delta)?)
}

/// `G(β, δ, R) = H(β, δ, 1) - H(β, δ, R) = β^δ ∫_{β^{-δ}}^{R^{-2}β^{-δ}} du / (1 + u^{1/δ})`.
pub fn kernel_g(beta: f64, delta: f64, threshold: RegionThreshold) -> Result<f64> {
    check_kernel_args(beta, delta)?;
    if beta == 0.0 {
        return Ok(0.0);
    }
    let bd = beta.powf(delta);
    Ok(bd * band_integral(1.0 / bd, 1.0 / (threshold.squared() * bd), delta)?)
}

/// Femto interference term in coverage exponents, `πδ (λ_F/λ_B) (β P̃_F)^δ csc(πδ)`,
/// per unit of `π λ_B r²`.
pub fn femto_term(beta: f64, lambda_f_eff: f64, lambda_b: f64, delta: f64, fap_rel: f64) -> f64 {
    if lambda_f_eff == 0.0 || beta == 0.0 {
        return 0.0;
    }
    PI * delta * (lambda_f_eff / lambda_b) * (beta * fap_rel).powf(delta) / (PI * delta).sin()
}

/// Laplace transform of the femto-tier interference of a PPP of density
/// `lambda_f_eff` transmitting at relative power `fap_rel`.
pub fn lt_femto(s: f64, lambda_f_eff: f64, delta: f64, fap_rel: f64) -> Result<f64> {
    check_delta(delta)?;
    ensure(s >= 0.0, "s", || format!("must be non-negative, got {s}"))?;
    ensure(lambda_f_eff >= 0.0, "lambda_f_eff", || {
        format!("must be non-negative, got {lambda_f_eff}")
    })?;
    if s == 0.0 || lambda_f_eff == 0.0 {
        return Ok(1.0);
    }
    Ok((-PI * lambda_f_eff * (s * fap_rel).powf(delta) * full_tail(delta)).exp())
}

fn check_activity(zeta: f64) -> Result<()> {
    ensure((0.0..=1.0).contains(&zeta), "zeta", || {
        format!("activity factor must lie in [0, 1], got {zeta}")
    })
}

/// `π ζ λ_B s^δ ∫_{r²/s^δ}^{∞} du/(1+u^{1/δ})`, the exponent of a thinned PPP
/// with no points inside radius `r`.
fn outside_exponent(s: f64, r: f64, zeta: f64, lambda_b: f64, delta: f64) -> Result<f64> {
    if s == 0.0 || zeta == 0.0 {
        return Ok(0.0);
    }
    let sd = s.powf(delta);
    Ok(PI * zeta * lambda_b * sd * tail_integral(r * r / sd, delta)?)
}

/// Laplace transform of co-channel macro interference seen by a center user
/// whose serving MBS is at `r_c` (no interferer inside `r_c / R`).
pub fn lt_mbs_ccu(
    s: f64,
    r_c: f64,
    zeta: f64,
    lambda_b: f64,
    delta: f64,
    threshold: RegionThreshold,
) -> Result<f64> {
    check_delta(delta)?;
    check_activity(zeta)?;
    ensure(r_c > 0.0, "r_c", || format!("must be positive, got {r_c}"))?;
    Ok((-outside_exponent(s, r_c / threshold.value(), zeta, lambda_b, delta)?).exp())
}

/// Edge-user transform when the dominant interferer is silent: thinned PPP
/// outside `r_e`.
pub fn lt_mbs_ceu_dominant_off(
    s: f64,
    r_e: f64,
    zeta: f64,
    lambda_b: f64,
    delta: f64,
) -> Result<f64> {
    check_delta(delta)?;
    check_activity(zeta)?;
    ensure(r_e > 0.0, "r_e", || format!("must be positive, got {r_e}"))?;
    Ok((-outside_exponent(s, r_e, zeta, lambda_b, delta)?).exp())
}

/// Edge-user transform conditioned on at least one active interferer in the
/// annulus `[r_e, r_e / R]`.
pub fn lt_mbs_ceu_dominant_on(
    s: f64,
    r_e: f64,
    zeta: f64,
    lambda_b: f64,
    delta: f64,
    threshold: RegionThreshold,
) -> Result<f64> {
    check_delta(delta)?;
    check_activity(zeta)?;
    let threshold = threshold.require_edge()?;
    ensure(zeta > 0.0, "zeta", || {
        "the dominant interferer cannot be active when the activity factor is 0".into()
    })?;
    ensure(r_e > 0.0, "r_e", || format!("must be positive, got {r_e}"))?;
    if s == 0.0 {
        return Ok(1.0);
    }
    let r2 = threshold.squared();
    let sd = s.powf(delta);
    let lo = r_e * r_e / sd;
    let hi = lo / r2;
    let beyond = PI * zeta * lambda_b * sd * tail_integral(hi, delta)?;
    let annulus = PI * zeta * lambda_b * sd * band_integral(lo, hi, delta)?;
    // c r_e² = mean number of active points in the annulus
    let mean_in_annulus = PI * zeta * lambda_b * (1.0 / r2 - 1.0) * r_e * r_e;
    // (e^{-annulus} - e^{-m}) / (1 - e^{-m}) with m >= annulus
    let num = (-annulus).exp_m1() - (-mean_in_annulus).exp_m1();
    let den = -(-mean_in_annulus).exp_m1();
    Ok((-beyond).exp() * (num / den))
}
