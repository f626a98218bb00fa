//! Coverage probabilities of center and edge users for a given activity factor.
//!
//! Center users have a closed form. Edge users mix two interference
//! conditions (dominant interferer active / silent); their coverage is
//! evaluated through a series over the geometric expansion of the
//! conditioning normalizer, with an exact remainder for the truncated tail,
//! and through direct quadrature of the distance integral as an oracle.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::geometry::{pdf_serving_distance_ceu, RegionThreshold};
use crate::interference::{
    femto_term, kernel_g, kernel_h, lt_femto, lt_mbs_ceu_dominant_off, lt_mbs_ceu_dominant_on,
    PathLossModel,
};
use crate::quad::{integrate_to_infinity, QuadOptions};
use crate::special::digamma;

/// Everything a single coverage evaluation needs.
///
/// `lambda_f_eff` is the density of co-channel FAPs on the channel of
/// interest; it is ignored by the shared-spectrum edge-user functions,
/// whose band carries no femto traffic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageInputs {
    pub beta: f64,
    pub lambda_b: f64,
    pub lambda_f_eff: f64,
    pub zeta: f64,
    pub path_loss: PathLossModel,
    pub region: RegionThreshold,
    pub fap_rel: f64,
}

impl CoverageInputs {
    pub fn validate(&self) -> Result<()> {
        ensure(self.beta >= 0.0 && self.beta.is_finite(), "beta", || {
            format!("must be non-negative and finite, got {}", self.beta)
        })?;
        ensure(self.lambda_b > 0.0, "lambda_b", || {
            format!("must be positive, got {}", self.lambda_b)
        })?;
        ensure(self.lambda_f_eff >= 0.0, "lambda_f_eff", || {
            format!("must be non-negative, got {}", self.lambda_f_eff)
        })?;
        ensure((0.0..=1.0).contains(&self.zeta), "zeta", || {
            format!("must lie in [0, 1], got {}", self.zeta)
        })?;
        ensure(self.fap_rel > 0.0, "fap_rel", || {
            format!("must be positive, got {}", self.fap_rel)
        })
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    pub fn with_zeta(mut self, zeta: f64) -> Self {
        self.zeta = zeta;
        self
    }

    pub fn with_lambda_f_eff(mut self, lambda_f_eff: f64) -> Self {
        self.lambda_f_eff = lambda_f_eff;
        self
    }

    fn delta(&self) -> f64 {
        self.path_loss.delta()
    }

    fn femto(&self) -> f64 {
        femto_term(
            self.beta,
            self.lambda_f_eff,
            self.lambda_b,
            self.delta(),
            self.fap_rel,
        )
    }
}

/// Coverage of a center user: `[1 + ζR²H(β,δ,R) + R²·F]^{-1}` where `F` is
/// the femto interference term.
pub fn cov_ccu_ssa(inputs: &CoverageInputs) -> Result<f64> {
    inputs.validate()?;
    let r2 = inputs.region.squared();
    let h = kernel_h(inputs.beta, inputs.delta(), inputs.region)?;
    Ok(1.0 / (1.0 + inputs.zeta * r2 * h + r2 * inputs.femto()))
}

/// Center-user coverage under co-channel allocation. Same expression as the
/// shared case; the caller supplies `λ_F / N` as the FAP density.
pub fn cov_ccu_csa(inputs: &CoverageInputs) -> Result<f64> {
    cov_ccu_ssa(inputs)
}

/// How the infinite edge-user series is closed off.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum TailRemainder {
    /// Add the exact sum of the remaining terms (a digamma expression).
    #[default]
    Digamma,
    /// Plain partial sums, stopped when one group of terms falls below `tol`.
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesOptions {
    pub tol: f64,
    pub max_terms: usize,
    pub tail: TailRemainder,
}

impl Default for SeriesOptions {
    fn default() -> Self {
        SeriesOptions {
            tol: 1e-8,
            max_terms: 1000,
            tail: TailRemainder::Digamma,
        }
    }
}

impl SeriesOptions {
    pub fn plain() -> Self {
        SeriesOptions {
            tail: TailRemainder::None,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesValue {
    pub value: f64,
    /// Number of `n`-groups summed explicitly.
    pub terms: usize,
    /// Change of the estimate caused by the last group.
    pub last_increment: f64,
}

/// Coefficients of the edge-user coverage after the substitution `x = πλ_B r²`.
#[derive(Debug, Clone, Copy)]
struct EdgeSeries {
    zeta: f64,
    r2: f64,
    /// `ζ H(β,δ,1) + F`
    open: f64,
    /// `ζ H(β,δ,R) + F`
    beyond: f64,
    /// `ζ G(β,δ,R)`
    annulus: f64,
}

impl EdgeSeries {
    fn new(inputs: &CoverageInputs, with_femto: bool) -> Result<Self> {
        inputs.validate()?;
        let region = inputs.region.require_edge()?;
        let delta = inputs.delta();
        let f = if with_femto { inputs.femto() } else { 0.0 };
        let zeta = inputs.zeta;
        Ok(EdgeSeries {
            zeta,
            r2: region.squared(),
            open: zeta * kernel_h(inputs.beta, delta, RegionThreshold::new(1.0)?)? + f,
            beyond: zeta * kernel_h(inputs.beta, delta, region)? + f,
            annulus: zeta * kernel_g(inputs.beta, delta, region)?,
        })
    }

    /// Contribution of the silent-dominant branch (closed form).
    fn silent_branch(&self) -> f64 {
        let r2 = self.r2;
        (1.0 - self.zeta) / (1.0 - r2) * (1.0 / (1.0 + self.open) - r2 / (1.0 + r2 * self.open))
    }

    fn prefactor(&self) -> f64 {
        self.zeta * self.r2 / (1.0 - self.r2)
    }

    /// Step of the geometric expansion, `ζ(1 - R²)`.
    fn step(&self) -> f64 {
        self.zeta * (1.0 - self.r2)
    }

    /// `(sign, offset)` of the four partial fractions `sign / (n·step + offset)`.
    fn fractions(&self) -> [(f64, f64); 4] {
        let r2 = self.r2;
        let step = self.step();
        let mut out = [(0.0, 0.0); 4];
        let mut i = 0;
        for l in 0..2 {
            for k in 0..2 {
                let sign = if (k + l + 1) % 2 == 0 { 1.0 } else { -1.0 };
                let offset = k as f64 * step
                    + if k == 0 { r2 * self.annulus } else { 0.0 }
                    + r2 * self.beyond
                    + if l == 0 { 1.0 } else { r2 };
                out[i] = (sign, offset);
                i += 1;
            }
        }
        out
    }

    fn group(&self, n: usize) -> f64 {
        let step = self.step();
        self.fractions()
            .iter()
            .map(|&(sign, offset)| sign / (n as f64 * step + offset))
            .sum()
    }

    /// Exact `Σ_{n ≥ from}` of the groups.
    fn remainder(&self, from: usize) -> f64 {
        let step = self.step();
        let m = from as f64;
        let fr = self.fractions();
        // pair up fractions of opposite sign to limit cancellation
        let psi = |offset: f64| digamma(m + offset / step);
        let s = (psi(fr[1].1) - psi(fr[0].1)) + (psi(fr[2].1) - psi(fr[3].1));
        // fr[0], fr[3] carry sign -1; fr[1], fr[2] carry +1
        -s / step
    }

    fn sum(&self, opts: &SeriesOptions) -> Result<SeriesValue> {
        let base = self.silent_branch();
        if self.zeta == 0.0 {
            return Ok(SeriesValue {
                value: base,
                terms: 0,
                last_increment: 0.0,
            });
        }
        let pref = self.prefactor();
        let mut acc = KahanSum::default();
        let mut previous: Option<f64> = None;
        for n in 0..opts.max_terms {
            let g = self.group(n);
            acc.add(g);
            let estimate = match opts.tail {
                TailRemainder::Digamma => acc.value() + self.remainder(n + 1),
                TailRemainder::None => acc.value(),
            };
            let increment = match opts.tail {
                TailRemainder::Digamma => previous.map(|p| (estimate - p).abs()),
                TailRemainder::None => Some(g.abs()),
            };
            previous = Some(estimate);
            if let Some(inc) = increment {
                if pref * inc < opts.tol {
                    return Ok(SeriesValue {
                        value: base + pref * estimate,
                        terms: n + 1,
                        last_increment: pref * inc,
                    });
                }
            }
        }
        Err(Error::NoConvergence {
            stage: "edge-user coverage series".into(),
            iterations: opts.max_terms,
            detail: format!("increment still above tolerance {}", opts.tol),
        })
    }
}

#[derive(Debug, Default, Clone, Copy)]
struct KahanSum {
    sum: f64,
    carry: f64,
}

impl KahanSum {
    fn add(&mut self, x: f64) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum
    }
}

/// Edge-user coverage under shared allocation (no femto interference).
pub fn cov_ceu_ssa_series(inputs: &CoverageInputs, opts: &SeriesOptions) -> Result<SeriesValue> {
    EdgeSeries::new(inputs, false)?.sum(opts)
}

/// Edge-user coverage under co-channel allocation; FAPs at `lambda_f_eff`
/// interfere in both branches.
pub fn cov_ceu_csa(inputs: &CoverageInputs, opts: &SeriesOptions) -> Result<SeriesValue> {
    EdgeSeries::new(inputs, true)?.sum(opts)
}

fn ceu_integral(inputs: &CoverageInputs, with_femto: bool) -> Result<f64> {
    inputs.validate()?;
    let region = inputs.region.require_edge()?;
    let delta = inputs.delta();
    let alpha = inputs.path_loss.alpha();
    let zeta = inputs.zeta;
    let lb = inputs.lambda_b;
    let scale = 1.0 / (PI * lb).sqrt();
    let failure: std::cell::RefCell<Option<Error>> = std::cell::RefCell::new(None);
    let integrand = |rho: f64| -> f64 {
        let r = rho * scale;
        if r <= 0.0 {
            return 0.0;
        }
        let eval = || -> Result<f64> {
            let density = pdf_serving_distance_ceu(r, lb, region)?;
            if density == 0.0 {
                return Ok(0.0);
            }
            let s = inputs.beta * r.powf(alpha);
            let off = lt_mbs_ceu_dominant_off(s, r, zeta, lb, delta)?;
            let on = if zeta > 0.0 {
                lt_mbs_ceu_dominant_on(s, r, zeta, lb, delta, region)?
            } else {
                0.0
            };
            let femto = if with_femto {
                lt_femto(s, inputs.lambda_f_eff, delta, inputs.fap_rel)?
            } else {
                1.0
            };
            Ok((zeta * on + (1.0 - zeta) * off) * femto * density * scale)
        };
        match eval() {
            Ok(v) => v,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                0.0
            }
        }
    };
    let opts = QuadOptions {
        abs_tol: 1e-14,
        rel_tol: 1e-10,
        max_subdivisions: 4000,
    };
    let value = integrate_to_infinity(integrand, 0.0, opts)?.value;
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(value)
}

/// Edge-user coverage under shared allocation by direct quadrature of the
/// mixture of conditional transforms against the serving-distance density.
pub fn cov_ceu_ssa_integral(inputs: &CoverageInputs) -> Result<f64> {
    ceu_integral(inputs, false)
}

pub fn cov_ceu_csa_integral(inputs: &CoverageInputs) -> Result<f64> {
    ceu_integral(inputs, true)
}

/// Coverage of both classes over an ordered list of thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageCurve {
    pub thresholds: Vec<f64>,
    pub ccu: Vec<f64>,
    pub ceu: Vec<f64>,
}

impl CoverageCurve {
    pub fn len(&self) -> usize {
        self.thresholds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thresholds.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn defaults(zeta: f64, beta: f64) -> CoverageInputs {
        CoverageInputs {
            beta,
            lambda_b: 5e-6,
            lambda_f_eff: 50.0 * 5e-6 / (50.0 * 0.4),
            zeta,
            path_loss: PathLossModel::new(4.0).unwrap(),
            region: RegionThreshold::new(0.707).unwrap(),
            fap_rel: 0.01,
        }
    }

    #[test]
    fn interference_free_ccu_is_covered() {
        let inp = defaults(0.0, 1.0).with_lambda_f_eff(0.0);
        assert_eq!(cov_ccu_ssa(&inp).unwrap(), 1.0);
    }

    #[test]
    fn ccu_reduces_to_single_tier_at_unit_threshold() {
        let mut inp = defaults(1.0, 1.0).with_lambda_f_eff(0.0);
        inp.region = RegionThreshold::new(1.0).unwrap();
        let h = kernel_h(1.0, 0.5, inp.region).unwrap();
        assert!((cov_ccu_ssa(&inp).unwrap() - 1.0 / (1.0 + h)).abs() < 1e-15);
    }

    #[test]
    fn silent_macro_tier_edge_users_always_covered() {
        let inp = defaults(0.0, 3.0);
        let v = cov_ceu_ssa_series(&inp, &SeriesOptions::default()).unwrap();
        assert!((v.value - 1.0).abs() < 1e-15);
        // tiny activity is continuous with the silent case
        let v = cov_ceu_ssa_series(&inp.with_zeta(1e-9), &SeriesOptions::default()).unwrap();
        assert!((v.value - 1.0).abs() < 1e-8);
    }

    #[test]
    fn series_matches_integral_on_grid() {
        for &beta in &[0.1, 1.0, 10.0] {
            for &zeta in &[0.1, 0.5, 1.0] {
                let inp = defaults(zeta, beta);
                let s = cov_ceu_ssa_series(&inp, &SeriesOptions::default())
                    .unwrap()
                    .value;
                let i = cov_ceu_ssa_integral(&inp).unwrap();
                assert!((s - i).abs() < 1e-6, "beta={beta} zeta={zeta}: {s} vs {i}");
                let s = cov_ceu_csa(&inp, &SeriesOptions::default()).unwrap().value;
                let i = cov_ceu_csa_integral(&inp).unwrap();
                assert!(
                    (s - i).abs() < 1e-6,
                    "csa beta={beta} zeta={zeta}: {s} vs {i}"
                );
            }
        }
    }

    #[test]
    fn plain_partial_sums_converge_to_same_value() {
        let inp = defaults(1.0, 1.0);
        let fast = cov_ceu_ssa_series(&inp, &SeriesOptions::default()).unwrap();
        let opts = SeriesOptions {
            tol: 1e-9,
            max_terms: 100_000,
            tail: TailRemainder::None,
        };
        let slow = cov_ceu_ssa_series(&inp, &opts).unwrap();
        assert!(slow.terms > 100);
        // the plain sum stops short by roughly the size of its truncated tail
        assert!((fast.value - slow.value).abs() < 1e-5);
    }

    #[test]
    fn plain_sum_reports_non_convergence_at_cap() {
        let inp = defaults(0.1, 1.0);
        let err = cov_ceu_ssa_series(&inp, &SeriesOptions::plain()).unwrap_err();
        assert!(matches!(err, Error::NoConvergence { .. }));
    }

    #[test]
    fn edge_functions_reject_unit_threshold() {
        let mut inp = defaults(0.5, 1.0);
        inp.region = RegionThreshold::new(1.0).unwrap();
        assert!(cov_ceu_ssa_series(&inp, &SeriesOptions::default()).is_err());
        assert!(cov_ceu_ssa_integral(&inp).is_err());
    }

    #[test]
    fn general_path_loss_series_matches_integral() {
        let mut inp = defaults(0.6, 2.0);
        inp.path_loss = PathLossModel::new(3.5).unwrap();
        let s = cov_ceu_csa(&inp, &SeriesOptions::default()).unwrap().value;
        let i = cov_ceu_csa_integral(&inp).unwrap();
        assert!((s - i).abs() < 1e-6, "{s} vs {i}");
    }
}
