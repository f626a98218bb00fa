//! Channel demand, MBS activity factors and the coverage/activity fixed point.

use serde::{Deserialize, Serialize};

use crate::coverage::{
    cov_ccu_ssa, cov_ceu_csa, cov_ceu_ssa_series, CoverageCurve, CoverageInputs, SeriesOptions,
};
use crate::error::{ensure, Error, Result};
use crate::scenario::{ScenarioConfig, SpectrumPolicy};
use crate::special::{gamma, regularized_lower, regularized_upper};

/// Shape of the Gamma law used for the macro cell area.
pub const CELL_AREA_SHAPE: f64 = 3.5;

/// SIR thresholds of the modulation and coding schemes together with the
/// per-call rate target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McsTable {
    thresholds: Vec<f64>,
    bandwidth_hz: f64,
    rate_bps: f64,
}

impl McsTable {
    pub fn new(thresholds: Vec<f64>, bandwidth_hz: f64, rate_bps: f64) -> Result<Self> {
        ensure(!thresholds.is_empty(), "mcs_thresholds", || {
            "needs at least one threshold".into()
        })?;
        ensure(
            thresholds.iter().all(|t| t.is_finite() && *t > 0.0),
            "mcs_thresholds",
            || "thresholds must be positive and finite (linear scale)".into(),
        )?;
        ensure(
            thresholds.windows(2).all(|w| w[0] < w[1]),
            "mcs_thresholds",
            || "thresholds must be strictly increasing".into(),
        )?;
        ensure(bandwidth_hz > 0.0, "bandwidth_hz", || {
            format!("must be positive, got {bandwidth_hz}")
        })?;
        ensure(rate_bps > 0.0, "rate_bps", || {
            format!("must be positive, got {rate_bps}")
        })?;
        Ok(McsTable {
            thresholds,
            bandwidth_hz,
            rate_bps,
        })
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn len(&self) -> usize {
        self.thresholds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thresholds.is_empty()
    }

    pub fn bandwidth_hz(&self) -> f64 {
        self.bandwidth_hz
    }

    pub fn rate_bps(&self) -> f64 {
        self.rate_bps
    }

    /// Channels a call needs when served with scheme `i`.
    pub fn channels_per_call(&self, i: usize) -> f64 {
        self.rate_bps / (self.bandwidth_hz * (1.0 + self.thresholds[i]).log2())
    }
}

/// Probability that a served call uses scheme `i`, given coverage at every
/// threshold: `[C(Γ_i) - C(Γ_{i+1})] / C(Γ_1)` with `C(Γ_{T+1}) = 0`.
pub fn mcs_masses(coverage: &[f64], mcs: &McsTable) -> Result<Vec<f64>> {
    ensure(coverage.len() == mcs.len(), "coverage", || {
        format!("expected {} values, got {}", mcs.len(), coverage.len())
    })?;
    ensure(
        coverage.iter().all(|c| (0.0..=1.0).contains(c)),
        "coverage",
        || "values must lie in [0, 1]".into(),
    )?;
    ensure(
        coverage.windows(2).all(|w| w[1] <= w[0] + 1e-12),
        "coverage",
        || "values must be nonincreasing over the thresholds".into(),
    )?;
    let c1 = coverage[0];
    ensure(c1 > 0.0, "coverage", || {
        "coverage at the lowest threshold is zero, no call can be served".into()
    })?;
    let t = coverage.len();
    Ok((0..t)
        .map(|i| {
            let next = if i + 1 < t { coverage[i + 1] } else { 0.0 };
            ((coverage[i] - next) / c1).max(0.0)
        })
        .collect())
}

/// Expected channels per served call.
pub fn mean_channels(coverage: &[f64], mcs: &McsTable) -> Result<f64> {
    let masses = mcs_masses(coverage, mcs)?;
    Ok(masses
        .iter()
        .enumerate()
        .map(|(i, p)| mcs.channels_per_call(i) * p)
        .sum())
}

/// Density of the macro cell area: Gamma with shape 3.5 and rate `3.5 λ_B`.
pub fn cell_area_pdf(a: f64, lambda_b: f64) -> f64 {
    if a <= 0.0 {
        return 0.0;
    }
    let rate = CELL_AREA_SHAPE * lambda_b;
    (CELL_AREA_SHAPE * rate.ln() + (CELL_AREA_SHAPE - 1.0) * a.ln()
        - rate * a
        - gamma(CELL_AREA_SHAPE).ln())
    .exp()
}

/// Activity of an MBS on a band whose mean-area offered load, in units of the
/// band's servers, is `offered = λ N̄ / (λ_B μ N_band)`. The per-cell activity
/// `min(a λ N̄ / (μ N_band), 1)` is averaged over the cell-area law.
pub fn activity_factor(offered: f64) -> f64 {
    if !(offered > 0.0) {
        return 0.0;
    }
    if offered.is_infinite() {
        return 1.0;
    }
    let y = CELL_AREA_SHAPE / offered;
    // x̄/(3.5 Γ(3.5)) γ(4.5, y) = x̄ P(4.5, y) since Γ(4.5) = 3.5 Γ(3.5)
    let v = offered * regularized_lower(CELL_AREA_SHAPE + 1.0, y)
        + regularized_upper(CELL_AREA_SHAPE, y);
    v.clamp(0.0, 1.0)
}

/// Offered load in server units for one band.
pub fn offered_load(
    arrival_rate: f64,
    nbar: f64,
    lambda_b: f64,
    mu: f64,
    band_channels: f64,
) -> f64 {
    arrival_rate * nbar / (lambda_b * mu * band_channels)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPoint {
    pub value: f64,
    /// `|ζ - Φ(ζ)|` at `value`.
    pub residual: f64,
    pub iterations: usize,
}

/// Root of `ζ - Φ(ζ)` on `[0, 1]` by bisection. Stops once the residual is
/// below `tol` and the bracket is narrower than `tol`.
pub fn bisect_fixed_point<F>(
    mut phi: F,
    tol: f64,
    max_iter: usize,
    stage: &str,
) -> Result<FixedPoint>
where
    F: FnMut(f64) -> Result<f64>,
{
    let g = |z: f64, phi: &mut F| -> Result<f64> { Ok(z - phi(z)?) };
    let g_lo = g(0.0, &mut phi)?;
    if g_lo.abs() < tol {
        return Ok(FixedPoint {
            value: 0.0,
            residual: g_lo.abs(),
            iterations: 0,
        });
    }
    let g_hi = g(1.0, &mut phi)?;
    if g_hi.abs() < tol {
        return Ok(FixedPoint {
            value: 1.0,
            residual: g_hi.abs(),
            iterations: 0,
        });
    }
    if !(g_lo < 0.0 && g_hi > 0.0) {
        return Err(Error::NotBracketed {
            stage: stage.to_string(),
            lo: 0.0,
            hi: 1.0,
            g_lo,
            g_hi,
        });
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for it in 1..=max_iter {
        let mid = 0.5 * (lo + hi);
        let gm = g(mid, &mut phi)?;
        if gm.abs() < tol && hi - lo < tol {
            return Ok(FixedPoint {
                value: mid,
                residual: gm.abs(),
                iterations: it,
            });
        }
        if gm < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::NoConvergence {
        stage: stage.to_string(),
        iterations: max_iter,
        detail: format!("last bracket [{lo}, {hi}]"),
    })
}

/// Damped iteration `ζ ← (1-w) ζ + w Φ(ζ)` from `start`.
pub fn picard_fixed_point<F>(
    mut phi: F,
    start: f64,
    damping: f64,
    tol: f64,
    max_iter: usize,
    stage: &str,
) -> Result<FixedPoint>
where
    F: FnMut(f64) -> Result<f64>,
{
    ensure(damping > 0.0 && damping <= 1.0, "damping", || {
        format!("must lie in (0, 1], got {damping}")
    })?;
    let mut z = start.clamp(0.0, 1.0);
    for it in 1..=max_iter {
        let p = phi(z)?;
        let residual = (z - p).abs();
        if residual < tol {
            return Ok(FixedPoint {
                value: z,
                residual,
                iterations: it,
            });
        }
        z = (1.0 - damping) * z + damping * p;
    }
    Err(Error::NoConvergence {
        stage: stage.to_string(),
        iterations: max_iter,
        detail: format!("last iterate {z}"),
    })
}

/// Coverage of both user classes for one scenario, as a function of the
/// activity factors of the bands they are served on.
#[derive(Debug, Clone)]
pub struct CoverageModel {
    base: CoverageInputs,
    center_femto: f64,
    edge_femto: f64,
    shared: bool,
    series: SeriesOptions,
}

impl CoverageModel {
    pub fn for_scenario(cfg: &ScenarioConfig) -> Result<Self> {
        let region = cfg.region_threshold()?.require_edge()?;
        let n = cfg.channels_f64();
        let base = CoverageInputs {
            beta: cfg.beta,
            lambda_b: cfg.lambda_b,
            lambda_f_eff: 0.0,
            zeta: 0.0,
            path_loss: cfg.path_loss()?,
            region,
            fap_rel: cfg.powers()?.fap_relative(),
        };
        Ok(CoverageModel {
            base,
            center_femto: cfg.policy.center_femto_density(cfg.lambda_f, n),
            edge_femto: cfg.policy.edge_femto_density(cfg.lambda_f, n),
            shared: cfg.policy.is_shared(),
            series: cfg.solver.series(),
        })
    }

    pub fn ccu(&self, beta: f64, zeta: f64) -> Result<f64> {
        cov_ccu_ssa(
            &self
                .base
                .with_beta(beta)
                .with_zeta(zeta)
                .with_lambda_f_eff(self.center_femto),
        )
    }

    pub fn ceu(&self, beta: f64, zeta: f64) -> Result<f64> {
        let inputs = self.base.with_beta(beta).with_zeta(zeta);
        let v = if self.shared {
            cov_ceu_ssa_series(&inputs, &self.series)?
        } else {
            cov_ceu_csa(&inputs.with_lambda_f_eff(self.edge_femto), &self.series)?
        };
        Ok(v.value.clamp(0.0, 1.0))
    }

    pub fn ccu_curve(&self, thresholds: &[f64], zeta: f64) -> Result<Vec<f64>> {
        thresholds.iter().map(|&b| self.ccu(b, zeta)).collect()
    }

    pub fn ceu_curve(&self, thresholds: &[f64], zeta: f64) -> Result<Vec<f64>> {
        thresholds.iter().map(|&b| self.ceu(b, zeta)).collect()
    }

    pub fn curve(
        &self,
        thresholds: &[f64],
        zeta_center: f64,
        zeta_edge: f64,
    ) -> Result<CoverageCurve> {
        Ok(CoverageCurve {
            thresholds: thresholds.to_vec(),
            ccu: self.ccu_curve(thresholds, zeta_center)?,
            ceu: self.ceu_curve(thresholds, zeta_edge)?,
        })
    }
}

/// Converged macro-tier load of one scenario. Under co-channel and orthogonal
/// allocation both classes share one activity factor, so `zeta_center` and
/// `zeta_edge` coincide.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadSolution {
    pub policy: SpectrumPolicy,
    pub zeta_center: f64,
    pub zeta_edge: f64,
    pub nbar_c: f64,
    pub nbar_e: f64,
    /// Largest fixed-point residual over the solved bands.
    pub residual: f64,
    pub iterations: usize,
    /// MCS usage probabilities of center and edge calls at the solution.
    pub mcs_masses_c: Vec<f64>,
    pub mcs_masses_e: Vec<f64>,
}

impl LoadSolution {
    /// Spectrum-weighted activity: `p_m ζ_SC + (1-p_m) ζ_SE` under shared
    /// allocation, `ζ_C` otherwise.
    pub fn zeta_overall(&self) -> f64 {
        match self.policy {
            SpectrumPolicy::Ssa { p_m } => p_m * self.zeta_center + (1.0 - p_m) * self.zeta_edge,
            _ => self.zeta_center,
        }
    }

    /// `R² N̄_c + (1-R²) N̄_e`.
    pub fn nbar_weighted(&self, region: f64) -> f64 {
        let r2 = region * region;
        r2 * self.nbar_c + (1.0 - r2) * self.nbar_e
    }
}

/// Which solver closes the fixed point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FixedPointMethod {
    Bisection,
    Picard { damping: f64 },
}

pub fn solve_fixed_point(cfg: &ScenarioConfig) -> Result<LoadSolution> {
    solve_fixed_point_with(cfg, FixedPointMethod::Bisection)
}

pub fn solve_fixed_point_with(
    cfg: &ScenarioConfig,
    method: FixedPointMethod,
) -> Result<LoadSolution> {
    cfg.validate()?;
    let mcs = cfg.mcs()?;
    let model = CoverageModel::for_scenario(cfg)?;
    let th = mcs.thresholds().to_vec();
    let tol = cfg.solver.tol;
    let max_iter = cfg.solver.max_iter;
    let n = cfg.channels_f64();
    let solve = |phi: &mut dyn FnMut(f64) -> Result<f64>, stage: &str| -> Result<FixedPoint> {
        match method {
            FixedPointMethod::Bisection => bisect_fixed_point(phi, tol, max_iter, stage),
            FixedPointMethod::Picard { damping } => {
                picard_fixed_point(phi, 0.0, damping, tol, max_iter.max(1000), stage)
            }
        }
    };
    let nbar_center = |z: f64| mean_channels(&model.ccu_curve(&th, z)?, &mcs);
    let nbar_edge = |z: f64| mean_channels(&model.ceu_curve(&th, z)?, &mcs);

    match cfg.policy {
        SpectrumPolicy::Ssa { p_m } => {
            let lc = cfg.lambda_center();
            let le = cfg.lambda_edge();
            let center = solve(
                &mut |z| {
                    Ok(activity_factor(offered_load(
                        lc,
                        nbar_center(z)?,
                        cfg.lambda_b,
                        cfg.mu,
                        n * p_m,
                    )))
                },
                "center-band fixed point",
            )?;
            let edge = solve(
                &mut |z| {
                    Ok(activity_factor(offered_load(
                        le,
                        nbar_edge(z)?,
                        cfg.lambda_b,
                        cfg.mu,
                        n * (1.0 - p_m),
                    )))
                },
                "edge-band fixed point",
            )?;
            finish(cfg, &model, &mcs, center, edge)
        }
        SpectrumPolicy::Csa | SpectrumPolicy::Osa { .. } => {
            let r2 = cfg.region * cfg.region;
            let n_macro = cfg.policy.macro_channels(n);
            let joint = solve(
                &mut |z| {
                    let nbar = r2 * nbar_center(z)? + (1.0 - r2) * nbar_edge(z)?;
                    Ok(activity_factor(offered_load(
                        cfg.lambda_m,
                        nbar,
                        cfg.lambda_b,
                        cfg.mu,
                        n_macro,
                    )))
                },
                "co-channel fixed point",
            )?;
            finish(cfg, &model, &mcs, joint, joint)
        }
    }
}

fn finish(
    cfg: &ScenarioConfig,
    model: &CoverageModel,
    mcs: &McsTable,
    center: FixedPoint,
    edge: FixedPoint,
) -> Result<LoadSolution> {
    let th = mcs.thresholds();
    let cc = model.ccu_curve(th, center.value)?;
    let ce = model.ceu_curve(th, edge.value)?;
    let mcs_masses_c = mcs_masses(&cc, mcs)?;
    let mcs_masses_e = mcs_masses(&ce, mcs)?;
    let mean = |m: &[f64]| {
        m.iter()
            .enumerate()
            .map(|(i, p)| p * mcs.channels_per_call(i))
            .sum::<f64>()
    };
    Ok(LoadSolution {
        policy: cfg.policy,
        zeta_center: center.value,
        zeta_edge: edge.value,
        nbar_c: mean(&mcs_masses_c),
        nbar_e: mean(&mcs_masses_e),
        residual: center.residual.max(edge.residual),
        iterations: center.iterations.max(edge.iterations),
        mcs_masses_c,
        mcs_masses_e,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::{integrate, integrate_to_infinity, QuadOptions};

    fn table() -> McsTable {
        ScenarioConfig::default().mcs().unwrap()
    }

    #[test]
    fn single_scheme_needs_fixed_channels() {
        let mcs = McsTable::new(vec![1.0], 180e3, 90e3).unwrap();
        assert!((mean_channels(&[0.3], &mcs).unwrap() - 0.5).abs() < 1e-15);
        assert!((mean_channels(&[0.99], &mcs).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn mean_channels_matches_direct_sum() {
        let mcs = table();
        let cov: Vec<f64> = (0..mcs.len())
            .map(|i| 0.95 * (-0.2 * i as f64).exp())
            .collect();
        let mut direct = 0.0;
        for i in 0..mcs.len() {
            let hi = if i + 1 < mcs.len() { cov[i + 1] } else { 0.0 };
            let n = 90e3 / (180e3 * (1.0 + mcs.thresholds()[i]).log2());
            direct += n * (cov[i] - hi) / cov[0];
        }
        assert!((mean_channels(&cov, &mcs).unwrap() - direct).abs() < 1e-12);
    }

    #[test]
    fn mean_channels_rejects_bad_curves() {
        let mcs = McsTable::new(vec![1.0, 2.0], 180e3, 90e3).unwrap();
        assert!(mean_channels(&[0.0, 0.0], &mcs)
            .unwrap_err()
            .is_validation());
        assert!(mean_channels(&[0.3, 0.5], &mcs).is_err());
        assert!(mean_channels(&[0.3], &mcs).is_err());
        assert!(McsTable::new(vec![], 1.0, 1.0).is_err());
        assert!(McsTable::new(vec![2.0, 2.0], 1.0, 1.0).is_err());
    }

    #[test]
    fn cell_area_pdf_moments() {
        let lb = 5e-6;
        let opts = QuadOptions::with_rel_tol(1e-12);
        let total = integrate_to_infinity(|a| cell_area_pdf(a, lb), 0.0, opts)
            .unwrap()
            .value;
        let mean = integrate_to_infinity(|a| a * cell_area_pdf(a, lb), 0.0, opts)
            .unwrap()
            .value;
        assert!((total - 1.0).abs() < 1e-9);
        assert!((mean * lb - 1.0).abs() < 1e-6);
        assert_eq!(cell_area_pdf(0.0, lb), 0.0);
        let mode = 2.5 / (3.5 * lb);
        assert!(cell_area_pdf(mode, lb) > cell_area_pdf(mode * 1.01, lb));
        assert!(cell_area_pdf(mode, lb) > cell_area_pdf(mode * 0.99, lb));
    }

    #[test]
    fn activity_limits_and_monotonicity() {
        assert_eq!(activity_factor(0.0), 0.0);
        assert!(activity_factor(1e-6) < 1e-5);
        assert!(activity_factor(1e6) > 1.0 - 1e-6);
        let mut prev = 0.0;
        for i in 1..200 {
            let v = activity_factor(i as f64 * 0.05);
            assert!(v >= prev && v <= 1.0);
            prev = v;
        }
    }

    fn activity_by_quadrature(offered: f64, lambda_b: f64) -> f64 {
        let k = offered * lambda_b;
        let knee = 1.0 / k;
        let f = |a: f64| (a * k).min(1.0) * cell_area_pdf(a, lambda_b);
        let opts = QuadOptions::with_rel_tol(1e-12);
        integrate(f, 0.0, knee, opts).unwrap().value
            + integrate_to_infinity(f, knee, opts).unwrap().value
    }

    #[test]
    fn activity_matches_quadrature() {
        let cfg = ScenarioConfig::default();
        let n = 50.0 * 0.4;
        let offered = offered_load(cfg.lambda_center(), 0.4, cfg.lambda_b, cfg.mu, n);
        let q = activity_by_quadrature(offered, cfg.lambda_b);
        assert!((activity_factor(offered) - q).abs() < 1e-6);
    }

    #[test]
    fn bisection_finds_known_root() {
        let fp = bisect_fixed_point(|z| Ok(0.5 * z + 0.2), 1e-9, 60, "t").unwrap();
        assert!((fp.value - 0.4).abs() < 1e-8);
        let err = bisect_fixed_point(|z| Ok(0.5 * z + 0.2), 1e-30, 10, "t").unwrap_err();
        assert!(matches!(err, Error::NoConvergence { .. }));
        let zero = bisect_fixed_point(|_| Ok(0.0), 1e-9, 60, "t").unwrap();
        assert_eq!(zero.value, 0.0);
    }

    #[test]
    fn no_load_means_no_activity() {
        let cfg = ScenarioConfig {
            lambda_m: 0.0,
            ..Default::default()
        };
        let sol = solve_fixed_point(&cfg).unwrap();
        assert_eq!(sol.zeta_center, 0.0);
        assert_eq!(sol.zeta_edge, 0.0);
    }

    #[test]
    fn bisection_agrees_with_damped_iteration() {
        for policy in [SpectrumPolicy::Ssa { p_m: 0.4 }, SpectrumPolicy::Csa] {
            let cfg = ScenarioConfig {
                policy,
                ..Default::default()
            };
            let a = solve_fixed_point(&cfg).unwrap();
            let b =
                solve_fixed_point_with(&cfg, FixedPointMethod::Picard { damping: 0.5 }).unwrap();
            assert!(a.residual < 1e-6);
            assert!((a.zeta_center - b.zeta_center).abs() < 1e-5, "{a:?} {b:?}");
            assert!((a.zeta_edge - b.zeta_edge).abs() < 1e-5);
        }
    }
}
