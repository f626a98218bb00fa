//! Call blocking of the macro cell and the resulting area energy efficiency.
//!
//! Shared allocation gives two independent Erlang loss systems per cell.
//! Co-channel allocation gives one two-class loss system with real-valued
//! channel demands, evaluated by enumerating its product-form states; the
//! Kaufman-Roberts recursion is available as a fast path on a quantized grid.
//! Network figures average the per-cell values over the cell-area law.

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::load::{cell_area_pdf, solve_fixed_point, LoadSolution, CELL_AREA_SHAPE};
use crate::quad::{integrate, QuadOptions};
use crate::scenario::{ScenarioConfig, SpectrumPolicy};
use crate::special::{ln_gamma, regularized_lower_inverse};

/// Default cap on the number of enumerated two-class states.
pub const DEFAULT_STATE_CAP: usize = 1_000_000;
/// Default Kaufman-Roberts grid, in channels.
pub const DEFAULT_KR_RESOLUTION: f64 = 0.01;

// tolerance on `s·n ≤ N` with real demands
const FIT_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossSystem {
    pub servers: u32,
    /// Offered traffic in erlangs.
    pub offered: f64,
}

impl LossSystem {
    pub fn new(servers: u32, offered: f64) -> Result<Self> {
        ensure(servers >= 1, "servers", || "must be at least 1".into())?;
        ensure(offered >= 0.0 && offered.is_finite(), "offered", || {
            format!("must be non-negative and finite, got {offered}")
        })?;
        Ok(LossSystem { servers, offered })
    }
}

/// Erlang-B by `B_k = ρ B_{k-1} / (k + ρ B_{k-1})`, `B_0 = 1`.
pub fn erlang_b(sys: &LossSystem) -> f64 {
    let rho = sys.offered;
    let mut b = 1.0;
    for k in 1..=sys.servers {
        b = rho * b / (k as f64 + rho * b);
    }
    b
}

/// Erlang-B from `(ρ^N/N!) / Σ_k ρ^k/k!` evaluated with log-sum-exp.
pub fn erlang_b_direct(sys: &LossSystem) -> f64 {
    let rho = sys.offered;
    if rho == 0.0 {
        return 0.0;
    }
    let lr = rho.ln();
    let logs: Vec<f64> = (0..=sys.servers)
        .map(|k| k as f64 * lr - ln_gamma(k as f64 + 1.0))
        .collect();
    let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let norm: f64 = logs.iter().map(|l| (l - top).exp()).sum();
    (logs[sys.servers as usize] - top).exp() / norm
}

/// Two classes sharing `capacity` channels, class `k` holding `demands[k]`
/// channels per call.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultiClassLossSystem {
    pub capacity: f64,
    pub demands: [f64; 2],
    /// Offered traffic of each class in erlangs.
    pub loads: [f64; 2],
}

impl MultiClassLossSystem {
    pub fn new(capacity: f64, demands: [f64; 2], loads: [f64; 2]) -> Result<Self> {
        ensure(
            demands.iter().all(|d| *d > 0.0 && d.is_finite()),
            "demands",
            || format!("must be positive, got {demands:?}"),
        )?;
        ensure(
            loads.iter().all(|l| *l >= 0.0 && l.is_finite()),
            "loads",
            || format!("must be non-negative, got {loads:?}"),
        )?;
        let max_demand = demands[0].max(demands[1]);
        ensure(capacity > max_demand, "capacity", || {
            format!("{capacity} must exceed the largest demand {max_demand}")
        })?;
        Ok(MultiClassLossSystem {
            capacity,
            demands,
            loads,
        })
    }

    fn fits(&self, used: f64, limit: f64) -> bool {
        used <= limit + FIT_EPS * self.capacity.max(1.0)
    }

    fn max_count(&self, class: usize, room: f64) -> u32 {
        let raw = (room + FIT_EPS * self.capacity.max(1.0)) / self.demands[class];
        raw.floor().max(0.0) as u32
    }
}

/// Stationary distribution over `{s : s·n ≤ N}`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateProbs {
    pub states: Vec<[u32; 2]>,
    pub probs: Vec<f64>,
}

impl StateProbs {
    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Mass of the states that still admit a call of `class`.
    pub fn admitting(&self, sys: &MultiClassLossSystem, class: usize) -> f64 {
        let limit = sys.capacity - sys.demands[class];
        self.states
            .iter()
            .zip(&self.probs)
            .filter(|(s, _)| sys.fits(occupied(sys, s), limit))
            .map(|(_, p)| p)
            .sum()
    }
}

fn occupied(sys: &MultiClassLossSystem, s: &[u32; 2]) -> f64 {
    s[0] as f64 * sys.demands[0] + s[1] as f64 * sys.demands[1]
}

fn log_weight(count: u32, ln_load: f64) -> f64 {
    if count == 0 {
        0.0
    } else {
        count as f64 * ln_load - ln_gamma(count as f64 + 1.0)
    }
}

pub fn mc2d_state_probs(sys: &MultiClassLossSystem) -> Result<StateProbs> {
    mc2d_state_probs_capped(sys, DEFAULT_STATE_CAP)
}

pub fn mc2d_state_probs_capped(sys: &MultiClassLossSystem, cap: usize) -> Result<StateProbs> {
    let max_c = sys.max_count(0, sys.capacity);
    let mut count = 0usize;
    for sc in 0..=max_c {
        count += sys.max_count(1, sys.capacity - sc as f64 * sys.demands[0]) as usize + 1;
        if count > cap {
            return Err(Error::StateSpaceTooLarge { cap });
        }
    }
    let ln_load = [sys.loads[0].ln(), sys.loads[1].ln()];
    let mut states = Vec::with_capacity(count);
    let mut logs = Vec::with_capacity(count);
    for sc in 0..=max_c {
        if sc > 0 && sys.loads[0] == 0.0 {
            break;
        }
        let lc = log_weight(sc, ln_load[0]);
        let max_e = sys.max_count(1, sys.capacity - sc as f64 * sys.demands[0]);
        for se in 0..=max_e {
            if se > 0 && sys.loads[1] == 0.0 {
                break;
            }
            states.push([sc, se]);
            logs.push(lc + log_weight(se, ln_load[1]));
        }
    }
    let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut probs: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
    let norm: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= norm);
    Ok(StateProbs { states, probs })
}

/// Per-class blocking `1 - Σ_{s ∈ S_k} π(s)` by full enumeration.
pub fn blocking_2d(sys: &MultiClassLossSystem) -> Result<(f64, f64)> {
    let pi = mc2d_state_probs(sys)?;
    Ok((
        (1.0 - pi.admitting(sys, 0)).max(0.0),
        (1.0 - pi.admitting(sys, 1)).max(0.0),
    ))
}

pub fn kaufman_roberts(sys: &MultiClassLossSystem) -> Result<(f64, f64)> {
    kaufman_roberts_with(sys, DEFAULT_KR_RESOLUTION)
}

/// Kaufman-Roberts recursion with demands rounded to multiples of
/// `resolution` channels.
pub fn kaufman_roberts_with(sys: &MultiClassLossSystem, resolution: f64) -> Result<(f64, f64)> {
    ensure(resolution > 0.0, "resolution", || {
        format!("must be positive, got {resolution}")
    })?;
    let units = |x: f64| (x / resolution + FIT_EPS).floor();
    let capacity = units(sys.capacity) as usize;
    let mut b = [0usize; 2];
    for k in 0..2 {
        let q = (sys.demands[k] / resolution).round();
        if q < 1.0 {
            return Err(Error::GridTooCoarse {
                resolution,
                demand: sys.demands[k],
            });
        }
        b[k] = q as usize;
    }
    let mut q = vec![0.0f64; capacity + 1];
    q[0] = 1.0;
    for j in 1..=capacity {
        let mut acc = 0.0;
        for k in 0..2 {
            if b[k] <= j {
                acc += sys.loads[k] * b[k] as f64 * q[j - b[k]];
            }
        }
        q[j] = acc / j as f64;
        if q[j] > 1e250 {
            q[..=j].iter_mut().for_each(|v| *v *= 1e-250);
        }
    }
    let norm: f64 = q.iter().sum();
    let blocked = |k: usize| -> f64 {
        let from = capacity.saturating_sub(b[k]) + 1;
        q[from.min(capacity + 1)..].iter().sum::<f64>() / norm
    };
    Ok((blocked(0), blocked(1)))
}

/// Area-averaged blocking of one scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockingReport {
    pub policy: SpectrumPolicy,
    pub b_ccu: f64,
    pub b_ceu: f64,
    pub b_network: f64,
    /// Servers per band under shared allocation.
    pub servers: Option<[u32; 2]>,
}

/// Largest cell area considered: the `1 - 1e-6` quantile of the area law.
pub fn area_cutoff(lambda_b: f64) -> f64 {
    regularized_lower_inverse(CELL_AREA_SHAPE, 1.0 - 1e-6) / (CELL_AREA_SHAPE * lambda_b)
}

fn area_average<F: Fn(f64) -> Result<f64>>(f: F, lambda_b: f64) -> Result<f64> {
    let failure = std::cell::RefCell::new(None);
    let integrand = |a: f64| match f(a) {
        Ok(v) => v * cell_area_pdf(a, lambda_b),
        Err(e) => {
            failure.borrow_mut().get_or_insert(e);
            0.0
        }
    };
    let opts = QuadOptions {
        abs_tol: 1e-12,
        rel_tol: 1e-9,
        max_subdivisions: 2000,
    };
    let v = integrate(integrand, 0.0, area_cutoff(lambda_b), opts)?.value;
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(v)
}

/// Servers of the center and edge bands, `⌊N p_m / N̄_c⌋` and `⌊N (1-p_m) / N̄_e⌋`.
pub fn shared_servers(cfg: &ScenarioConfig, sol: &LoadSolution, p_m: f64) -> [u32; 2] {
    let n = cfg.channels_f64();
    let floor = |x: f64| {
        if x.is_finite() {
            x.floor().max(0.0) as u32
        } else {
            u32::MAX
        }
    };
    [
        floor(n * p_m / sol.nbar_c),
        floor(n * (1.0 - p_m) / sol.nbar_e),
    ]
}

fn erlang_or_full(servers: u32, offered: f64) -> Result<f64> {
    if servers == 0 {
        return Ok(1.0);
    }
    Ok(erlang_b(&LossSystem::new(servers, offered)?))
}

pub fn network_blocking(cfg: &ScenarioConfig, sol: &LoadSolution) -> Result<BlockingReport> {
    cfg.validate()?;
    let r2 = cfg.region * cfg.region;
    let (lc, le) = (cfg.lambda_center(), cfg.lambda_edge());
    let (b_ccu, b_ceu, servers) = if cfg.lambda_m == 0.0 {
        (0.0, 0.0, None)
    } else {
        match cfg.policy {
            SpectrumPolicy::Ssa { p_m } => {
                let [nc, ne] = shared_servers(cfg, sol, p_m);
                let bc = area_average(|a| erlang_or_full(nc, a * lc / cfg.mu), cfg.lambda_b)?;
                let be = area_average(|a| erlang_or_full(ne, a * le / cfg.mu), cfg.lambda_b)?;
                (bc, be, Some([nc, ne]))
            }
            SpectrumPolicy::Csa | SpectrumPolicy::Osa { .. } => {
                let cap = cfg.policy.macro_channels(cfg.channels_f64());
                let demands = [sol.nbar_c, sol.nbar_e];
                let per_area = |a: f64| {
                    let sys = MultiClassLossSystem::new(
                        cap,
                        demands,
                        [a * lc / cfg.mu, a * le / cfg.mu],
                    )?;
                    blocking_2d(&sys)
                };
                let bc = area_average(|a| Ok(per_area(a)?.0), cfg.lambda_b)?;
                let be = area_average(|a| Ok(per_area(a)?.1), cfg.lambda_b)?;
                (bc, be, None)
            }
        }
    };
    Ok(BlockingReport {
        policy: cfg.policy,
        b_ccu,
        b_ceu,
        b_network: r2 * b_ccu + (1.0 - r2) * b_ceu,
        servers,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    /// Area energy efficiency in bps/(J·m²).
    pub eta: f64,
    pub zeta_overall: f64,
}

/// `λ_M R_th (1 - B) / (μ N P_B ζ)` with the policy's overall activity and
/// class-weighted blocking.
pub fn energy_efficiency(
    cfg: &ScenarioConfig,
    sol: &LoadSolution,
    blocking: &BlockingReport,
) -> Result<EnergyReport> {
    let zeta = sol.zeta_overall();
    if !(zeta > 0.0) {
        return Err(Error::UndefinedEfficiency);
    }
    let r2 = cfg.region * cfg.region;
    let channels = cfg.policy.macro_channels(cfg.channels_f64());
    let scale = cfg.lambda_m * cfg.rate_bps / (cfg.mu * channels * cfg.p_b * zeta);
    let served = match cfg.policy {
        SpectrumPolicy::Ssa { .. } => {
            r2 * (1.0 - blocking.b_ccu) + (1.0 - r2) * (1.0 - blocking.b_ceu)
        }
        _ => 1.0 - blocking.b_network,
    };
    Ok(EnergyReport {
        eta: scale * served,
        zeta_overall: zeta,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FairPm {
    pub p_m: f64,
    pub b_ccu: f64,
    pub b_ceu: f64,
    pub iterations: usize,
}

/// Blocking of both classes at a given center-band share.
pub fn blocking_at_pm(cfg: &ScenarioConfig, p_m: f64) -> Result<BlockingReport> {
    let cfg = ScenarioConfig {
        policy: SpectrumPolicy::Ssa { p_m },
        ..cfg.clone()
    };
    let sol = solve_fixed_point(&cfg)?;
    network_blocking(&cfg, &sol)
}

/// Bisection over `p_m ∈ [lo, hi]` for equal center and edge blocking.
pub fn fair_pm_search(cfg: &ScenarioConfig, target_tol: f64, lo: f64, hi: f64) -> Result<FairPm> {
    ensure(
        matches!(cfg.policy, SpectrumPolicy::Ssa { .. }),
        "policy",
        || "the fair split search needs shared allocation".into(),
    )?;
    ensure(target_tol > 0.0, "target_tol", || {
        format!("must be positive, got {target_tol}")
    })?;
    ensure(0.0 < lo && lo < hi && hi < 1.0, "bracket", || {
        format!("need 0 < lo < hi < 1, got [{lo}, {hi}]")
    })?;
    let diff = |p: f64| -> Result<(f64, BlockingReport)> {
        let r = blocking_at_pm(cfg, p)?;
        Ok((r.b_ccu - r.b_ceu, r))
    };
    let done = |p: f64, r: &BlockingReport, it: usize| FairPm {
        p_m: p,
        b_ccu: r.b_ccu,
        b_ceu: r.b_ceu,
        iterations: it,
    };
    let (mut a, mut b) = (lo, hi);
    let (da, ra) = diff(a)?;
    if da.abs() < target_tol {
        return Ok(done(a, &ra, 0));
    }
    let (db, rb) = diff(b)?;
    if db.abs() < target_tol {
        return Ok(done(b, &rb, 0));
    }
    if da.signum() == db.signum() {
        return Err(Error::NoSignChange {
            what: "b_ccu - b_ceu".into(),
            lo,
            hi,
        });
    }
    let mut best = if da.abs() < db.abs() {
        (da, done(a, &ra, 0))
    } else {
        (db, done(b, &rb, 0))
    };
    let mut sign_a = da.signum();
    for it in 1..=80 {
        let mid = 0.5 * (a + b);
        let (dm, rm) = diff(mid)?;
        if dm.abs() < best.0.abs() {
            best = (dm, done(mid, &rm, it));
        }
        if dm.abs() < target_tol {
            return Ok(done(mid, &rm, it));
        }
        if dm.signum() == sign_a {
            a = mid;
            sign_a = dm.signum();
        } else {
            b = mid;
        }
        if b - a < 1e-12 {
            break;
        }
    }
    Err(Error::NoConvergence {
        stage: "fair p_m search".into(),
        iterations: best.1.iterations,
        detail: format!(
            "blocking gap jumps across p_m = {}; closest |b_ccu - b_ceu| = {:e}",
            best.1.p_m,
            best.0.abs()
        ),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn erlang_small_cases() {
        assert_eq!(erlang_b(&LossSystem::new(5, 0.0).unwrap()), 0.0);
        assert!((erlang_b(&LossSystem::new(1, 1.0).unwrap()) - 0.5).abs() < 1e-15);
        assert!(LossSystem::new(0, 1.0).is_err());
        assert!(LossSystem::new(1, -1.0).is_err());
    }

    #[test]
    fn erlang_recursion_matches_direct() {
        let sys = LossSystem::new(50, 40.0).unwrap();
        assert!((erlang_b(&sys) - erlang_b_direct(&sys)).abs() < 1e-12);
    }

    #[test]
    fn zero_loads_put_all_mass_at_origin() {
        let sys = MultiClassLossSystem::new(10.0, [1.0, 2.0], [0.0, 0.0]).unwrap();
        let pi = mc2d_state_probs(&sys).unwrap();
        assert_eq!(pi.states, vec![[0, 0]]);
        assert_eq!(pi.probs, vec![1.0]);
        assert_eq!(blocking_2d(&sys).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn kr_matches_enumeration_for_integer_demands() {
        let sys = MultiClassLossSystem::new(50.0, [1.0, 2.0], [5.0, 3.0]).unwrap();
        let (ec, ee) = blocking_2d(&sys).unwrap();
        for res in [1.0, 0.5, DEFAULT_KR_RESOLUTION] {
            let (kc, ke) = kaufman_roberts_with(&sys, res).unwrap();
            assert!(
                (ec - kc).abs() < 1e-12 && (ee - ke).abs() < 1e-12,
                "res={res}"
            );
        }
    }

    #[test]
    fn kr_single_class_is_erlang() {
        let sys = MultiClassLossSystem::new(20.0, [1.0, 1.0], [12.0, 0.0]).unwrap();
        let (b, _) = kaufman_roberts_with(&sys, 1.0).unwrap();
        let e = erlang_b(&LossSystem::new(20, 12.0).unwrap());
        assert!((b - e).abs() < 1e-13);
    }

    #[test]
    fn kr_close_to_enumeration_for_real_demands() {
        let sys = MultiClassLossSystem::new(50.0, [0.2381, 0.5299], [40.0, 40.0]).unwrap();
        let (ec, ee) = blocking_2d(&sys).unwrap();
        let (kc, ke) = kaufman_roberts(&sys).unwrap();
        assert!(
            (ec - kc).abs() < 1e-3 && (ee - ke).abs() < 1e-3,
            "{ec} {kc} {ee} {ke}"
        );
    }

    #[test]
    fn coarse_grid_and_state_cap_are_reported() {
        let sys = MultiClassLossSystem::new(50.0, [0.004, 1.0], [1.0, 1.0]).unwrap();
        assert!(matches!(
            kaufman_roberts(&sys),
            Err(Error::GridTooCoarse { .. })
        ));
        assert!(matches!(
            mc2d_state_probs_capped(&sys, 1000),
            Err(Error::StateSpaceTooLarge { cap: 1000 })
        ));
    }

    #[test]
    fn area_cutoff_is_far_in_the_tail() {
        let lb = 5e-6;
        let a = area_cutoff(lb);
        assert!(a * lb > 3.0 && a * lb < 10.0);
    }

    #[test]
    fn no_load_no_blocking() {
        let cfg = ScenarioConfig {
            lambda_m: 0.0,
            ..Default::default()
        };
        let sol = solve_fixed_point(&cfg).unwrap();
        let b = network_blocking(&cfg, &sol).unwrap();
        assert_eq!((b.b_ccu, b.b_ceu, b.b_network), (0.0, 0.0, 0.0));
        assert_eq!(
            energy_efficiency(&cfg, &sol, &b),
            Err(Error::UndefinedEfficiency)
        );
    }

    #[test]
    fn efficiency_without_blocking() {
        let cfg = ScenarioConfig::default();
        let sol = solve_fixed_point(&cfg).unwrap();
        let none = BlockingReport {
            policy: cfg.policy,
            b_ccu: 0.0,
            b_ceu: 0.0,
            b_network: 0.0,
            servers: None,
        };
        let e = energy_efficiency(&cfg, &sol, &none).unwrap();
        let expect = cfg.lambda_m * cfg.rate_bps / (cfg.mu * 50.0 * cfg.p_b * sol.zeta_overall());
        assert!((e.eta - expect).abs() < 1e-12 * expect);
    }

    #[test]
    fn fair_search_requires_shared_policy() {
        let cfg = ScenarioConfig {
            policy: SpectrumPolicy::Csa,
            ..Default::default()
        };
        assert!(fair_pm_search(&cfg, 1e-3, 0.1, 0.9)
            .unwrap_err()
            .is_validation());
    }
}
