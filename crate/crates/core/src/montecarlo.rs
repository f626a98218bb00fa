//! Simulators used to check the analytic model.
//!
//! * Spatial: Poisson MBS and FAP layouts around a test user at the origin,
//!   Rayleigh fading, per-MBS channel activity. Gives SIR samples and
//!   per-class outage.
//! * Temporal: loss systems driven by Poisson arrivals with exponential
//!   holding times. Gives channel activity and call blocking.
//!
//! Work is split into fixed chunks, each with its own derived seed, so the
//! result does not depend on the number of threads.

use std::f64::consts::PI;
use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma};
use serde::{Deserialize, Serialize};

use crate::blocking::MultiClassLossSystem;
use crate::error::{ensure, Error, Result};
use crate::geometry::{
    classify_user, derive_seed, rng_from_seed, sample_poisson_count, sample_ppp_with, Disk,
    DistancePair, Point, RegionThreshold, SimRng, UserClass,
};
use crate::load::{LoadSolution, McsTable, CELL_AREA_SHAPE};
use crate::scenario::{ScenarioConfig, SpectrumPolicy};

/// Running count, sum and sum of squares of a sampled quantity.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Tally {
    pub count: u64,
    pub sum: f64,
    pub sum_sq: f64,
}

impl Tally {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    pub fn merge(&mut self, other: &Tally) {
        self.count += other.count;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
    }

    pub fn mean(&self) -> f64 {
        self.sum / self.count as f64
    }

    /// Sample variance with the `n - 1` denominator.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        let n = self.count as f64;
        ((self.sum_sq - self.sum * self.sum / n) / (n - 1.0)).max(0.0)
    }

    pub fn estimate(&self, seed: u64) -> Option<SimEstimate> {
        if self.count == 0 {
            return None;
        }
        Some(SimEstimate {
            mean: self.mean(),
            stderr: (self.variance() / self.count as f64).sqrt(),
            trials: self.count,
            seed,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub trials: u64,
    pub seed: u64,
}

impl SimEstimate {
    /// `|mean - target|` in units of the standard error.
    pub fn z_score(&self, target: f64) -> f64 {
        let d = (self.mean - target).abs();
        if self.stderr == 0.0 {
            if d == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            d / self.stderr
        }
    }
}

/// Runs `chunks` independent work units and returns their results in chunk
/// order.
pub fn par_map<T, F>(chunks: usize, work: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..chunks).into_par_iter().map(work).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..chunks).map(work).collect()
    }
}

const CHUNK: usize = 2048;

fn chunk_sizes(total: usize) -> Vec<usize> {
    let mut v = vec![CHUNK; total / CHUNK];
    if !total.is_multiple_of(CHUNK) {
        v.push(total % CHUNK);
    }
    v
}

/// Fraction of users classified as center users, each user looking at its own
/// PPP realization in a disk holding about 100 MBSs on average.
pub fn simulate_classification(
    region: RegionThreshold,
    lambda_b: f64,
    users: usize,
    seed: u64,
) -> Result<SimEstimate> {
    ensure(users > 0, "users", || "must be positive".into())?;
    ensure(lambda_b > 0.0, "lambda_b", || "must be positive".into())?;
    let window = Disk::centered((100.0 / (PI * lambda_b)).sqrt())?;
    let sizes = chunk_sizes(users);
    let parts = par_map(sizes.len(), |c| -> Result<Tally> {
        let mut rng = rng_from_seed(derive_seed(seed, c as u64));
        let mut t = Tally::default();
        for _ in 0..sizes[c] {
            let pattern = sample_ppp_with(lambda_b, window, &mut rng)?;
            if let Some(pair) = pattern.nearest_two(&Point::new(0.0, 0.0)) {
                let center = classify_user(pair, region) == UserClass::Center;
                t.push(if center { 1.0 } else { 0.0 });
            }
        }
        Ok(t)
    });
    let mut total = Tally::default();
    for p in parts {
        total.merge(&p?);
    }
    total.estimate(seed).ok_or(Error::InsufficientSamples {
        class: "user".into(),
        count: 0,
    })
}

/// One simulated link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SirSample {
    pub user_class: UserClass,
    pub sir: f64,
    pub serving_distance: f64,
}

/// Inputs of the spatial simulator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutageSetup {
    pub lambda_b: f64,
    pub alpha: f64,
    pub region: f64,
    /// FAP to MBS transmit power ratio.
    pub fap_rel: f64,
    /// Channel activity of MBSs on the band serving center / edge users.
    pub zeta_center: f64,
    pub zeta_edge: f64,
    /// Co-channel FAP density seen by center / edge users.
    pub femto_center: f64,
    pub femto_edge: f64,
    /// Expected number of MBSs in the simulation disk around the user.
    pub window_mbs: f64,
}

impl OutageSetup {
    /// Setup for a scenario with the given band activities.
    pub fn for_scenario(cfg: &ScenarioConfig, zeta_center: f64, zeta_edge: f64) -> Result<Self> {
        cfg.validate()?;
        let n = cfg.channels_f64();
        Ok(OutageSetup {
            lambda_b: cfg.lambda_b,
            alpha: cfg.alpha,
            region: cfg.region,
            fap_rel: cfg.powers()?.fap_relative(),
            zeta_center,
            zeta_edge,
            femto_center: cfg.policy.center_femto_density(cfg.lambda_f, n),
            femto_edge: cfg.policy.edge_femto_density(cfg.lambda_f, n),
            window_mbs: 1000.0,
        })
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.lambda_b > 0.0, "lambda_b", || {
            "must be positive".into()
        })?;
        ensure(self.alpha > 2.0, "alpha", || "must exceed 2".into())?;
        RegionThreshold::new(self.region)?;
        for (z, name) in [
            (self.zeta_center, "zeta_center"),
            (self.zeta_edge, "zeta_edge"),
        ] {
            ensure((0.0..=1.0).contains(&z), name, || {
                format!("must lie in [0, 1], got {z}")
            })?;
        }
        ensure(
            self.femto_center >= 0.0 && self.femto_edge >= 0.0,
            "femto density",
            || "must be non-negative".into(),
        )?;
        ensure(self.window_mbs >= 500.0, "window_mbs", || {
            format!(
                "needs at least 500 expected MBSs to keep edge effects small, got {}",
                self.window_mbs
            )
        })
    }

    fn window_radius_sq(&self) -> f64 {
        self.window_mbs / (PI * self.lambda_b)
    }
}

// r^{-α} from r²
fn path_gain(r_sq: f64, half_alpha: f64) -> f64 {
    if half_alpha == 2.0 {
        1.0 / (r_sq * r_sq)
    } else {
        r_sq.powf(-half_alpha)
    }
}

fn exp1(rng: &mut SimRng) -> f64 {
    Exp1.sample(rng)
}

/// Draws one link: MBS and FAP distances from the origin, classification,
/// activity thinning and fading. `None` when fewer than two MBSs fall in the
/// window.
fn draw_link(setup: &OutageSetup, rng: &mut SimRng, radii: &mut Vec<f64>) -> Option<SirSample> {
    let w2 = setup.window_radius_sq();
    let half_alpha = setup.alpha / 2.0;
    let n = sample_poisson_count(setup.window_mbs, rng);
    if n < 2 {
        return None;
    }
    radii.clear();
    radii.extend((0..n).map(|_| w2 * rng.random::<f64>()));
    let (mut first, mut second) = (usize::MAX, usize::MAX);
    for (i, &r) in radii.iter().enumerate() {
        if first == usize::MAX || r < radii[first] {
            second = first;
            first = i;
        } else if second == usize::MAX || r < radii[second] {
            second = i;
        }
    }
    let r_m = radii[first].sqrt();
    let r_d = radii[second].sqrt();
    let pair = DistancePair::new(
        r_m.max(f64::MIN_POSITIVE),
        r_d.max(r_m.max(f64::MIN_POSITIVE)),
    )
    .ok()?;
    let region = RegionThreshold::new(setup.region).ok()?;
    let class = classify_user(pair, region);
    let (zeta, femto) = match class {
        UserClass::Center => (setup.zeta_center, setup.femto_center),
        UserClass::Edge => (setup.zeta_edge, setup.femto_edge),
    };
    let mut interference = 0.0;
    for (i, &r2) in radii.iter().enumerate() {
        if i == first {
            continue;
        }
        if rng.random::<f64>() < zeta {
            interference += exp1(rng) * path_gain(r2, half_alpha);
        }
    }
    let nf = sample_poisson_count(femto * PI * w2, rng);
    let mut femto_sum = 0.0;
    for _ in 0..nf {
        let d2 = w2 * rng.random::<f64>();
        femto_sum += exp1(rng) * path_gain(d2, half_alpha);
    }
    interference += setup.fap_rel * femto_sum;
    let signal = exp1(rng) * path_gain(radii[first], half_alpha);
    let sir = if interference > 0.0 {
        signal / interference
    } else {
        f64::INFINITY
    };
    Some(SirSample {
        user_class: class,
        sir,
        serving_distance: r_m,
    })
}

/// `count` SIR samples, single stream.
pub fn sample_sir(setup: &OutageSetup, count: usize, seed: u64) -> Result<Vec<SirSample>> {
    setup.validate()?;
    let mut rng = rng_from_seed(seed);
    let mut radii = Vec::new();
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        if let Some(s) = draw_link(setup, &mut rng, &mut radii) {
            out.push(s);
        }
    }
    Ok(out)
}

/// Writes one whitespace-separated record per sample:
/// `class sir serving_distance_m`.
pub fn write_sir_records<W: Write>(samples: &[SirSample], mut out: W) -> std::io::Result<()> {
    for s in samples {
        writeln!(
            out,
            "{} {:e} {:e}",
            s.user_class.label(),
            s.sir,
            s.serving_distance
        )?;
    }
    Ok(())
}

/// Per-class outage `P(SIR ≤ β)` at every threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutageEstimate {
    pub betas: Vec<f64>,
    pub ccu: Vec<SimEstimate>,
    pub ceu: Vec<SimEstimate>,
    pub ccu_samples: u64,
    pub ceu_samples: u64,
    pub trials: u64,
}

/// Smallest class sample size for which an outage estimate is returned.
pub const MIN_CLASS_SAMPLES: u64 = 100;

pub fn simulate_outage(
    setup: &OutageSetup,
    betas: &[f64],
    trials: usize,
    seed: u64,
) -> Result<OutageEstimate> {
    setup.validate()?;
    ensure(!betas.is_empty(), "betas", || {
        "needs at least one threshold".into()
    })?;
    ensure(trials > 0, "trials", || "must be positive".into())?;
    let sizes = chunk_sizes(trials);
    let parts = par_map(sizes.len(), |c| {
        let mut rng = rng_from_seed(derive_seed(seed, c as u64));
        let mut radii = Vec::new();
        let mut ccu = vec![Tally::default(); betas.len()];
        let mut ceu = vec![Tally::default(); betas.len()];
        for _ in 0..sizes[c] {
            let Some(s) = draw_link(setup, &mut rng, &mut radii) else {
                continue;
            };
            let target = match s.user_class {
                UserClass::Center => &mut ccu,
                UserClass::Edge => &mut ceu,
            };
            for (t, &b) in target.iter_mut().zip(betas) {
                t.push(if s.sir > b { 0.0 } else { 1.0 });
            }
        }
        (ccu, ceu)
    });
    let mut ccu = vec![Tally::default(); betas.len()];
    let mut ceu = vec![Tally::default(); betas.len()];
    for (pc, pe) in &parts {
        for i in 0..betas.len() {
            ccu[i].merge(&pc[i]);
            ceu[i].merge(&pe[i]);
        }
    }
    let (nc, ne) = (ccu[0].count, ceu[0].count);
    for (n, class) in [(nc, "ccu"), (ne, "ceu")] {
        if n < MIN_CLASS_SAMPLES {
            return Err(Error::InsufficientSamples {
                class: class.into(),
                count: n,
            });
        }
    }
    Ok(OutageEstimate {
        betas: betas.to_vec(),
        ccu: ccu
            .iter()
            .map(|t| t.estimate(seed).expect("non-empty"))
            .collect(),
        ceu: ceu
            .iter()
            .map(|t| t.estimate(seed).expect("non-empty"))
            .collect(),
        ccu_samples: nc,
        ceu_samples: ne,
        trials: trials as u64,
    })
}

/// Serving distances of simulated center and edge users.
pub fn sample_serving_distances(
    region: RegionThreshold,
    lambda_b: f64,
    users: usize,
    seed: u64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let setup = OutageSetup {
        lambda_b,
        alpha: 4.0,
        region: region.value(),
        fap_rel: 1.0,
        zeta_center: 0.0,
        zeta_edge: 0.0,
        femto_center: 0.0,
        femto_edge: 0.0,
        window_mbs: 500.0,
    };
    let samples = sample_sir(&setup, users, seed)?;
    let pick = |c: UserClass| {
        samples
            .iter()
            .filter(|s| s.user_class == c)
            .map(|s| s.serving_distance)
            .collect::<Vec<_>>()
    };
    Ok((pick(UserClass::Center), pick(UserClass::Edge)))
}

/// Kolmogorov-Smirnov distance between a sample and a continuous cdf.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Channels held by one call of a class.
#[derive(Debug, Clone, PartialEq)]
pub enum Demand {
    Fixed(f64),
    /// Channels `values[i]` with probability `masses[i]`.
    Discrete {
        values: Vec<f64>,
        cumulative: Vec<f64>,
    },
}

impl Demand {
    pub fn discrete(values: Vec<f64>, masses: &[f64]) -> Result<Self> {
        ensure(
            values.len() == masses.len() && !values.is_empty(),
            "masses",
            || "one mass per demand value is required".into(),
        )?;
        let total: f64 = masses.iter().sum();
        ensure(total > 0.0, "masses", || "must not all be zero".into())?;
        let mut acc = 0.0;
        let cumulative = masses
            .iter()
            .map(|m| {
                acc += m / total;
                acc
            })
            .collect();
        Ok(Demand::Discrete { values, cumulative })
    }

    /// Demand of each scheme in `mcs` drawn with the given masses.
    pub fn from_mcs(mcs: &McsTable, masses: &[f64]) -> Result<Self> {
        let values = (0..mcs.len()).map(|i| mcs.channels_per_call(i)).collect();
        Demand::discrete(values, masses)
    }

    fn draw(&self, rng: &mut SimRng) -> f64 {
        match self {
            Demand::Fixed(d) => *d,
            Demand::Discrete { values, cumulative } => {
                let u: f64 = rng.random();
                let i = cumulative.partition_point(|c| *c < u).min(values.len() - 1);
                values[i]
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            Demand::Fixed(d) => *d,
            Demand::Discrete { values, cumulative } => {
                let mut prev = 0.0;
                values
                    .iter()
                    .zip(cumulative)
                    .map(|(v, c)| {
                        let m = c - prev;
                        prev = *c;
                        v * m
                    })
                    .sum()
            }
        }
    }
}

/// A call class of a loss cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CallClass {
    /// Arrivals per minute.
    pub rate: f64,
    /// Index of the channel pool the class draws from.
    pub pool: usize,
    pub demand: Demand,
}

/// Channel pools and the call classes competing for them.
#[derive(Debug, Clone, PartialEq)]
pub struct LossCell {
    pub pools: Vec<f64>,
    pub classes: Vec<CallClass>,
    /// Departures per minute per call.
    pub mu: f64,
}

/// Per-run measurements of a loss cell after warm-up.
#[derive(Debug, Clone, PartialEq)]
pub struct CellRun {
    pub arrivals: Vec<u64>,
    pub blocked: Vec<u64>,
    /// Time-averaged fraction of each pool in use.
    pub utilisation: Vec<f64>,
    /// Utilisation over the first and second half of the measured period.
    pub utilisation_halves: Vec<[f64; 2]>,
    /// Per-class blocking fraction in each batch.
    pub batch_blocking: Vec<Vec<f64>>,
}

impl CellRun {
    pub fn blocking(&self, class: usize) -> f64 {
        if self.arrivals[class] == 0 {
            0.0
        } else {
            self.blocked[class] as f64 / self.arrivals[class] as f64
        }
    }
}

struct ActiveCall {
    pool: usize,
    demand: f64,
}

impl LossCell {
    pub fn validate(&self) -> Result<()> {
        ensure(self.mu > 0.0, "mu", || "must be positive".into())?;
        ensure(self.pools.iter().all(|p| *p > 0.0), "pools", || {
            "capacities must be positive".into()
        })?;
        for c in &self.classes {
            ensure(c.pool < self.pools.len(), "pool", || {
                "class refers to a missing pool".into()
            })?;
            ensure(c.rate >= 0.0 && c.rate.is_finite(), "rate", || {
                "must be non-negative".into()
            })?;
        }
        Ok(())
    }

    /// Simulates `minutes` of operation, discarding the first
    /// `warmup_fraction` of them. Blocking is also recorded in `batches`
    /// equal time slices of the measured period.
    pub fn run(
        &self,
        minutes: f64,
        warmup_fraction: f64,
        batches: usize,
        rng: &mut SimRng,
    ) -> Result<CellRun> {
        self.validate()?;
        ensure(minutes > 0.0, "minutes", || "must be positive".into())?;
        ensure(
            (0.0..1.0).contains(&warmup_fraction),
            "warmup_fraction",
            || "must lie in [0, 1)".into(),
        )?;
        let batches = batches.max(1);
        let k = self.classes.len();
        let start = minutes * warmup_fraction;
        let span = minutes - start;
        let mid = start + 0.5 * span;
        let total_rate: f64 = self.classes.iter().map(|c| c.rate).sum();
        let mut used = vec![0.0f64; self.pools.len()];
        let mut area = vec![0.0f64; self.pools.len()];
        let mut area_half = vec![[0.0f64; 2]; self.pools.len()];
        let mut active: Vec<ActiveCall> = Vec::new();
        let mut arrivals = vec![0u64; k];
        let mut blocked = vec![0u64; k];
        let mut batch_arr = vec![vec![0u64; k]; batches];
        let mut batch_blk = vec![vec![0u64; k]; batches];
        let mut t = 0.0;
        loop {
            let rate = total_rate + self.mu * active.len() as f64;
            let dt = if rate > 0.0 {
                exp1(rng) / rate
            } else {
                f64::INFINITY
            };
            let next = (t + dt).min(minutes);
            // accumulate occupancy over [t, next) restricted to the measured period
            if next > start {
                let from = t.max(start);
                for (p, u) in used.iter().enumerate() {
                    area[p] += u * (next - from);
                    let first_end = next.min(mid);
                    if first_end > from {
                        area_half[p][0] += u * (first_end - from);
                    }
                    let second_from = from.max(mid);
                    if next > second_from {
                        area_half[p][1] += u * (next - second_from);
                    }
                }
            }
            if next >= minutes {
                break;
            }
            t = next;
            let u = rng.random::<f64>() * rate;
            if u < total_rate {
                let mut acc = 0.0;
                let mut idx = k - 1;
                for (i, c) in self.classes.iter().enumerate() {
                    acc += c.rate;
                    if u < acc {
                        idx = i;
                        break;
                    }
                }
                let class = &self.classes[idx];
                let d = class.demand.draw(rng);
                let cap = self.pools[class.pool];
                let admit = used[class.pool] + d <= cap + 1e-9 * cap;
                if t >= start {
                    let b = (((t - start) / span) * batches as f64)
                        .floor()
                        .min((batches - 1) as f64) as usize;
                    arrivals[idx] += 1;
                    batch_arr[b][idx] += 1;
                    if !admit {
                        blocked[idx] += 1;
                        batch_blk[b][idx] += 1;
                    }
                }
                if admit {
                    used[class.pool] += d;
                    active.push(ActiveCall {
                        pool: class.pool,
                        demand: d,
                    });
                }
            } else {
                let i = rng.random_range(0..active.len());
                let call = active.swap_remove(i);
                used[call.pool] -= call.demand;
                if !active.iter().any(|c| c.pool == call.pool) {
                    used[call.pool] = 0.0;
                }
            }
        }
        let half = 0.5 * span;
        Ok(CellRun {
            arrivals,
            blocked,
            utilisation: area
                .iter()
                .zip(&self.pools)
                .map(|(a, c)| a / (span * c))
                .collect(),
            utilisation_halves: area_half
                .iter()
                .zip(&self.pools)
                .map(|(h, c)| [h[0] / (half * c), h[1] / (half * c)])
                .collect(),
            batch_blocking: (0..batches)
                .map(|b| {
                    (0..k)
                        .map(|i| {
                            if batch_arr[b][i] == 0 {
                                0.0
                            } else {
                                batch_blk[b][i] as f64 / batch_arr[b][i] as f64
                            }
                        })
                        .collect()
                })
                .collect(),
        })
    }
}

/// Blocking of a two-class loss system estimated by batch means over one
/// long run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossSimEstimate {
    pub blocking: [SimEstimate; 2],
    pub utilisation: f64,
}

pub fn simulate_loss_system(
    sys: &MultiClassLossSystem,
    mu: f64,
    minutes: f64,
    batches: usize,
    seed: u64,
) -> Result<LossSimEstimate> {
    let cell = LossCell {
        pools: vec![sys.capacity],
        classes: (0..2)
            .map(|k| CallClass {
                rate: sys.loads[k] * mu,
                pool: 0,
                demand: Demand::Fixed(sys.demands[k]),
            })
            .collect(),
        mu,
    };
    let mut rng = rng_from_seed(seed);
    let run = cell.run(minutes, 0.1, batches, &mut rng)?;
    let est = |k: usize| {
        let mut t = Tally::default();
        run.batch_blocking.iter().for_each(|b| t.push(b[k]));
        t.estimate(seed).expect("at least one batch")
    };
    Ok(LossSimEstimate {
        blocking: [est(0), est(1)],
        utilisation: run.utilisation[0],
    })
}

/// How macro cell areas are generated in the temporal simulator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum AreaSource {
    /// Gamma(3.5) law with mean `1/λ_B`.
    #[default]
    Gamma,
    /// Areas of Voronoi cells of a sampled MBS layout, measured by uniform
    /// point counting.
    Voronoi,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemporalOptions {
    pub cells: usize,
    /// Simulated minutes per cell; `None` picks enough for about 2000
    /// arrivals of the rarer class in a mean-sized cell.
    pub minutes_per_cell: Option<f64>,
    pub warmup_fraction: f64,
    pub area_source: AreaSource,
    /// Largest accepted |t| of the first-half/second-half utilisation drift.
    pub drift_t_max: f64,
}

impl Default for TemporalOptions {
    fn default() -> Self {
        TemporalOptions {
            cells: 200,
            minutes_per_cell: None,
            warmup_fraction: 0.1,
            area_source: AreaSource::Gamma,
            drift_t_max: 6.0,
        }
    }
}

/// Activity and blocking averaged over simulated cells. Under co-channel or
/// orthogonal allocation `zeta_center` and `zeta_edge` both report the single
/// macro pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalEstimate {
    pub zeta_center: SimEstimate,
    pub zeta_edge: SimEstimate,
    pub b_ccu: SimEstimate,
    pub b_ceu: SimEstimate,
    pub arrivals: [u64; 2],
    pub minutes_per_cell: f64,
}

fn sample_areas(
    cfg: &ScenarioConfig,
    count: usize,
    source: AreaSource,
    rng: &mut SimRng,
) -> Result<Vec<f64>> {
    match source {
        AreaSource::Gamma => {
            let g = Gamma::new(CELL_AREA_SHAPE, 1.0 / (CELL_AREA_SHAPE * cfg.lambda_b))
                .map_err(|e| Error::invalid("lambda_b_per_m2", e.to_string()))?;
            Ok((0..count).map(|_| g.sample(rng)).collect())
        }
        AreaSource::Voronoi => voronoi_areas(cfg.lambda_b, count, rng),
    }
}

/// Areas of the Voronoi cells of MBSs lying in an inner disk, estimated by
/// assigning uniformly drawn points of a larger disk to their nearest MBS.
pub fn voronoi_areas(lambda_b: f64, count: usize, rng: &mut SimRng) -> Result<Vec<f64>> {
    ensure(count > 0, "cells", || "must be positive".into())?;
    let inner = (count as f64 / (PI * lambda_b)).sqrt();
    let outer = inner + 4.0 / lambda_b.sqrt();
    let layout = sample_ppp_with(lambda_b, Disk::centered(outer)?, rng)?;
    let pts = layout.points();
    let cell = 1.0 / lambda_b.sqrt();
    let side = (2.0 * outer / cell).ceil() as usize + 1;
    let key = |p: &Point| {
        let gx = (((p.x + outer) / cell) as usize).min(side - 1);
        let gy = (((p.y + outer) / cell) as usize).min(side - 1);
        (gx, gy)
    };
    let mut grid = vec![Vec::new(); side * side];
    for (i, p) in pts.iter().enumerate() {
        let (gx, gy) = key(p);
        grid[gy * side + gx].push(i);
    }
    let probes_per_cell = 400usize;
    let probes = probes_per_cell * (PI * outer * outer * lambda_b) as usize;
    let window = Disk::centered(outer)?;
    let mut hits = vec![0u64; pts.len()];
    for _ in 0..probes {
        let q = window.sample_point(rng);
        let (gx, gy) = key(&q);
        let mut best = (f64::INFINITY, usize::MAX);
        let mut ring = 0usize;
        loop {
            let lo_x = gx.saturating_sub(ring);
            let hi_x = (gx + ring).min(side - 1);
            let lo_y = gy.saturating_sub(ring);
            let hi_y = (gy + ring).min(side - 1);
            for y in lo_y..=hi_y {
                for x in lo_x..=hi_x {
                    if y != lo_y && y != hi_y && x != lo_x && x != hi_x {
                        continue;
                    }
                    for &i in &grid[y * side + x] {
                        let d = pts[i].distance(&q);
                        if d < best.0 {
                            best = (d, i);
                        }
                    }
                }
            }
            // every unvisited cell lies at least `ring * cell` away
            if best.1 != usize::MAX && best.0 <= ring as f64 * cell {
                break;
            }
            if lo_x == 0 && lo_y == 0 && hi_x == side - 1 && hi_y == side - 1 {
                break;
            }
            ring += 1;
        }
        if best.1 != usize::MAX {
            hits[best.1] += 1;
        }
    }
    let per_probe = window.area() / probes as f64;
    let origin = Point::new(0.0, 0.0);
    let areas: Vec<f64> = pts
        .iter()
        .zip(&hits)
        .filter(|(p, _)| p.distance(&origin) <= inner)
        .map(|(_, h)| *h as f64 * per_probe)
        .collect();
    ensure(!areas.is_empty(), "cells", || {
        "no MBS fell in the measured region".into()
    })?;
    Ok(areas)
}

/// Drives cells through their loss systems with the scenario's traffic and
/// the channel demands implied by the load solution.
pub fn simulate_temporal(
    cfg: &ScenarioConfig,
    sol: &LoadSolution,
    opts: &TemporalOptions,
    seed: u64,
) -> Result<TemporalEstimate> {
    cfg.validate()?;
    ensure(opts.cells >= 2, "cells", || {
        "need at least two cells".into()
    })?;
    let mcs = cfg.mcs()?;
    let (lc, le) = (cfg.lambda_center(), cfg.lambda_edge());
    let mean_area = 1.0 / cfg.lambda_b;
    let rarer = lc.min(le) * mean_area;
    let minutes = match opts.minutes_per_cell {
        Some(m) => m,
        None if rarer > 0.0 => (2000.0 / rarer).max(100.0 / cfg.mu),
        None => 100.0 / cfg.mu,
    };
    ensure(minutes > 0.0, "minutes_per_cell", || {
        "must be positive".into()
    })?;
    let demand_c = Demand::from_mcs(&mcs, &sol.mcs_masses_c)?;
    let demand_e = Demand::from_mcs(&mcs, &sol.mcs_masses_e)?;
    let n = cfg.channels_f64();
    let mut area_rng = rng_from_seed(derive_seed(seed, u64::MAX));
    let areas = sample_areas(cfg, opts.cells, opts.area_source, &mut area_rng)?;
    let build = |a: f64| -> LossCell {
        let (pools, pool_c, pool_e) = match cfg.policy {
            SpectrumPolicy::Ssa { p_m } => (vec![n * p_m, n * (1.0 - p_m)], 0, 1),
            _ => (vec![cfg.policy.macro_channels(n)], 0, 0),
        };
        LossCell {
            pools,
            classes: vec![
                CallClass {
                    rate: a * lc,
                    pool: pool_c,
                    demand: demand_c.clone(),
                },
                CallClass {
                    rate: a * le,
                    pool: pool_e,
                    demand: demand_e.clone(),
                },
            ],
            mu: cfg.mu,
        }
    };
    let runs = par_map(areas.len(), |i| {
        let mut rng = rng_from_seed(derive_seed(seed, i as u64));
        build(areas[i]).run(minutes, opts.warmup_fraction, 1, &mut rng)
    });
    let mut zc = Tally::default();
    let mut ze = Tally::default();
    let mut bc = Tally::default();
    let mut be = Tally::default();
    let mut drift = Tally::default();
    let mut arrivals = [0u64; 2];
    let edge_pool = if cfg.policy.is_shared() { 1 } else { 0 };
    for run in runs {
        let run = run?;
        zc.push(run.utilisation[0]);
        ze.push(run.utilisation[edge_pool]);
        bc.push(run.blocking(0));
        be.push(run.blocking(1));
        arrivals[0] += run.arrivals[0];
        arrivals[1] += run.arrivals[1];
        for h in &run.utilisation_halves {
            drift.push(h[1] - h[0]);
        }
    }
    let sd = drift.variance().sqrt();
    if sd > 0.0 {
        let t = drift.mean() / (sd / (drift.count as f64).sqrt());
        if t.abs() > opts.drift_t_max {
            return Err(Error::NonStationary {
                t_stat: t,
                warmup_fraction: opts.warmup_fraction,
            });
        }
    }
    let est = |t: &Tally| t.estimate(seed).expect("cells > 0");
    Ok(TemporalEstimate {
        zeta_center: est(&zc),
        zeta_edge: est(&ze),
        b_ccu: est(&bc),
        b_ceu: est(&be),
        arrivals,
        minutes_per_cell: minutes,
    })
}

/// Single cell with `servers` unit-demand channels and `offered` erlangs.
pub fn simulate_fixed_cell(
    servers: u32,
    offered: f64,
    minutes: f64,
    batches: usize,
    seed: u64,
) -> Result<SimEstimate> {
    ensure(servers >= 1, "servers", || "must be at least 1".into())?;
    let cell = LossCell {
        pools: vec![servers as f64],
        classes: vec![CallClass {
            rate: offered,
            pool: 0,
            demand: Demand::Fixed(1.0),
        }],
        mu: 1.0,
    };
    let mut rng = rng_from_seed(seed);
    let run = cell.run(minutes, 0.1, batches, &mut rng)?;
    let mut t = Tally::default();
    run.batch_blocking.iter().for_each(|b| t.push(b[0]));
    Ok(t.estimate(seed).expect("at least one batch"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blocking::{erlang_b, LossSystem};
    use crate::geometry::{cdf_serving_distance_ccu, cdf_serving_distance_ceu};

    fn setup(zeta: f64, lambda_f: f64) -> OutageSetup {
        let cfg = ScenarioConfig {
            lambda_f,
            ..Default::default()
        };
        OutageSetup::for_scenario(&cfg, zeta, zeta).unwrap()
    }

    #[test]
    fn tally_merge_matches_single_pass() {
        let xs: Vec<f64> = (0..100).map(|i| (i as f64).sin()).collect();
        let mut whole = Tally::default();
        xs.iter().for_each(|x| whole.push(*x));
        let mut a = Tally::default();
        let mut b = Tally::default();
        xs[..37].iter().for_each(|x| a.push(*x));
        xs[37..].iter().for_each(|x| b.push(*x));
        a.merge(&b);
        assert_eq!(a.count, whole.count);
        assert!((a.mean() - whole.mean()).abs() < 1e-15);
        assert!((a.variance() - whole.variance()).abs() < 1e-12);
    }

    #[test]
    fn no_interference_no_outage() {
        let est = simulate_outage(&setup(0.0, 0.0), &[0.1, 1.0, 1e6], 4000, 3).unwrap();
        for e in est.ccu.iter().chain(&est.ceu) {
            assert_eq!(e.mean, 0.0);
        }
    }

    #[test]
    fn outage_is_deterministic() {
        let s = setup(0.5, 2.5e-4);
        let a = simulate_outage(&s, &[1.0], 5000, 11).unwrap();
        let b = simulate_outage(&s, &[1.0], 5000, 11).unwrap();
        assert_eq!(a, b);
        let c = simulate_outage(&s, &[1.0], 5000, 12).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn doubling_trials_shrinks_stderr() {
        let s = setup(1.0, 0.0);
        let a = simulate_outage(&s, &[1.0], 20_000, 5).unwrap();
        let b = simulate_outage(&s, &[1.0], 40_000, 6).unwrap();
        let ratio = b.ceu[0].stderr / a.ceu[0].stderr;
        assert!(
            (ratio - std::f64::consts::FRAC_1_SQRT_2).abs() < 0.05,
            "{ratio}"
        );
    }

    #[test]
    fn too_few_edge_users_is_reported() {
        let mut s = setup(1.0, 0.0);
        s.region = 0.9999;
        let err = simulate_outage(&s, &[1.0], 2000, 1).unwrap_err();
        assert!(matches!(err, Error::InsufficientSamples { .. }));
    }

    #[test]
    fn serving_distances_follow_class_laws() {
        let region = RegionThreshold::new(0.707).unwrap();
        let lb = 5e-6;
        let (c, e) = sample_serving_distances(region, lb, 100_000, 9).unwrap();
        let ks_c = ks_statistic(&c, |r| cdf_serving_distance_ccu(r, lb, region));
        let ks_e = ks_statistic(&e, |r| cdf_serving_distance_ceu(r, lb, region).unwrap());
        assert!(ks_c < 0.01 && ks_e < 0.01, "{ks_c} {ks_e}");
    }

    #[test]
    fn records_are_line_delimited() {
        let samples = sample_sir(&setup(1.0, 0.0), 5, 2).unwrap();
        let mut buf = Vec::new();
        write_sir_records(&samples, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 5);
        assert!(text.lines().all(|l| l.split_whitespace().count() == 3));
    }

    #[test]
    fn fixed_cell_reproduces_erlang_b() {
        let est = simulate_fixed_cell(10, 8.0, 40_000.0, 20, 4).unwrap();
        let exact = erlang_b(&LossSystem::new(10, 8.0).unwrap());
        assert!(est.z_score(exact) < 3.0, "{est:?} vs {exact}");
    }

    #[test]
    fn discrete_demand_mean() {
        let d = Demand::discrete(vec![1.0, 3.0], &[1.0, 3.0]).unwrap();
        assert!((d.mean() - 2.5).abs() < 1e-15);
    }

    #[test]
    fn voronoi_areas_average_to_mean_cell() {
        let lb = 5e-6;
        let mut rng = rng_from_seed(8);
        let areas = voronoi_areas(lb, 300, &mut rng).unwrap();
        let m = areas.iter().sum::<f64>() / areas.len() as f64;
        assert!((m * lb - 1.0).abs() < 0.1, "{}", m * lb);
    }
}
