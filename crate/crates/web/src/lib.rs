//! WebAssembly bindings for the browser demo. Every export takes a scenario
//! as JSON text (empty for defaults) and returns JSON text.

use hetnet_core::geometry::{classify_user, rng_from_seed, sample_ppp, Disk, Point, UserClass};
use hetnet_core::load::{solve_fixed_point, CoverageModel};
use hetnet_core::report::{run_sweep, Metric, SweepSpec, SweepVariable};
use hetnet_core::scenario::db_to_linear;
use hetnet_core::{Error, ScenarioConfig};
use serde::Serialize;
use wasm_bindgen::prelude::*;

type Out = Result<String, JsError>;

fn config(json: &str) -> Result<ScenarioConfig, Error> {
    if json.trim().is_empty() {
        Ok(ScenarioConfig::default())
    } else {
        ScenarioConfig::from_json_str(json)
    }
}

fn js(e: Error) -> JsError {
    JsError::new(&e.to_string())
}

fn to_json<T: Serialize>(value: &T) -> Out {
    serde_json::to_string(value).map_err(|e| JsError::new(&e.to_string()))
}

fn spaced(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let n = points.max(2);
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

#[derive(Serialize)]
pub struct CurveData {
    pub threshold_db: Vec<f64>,
    pub ccu: Vec<f64>,
    pub ceu: Vec<f64>,
    pub zeta_center: f64,
    pub zeta_edge: f64,
}

/// Coverage of both classes against the SIR threshold, at the activity the
/// load model converges to.
pub fn coverage_curves_data(
    cfg_json: &str,
    db_lo: f64,
    db_hi: f64,
    points: usize,
) -> Result<CurveData, Error> {
    let cfg = config(cfg_json)?;
    let sol = solve_fixed_point(&cfg)?;
    let model = CoverageModel::for_scenario(&cfg)?;
    let threshold_db = spaced(db_lo, db_hi, points);
    let betas: Vec<f64> = threshold_db.iter().map(|&d| db_to_linear(d)).collect();
    Ok(CurveData {
        ccu: model.ccu_curve(&betas, sol.zeta_center)?,
        ceu: model.ceu_curve(&betas, sol.zeta_edge)?,
        threshold_db,
        zeta_center: sol.zeta_center,
        zeta_edge: sol.zeta_edge,
    })
}

#[wasm_bindgen]
pub fn coverage_curves(cfg_json: &str, db_lo: f64, db_hi: f64, points: usize) -> Out {
    to_json(&coverage_curves_data(cfg_json, db_lo, db_hi, points).map_err(js)?)
}

#[derive(Serialize)]
pub struct SweepData {
    pub lambda_m: Vec<f64>,
    pub status: Vec<String>,
    pub columns: Vec<(String, Vec<Option<f64>>)>,
}

/// Activity, blocking and efficiency over log-spaced macro traffic.
pub fn load_sweep_data(
    cfg_json: &str,
    lm_lo: f64,
    lm_hi: f64,
    points: usize,
) -> Result<SweepData, Error> {
    let cfg = config(cfg_json)?;
    if !(lm_lo > 0.0 && lm_hi > lm_lo) {
        return Err(Error::invalid("lambda_m range", "need 0 < low < high"));
    }
    let values: Vec<f64> = spaced(lm_lo.ln(), lm_hi.ln(), points)
        .into_iter()
        .map(f64::exp)
        .collect();
    let table = run_sweep(&cfg, &SweepSpec::new(SweepVariable::LambdaM, values))?;
    Ok(SweepData {
        lambda_m: table.rows.iter().map(|r| r.value).collect(),
        status: table.rows.iter().map(|r| r.status.clone()).collect(),
        columns: Metric::ALL
            .iter()
            .map(|&m| (m.column().to_string(), table.column(m)))
            .collect(),
    })
}

#[wasm_bindgen]
pub fn load_sweep(cfg_json: &str, lm_lo: f64, lm_hi: f64, points: usize) -> Out {
    to_json(&load_sweep_data(cfg_json, lm_lo, lm_hi, points).map_err(js)?)
}

#[derive(Serialize)]
pub struct NetworkData {
    pub radius: f64,
    pub mbs: Vec<[f64; 2]>,
    /// x, y, serving MBS index, 1 for center users and 0 for edge users
    pub users: Vec<(f64, f64, usize, u8)>,
    pub center_fraction: f64,
}

/// One PPP realization of macro stations with uniformly dropped users, each
/// classified by the ratio of its two nearest distances.
pub fn sample_network_data(
    cfg_json: &str,
    mean_mbs: f64,
    users: usize,
    seed: u64,
) -> Result<NetworkData, Error> {
    let cfg = config(cfg_json)?;
    let region = cfg.region_threshold()?;
    if !(1.0..=5000.0).contains(&mean_mbs) {
        return Err(Error::invalid("mean_mbs", "must lie in [1, 5000]"));
    }
    let radius = (mean_mbs / (std::f64::consts::PI * cfg.lambda_b)).sqrt();
    let pattern = sample_ppp(cfg.lambda_b, Disk::centered(radius)?, seed)?;
    let inner = Disk::centered(0.8 * radius)?;
    let mut rng = rng_from_seed(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut out = Vec::with_capacity(users);
    for _ in 0..users {
        let p = inner.sample_point(&mut rng);
        let Some(pair) = pattern.nearest_two(&p) else {
            break;
        };
        let serving = nearest_index(pattern.points(), &p);
        let center = classify_user(pair, region) == UserClass::Center;
        out.push((p.x, p.y, serving, center as u8));
    }
    let centers = out.iter().filter(|u| u.3 == 1).count();
    Ok(NetworkData {
        radius,
        mbs: pattern.points().iter().map(|q| [q.x, q.y]).collect(),
        center_fraction: if out.is_empty() {
            0.0
        } else {
            centers as f64 / out.len() as f64
        },
        users: out,
    })
}

fn nearest_index(points: &[Point], p: &Point) -> usize {
    points
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.distance(p).total_cmp(&b.1.distance(p)))
        .map(|(i, _)| i)
        .unwrap_or(0)
}

#[wasm_bindgen]
pub fn sample_network(cfg_json: &str, mean_mbs: f64, users: usize, seed: u64) -> Out {
    to_json(&sample_network_data(cfg_json, mean_mbs, users, seed).map_err(js)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curves_fall_with_threshold() {
        let c = coverage_curves_data("", -10.0, 20.0, 16).unwrap();
        assert_eq!(c.ccu.len(), 16);
        assert!(c.ccu.windows(2).all(|w| w[1] <= w[0]));
        assert!(c.ceu.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn sweep_has_all_columns() {
        let s = load_sweep_data(r#"{"policy": {"kind": "csa"}}"#, 5e-5, 4e-4, 5).unwrap();
        assert_eq!(s.lambda_m.len(), 5);
        assert_eq!(s.columns.len(), Metric::ALL.len());
        assert!(s.status.iter().all(|x| x == "ok"));
    }

    #[test]
    fn network_sample_is_reproducible() {
        let a = sample_network_data("", 200.0, 2000, 4).unwrap();
        let b = sample_network_data("", 200.0, 2000, 4).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
        assert!(
            (a.center_fraction - 0.5).abs() < 0.05,
            "{}",
            a.center_fraction
        );
        assert!(sample_network_data("", 0.0, 10, 1).is_err());
    }
}
