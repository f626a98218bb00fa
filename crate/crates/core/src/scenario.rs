//! Scenario description: every physical, traffic and spectrum parameter of one
//! network configuration, plus its JSON file format.
//!
//! File keys carry their units (`lambda_m_per_min_m2`, `bandwidth_hz`, ...).
//! Thresholds may be given linearly (`beta`, `mcs_thresholds`) or in dB
//! (`beta_db`, `mcs_thresholds_db`), but not both.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::coverage::{SeriesOptions, TailRemainder};
use crate::error::{ensure, Error, Result};
use crate::geometry::RegionThreshold;
use crate::interference::{PathLossModel, TierPowers};
use crate::load::McsTable;

/// How the `N` channels are split between tiers and user classes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SpectrumPolicy {
    /// Fraction `p_m` shared by center users and FAPs; the rest reserved for edge users.
    Ssa { p_m: f64 },
    /// Every tier and class may use every channel.
    Csa,
    /// Fraction `p_o` reserved for FAPs; macro users share the rest.
    Osa { p_o: f64 },
}

impl SpectrumPolicy {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SpectrumPolicy::Ssa { p_m } => ensure(p_m > 0.0 && p_m < 1.0, "policy.p_m", || {
                format!("must lie strictly between 0 and 1, got {p_m}")
            }),
            SpectrumPolicy::Csa => Ok(()),
            SpectrumPolicy::Osa { p_o } => ensure((0.0..1.0).contains(&p_o), "policy.p_o", || {
                format!("must lie in [0, 1), got {p_o}")
            }),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            SpectrumPolicy::Ssa { .. } => "ssa",
            SpectrumPolicy::Csa => "csa",
            SpectrumPolicy::Osa { .. } => "osa",
        }
    }

    /// Co-channel FAP density seen by a center user.
    pub fn center_femto_density(&self, lambda_f: f64, channels: f64) -> f64 {
        match *self {
            SpectrumPolicy::Ssa { p_m } => lambda_f / (channels * p_m),
            SpectrumPolicy::Csa => lambda_f / channels,
            SpectrumPolicy::Osa { .. } => 0.0,
        }
    }

    /// Co-channel FAP density seen by an edge user.
    pub fn edge_femto_density(&self, lambda_f: f64, channels: f64) -> f64 {
        match *self {
            SpectrumPolicy::Ssa { .. } | SpectrumPolicy::Osa { .. } => 0.0,
            SpectrumPolicy::Csa => lambda_f / channels,
        }
    }

    /// Channels available to the macro tier.
    pub fn macro_channels(&self, channels: f64) -> f64 {
        match *self {
            SpectrumPolicy::Osa { p_o } => channels * (1.0 - p_o),
            _ => channels,
        }
    }

    pub fn is_shared(&self) -> bool {
        matches!(self, SpectrumPolicy::Ssa { .. })
    }
}

/// Numerical settings of the load solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    pub tol: f64,
    pub max_iter: usize,
    pub series_tol: f64,
    pub series_max_terms: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            tol: 1e-6,
            max_iter: 60,
            series_tol: 1e-8,
            series_max_terms: 1000,
        }
    }
}

impl SolverSettings {
    pub fn series(&self) -> SeriesOptions {
        SeriesOptions {
            tol: self.series_tol,
            max_terms: self.series_max_terms,
            tail: TailRemainder::Digamma,
        }
    }
}

/// One network scenario. Rates are per minute, densities per m².
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub lambda_b: f64,
    pub lambda_f: f64,
    pub lambda_m: f64,
    pub mu: f64,
    pub alpha: f64,
    pub p_b: f64,
    pub p_f: f64,
    pub channels: u32,
    pub bandwidth_hz: f64,
    pub rate_bps: f64,
    pub region: f64,
    /// SIR threshold at which coverage is reported (linear).
    pub beta: f64,
    pub policy: SpectrumPolicy,
    /// Linear MCS thresholds, strictly increasing.
    pub mcs_thresholds: Vec<f64>,
    pub solver: SolverSettings,
    pub seed: u64,
    pub mc_trials: usize,
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// 15 thresholds from -6.5 dB to 19.6 dB in equal dB steps.
pub fn default_mcs_thresholds_db() -> Vec<f64> {
    let (lo, hi, n) = (-6.5, 19.6, 15);
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let lambda_b = 5e-6;
        ScenarioConfig {
            lambda_b,
            lambda_f: 50.0 * lambda_b,
            lambda_m: 2e-4,
            mu: 1.0,
            alpha: 4.0,
            p_b: 1.0,
            p_f: 0.01,
            channels: 50,
            bandwidth_hz: 180e3,
            rate_bps: 90e3,
            region: 0.707,
            beta: 1.0,
            policy: SpectrumPolicy::Ssa { p_m: 0.4 },
            mcs_thresholds: default_mcs_thresholds_db()
                .into_iter()
                .map(db_to_linear)
                .collect(),
            solver: SolverSettings::default(),
            seed: 1,
            mc_trials: 100_000,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64, field: &str| {
            ensure(v > 0.0 && v.is_finite(), field, || {
                format!("must be positive and finite, got {v}")
            })
        };
        positive(self.lambda_b, "lambda_b_per_m2")?;
        ensure(
            self.lambda_f >= 0.0 && self.lambda_f.is_finite(),
            "lambda_f_per_m2",
            || format!("must be non-negative, got {}", self.lambda_f),
        )?;
        ensure(
            self.lambda_m >= 0.0 && self.lambda_m.is_finite(),
            "lambda_m_per_min_m2",
            || format!("must be non-negative, got {}", self.lambda_m),
        )?;
        positive(self.mu, "mu_per_min")?;
        PathLossModel::new(self.alpha)?;
        TierPowers::new(self.p_b, self.p_f)?;
        ensure(self.channels >= 1, "channels", || {
            "must be at least 1".into()
        })?;
        positive(self.bandwidth_hz, "bandwidth_hz")?;
        positive(self.rate_bps, "rate_bps")?;
        RegionThreshold::new(self.region)?;
        ensure(self.beta > 0.0 && self.beta.is_finite(), "beta", || {
            format!("must be positive, got {}", self.beta)
        })?;
        self.policy.validate()?;
        self.mcs()?;
        positive(self.solver.tol, "solver.tol")?;
        positive(self.solver.series_tol, "solver.series_tol")?;
        ensure(self.solver.max_iter >= 1, "solver.max_iter", || {
            "must be at least 1".into()
        })?;
        Ok(())
    }

    pub fn path_loss(&self) -> Result<PathLossModel> {
        PathLossModel::new(self.alpha)
    }

    pub fn region_threshold(&self) -> Result<RegionThreshold> {
        RegionThreshold::new(self.region)
    }

    pub fn powers(&self) -> Result<TierPowers> {
        TierPowers::new(self.p_b, self.p_f)
    }

    pub fn mcs(&self) -> Result<McsTable> {
        McsTable::new(
            self.mcs_thresholds.clone(),
            self.bandwidth_hz,
            self.rate_bps,
        )
    }

    pub fn channels_f64(&self) -> f64 {
        self.channels as f64
    }

    /// Center-user arrival rate `λ_M R²`.
    pub fn lambda_center(&self) -> f64 {
        self.lambda_m * self.region * self.region
    }

    /// Edge-user arrival rate `λ_M (1 - R²)`.
    pub fn lambda_edge(&self) -> f64 {
        self.lambda_m * (1.0 - self.region * self.region)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: ScenarioFile =
            serde_json::from_str(text).map_err(|e| Error::invalid("config", e.to_string()))?;
        file.into_config()
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::invalid("config", format!("cannot read {}: {e}", path.display()))
        })?;
        Self::from_json_str(&text)
    }

    pub fn to_file(&self) -> ScenarioFile {
        ScenarioFile {
            lambda_b_per_m2: Some(self.lambda_b),
            lambda_f_per_m2: Some(self.lambda_f),
            lambda_m_per_min_m2: Some(self.lambda_m),
            mu_per_min: Some(self.mu),
            alpha: Some(self.alpha),
            p_b_w: Some(self.p_b),
            p_f_w: Some(self.p_f),
            channels: Some(self.channels),
            bandwidth_hz: Some(self.bandwidth_hz),
            rate_bps: Some(self.rate_bps),
            region_threshold: Some(self.region),
            beta: Some(self.beta),
            beta_db: None,
            policy: Some(self.policy),
            mcs_thresholds: Some(self.mcs_thresholds.clone()),
            mcs_thresholds_db: None,
            solver: Some(self.solver),
            seed: Some(self.seed),
            mc_trials: Some(self.mc_trials),
        }
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("scenario serializes")
    }
}

/// On-disk form of [`ScenarioConfig`]; every key is optional and falls back
/// to the default scenario.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_b_per_m2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_f_per_m2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_m_per_min_m2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu_per_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_b_w: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_f_w: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub channels: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bandwidth_hz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rate_bps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub region_threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub policy: Option<SpectrumPolicy>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mcs_thresholds: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mcs_thresholds_db: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverSettings>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mc_trials: Option<usize>,
}

impl ScenarioFile {
    pub fn into_config(self) -> Result<ScenarioConfig> {
        let d = ScenarioConfig::default();
        let beta = match (self.beta, self.beta_db) {
            (Some(_), Some(_)) => {
                return Err(Error::invalid(
                    "beta",
                    "give either `beta` or `beta_db`, not both",
                ))
            }
            (Some(b), None) => b,
            (None, Some(db)) => db_to_linear(db),
            (None, None) => d.beta,
        };
        let mcs_thresholds = match (self.mcs_thresholds, self.mcs_thresholds_db) {
            (Some(_), Some(_)) => {
                return Err(Error::invalid(
                    "mcs_thresholds",
                    "give either `mcs_thresholds` or `mcs_thresholds_db`, not both",
                ))
            }
            (Some(t), None) => t,
            (None, Some(db)) => db.into_iter().map(db_to_linear).collect(),
            (None, None) => d.mcs_thresholds.clone(),
        };
        let cfg = ScenarioConfig {
            lambda_b: self.lambda_b_per_m2.unwrap_or(d.lambda_b),
            lambda_f: self.lambda_f_per_m2.unwrap_or(d.lambda_f),
            lambda_m: self.lambda_m_per_min_m2.unwrap_or(d.lambda_m),
            mu: self.mu_per_min.unwrap_or(d.mu),
            alpha: self.alpha.unwrap_or(d.alpha),
            p_b: self.p_b_w.unwrap_or(d.p_b),
            p_f: self.p_f_w.unwrap_or(d.p_f),
            channels: self.channels.unwrap_or(d.channels),
            bandwidth_hz: self.bandwidth_hz.unwrap_or(d.bandwidth_hz),
            rate_bps: self.rate_bps.unwrap_or(d.rate_bps),
            region: self.region_threshold.unwrap_or(d.region),
            beta,
            policy: self.policy.unwrap_or(d.policy),
            mcs_thresholds,
            solver: self.solver.unwrap_or(d.solver),
            seed: self.seed.unwrap_or(d.seed),
            mc_trials: self.mc_trials.unwrap_or(d.mc_trials),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let cfg = ScenarioConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.mcs_thresholds.len(), 15);
        assert!((linear_to_db(cfg.mcs_thresholds[0]) + 6.5).abs() < 1e-12);
        assert!((linear_to_db(cfg.mcs_thresholds[14]) - 19.6).abs() < 1e-12);
    }

    #[test]
    fn parses_units_and_db_keys() {
        let cfg = ScenarioConfig::from_json_str(
            r#"{"lambda_m_per_min_m2": 1e-4, "beta_db": 0.0,
                "policy": {"kind": "osa", "p_o": 0.2},
                "mcs_thresholds_db": [0.0, 10.0]}"#,
        )
        .unwrap();
        assert_eq!(cfg.lambda_m, 1e-4);
        assert_eq!(cfg.beta, 1.0);
        assert_eq!(cfg.policy, SpectrumPolicy::Osa { p_o: 0.2 });
        assert_eq!(cfg.mcs_thresholds, vec![1.0, 10.0]);
    }

    #[test]
    fn validation_names_the_field() {
        let err = ScenarioConfig::from_json_str(r#"{"policy": {"kind": "ssa", "p_m": 0.0}}"#)
            .unwrap_err();
        assert!(err.is_validation());
        assert!(err.to_string().contains("policy.p_m"), "{err}");
        let err = ScenarioConfig::from_json_str(r#"{"lambda_m": 1.0}"#).unwrap_err();
        assert!(err.to_string().contains("lambda_m"), "{err}");
        let err = ScenarioConfig::from_json_str(r#"{"beta": 1.0, "beta_db": 0.0}"#).unwrap_err();
        assert!(err.to_string().contains("beta"));
        let err = ScenarioConfig::from_json_str(r#"{"mcs_thresholds": [2.0, 1.0]}"#).unwrap_err();
        assert!(err.to_string().contains("mcs"), "{err}");
    }

    #[test]
    fn json_round_trip() {
        let mut cfg = ScenarioConfig::default();
        cfg.policy = SpectrumPolicy::Csa;
        cfg.lambda_f = 0.0;
        let back = ScenarioConfig::from_json_str(&cfg.to_json_string()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn policy_densities() {
        let ssa = SpectrumPolicy::Ssa { p_m: 0.4 };
        assert_eq!(ssa.center_femto_density(2e-4, 50.0), 2e-4 / 20.0);
        assert_eq!(ssa.edge_femto_density(2e-4, 50.0), 0.0);
        assert_eq!(SpectrumPolicy::Csa.edge_femto_density(2e-4, 50.0), 4e-6);
        let osa = SpectrumPolicy::Osa { p_o: 0.2 };
        assert_eq!(osa.center_femto_density(2e-4, 50.0), 0.0);
        assert_eq!(osa.macro_channels(50.0), 40.0);
    }
}
