//! End-to-end scenario reports, parameter sweeps and their CSV form.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::blocking::{energy_efficiency, network_blocking, BlockingReport, EnergyReport};
use crate::coverage::CoverageCurve;
use crate::error::{ensure, Error, Result};
use crate::load::{solve_fixed_point, CoverageModel, LoadSolution};
use crate::montecarlo::{
    par_map, simulate_outage, simulate_temporal, OutageSetup, TemporalOptions,
};
use crate::scenario::{ScenarioConfig, ScenarioFile, SpectrumPolicy};

/// Everything the analytic pipeline produces for one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub config: ScenarioFile,
    pub load: LoadSolution,
    /// Coverage of both classes at the reporting threshold `beta`.
    pub coverage_ccu: f64,
    pub coverage_ceu: f64,
    /// Coverage at every MCS threshold, at the converged activity.
    pub coverage_curve: CoverageCurve,
    pub blocking: BlockingReport,
    /// `None` when the macro tier carries no traffic.
    pub energy: Option<EnergyReport>,
}

pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioReport> {
    cfg.validate()?;
    let load = solve_fixed_point(cfg).map_err(|e| e.in_stage("load"))?;
    let model = CoverageModel::for_scenario(cfg).map_err(|e| e.in_stage("coverage"))?;
    let coverage = |f: &dyn Fn() -> Result<f64>| f().map_err(|e| e.in_stage("coverage"));
    let coverage_ccu = coverage(&|| model.ccu(cfg.beta, load.zeta_center))?;
    let coverage_ceu = coverage(&|| model.ceu(cfg.beta, load.zeta_edge))?;
    let coverage_curve = model
        .curve(&cfg.mcs_thresholds, load.zeta_center, load.zeta_edge)
        .map_err(|e| e.in_stage("coverage"))?;
    let blocking = network_blocking(cfg, &load).map_err(|e| e.in_stage("blocking"))?;
    let energy = match energy_efficiency(cfg, &load, &blocking) {
        Ok(e) => Some(e),
        Err(Error::UndefinedEfficiency) => None,
        Err(e) => return Err(e.in_stage("energy")),
    };
    Ok(ScenarioReport {
        config: cfg.to_file(),
        load,
        coverage_ccu,
        coverage_ceu,
        coverage_curve,
        blocking,
        energy,
    })
}

/// Parameter varied by a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    LambdaM,
    LambdaF,
    Pm,
    Beta,
}

impl SweepVariable {
    /// Column name of the swept value, with its unit.
    pub fn column(self) -> &'static str {
        match self {
            SweepVariable::LambdaM => "lambda_m_per_min_m2",
            SweepVariable::LambdaF => "lambda_f_per_m2",
            SweepVariable::Pm => "p_m",
            SweepVariable::Beta => "beta",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "lambda_m" | "lambda_m_per_min_m2" => Ok(SweepVariable::LambdaM),
            "lambda_f" | "lambda_f_per_m2" => Ok(SweepVariable::LambdaF),
            "p_m" | "pm" => Ok(SweepVariable::Pm),
            "beta" => Ok(SweepVariable::Beta),
            other => Err(Error::invalid(
                "sweep.variable",
                format!("unknown variable `{other}` (expected lambda_m, lambda_f, p_m or beta)"),
            )),
        }
    }

    pub fn apply(self, cfg: &ScenarioConfig, value: f64) -> Result<ScenarioConfig> {
        let mut c = cfg.clone();
        match self {
            SweepVariable::LambdaM => c.lambda_m = value,
            SweepVariable::LambdaF => c.lambda_f = value,
            SweepVariable::Pm => match c.policy {
                SpectrumPolicy::Ssa { .. } => c.policy = SpectrumPolicy::Ssa { p_m: value },
                _ => {
                    return Err(Error::invalid(
                        "sweep.variable",
                        "p_m sweeps need shared allocation",
                    ))
                }
            },
            SweepVariable::Beta => c.beta = value,
        }
        Ok(c)
    }
}

/// Output columns of a sweep row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    ZetaCenter,
    ZetaEdge,
    CovCcu,
    CovCeu,
    BCcu,
    BCeu,
    BNetwork,
    Eta,
}

impl Metric {
    pub const ALL: [Metric; 8] = [
        Metric::ZetaCenter,
        Metric::ZetaEdge,
        Metric::CovCcu,
        Metric::CovCeu,
        Metric::BCcu,
        Metric::BCeu,
        Metric::BNetwork,
        Metric::Eta,
    ];

    pub fn column(self) -> &'static str {
        match self {
            Metric::ZetaCenter => "zeta_center",
            Metric::ZetaEdge => "zeta_edge",
            Metric::CovCcu => "cov_ccu",
            Metric::CovCeu => "cov_ceu",
            Metric::BCcu => "b_ccu",
            Metric::BCeu => "b_ceu",
            Metric::BNetwork => "b_network",
            Metric::Eta => "eta_bps_per_j_m2",
        }
    }

    pub fn from_column(name: &str) -> Option<Self> {
        Metric::ALL.into_iter().find(|m| m.column() == name)
    }

    fn of(self, r: &ScenarioReport) -> Option<f64> {
        Some(match self {
            Metric::ZetaCenter => r.load.zeta_center,
            Metric::ZetaEdge => r.load.zeta_edge,
            Metric::CovCcu => r.coverage_ccu,
            Metric::CovCeu => r.coverage_ceu,
            Metric::BCcu => r.blocking.b_ccu,
            Metric::BCeu => r.blocking.b_ceu,
            Metric::BNetwork => r.blocking.b_network,
            Metric::Eta => return r.energy.map(|e| e.eta),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
    /// Requested columns; empty means all.
    #[serde(default)]
    pub outputs: Vec<Metric>,
}

impl SweepSpec {
    pub fn new(variable: SweepVariable, values: Vec<f64>) -> Self {
        SweepSpec {
            variable,
            values,
            outputs: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure(!self.values.is_empty(), "sweep.values", || {
            "must not be empty".into()
        })?;
        ensure(
            self.values.iter().all(|v| v.is_finite()),
            "sweep.values",
            || "must be finite".into(),
        )?;
        let up = self.values.windows(2).all(|w| w[0] < w[1]);
        let down = self.values.windows(2).all(|w| w[0] > w[1]);
        ensure(up || down, "sweep.values", || {
            "must be strictly increasing or strictly decreasing".into()
        })
    }

    pub fn metrics(&self) -> Vec<Metric> {
        if self.outputs.is_empty() {
            Metric::ALL.to_vec()
        } else {
            self.outputs.clone()
        }
    }
}

/// One sweep point; `values` is empty when the point failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub status: String,
    pub values: Vec<Option<f64>>,
}

impl SweepRow {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }

    pub fn get(&self, table: &SweepTable, m: Metric) -> Option<f64> {
        let i = table.metrics.iter().position(|x| *x == m)?;
        self.values.get(i).copied().flatten()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub variable: SweepVariable,
    pub metrics: Vec<Metric>,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn column(&self, m: Metric) -> Vec<Option<f64>> {
        self.rows.iter().map(|r| r.get(self, m)).collect()
    }
}

/// Rounds to 12 significant digits, the precision written to CSV.
pub fn quantize(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.11e}").parse().expect("formatted float parses")
}

fn format_number(x: f64) -> String {
    format!("{:e}", quantize(x))
}

/// Evaluates every sweep point (concurrently when enabled); rows keep the
/// order of `spec.values`. A failing point becomes a row whose status holds
/// the error message.
pub fn run_sweep(cfg: &ScenarioConfig, spec: &SweepSpec) -> Result<SweepTable> {
    spec.validate()?;
    cfg.validate()?;
    let metrics = spec.metrics();
    // configs are checked up front so a malformed sweep fails as a whole
    let configs: Vec<ScenarioConfig> = spec
        .values
        .iter()
        .map(|&v| spec.variable.apply(cfg, v))
        .collect::<Result<_>>()?;
    let rows = par_map(configs.len(), |i| {
        let value = quantize(spec.values[i]);
        match run_scenario(&configs[i]) {
            Ok(report) => SweepRow {
                value,
                status: "ok".into(),
                values: metrics
                    .iter()
                    .map(|m| m.of(&report).map(quantize))
                    .collect(),
            },
            Err(e) => SweepRow {
                value,
                status: format!("error: {e}"),
                values: vec![None; metrics.len()],
            },
        }
    });
    Ok(SweepTable {
        variable: spec.variable,
        metrics,
        rows,
    })
}

pub fn write_sweep_csv<W: Write>(table: &SweepTable, out: W) -> Result<()> {
    let io = |e: csv::Error| Error::invalid("out", e.to_string());
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    let mut header = vec![table.variable.column().to_string(), "status".to_string()];
    header.extend(table.metrics.iter().map(|m| m.column().to_string()));
    w.write_record(&header).map_err(io)?;
    for row in &table.rows {
        let mut rec = vec![format_number(row.value), row.status.clone()];
        rec.extend(
            row.values
                .iter()
                .map(|v| v.map(format_number).unwrap_or_default()),
        );
        w.write_record(&rec).map_err(io)?;
    }
    w.flush().map_err(|e| Error::invalid("out", e.to_string()))
}

pub fn sweep_csv_string(table: &SweepTable) -> Result<String> {
    let mut buf = Vec::new();
    write_sweep_csv(table, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is UTF-8"))
}

pub fn save_sweep_csv(table: &SweepTable, path: &Path) -> Result<()> {
    let file = File::create(path)
        .map_err(|e| Error::invalid("out", format!("{}: {e}", path.display())))?;
    write_sweep_csv(table, file)
}

pub fn read_sweep_csv<R: Read>(input: R) -> Result<SweepTable> {
    let bad = |why: String| Error::invalid("csv", why);
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(|e| bad(e.to_string()))?.clone();
    ensure(header.len() >= 2 && &header[1] == "status", "csv", || {
        "unexpected header".into()
    })?;
    let variable = SweepVariable::parse(&header[0])?;
    let metrics = header
        .iter()
        .skip(2)
        .map(|h| Metric::from_column(h).ok_or_else(|| bad(format!("unknown column `{h}`"))))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let num = |s: &str| s.parse::<f64>().map_err(|e| bad(format!("`{s}`: {e}")));
        let value = num(&rec[0])?;
        let values = rec
            .iter()
            .skip(2)
            .map(|s| {
                if s.is_empty() {
                    Ok(None)
                } else {
                    num(s).map(Some)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(SweepRow {
            value,
            status: rec[1].to_string(),
            values,
        });
    }
    Ok(SweepTable {
        variable,
        metrics,
        rows,
    })
}

/// Analytic and simulated value of one quantity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationRow {
    pub quantity: String,
    pub class: String,
    pub analytic: f64,
    pub simulated: f64,
    pub stderr: f64,
}

/// Side-by-side comparison of the analytic report with the spatial and
/// temporal simulators.
pub fn run_validation(
    cfg: &ScenarioConfig,
    trials: usize,
    seed: u64,
) -> Result<Vec<ValidationRow>> {
    let report = run_scenario(cfg)?;
    let load = &report.load;
    let model = CoverageModel::for_scenario(cfg)?;
    let betas = [cfg.beta / 10.0, cfg.beta, cfg.beta * 10.0];
    let setup = OutageSetup::for_scenario(cfg, load.zeta_center, load.zeta_edge)?;
    let outage = simulate_outage(&setup, &betas, trials, seed)
        .map_err(|e| e.in_stage("spatial simulation"))?;
    let mut rows = Vec::new();
    for (i, &b) in betas.iter().enumerate() {
        rows.push(ValidationRow {
            quantity: format!("outage@beta={}", format_number(b)),
            class: "ccu".into(),
            analytic: 1.0 - model.ccu(b, load.zeta_center)?,
            simulated: outage.ccu[i].mean,
            stderr: outage.ccu[i].stderr,
        });
        rows.push(ValidationRow {
            quantity: format!("outage@beta={}", format_number(b)),
            class: "ceu".into(),
            analytic: 1.0 - model.ceu(b, load.zeta_edge)?,
            simulated: outage.ceu[i].mean,
            stderr: outage.ceu[i].stderr,
        });
    }
    if cfg.lambda_m > 0.0 {
        let t = simulate_temporal(cfg, load, &TemporalOptions::default(), seed)
            .map_err(|e| e.in_stage("temporal simulation"))?;
        for (q, c, a, s) in [
            ("activity", "center", load.zeta_center, t.zeta_center),
            ("activity", "edge", load.zeta_edge, t.zeta_edge),
            ("blocking", "ccu", report.blocking.b_ccu, t.b_ccu),
            ("blocking", "ceu", report.blocking.b_ceu, t.b_ceu),
        ] {
            rows.push(ValidationRow {
                quantity: q.into(),
                class: c.into(),
                analytic: a,
                simulated: s.mean,
                stderr: s.stderr,
            });
        }
    }
    Ok(rows)
}

pub fn write_validation_csv<W: Write>(rows: &[ValidationRow], out: W) -> Result<()> {
    let io = |e: csv::Error| Error::invalid("out", e.to_string());
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(["quantity", "class", "analytic", "simulated", "stderr", "z"])
        .map_err(io)?;
    for r in rows {
        let z = if r.stderr > 0.0 {
            (r.analytic - r.simulated).abs() / r.stderr
        } else {
            f64::NAN
        };
        let z = if z.is_nan() {
            String::new()
        } else {
            format_number(z)
        };
        w.write_record([
            r.quantity.clone(),
            r.class.clone(),
            format_number(r.analytic),
            format_number(r.simulated),
            format_number(r.stderr),
            z,
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::invalid("out", e.to_string()))
}
