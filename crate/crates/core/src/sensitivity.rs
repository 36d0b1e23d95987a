//! Robustness sweeps: leave-one-zone-out, temporal aggregation, spatial
//! weighting scheme, and between-within versus fixed-effects estimation.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::ops::Range;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::effects::Z_95;
use crate::error::{Error, Result};
use crate::estimate::{fit, fit_metrics, Control, Estimator, ModelResult, ModelSpec};
use crate::ingest::{ExchangeSeries, HourlyStore, RawInputs, ZoneSeries};
use crate::metrics::{compute_metrics, MetricsConfig, MetricsTable};
use crate::panel::assemble_design;
use crate::spatial::{build_weights, WeightScheme, WeightsSet};
use crate::types::{Aggregation, HourIndex, Technology, ZoneId};

/// Domestic, neighboring and their two interconnector interactions.
pub fn focal_coefficients(tech: Technology) -> Vec<String> {
    vec![
        format!("dom_{tech}"),
        format!("nbr_{tech}"),
        format!("dom_{tech}*ic.between"),
        format!("nbr_{tech}*ic.between"),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSummary {
    pub name: String,
    pub estimate: f64,
    pub std_error: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub run_id: String,
    pub variant: String,
    pub spec: ModelSpec,
    pub n_obs: Option<usize>,
    pub coefficients: Vec<CoefficientSummary>,
    pub error: Option<String>,
}

impl RunOutcome {
    fn from_result(run_id: String, variant: String, spec: ModelSpec, res: Result<ModelResult>, names: &[String]) -> Self {
        match res {
            Ok(r) => RunOutcome {
                run_id,
                variant,
                spec,
                n_obs: Some(r.n_obs),
                coefficients: names
                    .iter()
                    .filter_map(|n| r.coefficient(n))
                    .map(|c| CoefficientSummary {
                        name: c.name.clone(),
                        estimate: c.estimate,
                        std_error: c.std_error,
                        ci_low: c.estimate - Z_95 * c.std_error,
                        ci_high: c.estimate + Z_95 * c.std_error,
                    })
                    .collect(),
                error: None,
            },
            Err(e) => RunOutcome {
                run_id,
                variant,
                spec,
                n_obs: None,
                coefficients: Vec::new(),
                error: Some(e.to_string()),
            },
        }
    }

    pub fn coefficient(&self, name: &str) -> Option<&CoefficientSummary> {
        self.coefficients.iter().find(|c| c.name == name)
    }

    pub fn failed(&self) -> bool {
        self.error.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    LeaveOneOut,
    Aggregation,
    Weights,
    Estimators,
}

impl SweepKind {
    fn variant_column(self) -> &'static str {
        match self {
            SweepKind::LeaveOneOut => "omitted_zone",
            SweepKind::Aggregation => "level",
            SweepKind::Weights => "scheme",
            SweepKind::Estimators => "estimator",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub kind: SweepKind,
    pub runs: Vec<RunOutcome>,
    pub warnings: Vec<String>,
}

impl SweepResult {
    pub fn run(&self, variant: &str) -> Option<&RunOutcome> {
        self.runs.iter().find(|r| r.variant == variant)
    }

    /// Long format: run_id,<variant>,coefficient,estimate,se,ci_low,ci_high,n_obs,status.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut text = format!(
            "run_id,{},coefficient,estimate,se,ci_low,ci_high,n_obs,status\n",
            self.kind.variant_column()
        );
        for r in &self.runs {
            let n = r.n_obs.map(|n| n.to_string()).unwrap_or_default();
            match &r.error {
                Some(e) => {
                    let msg = e.replace([',', '\n', '"'], " ");
                    text.push_str(&format!("{},{},,,,,,{n},failed: {msg}\n", r.run_id, r.variant));
                }
                None => {
                    for c in &r.coefficients {
                        text.push_str(&format!(
                            "{},{},{},{},{},{},{},{n},ok\n",
                            r.run_id, r.variant, c.name, c.estimate, c.std_error, c.ci_low, c.ci_high
                        ));
                    }
                }
            }
        }
        write_text(path, &text)
    }

    /// Every run's spec and summary, as JSON.
    pub fn write_runs_json(&self, path: &Path) -> Result<()> {
        write_text(path, &serde_json::to_string_pretty(self).expect("sweep serializes"))
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(text.as_bytes()))
        .map_err(|e| Error::io(path, e))
}

/// Refits once per zone of the metrics table with that zone's observations
/// removed. The omitted zone stays in its neighbors' spatial lags. The first
/// run (`full`) is the full-sample fit.
pub fn leave_one_out(spec: &ModelSpec, metrics: &MetricsTable, weights: &WeightsSet) -> Result<SweepResult> {
    let full_panel = assemble_design(spec, metrics, weights)?;
    let sample: BTreeSet<&ZoneId> = full_panel.design.entities.zones.iter().collect();
    if sample.len() < 3 {
        return Err(Error::Data(format!("leave-one-out needs at least 3 zones, found {}", sample.len())));
    }
    let names = focal_coefficients(spec.technology);
    let full = fit(spec, &full_panel);
    let mut runs = vec![RunOutcome::from_result("full".into(), String::new(), spec.clone(), full, &names)];
    let zones = metrics.zones();
    let loo: Vec<RunOutcome> = zones
        .par_iter()
        .enumerate()
        .map(|(k, z)| {
            let mut s = spec.clone();
            if !s.exclude_zones.contains(z) {
                s.exclude_zones.push(z.clone());
            }
            let res = fit_metrics(&s, metrics, weights);
            RunOutcome::from_result(format!("loo_{:03}", k + 1), z.to_string(), s, res, &names)
        })
        .collect();
    let warnings = loo
        .iter()
        .filter_map(|r| r.error.as_ref().map(|e| format!("run without {} failed: {e}", r.variant)))
        .collect();
    runs.extend(loo);
    Ok(SweepResult {
        kind: SweepKind::LeaveOneOut,
        runs,
        warnings,
    })
}

/// Zones with fewer than two value-factor observations for `tech`.
fn short_zones(metrics: &MetricsTable, tech: Technology) -> Vec<ZoneId> {
    let mut counts: BTreeMap<&ZoneId, usize> = BTreeMap::new();
    for m in metrics.metrics.iter().filter(|m| m.technology == tech) {
        let c = counts.entry(&m.zone).or_default();
        if m.vf.is_some() {
            *c += 1;
        }
    }
    counts.into_iter().filter(|(_, c)| *c < 2).map(|(z, _)| z.clone()).collect()
}

/// Recomputes all metrics at each level and refits.
pub fn aggregation_sweep(
    spec: &ModelSpec,
    inputs: &RawInputs,
    metrics_cfg: &MetricsConfig,
    levels: &[Aggregation],
) -> Result<SweepResult> {
    let names = focal_coefficients(spec.technology);
    let outcomes: Vec<(RunOutcome, Vec<String>)> = levels
        .par_iter()
        .map(|&level| {
            let cfg = MetricsConfig {
                aggregation: level,
                ..metrics_cfg.clone()
            };
            let mut s = ModelSpec {
                aggregation: level,
                ..spec.clone()
            };
            let mut warnings = Vec::new();
            let res = compute_metrics(inputs, &cfg).and_then(|table| {
                for z in short_zones(&table, spec.technology) {
                    if !s.exclude_zones.contains(&z) {
                        warnings.push(format!("{level}: zone {z} has fewer than 2 periods and was dropped"));
                        s.exclude_zones.push(z);
                    }
                }
                let w = build_weights(&inputs.topology, &table.interconnectors, spec.weights);
                fit_metrics(&s, &table, &w)
            });
            (RunOutcome::from_result(level.as_str().to_string(), level.as_str().to_string(), s, res, &names), warnings)
        })
        .collect();
    let mut runs = Vec::new();
    let mut warnings = Vec::new();
    for (r, w) in outcomes {
        warnings.extend(w);
        runs.push(r);
    }
    Ok(SweepResult {
        kind: SweepKind::Aggregation,
        runs,
        warnings,
    })
}

/// Outcome of the hourly degenerate case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HourlyCheck {
    pub n_obs: usize,
    pub max_vf_deviation: f64,
    /// Largest absolute penetration coefficient (domestic and neighboring, within and between).
    pub max_penetration_coefficient: f64,
    pub coefficients: Vec<CoefficientSummary>,
}

fn restrict(inputs: &RawInputs, window: Range<HourIndex>) -> RawInputs {
    let mut store = HourlyStore::default();
    for (z, s) in &inputs.store.zones {
        let r = s.index_range(window.clone());
        store.zones.insert(
            z.clone(),
            ZoneSeries {
                hours: s.hours[r.clone()].to_vec(),
                price: s.price[r.clone()].to_vec(),
                wind: s.wind[r.clone()].to_vec(),
                solar: s.solar[r.clone()].to_vec(),
                load: s.load[r].to_vec(),
            },
        );
    }
    for (b, e) in &inputs.store.exchanges {
        let r = e.index_range(window.clone());
        store.exchanges.insert(
            b.clone(),
            ExchangeSeries {
                hours: e.hours[r.clone()].to_vec(),
                net_export: e.net_export[r].to_vec(),
            },
        );
    }
    RawInputs {
        topology: inputs.topology.clone(),
        store,
        fuel: inputs.fuel.clone(),
        hydro: inputs.hydro.clone(),
    }
}

/// Hourly resolution: each window holds a single hour, so every value factor
/// is one and no penetration effect is identifiable beyond zero.
///
/// Variability and load-correlation controls are undefined for one-hour
/// windows and are left out. `window` limits the hours used; interconnector
/// capacities still come from the full data.
pub fn hourly_null_check(
    spec: &ModelSpec,
    inputs: &RawInputs,
    metrics_cfg: &MetricsConfig,
    window: Option<Range<HourIndex>>,
) -> Result<HourlyCheck> {
    let cfg = MetricsConfig {
        aggregation: Aggregation::Hourly,
        min_coverage: 0.0,
        ..metrics_cfg.clone()
    };
    let ic = compute_ic(inputs);
    let mut table = match window {
        Some(w) => compute_metrics(&restrict(inputs, w), &cfg)?,
        None => compute_metrics(inputs, &cfg)?,
    };
    table.interconnectors = ic;
    let mut s = ModelSpec {
        aggregation: Aggregation::Hourly,
        ..spec.clone()
    };
    s.terms
        .controls
        .retain(|c| !matches!(c, Control::LoadCorrelation | Control::Variability));
    let weights = build_weights(&inputs.topology, &table.interconnectors, s.weights);
    let panel = assemble_design(&s, &table, &weights)?;
    let max_vf_deviation = panel.y.iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max);
    let r = fit(&s, &panel)?;
    let t = s.technology;
    let pen: Vec<&crate::estimate::Coefficient> = r
        .coefficients
        .iter()
        .filter(|c| c.name.starts_with(&format!("dom_{t}")) || c.name.starts_with(&format!("nbr_{t}")))
        .collect();
    Ok(HourlyCheck {
        n_obs: r.n_obs,
        max_vf_deviation,
        max_penetration_coefficient: pen.iter().map(|c| c.estimate.abs()).fold(0.0, f64::max),
        coefficients: pen
            .iter()
            .map(|c| CoefficientSummary {
                name: c.name.clone(),
                estimate: c.estimate,
                std_error: c.std_error,
                ci_low: c.estimate - Z_95 * c.std_error,
                ci_high: c.estimate + Z_95 * c.std_error,
            })
            .collect(),
    })
}

fn compute_ic(inputs: &RawInputs) -> crate::metrics::IcTable {
    crate::metrics::interconnector_proxy(&inputs.store, &inputs.topology)
}

/// Interconnector-weighted versus unweighted neighbor averages.
pub fn weights_variant(spec: &ModelSpec, metrics: &MetricsTable, inputs_topology: &crate::ingest::ZoneTopology) -> Result<SweepResult> {
    let names = focal_coefficients(spec.technology);
    let runs: Vec<RunOutcome> = [WeightScheme::IcWeighted, WeightScheme::BinaryUniform]
        .par_iter()
        .map(|&scheme| {
            let s = ModelSpec {
                weights: scheme,
                ..spec.clone()
            };
            let w = build_weights(inputs_topology, &metrics.interconnectors, scheme);
            RunOutcome::from_result(scheme.as_str().into(), scheme.as_str().into(), s.clone(), fit_metrics(&s, metrics, &w), &names)
        })
        .collect();
    if let Some(r) = runs.iter().find(|r| r.failed()) {
        return Err(Error::Numerical(format!(
            "{} fit failed: {}",
            r.variant,
            r.error.as_deref().unwrap_or_default()
        )));
    }
    Ok(SweepResult {
        kind: SweepKind::Weights,
        runs,
        warnings: Vec::new(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorRow {
    pub coefficient: String,
    pub rewb: f64,
    pub fe: Option<f64>,
    pub relative_deviation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorComparison {
    pub rows: Vec<EstimatorRow>,
    pub max_relative_deviation: f64,
    pub rewb_adjusted_r2: f64,
    pub fe_adjusted_r2: f64,
    pub n_obs: usize,
}

/// |a − b| / max(|a|, |b|), zero when both vanish.
pub fn relative_deviation(a: f64, b: f64) -> f64 {
    let m = a.abs().max(b.abs());
    if m == 0.0 {
        0.0
    } else {
        (a - b).abs() / m
    }
}

impl EstimatorComparison {
    /// coefficient,rewb,fe,relative_deviation
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut text = String::from("coefficient,rewb,fe,relative_deviation\n");
        let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        for r in &self.rows {
            text.push_str(&format!("{},{},{},{}\n", r.coefficient, r.rewb, opt(r.fe), opt(r.relative_deviation)));
        }
        text.push_str(&format!("max_relative_deviation,,,{}\n", self.max_relative_deviation));
        write_text(path, &text)
    }
}

/// Fits both estimators on one design and pairs their coefficients.
pub fn estimator_comparison(spec: &ModelSpec, metrics: &MetricsTable, weights: &WeightsSet) -> Result<EstimatorComparison> {
    let panel = assemble_design(spec, metrics, weights)?;
    let rewb = fit(
        &ModelSpec {
            estimator: Estimator::Rewb,
            ..spec.clone()
        },
        &panel,
    )?;
    let fe = fit(
        &ModelSpec {
            estimator: Estimator::Fe,
            ..spec.clone()
        },
        &panel,
    )?;
    Ok(compare(&rewb, &fe))
}

pub fn compare(rewb: &ModelResult, fe: &ModelResult) -> EstimatorComparison {
    let mut max_dev: f64 = 0.0;
    let rows = rewb
        .coefficients
        .iter()
        .map(|c| {
            let f = fe.estimate(&c.name);
            let d = f.map(|f| relative_deviation(c.estimate, f));
            if let Some(d) = d {
                max_dev = max_dev.max(d);
            }
            EstimatorRow {
                coefficient: c.name.clone(),
                rewb: c.estimate,
                fe: f,
                relative_deviation: d,
            }
        })
        .collect();
    EstimatorComparison {
        rows,
        max_relative_deviation: max_dev,
        rewb_adjusted_r2: rewb.adjusted_r2,
        fe_adjusted_r2: fe.adjusted_r2,
        n_obs: rewb.n_obs,
    }
}
