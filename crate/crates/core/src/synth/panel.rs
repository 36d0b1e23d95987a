//! Direct panel data-generating process: draws zone-level moderators and
//! penetration paths, builds the regressors through the panel module and
//! sets the value factor to Xβ plus AR(1) noise (optionally a random zone
//! intercept).

use std::collections::BTreeMap;

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::{ModelSpec, ModelTerms};
use crate::ingest::{ZoneInfo, ZoneTopology};
use crate::metrics::{IcTable, InterconnectorCapacity, MetricsTable, ZoneInterconnection, ZonePeriodControls, ZonePeriodMetrics};
use crate::panel::{assemble_design, PanelDesign};
use crate::spatial::{build_weights, WeightScheme, WeightsSet};
use crate::types::{Aggregation, Period, Technology, ZoneId};

/// Full-model wind coefficients used as the default truth.
pub const WIND_REFERENCE: &[(&str, f64)] = &[
    ("dom_wind", -0.622),
    ("dom_wind.between", -0.204),
    ("nbr_wind", -0.486),
    ("nbr_wind.between", -0.29),
    ("dom_solar", 0.047),
    ("dom_solar.between", -0.23),
    ("nbr_solar", -0.151),
    ("nbr_solar.between", 0.547),
    ("hydro_pumped", 0.023),
    ("hydro_pumped.between", 0.039),
    ("hydro_reservoir", 0.04),
    ("hydro_reservoir.between", 0.024),
    ("fuel_ratio", -0.008),
    ("load_corr", 0.106),
    ("load_corr.between", -0.034),
    ("cov", -0.204),
    ("cov.between", -0.062),
    ("ic.between", 0.002),
    ("dom_wind*hydro_pumped", -0.93),
    ("dom_wind*hydro_reservoir", -0.357),
    ("dom_wind*fuel_ratio", -0.076),
    ("dom_wind*load_corr", -0.246),
    ("dom_wind*cov", -1.162),
    ("dom_wind*hydro_pumped.between", 0.545),
    ("dom_wind*hydro_reservoir.between", 0.241),
    ("dom_wind*load_corr.between", 1.766),
    ("dom_wind*cov.between", -1.792),
    ("dom_wind*ic.between", 0.19),
    ("nbr_wind*ic.between", -0.133),
    ("intercept", 0.9),
];

/// Full-model solar coefficients.
pub const SOLAR_REFERENCE: &[(&str, f64)] = &[
    ("dom_solar", -1.392),
    ("dom_solar.between", -1.837),
    ("nbr_solar", -2.377),
    ("nbr_solar.between", -2.256),
    ("dom_wind", -0.05),
    ("dom_wind.between", 0.246),
    ("nbr_wind", 0.162),
    ("nbr_wind.between", 0.175),
    ("hydro_pumped", 0.222),
    ("hydro_pumped.between", 0.05),
    ("hydro_reservoir", 0.028),
    ("hydro_reservoir.between", -0.015),
    ("fuel_ratio", 0.014),
    ("load_corr", 0.347),
    ("load_corr.between", -0.112),
    ("cov", 0.02),
    ("cov.between", 0.097),
    ("ic.between", -0.034),
    ("dom_solar*hydro_pumped", 12.533),
    ("dom_solar*hydro_reservoir", 0.755),
    ("dom_solar*fuel_ratio", 0.043),
    ("dom_solar*load_corr", -0.467),
    ("dom_solar*cov", -1.106),
    ("dom_solar*hydro_pumped.between", -0.558),
    ("dom_solar*hydro_reservoir.between", -0.649),
    ("dom_solar*load_corr.between", -0.436),
    ("dom_solar*cov.between", -4.051),
    ("dom_solar*ic.between", 0.412),
    ("nbr_solar*ic.between", -0.415),
    ("intercept", 0.85),
];

pub fn reference_coefficients(tech: Technology) -> BTreeMap<String, f64> {
    let table = match tech {
        Technology::Wind => WIND_REFERENCE,
        Technology::Solar => SOLAR_REFERENCE,
    };
    table.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

/// Penetration process of one technology: zone mean plus a common
/// (continental) factor, a seasonal cycle, a linear trend and AR(1) noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PenetrationProcess {
    pub mean_range: (f64, f64),
    pub common_weight: f64,
    pub noise_sd: f64,
    pub ar: f64,
    pub seasonal_amplitude: f64,
    /// Penetration growth per year, drawn per zone from [0, trend].
    pub trend: f64,
    /// Seasonal phase in months.
    pub phase: f64,
}

impl PenetrationProcess {
    pub fn wind() -> Self {
        PenetrationProcess {
            mean_range: (0.03, 0.25),
            common_weight: 0.5,
            noise_sd: 0.03,
            ar: 0.1,
            seasonal_amplitude: 0.01,
            trend: 0.005,
            phase: 0.0,
        }
    }

    pub fn solar() -> Self {
        PenetrationProcess {
            mean_range: (0.01, 0.08),
            common_weight: 0.5,
            noise_sd: 0.01,
            ar: 0.1,
            seasonal_amplitude: 0.005,
            trend: 0.003,
            phase: 6.0,
        }
    }
}

impl Default for PenetrationProcess {
    fn default() -> Self {
        Self::wind()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DgpConfig {
    pub n_zones: usize,
    /// Inclusive range of active months per zone; windows end together.
    pub periods: (usize, usize),
    pub start_year: i32,
    pub technology: Technology,
    pub terms: ModelTerms,
    /// Truth by design column name; absent columns have coefficient 0.
    pub coefficients: BTreeMap<String, f64>,
    pub rho: f64,
    pub noise_scale: f64,
    /// Standard deviation of the random zone intercept.
    pub zone_effect_scale: f64,
    pub wind: PenetrationProcess,
    pub solar: PenetrationProcess,
    /// Upper bound of normalized pumped-storage and reservoir capacity.
    pub hydro_scale: f64,
    /// Extra random borders on top of the ring.
    pub extra_borders: usize,
    pub border_capacity_mw: (f64, f64),
    pub mean_load_mw: (f64, f64),
    pub seed: u64,
}

impl Default for DgpConfig {
    fn default() -> Self {
        DgpConfig {
            n_zones: 30,
            periods: (60, 108),
            start_year: 2015,
            technology: Technology::Wind,
            terms: ModelTerms::default(),
            coefficients: reference_coefficients(Technology::Wind),
            rho: 0.5,
            noise_scale: 0.03,
            zone_effect_scale: 0.0,
            wind: PenetrationProcess::wind(),
            solar: PenetrationProcess::solar(),
            hydro_scale: 0.6,
            extra_borders: 15,
            border_capacity_mw: (500.0, 4000.0),
            mean_load_mw: (5000.0, 40000.0),
            seed: 1,
        }
    }
}

impl DgpConfig {
    /// 30 zones with 76 to 108 months each (about 2760 rows).
    pub fn full_scale() -> Self {
        DgpConfig {
            periods: (76, 108),
            ..Default::default()
        }
    }

    /// Paper-scale panel of similarly sized zones, so that no single zone
    /// dominates the interconnector moderator.
    pub fn homogeneous() -> Self {
        DgpConfig {
            mean_load_mw: (15000.0, 30000.0),
            ..Self::full_scale()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.rho.abs() >= 1.0 {
            return bad("AR coefficient must satisfy |rho| < 1");
        }
        if self.noise_scale < 0.0 || self.zone_effect_scale < 0.0 || self.hydro_scale <= 0.0 {
            return bad("scales must be non-negative");
        }
        if self.n_zones < 3 {
            return bad("at least three zones are required");
        }
        if self.periods.0 < 2 || self.periods.0 > self.periods.1 {
            return bad("period range must satisfy 2 <= min <= max");
        }
        if self.coefficients.values().any(|b| !b.is_finite()) {
            return bad("coefficients must be finite");
        }
        if self.border_capacity_mw.0 <= 0.0 || self.mean_load_mw.0 <= 0.0 {
            return bad("capacities and loads must be positive");
        }
        Ok(())
    }

    pub fn model_spec(&self) -> ModelSpec {
        ModelSpec {
            technology: self.technology,
            terms: self.terms.clone(),
            aggregation: Aggregation::Monthly,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub technology: Technology,
    /// Truth for every design column, in design order.
    pub coefficients: Vec<(String, f64)>,
    pub rho: f64,
    pub noise_scale: f64,
    pub zone_effect_scale: f64,
    pub n_obs: usize,
    pub seed: u64,
}

impl Truth {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.coefficients.iter().find(|(n, _)| n == name).map(|c| c.1)
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticPanel {
    pub topology: ZoneTopology,
    pub metrics: MetricsTable,
    pub weights: WeightsSet,
    pub spec: ModelSpec,
    pub design: PanelDesign,
    pub truth: Truth,
}

fn month_at(start_year: i32, k: usize) -> Period {
    Period::Month {
        year: start_year + (k / 12) as i32,
        month: (k % 12) as u32 + 1,
    }
}

fn month_start(p: Period) -> NaiveDate {
    match p {
        Period::Month { year, month } => NaiveDate::from_ymd_opt(year, month, 1).expect("valid month"),
        _ => unreachable!(),
    }
}

fn month_end(p: Period) -> NaiveDate {
    month_start(p)
        .checked_add_months(chrono::Months::new(1))
        .and_then(|d| d.pred_opt())
        .expect("valid month")
}

fn penetration_paths(
    proc: &PenetrationProcess,
    n_zones: usize,
    horizon: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<f64>> {
    let std = Normal::new(0.0, 1.0).expect("unit normal");
    let common: Vec<f64> = (0..horizon).map(|_| std.sample(rng)).collect();
    let w = proc.common_weight.clamp(0.0, 1.0);
    (0..n_zones)
        .map(|_| {
            let mu = rng.random_range(proc.mean_range.0..=proc.mean_range.1);
            let slope = rng.random_range(0.0..=proc.trend) / 12.0;
            let mut ar = 0.0;
            (0..horizon)
                .map(|t| {
                    let shock = w.sqrt() * common[t] + (1.0 - w).sqrt() * std.sample(rng);
                    ar = proc.ar * ar + (1.0 - proc.ar * proc.ar).sqrt() * shock;
                    let season = proc.seasonal_amplitude
                        * (2.0 * std::f64::consts::PI * (t as f64 + proc.phase) / 12.0).cos();
                    let c = t as f64 - horizon as f64 / 2.0;
                    (mu + slope * c + season + proc.noise_sd * ar).max(1e-3)
                })
                .collect()
        })
        .collect()
}

/// Ring of zones plus random chords; returns canonical pairs.
fn random_borders(n: usize, extra: usize, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    let mut set = std::collections::BTreeSet::new();
    for i in 0..n {
        let j = (i + 1) % n;
        set.insert((i.min(j), i.max(j)));
    }
    let mut attempts = 0;
    while set.len() < n + extra && attempts < 100 * (extra + 1) {
        attempts += 1;
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if a != b {
            set.insert((a.min(b), a.max(b)));
        }
    }
    set.into_iter().collect()
}

/// Draws one synthetic panel. The returned design is what
/// [`assemble_design`] produces on the returned metrics table.
pub fn generate_panel(cfg: &DgpConfig) -> Result<SyntheticPanel> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let std = Normal::new(0.0, 1.0).expect("unit normal");
    let n = cfg.n_zones;
    let horizon = cfg.periods.1;
    let ids: Vec<ZoneId> = (0..n).map(|i| ZoneId(format!("Z{:02}", i + 1))).collect();

    // active windows all end at the horizon
    let lengths: Vec<usize> = (0..n).map(|_| rng.random_range(cfg.periods.0..=cfg.periods.1)).collect();
    let first: Vec<usize> = lengths.iter().map(|l| horizon - l).collect();

    let borders = random_borders(n, cfg.extra_borders, &mut rng);
    let infos: Vec<ZoneInfo> = (0..n)
        .map(|i| {
            let s = month_at(cfg.start_year, first[i]);
            ZoneInfo {
                id: ids[i].clone(),
                start: month_start(s),
                end: month_end(month_at(cfg.start_year, horizon - 1)),
                first_sample_year: s.year(),
            }
        })
        .collect();
    let topology = ZoneTopology::new(
        infos,
        borders.iter().map(|&(a, b)| (ids[a].clone(), ids[b].clone())).collect(),
    )?;

    // interconnectors
    let loads: Vec<f64> = (0..n).map(|_| rng.random_range(cfg.mean_load_mw.0..=cfg.mean_load_mw.1)).collect();
    let mut ic = IcTable::default();
    let mut totals = vec![0.0; n];
    let caps: Vec<f64> = borders
        .iter()
        .map(|_| rng.random_range(cfg.border_capacity_mw.0..=cfg.border_capacity_mw.1))
        .collect();
    for (&(a, b), &c) in borders.iter().zip(&caps) {
        totals[a] += c;
        totals[b] += c;
        for (f, t) in [(a, b), (b, a)] {
            ic.pairs.push(InterconnectorCapacity {
                from_zone: ids[f].clone(),
                to_zone: ids[t].clone(),
                ic_mw: c,
                ic_normalized: c / loads[f],
            });
        }
    }
    ic.pairs.sort_by(|x, y| (&x.from_zone, &x.to_zone).cmp(&(&y.from_zone, &y.to_zone)));
    for i in 0..n {
        ic.zones.insert(
            ids[i].clone(),
            ZoneInterconnection {
                zone: ids[i].clone(),
                ic_mw: totals[i],
                mean_load: loads[i],
                ic_normalized: totals[i] / loads[i],
            },
        );
    }

    let wind = penetration_paths(&cfg.wind, n, horizon, &mut rng);
    let solar = penetration_paths(&cfg.solar, n, horizon, &mut rng);

    // controls: hydro capacities change yearly; the fuel ratio is common
    let years = horizon.div_ceil(12);
    let hydro: Vec<(Vec<f64>, Vec<f64>)> = (0..n)
        .map(|_| {
            let base_p = rng.random_range(0.0..cfg.hydro_scale) * rng.random_range(0.0..1.0_f64);
            let base_r = rng.random_range(0.0..cfg.hydro_scale) * rng.random_range(0.0..1.0_f64).powi(2);
            let path = |base: f64, rng: &mut ChaCha8Rng| -> Vec<f64> {
                (0..years).map(|_| (base * (1.0 + 0.05 * std.sample(rng))).max(0.0)).collect()
            };
            (path(base_p, &mut rng), path(base_r, &mut rng))
        })
        .collect();
    let mut fuel = Vec::with_capacity(horizon);
    let mut level: f64 = 0.0;
    for t in 0..horizon {
        level = 0.9 * level + 0.1 * std.sample(&mut rng);
        fuel.push(1.0 + 0.2 * (2.0 * std::f64::consts::PI * t as f64 / 12.0).sin() + level);
    }
    let shape: Vec<[(f64, f64); 2]> = (0..n)
        .map(|_| {
            [
                (rng.random_range(-0.2..0.3), rng.random_range(0.5..1.0)),
                (rng.random_range(0.0..0.5), rng.random_range(1.0..2.0)),
            ]
        })
        .collect();

    let mut metrics = MetricsTable {
        interconnectors: ic,
        ..Default::default()
    };
    for i in 0..n {
        for t in first[i]..horizon {
            let period = month_at(cfg.start_year, t);
            for (tech, paths) in [(Technology::Wind, &wind), (Technology::Solar, &solar)] {
                let s = shape[i][tech as usize];
                let own = tech == cfg.technology;
                metrics.metrics.push(ZonePeriodMetrics {
                    zone: ids[i].clone(),
                    period,
                    technology: tech,
                    mv: None,
                    avg_price: 1.0,
                    vf: own.then_some(1.0),
                    penetration: Some(paths[i][t]),
                    cov: Some((s.1 + 0.1 * std.sample(&mut rng)).max(0.05)),
                    load_corr: Some((s.0 + 0.1 * std.sample(&mut rng)).clamp(-1.0, 1.0)),
                    gen_total: paths[i][t],
                });
            }
            metrics.controls.push(ZonePeriodControls {
                zone: ids[i].clone(),
                period,
                coverage: 1.0,
                mean_load: loads[i],
                fuel_ratio: Some(fuel[t]),
                hydro_pumped: Some(hydro[i].0[t / 12]),
                hydro_reservoir: Some(hydro[i].1[t / 12]),
            });
        }
    }
    // zones outside the active window still need penetration for spatial lags
    for i in 0..n {
        for t in 0..first[i] {
            let period = month_at(cfg.start_year, t);
            for (tech, paths) in [(Technology::Wind, &wind), (Technology::Solar, &solar)] {
                metrics.metrics.push(ZonePeriodMetrics {
                    zone: ids[i].clone(),
                    period,
                    technology: tech,
                    mv: None,
                    avg_price: 1.0,
                    vf: None,
                    penetration: Some(paths[i][t]),
                    cov: None,
                    load_corr: None,
                    gen_total: paths[i][t],
                });
            }
        }
    }
    metrics
        .metrics
        .sort_by(|a, b| (&a.zone, a.period, a.technology).cmp(&(&b.zone, b.period, b.technology)));

    let weights = build_weights(&topology, &metrics.interconnectors, WeightScheme::IcWeighted);
    let spec = cfg.model_spec();
    let mut design = assemble_design(&spec, &metrics, &weights)?;

    let beta: Vec<f64> = design
        .design
        .columns
        .iter()
        .map(|c| cfg.coefficients.get(&c.name).copied().unwrap_or(0.0))
        .collect();
    let xb = &design.design.x * nalgebra::DVector::from_column_slice(&beta);
    let mut y = xb.clone();
    let stationary = (1.0 - cfg.rho * cfg.rho).sqrt();
    for r in &design.design.entities.ranges {
        let alpha = cfg.zone_effect_scale * std.sample(&mut rng);
        let mut e = cfg.noise_scale / stationary * std.sample(&mut rng);
        for i in r.clone() {
            if i > r.start {
                e = cfg.rho * e + cfg.noise_scale * std.sample(&mut rng);
            }
            y[i] += alpha + e;
        }
    }

    // write y back into the table so the pipeline sees it
    let mut pos: BTreeMap<(ZoneId, Period), usize> = BTreeMap::new();
    for (k, m) in metrics.metrics.iter().enumerate() {
        if m.technology == cfg.technology {
            pos.insert((m.zone.clone(), m.period), k);
        }
    }
    for (i, key) in design.design.rows.iter().enumerate() {
        let k = pos[key];
        metrics.metrics[k].vf = Some(y[i]);
        metrics.metrics[k].mv = Some(y[i]);
        design.observations[i].y = y[i];
    }
    // rows without a complete case keep no value factor
    let kept: std::collections::BTreeSet<&(ZoneId, Period)> = design.design.rows.iter().collect();
    for m in metrics.metrics.iter_mut() {
        if m.technology == cfg.technology && m.vf.is_some() && !kept.contains(&(m.zone.clone(), m.period)) {
            m.vf = None;
            m.mv = None;
        }
    }
    design.y = y;

    let truth = Truth {
        technology: cfg.technology,
        coefficients: design.design.columns.iter().map(|c| c.name.clone()).zip(beta).collect(),
        rho: cfg.rho,
        noise_scale: cfg.noise_scale,
        zone_effect_scale: cfg.zone_effect_scale,
        n_obs: design.design.n_rows(),
        seed: cfg.seed,
    };
    Ok(SyntheticPanel {
        topology,
        metrics,
        weights,
        spec,
        design,
        truth,
    })
}
