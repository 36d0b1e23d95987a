use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    clean_fuel_ratio, coefficient_of_variation, interconnector_proxy, load_correlation,
    market_value, penetration, value_factor, average_price, CarbonContents, IcTable,
    InterconnectorCapacity, ZoneInterconnection,
};
use crate::error::{Error, Result};
use crate::ingest::{coverage, RawInputs};
use crate::types::{stable_mean, Aggregation, Period, Technology, ZoneId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricsConfig {
    pub aggregation: Aggregation,
    /// Minimum share of observed hours for a zone-period to be kept.
    pub min_coverage: f64,
    /// Minimum generation / load share for a value factor to be emitted.
    pub min_generation_share: f64,
    pub carbon: CarbonContents,
    /// Average prices with smaller magnitude leave the value factor undefined.
    pub price_epsilon: f64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            aggregation: Aggregation::Monthly,
            min_coverage: 0.9,
            min_generation_share: 0.001,
            carbon: CarbonContents::default(),
            price_epsilon: 1e-9,
        }
    }
}

/// Revenue metrics of one technology in one zone-period. `None` marks an
/// undefined metric; the reason is recorded in [`MetricsTable::exclusions`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZonePeriodMetrics {
    pub zone: ZoneId,
    pub period: Period,
    pub technology: Technology,
    pub mv: Option<f64>,
    pub avg_price: f64,
    pub vf: Option<f64>,
    pub penetration: Option<f64>,
    pub cov: Option<f64>,
    pub load_corr: Option<f64>,
    pub gen_total: f64,
}

/// Technology-independent regressors of one zone-period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZonePeriodControls {
    pub zone: ZoneId,
    pub period: Period,
    pub coverage: f64,
    pub mean_load: f64,
    pub fuel_ratio: Option<f64>,
    pub hydro_pumped: Option<f64>,
    pub hydro_reservoir: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exclusion {
    pub zone: ZoneId,
    pub period: String,
    pub technology: Option<Technology>,
    pub reason: String,
}

/// Tidy per-(zone, period, technology) metrics with zone-period controls and
/// the time-invariant interconnector table.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsTable {
    pub metrics: Vec<ZonePeriodMetrics>,
    pub controls: Vec<ZonePeriodControls>,
    pub interconnectors: IcTable,
    pub exclusions: Vec<Exclusion>,
}

fn fuel_ratio_for(
    period: &Period,
    monthly: &BTreeMap<(i32, u32), f64>,
) -> Option<f64> {
    match period {
        Period::Year(y) => {
            let vals: Vec<f64> = monthly
                .range((*y, 1)..=(*y, 12))
                .map(|(_, v)| *v)
                .collect();
            (!vals.is_empty()).then(|| stable_mean(&vals))
        }
        p => {
            let start = p.hours().start;
            match Period::containing(Aggregation::Monthly, start) {
                Period::Month { year, month } => monthly.get(&(year, month)).copied(),
                _ => unreachable!(),
            }
        }
    }
}

/// Aggregates the hourly store into zone-period metrics at the configured resolution.
pub fn compute_metrics(inputs: &RawInputs, cfg: &MetricsConfig) -> Result<MetricsTable> {
    let interconnectors = interconnector_proxy(&inputs.store, &inputs.topology);
    let mut fuel = BTreeMap::new();
    for (&key, p) in &inputs.fuel.months {
        fuel.insert(key, clean_fuel_ratio(p.gas, p.coal, p.eua, cfg.carbon)?);
    }

    let zones: Vec<_> = inputs.topology.zones().cloned().collect();
    let per_zone: Vec<(Vec<ZonePeriodMetrics>, Vec<ZonePeriodControls>, Vec<Exclusion>)> = zones
        .par_iter()
        .map(|zone| {
            let mut metrics = Vec::new();
            let mut controls = Vec::new();
            let mut excl = Vec::new();
            let Some(series) = inputs.store.series(&zone.id) else {
                return (metrics, controls, excl);
            };
            if series.is_empty() {
                return (metrics, controls, excl);
            }
            let life = zone.hours();
            let lo = life.start.max(series.hours[0]);
            let hi = life.end.min(series.hours[series.len() - 1] + 1);

            let mut annual_load = BTreeMap::new();
            let mut annual_mean = |year: i32| -> Option<f64> {
                *annual_load.entry(year).or_insert_with(|| {
                    let r = series.index_range(Period::Year(year).hours());
                    let m = stable_mean(&series.load[r]);
                    (m.is_finite() && m > 0.0).then_some(m)
                })
            };

            for period in Period::covering(cfg.aggregation, lo..hi) {
                let cov = coverage(&inputs.store, &zone.id, &period);
                if cov < cfg.min_coverage {
                    excl.push(Exclusion {
                        zone: zone.id.clone(),
                        period: period.to_string(),
                        technology: None,
                        reason: format!("coverage {cov:.3} below {}", cfg.min_coverage),
                    });
                    continue;
                }
                let r = series.index_range(period.hours());
                let price = &series.price[r.clone()];
                let load = &series.load[r.clone()];
                let avg_price = average_price(price).unwrap_or(f64::NAN);
                let mean_load = stable_mean(load);

                let year = period.year();
                let hydro = inputs.hydro.get(&zone.id, year);
                let norm = annual_mean(year);
                let scaled = |v: f64| norm.map(|m| v / m);
                controls.push(ZonePeriodControls {
                    zone: zone.id.clone(),
                    period,
                    coverage: cov,
                    mean_load,
                    fuel_ratio: fuel_ratio_for(&period, &fuel),
                    hydro_pumped: hydro.and_then(|h| scaled(h.pumped_storage_mw)),
                    hydro_reservoir: hydro.and_then(|h| scaled(h.reservoir_mw)),
                });

                for tech in Technology::ALL {
                    let gen = match tech {
                        Technology::Wind => &series.wind[r.clone()],
                        Technology::Solar => &series.solar[r.clone()],
                    };
                    let mut note = |reason: String| {
                        excl.push(Exclusion {
                            zone: zone.id.clone(),
                            period: period.to_string(),
                            technology: Some(tech),
                            reason,
                        })
                    };
                    let pen = penetration(gen, load).map_err(|e| note(e.to_string())).ok();
                    let mv = market_value(price, gen, 0.0)
                        .map_err(|e| note(format!("market value: {e}")))
                        .ok();
                    let vf = match (mv, pen) {
                        (Some(mv), Some(p)) if p >= cfg.min_generation_share => {
                            value_factor(mv, price, cfg.price_epsilon)
                                .map_err(|e| note(format!("value factor: {e}")))
                                .ok()
                        }
                        (Some(_), Some(p)) => {
                            note(format!(
                                "insufficient generation: share {p:.5} below {}",
                                cfg.min_generation_share
                            ));
                            None
                        }
                        _ => None,
                    };
                    // variability and load correlation are undefined for single-hour windows
                    let cov = coefficient_of_variation(gen).ok();
                    let corr = load_correlation(gen, load).ok();
                    metrics.push(ZonePeriodMetrics {
                        zone: zone.id.clone(),
                        period,
                        technology: tech,
                        mv,
                        avg_price,
                        vf,
                        penetration: pen,
                        cov,
                        load_corr: corr,
                        gen_total: crate::types::stable_sum(gen.iter().copied()),
                    });
                }
            }
            (metrics, controls, excl)
        })
        .collect();

    let mut table = MetricsTable {
        interconnectors,
        ..Default::default()
    };
    for (m, c, e) in per_zone {
        table.metrics.extend(m);
        table.controls.extend(c);
        table.exclusions.extend(e);
    }
    Ok(table)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn parse_opt(raw: &str, at: &crate::error::SourceLine) -> Result<Option<f64>> {
    if raw.is_empty() {
        return Ok(None);
    }
    parse_f64(raw, at).map(Some)
}

fn parse_f64(raw: &str, at: &crate::error::SourceLine) -> Result<f64> {
    raw.parse().map_err(|_| Error::MalformedRow {
        at: at.clone(),
        message: format!("'{raw}' is not a number"),
    })
}

const METRICS_HEADER: [&str; 10] = [
    "zone", "period", "technology", "mv", "avg_price", "vf", "penetration", "cov", "load_corr", "gen_total",
];
const CONTROLS_HEADER: [&str; 7] = [
    "zone", "period", "coverage", "mean_load", "fuel_ratio", "hydro_pumped", "hydro_reservoir",
];
const PAIRS_HEADER: [&str; 4] = ["from_zone", "to_zone", "ic_mw", "ic_normalized"];
const TOTALS_HEADER: [&str; 4] = ["zone", "ic_mw", "mean_load", "ic_normalized"];

impl MetricsTable {
    pub fn metric(&self, zone: &ZoneId, period: &Period, tech: Technology) -> Option<&ZonePeriodMetrics> {
        self.metrics
            .iter()
            .find(|m| &m.zone == zone && &m.period == period && m.technology == tech)
    }

    pub fn zones(&self) -> Vec<ZoneId> {
        let mut z: Vec<ZoneId> = self.controls.iter().map(|c| c.zone.clone()).collect();
        z.dedup();
        z.sort();
        z.dedup();
        z
    }

    /// Writes the four CSV files of the metrics table into `dir`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let write = |name: &str, header: &[&str], lines: Vec<String>| -> Result<()> {
            let path = dir.join(name);
            let mut f = std::io::BufWriter::new(
                std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?,
            );
            let mut text = header.join(",");
            text.push('\n');
            for l in lines {
                text.push_str(&l);
                text.push('\n');
            }
            f.write_all(text.as_bytes()).map_err(|e| Error::io(&path, e))
        };
        write(
            "metrics.csv",
            &METRICS_HEADER,
            self.metrics
                .iter()
                .map(|m| {
                    format!(
                        "{},{},{},{},{},{},{},{},{},{}",
                        m.zone,
                        m.period,
                        m.technology,
                        opt(m.mv),
                        m.avg_price,
                        opt(m.vf),
                        opt(m.penetration),
                        opt(m.cov),
                        opt(m.load_corr),
                        m.gen_total
                    )
                })
                .collect(),
        )?;
        write(
            "controls.csv",
            &CONTROLS_HEADER,
            self.controls
                .iter()
                .map(|c| {
                    format!(
                        "{},{},{},{},{},{},{}",
                        c.zone,
                        c.period,
                        c.coverage,
                        c.mean_load,
                        opt(c.fuel_ratio),
                        opt(c.hydro_pumped),
                        opt(c.hydro_reservoir)
                    )
                })
                .collect(),
        )?;
        write(
            "interconnectors.csv",
            &PAIRS_HEADER,
            self.interconnectors
                .pairs
                .iter()
                .map(|p| format!("{},{},{},{}", p.from_zone, p.to_zone, p.ic_mw, p.ic_normalized))
                .collect(),
        )?;
        write(
            "interconnector_totals.csv",
            &TOTALS_HEADER,
            self.interconnectors
                .zones
                .values()
                .map(|z| format!("{},{},{},{}", z.zone, z.ic_mw, z.mean_load, z.ic_normalized))
                .collect(),
        )
    }

    /// Reads a table written by [`MetricsTable::write_dir`]. Exclusions are not persisted.
    pub fn read_dir(dir: &Path) -> Result<Self> {
        use crate::ingest::csv_rows as rows;
        let mut table = MetricsTable::default();
        for (at, r) in rows(&dir.join("metrics.csv"), &METRICS_HEADER)? {
            table.metrics.push(ZonePeriodMetrics {
                zone: ZoneId::new(&r[0]),
                period: r[1].parse()?,
                technology: r[2].parse()?,
                mv: parse_opt(&r[3], &at)?,
                avg_price: parse_f64(&r[4], &at)?,
                vf: parse_opt(&r[5], &at)?,
                penetration: parse_opt(&r[6], &at)?,
                cov: parse_opt(&r[7], &at)?,
                load_corr: parse_opt(&r[8], &at)?,
                gen_total: parse_f64(&r[9], &at)?,
            });
        }
        for (at, r) in rows(&dir.join("controls.csv"), &CONTROLS_HEADER)? {
            table.controls.push(ZonePeriodControls {
                zone: ZoneId::new(&r[0]),
                period: r[1].parse()?,
                coverage: parse_f64(&r[2], &at)?,
                mean_load: parse_f64(&r[3], &at)?,
                fuel_ratio: parse_opt(&r[4], &at)?,
                hydro_pumped: parse_opt(&r[5], &at)?,
                hydro_reservoir: parse_opt(&r[6], &at)?,
            });
        }
        for (at, r) in rows(&dir.join("interconnectors.csv"), &PAIRS_HEADER)? {
            table.interconnectors.pairs.push(InterconnectorCapacity {
                from_zone: ZoneId::new(&r[0]),
                to_zone: ZoneId::new(&r[1]),
                ic_mw: parse_f64(&r[2], &at)?,
                ic_normalized: parse_f64(&r[3], &at)?,
            });
        }
        for (at, r) in rows(&dir.join("interconnector_totals.csv"), &TOTALS_HEADER)? {
            let zone = ZoneId::new(&r[0]);
            table.interconnectors.zones.insert(
                zone.clone(),
                ZoneInterconnection {
                    zone,
                    ic_mw: parse_f64(&r[1], &at)?,
                    mean_load: parse_f64(&r[2], &at)?,
                    ic_normalized: parse_f64(&r[3], &at)?,
                },
            );
        }
        Ok(table)
    }
}
