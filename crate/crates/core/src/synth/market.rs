//! Hourly merit-order market simulator producing ingest-compatible data.
//!
//! Each zone has a linear conventional supply curve priced on residual demand
//! plus net exports. Trade clears border by border toward price equalization
//! (Gauss-Seidel over borders), subject to interconnector limits.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use chrono::{Datelike, NaiveDate, Timelike};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{
    Border, DatasetPaths, ExchangeSeries, FuelPrice, FuelPriceSeries, HydroCapacities, HydroCapacity, HourlyStore,
    RawInputs, ZoneInfo, ZoneSeries, ZoneTopology,
};
use crate::types::{date_start_hour, hour_to_datetime, ZoneId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenewableProfile {
    /// Installed capacity as a share of mean load at the start and end of the horizon.
    pub capacity_share: (f64, f64),
    /// Correlation of each zone's weather with the continental factor, in [-1, 1].
    pub spatial_correlation: f64,
    /// Hour-to-hour persistence of the latent weather process.
    pub persistence: f64,
    /// Relative amplitude of the diurnal shape.
    pub diurnal_amplitude: f64,
    /// Capacity factor level: logistic(mean + sd·latent).
    pub latent_mean: f64,
    pub latent_sd: f64,
}

impl RenewableProfile {
    pub fn wind() -> Self {
        RenewableProfile {
            capacity_share: (0.1, 0.6),
            spatial_correlation: 0.75,
            persistence: 0.97,
            diurnal_amplitude: 0.25,
            latent_mean: -0.9,
            latent_sd: 1.0,
        }
    }

    pub fn solar() -> Self {
        RenewableProfile {
            capacity_share: (0.05, 0.4),
            spatial_correlation: 0.9,
            persistence: 0.9,
            diurnal_amplitude: 1.0,
            latent_mean: 0.8,
            latent_sd: 0.8,
        }
    }
}

impl Default for RenewableProfile {
    fn default() -> Self {
        Self::wind()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeritOrderConfig {
    pub n_zones: usize,
    pub start: NaiveDate,
    pub hours: usize,
    /// Price at zero conventional output (EUR/MWh), drawn per zone.
    pub supply_intercept: (f64, f64),
    /// Price increase per unit of conventional output relative to mean load.
    pub supply_slope: (f64, f64),
    /// Conventional capacity as a multiple of mean load.
    pub max_supply_share: f64,
    /// Optional lower bound applied to reported prices.
    pub price_floor: Option<f64>,
    pub mean_load_mw: (f64, f64),
    pub load_daily_amplitude: f64,
    pub load_weekend_dip: f64,
    pub load_seasonal_amplitude: f64,
    pub load_noise: f64,
    pub wind: RenewableProfile,
    pub solar: RenewableProfile,
    /// Border capacity as a share of the smaller mean load of its two zones.
    pub interconnector_share: (f64, f64),
    /// Extra random borders on top of the chain.
    pub extra_borders: usize,
    /// Hydro capacities (share of mean load) drawn up to these bounds.
    pub pumped_share: f64,
    pub reservoir_share: f64,
    pub seed: u64,
}

impl Default for MeritOrderConfig {
    fn default() -> Self {
        MeritOrderConfig {
            n_zones: 8,
            start: NaiveDate::from_ymd_opt(2019, 1, 1).expect("valid date"),
            hours: 24 * 365 * 2,
            supply_intercept: (20.0, 40.0),
            supply_slope: (60.0, 100.0),
            max_supply_share: 2.5,
            price_floor: None,
            mean_load_mw: (4000.0, 40000.0),
            load_daily_amplitude: 0.15,
            load_weekend_dip: 0.08,
            load_seasonal_amplitude: 0.1,
            load_noise: 0.02,
            wind: RenewableProfile::wind(),
            solar: RenewableProfile::solar(),
            interconnector_share: (0.05, 0.3),
            extra_borders: 3,
            pumped_share: 0.15,
            reservoir_share: 0.5,
            seed: 1,
        }
    }
}

impl MeritOrderConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.n_zones == 0 || self.hours == 0 {
            return bad("zones and hours must be positive");
        }
        if self.supply_slope.0 <= 0.0 || self.supply_slope.1 < self.supply_slope.0 {
            return bad("supply slopes must be positive");
        }
        for p in [&self.wind, &self.solar] {
            if !(-1.0..=1.0).contains(&p.spatial_correlation) || !(-1.0..1.0).contains(&p.persistence) {
                return bad("correlation parameters must lie in [-1, 1]");
            }
            if p.capacity_share.0 < 0.0 || p.capacity_share.1 < 0.0 {
                return bad("capacities must be non-negative");
            }
        }
        if self.interconnector_share.0 < 0.0 || self.interconnector_share.1 < self.interconnector_share.0 {
            return bad("interconnector limits must be non-negative");
        }
        if self.mean_load_mw.0 <= 0.0 || self.max_supply_share <= 0.0 {
            return bad("loads and supply must be positive");
        }
        Ok(())
    }
}

/// A simulated market: everything ingest would load from disk.
#[derive(Debug, Clone)]
pub struct SyntheticMarket {
    pub inputs: RawInputs,
}

impl SyntheticMarket {
    /// Writes topology.toml, hourly.csv, exchanges.csv, fuel.csv and hydro.csv.
    pub fn write(&self, dir: &Path) -> Result<MarketFiles> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let topology = dir.join("topology.toml");
        std::fs::write(&topology, self.inputs.topology.to_toml_string()).map_err(|e| Error::io(&topology, e))?;
        let (hourly, exchanges) = self.inputs.store.write(dir)?;
        let fuel = dir.join("fuel.csv");
        self.inputs.fuel.write(&fuel)?;
        let hydro = dir.join("hydro.csv");
        self.inputs.hydro.write(&hydro)?;
        Ok(MarketFiles {
            topology,
            data: DatasetPaths {
                hourly: vec![hourly],
                exchanges: vec![exchanges],
            },
            fuel,
            hydro,
        })
    }
}

#[derive(Debug, Clone)]
pub struct MarketFiles {
    pub topology: PathBuf,
    pub data: DatasetPaths,
    pub fuel: PathBuf,
    pub hydro: PathBuf,
}

struct Zone {
    intercept: f64,
    /// EUR/MWh per MW
    slope: f64,
    max_supply: f64,
    mean_load: f64,
    wind_cap: (f64, f64),
    solar_cap: (f64, f64),
    load_phase: f64,
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Latent AR(1) weather per zone: continental factor plus zone noise.
struct Weather {
    common: f64,
    own: Vec<f64>,
    rho: f64,
    corr: f64,
}

impl Weather {
    fn new(n: usize, profile: &RenewableProfile, rng: &mut ChaCha8Rng, std: &Normal<f64>) -> Self {
        Weather {
            common: std.sample(rng),
            own: (0..n).map(|_| std.sample(rng)).collect(),
            rho: profile.persistence,
            corr: profile.spatial_correlation,
        }
    }

    fn step(&mut self, rng: &mut ChaCha8Rng, std: &Normal<f64>) {
        let s = (1.0 - self.rho * self.rho).sqrt();
        self.common = self.rho * self.common + s * std.sample(rng);
        for v in self.own.iter_mut() {
            *v = self.rho * *v + s * std.sample(rng);
        }
    }

    fn latent(&self, i: usize) -> f64 {
        self.corr * self.common + (1.0 - self.corr * self.corr).sqrt() * self.own[i]
    }
}

/// Per-hour border clearing. `flows[k]` is the export from `borders[k].0` to `.1`.
fn clear_hour(
    residual: &[f64],
    zones: &[Zone],
    borders: &[(usize, usize)],
    limits: &[f64],
    flows: &mut [f64],
) -> Vec<f64> {
    let mut exports = vec![0.0; residual.len()];
    flows.iter_mut().for_each(|f| *f = 0.0);
    let price = |i: usize, x: &[f64]| zones[i].intercept + zones[i].slope * (residual[i] + x[i]);
    for _sweep in 0..500 {
        let mut change: f64 = 0.0;
        for (k, &(a, b)) in borders.iter().enumerate() {
            let delta = (price(b, &exports) - price(a, &exports)) / (zones[a].slope + zones[b].slope);
            let new = (flows[k] + delta).clamp(-limits[k], limits[k]);
            let d = new - flows[k];
            if d != 0.0 {
                flows[k] = new;
                exports[a] += d;
                exports[b] -= d;
                change = change.max(d.abs());
            }
        }
        if change <= 1e-9 {
            break;
        }
    }
    exports
}

/// Simulates `cfg.hours` hours starting at `cfg.start`.
pub fn generate_hourly(cfg: &MeritOrderConfig) -> Result<SyntheticMarket> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let std = Normal::new(0.0, 1.0).expect("unit normal");
    let n = cfg.n_zones;
    let ids: Vec<ZoneId> = (0..n).map(|i| ZoneId(format!("M{:02}", i + 1))).collect();
    let draw = |r: (f64, f64), rng: &mut ChaCha8Rng| if r.1 > r.0 { rng.random_range(r.0..=r.1) } else { r.0 };

    let zones: Vec<Zone> = (0..n)
        .map(|_| {
            let mean_load = draw(cfg.mean_load_mw, &mut rng);
            let share = |p: &RenewableProfile, rng: &mut ChaCha8Rng| {
                let f = rng.random_range(0.5..1.5);
                (p.capacity_share.0 * f * mean_load, p.capacity_share.1 * f * mean_load)
            };
            Zone {
                intercept: draw(cfg.supply_intercept, &mut rng),
                slope: draw(cfg.supply_slope, &mut rng) / mean_load,
                max_supply: cfg.max_supply_share * mean_load,
                mean_load,
                wind_cap: share(&cfg.wind, &mut rng),
                solar_cap: share(&cfg.solar, &mut rng),
                load_phase: rng.random_range(-1.0..1.0),
            }
        })
        .collect();

    // chain plus random chords
    let mut set = std::collections::BTreeSet::new();
    for i in 1..n {
        set.insert((i - 1, i));
    }
    let mut attempts = 0;
    while n > 2 && set.len() < n - 1 + cfg.extra_borders && attempts < 100 * (cfg.extra_borders + 1) {
        attempts += 1;
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if a != b {
            set.insert((a.min(b), a.max(b)));
        }
    }
    let borders: Vec<(usize, usize)> = set.into_iter().collect();
    let limits: Vec<f64> = borders
        .iter()
        .map(|&(a, b)| draw(cfg.interconnector_share, &mut rng) * zones[a].mean_load.min(zones[b].mean_load))
        .collect();

    let h0 = date_start_hour(cfg.start);
    let mut wind_w = Weather::new(n, &cfg.wind, &mut rng, &std);
    let mut solar_w = Weather::new(n, &cfg.solar, &mut rng, &std);
    let mut series: Vec<ZoneSeries> = (0..n).map(|_| ZoneSeries::default()).collect();
    let mut exch: Vec<ExchangeSeries> = borders.iter().map(|_| ExchangeSeries::default()).collect();
    let mut flows = vec![0.0; borders.len()];
    let span = (cfg.hours.max(2) - 1) as f64;

    for k in 0..cfg.hours {
        let hour = h0 + k as i64;
        let dt = hour_to_datetime(hour);
        let hod = dt.hour() as f64;
        let doy = dt.ordinal() as f64;
        let weekend = dt.weekday().number_from_monday() >= 6;
        let progress = k as f64 / span;
        wind_w.step(&mut rng, &std);
        // cloudiness changes slowly; step solar weather every hour anyway
        solar_w.step(&mut rng, &std);

        let wind_shape = 1.0 + cfg.wind.diurnal_amplitude * (2.0 * PI * (hod - 15.0) / 24.0).cos();
        let season = (2.0 * PI * (doy - 172.0) / 365.25).cos();
        let daylight = (PI * (hod + 0.5 - 6.0 - 2.0 * season) / (12.0 + 4.0 * season)).sin().max(0.0);
        let solar_shape = daylight * (0.75 + 0.25 * season);

        let mut load = vec![0.0; n];
        let mut wind = vec![0.0; n];
        let mut solar = vec![0.0; n];
        let mut residual = vec![0.0; n];
        for i in 0..n {
            let z = &zones[i];
            let daily = cfg.load_daily_amplitude * (2.0 * PI * (hod - 18.0 + z.load_phase) / 24.0).cos();
            let seasonal = -cfg.load_seasonal_amplitude * season;
            let dip = if weekend { -cfg.load_weekend_dip } else { 0.0 };
            load[i] = (z.mean_load * (1.0 + daily + seasonal + dip + cfg.load_noise * std.sample(&mut rng)))
                .max(0.05 * z.mean_load);
            let wcap = z.wind_cap.0 + (z.wind_cap.1 - z.wind_cap.0) * progress;
            let scap = z.solar_cap.0 + (z.solar_cap.1 - z.solar_cap.0) * progress;
            let wcf = (logistic(cfg.wind.latent_mean + cfg.wind.latent_sd * wind_w.latent(i)) * wind_shape).min(1.0);
            let scf = solar_shape * logistic(cfg.solar.latent_mean + cfg.solar.latent_sd * solar_w.latent(i));
            wind[i] = wcap * wcf;
            solar[i] = scap * scf;
            residual[i] = load[i] - wind[i] - solar[i];
        }
        let exports = clear_hour(&residual, &zones, &borders, &limits, &mut flows);
        for i in 0..n {
            let conventional = residual[i] + exports[i];
            if conventional > zones[i].max_supply * (1.0 + 1e-12) {
                return Err(Error::Numerical(format!(
                    "infeasible clearing in zone {} at {}: demand for conventional supply {:.1} MW exceeds {:.1} MW",
                    ids[i],
                    crate::ingest::format_timestamp(hour),
                    conventional,
                    zones[i].max_supply
                )));
            }
            let mut price = zones[i].intercept + zones[i].slope * conventional;
            if let Some(floor) = cfg.price_floor {
                price = price.max(floor);
            }
            series[i].push(hour, price, wind[i], solar[i], load[i]);
        }
        for (e, f) in exch.iter_mut().zip(&flows) {
            e.hours.push(hour);
            e.net_export.push(*f);
        }
    }

    let end = hour_to_datetime(h0 + cfg.hours as i64 - 1).date_naive();
    let infos: Vec<ZoneInfo> = ids
        .iter()
        .map(|id| ZoneInfo {
            id: id.clone(),
            start: cfg.start,
            end,
            first_sample_year: cfg.start.year(),
        })
        .collect();
    let topology = ZoneTopology::new(infos, borders.iter().map(|&(a, b)| (ids[a].clone(), ids[b].clone())).collect())?;

    let mut store = HourlyStore::default();
    for (id, s) in ids.iter().zip(series) {
        store.zones.insert(id.clone(), s);
    }
    for (&(a, b), e) in borders.iter().zip(exch) {
        let (border, reversed) = Border::canonical(&ids[a], &ids[b]);
        let e = if reversed {
            ExchangeSeries {
                hours: e.hours,
                net_export: e.net_export.iter().map(|v| -v).collect(),
            }
        } else {
            e
        };
        store.exchanges.insert(border, e);
    }

    // monthly fuel prices and yearly hydro capacities
    let mut fuel = FuelPriceSeries::default();
    let (y0, m0) = (cfg.start.year(), cfg.start.month());
    let (y1, m1) = (end.year(), end.month());
    let (mut y, mut m) = (y0, m0);
    let (mut gas, mut coal) = (20.0_f64, 10.0_f64);
    loop {
        gas = (gas * (1.0 + 0.05 * std.sample(&mut rng))).max(2.0);
        coal = (coal * (1.0 + 0.03 * std.sample(&mut rng))).max(2.0);
        let eua = 25.0 + 10.0 * ((y - y0) as f64) + 2.0 * std.sample(&mut rng).abs();
        fuel.months.insert((y, m), FuelPrice { gas, coal, eua });
        if (y, m) == (y1, m1) {
            break;
        }
        m += 1;
        if m > 12 {
            m = 1;
            y += 1;
        }
    }
    let mut hydro = HydroCapacities::default();
    for (id, z) in ids.iter().zip(&zones) {
        let p = rng.random_range(0.0..=cfg.pumped_share) * z.mean_load;
        let r = rng.random_range(0.0..=cfg.reservoir_share) * z.mean_load * rng.random_range(0.0..1.0_f64);
        for year in y0..=y1 {
            let g = 1.0 + 0.02 * (year - y0) as f64;
            hydro.by_zone_year.insert(
                (id.clone(), year),
                HydroCapacity {
                    pumped_storage_mw: p * g,
                    reservoir_mw: r * g,
                },
            );
        }
    }
    Ok(SyntheticMarket {
        inputs: RawInputs {
            topology,
            store,
            fuel,
            hydro,
        },
    })
}
