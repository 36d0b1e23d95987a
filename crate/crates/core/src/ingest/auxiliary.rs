//! Monthly fuel prices and annual hydro capacities.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use super::hourly::csv_rows;
use super::topology::ZoneTopology;
use crate::error::{Error, Result};
use crate::types::{Period, ZoneId};

pub const FUEL_HEADER: [&str; 4] = ["month", "gas", "coal", "eua"];
pub const HYDRO_HEADER: [&str; 4] = ["zone", "year", "pumped_mw", "reservoir_mw"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FuelPrice {
    /// currency/MWh_th
    pub gas: f64,
    /// currency/MWh_th
    pub coal: f64,
    /// currency/tCO2
    pub eua: f64,
}

/// One row per month, contiguous.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FuelPriceSeries {
    pub months: BTreeMap<(i32, u32), FuelPrice>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HydroCapacity {
    pub pumped_storage_mw: f64,
    pub reservoir_mw: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct HydroCapacities {
    pub by_zone_year: BTreeMap<(ZoneId, i32), HydroCapacity>,
}

fn number(raw: &str, at: &crate::error::SourceLine, what: &str) -> Result<f64> {
    let v: f64 = raw.parse().map_err(|_| Error::MalformedRow {
        at: at.clone(),
        message: format!("{what}: '{raw}' is not a number"),
    })?;
    if !v.is_finite() || v < 0.0 {
        return Err(Error::MalformedRow {
            at: at.clone(),
            message: format!("{what} must be finite and non-negative"),
        });
    }
    Ok(v)
}

impl FuelPriceSeries {
    pub fn load(path: &Path) -> Result<Self> {
        let mut months = BTreeMap::new();
        for (at, rec) in csv_rows(path, &FUEL_HEADER)? {
            let period: Period = rec[0].parse().map_err(|_| Error::MalformedRow {
                at: at.clone(),
                message: format!("month '{}' is not YYYY-MM", &rec[0]),
            })?;
            let Period::Month { year, month } = period else {
                return Err(Error::MalformedRow {
                    at,
                    message: format!("month '{}' is not YYYY-MM", &rec[0]),
                });
            };
            let row = FuelPrice {
                gas: number(&rec[1], &at, "gas")?,
                coal: number(&rec[2], &at, "coal")?,
                eua: number(&rec[3], &at, "eua")?,
            };
            if months.insert((year, month), row).is_some() {
                return Err(Error::MalformedRow {
                    at,
                    message: format!("duplicate month {}", &rec[0]),
                });
            }
        }
        let series = FuelPriceSeries { months };
        series.check_contiguous()?;
        Ok(series)
    }

    fn check_contiguous(&self) -> Result<()> {
        let keys: Vec<_> = self.months.keys().collect();
        for w in keys.windows(2) {
            let a = w[0].0 * 12 + w[0].1 as i32;
            let b = w[1].0 * 12 + w[1].1 as i32;
            if b - a != 1 {
                return Err(Error::Data(format!(
                    "fuel price series has a gap after {:04}-{:02}",
                    w[0].0, w[0].1
                )));
            }
        }
        Ok(())
    }

    pub fn get(&self, year: i32, month: u32) -> Option<&FuelPrice> {
        self.months.get(&(year, month))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut out = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut text = format!("{}\n", FUEL_HEADER.join(","));
        for ((y, m), p) in &self.months {
            text.push_str(&format!("{y:04}-{m:02},{},{},{}\n", p.gas, p.coal, p.eua));
        }
        out.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
    }
}

impl HydroCapacities {
    pub fn load(path: &Path, topology: &ZoneTopology) -> Result<Self> {
        let mut by_zone_year = BTreeMap::new();
        for (at, rec) in csv_rows(path, &HYDRO_HEADER)? {
            let zone = ZoneId::new(&rec[0]);
            if topology.zone(&zone).is_none() {
                return Err(Error::UnknownZone { zone: zone.0, at });
            }
            let year: i32 = rec[1].parse().map_err(|_| Error::MalformedRow {
                at: at.clone(),
                message: format!("year '{}' is not an integer", &rec[1]),
            })?;
            let cap = HydroCapacity {
                pumped_storage_mw: number(&rec[2], &at, "pumped_mw")?,
                reservoir_mw: number(&rec[3], &at, "reservoir_mw")?,
            };
            if by_zone_year.insert((zone.clone(), year), cap).is_some() {
                return Err(Error::MalformedRow {
                    at,
                    message: format!("duplicate hydro row for {zone} {year}"),
                });
            }
        }
        Ok(HydroCapacities { by_zone_year })
    }

    pub fn get(&self, zone: &ZoneId, year: i32) -> Option<&HydroCapacity> {
        self.by_zone_year.get(&(zone.clone(), year))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut out = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut text = format!("{}\n", HYDRO_HEADER.join(","));
        for ((z, y), c) in &self.by_zone_year {
            text.push_str(&format!("{z},{y},{},{}\n", c.pumped_storage_mw, c.reservoir_mw));
        }
        out.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
    }
}
