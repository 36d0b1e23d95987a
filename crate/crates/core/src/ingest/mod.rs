//! Loading and validation of hourly zonal data, exchanges, topology, fuel
//! prices and hydro capacities.

mod auxiliary;
mod hourly;
mod topology;

pub use auxiliary::{FuelPrice, FuelPriceSeries, HydroCapacities, HydroCapacity, FUEL_HEADER, HYDRO_HEADER};
pub use hourly::{
    coverage, format_timestamp, load_dataset, parse_timestamp, DatasetPaths, ExchangeSeries, Gap,
    HourlyRecord, HourlyStore, LoadReport, Rejection, ZoneLoadStats, ZoneSeries, EXCHANGE_HEADER,
    HOURLY_HEADER,
};
pub use topology::{Border, ZoneInfo, ZoneTopology};
pub(crate) use hourly::csv_rows;

use std::path::Path;

/// Everything the metrics stage needs, loaded from disk.
#[derive(Debug, Clone)]
pub struct RawInputs {
    pub topology: ZoneTopology,
    pub store: HourlyStore,
    pub fuel: FuelPriceSeries,
    pub hydro: HydroCapacities,
}

impl RawInputs {
    pub fn load(
        topology_path: &Path,
        paths: &DatasetPaths,
        fuel_path: &Path,
        hydro_path: &Path,
    ) -> crate::Result<(Self, LoadReport)> {
        let topology = ZoneTopology::load(topology_path)?;
        let (store, report) = load_dataset(paths, &topology)?;
        let fuel = FuelPriceSeries::load(fuel_path)?;
        let hydro = HydroCapacities::load(hydro_path, &topology)?;
        Ok((
            RawInputs {
                topology,
                store,
                fuel,
                hydro,
            },
            report,
        ))
    }
}
