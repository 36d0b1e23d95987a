use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::quantile;
use crate::ingest::{HourlyStore, ZoneTopology};
use crate::types::{stable_mean, Period, ZoneId};

/// Quantile of absolute hourly net exports used as the capacity proxy.
pub const IC_QUANTILE: f64 = 0.95;

/// Directed capacity proxy of one border, seen from the focal zone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterconnectorCapacity {
    pub from_zone: ZoneId,
    pub to_zone: ZoneId,
    pub ic_mw: f64,
    /// `ic_mw` over the focal zone's mean hourly load in its first sample year.
    pub ic_normalized: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoneInterconnection {
    pub zone: ZoneId,
    pub ic_mw: f64,
    pub mean_load: f64,
    pub ic_normalized: f64,
}

/// Time-invariant interconnector capacities, computed once from first-sample-year data.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IcTable {
    pub pairs: Vec<InterconnectorCapacity>,
    pub zones: BTreeMap<ZoneId, ZoneInterconnection>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl IcTable {
    pub fn pair(&self, from: &ZoneId, to: &ZoneId) -> Option<&InterconnectorCapacity> {
        self.pairs
            .iter()
            .find(|p| &p.from_zone == from && &p.to_zone == to)
    }

    pub fn normalized(&self, zone: &ZoneId) -> Option<f64> {
        self.zones.get(zone).map(|z| z.ic_normalized)
    }
}

/// Q95 of |net exports| per border over each focal zone's first sample year,
/// summed per zone and normalized by that year's mean hourly load.
///
/// Zones without load data in their first year are left out of the zone totals.
pub fn interconnector_proxy(store: &HourlyStore, topology: &ZoneTopology) -> IcTable {
    let mut table = IcTable::default();
    for zone in topology.zones() {
        let year = Period::Year(zone.first_sample_year).hours();
        let mean_load = store
            .series(&zone.id)
            .map(|s| stable_mean(&s.load[s.index_range(year.clone())]))
            .filter(|m| m.is_finite() && *m > 0.0);
        let mut total = 0.0;
        for nb in topology.neighbors_of(&zone.id) {
            let flows: Vec<f64> = store
                .net_exports(&zone.id, &nb, year.clone())
                .into_iter()
                .map(f64::abs)
                .collect();
            let ic_mw = match quantile(&flows, IC_QUANTILE) {
                Some(v) => v,
                None => {
                    let msg = format!(
                        "no exchange data {}->{} in {}; capacity set to 0",
                        zone.id, nb, zone.first_sample_year
                    );
                    log::warn!("{msg}");
                    table.warnings.push(msg);
                    0.0
                }
            };
            total += ic_mw;
            table.pairs.push(InterconnectorCapacity {
                from_zone: zone.id.clone(),
                to_zone: nb,
                ic_mw,
                ic_normalized: mean_load.map_or(f64::NAN, |m| ic_mw / m),
            });
        }
        match mean_load {
            Some(m) => {
                table.zones.insert(
                    zone.id.clone(),
                    ZoneInterconnection {
                        zone: zone.id.clone(),
                        ic_mw: total,
                        mean_load: m,
                        ic_normalized: total / m,
                    },
                );
            }
            None => {
                let msg = format!(
                    "zone {} has no load data in first sample year {}",
                    zone.id, zone.first_sample_year
                );
                log::warn!("{msg}");
                table.warnings.push(msg);
            }
        }
    }
    table
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{Border, ExchangeSeries, ZoneInfo, ZoneSeries};
    use chrono::NaiveDate;

    fn topo() -> ZoneTopology {
        let d = |y, m, d| NaiveDate::from_ymd_opt(y, m, d).unwrap();
        ZoneTopology::new(
            vec![
                ZoneInfo { id: "A".into(), start: d(2019, 1, 1), end: d(2020, 12, 31), first_sample_year: 2019 },
                ZoneInfo { id: "B".into(), start: d(2019, 1, 1), end: d(2020, 12, 31), first_sample_year: 2019 },
                ZoneInfo { id: "C".into(), start: d(2019, 1, 1), end: d(2020, 12, 31), first_sample_year: 2019 },
            ],
            vec![("A".into(), "B".into()), ("B".into(), "C".into())],
        )
        .unwrap()
    }

    #[test]
    fn constant_flow_and_normalization() {
        let t = topo();
        let year = Period::Year(2019).hours();
        let mut store = HourlyStore::default();
        for z in ["A", "B", "C"] {
            let mut s = ZoneSeries::default();
            for h in year.clone() {
                s.push(h, 40.0, 1.0, 0.0, 1000.0);
            }
            store.zones.insert(z.into(), s);
        }
        // A exports 500 to B every hour; B->C flows exist only in 2020
        store.exchanges.insert(
            Border("A".into(), "B".into()),
            ExchangeSeries { hours: year.clone().collect(), net_export: vec![500.0; year.clone().count()] },
        );
        let ic = interconnector_proxy(&store, &t);
        assert_eq!(ic.pair(&"A".into(), &"B".into()).unwrap().ic_mw, 500.0);
        assert_eq!(ic.pair(&"B".into(), &"A".into()).unwrap().ic_mw, 500.0);
        assert_eq!(ic.normalized(&"A".into()).unwrap(), 0.5);
        // B-C has no data -> zero with a warning
        assert_eq!(ic.pair(&"B".into(), &"C".into()).unwrap().ic_mw, 0.0);
        assert!(!ic.warnings.is_empty());
        assert_eq!(ic.normalized(&"C".into()).unwrap(), 0.0);
    }
}
