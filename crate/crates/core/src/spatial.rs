//! Spatial weights over direct neighbors and the spatially lagged
//! (neighboring) penetration.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::ZoneTopology;
use crate::metrics::IcTable;
use crate::types::{Period, ZoneId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightScheme {
    /// Row-normalized interconnector capacities.
    IcWeighted,
    /// Equal weight on every direct neighbor.
    BinaryUniform,
}

impl WeightScheme {
    pub fn as_str(self) -> &'static str {
        match self {
            WeightScheme::IcWeighted => "ic_weighted",
            WeightScheme::BinaryUniform => "binary_uniform",
        }
    }
}

impl fmt::Display for WeightScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for WeightScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ic_weighted" => Ok(WeightScheme::IcWeighted),
            "binary_uniform" => Ok(WeightScheme::BinaryUniform),
            other => Err(Error::Config(format!("unknown weight scheme '{other}'"))),
        }
    }
}

/// Weights of one focal zone over its direct neighbors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialWeights {
    pub focal: ZoneId,
    pub scheme: WeightScheme,
    pub weights: BTreeMap<ZoneId, f64>,
}

impl SpatialWeights {
    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightsSet {
    pub scheme: WeightScheme,
    pub by_zone: BTreeMap<ZoneId, SpatialWeights>,
    /// Zones whose spatial lag is undefined (no neighbors, or no positive capacity).
    pub flagged: Vec<ZoneId>,
}

impl WeightsSet {
    pub fn get(&self, zone: &ZoneId) -> Option<&SpatialWeights> {
        self.by_zone.get(zone).filter(|w| !w.is_empty())
    }

    /// Edge list `focal,neighbor,scheme,weight`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut text = String::from("focal,neighbor,scheme,weight\n");
        for w in self.by_zone.values() {
            for (nb, v) in &w.weights {
                text.push_str(&format!("{},{},{},{}\n", w.focal, nb, self.scheme, v));
            }
        }
        std::fs::File::create(path)
            .and_then(|mut f| f.write_all(text.as_bytes()))
            .map_err(|e| Error::io(path, e))
    }
}

/// Builds time-invariant weights for every zone of the topology.
pub fn build_weights(topology: &ZoneTopology, ic: &IcTable, scheme: WeightScheme) -> WeightsSet {
    let mut by_zone = BTreeMap::new();
    let mut flagged = Vec::new();
    for zone in topology.zone_ids() {
        let neighbors = topology.neighbors_of(zone);
        let mut weights = BTreeMap::new();
        match scheme {
            WeightScheme::BinaryUniform => {
                let j = neighbors.len() as f64;
                for nb in &neighbors {
                    weights.insert(nb.clone(), 1.0 / j);
                }
            }
            WeightScheme::IcWeighted => {
                let caps: Vec<(ZoneId, f64)> = neighbors
                    .iter()
                    .map(|nb| {
                        let c = ic.pair(zone, nb).map_or(0.0, |p| p.ic_mw.max(0.0));
                        (nb.clone(), c)
                    })
                    .collect();
                let total: f64 = caps.iter().map(|c| c.1).sum();
                if total > 0.0 {
                    for (nb, c) in caps {
                        weights.insert(nb, c / total);
                    }
                }
            }
        }
        if weights.is_empty() {
            log::warn!("zone {zone}: spatial lag undefined under {scheme}");
            flagged.push(zone.clone());
        }
        by_zone.insert(
            zone.clone(),
            SpatialWeights {
                focal: zone.clone(),
                scheme,
                weights,
            },
        );
    }
    WeightsSet {
        scheme,
        by_zone,
        flagged,
    }
}

/// Σ_j w_ij · P_j for one focal zone and period.
///
/// Returns `None` when a positively weighted neighbor has no value; neighbors
/// with zero weight never block the observation.
pub fn spatial_lag_at<F>(weights: &SpatialWeights, mut value: F) -> Option<f64>
where
    F: FnMut(&ZoneId) -> Option<f64>,
{
    if weights.is_empty() {
        return None;
    }
    let mut acc = 0.0;
    for (nb, &w) in &weights.weights {
        if w == 0.0 {
            continue;
        }
        acc += w * value(nb)?;
    }
    Some(acc)
}

/// Spatial lag of a per-zone-period variable for every focal zone-period that
/// has a value itself. Missing lags are reported in the second return value.
pub fn spatial_lag(
    weights: &WeightsSet,
    values: &BTreeMap<(ZoneId, Period), f64>,
) -> (BTreeMap<(ZoneId, Period), f64>, Vec<(ZoneId, Period)>) {
    let mut out = BTreeMap::new();
    let mut missing = Vec::new();
    for (zone, period) in values.keys() {
        let lag = weights.get(zone).and_then(|w| {
            spatial_lag_at(w, |nb| values.get(&(nb.clone(), *period)).copied())
        });
        match lag {
            Some(v) => {
                out.insert((zone.clone(), *period), v);
            }
            None => missing.push((zone.clone(), *period)),
        }
    }
    (out, missing)
}
