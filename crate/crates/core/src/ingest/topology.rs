use std::collections::{BTreeMap, BTreeSet};
use std::ops::Range;
use std::path::Path;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{date_start_hour, HourIndex, ZoneId};

/// Lifecycle of one bidding zone. Both dates are inclusive.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZoneInfo {
    pub id: ZoneId,
    pub start: NaiveDate,
    pub end: NaiveDate,
    pub first_sample_year: i32,
}

impl ZoneInfo {
    pub fn hours(&self) -> Range<HourIndex> {
        date_start_hour(self.start)..date_start_hour(self.end) + 24
    }
}

/// Unordered pair of adjacent zones, stored with the smaller id first.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Border(pub ZoneId, pub ZoneId);

impl Border {
    /// Canonical border for a pair plus whether `(a, b)` was reversed.
    pub fn canonical(a: &ZoneId, b: &ZoneId) -> (Border, bool) {
        if a <= b {
            (Border(a.clone(), b.clone()), false)
        } else {
            (Border(b.clone(), a.clone()), true)
        }
    }
}

impl std::fmt::Display for Border {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}-{}", self.0, self.1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ZoneTopology {
    zones: BTreeMap<ZoneId, ZoneInfo>,
    neighbors: BTreeSet<Border>,
}

#[derive(Debug, Deserialize, Serialize)]
struct TopologyFile {
    zones: Vec<ZoneEntry>,
    #[serde(default)]
    neighbors: Vec<(String, String)>,
}

#[derive(Debug, Deserialize, Serialize)]
struct ZoneEntry {
    id: String,
    start: NaiveDate,
    end: NaiveDate,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    first_sample_year: Option<i32>,
}

impl ZoneTopology {
    /// Builds and validates a topology. `first_sample_year` defaults to the start year.
    pub fn new(zones: Vec<ZoneInfo>, pairs: Vec<(ZoneId, ZoneId)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for z in zones {
            if z.end < z.start {
                return Err(Error::Config(format!("zone {} ends before it starts", z.id)));
            }
            if z.first_sample_year < z.start.year() || z.first_sample_year > z.end.year() {
                return Err(Error::Config(format!(
                    "zone {}: first_sample_year {} outside lifecycle {}..{}",
                    z.id, z.first_sample_year, z.start, z.end
                )));
            }
            if map.insert(z.id.clone(), z).is_some() {
                return Err(Error::Config("duplicate zone in topology".into()));
            }
        }
        let mut neighbors = BTreeSet::new();
        for (a, b) in pairs {
            if a == b {
                return Err(Error::Config(format!("self-pair {a}-{b} in topology")));
            }
            for z in [&a, &b] {
                if !map.contains_key(z) {
                    return Err(Error::Config(format!("neighbor pair names unknown zone {z}")));
                }
            }
            neighbors.insert(Border::canonical(&a, &b).0);
        }
        Ok(ZoneTopology {
            zones: map,
            neighbors,
        })
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: TopologyFile =
            toml::from_str(text).map_err(|e| Error::Config(format!("topology: {e}")))?;
        let zones = file
            .zones
            .into_iter()
            .map(|z| ZoneInfo {
                first_sample_year: z.first_sample_year.unwrap_or(z.start.year()),
                id: ZoneId(z.id),
                start: z.start,
                end: z.end,
            })
            .collect();
        let pairs = file
            .neighbors
            .into_iter()
            .map(|(a, b)| (ZoneId(a), ZoneId(b)))
            .collect();
        Self::new(zones, pairs)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        let file = TopologyFile {
            zones: self
                .zones
                .values()
                .map(|z| ZoneEntry {
                    id: z.id.0.clone(),
                    start: z.start,
                    end: z.end,
                    first_sample_year: Some(z.first_sample_year),
                })
                .collect(),
            neighbors: self
                .neighbors
                .iter()
                .map(|b| (b.0 .0.clone(), b.1 .0.clone()))
                .collect(),
        };
        toml::to_string(&file).expect("topology serializes")
    }

    pub fn zone(&self, id: &ZoneId) -> Option<&ZoneInfo> {
        self.zones.get(id)
    }

    pub fn zones(&self) -> impl Iterator<Item = &ZoneInfo> {
        self.zones.values()
    }

    pub fn zone_ids(&self) -> impl Iterator<Item = &ZoneId> {
        self.zones.keys()
    }

    pub fn borders(&self) -> impl Iterator<Item = &Border> {
        self.neighbors.iter()
    }

    pub fn are_adjacent(&self, a: &ZoneId, b: &ZoneId) -> bool {
        self.neighbors.contains(&Border::canonical(a, b).0)
    }

    /// Direct neighbors of `zone`, sorted.
    pub fn neighbors_of(&self, zone: &ZoneId) -> Vec<ZoneId> {
        self.neighbors
            .iter()
            .filter_map(|b| {
                if &b.0 == zone {
                    Some(b.1.clone())
                } else if &b.1 == zone {
                    Some(b.0.clone())
                } else {
                    None
                }
            })
            .collect()
    }

    pub fn in_lifecycle(&self, zone: &ZoneId, hour: HourIndex) -> bool {
        self.zones
            .get(zone)
            .is_some_and(|z| z.hours().contains(&hour))
    }
}
