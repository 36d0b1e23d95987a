use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::ops::Range;
use std::path::{Path, PathBuf};

use chrono::{DateTime, NaiveDateTime, Timelike, Utc};
use rayon::prelude::*;
use serde::Serialize;

use super::topology::{Border, ZoneTopology};
use crate::error::{Error, Result, SourceLine};
use crate::types::{hour_index, hour_to_datetime, HourIndex, Period, ZoneId};

pub const HOURLY_HEADER: [&str; 6] = ["zone", "timestamp_utc", "price", "wind_gen", "solar_gen", "load"];
pub const EXCHANGE_HEADER: [&str; 4] = ["zone_from", "zone_to", "timestamp_utc", "net_export"];

/// One zone-hour as it appears in the hourly file.
#[derive(Debug, Clone, PartialEq)]
pub struct HourlyRecord {
    pub zone: ZoneId,
    pub hour: HourIndex,
    pub price: f64,
    pub wind_gen: f64,
    pub solar_gen: f64,
    pub load: f64,
}

/// Column-oriented, hour-sorted series of one zone.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ZoneSeries {
    pub hours: Vec<HourIndex>,
    pub price: Vec<f64>,
    pub wind: Vec<f64>,
    pub solar: Vec<f64>,
    pub load: Vec<f64>,
}

impl ZoneSeries {
    pub fn len(&self) -> usize {
        self.hours.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hours.is_empty()
    }

    /// Index range of the rows whose hour falls in `hours`.
    pub fn index_range(&self, hours: Range<HourIndex>) -> Range<usize> {
        let lo = self.hours.partition_point(|&h| h < hours.start);
        let hi = self.hours.partition_point(|&h| h < hours.end);
        lo..hi
    }

    pub fn push(&mut self, hour: HourIndex, price: f64, wind: f64, solar: f64, load: f64) {
        self.hours.push(hour);
        self.price.push(price);
        self.wind.push(wind);
        self.solar.push(solar);
        self.load.push(load);
    }
}

/// Net exports on one border, signed from `border.0` towards `border.1`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExchangeSeries {
    pub hours: Vec<HourIndex>,
    pub net_export: Vec<f64>,
}

impl ExchangeSeries {
    pub fn index_range(&self, hours: Range<HourIndex>) -> Range<usize> {
        let lo = self.hours.partition_point(|&h| h < hours.start);
        let hi = self.hours.partition_point(|&h| h < hours.end);
        lo..hi
    }
}

/// Immutable store of hourly records keyed by (zone, hour) plus border exchanges.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct HourlyStore {
    pub zones: BTreeMap<ZoneId, ZoneSeries>,
    pub exchanges: BTreeMap<Border, ExchangeSeries>,
}

impl HourlyStore {
    pub fn series(&self, zone: &ZoneId) -> Option<&ZoneSeries> {
        self.zones.get(zone)
    }

    pub fn total_rows(&self) -> usize {
        self.zones.values().map(ZoneSeries::len).sum()
    }

    /// Net exports of `from` towards `to` over an hour range, re-signed for direction.
    pub fn net_exports(&self, from: &ZoneId, to: &ZoneId, hours: Range<HourIndex>) -> Vec<f64> {
        let (border, reversed) = Border::canonical(from, to);
        let Some(series) = self.exchanges.get(&border) else {
            return Vec::new();
        };
        let r = series.index_range(hours);
        series.net_export[r]
            .iter()
            .map(|&v| if reversed { -v } else { v })
            .collect()
    }

    /// Per-border net exports of `zone` at one hour.
    pub fn net_exports_at(&self, zone: &ZoneId, hour: HourIndex) -> BTreeMap<ZoneId, f64> {
        let mut out = BTreeMap::new();
        for (border, series) in &self.exchanges {
            let (other, sign) = if &border.0 == zone {
                (&border.1, 1.0)
            } else if &border.1 == zone {
                (&border.0, -1.0)
            } else {
                continue;
            };
            if let Ok(i) = series.hours.binary_search(&hour) {
                out.insert(other.clone(), sign * series.net_export[i]);
            }
        }
        out
    }

    pub fn records(&self, zone: &ZoneId) -> impl Iterator<Item = HourlyRecord> + '_ {
        let z = zone.clone();
        self.zones.get(zone).into_iter().flat_map(move |s| {
            let z = z.clone();
            (0..s.len()).map(move |i| HourlyRecord {
                zone: z.clone(),
                hour: s.hours[i],
                price: s.price[i],
                wind_gen: s.wind[i],
                solar_gen: s.solar[i],
                load: s.load[i],
            })
        })
    }

    /// Writes `hourly.csv` and `exchanges.csv` into `dir` in the ingest schema.
    pub fn write(&self, dir: &Path) -> Result<(PathBuf, PathBuf)> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let hourly = dir.join("hourly.csv");
        let mut out = std::io::BufWriter::new(
            std::fs::File::create(&hourly).map_err(|e| Error::io(&hourly, e))?,
        );
        let io = |e| Error::io(&hourly, e);
        writeln!(out, "{}", HOURLY_HEADER.join(",")).map_err(io)?;
        for (zone, s) in &self.zones {
            for i in 0..s.len() {
                writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    zone,
                    format_timestamp(s.hours[i]),
                    s.price[i],
                    s.wind[i],
                    s.solar[i],
                    s.load[i]
                )
                .map_err(io)?;
            }
        }
        out.flush().map_err(io)?;

        let exchanges = dir.join("exchanges.csv");
        let mut out = std::io::BufWriter::new(
            std::fs::File::create(&exchanges).map_err(|e| Error::io(&exchanges, e))?,
        );
        let io = |e| Error::io(&exchanges, e);
        writeln!(out, "{}", EXCHANGE_HEADER.join(",")).map_err(io)?;
        for (border, s) in &self.exchanges {
            for i in 0..s.hours.len() {
                writeln!(
                    out,
                    "{},{},{},{}",
                    border.0,
                    border.1,
                    format_timestamp(s.hours[i]),
                    s.net_export[i]
                )
                .map_err(io)?;
            }
        }
        out.flush().map_err(io)?;
        Ok((hourly, exchanges))
    }
}

pub fn format_timestamp(hour: HourIndex) -> String {
    hour_to_datetime(hour).format("%Y-%m-%dT%H:%M:%SZ").to_string()
}

/// Parses a UTC hour stamp. Naive (offset-free) stamps are rejected as ambiguous.
pub fn parse_timestamp(raw: &str, at: &SourceLine) -> Result<HourIndex> {
    let raw = raw.trim();
    let dt: DateTime<Utc> = match DateTime::parse_from_rfc3339(raw) {
        Ok(dt) => dt.with_timezone(&Utc),
        Err(_) => {
            let naive = ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"]
                .iter()
                .any(|f| NaiveDateTime::parse_from_str(raw, f).is_ok());
            return Err(if naive {
                Error::AmbiguousTimestamp {
                    value: raw.to_string(),
                    at: at.clone(),
                }
            } else {
                Error::MalformedRow {
                    at: at.clone(),
                    message: format!("unparseable timestamp '{raw}'"),
                }
            });
        }
    };
    if dt.minute() != 0 || dt.second() != 0 || dt.nanosecond() != 0 {
        return Err(Error::MalformedRow {
            at: at.clone(),
            message: format!("timestamp '{raw}' is not on the hour"),
        });
    }
    Ok(hour_index(dt))
}

fn parse_number(raw: &str, column: &str, at: &SourceLine) -> Result<f64> {
    let v: f64 = raw.trim().parse().map_err(|_| Error::MalformedRow {
        at: at.clone(),
        message: format!("column {column}: '{raw}' is not a number"),
    })?;
    if !v.is_finite() {
        return Err(Error::MalformedRow {
            at: at.clone(),
            message: format!("column {column}: non-finite value"),
        });
    }
    Ok(v)
}

pub(crate) fn open_csv(path: &Path, header: &[&str]) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let found = reader
        .headers()
        .map_err(|e| Error::MalformedRow {
            at: SourceLine {
                file: path.to_path_buf(),
                line: 1,
            },
            message: e.to_string(),
        })?
        .clone();
    if found.iter().collect::<Vec<_>>() != header {
        return Err(Error::MalformedRow {
            at: SourceLine {
                file: path.to_path_buf(),
                line: 1,
            },
            message: format!("expected header '{}'", header.join(",")),
        });
    }
    Ok(reader)
}

pub(crate) fn csv_rows(
    path: &Path,
    header: &[&str],
) -> Result<Vec<(SourceLine, csv::StringRecord)>> {
    let mut reader = open_csv(path, header)?;
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            Error::MalformedRow {
                at: SourceLine {
                    file: path.to_path_buf(),
                    line,
                },
                message: e.to_string(),
            }
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() != header.len() {
            return Err(Error::MalformedRow {
                at: SourceLine {
                    file: path.to_path_buf(),
                    line,
                },
                message: format!("expected {} fields, found {}", header.len(), rec.len()),
            });
        }
        rows.push((
            SourceLine {
                file: path.to_path_buf(),
                line,
            },
            rec,
        ));
    }
    Ok(rows)
}

/// Input files for one dataset.
#[derive(Debug, Clone, Default)]
pub struct DatasetPaths {
    pub hourly: Vec<PathBuf>,
    pub exchanges: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Rejection {
    pub at: String,
    pub zone: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Gap {
    pub from: String,
    pub to: String,
    pub missing_hours: i64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ZoneLoadStats {
    pub rows: usize,
    pub rejected: usize,
    pub first: Option<String>,
    pub last: Option<String>,
    pub gaps: Vec<Gap>,
}

/// Summary of an ingest run.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct LoadReport {
    pub total_rows: usize,
    pub zones: BTreeMap<ZoneId, ZoneLoadStats>,
    pub borders: BTreeMap<String, usize>,
    pub rejections: Vec<Rejection>,
}

struct ParsedHourly {
    at: SourceLine,
    rec: HourlyRecord,
}

fn parse_hourly_file(path: &Path, topology: &ZoneTopology) -> Result<Vec<ParsedHourly>> {
    let mut out = Vec::new();
    for (at, rec) in csv_rows(path, &HOURLY_HEADER)? {
        let zone = ZoneId::new(&rec[0]);
        if topology.zone(&zone).is_none() {
            return Err(Error::UnknownZone {
                zone: zone.0,
                at,
            });
        }
        let hour = parse_timestamp(&rec[1], &at)?;
        let price = parse_number(&rec[2], "price", &at)?;
        let wind_gen = parse_number(&rec[3], "wind_gen", &at)?;
        let solar_gen = parse_number(&rec[4], "solar_gen", &at)?;
        let load = parse_number(&rec[5], "load", &at)?;
        out.push(ParsedHourly {
            at,
            rec: HourlyRecord {
                zone,
                hour,
                price,
                wind_gen,
                solar_gen,
                load,
            },
        });
    }
    Ok(out)
}

struct ParsedExchange {
    at: SourceLine,
    border: Border,
    hour: HourIndex,
    net_export: f64,
}

fn parse_exchange_file(path: &Path, topology: &ZoneTopology) -> Result<Vec<ParsedExchange>> {
    let mut out = Vec::new();
    for (at, rec) in csv_rows(path, &EXCHANGE_HEADER)? {
        let from = ZoneId::new(&rec[0]);
        let to = ZoneId::new(&rec[1]);
        for z in [&from, &to] {
            if topology.zone(z).is_none() {
                return Err(Error::UnknownZone {
                    zone: z.0.clone(),
                    at,
                });
            }
        }
        if !topology.are_adjacent(&from, &to) {
            return Err(Error::MalformedRow {
                at,
                message: format!("exchange between non-adjacent zones {from} and {to}"),
            });
        }
        let hour = parse_timestamp(&rec[2], &at)?;
        let v = parse_number(&rec[3], "net_export", &at)?;
        let (border, reversed) = Border::canonical(&from, &to);
        out.push(ParsedExchange {
            at,
            border,
            hour,
            net_export: if reversed { -v } else { v },
        });
    }
    Ok(out)
}

/// Loads and validates hourly and exchange files against the topology.
///
/// Files are parsed in parallel and merged in the order given, so the
/// resulting store and report do not depend on the thread count.
pub fn load_dataset(paths: &DatasetPaths, topology: &ZoneTopology) -> Result<(HourlyStore, LoadReport)> {
    let parsed: Vec<Vec<ParsedHourly>> = paths
        .hourly
        .par_iter()
        .map(|p| parse_hourly_file(p, topology))
        .collect::<Result<_>>()?;
    let parsed_ex: Vec<Vec<ParsedExchange>> = paths
        .exchanges
        .par_iter()
        .map(|p| parse_exchange_file(p, topology))
        .collect::<Result<_>>()?;

    let mut report = LoadReport::default();
    for z in topology.zone_ids() {
        report.zones.insert(z.clone(), ZoneLoadStats::default());
    }

    let mut seen: HashMap<(ZoneId, HourIndex), SourceLine> = HashMap::new();
    let mut retained: BTreeMap<ZoneId, Vec<HourlyRecord>> = BTreeMap::new();
    for row in parsed.into_iter().flatten() {
        let key = (row.rec.zone.clone(), row.rec.hour);
        if let Some(first) = seen.get(&key) {
            return Err(Error::DuplicateRecord {
                key: format!("({}, {})", key.0, format_timestamp(key.1)),
                first: first.clone(),
                second: row.at,
            });
        }
        seen.insert(key, row.at.clone());
        let r = &row.rec;
        let reason = if !topology.in_lifecycle(&r.zone, r.hour) {
            Some("outside zone lifecycle")
        } else if r.load <= 0.0 {
            Some("non-positive load")
        } else if r.wind_gen < 0.0 || r.solar_gen < 0.0 {
            Some("negative generation")
        } else {
            None
        };
        if let Some(reason) = reason {
            report.zones.get_mut(&r.zone).unwrap().rejected += 1;
            report.rejections.push(Rejection {
                at: row.at.to_string(),
                zone: r.zone.0.clone(),
                reason: reason.to_string(),
            });
            continue;
        }
        retained.entry(row.rec.zone.clone()).or_default().push(row.rec);
    }

    let mut store = HourlyStore::default();
    for (zone, mut recs) in retained {
        recs.sort_by_key(|r| r.hour);
        let stats = report.zones.get_mut(&zone).unwrap();
        stats.rows = recs.len();
        stats.first = recs.first().map(|r| format_timestamp(r.hour));
        stats.last = recs.last().map(|r| format_timestamp(r.hour));
        for w in recs.windows(2) {
            if w[1].hour - w[0].hour > 1 {
                stats.gaps.push(Gap {
                    from: format_timestamp(w[0].hour + 1),
                    to: format_timestamp(w[1].hour),
                    missing_hours: w[1].hour - w[0].hour - 1,
                });
            }
        }
        let mut series = ZoneSeries::default();
        for r in recs {
            series.push(r.hour, r.price, r.wind_gen, r.solar_gen, r.load);
        }
        store.zones.insert(zone, series);
    }

    let mut seen_ex: HashMap<(Border, HourIndex), SourceLine> = HashMap::new();
    let mut borders: BTreeMap<Border, Vec<(HourIndex, f64)>> = BTreeMap::new();
    for row in parsed_ex.into_iter().flatten() {
        let key = (row.border.clone(), row.hour);
        if let Some(first) = seen_ex.get(&key) {
            return Err(Error::DuplicateRecord {
                key: format!("({}, {})", key.0, format_timestamp(key.1)),
                first: first.clone(),
                second: row.at,
            });
        }
        seen_ex.insert(key, row.at.clone());
        if !topology.in_lifecycle(&row.border.0, row.hour)
            || !topology.in_lifecycle(&row.border.1, row.hour)
        {
            report.rejections.push(Rejection {
                at: row.at.to_string(),
                zone: row.border.to_string(),
                reason: "outside zone lifecycle".to_string(),
            });
            continue;
        }
        borders
            .entry(row.border)
            .or_default()
            .push((row.hour, row.net_export));
    }
    for (border, mut rows) in borders {
        rows.sort_by_key(|r| r.0);
        report.borders.insert(border.to_string(), rows.len());
        store.exchanges.insert(
            border,
            ExchangeSeries {
                hours: rows.iter().map(|r| r.0).collect(),
                net_export: rows.iter().map(|r| r.1).collect(),
            },
        );
    }
    report.total_rows = store.total_rows();
    Ok((store, report))
}

/// Fraction of the window's hours with a retained record for `zone`.
pub fn coverage(store: &HourlyStore, zone: &ZoneId, period: &Period) -> f64 {
    let Some(series) = store.series(zone) else {
        return 0.0;
    };
    let r = series.index_range(period.hours());
    (r.end - r.start) as f64 / period.n_hours() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Aggregation;

    fn at() -> SourceLine {
        SourceLine {
            file: "x.csv".into(),
            line: 2,
        }
    }

    #[test]
    fn timestamps_need_offsets() {
        assert!(parse_timestamp("2019-01-01T05:00:00Z", &at()).is_ok());
        assert_eq!(
            parse_timestamp("2019-01-01T06:00:00+01:00", &at()).unwrap(),
            parse_timestamp("2019-01-01T05:00:00Z", &at()).unwrap()
        );
        assert!(matches!(
            parse_timestamp("2019-01-01 05:00:00", &at()),
            Err(Error::AmbiguousTimestamp { .. })
        ));
        assert!(matches!(
            parse_timestamp("2019-01-01T05:30:00Z", &at()),
            Err(Error::MalformedRow { .. })
        ));
        assert!(matches!(
            parse_timestamp("yesterday", &at()),
            Err(Error::MalformedRow { .. })
        ));
    }

    #[test]
    fn coverage_counts_hours() {
        let mut s = ZoneSeries::default();
        let month = Period::Month { year: 2019, month: 4 };
        let start = month.hours().start;
        for h in 0..720 {
            if h % 10 != 0 {
                s.push(start + h, 1.0, 1.0, 0.0, 2.0);
            }
        }
        let mut store = HourlyStore::default();
        store.zones.insert("A".into(), s);
        assert!((coverage(&store, &"A".into(), &month) - 0.9).abs() < 1e-15);
        assert_eq!(coverage(&store, &"B".into(), &month), 0.0);
        let may = Period::containing(Aggregation::Monthly, start + 800);
        assert_eq!(coverage(&store, &"A".into(), &may), 0.0);
    }
}
