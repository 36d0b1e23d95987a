//! Shared domain identifiers: zones, technologies, aggregation windows.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use chrono::{DateTime, Datelike, NaiveDate, TimeZone, Timelike, Utc};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Bidding-zone identifier, e.g. `DE_LU`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ZoneId(pub String);

impl ZoneId {
    pub fn new(id: impl Into<String>) -> Self {
        ZoneId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ZoneId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ZoneId {
    fn from(s: &str) -> Self {
        ZoneId(s.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Technology {
    Wind,
    Solar,
}

impl Technology {
    pub const ALL: [Technology; 2] = [Technology::Wind, Technology::Solar];

    /// The technology entering a model as the cross-technology control.
    pub fn other(self) -> Technology {
        match self {
            Technology::Wind => Technology::Solar,
            Technology::Solar => Technology::Wind,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Technology::Wind => "wind",
            Technology::Solar => "solar",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Technology::Wind => "Wind",
            Technology::Solar => "Solar",
        }
    }
}

impl fmt::Display for Technology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Technology {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "wind" => Ok(Technology::Wind),
            "solar" => Ok(Technology::Solar),
            other => Err(Error::Config(format!("unknown technology '{other}'"))),
        }
    }
}

/// Temporal resolution at which hourly data is aggregated into panel periods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    Hourly,
    Daily,
    Monthly,
    Annual,
}

impl Aggregation {
    pub fn as_str(self) -> &'static str {
        match self {
            Aggregation::Hourly => "hourly",
            Aggregation::Daily => "daily",
            Aggregation::Monthly => "monthly",
            Aggregation::Annual => "annual",
        }
    }
}

impl fmt::Display for Aggregation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Aggregation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hourly" => Ok(Aggregation::Hourly),
            "daily" => Ok(Aggregation::Daily),
            "monthly" => Ok(Aggregation::Monthly),
            "annual" => Ok(Aggregation::Annual),
            other => Err(Error::Config(format!("unknown aggregation '{other}'"))),
        }
    }
}

/// Hours since the Unix epoch, UTC.
pub type HourIndex = i64;

pub fn hour_index(ts: DateTime<Utc>) -> HourIndex {
    ts.timestamp().div_euclid(3600)
}

pub fn hour_to_datetime(hour: HourIndex) -> DateTime<Utc> {
    Utc.timestamp_opt(hour * 3600, 0)
        .single()
        .expect("hour index within chrono range")
}

/// First hour (UTC midnight) of a calendar date.
pub fn date_start_hour(date: NaiveDate) -> HourIndex {
    hour_index(date.and_hms_opt(0, 0, 0).unwrap().and_utc())
}

/// An aggregation window. Ordering is chronological within one kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Period {
    Hour(HourIndex),
    Day(NaiveDate),
    Month { year: i32, month: u32 },
    Year(i32),
}

impl Period {
    /// The window of the given resolution containing `hour`.
    pub fn containing(agg: Aggregation, hour: HourIndex) -> Period {
        let dt = hour_to_datetime(hour);
        match agg {
            Aggregation::Hourly => Period::Hour(hour),
            Aggregation::Daily => Period::Day(dt.date_naive()),
            Aggregation::Monthly => Period::Month {
                year: dt.year(),
                month: dt.month(),
            },
            Aggregation::Annual => Period::Year(dt.year()),
        }
    }

    pub fn aggregation(&self) -> Aggregation {
        match self {
            Period::Hour(_) => Aggregation::Hourly,
            Period::Day(_) => Aggregation::Daily,
            Period::Month { .. } => Aggregation::Monthly,
            Period::Year(_) => Aggregation::Annual,
        }
    }

    /// Half-open range of hour indices covered by the window.
    pub fn hours(&self) -> Range<HourIndex> {
        match *self {
            Period::Hour(h) => h..h + 1,
            Period::Day(d) => {
                let s = date_start_hour(d);
                s..s + 24
            }
            Period::Month { year, month } => {
                let start = NaiveDate::from_ymd_opt(year, month, 1).unwrap();
                let (ny, nm) = if month == 12 { (year + 1, 1) } else { (year, month + 1) };
                let end = NaiveDate::from_ymd_opt(ny, nm, 1).unwrap();
                date_start_hour(start)..date_start_hour(end)
            }
            Period::Year(y) => {
                let start = NaiveDate::from_ymd_opt(y, 1, 1).unwrap();
                let end = NaiveDate::from_ymd_opt(y + 1, 1, 1).unwrap();
                date_start_hour(start)..date_start_hour(end)
            }
        }
    }

    pub fn n_hours(&self) -> i64 {
        let r = self.hours();
        r.end - r.start
    }

    /// Integer time position used for lag arithmetic (consecutive windows differ by 1).
    pub fn ordinal(&self) -> i64 {
        match *self {
            Period::Hour(h) => h,
            Period::Day(d) => date_start_hour(d) / 24,
            Period::Month { year, month } => year as i64 * 12 + month as i64 - 1,
            Period::Year(y) => y as i64,
        }
    }

    /// Calendar year the window starts in.
    pub fn year(&self) -> i32 {
        hour_to_datetime(self.hours().start).year()
    }

    /// All windows of resolution `agg` intersecting the half-open hour range.
    pub fn covering(agg: Aggregation, hours: Range<HourIndex>) -> Vec<Period> {
        let mut out = Vec::new();
        if hours.start >= hours.end {
            return out;
        }
        let mut p = Period::containing(agg, hours.start);
        loop {
            out.push(p);
            let next = p.hours().end;
            if next >= hours.end {
                break;
            }
            p = Period::containing(agg, next);
        }
        out
    }
}

impl fmt::Display for Period {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Period::Hour(h) => {
                let dt = hour_to_datetime(h);
                write!(f, "{}T{:02}", dt.date_naive(), dt.hour())
            }
            Period::Day(d) => write!(f, "{d}"),
            Period::Month { year, month } => write!(f, "{year:04}-{month:02}"),
            Period::Year(y) => write!(f, "{y:04}"),
        }
    }
}

impl FromStr for Period {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Data(format!("unparseable period '{s}'"));
        if let Some((date, hour)) = s.split_once('T') {
            let d = NaiveDate::parse_from_str(date, "%Y-%m-%d").map_err(|_| bad())?;
            let h: i64 = hour.parse().map_err(|_| bad())?;
            if !(0..24).contains(&h) {
                return Err(bad());
            }
            return Ok(Period::Hour(date_start_hour(d) + h));
        }
        match s.len() {
            4 => Ok(Period::Year(s.parse().map_err(|_| bad())?)),
            7 => {
                let (y, m) = s.split_once('-').ok_or_else(bad)?;
                let year: i32 = y.parse().map_err(|_| bad())?;
                let month: u32 = m.parse().map_err(|_| bad())?;
                if !(1..=12).contains(&month) {
                    return Err(bad());
                }
                Ok(Period::Month { year, month })
            }
            10 => Ok(Period::Day(
                NaiveDate::parse_from_str(s, "%Y-%m-%d").map_err(|_| bad())?,
            )),
            _ => Err(bad()),
        }
    }
}

impl Serialize for Period {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Period {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Compensated (Neumaier) summation; order-dependent but deterministic.
pub fn stable_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

pub fn stable_mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    stable_sum(values.iter().copied()) / values.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn month_lengths() {
        assert_eq!(Period::Month { year: 2019, month: 2 }.n_hours(), 672);
        assert_eq!(Period::Month { year: 2020, month: 2 }.n_hours(), 696);
        assert_eq!(Period::Month { year: 2019, month: 4 }.n_hours(), 720);
        assert_eq!(Period::Year(2020).n_hours(), 8784);
    }

    #[test]
    fn period_text_round_trip() {
        let h = date_start_hour(NaiveDate::from_ymd_opt(2021, 3, 4).unwrap()) + 13;
        for agg in [
            Aggregation::Hourly,
            Aggregation::Daily,
            Aggregation::Monthly,
            Aggregation::Annual,
        ] {
            let p = Period::containing(agg, h);
            assert!(p.hours().contains(&h));
            let back: Period = p.to_string().parse().unwrap();
            assert_eq!(back, p);
        }
        assert_eq!(Period::containing(Aggregation::Hourly, h).to_string(), "2021-03-04T13");
    }

    #[test]
    fn ordinals_are_consecutive() {
        let start = date_start_hour(NaiveDate::from_ymd_opt(2019, 11, 1).unwrap());
        let end = date_start_hour(NaiveDate::from_ymd_opt(2020, 3, 1).unwrap());
        let months = Period::covering(Aggregation::Monthly, start..end);
        assert_eq!(months.len(), 4);
        for w in months.windows(2) {
            assert_eq!(w[1].ordinal() - w[0].ordinal(), 1);
        }
    }

    #[test]
    fn compensated_sum_beats_naive() {
        let v = [1e16, 1.0, -1e16];
        assert_eq!(stable_sum(v), 1.0);
    }
}
