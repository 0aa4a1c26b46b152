use std::collections::BTreeMap;
use std::io::{Read, Write};

use chrono::{DateTime, Datelike, NaiveDate, TimeDelta, Utc};
use serde::{Deserialize, Serialize};

use super::{DemandError, MinutelyBusLoad, PrototypeProfile};
use crate::grid::{GeoPoint, Sector};
use crate::time::{format_timestamp, parse_timestamp};

/// Inclusive day-of-year range; wraps through new year when `start > end`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DayWindow {
    pub start_day: u32,
    pub end_day: u32,
}

impl DayWindow {
    pub fn contains(&self, date: NaiveDate) -> bool {
        let d = date.ordinal();
        if self.start_day <= self.end_day {
            (self.start_day..=self.end_day).contains(&d)
        } else {
            d >= self.start_day || d <= self.end_day
        }
    }
}

/// Minute loads of the study hour for one day.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryDay {
    pub date: NaiveDate,
    pub minutes: Vec<f64>,
}

fn parse_err(record: usize, message: impl Into<String>) -> DemandError {
    DemandError::Parse { record, message: message.into() }
}

fn parse_load(record: usize, field: &str) -> Result<f64, DemandError> {
    let v: f64 = field.trim().parse().map_err(|_| parse_err(record, format!("bad number '{field}'")))?;
    if !v.is_finite() || v < 0.0 {
        return Err(parse_err(record, format!("load must be finite and >= 0, got {v}")));
    }
    Ok(v)
}

/// Reads `date,minute_of_hour,load_mw` rows. Every day must carry the same
/// contiguous minute range starting at 0.
pub fn read_load_history<R: Read>(reader: R) -> Result<Vec<HistoryDay>, DemandError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| parse_err(0, e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["date", "minute_of_hour", "load_mw"] {
        return Err(parse_err(0, format!("expected header date,minute_of_hour,load_mw, got {headers:?}")));
    }
    let mut days: BTreeMap<NaiveDate, BTreeMap<u32, f64>> = BTreeMap::new();
    for (i, row) in rdr.records().enumerate() {
        let rec = i + 1;
        let row = row.map_err(|e| parse_err(rec, e.to_string()))?;
        if row.len() != 3 {
            return Err(parse_err(rec, format!("expected 3 fields, got {}", row.len())));
        }
        let date = NaiveDate::parse_from_str(&row[0], "%Y-%m-%d")
            .map_err(|e| parse_err(rec, format!("bad date '{}': {e}", &row[0])))?;
        let minute: u32 = row[1].parse().map_err(|_| parse_err(rec, format!("bad minute '{}'", &row[1])))?;
        if minute > 1440 {
            return Err(parse_err(rec, format!("minute {minute} out of range")));
        }
        let load = parse_load(rec, &row[2])?;
        if days.entry(date).or_default().insert(minute, load).is_some() {
            return Err(parse_err(rec, format!("duplicate minute {minute} on {date}")));
        }
    }
    if days.is_empty() {
        return Err(parse_err(0, "no data rows"));
    }
    let mut expected_len = None;
    let mut out = Vec::with_capacity(days.len());
    for (date, minutes) in days {
        let len = minutes.len();
        if minutes.keys().copied().ne(0..len as u32) {
            return Err(DemandError::InvalidInput(format!("{date}: minutes are not contiguous from 0")));
        }
        match expected_len {
            None => expected_len = Some(len),
            Some(l) if l != len => {
                return Err(DemandError::InvalidInput(format!("{date}: {len} minutes, other days have {l}")));
            }
            _ => {}
        }
        out.push(HistoryDay { date, minutes: minutes.into_values().collect() });
    }
    Ok(out)
}

/// Reads one prototype profile: a `sector,lat,lon` header line, one line
/// with those values, then one hourly MW value per line.
pub fn read_prototype<R: Read>(reader: R, expected_hours: Option<usize>) -> Result<PrototypeProfile, DemandError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_reader(reader);
    let mut records = rdr.records();
    let mut next = |idx: usize| -> Result<Option<csv::StringRecord>, DemandError> {
        records.next().transpose().map_err(|e| parse_err(idx, e.to_string()))
    };
    let header = next(0)?.ok_or_else(|| parse_err(0, "empty prototype file"))?;
    if header.iter().collect::<Vec<_>>() != ["sector", "lat", "lon"] {
        return Err(parse_err(0, "expected header sector,lat,lon"));
    }
    let meta = next(1)?.ok_or_else(|| parse_err(1, "missing sector,lat,lon values"))?;
    if meta.len() != 3 {
        return Err(parse_err(1, "expected sector,lat,lon values"));
    }
    let sector: Sector = meta[0].parse().map_err(|e: String| parse_err(1, e))?;
    let lat: f64 = meta[1].parse().map_err(|_| parse_err(1, "bad latitude"))?;
    let lon: f64 = meta[2].parse().map_err(|_| parse_err(1, "bad longitude"))?;
    let location = GeoPoint::new(lat, lon).map_err(|e| parse_err(1, e.to_string()))?;
    let mut hourly_mw = Vec::new();
    let mut idx = 2;
    while let Some(row) = next(idx)? {
        if row.len() != 1 {
            return Err(parse_err(idx, "expected one value per row"));
        }
        hourly_mw.push(parse_load(idx, &row[0])?);
        idx += 1;
    }
    if hourly_mw.is_empty() {
        return Err(parse_err(idx, "no hourly values"));
    }
    if let Some(h) = expected_hours {
        if hourly_mw.len() != h {
            return Err(DemandError::InvalidInput(format!("profile has {} hours, expected {h}", hourly_mw.len())));
        }
    }
    Ok(PrototypeProfile { sector, location, hourly_mw })
}

/// Minute-resolution loads of several buses on a shared time axis.
#[derive(Debug, Clone, PartialEq)]
pub struct MinuteLoadTable {
    pub start: DateTime<Utc>,
    pub bus_ids: Vec<u32>,
    pub columns: Vec<Vec<f64>>,
}

impl MinuteLoadTable {
    pub fn from_loads(start: DateTime<Utc>, loads: &[MinutelyBusLoad]) -> Self {
        MinuteLoadTable {
            start,
            bus_ids: loads.iter().map(|l| l.bus_id).collect(),
            columns: loads.iter().map(|l| l.minute_mw.clone()).collect(),
        }
    }

    pub fn minutes(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }
}

/// Wide CSV: `timestamp_utc,bus_<id>,...`, one row per minute.
pub fn write_minutely_csv<W: Write>(writer: W, table: &MinuteLoadTable) -> Result<(), DemandError> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["timestamp_utc".to_string()];
    header.extend(table.bus_ids.iter().map(|id| format!("bus_{id}")));
    let io = |e: csv::Error| DemandError::Io(std::io::Error::other(e));
    w.write_record(&header).map_err(io)?;
    for m in 0..table.minutes() {
        let mut row = vec![format_timestamp(&(table.start + TimeDelta::minutes(m as i64)))];
        row.extend(table.columns.iter().map(|c| format!("{}", c[m])));
        w.write_record(&row).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a table written by [`write_minutely_csv`]. Rows must be one
/// minute apart.
pub fn read_minutely_csv<R: Read>(reader: R) -> Result<MinuteLoadTable, DemandError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| parse_err(0, e.to_string()))?.clone();
    if headers.get(0) != Some("timestamp_utc") {
        return Err(parse_err(0, "first column must be timestamp_utc"));
    }
    let bus_ids = headers
        .iter()
        .skip(1)
        .map(|h| {
            h.strip_prefix("bus_")
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| parse_err(0, format!("unexpected column '{h}'")))
        })
        .collect::<Result<Vec<u32>, _>>()?;
    let mut columns = vec![Vec::new(); bus_ids.len()];
    let mut start = None;
    for (i, row) in rdr.records().enumerate() {
        let rec = i + 1;
        let row = row.map_err(|e| parse_err(rec, e.to_string()))?;
        if row.len() != headers.len() {
            return Err(parse_err(rec, format!("expected {} fields, got {}", headers.len(), row.len())));
        }
        let t = parse_timestamp(&row[0]).map_err(|m| parse_err(rec, m))?;
        let t0 = *start.get_or_insert(t);
        if t != t0 + TimeDelta::minutes(i as i64) {
            return Err(parse_err(rec, format!("timestamp {} breaks the one-minute spacing", &row[0])));
        }
        for (c, col) in columns.iter_mut().enumerate() {
            col.push(parse_load(rec, &row[c + 1])?);
        }
    }
    let start = start.ok_or_else(|| parse_err(0, "no data rows"))?;
    Ok(MinuteLoadTable { start, bus_ids, columns })
}
