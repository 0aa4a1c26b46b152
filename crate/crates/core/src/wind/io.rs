use std::collections::BTreeMap;
use std::io::{Read, Write};

use chrono::{DateTime, TimeDelta, Utc};

use super::{WindError, FIVE_MINUTES_S};
use crate::time::{format_timestamp, parse_timestamp};

#[derive(Debug, Clone, PartialEq)]
pub struct WindSpeedSeries5Min {
    pub farm_id: u32,
    pub start: DateTime<Utc>,
    pub values: Vec<f64>,
}

/// Contiguous run of 1-second samples.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondlySegment {
    pub start: DateTime<Utc>,
    pub values: Vec<f64>,
}

/// Wide table of per-farm columns on a shared time axis.
#[derive(Debug, Clone, PartialEq)]
pub struct WindTable {
    pub timestamps: Vec<DateTime<Utc>>,
    pub farm_ids: Vec<u32>,
    pub columns: Vec<Vec<f64>>,
}

fn parse_err(record: usize, message: impl Into<String>) -> WindError {
    WindError::Parse { record, message: message.into() }
}

fn parse_speed(record: usize, s: &str) -> Result<f64, WindError> {
    let v: f64 = s.trim().parse().map_err(|_| parse_err(record, format!("bad speed '{s}'")))?;
    if !v.is_finite() || v < 0.0 {
        return Err(parse_err(record, format!("speed must be finite and >= 0, got {v}")));
    }
    Ok(v)
}

fn check_header(rdr: &mut csv::Reader<impl Read>, expected: &[&str]) -> Result<(), WindError> {
    let headers = rdr.headers().map_err(|e| parse_err(0, e.to_string()))?;
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(parse_err(0, format!("expected header {}, got {headers:?}", expected.join(","))));
    }
    Ok(())
}

/// Reads `farm_id,timestamp_utc,speed_mps`. Every farm must cover the same
/// 5-minute instants without gaps.
pub fn read_wind_5min<R: Read>(reader: R) -> Result<Vec<WindSpeedSeries5Min>, WindError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    check_header(&mut rdr, &["farm_id", "timestamp_utc", "speed_mps"])?;
    let mut farms: BTreeMap<u32, BTreeMap<DateTime<Utc>, f64>> = BTreeMap::new();
    for (i, row) in rdr.records().enumerate() {
        let rec = i + 1;
        let row = row.map_err(|e| parse_err(rec, e.to_string()))?;
        if row.len() != 3 {
            return Err(parse_err(rec, format!("expected 3 fields, got {}", row.len())));
        }
        let id: u32 = row[0].parse().map_err(|_| parse_err(rec, format!("bad farm id '{}'", &row[0])))?;
        let t = parse_timestamp(&row[1]).map_err(|m| parse_err(rec, m))?;
        let v = parse_speed(rec, &row[2])?;
        if farms.entry(id).or_default().insert(t, v).is_some() {
            return Err(parse_err(rec, format!("duplicate timestamp for farm {id}")));
        }
    }
    if farms.is_empty() {
        return Err(parse_err(0, "no data rows"));
    }
    let step = TimeDelta::seconds(FIVE_MINUTES_S.into());
    let mut out: Vec<WindSpeedSeries5Min> = Vec::with_capacity(farms.len());
    for (farm_id, rows) in farms {
        let times: Vec<DateTime<Utc>> = rows.keys().copied().collect();
        if let Some(w) = times.windows(2).find(|w| w[1] - w[0] != step) {
            return Err(WindError::InvalidInput(format!(
                "farm {farm_id}: samples at {} and {} are not 5 minutes apart",
                format_timestamp(&w[0]),
                format_timestamp(&w[1])
            )));
        }
        let s = WindSpeedSeries5Min { farm_id, start: times[0], values: rows.into_values().collect() };
        if let Some(first) = out.first() {
            if first.start != s.start || first.values.len() != s.values.len() {
                return Err(WindError::InvalidInput(format!(
                    "farm {farm_id} covers a different period than farm {}",
                    first.farm_id
                )));
            }
        }
        out.push(s);
    }
    Ok(out)
}

/// Reads `timestamp_utc,speed_mps`, splitting into contiguous 1-second
/// segments. Rows with an empty or `NaN` speed end the current segment.
pub fn read_secondly_wind<R: Read>(reader: R) -> Result<Vec<SecondlySegment>, WindError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    check_header(&mut rdr, &["timestamp_utc", "speed_mps"])?;
    let mut rows: BTreeMap<DateTime<Utc>, Option<f64>> = BTreeMap::new();
    for (i, row) in rdr.records().enumerate() {
        let rec = i + 1;
        let row = row.map_err(|e| parse_err(rec, e.to_string()))?;
        if row.len() != 2 {
            return Err(parse_err(rec, format!("expected 2 fields, got {}", row.len())));
        }
        let t = parse_timestamp(&row[0]).map_err(|m| parse_err(rec, m))?;
        let v = match row[1].trim() {
            "" => None,
            s if s.eq_ignore_ascii_case("nan") => None,
            s => Some(parse_speed(rec, s)?),
        };
        if rows.insert(t, v).is_some() {
            return Err(parse_err(rec, "duplicate timestamp"));
        }
    }
    if rows.is_empty() {
        return Err(parse_err(0, "no data rows"));
    }
    let mut segments: Vec<SecondlySegment> = Vec::new();
    let mut last: Option<DateTime<Utc>> = None;
    for (t, v) in rows {
        let Some(v) = v else {
            last = None;
            continue;
        };
        let contiguous = last.is_some_and(|l| t - l == TimeDelta::seconds(1));
        match segments.last_mut() {
            Some(seg) if contiguous => seg.values.push(v),
            _ => segments.push(SecondlySegment { start: t, values: vec![v] }),
        }
        last = Some(t);
    }
    Ok(segments)
}

/// Writes `timestamp_utc,farm_<id>,...` and, when `with_total`, a final
/// `total_mw` column holding the row sum.
pub fn write_wind_csv<W: Write>(writer: W, table: &WindTable, with_total: bool) -> Result<(), WindError> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| WindError::Io(std::io::Error::other(e));
    let mut header = vec!["timestamp_utc".to_string()];
    header.extend(table.farm_ids.iter().map(|id| format!("farm_{id}")));
    if with_total {
        header.push("total_mw".into());
    }
    w.write_record(&header).map_err(io)?;
    for (i, t) in table.timestamps.iter().enumerate() {
        let mut row = vec![format_timestamp(t)];
        row.extend(table.columns.iter().map(|c| format!("{}", c[i])));
        if with_total {
            row.push(format!("{}", table.columns.iter().map(|c| c[i]).sum::<f64>()));
        }
        w.write_record(&row).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a table written by [`write_wind_csv`]; a `total_mw` column is
/// ignored.
pub fn read_wind_csv<R: Read>(reader: R) -> Result<WindTable, WindError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| parse_err(0, e.to_string()))?.clone();
    if headers.get(0) != Some("timestamp_utc") {
        return Err(parse_err(0, "first column must be timestamp_utc"));
    }
    let mut farm_cols = Vec::new();
    let mut farm_ids = Vec::new();
    for (i, h) in headers.iter().enumerate().skip(1) {
        if h == "total_mw" {
            continue;
        }
        let id: u32 = h
            .strip_prefix("farm_")
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| parse_err(0, format!("unexpected column '{h}'")))?;
        farm_cols.push(i);
        farm_ids.push(id);
    }
    let mut table = WindTable { timestamps: Vec::new(), farm_ids, columns: vec![Vec::new(); farm_cols.len()] };
    for (r, row) in rdr.records().enumerate() {
        let rec = r + 1;
        let row = row.map_err(|e| parse_err(rec, e.to_string()))?;
        if row.len() != headers.len() {
            return Err(parse_err(rec, format!("expected {} fields, got {}", headers.len(), row.len())));
        }
        table.timestamps.push(parse_timestamp(&row[0]).map_err(|m| parse_err(rec, m))?);
        for (c, &i) in farm_cols.iter().enumerate() {
            let v: f64 = row[i].parse().map_err(|_| parse_err(rec, format!("bad value '{}'", &row[i])))?;
            if !v.is_finite() {
                return Err(parse_err(rec, "non-finite value"));
            }
            table.columns[c].push(v);
        }
    }
    Ok(table)
}
