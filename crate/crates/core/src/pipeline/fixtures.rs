//! Synthetic stand-ins for the external datasets: a 40-bus case, building
//! prototypes, a season of minutely load history, 5-minute farm speeds and
//! a secondly wind record.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{NaiveDate, TimeDelta};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::PipelineError;
use crate::grid::{
    BusRecord, CaseDocument, CorrelationCurve, GeoPoint, Generator, Line, RciRatio, Sector, TurbineCurveParams,
    WindFarm, ZoneRecord, CASE_FORMAT_VERSION,
};
use crate::rng::substream;
use crate::time::{format_timestamp, parse_timestamp};

const ZONES: [(&str, f64, f64, f64); 8] = [
    ("north central", 32.78, -96.80, 120.0),
    ("coast", 29.76, -95.37, 140.0),
    ("capital", 30.27, -97.74, 90.0),
    ("south central", 29.42, -98.49, 100.0),
    ("south", 27.80, -97.40, 60.0),
    ("far west", 31.99, -102.08, 50.0),
    ("west", 32.45, -99.73, 45.0),
    ("panhandle", 33.58, -101.86, 55.0),
];
const OFFSETS: [(f64, f64, f64); 5] =
    [(0.0, 0.0, 1.0), (0.12, 0.10, 0.8), (-0.10, 0.14, 0.6), (0.08, -0.15, 0.7), (-0.13, -0.09, 0.5)];
const ZONE_RCI: [[f64; 3]; 8] = [
    [0.45, 0.40, 0.15],
    [0.30, 0.30, 0.40],
    [0.50, 0.40, 0.10],
    [0.45, 0.35, 0.20],
    [0.25, 0.25, 0.50],
    [0.40, 0.20, 0.40],
    [0.55, 0.30, 0.15],
    [0.50, 0.25, 0.25],
];
const GEN_PMAX: [f64; 8] = [800.0, 900.0, 500.0, 600.0, 400.0, 500.0, 300.0, 400.0];
const TIES: [(usize, usize); 12] =
    [(1, 3), (3, 4), (4, 5), (5, 2), (2, 1), (2, 3), (3, 7), (7, 1), (7, 6), (6, 8), (8, 7), (4, 6)];
const FARMS: [(u32, f64, f64, f64); 6] = [
    (27, 32.10, -102.60, 200.0),
    (29, 31.70, -101.60, 150.0),
    (32, 32.60, -100.20, 120.0),
    (37, 33.90, -101.40, 250.0),
    (39, 33.20, -102.40, 100.0),
    (22, 27.50, -97.30, 180.0),
];
pub const FIXTURE_STUDY_START: &str = "2016-07-01T14:00:00Z";
pub const FIXTURE_PROTOTYPE_START: &str = "2016-07-01T00:00:00Z";
const PROTOTYPE_SITES: [(&str, f64, f64); 3] = [("central", 31.0, -97.5), ("east", 29.9, -95.5), ("west", 32.5, -101.5)];

fn hub(zone: usize) -> u32 {
    5 * zone as u32 + 1
}

/// The 40-bus fixture case: 8 zones of 5 buses, a generator at every zone
/// hub (two at the slack hub), radial feeders inside zones, meshed ties
/// between hubs and 6 wind farms.
pub fn mini40_case() -> CaseDocument {
    let mut zones = Vec::new();
    let mut buses = Vec::new();
    let mut lines = Vec::new();
    for (z, &(name, lat, lon, peak)) in ZONES.iter().enumerate() {
        zones.push(ZoneRecord { id: z as u32 + 1, name: Some(name.into()) });
        for (j, &(dlat, dlon, scale)) in OFFSETS.iter().enumerate() {
            let id = hub(z) + j as u32;
            let rci = match id {
                2 => [1.0, 0.0, 0.0],
                8 => [0.0, 1.0, 0.0],
                13 => [0.0, 0.0, 1.0],
                _ => ZONE_RCI[z],
            };
            buses.push(BusRecord {
                id,
                zone: z as u32 + 1,
                lat: lat + dlat,
                lon: lon + dlon,
                peak_load_mw: peak * scale,
                rci: RciRatio(rci),
                power_factor: (j == 4).then_some(0.9),
            });
            if j > 0 {
                lines.push(Line { from: hub(z), to: id, r_pu: 0.002, x_pu: 0.02, b_pu: 0.004 });
            }
        }
        lines.push(Line { from: hub(z) + 1, to: hub(z) + 2, r_pu: 0.004, x_pu: 0.04, b_pu: 0.002 });
    }
    for &(a, b) in &TIES {
        let pa = GeoPoint { lat: ZONES[a - 1].1, lon: ZONES[a - 1].2 };
        let pb = GeoPoint { lat: ZONES[b - 1].1, lon: ZONES[b - 1].2 };
        let d = pa.distance_km(&pb);
        let r = |x: f64| (x * 1e6).round() / 1e6;
        lines.push(Line { from: hub(a - 1), to: hub(b - 1), r_pu: r(1e-5 * d), x_pu: r(1e-4 * d), b_pu: r(2e-4 * d) });
    }
    let mut generators: Vec<Generator> = GEN_PMAX
        .iter()
        .enumerate()
        .map(|(z, &p_max)| Generator {
            id: z as u32 + 1,
            bus: hub(z),
            p_min_mw: 50.0,
            p_max_mw: p_max,
            participation: p_max / 100.0,
            voltage_pu: if z == 0 { 1.03 } else { 1.02 },
        })
        .collect();
    generators.push(Generator { id: 9, bus: 1, p_min_mw: 20.0, p_max_mw: 300.0, participation: 1.5, voltage_pu: 1.03 });
    let wind_farms = FARMS
        .iter()
        .enumerate()
        .map(|(i, &(bus, lat, lon, rated_mw))| WindFarm { id: i as u32 + 1, bus, lat, lon, rated_mw, turbine_curve: 1 })
        .collect();
    CaseDocument {
        format_version: CASE_FORMAT_VERSION,
        name: "mini40".into(),
        base_mva: 100.0,
        slack_bus: 1,
        correlation_curve: CorrelationCurve::default(),
        zones,
        buses,
        generators,
        wind_farms,
        lines,
        turbine_curves: vec![TurbineCurveParams::with_defaults(1)],
    }
}

fn shape(sector: Sector, hour: usize) -> f64 {
    let h = (hour % 24) as f64;
    match sector {
        Sector::Residential => 1.0 + 0.35 * (2.0 * PI * (h - 18.0) / 24.0).cos() + 0.1 * (4.0 * PI * (h - 8.0) / 24.0).cos(),
        Sector::Commercial => 1.0 + 0.5 * (2.0 * PI * (h - 14.0) / 24.0).cos(),
        Sector::Industrial => 1.0 + 0.08 * (2.0 * PI * (h - 12.0) / 24.0).cos(),
    }
}

/// One prototype file: header, location line, 48 hourly values.
fn prototype_text(sector: Sector, site: usize, seed: u64) -> String {
    let (_, lat, lon) = PROTOTYPE_SITES[site];
    let magnitude = match sector {
        Sector::Residential => 2.0,
        Sector::Commercial => 3.0,
        Sector::Industrial => 5.0,
    } * [1.0, 1.2, 0.8][site];
    let mut rng = substream(seed, "fixture-prototype", sector.index() as u64, site as u64);
    let mut s = format!("sector,lat,lon\n{},{lat},{lon}\n", sector.name());
    for h in 0..48 {
        let day = if h >= 24 { 1.03 } else { 1.0 };
        let v = magnitude * shape(sector, h) * day * (1.0 + 0.01 * (rng.random::<f64>() - 0.5));
        writeln!(s, "{v:.6}").expect("string write");
    }
    s
}

/// Minutes 0..=60 of 14:00 on every day of June through August, drawn from
/// four intra-hour shapes.
fn load_history_text(seed: u64) -> String {
    let mut rng = substream(seed, "fixture-history", 0, 0);
    let noise = Normal::new(0.0, 0.001).expect("valid");
    let level = Normal::new(0.0, 1.0).expect("valid");
    let mut s = String::from("date,minute_of_hour,load_mw\n");
    let first = NaiveDate::from_ymd_opt(2016, 6, 1).expect("valid date");
    for d in 0..92 {
        let date = first + TimeDelta::days(d);
        let family = rng.random_range(0..4);
        let amp = 0.01 + 0.01 * rng.random::<f64>();
        let start = 40_000.0 * (1.0 + 0.05 * level.sample(&mut rng));
        let end = start + 800.0 * level.sample(&mut rng);
        for i in 0..=60 {
            let x = f64::from(i) / 60.0;
            let line = start + (end - start) * x;
            let pattern = match family {
                0 => 1.0 + amp * (PI * x).sin(),
                1 => 1.0 - amp * (PI * x).sin(),
                2 => 1.0 + amp * (2.0 * PI * x).sin(),
                _ => 1.0,
            };
            let eps = if i == 0 || i == 60 { 0.0 } else { noise.sample(&mut rng) };
            writeln!(s, "{date},{i},{:.3}", line * (pattern + eps)).expect("string write");
        }
    }
    s
}

/// 5-minute speeds for the six fixture farms over the study hour.
fn wind_5min_text(seed: u64) -> String {
    let mut rng = substream(seed, "fixture-wind-5min", 0, 0);
    let step = Normal::new(0.0, 0.4).expect("valid");
    let start = parse_timestamp(FIXTURE_STUDY_START).expect("valid fixture time");
    let mut s = String::from("farm_id,timestamp_utc,speed_mps\n");
    for (f, base) in [9.0, 8.5, 10.0, 11.0, 7.5, 8.0].iter().enumerate() {
        let mut v: f64 = *base;
        for k in 0..13 {
            let t = start + TimeDelta::minutes(5 * k);
            writeln!(s, "{},{},{v:.3}", f + 1, format_timestamp(&t)).expect("string write");
            v = (v + step.sample(&mut rng)).max(0.5);
        }
    }
    s
}

/// Two hours of 1 Hz speeds from a mean-reverting AR(1) process, with a
/// short gap of missing samples.
fn wind_secondly_text(seed: u64) -> String {
    let mut rng = substream(seed, "fixture-wind-secondly", 0, 0);
    let shock = Normal::new(0.0, 0.12).expect("valid");
    let start = parse_timestamp("2016-06-15T00:00:00Z").expect("valid");
    let mut s = String::from("timestamp_utc,speed_mps\n");
    let mut v: f64 = 8.0;
    for k in 0..7201 {
        let t = format_timestamp(&(start + TimeDelta::seconds(k)));
        if (3700..3710).contains(&k) {
            writeln!(s, "{t},").expect("string write");
        } else {
            writeln!(s, "{t},{v:.4}").expect("string write");
        }
        v = (8.0 + 0.995 * (v - 8.0) + shock.sample(&mut rng)).max(0.0);
    }
    s
}

fn config_text(seed: u64, prototypes: &[String]) -> String {
    let list = prototypes.iter().map(|p| format!("\"{p}\"")).collect::<Vec<_>>().join(", ");
    format!(
        r#"seed = {seed}

[paths]
case = "case.toml"
load_history = "load_history.csv"
prototypes = [{list}]
wind_5min = "wind_5min.csv"
wind_secondly = "wind_secondly.csv"
output_dir = "out"

[study]
start_utc = "{FIXTURE_STUDY_START}"
hours = 1
prototype_start_utc = "{FIXTURE_PROTOTYPE_START}"
season = [{{ start_day = 153, end_day = 244 }}]

[demand]
k = 4

[emit]
step_s = 15
horizon_s = 600
"#
    )
}

/// Paths of a generated fixture set.
#[derive(Debug, Clone, PartialEq)]
pub struct FixtureSet {
    pub dir: PathBuf,
    pub config: PathBuf,
    pub case: PathBuf,
}

/// Writes the fixture inputs and a ready-to-run `config.toml` into `dir`.
pub fn make_fixtures(dir: impl AsRef<Path>, seed: u64) -> Result<FixtureSet, PipelineError> {
    const STAGE: &str = "make-fixtures";
    let dir = dir.as_ref();
    let io = |e: std::io::Error| PipelineError::runtime(STAGE, e);
    fs::create_dir_all(dir.join("prototypes")).map_err(io)?;
    let case_text = toml::to_string(&mini40_case()).map_err(|e| PipelineError::runtime(STAGE, e))?;
    fs::write(dir.join("case.toml"), case_text).map_err(io)?;
    let mut protos = Vec::new();
    for sector in Sector::ALL {
        for (site, (name, _, _)) in PROTOTYPE_SITES.iter().enumerate() {
            let rel = format!("prototypes/{}_{name}.csv", sector.name());
            fs::write(dir.join(&rel), prototype_text(sector, site, seed)).map_err(io)?;
            protos.push(rel);
        }
    }
    fs::write(dir.join("load_history.csv"), load_history_text(seed)).map_err(io)?;
    fs::write(dir.join("wind_5min.csv"), wind_5min_text(seed)).map_err(io)?;
    fs::write(dir.join("wind_secondly.csv"), wind_secondly_text(seed)).map_err(io)?;
    fs::write(dir.join("config.toml"), config_text(seed, &protos)).map_err(io)?;
    Ok(FixtureSet { dir: dir.to_path_buf(), config: dir.join("config.toml"), case: dir.join("case.toml") })
}
