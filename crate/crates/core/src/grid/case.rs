use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{CorrelationCurve, GeoPoint, GridError};

pub const CASE_FORMAT_VERSION: u32 = 1;

/// Customer class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sector {
    Residential,
    Commercial,
    Industrial,
}

impl Sector {
    pub const ALL: [Sector; 3] = [Sector::Residential, Sector::Commercial, Sector::Industrial];

    pub fn index(self) -> usize {
        match self {
            Sector::Residential => 0,
            Sector::Commercial => 1,
            Sector::Industrial => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Sector::Residential => "residential",
            Sector::Commercial => "commercial",
            Sector::Industrial => "industrial",
        }
    }
}

impl std::str::FromStr for Sector {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "residential" | "res" => Ok(Sector::Residential),
            "commercial" | "com" => Ok(Sector::Commercial),
            "industrial" | "ind" => Ok(Sector::Industrial),
            other => Err(format!("unknown sector '{other}'")),
        }
    }
}

/// Residential/commercial/industrial energy shares of a bus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RciRatio(pub [f64; 3]);

impl RciRatio {
    pub fn new(residential: f64, commercial: f64, industrial: f64) -> Self {
        RciRatio([residential, commercial, industrial])
    }

    pub fn share(&self, sector: Sector) -> f64 {
        self.0[sector.index()]
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    fn check(&self) -> Result<(), String> {
        if self.0.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(format!("rci ratio {:?} has negative or non-finite entries", self.0));
        }
        if (self.sum() - 1.0).abs() > 1e-9 {
            return Err(format!("rci ratio {:?} sums to {}, expected 1", self.0, self.sum()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bus {
    pub id: u32,
    pub location: GeoPoint,
    pub zone_id: u32,
    pub peak_load_mw: f64,
    pub rci_ratio: RciRatio,
    /// Per-bus override of the load power factor.
    pub power_factor: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Zone {
    pub id: u32,
    pub name: Option<String>,
    /// Arithmetic mean of member bus coordinates.
    pub centroid: GeoPoint,
    pub member_bus_ids: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Generator {
    pub id: u32,
    pub bus: u32,
    pub p_min_mw: f64,
    pub p_max_mw: f64,
    pub participation: f64,
    pub voltage_pu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindFarm {
    pub id: u32,
    pub bus: u32,
    pub lat: f64,
    pub lon: f64,
    pub rated_mw: f64,
    pub turbine_curve: u32,
}

impl WindFarm {
    pub fn location(&self) -> GeoPoint {
        GeoPoint { lat: self.lat, lon: self.lon }
    }
}

/// Pi-model branch in per unit on the case base.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Line {
    pub from: u32,
    pub to: u32,
    pub r_pu: f64,
    pub x_pu: f64,
    #[serde(default)]
    pub b_pu: f64,
}

/// Turbine power-curve parameters as stored in the case file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TurbineCurveParams {
    pub id: u32,
    pub v_cutin: f64,
    pub v_mid: f64,
    pub v_rated: f64,
    pub v_lim: f64,
    pub v_furl: f64,
    pub beta: f64,
    pub alpha3: f64,
}

impl TurbineCurveParams {
    pub fn with_defaults(id: u32) -> Self {
        TurbineCurveParams {
            id,
            v_cutin: 3.0,
            v_mid: 8.0,
            v_rated: 12.0,
            v_lim: 20.0,
            v_furl: 25.0,
            beta: 0.95,
            alpha3: 2.0,
        }
    }

    pub fn check(&self) -> Result<(), String> {
        let v = [self.v_cutin, self.v_mid, self.v_rated, self.v_lim, self.v_furl, self.beta, self.alpha3];
        if v.iter().any(|x| !x.is_finite()) {
            return Err("non-finite parameter".into());
        }
        let ordered = 0.0 <= self.v_cutin
            && self.v_cutin < self.v_mid
            && self.v_mid < self.v_rated
            && self.v_rated <= self.v_lim
            && self.v_lim < self.v_furl;
        if !ordered {
            return Err("speeds must satisfy 0 <= cut-in < mid < rated <= lim < furl".into());
        }
        if !(self.beta > 0.5 && self.beta < 1.0) {
            return Err(format!("beta {} must lie in (0.5, 1)", self.beta));
        }
        if self.alpha3 <= 0.0 {
            return Err(format!("alpha3 {} must be positive", self.alpha3));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZoneRecord {
    pub id: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BusRecord {
    pub id: u32,
    pub zone: u32,
    pub lat: f64,
    pub lon: f64,
    pub peak_load_mw: f64,
    pub rci: RciRatio,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power_factor: Option<f64>,
}

/// Serialized form of a case file. See `docs/case_format.md`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseDocument {
    pub format_version: u32,
    pub name: String,
    pub base_mva: f64,
    pub slack_bus: u32,
    pub correlation_curve: CorrelationCurve,
    pub zones: Vec<ZoneRecord>,
    pub buses: Vec<BusRecord>,
    pub generators: Vec<Generator>,
    #[serde(default)]
    pub wind_farms: Vec<WindFarm>,
    pub lines: Vec<Line>,
    #[serde(default)]
    pub turbine_curves: Vec<TurbineCurveParams>,
}

/// A validated, cross-linked grid case. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct GridCase {
    pub name: String,
    pub base_mva: f64,
    pub slack_bus: u32,
    pub zones: Vec<Zone>,
    pub buses: Vec<Bus>,
    pub generators: Vec<Generator>,
    pub wind_farms: Vec<WindFarm>,
    pub lines: Vec<Line>,
    pub turbine_curves: Vec<TurbineCurveParams>,
    pub correlation_curve: CorrelationCurve,
    bus_pos: BTreeMap<u32, usize>,
    zone_pos: BTreeMap<u32, usize>,
}

fn unique_ids<I: IntoIterator<Item = u32>>(kind: &str, ids: I) -> Result<BTreeSet<u32>, GridError> {
    let mut seen = BTreeSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(GridError::validation(format!("{kind} {id}"), "duplicate id"));
        }
    }
    Ok(seen)
}

fn finite_nonneg(entity: &str, field: &str, x: f64) -> Result<(), GridError> {
    if !x.is_finite() || x < 0.0 {
        return Err(GridError::validation(entity, format!("{field} must be finite and >= 0, got {x}")));
    }
    Ok(())
}

impl TryFrom<CaseDocument> for GridCase {
    type Error = GridError;

    fn try_from(doc: CaseDocument) -> Result<Self, GridError> {
        if doc.format_version != CASE_FORMAT_VERSION {
            return Err(GridError::UnsupportedVersion(doc.format_version));
        }
        if !(doc.base_mva.is_finite() && doc.base_mva > 0.0) {
            return Err(GridError::validation("case", format!("base_mva must be positive, got {}", doc.base_mva)));
        }
        doc.correlation_curve.validate()?;

        let zone_ids = unique_ids("zone", doc.zones.iter().map(|z| z.id))?;
        if zone_ids.is_empty() {
            return Err(GridError::validation("case", "at least one zone is required"));
        }
        let bus_ids = unique_ids("bus", doc.buses.iter().map(|b| b.id))?;
        unique_ids("generator", doc.generators.iter().map(|g| g.id))?;
        unique_ids("wind farm", doc.wind_farms.iter().map(|w| w.id))?;
        let curve_ids = unique_ids("turbine curve", doc.turbine_curves.iter().map(|c| c.id))?;

        let mut buses = Vec::with_capacity(doc.buses.len());
        for b in &doc.buses {
            let entity = format!("bus {}", b.id);
            let location = GeoPoint::new(b.lat, b.lon)
                .map_err(|e| GridError::validation(&entity, e.to_string()))?;
            if !zone_ids.contains(&b.zone) {
                return Err(GridError::validation(&entity, format!("references missing zone {}", b.zone)));
            }
            finite_nonneg(&entity, "peak_load_mw", b.peak_load_mw)?;
            b.rci.check().map_err(|m| GridError::validation(&entity, m))?;
            if let Some(pf) = b.power_factor {
                if !(pf > 0.0 && pf <= 1.0) {
                    return Err(GridError::validation(&entity, format!("power_factor {pf} outside (0, 1]")));
                }
            }
            buses.push(Bus {
                id: b.id,
                location,
                zone_id: b.zone,
                peak_load_mw: b.peak_load_mw,
                rci_ratio: b.rci,
                power_factor: b.power_factor,
            });
        }

        let mut zones = Vec::with_capacity(doc.zones.len());
        for z in &doc.zones {
            let members: Vec<&Bus> = buses.iter().filter(|b| b.zone_id == z.id).collect();
            if members.is_empty() {
                return Err(GridError::validation(format!("zone {}", z.id), "has no member buses"));
            }
            let n = members.len() as f64;
            let centroid = GeoPoint {
                lat: members.iter().map(|b| b.location.lat).sum::<f64>() / n,
                lon: members.iter().map(|b| b.location.lon).sum::<f64>() / n,
            };
            zones.push(Zone {
                id: z.id,
                name: z.name.clone(),
                centroid,
                member_bus_ids: members.iter().map(|b| b.id).collect(),
            });
        }

        for g in &doc.generators {
            let entity = format!("generator {}", g.id);
            if !bus_ids.contains(&g.bus) {
                return Err(GridError::validation(&entity, format!("references missing bus {}", g.bus)));
            }
            finite_nonneg(&entity, "p_min_mw", g.p_min_mw)?;
            finite_nonneg(&entity, "participation", g.participation)?;
            if !(g.p_max_mw.is_finite() && g.p_max_mw >= g.p_min_mw) {
                return Err(GridError::validation(&entity, "p_max_mw must be finite and >= p_min_mw"));
            }
            if !(g.voltage_pu.is_finite() && g.voltage_pu > 0.0) {
                return Err(GridError::validation(&entity, "voltage_pu must be positive"));
            }
        }
        if !bus_ids.contains(&doc.slack_bus) {
            return Err(GridError::validation("case", format!("slack bus {} does not exist", doc.slack_bus)));
        }
        if !doc.generators.iter().any(|g| g.bus == doc.slack_bus) {
            return Err(GridError::validation(format!("bus {}", doc.slack_bus), "slack bus has no generator"));
        }

        for w in &doc.wind_farms {
            let entity = format!("wind farm {}", w.id);
            GeoPoint::new(w.lat, w.lon).map_err(|e| GridError::validation(&entity, e.to_string()))?;
            if !(w.rated_mw.is_finite() && w.rated_mw > 0.0) {
                return Err(GridError::validation(&entity, format!("rated_mw must be > 0, got {}", w.rated_mw)));
            }
            if !bus_ids.contains(&w.bus) {
                return Err(GridError::validation(&entity, format!("references missing bus {}", w.bus)));
            }
            if !curve_ids.contains(&w.turbine_curve) {
                return Err(GridError::validation(
                    &entity,
                    format!("references missing turbine curve {}", w.turbine_curve),
                ));
            }
        }
        for c in &doc.turbine_curves {
            c.check().map_err(|m| GridError::validation(format!("turbine curve {}", c.id), m))?;
        }
        for (i, l) in doc.lines.iter().enumerate() {
            let entity = format!("line {i} ({}-{})", l.from, l.to);
            if !bus_ids.contains(&l.from) || !bus_ids.contains(&l.to) {
                return Err(GridError::validation(&entity, "references a missing bus"));
            }
            if l.from == l.to {
                return Err(GridError::validation(&entity, "self loop"));
            }
            let finite = l.r_pu.is_finite() && l.x_pu.is_finite() && l.b_pu.is_finite();
            if !finite || l.r_pu < 0.0 || (l.r_pu == 0.0 && l.x_pu == 0.0) {
                return Err(GridError::validation(&entity, "impedance must be finite, r >= 0 and nonzero"));
            }
        }

        let bus_pos = buses.iter().enumerate().map(|(i, b)| (b.id, i)).collect();
        let zone_pos = zones.iter().enumerate().map(|(i, z)| (z.id, i)).collect();
        Ok(GridCase {
            name: doc.name,
            base_mva: doc.base_mva,
            slack_bus: doc.slack_bus,
            zones,
            buses,
            generators: doc.generators,
            wind_farms: doc.wind_farms,
            lines: doc.lines,
            turbine_curves: doc.turbine_curves,
            correlation_curve: doc.correlation_curve,
            bus_pos,
            zone_pos,
        })
    }
}

impl GridCase {
    pub fn from_toml_str(text: &str) -> Result<Self, GridError> {
        if text.trim().is_empty() {
            return Err(GridError::Parse("empty case file".into()));
        }
        let doc: CaseDocument = toml::from_str(text).map_err(|e| GridError::Parse(e.to_string()))?;
        GridCase::try_from(doc)
    }

    pub fn to_document(&self) -> CaseDocument {
        CaseDocument {
            format_version: CASE_FORMAT_VERSION,
            name: self.name.clone(),
            base_mva: self.base_mva,
            slack_bus: self.slack_bus,
            correlation_curve: self.correlation_curve.clone(),
            zones: self.zones.iter().map(|z| ZoneRecord { id: z.id, name: z.name.clone() }).collect(),
            buses: self
                .buses
                .iter()
                .map(|b| BusRecord {
                    id: b.id,
                    zone: b.zone_id,
                    lat: b.location.lat,
                    lon: b.location.lon,
                    peak_load_mw: b.peak_load_mw,
                    rci: b.rci_ratio,
                    power_factor: b.power_factor,
                })
                .collect(),
            generators: self.generators.clone(),
            wind_farms: self.wind_farms.clone(),
            lines: self.lines.clone(),
            turbine_curves: self.turbine_curves.clone(),
        }
    }

    pub fn to_toml_string(&self) -> Result<String, GridError> {
        toml::to_string(&self.to_document()).map_err(|e| GridError::Parse(e.to_string()))
    }

    pub fn bus(&self, id: u32) -> Option<&Bus> {
        self.bus_pos.get(&id).map(|&i| &self.buses[i])
    }

    pub fn bus_index(&self, id: u32) -> Option<usize> {
        self.bus_pos.get(&id).copied()
    }

    pub fn zone(&self, id: u32) -> Option<&Zone> {
        self.zone_pos.get(&id).map(|&i| &self.zones[i])
    }

    pub fn zone_index(&self, id: u32) -> Option<usize> {
        self.zone_pos.get(&id).copied()
    }

    pub fn turbine_curve(&self, id: u32) -> Option<&TurbineCurveParams> {
        self.turbine_curves.iter().find(|c| c.id == id)
    }

    pub fn zone_count(&self) -> usize {
        self.zones.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_doc() -> CaseDocument {
        CaseDocument {
            format_version: 1,
            name: "tiny".into(),
            base_mva: 100.0,
            slack_bus: 1,
            correlation_curve: CorrelationCurve::default(),
            zones: vec![ZoneRecord { id: 1, name: Some("north".into()) }],
            buses: vec![
                BusRecord {
                    id: 1,
                    zone: 1,
                    lat: 30.0,
                    lon: -97.0,
                    peak_load_mw: 0.0,
                    rci: RciRatio::new(0.5, 0.3, 0.2),
                    power_factor: None,
                },
                BusRecord {
                    id: 2,
                    zone: 1,
                    lat: 32.0,
                    lon: -95.0,
                    peak_load_mw: 50.0,
                    rci: RciRatio::new(1.0, 0.0, 0.0),
                    power_factor: Some(0.9),
                },
            ],
            generators: vec![Generator {
                id: 1,
                bus: 1,
                p_min_mw: 0.0,
                p_max_mw: 200.0,
                participation: 1.0,
                voltage_pu: 1.0,
            }],
            wind_farms: vec![WindFarm { id: 7, bus: 2, lat: 31.0, lon: -96.0, rated_mw: 100.0, turbine_curve: 1 }],
            lines: vec![Line { from: 1, to: 2, r_pu: 0.01, x_pu: 0.1, b_pu: 0.0 }],
            turbine_curves: vec![TurbineCurveParams::with_defaults(1)],
        }
    }

    #[test]
    fn centroid_is_member_mean() {
        let case = GridCase::try_from(tiny_doc()).unwrap();
        let z = case.zone(1).unwrap();
        assert_eq!(z.centroid, GeoPoint { lat: 31.0, lon: -96.0 });
        assert_eq!(z.member_bus_ids, vec![1, 2]);
    }

    #[test]
    fn rci_not_summing_to_one_names_bus() {
        let mut doc = tiny_doc();
        doc.buses[1].rci = RciRatio::new(0.5, 0.3, 0.1);
        let err = GridCase::try_from(doc).unwrap_err();
        match err {
            GridError::Validation { entity, .. } => assert_eq!(entity, "bus 2"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn dangling_zone_reference() {
        let mut doc = tiny_doc();
        doc.buses[0].zone = 9;
        let err = GridCase::try_from(doc).unwrap_err().to_string();
        assert!(err.contains("bus 1") && err.contains("zone 9"), "{err}");
    }

    #[test]
    fn empty_text_is_parse_error() {
        assert!(matches!(GridCase::from_toml_str(""), Err(GridError::Parse(_))));
        assert!(matches!(GridCase::from_toml_str("zones = ["), Err(GridError::Parse(_))));
    }

    #[test]
    fn wrong_version_rejected() {
        let mut doc = tiny_doc();
        doc.format_version = 2;
        assert!(matches!(GridCase::try_from(doc), Err(GridError::UnsupportedVersion(2))));
    }

    #[test]
    fn toml_round_trip_is_bit_identical() {
        let case = GridCase::try_from(tiny_doc()).unwrap();
        let text = case.to_toml_string().unwrap();
        assert!(text.starts_with("format_version = 1"), "{text}");
        let back = GridCase::from_toml_str(&text).unwrap();
        assert_eq!(back, case);
        assert_eq!(back.to_toml_string().unwrap(), text);
    }
}
