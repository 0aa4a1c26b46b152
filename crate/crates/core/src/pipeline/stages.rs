use std::fs;
use std::path::{Path, PathBuf};

use chrono::{TimeDelta, Timelike};
use serde_json::json;

use super::manifest::{sha256_hex, Manifest, StageRecord};
use super::{PipelineConfig, PipelineError, SigmaFit, StageError};
use crate::composition::{classify_period, compose_case, write_composition_csv};
use crate::demand::{
    assign_patterns, collect_scaled_samples, extract_patterns, fit_bus_weights, hourly_bus_load, nearest_prototypes,
    read_load_history, read_minutely_csv, read_prototype, rescale_bus_window, write_minutely_csv, LoadPatternLibrary,
    MinuteLoadTable, SolverMethod, ZoneAssignment,
};
use crate::emit::{
    build_timeline_inputs, export_csv, frames_to_tsb, run_emission, upsample, Timeline,
    UpsampleConfig,
};
use crate::grid::{GridCase, GridError};
use crate::time::format_timestamp;
use crate::wind::{
    build_reference_lattice, estimate_sigma_distribution, farm_power_series, read_secondly_wind, read_wind_5min,
    read_wind_csv, synthesize_farm_speeds, write_wind_csv, TurbineCurve, WindTable, FIVE_MINUTES_S,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Demand,
    Wind,
    Compose,
    Emit,
    All,
}

pub const MINUTELY_LOAD: &str = "demand/minutely_load.csv";
pub const WIND_POWER: &str = "wind/wind_power.csv";

/// Collects files written by one stage together with their digests.
struct StageWriter<'a> {
    stage: &'static str,
    out_dir: &'a Path,
    record: StageRecord,
}

impl<'a> StageWriter<'a> {
    fn new(stage: &'static str, cfg: &'a PipelineConfig) -> Result<Self, PipelineError> {
        let out_dir = cfg.paths.output_dir.as_path();
        fs::create_dir_all(out_dir.join(stage)).map_err(|e| PipelineError::runtime(stage, e))?;
        let mut settings = serde_json::to_value(cfg).expect("config serializes");
        if let Some(obj) = settings.as_object_mut() {
            obj.remove("paths");
            obj.remove("seed");
        }
        let record = StageRecord {
            seed: cfg.seed,
            settings_sha256: sha256_hex(settings.to_string().as_bytes()),
            ..Default::default()
        };
        Ok(StageWriter { stage, out_dir, record })
    }

    fn read_input(&mut self, key: &str, path: &Path) -> Result<Vec<u8>, PipelineError> {
        let bytes = fs::read(path).map_err(|e| PipelineError::input(self.stage, format!("{}: {e}", path.display())))?;
        self.record.inputs.insert(key.to_string(), sha256_hex(&bytes));
        Ok(bytes)
    }

    fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<(), PipelineError> {
        fs::write(self.out_dir.join(rel), bytes).map_err(|e| PipelineError::runtime(self.stage, e))?;
        self.record.outputs.insert(rel.to_string(), sha256_hex(bytes));
        Ok(())
    }

    fn metric(&mut self, key: &str, value: serde_json::Value) {
        self.record.metrics.insert(key.to_string(), value);
    }

    fn finish(self) -> Result<StageRecord, PipelineError> {
        let mut manifest = Manifest::load_or_default(self.out_dir)?;
        manifest.stages.insert(self.stage.to_string(), self.record.clone());
        manifest.save(self.out_dir)?;
        Ok(self.record)
    }
}

fn load_case(w: &mut StageWriter, cfg: &PipelineConfig) -> Result<GridCase, PipelineError> {
    let bytes = w.read_input("case", &cfg.paths.case)?;
    let text = String::from_utf8(bytes).map_err(|e| PipelineError::input(w.stage, format!("case: {e}")))?;
    GridCase::from_toml_str(&text).map_err(|e: GridError| e.at(w.stage))
}

/// Shortest text that parses back to the same value.
fn csv_cell(v: f64) -> String {
    format!("{v}")
}

fn single_zone_assignment(case: &GridCase, lib: &LoadPatternLibrary) -> ZoneAssignment {
    let mut cardinalities = vec![0; lib.k()];
    cardinalities[0] = 1;
    ZoneAssignment {
        zone_ids: vec![case.zones[0].id],
        labels: vec![0],
        k: lib.k(),
        cardinalities,
        objective_value: 0.0,
        method: SolverMethod::Exhaustive,
    }
}

/// Hourly bus loads, patterns, zone assignment and minutely loads.
pub fn cmd_demand(cfg: &PipelineConfig) -> Result<StageRecord, PipelineError> {
    const STAGE: &str = "demand";
    cfg.validate()?;
    let mut w = StageWriter::new(STAGE, cfg)?;
    let case = load_case(&mut w, cfg)?;
    let start = cfg.start()?;
    let offset = start - cfg.prototype_start()?;
    if offset < TimeDelta::zero() || offset.num_seconds() % 3600 != 0 || offset.subsec_nanos() != 0 {
        return Err(PipelineError::Config(
            "study.start_utc must be a whole number of hours after study.prototype_start_utc".into(),
        ));
    }
    let first_hour = (offset.num_seconds() / 3600) as usize;
    let hours = cfg.study.hours;

    let mut protos = Vec::with_capacity(cfg.paths.prototypes.len());
    for (i, path) in cfg.paths.prototypes.iter().enumerate() {
        let bytes = w.read_input(&format!("prototypes/{i}"), path)?;
        let p = read_prototype(bytes.as_slice(), None)
            .map_err(|e| PipelineError::input(STAGE, format!("{}: {e}", path.display())))?;
        protos.push(p);
    }
    let mut hourly = Vec::with_capacity(case.buses.len());
    let mut weights_csv = String::from(
        "bus_id,weight_residential,weight_commercial,weight_industrial,peak_mw,peak_residual_rel,\
         share_residential,share_commercial,share_industrial,within_tolerance\n",
    );
    let mut outside = 0usize;
    for bus in &case.buses {
        let cands = nearest_prototypes(bus.location, &protos).map_err(|e| e.at(STAGE))?;
        let fit = fit_bus_weights(bus, cands, &cfg.demand.tolerance())
            .map_err(|e| PipelineError::input(STAGE, format!("bus {}: {e}", bus.id)))?;
        outside += usize::from(!fit.within_tolerance);
        let mut row = vec![bus.id.to_string()];
        row.extend(fit.weights.iter().map(|v| csv_cell(*v)));
        row.push(csv_cell(fit.peak_mw));
        row.push(csv_cell(fit.peak_residual_rel));
        row.extend(fit.shares.iter().map(|v| csv_cell(*v)));
        row.push(fit.within_tolerance.to_string());
        weights_csv.push_str(&row.join(","));
        weights_csv.push('\n');
        hourly.push(hourly_bus_load(bus.id, &fit.weights, cands));
    }

    let history_bytes = w.read_input("load_history", &cfg.paths.load_history)?;
    let history = read_load_history(history_bytes.as_slice()).map_err(|e| e.at(STAGE))?;
    if let Some(d) = history.first() {
        if d.minutes.len() != 61 {
            return Err(PipelineError::input(
                STAGE,
                format!("load history must hold minutes 0..=60 of the study hour, found {}", d.minutes.len()),
            ));
        }
    }
    let samples = collect_scaled_samples(&history, &cfg.study.season).map_err(|e| e.at(STAGE))?;
    let lib = extract_patterns(&samples, cfg.demand.k, cfg.seed, &cfg.demand.kmeans()).map_err(|e| e.at(STAGE))?;
    let assignment = if case.zones.len() == 1 {
        single_zone_assignment(&case, &lib)
    } else {
        assign_patterns(&case.zones, &lib, cfg.seed, &cfg.demand.assignment()).map_err(|e| e.at(STAGE))?
    };

    let mut loads = Vec::with_capacity(case.buses.len());
    let mut hourly_csv = String::from("bus_id,hour,timestamp_utc,load_mw\n");
    for (bus, h) in case.buses.iter().zip(&hourly) {
        let series = rescale_bus_window(h, bus.zone_id, &assignment, &lib, first_hour, hours)
            .map_err(|e| PipelineError::input(STAGE, format!("bus {}: {e}", bus.id)))?;
        for hour in first_hour..=first_hour + hours {
            let t = start + TimeDelta::hours((hour - first_hour) as i64);
            hourly_csv.push_str(&format!(
                "{},{hour},{},{}\n",
                bus.id,
                format_timestamp(&t),
                csv_cell(h.hourly_mw[hour])
            ));
        }
        loads.push(series);
    }

    let mut buf = Vec::new();
    write_minutely_csv(&mut buf, &MinuteLoadTable::from_loads(start, &loads)).map_err(|e| e.at(STAGE))?;
    w.write(MINUTELY_LOAD, &buf)?;
    w.write("demand/hourly_load.csv", hourly_csv.as_bytes())?;
    w.write("demand/weights.csv", weights_csv.as_bytes())?;

    let m = lib.patterns.first().map_or(0, Vec::len);
    let mut patterns_csv = String::from("pattern,probability");
    for i in 0..m {
        patterns_csv.push_str(&format!(",minute_{i}"));
    }
    patterns_csv.push('\n');
    for (k, (p, prob)) in lib.patterns.iter().zip(&lib.probabilities).enumerate() {
        patterns_csv.push_str(&format!("{k},{}", csv_cell(*prob)));
        for v in p {
            patterns_csv.push(',');
            patterns_csv.push_str(&csv_cell(*v));
        }
        patterns_csv.push('\n');
    }
    w.write("demand/patterns.csv", patterns_csv.as_bytes())?;

    let method = match assignment.method {
        SolverMethod::Exhaustive => "exhaustive",
        SolverMethod::Annealing => "annealing",
    };
    let report = json!({
        "k": assignment.k,
        "method": method,
        "objective": assignment.objective_value,
        "cardinalities": assignment.cardinalities,
        "probabilities": lib.probabilities,
        "samples": lib.source_count,
        "inertia": lib.inertia,
        "zones": assignment.zone_ids.iter().zip(&assignment.labels)
            .map(|(z, l)| json!({"zone": z, "pattern": l}))
            .collect::<Vec<_>>(),
    });
    let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
    text.push('\n');
    w.write("demand/assignment.json", text.as_bytes())?;

    w.metric("objective", json!(assignment.objective_value));
    w.metric("method", json!(method));
    w.metric("patterns", json!(lib.k()));
    w.metric("history_days_used", json!(lib.source_count));
    w.metric("weight_fits_outside_tolerance", json!(outside));
    w.finish()
}

/// Fine-resolution wind speed and power for every farm.
pub fn cmd_wind(cfg: &PipelineConfig) -> Result<StageRecord, PipelineError> {
    const STAGE: &str = "wind";
    cfg.validate()?;
    let mut w = StageWriter::new(STAGE, cfg)?;
    let case = load_case(&mut w, cfg)?;
    if case.wind_farms.is_empty() {
        return Err(PipelineError::input(STAGE, "case has no wind farms"));
    }
    let bytes = w.read_input("wind_5min", &cfg.paths.wind_5min)?;
    let five = read_wind_5min(bytes.as_slice()).map_err(|e| e.at(STAGE))?;
    let bytes = w.read_input("wind_secondly", &cfg.paths.wind_secondly)?;
    let segments = read_secondly_wind(bytes.as_slice()).map_err(|e| e.at(STAGE))?;

    let wc = &cfg.wind;
    let values: Vec<Vec<f64>> = segments.into_iter().map(|s| s.values).collect();
    let mut psi = estimate_sigma_distribution(&values, wc.sigma_window_s + 1, wc.sigma_stride_s.unwrap_or(wc.sigma_window_s))
        .map_err(|e| e.at(STAGE))?;
    if wc.sigma_fit == SigmaFit::Lognormal {
        let fit = psi.fit_lognormal().map_err(|e| e.at(STAGE))?;
        w.metric("lognormal_mu", json!(fit.mu));
        w.metric("lognormal_sigma", json!(fit.sigma));
    }
    let mut sigma_csv = String::from("window,sigma\n");
    for (i, s) in psi.samples.iter().enumerate() {
        sigma_csv.push_str(&format!("{i},{}\n", csv_cell(*s)));
    }

    let lattice = build_reference_lattice(&case.wind_farms, &case.correlation_curve, wc.lattice_spacing_km)
        .map_err(|e| e.at(STAGE))?;
    let mut lattice_csv = String::from("point,lat,lon");
    for id in &lattice.farm_ids {
        lattice_csv.push_str(&format!(",weight_farm_{id}"));
    }
    lattice_csv.push('\n');
    for (n, p) in lattice.points.iter().enumerate() {
        lattice_csv.push_str(&format!("{n},{},{}", csv_cell(p.lat), csv_cell(p.lon)));
        for row in &lattice.weights {
            lattice_csv.push_str(&format!(",{}", csv_cell(row[n])));
        }
        lattice_csv.push('\n');
    }

    let speeds = synthesize_farm_speeds(&lattice, &psi, &five, wc.steps_per_window, cfg.seed).map_err(|e| e.at(STAGE))?;
    let step_s = i64::from(FIVE_MINUTES_S) / (wc.steps_per_window as i64 - 1);
    let start = five[0].start;
    let len = speeds.first().map_or(0, |s| s.speeds.len());
    let timestamps: Vec<_> = (0..len).map(|k| start + TimeDelta::seconds(step_s * k as i64)).collect();

    let mut power_cols = Vec::with_capacity(speeds.len());
    for s in &speeds {
        let farm = case.wind_farms.iter().find(|f| f.id == s.farm_id).expect("lattice farms come from the case");
        let params = case.turbine_curve(farm.turbine_curve).expect("validated case");
        let curve = TurbineCurve::new(params).map_err(|e| e.at(STAGE))?;
        power_cols.push(farm_power_series(farm.rated_mw, &s.speeds, &curve));
    }
    let farm_ids: Vec<u32> = speeds.iter().map(|s| s.farm_id).collect();
    let speed_table = WindTable {
        timestamps: timestamps.clone(),
        farm_ids: farm_ids.clone(),
        columns: speeds.into_iter().map(|s| s.speeds).collect(),
    };
    let power_table = WindTable { timestamps, farm_ids, columns: power_cols };

    let mut buf = Vec::new();
    write_wind_csv(&mut buf, &speed_table, false).map_err(|e| e.at(STAGE))?;
    w.write("wind/wind_speed.csv", &buf)?;
    let mut buf = Vec::new();
    write_wind_csv(&mut buf, &power_table, true).map_err(|e| e.at(STAGE))?;
    w.write(WIND_POWER, &buf)?;
    w.write("wind/sigma_samples.csv", sigma_csv.as_bytes())?;
    w.write("wind/lattice.csv", lattice_csv.as_bytes())?;

    w.metric("step_s", json!(step_s));
    w.metric("samples", json!(len));
    w.metric("sigma_windows", json!(psi.samples.len()));
    w.metric("lattice_points", json!(lattice.points.len()));
    w.finish()
}

/// Load composition of every bus for each period touched by the study hours.
pub fn cmd_compose(cfg: &PipelineConfig) -> Result<StageRecord, PipelineError> {
    const STAGE: &str = "compose";
    cfg.validate()?;
    let mut w = StageWriter::new(STAGE, cfg)?;
    let case = load_case(&mut w, cfg)?;
    let start = cfg.start()?;
    let mut periods = Vec::new();
    for h in 0..cfg.study.hours {
        let hour = (start + TimeDelta::hours(h as i64)).hour();
        let p = classify_period(hour, &cfg.composition.periods).map_err(|e| e.at(STAGE))?;
        if !periods.contains(&p) {
            periods.push(p);
        }
    }
    let mut rows = Vec::new();
    for &p in &periods {
        rows.extend(compose_case(&case.buses, p, &cfg.composition.table).map_err(|e| e.at(STAGE))?);
    }
    let mut buf = Vec::new();
    write_composition_csv(&mut buf, &rows).map_err(|e| e.at(STAGE))?;
    w.write("compose/composition.csv", &buf)?;
    w.metric("periods", json!(periods.iter().map(|p| p.name()).collect::<Vec<_>>()));
    w.finish()
}

fn glob_match(pattern: &str, name: &str) -> bool {
    let parts: Vec<&str> = pattern.split('*').collect();
    if parts.len() == 1 {
        return pattern == name;
    }
    let (first, last) = (parts[0], parts[parts.len() - 1]);
    if !name.starts_with(first) || name.len() < first.len() + last.len() || !name.ends_with(last) {
        return false;
    }
    let mut rest = &name[first.len()..name.len() - last.len()];
    for mid in &parts[1..parts.len() - 1] {
        match rest.find(mid) {
            Some(i) => rest = &rest[i + mid.len()..],
            None => return false,
        }
    }
    true
}

fn stage_output(cfg: &PipelineConfig, rel: &str) -> PathBuf {
    cfg.paths.output_dir.join(rel)
}

/// Power-flow snapshots over the emission horizon, from the demand and wind
/// stage outputs.
pub fn cmd_emit(cfg: &PipelineConfig) -> Result<StageRecord, PipelineError> {
    const STAGE: &str = "emit";
    cfg.validate()?;
    let mut w = StageWriter::new(STAGE, cfg)?;
    let case = load_case(&mut w, cfg)?;
    let need = |rel: &str, producer: &str| -> Result<PathBuf, PipelineError> {
        let p = stage_output(cfg, rel);
        if p.is_file() {
            Ok(p)
        } else {
            Err(PipelineError::input(STAGE, format!("{} is missing; run the {producer} stage first", p.display())))
        }
    };
    let bytes = w.read_input(MINUTELY_LOAD, &need(MINUTELY_LOAD, "demand")?)?;
    let loads = read_minutely_csv(bytes.as_slice()).map_err(|e| e.at(STAGE))?;
    let wind = if case.wind_farms.is_empty() {
        None
    } else {
        let bytes = w.read_input(WIND_POWER, &need(WIND_POWER, "wind")?)?;
        Some(read_wind_csv(bytes.as_slice()).map_err(|e| e.at(STAGE))?)
    };

    let ec = &cfg.emit;
    let timeline = Timeline::spanning(cfg.start()?, ec.step_s, ec.horizon_s).map_err(|e| e.at(STAGE))?;
    let inputs =
        build_timeline_inputs(&case, &loads, wind.as_ref(), &timeline, ec.noise_sigma, ec.default_power_factor, cfg.seed)
            .map_err(|e| e.at(STAGE))?;
    let run = run_emission(&case, &inputs, &timeline, ec).map_err(|e| e.at(STAGE))?;
    let tsb = frames_to_tsb(&case, &run.frames);
    w.write("emit/frames.tsb", &tsb.encode().map_err(|e| PipelineError::runtime(STAGE, e))?)?;

    let patterns = &cfg.outputs.emit_csv_channels;
    if !patterns.is_empty() {
        let mut selection: Vec<&str> = Vec::new();
        for pat in patterns {
            let before = selection.len();
            for c in &tsb.channels {
                if glob_match(pat, &c.name) && !selection.contains(&c.name.as_str()) {
                    selection.push(&c.name);
                }
            }
            if selection.len() == before && !pat.contains('*') {
                return Err(PipelineError::input(STAGE, format!("unknown channel '{pat}'")));
            }
        }
        let mut buf = Vec::new();
        export_csv(&tsb, &selection, &mut buf).map_err(|e| e.at(STAGE))?;
        w.write("emit/frames.csv", &buf)?;
    }
    if let Some(fps) = ec.upsample_fps {
        let up = upsample(&tsb, &UpsampleConfig { frames_per_second: fps, sigma: ec.upsample_sigma }, cfg.seed);
        w.write("emit/frames_upsampled.tsb", &up.encode().map_err(|e| PipelineError::runtime(STAGE, e))?)?;
    }

    let converged = run.frames.iter().filter(|f| f.converged).count();
    let worst = run.frames.iter().map(|f| f.max_mismatch_pu).fold(0.0, f64::max);
    let summary = json!({
        "frames": run.frames.len(),
        "converged_frames": converged,
        "max_mismatch_pu": worst,
        "iterations": run.frames.iter().map(|f| f.iterations).collect::<Vec<_>>(),
        "redispatch_steps": run.redispatch_steps,
        "channels": tsb.channels.len(),
    });
    let mut text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    text.push('\n');
    w.write("emit/summary.json", text.as_bytes())?;
    w.metric("frames", json!(run.frames.len()));
    w.metric("converged_frames", json!(converged));
    w.metric("max_mismatch_pu", json!(worst));
    w.finish()
}

/// Runs every stage in order and returns the combined manifest.
pub fn cmd_all(cfg: &PipelineConfig) -> Result<Manifest, PipelineError> {
    cmd_demand(cfg)?;
    cmd_wind(cfg)?;
    cmd_compose(cfg)?;
    cmd_emit(cfg)?;
    Manifest::load_or_default(&cfg.paths.output_dir)
}

pub fn run_command(cmd: Command, cfg: &PipelineConfig) -> Result<Manifest, PipelineError> {
    match cmd {
        Command::All => return cmd_all(cfg),
        Command::Demand => cmd_demand(cfg)?,
        Command::Wind => cmd_wind(cfg)?,
        Command::Compose => cmd_compose(cfg)?,
        Command::Emit => cmd_emit(cfg)?,
    };
    Manifest::load_or_default(&cfg.paths.output_dir)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn channel_globs() {
        assert!(glob_match("bus_*_vm", "bus_12_vm"));
        assert!(!glob_match("bus_*_vm", "bus_12_va"));
        assert!(glob_match("*", "converged"));
        assert!(glob_match("gen_1_p", "gen_1_p"));
        assert!(!glob_match("gen_1_p", "gen_11_p"));
        assert!(glob_match("a*b*c", "aXbYc"));
        assert!(!glob_match("ab*ba", "aba"));
    }
}
