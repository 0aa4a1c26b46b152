use std::fs;
use std::path::Path;

use gridsynth::composition::{compose, Period};
use gridsynth::demand::read_minutely_csv;
use gridsynth::emit::TsbFile;
use gridsynth::grid::{GridCase, WindFarm};
use gridsynth::pipeline::{
    cmd_all, cmd_compose, cmd_demand, cmd_emit, cmd_wind, make_fixtures, mini40_case, PipelineConfig, PipelineError,
};
use gridsynth::wind::{build_reference_lattice, read_wind_5min, read_wind_csv, DEFAULT_LATTICE_SPACING_KM};

fn setup(seed: u64) -> (tempfile::TempDir, PipelineConfig) {
    let dir = tempfile::tempdir().unwrap();
    let set = make_fixtures(dir.path(), seed).unwrap();
    let cfg = PipelineConfig::load(&set.config).unwrap();
    (dir, cfg)
}

fn read(cfg: &PipelineConfig, rel: &str) -> Vec<u8> {
    fs::read(cfg.paths.output_dir.join(rel)).unwrap()
}

fn csv_rows(bytes: &[u8]) -> (Vec<String>, Vec<Vec<String>>) {
    let mut rdr = csv::Reader::from_reader(bytes);
    let header = rdr.headers().unwrap().iter().map(String::from).collect();
    let rows = rdr.records().map(|r| r.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

#[test]
fn missing_history_is_a_validation_error() {
    let (_dir, mut cfg) = setup(1);
    cfg.paths.load_history = cfg.paths.load_history.with_file_name("absent.csv");
    let err = cmd_demand(&cfg).unwrap_err();
    assert!(matches!(err, PipelineError::Config(ref m) if m.contains("load_history")), "{err}");
    assert_eq!(err.exit_code(), 1);
}

#[test]
fn demand_manifest_is_stable() {
    let (_dir, cfg) = setup(2);
    let first = cmd_demand(&cfg).unwrap();
    let manifest = read(&cfg, "manifest.json");
    let second = cmd_demand(&cfg).unwrap();
    assert_eq!(first, second);
    assert_eq!(manifest, read(&cfg, "manifest.json"));
    assert_eq!(first.inputs.len(), 11);
    assert!(first.outputs.contains_key("demand/minutely_load.csv"));
    let text = String::from_utf8(manifest).unwrap();
    assert!(!text.contains(&*cfg.paths.output_dir.to_string_lossy()));
}

fn entropy(zd: &[Vec<f64>], pd: &[Vec<f64>], labels: &[usize]) -> f64 {
    let mut q = Vec::new();
    for a in 0..labels.len() {
        for b in a + 1..labels.len() {
            q.push(zd[a][b] / pd[labels[a]][labels[b]]);
        }
    }
    let s: f64 = q.iter().sum();
    -q.iter().map(|x| x / s).filter(|p| *p > 0.0).map(|p| p * p.log10()).sum::<f64>()
}

#[test]
fn fixture_objective_is_the_enumeration_optimum() {
    let (_dir, cfg) = setup(3);
    cmd_demand(&cfg).unwrap();
    let report: serde_json::Value = serde_json::from_slice(&read(&cfg, "demand/assignment.json")).unwrap();
    let (_, rows) = csv_rows(&read(&cfg, "demand/patterns.csv"));
    let patterns: Vec<Vec<f64>> = rows.iter().map(|r| r[2..].iter().map(|v| v.parse().unwrap()).collect()).collect();
    let k = patterns.len();
    let pd: Vec<Vec<f64>> = (0..k)
        .map(|a| {
            (0..k)
                .map(|b| {
                    let d: f64 = patterns[a].iter().zip(&patterns[b]).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
                    if a == b { 1e-6 } else { d.max(1e-6) }
                })
                .collect()
        })
        .collect();
    let case = GridCase::try_from(mini40_case()).unwrap();
    let zd: Vec<Vec<f64>> = case
        .zones
        .iter()
        .map(|a| case.zones.iter().map(|b| a.centroid.distance_km(&b.centroid)).collect())
        .collect();
    let counts: Vec<usize> =
        report["cardinalities"].as_array().unwrap().iter().map(|v| v.as_u64().unwrap() as usize).collect();
    let z = zd.len();
    let mut best = f64::NEG_INFINITY;
    let mut labels = vec![0; z];
    for code in 0..k.pow(z as u32) {
        let mut c = code;
        let mut used = vec![0; k];
        for l in labels.iter_mut() {
            *l = c % k;
            used[*l] += 1;
            c /= k;
        }
        if used == counts {
            best = best.max(entropy(&zd, &pd, &labels));
        }
    }
    let objective = report["objective"].as_f64().unwrap();
    assert!((objective - best).abs() <= 1e-12, "{objective} vs {best}");
    assert_eq!(report["method"], "exhaustive");
}

#[test]
fn fixture_lattice_weights_match_reference() {
    let case = GridCase::try_from(mini40_case()).unwrap();
    let lattice = build_reference_lattice(&case.wind_farms, &case.correlation_curve, DEFAULT_LATTICE_SPACING_KM).unwrap();
    assert_eq!(lattice.points.len(), 20);
    let expected: [(usize, &[(usize, f64)], f64); 6] = [
        (0, &[(5, 0.017406312749197128), (9, 0.68079927575827648)], 0.69820558850747361),
        (1, &[(5, 0.033667671256783716), (9, 0.46648732927692799), (10, 0.011811072685227297)], 0.51196607321893894),
        (2, &[(9, 0.32132444069332666), (10, 0.10946764192315978)], 0.43079208261648644),
        (3, &[(9, 0.47968991126985316), (10, 0.023172861553653945), (13, 0.022178641672150334)], 0.52504141449565744),
        (4, &[(9, 0.85218815475341769), (10, 0.00077565216444264173), (13, 0.0024974544255607078)], 0.85546126134342104),
        (5, &[(5, 0.013276673226263691), (6, 0.71730657542869258)], 0.73058324865495627),
    ];
    for (e, nonzero, omega) in expected {
        for (n, w) in lattice.weights[e].iter().enumerate() {
            let want = nonzero.iter().find(|(i, _)| *i == n).map_or(0.0, |(_, v)| *v);
            assert!((w - want).abs() < 1e-12, "farm {e} point {n}: {w} vs {want}");
        }
        assert!((lattice.omega[e] - omega).abs() < 1e-12);
    }
    assert!((lattice.points[9].lat - 32.8959296355124).abs() < 1e-12);
    assert!((lattice.points[9].lon + 102.6).abs() < 1e-12);
}

#[test]
fn zero_variation_reproduces_interpolation() {
    let (dir, cfg) = setup(4);
    let mut flat = String::from("timestamp_utc,speed_mps\n");
    for s in 0..1201 {
        flat.push_str(&format!("2016-06-15T00:{:02}:{:02}Z,7.5\n", s / 60, s % 60));
    }
    fs::write(dir.path().join("wind_secondly.csv"), flat).unwrap();
    cmd_wind(&cfg).unwrap();
    let five = read_wind_5min(fs::read(dir.path().join("wind_5min.csv")).unwrap().as_slice()).unwrap();
    let table = read_wind_csv(read(&cfg, "wind/wind_speed.csv").as_slice()).unwrap();
    for (id, col) in table.farm_ids.iter().zip(&table.columns) {
        let input = five.iter().find(|f| f.farm_id == *id).unwrap();
        for (k, v) in col.iter().enumerate() {
            let (w, s) = (k / 20, k % 20);
            let want = if s == 0 {
                input.values[w]
            } else {
                input.values[w] + (input.values[w + 1] - input.values[w]) * s as f64 / 20.0
            };
            assert!((v - want).abs() < 1e-12, "farm {id} sample {k}: {v} vs {want}");
        }
    }
}

#[test]
fn wind_total_is_the_column_sum() {
    let (_dir, cfg) = setup(5);
    let record = cmd_wind(&cfg).unwrap();
    assert_eq!(record.metrics["step_s"], 15);
    let (header, rows) = csv_rows(&read(&cfg, "wind/wind_power.csv"));
    assert_eq!(header.last().unwrap(), "total_mw");
    assert_eq!(rows.len(), 241);
    for r in rows {
        let vals: Vec<f64> = r[1..].iter().map(|v| v.parse().unwrap()).collect();
        let (total, farms) = vals.split_last().unwrap();
        assert!((farms.iter().sum::<f64>() - total).abs() < 1e-9);
    }
    let again = cmd_wind(&cfg).unwrap();
    assert_eq!(record, again);
}

#[test]
fn composition_rows() {
    let (_dir, cfg) = setup(6);
    cmd_compose(&cfg).unwrap();
    let (_, rows) = csv_rows(&read(&cfg, "compose/composition.csv"));
    assert_eq!(rows.len(), 40);
    let bus2 = rows.iter().find(|r| r[0] == "2").unwrap();
    assert_eq!(bus2[1..], ["peak", "0.080000", "0.070000", "0.020000", "0.340000", "0.150000", "0.340000"]);
    for r in &rows {
        let s: f64 = r[2..].iter().map(|v| v.parse::<f64>().unwrap()).sum();
        assert!((s - 1.0).abs() < 1e-5);
    }
    let case = GridCase::try_from(mini40_case()).unwrap();
    let mixed = compose(case.bus(1).unwrap(), Period::Peak, &Default::default()).unwrap();
    let golden = [0.1035, 0.1045, 0.049, 0.253, 0.18, 0.31];
    for (g, m) in golden.iter().zip(mixed.fractions) {
        assert!((g - m).abs() < 1e-12, "{m} vs {g}");
    }
}

#[test]
fn emit_reuses_stage_outputs() {
    let (dir, cfg) = setup(7);
    cmd_demand(&cfg).unwrap();
    cmd_wind(&cfg).unwrap();
    fs::write(dir.path().join("load_history.csv"), "broken").unwrap();
    fs::write(dir.path().join("wind_secondly.csv"), "broken").unwrap();
    let record = cmd_emit(&cfg).unwrap();
    assert_eq!(record.metrics["frames"], 41);
    assert_eq!(record.metrics["converged_frames"], 41);
    let file = TsbFile::decode(&read(&cfg, "emit/frames.tsb")).unwrap();
    assert_eq!(file.frames.len(), 41);
    assert_eq!(file.frames[40].timestamp_us - file.frames[0].timestamp_us, 600_000_000);

    let loads = read_minutely_csv(read(&cfg, "demand/minutely_load.csv").as_slice()).unwrap();
    assert_eq!(loads.minutes(), 61);
    assert_eq!(loads.bus_ids.len(), 40);

    let (header, rows) = csv_rows(&read(&cfg, "emit/frames.csv"));
    assert_eq!(header.len(), 41);
    for (row, frame) in rows.iter().zip(&file.frames) {
        for (name, cell) in header[1..].iter().zip(&row[1..]) {
            let exact = frame.values[file.channel_index(name).unwrap()];
            let parsed: f64 = cell.parse().unwrap();
            assert!(((parsed - exact) / exact).abs() <= 5e-9);
        }
    }
}

#[test]
fn emit_without_demand_output_is_an_input_error() {
    let (_dir, cfg) = setup(8);
    let err = cmd_emit(&cfg).unwrap_err();
    assert_eq!(err.exit_code(), 1);
    assert!(err.to_string().contains("run the demand stage first"), "{err}");
}

#[test]
fn upsampled_stream() {
    let (_dir, mut cfg) = setup(9);
    cfg.emit.upsample_fps = Some(30);
    cmd_all(&cfg).unwrap();
    let up = TsbFile::decode(&read(&cfg, "emit/frames_upsampled.tsb")).unwrap();
    assert_eq!(up.frames.len(), 40 * 450 + 1);
    assert_eq!(up.frames[1].timestamp_us - up.frames[0].timestamp_us, 33_333);
}

#[test]
fn uncovered_farm_is_reported() {
    let (dir, cfg) = setup(10);
    let mut doc = mini40_case();
    doc.wind_farms.push(WindFarm { id: 7, bus: 3, lat: 30.0, lon: -97.0, rated_mw: 50.0, turbine_curve: 1 });
    fs::write(dir.path().join("case.toml"), toml::to_string(&doc).unwrap()).unwrap();
    let err = cmd_wind(&cfg).unwrap_err();
    assert_eq!(err.exit_code(), 1);
    assert!(err.to_string().contains("wind farm 7"), "{err}");
}

#[test]
fn all_stages_share_one_manifest() {
    let (_dir, cfg) = setup(12);
    let manifest = cmd_all(&cfg).unwrap();
    let stages: Vec<&str> = manifest.stages.keys().map(String::as_str).collect();
    assert_eq!(stages, ["compose", "demand", "emit", "wind"]);
    assert!(manifest.stages.values().all(|s| s.seed == 12));
    assert_eq!(manifest.stages["emit"].inputs["demand/minutely_load.csv"], manifest.stages["demand"].outputs["demand/minutely_load.csv"]);
    assert!(Path::new(&cfg.paths.output_dir.join("manifest.json")).is_file());
}
