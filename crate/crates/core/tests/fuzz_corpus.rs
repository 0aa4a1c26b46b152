//! Replays the checked-in fuzz corpus through every parser.

use std::fs;
use std::path::PathBuf;

use gridsynth::demand::{read_load_history, read_minutely_csv, read_prototype};
use gridsynth::emit::TsbFile;
use gridsynth::grid::GridCase;
use gridsynth::pipeline::PipelineConfig;
use gridsynth::wind::{read_secondly_wind, read_wind_5min, read_wind_csv};

fn seeds(target: &str) -> Vec<(PathBuf, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<_> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let p = e.unwrap().path();
            let bytes = fs::read(&p).unwrap();
            (p, bytes)
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

fn text(bytes: &[u8]) -> &str {
    std::str::from_utf8(bytes).unwrap()
}

#[test]
fn case_seeds() {
    for (p, b) in seeds("case") {
        let case = GridCase::from_toml_str(text(&b)).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        assert_eq!(GridCase::from_toml_str(&case.to_toml_string().unwrap()).unwrap(), case);
    }
}

#[test]
fn tsb_seeds() {
    let mut decoded = 0;
    for (_, b) in seeds("tsb") {
        if let Ok(file) = TsbFile::decode(&b) {
            assert_eq!(file.encode().unwrap(), b);
            decoded += 1;
        }
    }
    assert_eq!(decoded, 2);
}

#[test]
fn csv_seeds() {
    for (p, b) in seeds("load_history") {
        read_load_history(b.as_slice()).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
    }
    for (p, b) in seeds("prototype") {
        read_prototype(b.as_slice(), Some(48)).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
    }
    for (p, b) in seeds("wind_5min") {
        read_wind_5min(b.as_slice()).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
    }
    for (p, b) in seeds("wind_secondly") {
        read_secondly_wind(b.as_slice()).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
    }
    for (p, b) in seeds("minutely_csv") {
        read_minutely_csv(b.as_slice()).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
    }
    for (p, b) in seeds("wind_csv") {
        read_wind_csv(b.as_slice()).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
    }
}

#[test]
fn config_seeds() {
    for (p, b) in seeds("config") {
        PipelineConfig::from_toml_str(text(&b)).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
    }
}

#[test]
fn mutated_seeds_do_not_panic() {
    for target in ["case", "tsb", "load_history", "prototype", "wind_5min", "wind_secondly", "minutely_csv", "wind_csv", "config"] {
        for (_, b) in seeds(target) {
            for cut in (0..b.len()).step_by((b.len() / 64).max(1)) {
                let mut m = b[..cut].to_vec();
                m.extend(b[cut..].iter().skip(1));
                if let Some(x) = m.get_mut(cut / 2) {
                    *x ^= 0x5a;
                }
                let s = String::from_utf8_lossy(&m);
                let _ = GridCase::from_toml_str(&s);
                let _ = TsbFile::decode(&m);
                let _ = read_load_history(m.as_slice());
                let _ = read_prototype(m.as_slice(), None);
                let _ = read_wind_5min(m.as_slice());
                let _ = read_secondly_wind(m.as_slice());
                let _ = read_minutely_csv(m.as_slice());
                let _ = read_wind_csv(m.as_slice());
                let _ = PipelineConfig::from_toml_str(&s);
            }
        }
    }
}
