use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::composition::{CompositionTable, PeriodSchedule};
use crate::demand::{AnnealConfig, AssignmentConfig, DayWindow, FitTolerance, KMeansConfig};
use crate::emit::EmitConfig;
use crate::time::parse_timestamp;
use crate::wind::DEFAULT_LATTICE_SPACING_KM;

/// Input and output locations. Relative paths resolve against the
/// directory holding the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsConfig {
    pub case: PathBuf,
    pub load_history: PathBuf,
    pub prototypes: Vec<PathBuf>,
    pub wind_5min: PathBuf,
    pub wind_secondly: PathBuf,
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    /// First instant of the study window, RFC 3339.
    pub start_utc: String,
    #[serde(default = "one")]
    pub hours: usize,
    /// Instant of the first value in every prototype profile.
    pub prototype_start_utc: String,
    /// Day-of-year windows whose history days feed pattern extraction;
    /// empty means every day.
    #[serde(default)]
    pub season: Vec<DayWindow>,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DemandConfig {
    /// Number of variation patterns.
    pub k: usize,
    pub kmeans_restarts: usize,
    pub kmeans_max_iter: usize,
    pub kmeans_rel_tol: f64,
    /// Distance between a pattern and itself in the assignment objective.
    pub epsilon: f64,
    pub exhaustive_limit: u64,
    pub anneal_iterations: usize,
    pub anneal_final_ratio: f64,
    pub peak_rel_tol: f64,
    pub share_abs_tol: f64,
}

impl Default for DemandConfig {
    fn default() -> Self {
        let km = KMeansConfig::default();
        let asg = AssignmentConfig::default();
        let tol = FitTolerance::default();
        DemandConfig {
            k: 4,
            kmeans_restarts: km.n_init,
            kmeans_max_iter: km.max_iter,
            kmeans_rel_tol: km.rel_tol,
            epsilon: asg.epsilon,
            exhaustive_limit: asg.exhaustive_limit,
            anneal_iterations: asg.anneal.iterations,
            anneal_final_ratio: asg.anneal.final_ratio,
            peak_rel_tol: tol.peak_rel,
            share_abs_tol: tol.share_abs,
        }
    }
}

impl DemandConfig {
    pub fn kmeans(&self) -> KMeansConfig {
        KMeansConfig { max_iter: self.kmeans_max_iter, rel_tol: self.kmeans_rel_tol, n_init: self.kmeans_restarts }
    }

    pub fn assignment(&self) -> AssignmentConfig {
        AssignmentConfig {
            epsilon: self.epsilon,
            exhaustive_limit: self.exhaustive_limit,
            anneal: AnnealConfig { iterations: self.anneal_iterations, final_ratio: self.anneal_final_ratio },
        }
    }

    pub fn tolerance(&self) -> FitTolerance {
        FitTolerance { peak_rel: self.peak_rel_tol, share_abs: self.share_abs_tol }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SigmaFit {
    Empirical,
    Lognormal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindConfig {
    /// Samples per 5-minute window, both ends included.
    pub steps_per_window: usize,
    pub lattice_spacing_km: f64,
    /// Length of the secondly windows used to estimate variation scales.
    pub sigma_window_s: usize,
    /// Advance between those windows; defaults to the window length, so
    /// neighbors share one sample.
    pub sigma_stride_s: Option<usize>,
    pub sigma_fit: SigmaFit,
}

impl Default for WindConfig {
    fn default() -> Self {
        WindConfig {
            steps_per_window: 21,
            lattice_spacing_km: DEFAULT_LATTICE_SPACING_KM,
            sigma_window_s: 300,
            sigma_stride_s: None,
            sigma_fit: SigmaFit::Empirical,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct CompositionConfig {
    pub table: CompositionTable,
    pub periods: PeriodSchedule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputsConfig {
    /// Channels copied to the emission CSV; `*` matches any run of
    /// characters. Empty disables the CSV.
    pub emit_csv_channels: Vec<String>,
}

impl Default for OutputsConfig {
    fn default() -> Self {
        OutputsConfig { emit_csv_channels: vec!["bus_*_vm".into()] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub paths: PathsConfig,
    pub study: StudyConfig,
    #[serde(default)]
    pub demand: DemandConfig,
    #[serde(default)]
    pub wind: WindConfig,
    #[serde(default)]
    pub composition: CompositionConfig,
    #[serde(default)]
    pub emit: EmitConfig,
    #[serde(default)]
    pub outputs: OutputsConfig,
}

fn cfg_err(message: impl Into<String>) -> PipelineError {
    PipelineError::Config(message.into())
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, PipelineError> {
        toml::from_str(text).map_err(|e| cfg_err(e.to_string()))
    }

    /// Reads the file and makes every relative path absolute against its
    /// directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, PipelineError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| cfg_err(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.resolve_paths(&base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        let paths = &mut self.paths;
        fix(&mut paths.case);
        fix(&mut paths.load_history);
        fix(&mut paths.wind_5min);
        fix(&mut paths.wind_secondly);
        fix(&mut paths.output_dir);
        paths.prototypes.iter_mut().for_each(fix);
    }

    pub fn start(&self) -> Result<DateTime<Utc>, PipelineError> {
        parse_timestamp(&self.study.start_utc).map_err(|e| cfg_err(format!("study.start_utc: {e}")))
    }

    pub fn prototype_start(&self) -> Result<DateTime<Utc>, PipelineError> {
        parse_timestamp(&self.study.prototype_start_utc).map_err(|e| cfg_err(format!("study.prototype_start_utc: {e}")))
    }

    /// Checks knob ranges and that every input file exists.
    pub fn validate(&self) -> Result<(), PipelineError> {
        self.start()?;
        self.prototype_start()?;
        if self.study.hours == 0 {
            return Err(cfg_err("study.hours must be at least 1"));
        }
        if self.demand.k == 0 {
            return Err(cfg_err("demand.k must be at least 1"));
        }
        if self.wind.steps_per_window < 2 || 300 % (self.wind.steps_per_window - 1) != 0 {
            return Err(cfg_err("wind.steps_per_window - 1 must divide 300"));
        }
        if self.wind.sigma_window_s == 0 || self.wind.sigma_stride_s == Some(0) {
            return Err(cfg_err("wind sigma window and stride must be positive"));
        }
        if !(self.emit.noise_sigma >= 0.0) {
            return Err(cfg_err("emit.noise_sigma must be >= 0"));
        }
        self.composition.table.validate().map_err(|e| cfg_err(e.to_string()))?;
        self.composition.periods.validate().map_err(|e| cfg_err(e.to_string()))?;
        let p = &self.paths;
        let mut inputs = vec![("case", &p.case), ("load_history", &p.load_history), ("wind_5min", &p.wind_5min)];
        inputs.push(("wind_secondly", &p.wind_secondly));
        inputs.extend(p.prototypes.iter().map(|x| ("prototypes", x)));
        if p.prototypes.is_empty() {
            return Err(cfg_err("paths.prototypes is empty"));
        }
        for (key, path) in inputs {
            if !path.is_file() {
                return Err(cfg_err(format!("paths.{key}: {} does not exist", path.display())));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
seed = 7
[paths]
case = "case.toml"
load_history = "history.csv"
prototypes = ["p/res.csv"]
wind_5min = "w5.csv"
wind_secondly = "w1.csv"
output_dir = "out"
[study]
start_utc = "2016-07-01T14:00:00Z"
prototype_start_utc = "2016-07-01T00:00:00Z"
"#;

    #[test]
    fn defaults_fill_in() {
        let cfg = PipelineConfig::from_toml_str(MINIMAL).unwrap();
        assert_eq!(cfg.demand.k, 4);
        assert_eq!(cfg.wind.steps_per_window, 21);
        assert_eq!(cfg.emit.step_s, 15);
        assert_eq!(cfg.study.hours, 1);
        assert_eq!(cfg.composition.table, CompositionTable::default());
    }

    #[test]
    fn seed_is_mandatory() {
        let text = MINIMAL.replace("seed = 7", "");
        assert!(matches!(PipelineConfig::from_toml_str(&text), Err(PipelineError::Config(m)) if m.contains("seed")));
    }

    #[test]
    fn relative_paths_and_missing_files() {
        let mut cfg = PipelineConfig::from_toml_str(MINIMAL).unwrap();
        cfg.resolve_paths(Path::new("/nowhere"));
        assert_eq!(cfg.paths.case, PathBuf::from("/nowhere/case.toml"));
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("paths.case"), "{err}");
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = format!("{MINIMAL}\n[wind]\nspeed_up = 2\n");
        assert!(PipelineConfig::from_toml_str(&text).is_err());
    }
}
