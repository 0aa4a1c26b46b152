use rand_distr::{Distribution, Normal};

use super::{SolutionKind, TsbChannel, TsbFile, TsbFrame, Unit};
use crate::grid::GridCase;
use crate::rng::substream;

/// One power-flow snapshot. Vectors follow case order of buses,
/// generators and wind farms.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementFrame {
    pub timestamp_us: u64,
    pub vm: Vec<f64>,
    pub va: Vec<f64>,
    pub gen_p_mw: Vec<f64>,
    pub gen_q_mvar: Vec<f64>,
    pub load_p_mw: Vec<f64>,
    pub load_q_mvar: Vec<f64>,
    pub wind_mw: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub max_mismatch_pu: f64,
    pub kind: SolutionKind,
}

impl MeasurementFrame {
    /// Values in [`channel_directory`] order.
    pub fn values(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(2 * self.vm.len() + 2 * self.gen_p_mw.len() + 2 * self.load_p_mw.len() + 3);
        for (m, a) in self.vm.iter().zip(&self.va) {
            out.push(*m);
            out.push(*a);
        }
        for (p, q) in self.gen_p_mw.iter().zip(&self.gen_q_mvar) {
            out.push(*p);
            out.push(*q);
        }
        for (p, q) in self.load_p_mw.iter().zip(&self.load_q_mvar) {
            out.push(*p);
            out.push(*q);
        }
        out.extend_from_slice(&self.wind_mw);
        out.push(f64::from(u8::from(self.converged)));
        out.push(self.max_mismatch_pu);
        out
    }
}

pub fn channel_directory(case: &GridCase) -> Vec<TsbChannel> {
    let ch = |name: String, unit| TsbChannel { name, unit };
    let mut out = Vec::new();
    for b in &case.buses {
        out.push(ch(format!("bus_{}_vm", b.id), Unit::PerUnit));
        out.push(ch(format!("bus_{}_va", b.id), Unit::Radian));
    }
    for g in &case.generators {
        out.push(ch(format!("gen_{}_p", g.id), Unit::Megawatt));
        out.push(ch(format!("gen_{}_q", g.id), Unit::Megavar));
    }
    for b in &case.buses {
        out.push(ch(format!("load_{}_p", b.id), Unit::Megawatt));
        out.push(ch(format!("load_{}_q", b.id), Unit::Megavar));
    }
    for w in &case.wind_farms {
        out.push(ch(format!("wind_{}_p", w.id), Unit::Megawatt));
    }
    out.push(ch("converged".into(), Unit::Dimensionless));
    out.push(ch("max_mismatch".into(), Unit::Dimensionless));
    out
}

pub fn frames_to_tsb(case: &GridCase, frames: &[MeasurementFrame]) -> TsbFile {
    TsbFile {
        channels: channel_directory(case),
        frames: frames.iter().map(|f| TsbFrame { timestamp_us: f.timestamp_us, values: f.values() }).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpsampleConfig {
    pub frames_per_second: u32,
    /// Relative noise on per-unit channels of repeated frames.
    pub sigma: f64,
}

impl Default for UpsampleConfig {
    fn default() -> Self {
        UpsampleConfig { frames_per_second: 30, sigma: 0.001 }
    }
}

/// Repeats each snapshot at `frames_per_second` until the next one, adding
/// independent relative noise to per-unit channels. The final snapshot is
/// emitted once, also with noise.
pub fn upsample(file: &TsbFile, cfg: &UpsampleConfig, seed: u64) -> TsbFile {
    let pu: Vec<bool> = file.channels.iter().map(|c| c.unit == Unit::PerUnit).collect();
    let normal = (cfg.sigma > 0.0).then(|| Normal::new(0.0, cfg.sigma).expect("positive sigma"));
    let fps = u64::from(cfg.frames_per_second.max(1));
    let mut frames = Vec::new();
    for (i, f) in file.frames.iter().enumerate() {
        let span_us = file.frames.get(i + 1).map_or(0, |n| n.timestamp_us.saturating_sub(f.timestamp_us));
        let reps = (span_us * fps / 1_000_000).max(1);
        for k in 0..reps {
            let mut rng = substream(seed, "pmu-noise", i as u64, k);
            let values = f
                .values
                .iter()
                .zip(&pu)
                .map(|(v, &is_pu)| match (&normal, is_pu) {
                    (Some(d), true) => v * (1.0 + d.sample(&mut rng)),
                    _ => *v,
                })
                .collect();
            frames.push(TsbFrame { timestamp_us: f.timestamp_us + k * 1_000_000 / fps, values });
        }
    }
    TsbFile { channels: file.channels.clone(), frames }
}
