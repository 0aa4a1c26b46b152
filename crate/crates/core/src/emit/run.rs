use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{
    redispatch, DispatchState, EmitError, InjectionTable, MeasurementFrame, Network, PowerFlowSolution, SolverConfig,
    Timeline,
};
use crate::grid::GridCase;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmitConfig {
    pub step_s: u32,
    pub horizon_s: u64,
    /// Relative standard deviation of load measurement noise.
    pub noise_sigma: f64,
    pub default_power_factor: f64,
    pub redispatch_interval_s: u32,
    /// Dispatch target is forecast net load times `1 + loss_fraction`.
    pub loss_fraction: f64,
    pub tolerance: f64,
    pub max_iter: usize,
    pub dc_fallback: bool,
    /// Repeat snapshots at this rate when set.
    pub upsample_fps: Option<u32>,
    pub upsample_sigma: f64,
}

impl Default for EmitConfig {
    fn default() -> Self {
        EmitConfig {
            step_s: 15,
            horizon_s: 600,
            noise_sigma: 0.01,
            default_power_factor: 0.95,
            redispatch_interval_s: 900,
            loss_fraction: 0.02,
            tolerance: 1e-10,
            max_iter: 20,
            dc_fallback: false,
            upsample_fps: None,
            upsample_sigma: 0.001,
        }
    }
}

impl EmitConfig {
    pub fn solver(&self) -> SolverConfig {
        SolverConfig { tolerance: self.tolerance, max_iter: self.max_iter, dc_fallback: self.dc_fallback }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmissionRun {
    pub frames: Vec<MeasurementFrame>,
    pub redispatch_steps: Vec<usize>,
    /// Dispatch in force at every step.
    pub dispatch: Vec<DispatchState>,
}

fn split(total: f64, keys: &[f64]) -> Vec<f64> {
    let sum: f64 = keys.iter().sum();
    if sum > 0.0 {
        keys.iter().map(|k| total * k / sum).collect()
    } else {
        vec![total / keys.len() as f64; keys.len()]
    }
}

/// Solves one snapshot per timeline instant. Setpoints are re-dispatched
/// at every multiple of the configured interval; in between the slack bus
/// absorbs the imbalance. Each solve starts from the previous converged
/// solution.
pub fn run_emission(
    case: &GridCase,
    inputs: &InjectionTable,
    timeline: &Timeline,
    cfg: &EmitConfig,
) -> Result<EmissionRun, EmitError> {
    let net = Network::from_case(case)?;
    let n = net.len();
    let frames_needed = timeline.frame_count();
    if inputs.load_p_mw.len() < frames_needed {
        return Err(EmitError::InvalidInput(format!(
            "inputs cover {} steps, timeline needs {frames_needed}",
            inputs.load_p_mw.len()
        )));
    }
    let interval = timeline.steps_per(cfg.redispatch_interval_s)?;
    let solver = cfg.solver();
    let base = case.base_mva;
    let bus_index: BTreeMap<u32, usize> = case.buses.iter().enumerate().map(|(i, b)| (b.id, i)).collect();
    let gen_bus: Vec<usize> = case.generators.iter().map(|g| bus_index[&g.bus]).collect();
    let farm_bus: Vec<usize> = case.wind_farms.iter().map(|w| bus_index[&w.bus]).collect();
    let mut gens_at: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (g, &b) in gen_bus.iter().enumerate() {
        gens_at[b].push(g);
    }

    let mut state = DispatchState {
        setpoints_mw: case.generators.iter().map(|g| g.p_min_mw).collect(),
        slack_bus: case.slack_bus,
        last_redispatch_step: None,
        target_mw: f64::NAN,
    };
    let mut run = EmissionRun { frames: Vec::with_capacity(frames_needed), redispatch_steps: Vec::new(), dispatch: Vec::new() };
    let mut previous: Option<PowerFlowSolution> = None;
    for step in 0..frames_needed {
        let load_p = &inputs.load_p_mw[step];
        let load_q = &inputs.load_q_mvar[step];
        let wind = &inputs.wind_mw[step];
        if step % interval == 0 {
            let net_load = inputs.forecast_load_mw[step].iter().sum::<f64>() - wind.iter().sum::<f64>();
            state = redispatch(&state, &case.generators, net_load, cfg.loss_fraction, step, interval)?;
            run.redispatch_steps.push(step);
        }

        let mut wind_at = vec![0.0; n];
        for (w, &b) in wind.iter().zip(&farm_bus) {
            wind_at[b] += w;
        }
        let mut p_spec: Vec<f64> = (0..n).map(|b| (wind_at[b] - load_p[b]) / base).collect();
        for (g, &b) in gen_bus.iter().enumerate() {
            p_spec[b] += state.setpoints_mw[g] / base;
        }
        let q_spec: Vec<f64> = load_q.iter().map(|q| -q / base).collect();

        let flat = net.flat_start();
        let start = match &previous {
            Some(s) if s.converged => (s.vm.as_slice(), s.va.as_slice()),
            _ => (flat.0.as_slice(), flat.1.as_slice()),
        };
        let sol = net.solve(&p_spec, &q_spec, start, &solver)?;

        let mut gen_p = vec![0.0; case.generators.len()];
        let mut gen_q = vec![0.0; case.generators.len()];
        for b in 0..n {
            if gens_at[b].is_empty() {
                continue;
            }
            let bus_p = sol.p[b] * base + load_p[b] - wind_at[b];
            let bus_q = sol.q[b] * base + load_q[b];
            let set: Vec<f64> = gens_at[b].iter().map(|&g| state.setpoints_mw[g]).collect();
            let cap: Vec<f64> = gens_at[b].iter().map(|&g| case.generators[g].p_max_mw).collect();
            for ((&g, p), q) in gens_at[b].iter().zip(split(bus_p, &set)).zip(split(bus_q, &cap)) {
                gen_p[g] = p;
                gen_q[g] = q;
            }
        }
        run.frames.push(MeasurementFrame {
            timestamp_us: timeline.timestamp_us(step),
            vm: sol.vm.clone(),
            va: sol.va.clone(),
            gen_p_mw: gen_p,
            gen_q_mvar: gen_q,
            load_p_mw: load_p.clone(),
            load_q_mvar: load_q.clone(),
            wind_mw: wind.clone(),
            converged: sol.converged,
            iterations: sol.iterations,
            max_mismatch_pu: sol.max_mismatch,
            kind: sol.kind,
        });
        run.dispatch.push(state.clone());
        previous = Some(sol);
    }
    Ok(run)
}
