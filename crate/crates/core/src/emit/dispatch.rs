use super::EmitError;
use crate::grid::Generator;

#[derive(Debug, Clone, PartialEq)]
pub struct DispatchState {
    /// One setpoint per generator, case order.
    pub setpoints_mw: Vec<f64>,
    pub slack_bus: u32,
    pub last_redispatch_step: Option<usize>,
    /// Net load the setpoints were sized for.
    pub target_mw: f64,
}

/// Splits `target_mw` across generators in proportion to participation,
/// clamped to each unit's limits. Units with zero participation sit at
/// their minimum.
///
/// The result is `clamp(lambda * participation, p_min, p_max)` for the
/// `lambda` that meets the target, found exactly from the sorted clamp
/// breakpoints.
pub fn allocate_dispatch(generators: &[Generator], target_mw: f64) -> Result<Vec<f64>, EmitError> {
    if !target_mw.is_finite() {
        return Err(EmitError::InvalidInput(format!("dispatch target {target_mw} is not finite")));
    }
    let at = |lambda: f64| -> f64 {
        generators.iter().map(|g| (lambda * g.participation).clamp(g.p_min_mw, g.p_max_mw)).sum()
    };
    let floor: f64 = generators.iter().map(|g| g.p_min_mw).sum();
    let ceiling: f64 = generators.iter().map(|g| if g.participation > 0.0 { g.p_max_mw } else { g.p_min_mw }).sum();
    if target_mw > ceiling + 1e-9 {
        return Err(EmitError::Infeasible { shortfall_mw: target_mw - ceiling });
    }
    if target_mw < floor - 1e-9 {
        return Err(EmitError::Overgeneration { excess_mw: floor - target_mw });
    }
    let mut breaks: Vec<f64> = generators
        .iter()
        .filter(|g| g.participation > 0.0)
        .flat_map(|g| [g.p_min_mw / g.participation, g.p_max_mw / g.participation])
        .filter(|b| *b >= 0.0)
        .collect();
    breaks.push(0.0);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();

    // f(lambda) is nondecreasing and linear between breakpoints
    let mut lambda = *breaks.last().expect("nonempty");
    let mut prev = (0.0, at(0.0));
    for &b in &breaks {
        let fb = at(b);
        if fb >= target_mw {
            let (a, fa) = prev;
            lambda = if fb > fa { a + (target_mw - fa) * (b - a) / (fb - fa) } else { b };
            break;
        }
        prev = (b, fb);
    }
    Ok(generators.iter().map(|g| (lambda * g.participation).clamp(g.p_min_mw, g.p_max_mw)).collect())
}

/// New setpoints covering `forecast_net_load_mw` plus `loss_fraction` of
/// it. Only valid at multiples of `interval_steps`.
pub fn redispatch(
    state: &DispatchState,
    generators: &[Generator],
    forecast_net_load_mw: f64,
    loss_fraction: f64,
    step: usize,
    interval_steps: usize,
) -> Result<DispatchState, EmitError> {
    if interval_steps == 0 || step % interval_steps != 0 {
        return Err(EmitError::InvalidInput(format!(
            "re-dispatch at step {step} is off the {interval_steps}-step schedule"
        )));
    }
    let target = forecast_net_load_mw * (1.0 + loss_fraction);
    let setpoints_mw = if state.last_redispatch_step.is_some() && target == state.target_mw {
        state.setpoints_mw.clone()
    } else {
        allocate_dispatch(generators, target)?
    };
    Ok(DispatchState { setpoints_mw, slack_bus: state.slack_bus, last_redispatch_step: Some(step), target_mw: target })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(super) fn generator(id: u32, p_min: f64, p_max: f64, participation: f64) -> Generator {
        Generator { id, bus: id, p_min_mw: p_min, p_max_mw: p_max, participation, voltage_pu: 1.0 }
    }

    #[test]
    fn symmetric_pair() {
        let g = [generator(1, 0.0, 100.0, 1.0), generator(2, 0.0, 100.0, 1.0)];
        assert_eq!(allocate_dispatch(&g, 150.0).unwrap(), vec![75.0, 75.0]);
    }

    /// Waterfall: share pro rata, pin units over their limit, re-share the
    /// remainder among the others, repeat.
    fn waterfall(g: &[Generator], target: f64) -> Vec<f64> {
        let mut out = vec![0.0; g.len()];
        let mut free: Vec<usize> = (0..g.len()).collect();
        let mut remaining = target;
        loop {
            let total: f64 = free.iter().map(|&i| g[i].participation).sum();
            let over: Vec<usize> =
                free.iter().copied().filter(|&i| remaining * g[i].participation / total > g[i].p_max_mw).collect();
            if over.is_empty() {
                for &i in &free {
                    out[i] = remaining * g[i].participation / total;
                }
                return out;
            }
            for &i in &over {
                out[i] = g[i].p_max_mw;
                remaining -= g[i].p_max_mw;
            }
            free.retain(|i| !over.contains(i));
        }
    }

    #[test]
    fn five_units_one_at_limit() {
        let g = [
            generator(1, 0.0, 50.0, 0.3),
            generator(2, 0.0, 400.0, 0.2),
            generator(3, 0.0, 400.0, 0.2),
            generator(4, 0.0, 300.0, 0.15),
            generator(5, 0.0, 300.0, 0.15),
        ];
        let got = allocate_dispatch(&g, 500.0).unwrap();
        let oracle = waterfall(&g, 500.0);
        // frozen from the waterfall: unit 1 pinned at 50, 450 shared 0.2:0.2:0.15:0.15
        let golden = [50.0, 128.57142857142858, 128.57142857142858, 96.42857142857143, 96.42857142857143];
        for i in 0..5 {
            assert!((got[i] - oracle[i]).abs() < 1e-9);
            assert!((got[i] - golden[i]).abs() < 1e-9);
        }
        assert!((got.iter().sum::<f64>() - 500.0).abs() < 1e-9);
    }

    #[test]
    fn minimums_and_shortfall() {
        let g = [generator(1, 40.0, 100.0, 1.0), generator(2, 0.0, 100.0, 1.0)];
        let got = allocate_dispatch(&g, 60.0).unwrap();
        assert!((got[0] - 40.0).abs() < 1e-12 && (got[1] - 20.0).abs() < 1e-12);
        assert!(matches!(allocate_dispatch(&g, 250.0), Err(EmitError::Infeasible { shortfall_mw }) if (shortfall_mw - 50.0).abs() < 1e-9));
        assert!(matches!(allocate_dispatch(&g, 10.0), Err(EmitError::Overgeneration { .. })));
    }

    #[test]
    fn unchanged_load_keeps_setpoints() {
        let g = [generator(1, 0.0, 100.0, 1.0), generator(2, 0.0, 100.0, 3.0)];
        let s0 = DispatchState { setpoints_mw: vec![0.0, 0.0], slack_bus: 1, last_redispatch_step: None, target_mw: 0.0 };
        let s1 = redispatch(&s0, &g, 80.0, 0.0, 0, 60).unwrap();
        let s2 = redispatch(&s1, &g, 80.0, 0.0, 60, 60).unwrap();
        assert_eq!(s1.setpoints_mw, vec![20.0, 60.0]);
        assert_eq!(s2.setpoints_mw, s1.setpoints_mw);
        assert_eq!(s2.last_redispatch_step, Some(60));
        assert!(redispatch(&s1, &g, 80.0, 0.0, 30, 60).is_err());
    }
}
