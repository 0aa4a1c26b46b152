use std::collections::{BTreeMap, VecDeque};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::EmitError;
use crate::grid::GridCase;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BusKind {
    Slack,
    /// Fixed active power and voltage magnitude.
    Pv,
    /// Fixed active and reactive power.
    Pq,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Largest allowed active/reactive mismatch, per unit.
    pub tolerance: f64,
    pub max_iter: usize,
    /// Return linearized angles when Newton-Raphson does not converge.
    pub dc_fallback: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { tolerance: 1e-10, max_iter: 20, dc_fallback: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolutionKind {
    Ac,
    DcFallback,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerFlowSolution {
    pub vm: Vec<f64>,
    pub va: Vec<f64>,
    /// Computed injections, per unit.
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub max_mismatch: f64,
    pub kind: SolutionKind,
}

/// Bus admittance model of a case.
#[derive(Debug, Clone)]
pub struct Network {
    pub bus_ids: Vec<u32>,
    pub slack: usize,
    pub base_mva: f64,
    pub ybus: DMatrix<Complex64>,
    /// Series susceptance matrix for the linearized model.
    pub bdc: DMatrix<f64>,
    pub kinds: Vec<BusKind>,
    /// Voltage setpoint per bus (1.0 where none applies).
    pub vset: Vec<f64>,
}

impl Network {
    pub fn from_case(case: &GridCase) -> Result<Self, EmitError> {
        let n = case.buses.len();
        let index: BTreeMap<u32, usize> = case.buses.iter().enumerate().map(|(i, b)| (b.id, i)).collect();
        let slack = *index
            .get(&case.slack_bus)
            .ok_or_else(|| EmitError::InvalidInput(format!("slack bus {} not in case", case.slack_bus)))?;
        let mut ybus = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
        let mut bdc = DMatrix::zeros(n, n);
        let mut adj = vec![Vec::new(); n];
        for line in &case.lines {
            let (Some(&f), Some(&t)) = (index.get(&line.from), index.get(&line.to)) else {
                return Err(EmitError::InvalidInput(format!("line {}-{} references a missing bus", line.from, line.to)));
            };
            let z = Complex64::new(line.r_pu, line.x_pu);
            if z.norm() == 0.0 {
                return Err(EmitError::InvalidInput(format!("line {}-{} has zero impedance", line.from, line.to)));
            }
            let y = z.inv();
            let shunt = Complex64::new(0.0, line.b_pu / 2.0);
            ybus[(f, f)] += y + shunt;
            ybus[(t, t)] += y + shunt;
            ybus[(f, t)] -= y;
            ybus[(t, f)] -= y;
            if line.x_pu != 0.0 {
                let b = 1.0 / line.x_pu;
                bdc[(f, f)] += b;
                bdc[(t, t)] += b;
                bdc[(f, t)] -= b;
                bdc[(t, f)] -= b;
            }
            adj[f].push(t);
            adj[t].push(f);
        }

        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([slack]);
        seen[slack] = true;
        while let Some(i) = queue.pop_front() {
            for &j in &adj[i] {
                if !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        let island: Vec<u32> = (0..n).filter(|&i| !seen[i]).map(|i| case.buses[i].id).collect();
        if !island.is_empty() {
            return Err(EmitError::Island { buses: island });
        }

        let mut kinds = vec![BusKind::Pq; n];
        let mut vset = vec![1.0; n];
        for g in &case.generators {
            let i = index[&g.bus];
            if kinds[i] == BusKind::Pq {
                kinds[i] = BusKind::Pv;
                vset[i] = g.voltage_pu;
            }
        }
        kinds[slack] = BusKind::Slack;
        Ok(Network { bus_ids: case.buses.iter().map(|b| b.id).collect(), slack, base_mva: case.base_mva, ybus, bdc, kinds, vset })
    }

    pub fn len(&self) -> usize {
        self.bus_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bus_ids.is_empty()
    }

    /// Magnitudes at setpoints, angles zero.
    pub fn flat_start(&self) -> (Vec<f64>, Vec<f64>) {
        (self.vset.clone(), vec![0.0; self.len()])
    }

    /// Injections `S = V conj(Y V)` in per unit.
    pub fn injections(&self, vm: &[f64], va: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let v: Vec<Complex64> = vm.iter().zip(va).map(|(&m, &a)| Complex64::from_polar(m, a)).collect();
        let n = self.len();
        let mut p = vec![0.0; n];
        let mut q = vec![0.0; n];
        for i in 0..n {
            let mut current = Complex64::new(0.0, 0.0);
            for k in 0..n {
                current += self.ybus[(i, k)] * v[k];
            }
            let s = v[i] * current.conj();
            p[i] = s.re;
            q[i] = s.im;
        }
        (p, q)
    }

    fn mismatch(&self, p_spec: &[f64], q_spec: &[f64], p: &[f64], q: &[f64], pv_pq: &[usize], pq: &[usize]) -> Vec<f64> {
        pv_pq.iter().map(|&i| p_spec[i] - p[i]).chain(pq.iter().map(|&i| q_spec[i] - q[i])).collect()
    }

    /// Newton-Raphson in polar coordinates from `start` (magnitudes,
    /// angles). Setpoint magnitudes are imposed on slack and PV buses.
    pub fn solve_ac(
        &self,
        p_spec: &[f64],
        q_spec: &[f64],
        start: (&[f64], &[f64]),
        cfg: &SolverConfig,
    ) -> Result<PowerFlowSolution, EmitError> {
        let n = self.len();
        if p_spec.len() != n || q_spec.len() != n || start.0.len() != n || start.1.len() != n {
            return Err(EmitError::InvalidInput("injection vectors do not match the bus count".into()));
        }
        let mut vm = start.0.to_vec();
        let mut va = start.1.to_vec();
        for i in 0..n {
            if self.kinds[i] != BusKind::Pq {
                vm[i] = self.vset[i];
            }
        }
        va[self.slack] = 0.0;
        let pv_pq: Vec<usize> = (0..n).filter(|&i| self.kinds[i] != BusKind::Slack).collect();
        let pq: Vec<usize> = (0..n).filter(|&i| self.kinds[i] == BusKind::Pq).collect();
        let (na, nv) = (pv_pq.len(), pq.len());

        let mut trace = Vec::new();
        let mut iterations = 0;
        loop {
            let (p, q) = self.injections(&vm, &va);
            let f = self.mismatch(p_spec, q_spec, &p, &q, &pv_pq, &pq);
            let worst = f.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            trace.push(worst);
            if worst < cfg.tolerance || !worst.is_finite() || iterations >= cfg.max_iter {
                return Ok(PowerFlowSolution {
                    vm,
                    va,
                    p,
                    q,
                    converged: worst < cfg.tolerance,
                    iterations,
                    max_mismatch: worst,
                    kind: SolutionKind::Ac,
                });
            }
            iterations += 1;

            let mut jac = DMatrix::zeros(na + nv, na + nv);
            let g = |i: usize, k: usize| self.ybus[(i, k)].re;
            let b = |i: usize, k: usize| self.ybus[(i, k)].im;
            let mut col_a = vec![usize::MAX; n];
            let mut col_v = vec![usize::MAX; n];
            for (c, &k) in pv_pq.iter().enumerate() {
                col_a[k] = c;
            }
            for (c, &k) in pq.iter().enumerate() {
                col_v[k] = na + c;
            }
            let rows_p = pv_pq.iter().enumerate().map(|(r, &i)| (r, i, true));
            let rows_q = pq.iter().enumerate().map(|(r, &i)| (na + r, i, false));
            for (r, i, is_p) in rows_p.chain(rows_q) {
                for k in 0..n {
                    if self.ybus[(i, k)].norm() == 0.0 && i != k {
                        continue;
                    }
                    let t = va[i] - va[k];
                    let (s, c) = t.sin_cos();
                    let (d_ang, d_mag) = if i == k {
                        if is_p {
                            (-q[i] - b(i, i) * vm[i] * vm[i], p[i] / vm[i] + g(i, i) * vm[i])
                        } else {
                            (p[i] - g(i, i) * vm[i] * vm[i], q[i] / vm[i] - b(i, i) * vm[i])
                        }
                    } else if is_p {
                        (vm[i] * vm[k] * (g(i, k) * s - b(i, k) * c), vm[i] * (g(i, k) * c + b(i, k) * s))
                    } else {
                        (-vm[i] * vm[k] * (g(i, k) * c + b(i, k) * s), vm[i] * (g(i, k) * s - b(i, k) * c))
                    };
                    if col_a[k] != usize::MAX {
                        jac[(r, col_a[k])] = d_ang;
                    }
                    if col_v[k] != usize::MAX {
                        jac[(r, col_v[k])] = d_mag;
                    }
                }
            }
            let rhs = DVector::from_vec(f);
            let dx = jac
                .lu()
                .solve(&rhs)
                .filter(|d| d.iter().all(|x| x.is_finite()))
                .ok_or_else(|| EmitError::SingularJacobian { iteration: iterations, trace: trace.clone() })?;
            for (c, &k) in pv_pq.iter().enumerate() {
                va[k] += dx[c];
            }
            for (c, &k) in pq.iter().enumerate() {
                vm[k] += dx[na + c];
            }
        }
    }

    /// Linearized angles: `B' theta = P` with the slack at zero.
    pub fn solve_dc(&self, p_spec: &[f64]) -> Result<Vec<f64>, EmitError> {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| i != self.slack).collect();
        let m = DMatrix::from_fn(idx.len(), idx.len(), |r, c| self.bdc[(idx[r], idx[c])]);
        let rhs = DVector::from_iterator(idx.len(), idx.iter().map(|&i| p_spec[i]));
        let theta = m.lu().solve(&rhs).ok_or(EmitError::SingularJacobian { iteration: 0, trace: Vec::new() })?;
        let mut va = vec![0.0; self.len()];
        for (r, &i) in idx.iter().enumerate() {
            va[i] = theta[r];
        }
        Ok(va)
    }

    /// AC solve, falling back to linearized angles when configured.
    pub fn solve(
        &self,
        p_spec: &[f64],
        q_spec: &[f64],
        start: (&[f64], &[f64]),
        cfg: &SolverConfig,
    ) -> Result<PowerFlowSolution, EmitError> {
        let sol = self.solve_ac(p_spec, q_spec, start, cfg)?;
        if sol.converged || !cfg.dc_fallback {
            return Ok(sol);
        }
        let va = self.solve_dc(p_spec)?;
        let vm = vec![1.0; self.len()];
        let (p, q) = self.injections(&vm, &va);
        Ok(PowerFlowSolution { vm, va, p, q, converged: false, kind: SolutionKind::DcFallback, ..sol })
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::grid::{BusRecord, CaseDocument, CorrelationCurve, Generator, Line, RciRatio, ZoneRecord};

    pub(crate) fn case(lines: Vec<Line>, buses: u32, generators: Vec<Generator>) -> GridCase {
        let doc = CaseDocument {
            format_version: 1,
            name: "t".into(),
            base_mva: 100.0,
            slack_bus: 1,
            correlation_curve: CorrelationCurve::default(),
            zones: vec![ZoneRecord { id: 1, name: None }],
            buses: (1..=buses)
                .map(|id| BusRecord {
                    id,
                    zone: 1,
                    lat: 30.0,
                    lon: -97.0 + 0.1 * id as f64,
                    peak_load_mw: 10.0,
                    rci: RciRatio::new(1.0, 0.0, 0.0),
                    power_factor: None,
                })
                .collect(),
            generators,
            wind_farms: Vec::new(),
            lines,
            turbine_curves: Vec::new(),
        };
        GridCase::try_from(doc).unwrap()
    }

    pub(crate) fn line(from: u32, to: u32, r: f64, x: f64, b: f64) -> Line {
        Line { from, to, r_pu: r, x_pu: x, b_pu: b }
    }

    pub(crate) fn slack_gen() -> Generator {
        Generator { id: 1, bus: 1, p_min_mw: 0.0, p_max_mw: 500.0, participation: 1.0, voltage_pu: 1.0 }
    }

    #[test]
    fn no_load_is_flat() {
        let c = case(vec![line(1, 2, 0.01, 0.1, 0.0), line(2, 3, 0.02, 0.2, 0.0)], 3, vec![slack_gen()]);
        let net = Network::from_case(&c).unwrap();
        let (vm, va) = net.flat_start();
        let sol = net.solve_ac(&[0.0; 3], &[0.0; 3], (&vm, &va), &SolverConfig::default()).unwrap();
        assert!(sol.converged);
        assert_eq!(sol.iterations, 0);
        assert!(sol.vm.iter().all(|v| *v == 1.0) && sol.va.iter().all(|a| *a == 0.0));
    }

    #[test]
    fn two_bus_matches_closed_form() {
        // lossless line x = 0.1, 100 MW at unity power factor on a 100 MVA base:
        // V sin(d) = 0.1 and V = cos(d), so sin(2d) = 0.2
        let c = case(vec![line(1, 2, 0.0, 0.1, 0.0)], 2, vec![slack_gen()]);
        let net = Network::from_case(&c).unwrap();
        let (vm, va) = net.flat_start();
        let sol = net.solve_ac(&[0.0, -1.0], &[0.0, 0.0], (&vm, &va), &SolverConfig::default()).unwrap();
        assert!(sol.converged);
        let delta = 0.2f64.asin() / 2.0;
        assert!((sol.va[1] + delta).abs() < 1e-6, "{}", sol.va[1]);
        assert!((sol.vm[1] - delta.cos()).abs() < 1e-6, "{}", sol.vm[1]);
        assert!((sol.p[0] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn island_is_named() {
        let c = case(vec![line(1, 2, 0.01, 0.1, 0.0), line(3, 4, 0.01, 0.1, 0.0)], 4, vec![slack_gen()]);
        match Network::from_case(&c) {
            Err(EmitError::Island { buses }) => assert_eq!(buses, vec![3, 4]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn overload_does_not_converge_and_falls_back() {
        let c = case(vec![line(1, 2, 0.0, 0.5, 0.0)], 2, vec![slack_gen()]);
        let net = Network::from_case(&c).unwrap();
        let (vm, va) = net.flat_start();
        let cfg = SolverConfig { max_iter: 10, ..SolverConfig::default() };
        let sol = net.solve_ac(&[0.0, -5.0], &[0.0, 0.0], (&vm, &va), &cfg).unwrap();
        assert!(!sol.converged);
        let fb = net.solve(&[0.0, -5.0], &[0.0, 0.0], (&vm, &va), &SolverConfig { dc_fallback: true, ..cfg }).unwrap();
        assert_eq!(fb.kind, SolutionKind::DcFallback);
        assert!((fb.va[1] + 2.5).abs() < 1e-12);
    }
}
