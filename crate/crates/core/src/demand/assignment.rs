//! Pattern-to-zone assignment.
//!
//! Every zone receives exactly one pattern and pattern `k` is used by exactly
//! `Z_k` zones. For zone pair `z < z'` carrying patterns `k, k'` the ratio
//! `q = D(z, z') / dist(k, k')` is formed; the chosen assignment maximizes the
//! base-10 entropy of the normalized ratios
//!
//! ```text
//! H = -sum_{z<z'} (q / q_sum) * log10(q / q_sum)
//! ```
//!
//! which is largest when all ratios are alike: close zones get similar
//! patterns and distant zones get dissimilar ones.
//!
//! Small instances are enumerated exhaustively in lexicographic order of the
//! per-zone label vector (the first maximum wins ties). Larger instances use
//! simulated annealing over label swaps, which keep every column count fixed,
//! started from the greedy baseline.

use rand::Rng;

use super::{cluster_distance, DemandError, LoadPatternLibrary};
use crate::grid::Zone;
use crate::rng::substream;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnealConfig {
    pub iterations: usize,
    /// Final temperature as a fraction of the initial one.
    pub final_ratio: f64,
}

impl Default for AnnealConfig {
    fn default() -> Self {
        AnnealConfig { iterations: 200_000, final_ratio: 1e-4 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssignmentConfig {
    /// Distance used between a pattern and itself.
    pub epsilon: f64,
    /// Largest number of feasible assignments solved by enumeration.
    pub exhaustive_limit: u64,
    pub anneal: AnnealConfig,
}

impl Default for AssignmentConfig {
    fn default() -> Self {
        AssignmentConfig { epsilon: 1e-6, exhaustive_limit: 1_000_000, anneal: AnnealConfig::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverMethod {
    Exhaustive,
    Annealing,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZoneAssignment {
    pub zone_ids: Vec<u32>,
    /// Pattern index per zone, aligned with `zone_ids`.
    pub labels: Vec<usize>,
    pub k: usize,
    pub cardinalities: Vec<usize>,
    pub objective_value: f64,
    pub method: SolverMethod,
}

impl ZoneAssignment {
    /// Binary zone-by-pattern matrix.
    pub fn matrix(&self) -> Vec<Vec<u8>> {
        self.labels.iter().map(|&l| (0..self.k).map(|k| u8::from(k == l)).collect()).collect()
    }

    pub fn pattern_for_zone(&self, zone_id: u32) -> Option<usize> {
        self.zone_ids.iter().position(|&z| z == zone_id).map(|i| self.labels[i])
    }
}

/// `round(Z * p_k)` repaired by largest remainder so the counts sum to `Z`.
pub fn zone_cardinalities(z: usize, probabilities: &[f64]) -> Vec<usize> {
    let exact: Vec<f64> = probabilities.iter().map(|p| z as f64 * p.max(0.0)).collect();
    let mut counts: Vec<usize> = exact.iter().map(|x| x.round() as usize).collect();
    let mut total: usize = counts.iter().sum();
    while total < z {
        let k = (0..counts.len())
            .max_by(|&a, &b| (exact[a] - counts[a] as f64).total_cmp(&(exact[b] - counts[b] as f64)).then(b.cmp(&a)))
            .expect("nonempty probabilities");
        counts[k] += 1;
        total += 1;
    }
    while total > z {
        let k = (0..counts.len())
            .filter(|&k| counts[k] > 0)
            .min_by(|&a, &b| (exact[a] - counts[a] as f64).total_cmp(&(exact[b] - counts[b] as f64)).then(a.cmp(&b)))
            .expect("some positive count");
        counts[k] -= 1;
        total -= 1;
    }
    counts
}

/// Number of label vectors with the given column counts, saturating at
/// `u64::MAX`.
pub fn multinomial_count(cardinalities: &[usize]) -> u64 {
    let mut remaining: u64 = cardinalities.iter().map(|&c| c as u64).sum();
    let mut total: u128 = 1;
    for &c in cardinalities {
        let mut binom: u128 = 1;
        for i in 0..c as u128 {
            binom = binom * (remaining as u128 - i) / (i + 1);
            if binom > u64::MAX as u128 {
                return u64::MAX;
            }
        }
        total = total.saturating_mul(binom);
        if total > u64::MAX as u128 {
            return u64::MAX;
        }
        remaining -= c as u64;
    }
    total as u64
}

/// Objective for a full label vector.
pub fn assignment_entropy(zone_dist: &[Vec<f64>], pattern_dist: &[Vec<f64>], labels: &[usize]) -> f64 {
    let z = labels.len();
    let mut q = Vec::with_capacity(z * z.saturating_sub(1) / 2);
    for a in 0..z {
        for b in (a + 1)..z {
            q.push(zone_dist[a][b] / pattern_dist[labels[a]][labels[b]]);
        }
    }
    let sum: f64 = q.iter().sum();
    if !(sum > 0.0) {
        return 0.0;
    }
    -q.iter().filter(|&&v| v > 0.0).map(|&v| (v / sum) * (v / sum).log10()).sum::<f64>()
}

fn next_permutation(v: &mut [usize]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let mut i = v.len() - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = v.len() - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

fn exhaustive(zone_dist: &[Vec<f64>], pattern_dist: &[Vec<f64>], cardinalities: &[usize]) -> (Vec<usize>, f64) {
    let mut labels: Vec<usize> = cardinalities.iter().enumerate().flat_map(|(k, &c)| std::iter::repeat_n(k, c)).collect();
    let mut best = (labels.clone(), assignment_entropy(zone_dist, pattern_dist, &labels));
    while next_permutation(&mut labels) {
        let h = assignment_entropy(zone_dist, pattern_dist, &labels);
        if h > best.1 {
            best = (labels.clone(), h);
        }
    }
    best
}

/// Zones in order each take the pattern (with capacity left) that maximizes
/// the entropy over the zones placed so far.
pub fn greedy_assignment(zone_dist: &[Vec<f64>], pattern_dist: &[Vec<f64>], cardinalities: &[usize]) -> Vec<usize> {
    let z: usize = cardinalities.iter().sum();
    let mut left = cardinalities.to_vec();
    let mut labels: Vec<usize> = Vec::with_capacity(z);
    for zi in 0..z {
        let sub: Vec<Vec<f64>> = (0..=zi).map(|a| zone_dist[a][..=zi].to_vec()).collect();
        let mut best: Option<(usize, f64)> = None;
        for k in (0..left.len()).filter(|&k| left[k] > 0) {
            labels.push(k);
            let h = assignment_entropy(&sub, pattern_dist, &labels);
            labels.pop();
            if best.is_none_or(|(_, bh)| h > bh) {
                best = Some((k, h));
            }
        }
        let (k, _) = best.expect("cardinalities sum to zone count");
        left[k] -= 1;
        labels.push(k);
    }
    labels
}

/// Running sums for the entropy, updated in O(Z) per swap.
struct EntropyState {
    sum: f64,
    sum_qlnq: f64,
}

impl EntropyState {
    fn entropy(&self) -> f64 {
        if self.sum > 0.0 {
            (self.sum.ln() - self.sum_qlnq / self.sum) / std::f64::consts::LN_10
        } else {
            0.0
        }
    }
}

fn qlnq(q: f64) -> f64 {
    if q > 0.0 {
        q * q.ln()
    } else {
        0.0
    }
}

fn anneal(
    zone_dist: &[Vec<f64>],
    pattern_dist: &[Vec<f64>],
    start: Vec<usize>,
    seed: u64,
    cfg: &AnnealConfig,
) -> Vec<usize> {
    let z = start.len();
    let q = |a: usize, b: usize, labels: &[usize]| zone_dist[a][b] / pattern_dist[labels[a]][labels[b]];
    let mut labels = start;
    let mut state = EntropyState { sum: 0.0, sum_qlnq: 0.0 };
    for a in 0..z {
        for b in (a + 1)..z {
            let v = q(a, b, &labels);
            state.sum += v;
            state.sum_qlnq += qlnq(v);
        }
    }
    let mut rng = substream(seed, "assignment-anneal", 0, 0);

    let swap_delta = |labels: &mut Vec<usize>, state: &EntropyState, a: usize, b: usize| {
        let (mut sum, mut slq) = (state.sum, state.sum_qlnq);
        for j in (0..z).filter(|&j| j != a && j != b) {
            for i in [a, b] {
                let v = q(i, j, labels);
                sum -= v;
                slq -= qlnq(v);
            }
        }
        labels.swap(a, b);
        for j in (0..z).filter(|&j| j != a && j != b) {
            for i in [a, b] {
                let v = q(i, j, labels);
                sum += v;
                slq += qlnq(v);
            }
        }
        EntropyState { sum, sum_qlnq: slq }
    };
    let pick_pair = |labels: &[usize], rng: &mut rand_chacha::ChaCha8Rng| -> Option<(usize, usize)> {
        for _ in 0..64 {
            let a = rng.random_range(0..z);
            let b = rng.random_range(0..z);
            if labels[a] != labels[b] {
                return Some((a, b));
            }
        }
        None
    };

    // initial temperature from the typical size of an uphill move
    let mut probe = labels.clone();
    let mut deltas = Vec::new();
    for _ in 0..100 {
        if let Some((a, b)) = pick_pair(&probe, &mut rng) {
            let next = swap_delta(&mut probe, &state, a, b);
            deltas.push((next.entropy() - state.entropy()).abs());
            probe.swap(a, b);
        }
    }
    let t0 = deltas.iter().sum::<f64>() / deltas.len().max(1) as f64;
    if !(t0 > 0.0) {
        return labels;
    }
    let cooling = cfg.final_ratio.powf(1.0 / cfg.iterations.max(1) as f64);

    let mut best = (labels.clone(), state.entropy());
    let mut temp = t0;
    for _ in 0..cfg.iterations {
        let Some((a, b)) = pick_pair(&labels, &mut rng) else { break };
        let current = state.entropy();
        let next = swap_delta(&mut labels, &state, a, b);
        let delta = next.entropy() - current;
        if delta >= 0.0 || rng.random::<f64>() < (delta / temp).exp() {
            state = next;
            if state.entropy() > best.1 {
                best = (labels.clone(), state.entropy());
            }
        } else {
            labels.swap(a, b);
        }
        temp *= cooling;
    }
    best.0
}

/// Solves the assignment for explicit zone and pattern distance matrices.
pub fn assign_with_distances(
    zone_ids: &[u32],
    zone_dist: &[Vec<f64>],
    pattern_dist: &[Vec<f64>],
    cardinalities: &[usize],
    seed: u64,
    cfg: &AssignmentConfig,
) -> Result<ZoneAssignment, DemandError> {
    let z = zone_ids.len();
    let k = pattern_dist.len();
    if z < 2 {
        return Err(DemandError::InvalidInput(format!("need at least 2 zones, got {z}")));
    }
    if zone_dist.len() != z || zone_dist.iter().any(|r| r.len() != z) {
        return Err(DemandError::InvalidInput("zone distance matrix shape mismatch".into()));
    }
    if k == 0 || pattern_dist.iter().any(|r| r.len() != k) || cardinalities.len() != k {
        return Err(DemandError::InvalidInput("pattern distance matrix shape mismatch".into()));
    }
    if cardinalities.iter().sum::<usize>() != z {
        return Err(DemandError::Infeasible(format!(
            "pattern counts {cardinalities:?} do not sum to {z} zones"
        )));
    }
    if pattern_dist.iter().flatten().any(|d| !(*d > 0.0)) {
        return Err(DemandError::InvalidInput(
            "pattern distances must be positive; identical patterns need distinct clusters".into(),
        ));
    }
    let (labels, method) = if multinomial_count(cardinalities) <= cfg.exhaustive_limit {
        (exhaustive(zone_dist, pattern_dist, cardinalities).0, SolverMethod::Exhaustive)
    } else {
        let start = greedy_assignment(zone_dist, pattern_dist, cardinalities);
        (anneal(zone_dist, pattern_dist, start, seed, &cfg.anneal), SolverMethod::Annealing)
    };
    Ok(ZoneAssignment {
        zone_ids: zone_ids.to_vec(),
        objective_value: assignment_entropy(zone_dist, pattern_dist, &labels),
        labels,
        k,
        cardinalities: cardinalities.to_vec(),
        method,
    })
}

/// Assigns library patterns to zones using centroid distances between zones.
pub fn assign_patterns(
    zones: &[Zone],
    lib: &LoadPatternLibrary,
    seed: u64,
    cfg: &AssignmentConfig,
) -> Result<ZoneAssignment, DemandError> {
    let zone_ids: Vec<u32> = zones.iter().map(|z| z.id).collect();
    let zone_dist: Vec<Vec<f64>> =
        zones.iter().map(|a| zones.iter().map(|b| a.centroid.distance_km(&b.centroid)).collect()).collect();
    let k = lib.k();
    // coincident centroids of distinct clusters are treated like the diagonal
    let pattern_dist: Vec<Vec<f64>> = (0..k)
        .map(|a| (0..k).map(|b| cluster_distance(lib, a, b, cfg.epsilon).max(cfg.epsilon)).collect())
        .collect();
    let cardinalities = zone_cardinalities(zones.len(), &lib.probabilities);
    assign_with_distances(&zone_ids, &zone_dist, &pattern_dist, &cardinalities, seed, cfg)
}
