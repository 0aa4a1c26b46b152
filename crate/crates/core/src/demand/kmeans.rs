use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{DemandError, ScaledLoadSample};
use crate::rng::substream;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansConfig {
    pub max_iter: usize,
    /// Stop once the summed squared centroid shift drops below this fraction
    /// of the summed squared centroid norms.
    pub rel_tol: f64,
    /// Independent k-means++ restarts; the lowest inertia wins.
    pub n_init: usize,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        KMeansConfig { max_iter: 300, rel_tol: 1e-8, n_init: 10 }
    }
}

/// Characteristic minutely variation patterns and their probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadPatternLibrary {
    pub patterns: Vec<Vec<f64>>,
    pub probabilities: Vec<f64>,
    /// Cluster label of every input sample.
    pub labels: Vec<usize>,
    pub source_count: usize,
    /// Within-cluster sum of squares.
    pub inertia: f64,
}

impl LoadPatternLibrary {
    pub fn k(&self) -> usize {
        self.patterns.len()
    }

    pub fn minutes(&self) -> usize {
        self.patterns.first().map_or(0, Vec::len)
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (k, c) in centroids.iter().enumerate() {
        let d = sq_dist(point, c);
        if d < best.1 {
            best = (k, d);
        }
    }
    best
}

fn kmeans_pp(data: &[&[f64]], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = data.len();
    let mut chosen = vec![false; n];
    let first = rng.random_range(0..n);
    chosen[first] = true;
    let mut centroids = vec![data[first].to_vec()];
    let mut d2: Vec<f64> = data.iter().map(|x| sq_dist(x, data[first])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut idx = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if w > 0.0 && target < w {
                    idx = i;
                    break;
                }
                target -= w;
            }
            // guard against landing on a zero-weight tail through rounding
            if d2[idx] == 0.0 {
                idx = (0..n).rev().find(|&i| d2[i] > 0.0).unwrap_or(idx);
            }
            idx
        } else {
            let free: Vec<usize> = (0..n).filter(|&i| !chosen[i]).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen[pick] = true;
        centroids.push(data[pick].to_vec());
        for (i, x) in data.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(x, data[pick]));
        }
    }
    centroids
}

fn lloyd(data: &[&[f64]], mut centroids: Vec<Vec<f64>>, cfg: &KMeansConfig) -> (Vec<Vec<f64>>, Vec<usize>, f64) {
    let (n, m, k) = (data.len(), data[0].len(), centroids.len());
    let mut labels = vec![0usize; n];
    for _ in 0..cfg.max_iter.max(1) {
        let mut dists = vec![0.0; n];
        for (i, x) in data.iter().enumerate() {
            let (l, d) = nearest(x, &centroids);
            labels[i] = l;
            dists[i] = d;
        }
        let mut sums = vec![vec![0.0; m]; k];
        let mut counts = vec![0usize; k];
        for (i, x) in data.iter().enumerate() {
            counts[labels[i]] += 1;
            for (s, v) in sums[labels[i]].iter_mut().zip(x.iter()) {
                *s += v;
            }
        }
        let mut next: Vec<Vec<f64>> = sums
            .into_iter()
            .zip(&counts)
            .zip(&centroids)
            .map(|((s, &c), old)| if c > 0 { s.into_iter().map(|v| v / c as f64).collect() } else { old.clone() })
            .collect();
        // empty cluster: move it onto the sample farthest from its centroid
        let mut taken = vec![false; n];
        for kk in 0..k {
            if counts[kk] == 0 {
                let far = (0..n)
                    .filter(|&i| !taken[i])
                    .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)));
                if let Some(i) = far {
                    taken[i] = true;
                    next[kk] = data[i].to_vec();
                }
            }
        }
        let shift: f64 = next.iter().zip(&centroids).map(|(a, b)| sq_dist(a, b)).sum();
        let scale: f64 = next.iter().map(|c| c.iter().map(|v| v * v).sum::<f64>()).sum();
        centroids = next;
        if shift <= cfg.rel_tol * scale {
            break;
        }
    }
    let mut inertia = 0.0;
    for (i, x) in data.iter().enumerate() {
        let (l, d) = nearest(x, &centroids);
        labels[i] = l;
        inertia += d;
    }
    (centroids, labels, inertia)
}

/// Clusters scaled samples into `k` patterns with seeded k-means++ and
/// Lloyd iterations. Patterns are ordered by decreasing membership.
pub fn extract_patterns(
    samples: &[ScaledLoadSample],
    k: usize,
    seed: u64,
    cfg: &KMeansConfig,
) -> Result<LoadPatternLibrary, DemandError> {
    let d = samples.len();
    if k == 0 || k > d {
        return Err(DemandError::TooFewSamples { k, d });
    }
    let m = samples[0].values.len();
    if m == 0 || samples.iter().any(|s| s.values.len() != m) {
        return Err(DemandError::InvalidInput("samples must share a nonzero length".into()));
    }
    if samples.iter().any(|s| s.values.iter().any(|v| !v.is_finite())) {
        return Err(DemandError::InvalidInput("samples contain non-finite values".into()));
    }
    let data: Vec<&[f64]> = samples.iter().map(|s| s.values.as_slice()).collect();

    let mut best: Option<(Vec<Vec<f64>>, Vec<usize>, f64)> = None;
    for restart in 0..cfg.n_init.max(1) {
        let mut rng = substream(seed, "kmeans", restart as u64, 0);
        let init = kmeans_pp(&data, k, &mut rng);
        let run = lloyd(&data, init, cfg);
        if best.as_ref().is_none_or(|b| run.2 < b.2) {
            best = Some(run);
        }
    }
    let (centroids, labels, inertia) = best.expect("at least one restart");

    let mut counts = vec![0usize; k];
    for &l in &labels {
        counts[l] += 1;
    }
    let first_member: Vec<usize> = (0..k).map(|c| labels.iter().position(|&l| l == c).unwrap_or(d)).collect();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| counts[b].cmp(&counts[a]).then(first_member[a].cmp(&first_member[b])));
    let mut rank = vec![0; k];
    for (new, &old) in order.iter().enumerate() {
        rank[old] = new;
    }
    Ok(LoadPatternLibrary {
        patterns: order.iter().map(|&c| centroids[c].clone()).collect(),
        probabilities: order.iter().map(|&c| counts[c] as f64 / d as f64).collect(),
        labels: labels.iter().map(|&l| rank[l]).collect(),
        source_count: d,
        inertia,
    })
}

/// Euclidean distance between two patterns; `epsilon` on the diagonal.
pub fn cluster_distance(lib: &LoadPatternLibrary, k: usize, k2: usize, epsilon: f64) -> f64 {
    if k == k2 {
        epsilon
    } else {
        sq_dist(&lib.patterns[k], &lib.patterns[k2]).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn samples(rows: Vec<Vec<f64>>) -> Vec<ScaledLoadSample> {
        rows.into_iter().enumerate().map(|(i, values)| ScaledLoadSample { day_index: i, values }).collect()
    }

    #[test]
    fn k_equals_d_gives_singletons() {
        let s = samples(vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![3.0, 3.0], vec![-2.0, 5.0]]);
        let lib = extract_patterns(&s, 4, 11, &KMeansConfig::default()).unwrap();
        assert_eq!(lib.probabilities, vec![0.25; 4]);
        let mut pats = lib.patterns.clone();
        pats.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut rows: Vec<Vec<f64>> = s.iter().map(|x| x.values.clone()).collect();
        rows.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(pats, rows);
        assert_eq!(lib.inertia, 0.0);
    }

    #[test]
    fn separable_groups() {
        let mut rows = vec![vec![1.0, 1.2, 1.0]; 6];
        rows.extend(vec![vec![1.0, 0.8, 1.0]; 3]);
        let lib = extract_patterns(&samples(rows), 2, 5, &KMeansConfig::default()).unwrap();
        assert_eq!(lib.patterns[0], vec![1.0, 1.2, 1.0]);
        for (a, b) in lib.patterns[1].iter().zip([1.0, 0.8, 1.0]) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!((lib.probabilities[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((lib.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_too_many_clusters() {
        let s = samples(vec![vec![1.0]; 3]);
        assert!(matches!(
            extract_patterns(&s, 4, 0, &KMeansConfig::default()),
            Err(DemandError::TooFewSamples { k: 4, d: 3 })
        ));
    }

    #[test]
    fn duplicate_samples_leave_no_panic() {
        let s = samples(vec![vec![1.0, 1.0]; 5]);
        let lib = extract_patterns(&s, 3, 2, &KMeansConfig::default()).unwrap();
        assert!((lib.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn distances() {
        let lib = LoadPatternLibrary {
            patterns: vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0]],
            probabilities: vec![0.5, 0.25, 0.25],
            labels: vec![],
            source_count: 4,
            inertia: 0.0,
        };
        assert_eq!(cluster_distance(&lib, 0, 2, 1e-6), 0.0);
        assert_eq!(cluster_distance(&lib, 1, 1, 1e-6), 1e-6);
        assert!((cluster_distance(&lib, 0, 1, 1e-6) - 2f64.sqrt()).abs() < 1e-15);
    }

    fn fixture_40() -> Vec<ScaledLoadSample> {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let shapes = [0.02, -0.015, 0.0, 0.03];
        let rows = (0..40)
            .map(|i| {
                let amp = shapes[i % 4];
                (0..61)
                    .map(|m| {
                        let t = m as f64 / 60.0;
                        let bump = amp * (std::f64::consts::PI * t * (1.0 + (i % 4) as f64)).sin();
                        let noise: f64 = rng.random_range(-0.004..0.004);
                        if m == 0 || m == 60 { 1.0 } else { 1.0 + bump + noise }
                    })
                    .collect()
            })
            .collect();
        samples(rows)
    }

    /// Plain Lloyd from uniformly drawn distinct initial centers.
    fn lloyd_oracle(data: &[Vec<f64>], k: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut idx: Vec<usize> = (0..data.len()).collect();
        for i in 0..k {
            let j = rng.random_range(i..idx.len());
            idx.swap(i, j);
        }
        let mut cent: Vec<Vec<f64>> = idx[..k].iter().map(|&i| data[i].clone()).collect();
        let mut lab = vec![0; data.len()];
        for _ in 0..500 {
            for (i, x) in data.iter().enumerate() {
                lab[i] = (0..k).min_by(|&a, &b| sq_dist(x, &cent[a]).total_cmp(&sq_dist(x, &cent[b]))).unwrap();
            }
            let mut changed = false;
            for c in 0..k {
                let members: Vec<&Vec<f64>> = data.iter().zip(&lab).filter(|(_, &l)| l == c).map(|(x, _)| x).collect();
                if members.is_empty() {
                    continue;
                }
                let mean: Vec<f64> = (0..data[0].len())
                    .map(|m| members.iter().map(|x| x[m]).sum::<f64>() / members.len() as f64)
                    .collect();
                if mean != cent[c] {
                    changed = true;
                    cent[c] = mean;
                }
            }
            if !changed {
                break;
            }
        }
        data.iter().map(|x| cent.iter().map(|c| sq_dist(x, c)).fold(f64::INFINITY, f64::min)).sum()
    }

    #[test]
    fn inertia_close_to_multi_restart_oracle() {
        let s = fixture_40();
        let data: Vec<Vec<f64>> = s.iter().map(|x| x.values.clone()).collect();
        let best = (0..100).map(|seed| lloyd_oracle(&data, 4, seed)).fold(f64::INFINITY, f64::min);
        let lib = extract_patterns(&s, 4, 2024, &KMeansConfig::default()).unwrap();
        assert!(lib.inertia <= best * 1.05, "{} vs oracle {}", lib.inertia, best);
    }

    #[test]
    fn deterministic_for_seed() {
        let s = fixture_40();
        let a = extract_patterns(&s, 4, 7, &KMeansConfig::default()).unwrap();
        let b = extract_patterns(&s, 4, 7, &KMeansConfig::default()).unwrap();
        assert_eq!(a, b);
        for p in &a.patterns {
            assert_eq!(p[0], 1.0);
            assert_eq!(p[60], 1.0);
        }
    }
}
