//! Lloyd's K-means with k-means++ seeding and restarts.

use rand::Rng;

#[derive(Clone, Debug, PartialEq)]
pub struct KMeansConfig {
    pub k: usize,
    pub max_iterations: usize,
    /// Stop once no centroid moves farther than this.
    pub tolerance: f64,
    pub restarts: usize,
}

impl KMeansConfig {
    pub fn new(k: usize) -> Self {
        KMeansConfig {
            k,
            max_iterations: 300,
            tolerance: 1e-6,
            restarts: 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KMeansResult {
    /// `k × dim`
    pub centroids: Vec<f64>,
    pub assignments: Vec<usize>,
    /// Sum of squared distances to the assigned centroid.
    pub objective: f64,
    /// Objective after each assignment step of the kept run.
    pub objective_history: Vec<f64>,
    pub iterations: usize,
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centroids: &[f64], dim: usize) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.chunks_exact(dim).enumerate() {
        let dist = squared_distance(point, centroid);
        if dist < best.1 {
            best = (c, dist);
        }
    }
    best
}

fn plus_plus_init(data: &[f64], dim: usize, k: usize, rng: &mut impl Rng) -> Vec<f64> {
    let n = data.len() / dim;
    let point = |i: usize| &data[i * dim..(i + 1) * dim];
    let mut chosen = vec![rng.random_range(0..n)];
    let mut dist: Vec<f64> = (0..n).map(|i| squared_distance(point(i), point(chosen[0]))).collect();
    while chosen.len() < k {
        let total: f64 = dist.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &d) in dist.iter().enumerate() {
                if target < d {
                    pick = i;
                    break;
                }
                target -= d;
            }
            pick
        } else {
            // every point coincides with a centroid already
            let free: Vec<usize> = (0..n).filter(|i| !chosen.contains(i)).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen.push(next);
        for i in 0..n {
            dist[i] = dist[i].min(squared_distance(point(i), point(next)));
        }
    }
    chosen.iter().flat_map(|&i| point(i).iter().copied()).collect()
}

fn lloyd(data: &[f64], dim: usize, cfg: &KMeansConfig, rng: &mut impl Rng) -> KMeansResult {
    let n = data.len() / dim;
    let k = cfg.k;
    let mut centroids = plus_plus_init(data, dim, k, rng);
    let mut assignments = vec![0; n];
    let mut dists = vec![0.0; n];
    let mut history = Vec::new();
    let mut iterations = 0;

    loop {
        for i in 0..n {
            let (c, d) = nearest(&data[i * dim..(i + 1) * dim], &centroids, dim);
            assignments[i] = c;
            dists[i] = d;
        }
        // an empty cluster takes over the worst-served point
        let mut counts = vec![0usize; k];
        assignments.iter().for_each(|&c| counts[c] += 1);
        for c in 0..k {
            if counts[c] == 0 {
                let far = (0..n)
                    .filter(|&i| counts[assignments[i]] > 1)
                    .fold(None, |best: Option<usize>, i| match best {
                        Some(b) if dists[b] >= dists[i] => Some(b),
                        _ => Some(i),
                    });
                if let Some(i) = far {
                    counts[assignments[i]] -= 1;
                    assignments[i] = c;
                    counts[c] = 1;
                    dists[i] = 0.0;
                    centroids[c * dim..(c + 1) * dim].copy_from_slice(&data[i * dim..(i + 1) * dim]);
                }
            }
        }
        history.push(dists.iter().sum());
        if iterations >= cfg.max_iterations {
            break;
        }
        iterations += 1;

        let mut sums = vec![0.0; k * dim];
        for (i, &c) in assignments.iter().enumerate() {
            for (s, x) in sums[c * dim..(c + 1) * dim].iter_mut().zip(&data[i * dim..(i + 1) * dim]) {
                *s += x;
            }
        }
        let mut shift: f64 = 0.0;
        for c in 0..k {
            if counts[c] == 0 {
                continue;
            }
            let updated: Vec<f64> = sums[c * dim..(c + 1) * dim]
                .iter()
                .map(|s| s / counts[c] as f64)
                .collect();
            shift = shift.max(squared_distance(&updated, &centroids[c * dim..(c + 1) * dim]).sqrt());
            centroids[c * dim..(c + 1) * dim].copy_from_slice(&updated);
        }
        if shift < cfg.tolerance {
            for i in 0..n {
                let (c, d) = nearest(&data[i * dim..(i + 1) * dim], &centroids, dim);
                assignments[i] = c;
                dists[i] = d;
            }
            history.push(dists.iter().sum());
            break;
        }
    }
    KMeansResult {
        objective: *history.last().unwrap(),
        centroids,
        assignments,
        objective_history: history,
        iterations,
    }
}

/// Clusters the row-major points in `data`; keeps the restart with the lowest
/// objective (earliest on ties).
///
/// Panics if `k` is zero or exceeds the number of points.
pub fn kmeans(data: &[f64], dim: usize, cfg: &KMeansConfig, rng: &mut impl Rng) -> KMeansResult {
    let n = data.len() / dim;
    assert!(cfg.k >= 1 && cfg.k <= n, "k = {} with {n} points", cfg.k);
    let mut best: Option<KMeansResult> = None;
    for _ in 0..cfg.restarts.max(1) {
        let run = lloyd(data, dim, cfg, rng);
        if best.as_ref().is_none_or(|b| run.objective < b.objective) {
            best = Some(run);
        }
    }
    best.unwrap()
}

/// Number of distinct rows, compared bitwise.
pub fn distinct_rows(data: &[f64], dim: usize) -> usize {
    let mut rows: Vec<Vec<u64>> = data
        .chunks_exact(dim)
        .map(|r| r.iter().map(|x| x.to_bits()).collect())
        .collect();
    rows.sort_unstable();
    rows.dedup();
    rows.len()
}
