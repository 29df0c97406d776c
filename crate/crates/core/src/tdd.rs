//! Taste Distribution Distance.
//!
//! Items are embedded by PCA of their binary user-consumption columns and the
//! embedded items are clustered with K-means. A list of items becomes a
//! distribution over clusters by averaging each item's cosine distances to the
//! cluster means and applying a softmax to the averaged distances. A user's
//! recommendation list and training history are compared through the
//! Jensen-Shannon divergence (square-root form) and the Hellinger distance.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Interactions, Split};
use crate::error::{Error, Result};
use crate::kmeans::{distinct_rows, kmeans, KMeansConfig};
use crate::model::softmax;
use crate::pca;
use crate::rank_eval::top_k_recommendations;
use crate::scoring::Scorer;
use crate::store::{Block, Container};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TddConfig {
    pub pca_dims: usize,
    pub clusters: usize,
    pub list_size: usize,
    /// Mean-center item vectors before PCA.
    pub center: bool,
    pub kmeans_restarts: usize,
    pub kmeans_max_iterations: usize,
    pub kmeans_tolerance: f64,
}

impl Default for TddConfig {
    fn default() -> Self {
        TddConfig {
            pca_dims: 100,
            clusters: 50,
            list_size: 30,
            center: true,
            kmeans_restarts: 3,
            kmeans_max_iterations: 300,
            kmeans_tolerance: 1e-6,
        }
    }
}

/// The neutral embedding and clustering every model is judged against.
#[derive(Clone, Debug, PartialEq)]
pub struct TasteSpace {
    pub dims: usize,
    pub clusters: usize,
    /// `num_items × dims`
    pub pca_vectors: Vec<f64>,
    /// `clusters × dims`
    pub cluster_means: Vec<f64>,
    /// `dims × num_users`
    pub pca_basis: Vec<f64>,
    pub pca_mean: Vec<f64>,
    pub item_clusters: Vec<usize>,
    /// Cosine distance of every item to every cluster mean, `num_items × clusters`.
    distances: Vec<f64>,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `1 - cos(a, b)`; a zero vector is maximally distant (1) from everything.
pub fn cosine_distance(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return 1.0;
    }
    1.0 - a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / (na * nb)
}

fn distance_table(vectors: &[f64], means: &[f64], dims: usize) -> Vec<f64> {
    let zero = vectors.chunks_exact(dims).filter(|v| norm(v) == 0.0).count();
    if zero > 0 {
        log::warn!("{zero} items have a zero PCA vector; their cluster distances are set to 1");
    }
    vectors
        .chunks_exact(dims)
        .flat_map(|v| means.chunks_exact(dims).map(move |m| cosine_distance(v, m)))
        .collect()
}

impl TasteSpace {
    pub fn num_items(&self) -> usize {
        self.item_clusters.len()
    }

    pub fn item_vector(&self, item: usize) -> &[f64] {
        &self.pca_vectors[item * self.dims..(item + 1) * self.dims]
    }

    pub fn item_distances(&self, item: usize) -> &[f64] {
        &self.distances[item * self.clusters..(item + 1) * self.clusters]
    }

    pub fn from_parts(
        dims: usize,
        pca_vectors: Vec<f64>,
        cluster_means: Vec<f64>,
        pca_basis: Vec<f64>,
        pca_mean: Vec<f64>,
        item_clusters: Vec<usize>,
    ) -> Self {
        let clusters = cluster_means.len() / dims;
        let distances = distance_table(&pca_vectors, &cluster_means, dims);
        TasteSpace {
            dims,
            clusters,
            pca_vectors,
            cluster_means,
            pca_basis,
            pca_mean,
            item_clusters,
            distances,
        }
    }

    pub fn to_container(&self, key: &str) -> Container {
        let mut c = Container::new("taste-space");
        c.push("key", Block::Text(key.to_string()))
            .push("dims", Block::U64(vec![self.dims as u64]))
            .push("pca_vectors", Block::F64(self.pca_vectors.clone()))
            .push("cluster_means", Block::F64(self.cluster_means.clone()))
            .push("pca_basis", Block::F64(self.pca_basis.clone()))
            .push("pca_mean", Block::F64(self.pca_mean.clone()))
            .push(
                "item_clusters",
                Block::U64(self.item_clusters.iter().map(|&c| c as u64).collect()),
            );
        c
    }

    pub fn save(&self, path: &Path, key: &str) -> Result<()> {
        self.to_container(key).write(path)
    }

    /// Loads a persisted space and the key it was saved under.
    pub fn load(path: &Path) -> Result<(Self, String)> {
        let c = Container::read(path)?;
        if c.kind != "taste-space" {
            return Err(Error::Checkpoint(format!("{} is a {}, not a taste space", path.display(), c.kind)));
        }
        let dims = *c.u64s("dims")?.first().ok_or_else(|| Error::Checkpoint("empty dims".into()))? as usize;
        let space = TasteSpace::from_parts(
            dims,
            c.f64s("pca_vectors")?.to_vec(),
            c.f64s("cluster_means")?.to_vec(),
            c.f64s("pca_basis")?.to_vec(),
            c.f64s("pca_mean")?.to_vec(),
            c.u64s("item_clusters")?.iter().map(|&x| x as usize).collect(),
        );
        Ok((space, c.text("key")?.to_string()))
    }
}

/// Builds the taste space from the binary user × item matrix of `train`.
pub fn build_taste_space(train: &Interactions, cfg: &TddConfig, seed: u64) -> Result<TasteSpace> {
    let (users, items) = (train.num_users(), train.num_items());
    if items <= cfg.pca_dims {
        return Err(Error::Config(format!(
            "taste space needs more items ({items}) than PCA dimensions ({})",
            cfg.pca_dims
        )));
    }
    // row j = item j described by the users that consumed it
    let mut columns = vec![0.0; items * users];
    for (u, j) in train.events() {
        columns[j * users + u] = 1.0;
    }
    let fit = pca::fit(&columns, items, users, cfg.pca_dims, cfg.center);
    let dims = cfg.pca_dims;
    let distinct = distinct_rows(&fit.scores, dims);
    if distinct < cfg.clusters {
        return Err(Error::Config(format!(
            "only {distinct} distinct item vectors for {} clusters",
            cfg.clusters
        )));
    }
    let km_cfg = KMeansConfig {
        k: cfg.clusters,
        max_iterations: cfg.kmeans_max_iterations,
        tolerance: cfg.kmeans_tolerance,
        restarts: cfg.kmeans_restarts,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let clusters = kmeans(&fit.scores, dims, &km_cfg, &mut rng);
    log::info!(
        "taste space: {items} items, PCA rank {}, K-means objective {:.4} after {} iterations",
        fit.rank,
        clusters.objective,
        clusters.iterations
    );
    Ok(TasteSpace::from_parts(
        dims,
        fit.scores,
        clusters.centroids,
        fit.basis,
        fit.mean,
        clusters.assignments,
    ))
}

/// A distribution over taste clusters.
#[derive(Clone, Debug, PartialEq)]
pub struct TasteDistribution {
    pub probs: Vec<f64>,
}

impl TasteDistribution {
    pub fn new(probs: Vec<f64>) -> Self {
        TasteDistribution { probs }
    }
}

/// Softmax of the cluster distances averaged over `items`.
///
/// Panics on an empty list.
pub fn taste_distribution(items: &[usize], space: &TasteSpace) -> TasteDistribution {
    assert!(!items.is_empty(), "taste distribution of an empty list");
    let mut mean = vec![0.0; space.clusters];
    for &j in items {
        for (m, d) in mean.iter_mut().zip(space.item_distances(j)) {
            *m += d;
        }
    }
    mean.iter_mut().for_each(|m| *m /= items.len() as f64);
    TasteDistribution::new(softmax(&mean))
}

fn kl(p: &[f64], m: &[f64]) -> f64 {
    p.iter()
        .zip(m)
        .filter(|(&pi, _)| pi > 0.0)
        .map(|(pi, mi)| pi * (pi / mi).ln())
        .sum()
}

/// `sqrt((KL(p‖m) + KL(q‖m)) / 2)` with `m` the pointwise mean, natural log.
pub fn js_divergence(p: &TasteDistribution, q: &TasteDistribution) -> f64 {
    let m: Vec<f64> = p.probs.iter().zip(&q.probs).map(|(a, b)| 0.5 * (a + b)).collect();
    // rounding can leave a tiny negative sum for p ≈ q
    ((kl(&p.probs, &m) + kl(&q.probs, &m)) / 2.0).max(0.0).sqrt()
}

pub fn hellinger(p: &TasteDistribution, q: &TasteDistribution) -> f64 {
    let sq: f64 = p
        .probs
        .iter()
        .zip(&q.probs)
        .map(|(a, b)| (a.sqrt() - b.sqrt()).powi(2))
        .sum();
    (sq.sqrt() / std::f64::consts::SQRT_2).min(1.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TddRow {
    pub user: usize,
    pub js: f64,
    pub hellinger: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TddReport {
    pub per_user: Vec<TddRow>,
    /// Users with an empty history or an empty list.
    pub skipped: Vec<usize>,
    pub mean_js: f64,
    pub mean_hellinger: f64,
}

/// Compares each user's `lists[user]` with that user's training history.
pub fn tdd_from_lists(lists: &[Vec<usize>], train: &Interactions, space: &TasteSpace) -> TddReport {
    let rows: Vec<(usize, Option<TddRow>)> = (0..train.num_users())
        .into_par_iter()
        .map(|u| {
            let history = train.items_of(u);
            let list = &lists[u];
            if history.is_empty() || list.is_empty() {
                return (u, None);
            }
            let d = taste_distribution(list, space);
            let t = taste_distribution(history, space);
            (
                u,
                Some(TddRow {
                    user: u,
                    js: js_divergence(&d, &t),
                    hellinger: hellinger(&d, &t),
                }),
            )
        })
        .collect();
    let mut per_user = Vec::new();
    let mut skipped = Vec::new();
    for (u, row) in rows {
        match row {
            Some(r) => per_user.push(r),
            None => skipped.push(u),
        }
    }
    if !skipped.is_empty() {
        log::info!("TDD skipped {} users with no history or no recommendations", skipped.len());
    }
    let n = per_user.len().max(1) as f64;
    TddReport {
        mean_js: per_user.iter().map(|r| r.js).sum::<f64>() / n,
        mean_hellinger: per_user.iter().map(|r| r.hellinger).sum::<f64>() / n,
        per_user,
        skipped,
    }
}

/// TDD of each user's top-`list_size` recommendations (training items excluded).
pub fn tdd_report(scorer: &dyn Scorer, split: &Split, space: &TasteSpace, list_size: usize) -> TddReport {
    let lists: Vec<Vec<usize>> = (0..split.train.num_users())
        .into_par_iter()
        .map(|u| top_k_recommendations(scorer, u, &split.train, list_size).items)
        .collect();
    tdd_from_lists(&lists, &split.train, space)
}
