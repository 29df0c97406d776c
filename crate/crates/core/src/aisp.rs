//! Inference-only persona baseline in the taste space.
//!
//! Each user's personas are the K-means centroids of the PCA vectors of the
//! user's training items. Scoring runs the attentive pipeline with identity
//! attention maps, dot-product similarities and no bias.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::corpus::Interactions;
use crate::kmeans::{distinct_rows, kmeans, KMeansConfig};
use crate::model::{dot, softmax};
use crate::scoring::Scorer;
use crate::tdd::TasteSpace;

#[derive(Clone, Debug, PartialEq)]
pub struct AispModel {
    pub persona_count: usize,
    pub dims: usize,
    /// Per user, `k_u × dims` with `k_u ≤ persona_count`.
    pub personas: Vec<Vec<f64>>,
    /// Shared item vectors (the taste-space PCA vectors), `num_items × dims`.
    pub item_vectors: Vec<f64>,
}

pub fn build_aisp(train: &Interactions, space: &TasteSpace, persona_count: usize, seed: u64) -> AispModel {
    assert!(persona_count >= 1);
    let dims = space.dims;
    let personas = (0..train.num_users())
        .into_par_iter()
        .map(|u| {
            let items = train.items_of(u);
            let points: Vec<f64> = items
                .iter()
                .flat_map(|&j| space.item_vector(j).iter().copied())
                .collect();
            if points.is_empty() {
                return Vec::new();
            }
            let k = persona_count.min(distinct_rows(&points, dims));
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(u as u64);
            kmeans(&points, dims, &KMeansConfig::new(k), &mut rng).centroids
        })
        .collect();
    AispModel {
        persona_count,
        dims,
        personas,
        item_vectors: space.pca_vectors.clone(),
    }
}

impl AispModel {
    pub fn item_vector(&self, item: usize) -> &[f64] {
        &self.item_vectors[item * self.dims..(item + 1) * self.dims]
    }

    pub fn personas_of(&self, user: usize) -> impl Iterator<Item = &[f64]> {
        self.personas[user].chunks_exact(self.dims)
    }

    /// Attention weights of the user's personas for `item`.
    pub fn attention(&self, user: usize, item: usize) -> Vec<f64> {
        let r = self.item_vector(item);
        let logits: Vec<f64> = self.personas_of(user).map(|p| dot(p, r)).collect();
        softmax(&logits)
    }

    /// Users without training items score 0 everywhere.
    pub fn score(&self, user: usize, item: usize) -> f64 {
        let r = self.item_vector(item);
        let dots: Vec<f64> = self.personas_of(user).map(|p| dot(p, r)).collect();
        if dots.is_empty() {
            return 0.0;
        }
        // x·r = Σ a_k (p_k·r), and the logits are the same dots
        dot(&softmax(&dots), &dots)
    }
}

pub fn aisp_score(model: &AispModel, user: usize, item: usize) -> f64 {
    model.score(user, item)
}

impl Scorer for AispModel {
    fn num_items(&self) -> usize {
        self.item_vectors.len() / self.dims
    }

    fn score_items(&self, user: usize, items: &[usize]) -> Vec<f64> {
        items.iter().map(|&j| self.score(user, j)).collect()
    }
}
