//! Multi-persona user model with item-conditioned attention.
//!
//! Each user owns `r` persona rows. For an item, every persona is mapped into
//! the attention space through `attn_user_map`, the item through
//! `attn_item_map`, and their dot products are softmaxed into mixing weights.
//! The mixed user vector is scored against the item vector plus an item bias.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const INIT_STD: f64 = 0.01;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub dim: usize,
    pub attn_dim: usize,
    pub personas: usize,
    pub num_users: usize,
    pub num_items: usize,
    pub seed: u64,
}

impl ModelConfig {
    pub fn new(num_users: usize, num_items: usize, personas: usize) -> Self {
        ModelConfig {
            dim: 64,
            attn_dim: 64,
            personas,
            num_users,
            num_items,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.attn_dim == 0 || self.personas == 0 {
            return Err(Error::Config(
                "model.dim, model.attn_dim and model.personas must be >= 1".into(),
            ));
        }
        Ok(())
    }

    pub fn parameter_count(&self) -> usize {
        self.num_users * self.personas * self.dim
            + self.num_items * self.dim
            + 2 * self.dim * self.attn_dim
            + self.num_items
    }
}

/// The five parameter blocks, flat and row-major. The same layout is reused
/// for gradients and optimizer moments.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamBlocks {
    /// `num_items × dim`
    pub item_vectors: Vec<f64>,
    /// `num_users × personas × dim`
    pub persona_matrices: Vec<f64>,
    /// `dim × attn_dim`
    pub attn_user_map: Vec<f64>,
    /// `attn_dim × dim`
    pub attn_item_map: Vec<f64>,
    /// `num_items`
    pub item_bias: Vec<f64>,
}

pub const BLOCK_NAMES: [&str; 5] = [
    "item_vectors",
    "persona_matrices",
    "attn_user_map",
    "attn_item_map",
    "item_bias",
];

impl ParamBlocks {
    pub fn zeros(config: &ModelConfig) -> Self {
        ParamBlocks {
            item_vectors: vec![0.0; config.num_items * config.dim],
            persona_matrices: vec![0.0; config.num_users * config.personas * config.dim],
            attn_user_map: vec![0.0; config.dim * config.attn_dim],
            attn_item_map: vec![0.0; config.attn_dim * config.dim],
            item_bias: vec![0.0; config.num_items],
        }
    }

    pub fn blocks(&self) -> [&[f64]; 5] {
        [
            &self.item_vectors,
            &self.persona_matrices,
            &self.attn_user_map,
            &self.attn_item_map,
            &self.item_bias,
        ]
    }

    pub fn blocks_mut(&mut self) -> [&mut Vec<f64>; 5] {
        [
            &mut self.item_vectors,
            &mut self.persona_matrices,
            &mut self.attn_user_map,
            &mut self.attn_item_map,
            &mut self.item_bias,
        ]
    }

    pub fn fill(&mut self, value: f64) {
        for block in self.blocks_mut() {
            block.iter_mut().for_each(|x| *x = value);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.blocks().iter().all(|b| b.iter().all(|x| x.is_finite()))
    }

    fn shape_matches(&self, config: &ModelConfig) -> bool {
        let expected = ParamBlocks::zeros(config);
        let same = self
            .blocks()
            .iter()
            .zip(expected.blocks())
            .all(|(a, b)| a.len() == b.len());
        same
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PersonaModel {
    pub config: ModelConfig,
    pub params: ParamBlocks,
}

/// Intermediate values of one forward pass for a (user, item) pair.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionTrace {
    /// `personas × attn_dim`
    pub persona_attn_vectors: Vec<f64>,
    pub item_attn_vector: Vec<f64>,
    pub attn_logits: Vec<f64>,
    pub attn_weights: Vec<f64>,
    pub attentive_user: Vec<f64>,
    /// Dot product of the attentive user vector with the item vector, before bias.
    pub similarity: f64,
    pub score: f64,
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// In-place softmax with max subtraction.
pub(crate) fn softmax_in_place(values: &mut [f64]) {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in values.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in values.iter_mut() {
        *v /= sum;
    }
}

pub fn softmax(values: &[f64]) -> Vec<f64> {
    let mut out = values.to_vec();
    softmax_in_place(&mut out);
    out
}

/// Index of the largest value, lowest index on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = k;
        }
    }
    best
}

impl PersonaModel {
    /// Initializes from a generator seeded with `config.seed`.
    pub fn new(config: ModelConfig) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        Self::init(config, &mut rng)
    }

    /// Item vectors and personas ~ N(0, 0.01²), attention maps Glorot-uniform,
    /// biases zero.
    pub fn init(config: ModelConfig, rng: &mut impl Rng) -> Result<Self> {
        config.validate()?;
        let mut params = ParamBlocks::zeros(&config);
        let normal = Normal::new(0.0, INIT_STD).expect("valid std");
        let limit = (6.0 / (config.dim + config.attn_dim) as f64).sqrt();
        let uniform = Uniform::new_inclusive(-limit, limit).expect("valid range");
        for x in params.item_vectors.iter_mut() {
            *x = normal.sample(rng);
        }
        for x in params.persona_matrices.iter_mut() {
            *x = normal.sample(rng);
        }
        for x in params.attn_user_map.iter_mut() {
            *x = uniform.sample(rng);
        }
        for x in params.attn_item_map.iter_mut() {
            *x = uniform.sample(rng);
        }
        Ok(PersonaModel { config, params })
    }

    pub fn from_params(config: ModelConfig, params: ParamBlocks) -> Result<Self> {
        config.validate()?;
        if !params.shape_matches(&config) {
            return Err(Error::ShapeMismatch(
                "parameter blocks do not match model config".into(),
            ));
        }
        Ok(PersonaModel { config, params })
    }

    pub fn num_users(&self) -> usize {
        self.config.num_users
    }

    pub fn num_items(&self) -> usize {
        self.config.num_items
    }

    pub fn item_vector(&self, item: usize) -> &[f64] {
        let d = self.config.dim;
        &self.params.item_vectors[item * d..(item + 1) * d]
    }

    pub fn persona(&self, user: usize, k: usize) -> &[f64] {
        let d = self.config.dim;
        let start = (user * self.config.personas + k) * d;
        &self.params.persona_matrices[start..start + d]
    }

    pub fn personas_of(&self, user: usize) -> &[f64] {
        let block = self.config.personas * self.config.dim;
        &self.params.persona_matrices[user * block..(user + 1) * block]
    }

    pub fn item_bias(&self, item: usize) -> f64 {
        self.params.item_bias[item]
    }

    /// ψ_k = u_k A^u for every persona, `personas × attn_dim`.
    pub fn persona_attn_vectors(&self, user: usize) -> Vec<f64> {
        let (d, da, r) = (self.config.dim, self.config.attn_dim, self.config.personas);
        let map = &self.params.attn_user_map;
        let mut out = vec![0.0; r * da];
        for k in 0..r {
            let u = self.persona(user, k);
            let row = &mut out[k * da..(k + 1) * da];
            for (f, &uf) in u.iter().enumerate().take(d) {
                let m = &map[f * da..(f + 1) * da];
                for (o, &mv) in row.iter_mut().zip(m) {
                    *o += uf * mv;
                }
            }
        }
        out
    }

    /// φ = A^v v for one item, length `attn_dim`.
    pub fn item_attn_vector(&self, item: usize) -> Vec<f64> {
        let d = self.config.dim;
        let v = self.item_vector(item);
        self.params
            .attn_item_map
            .chunks_exact(d)
            .map(|row| dot(row, v))
            .collect()
    }

    /// φ for every item, `num_items × attn_dim`.
    pub fn item_attn_table(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_items() * self.config.attn_dim);
        for j in 0..self.num_items() {
            out.extend(self.item_attn_vector(j));
        }
        out
    }

    pub fn attend(&self, user: usize, item: usize) -> AttentionTrace {
        let psi = self.persona_attn_vectors(user);
        let phi = self.item_attn_vector(item);
        self.attend_with(user, item, psi, phi)
    }

    pub(crate) fn attend_with(
        &self,
        user: usize,
        item: usize,
        psi: Vec<f64>,
        phi: Vec<f64>,
    ) -> AttentionTrace {
        let (d, da) = (self.config.dim, self.config.attn_dim);
        let attn_logits: Vec<f64> = psi.chunks_exact(da).map(|p| dot(p, &phi)).collect();
        let attn_weights = softmax(&attn_logits);
        let mut attentive_user = vec![0.0; d];
        for (k, &a) in attn_weights.iter().enumerate() {
            for (x, &u) in attentive_user.iter_mut().zip(self.persona(user, k)) {
                *x += a * u;
            }
        }
        let similarity = dot(&attentive_user, self.item_vector(item));
        AttentionTrace {
            persona_attn_vectors: psi,
            item_attn_vector: phi,
            attn_logits,
            attn_weights,
            attentive_user,
            similarity,
            score: similarity + self.item_bias(item),
        }
    }

    /// Attention weights for one item given precomputed ψ and φ.
    pub(crate) fn weights_from(&self, psi: &[f64], phi: &[f64]) -> Vec<f64> {
        let da = self.config.attn_dim;
        let logits: Vec<f64> = psi.chunks_exact(da).map(|p| dot(p, phi)).collect();
        softmax(&logits)
    }

    /// Score from precomputed ψ and φ. Uses Σ_k a_k (u_k·v), which equals x·v.
    pub(crate) fn score_from(&self, user: usize, item: usize, psi: &[f64], phi: &[f64]) -> f64 {
        let weights = self.weights_from(psi, phi);
        let v = self.item_vector(item);
        let s: f64 = weights
            .iter()
            .enumerate()
            .map(|(k, a)| a * dot(self.persona(user, k), v))
            .sum();
        s + self.item_bias(item)
    }

    /// Scores `candidates` for `user`, sharing the persona projections.
    pub fn score_all_items(&self, user: usize, candidates: &[usize]) -> Vec<f64> {
        let psi = self.persona_attn_vectors(user);
        candidates
            .iter()
            .map(|&j| self.score_from(user, j, &psi, &self.item_attn_vector(j)))
            .collect()
    }

    /// Single-persona score u_k·v + b, attention collapsed onto persona `k`.
    pub fn persona_score(&self, user: usize, k: usize, item: usize) -> f64 {
        dot(self.persona(user, k), self.item_vector(item)) + self.item_bias(item)
    }
}
