//! The scorer interface shared by ranking evaluation, TDD and explanations.

use crate::corpus::Interactions;
use crate::model::PersonaModel;

/// Anything that can score items for a user. Higher is better.
pub trait Scorer: Sync {
    fn num_items(&self) -> usize;

    fn score_items(&self, user: usize, items: &[usize]) -> Vec<f64>;

    fn score_all(&self, user: usize) -> Vec<f64> {
        let items: Vec<usize> = (0..self.num_items()).collect();
        self.score_items(user, &items)
    }
}

/// Persona model scorer with the item attention vectors precomputed once.
pub struct PersonaScorer<'a> {
    model: &'a PersonaModel,
    item_attn: Vec<f64>,
}

impl<'a> PersonaScorer<'a> {
    pub fn new(model: &'a PersonaModel) -> Self {
        PersonaScorer {
            model,
            item_attn: model.item_attn_table(),
        }
    }

    pub fn model(&self) -> &PersonaModel {
        self.model
    }

    pub fn item_attn(&self, item: usize) -> &[f64] {
        let da = self.model.config.attn_dim;
        &self.item_attn[item * da..(item + 1) * da]
    }

    /// Attention weights of `user`'s personas for `item`.
    pub fn weights(&self, user: usize, psi: &[f64], item: usize) -> Vec<f64> {
        debug_assert!(user < self.model.num_users());
        self.model.weights_from(psi, self.item_attn(item))
    }
}

impl Scorer for PersonaScorer<'_> {
    fn num_items(&self) -> usize {
        self.model.num_items()
    }

    fn score_items(&self, user: usize, items: &[usize]) -> Vec<f64> {
        let psi = self.model.persona_attn_vectors(user);
        items
            .iter()
            .map(|&j| self.model.score_from(user, j, &psi, self.item_attn(j)))
            .collect()
    }
}

impl Scorer for PersonaModel {
    fn num_items(&self) -> usize {
        PersonaModel::num_items(self)
    }

    fn score_items(&self, user: usize, items: &[usize]) -> Vec<f64> {
        self.score_all_items(user, items)
    }
}

/// Scores every item by its training popularity, identically for all users.
pub struct PopularityScorer {
    counts: Vec<f64>,
}

impl PopularityScorer {
    pub fn new(train: &Interactions) -> Self {
        PopularityScorer {
            counts: train.item_counts().into_iter().map(|c| c as f64).collect(),
        }
    }
}

impl Scorer for PopularityScorer {
    fn num_items(&self) -> usize {
        self.counts.len()
    }

    fn score_items(&self, _user: usize, items: &[usize]) -> Vec<f64> {
        items.iter().map(|&j| self.counts[j]).collect()
    }
}

/// Adapts a closure `(user, item) -> score`.
pub struct FnScorer<F> {
    num_items: usize,
    f: F,
}

impl<F: Fn(usize, usize) -> f64 + Sync> FnScorer<F> {
    pub fn new(num_items: usize, f: F) -> Self {
        FnScorer { num_items, f }
    }
}

impl<F: Fn(usize, usize) -> f64 + Sync> Scorer for FnScorer<F> {
    fn num_items(&self) -> usize {
        self.num_items
    }

    fn score_items(&self, user: usize, items: &[usize]) -> Vec<f64> {
        items.iter().map(|&j| (self.f)(user, j)).collect()
    }
}
