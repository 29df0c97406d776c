//! Entropy-regularized sampled-softmax training with hand-written gradients
//! and Adam.
//!
//! Per positive pair the objective is
//! `alpha * data_loss + (1 - alpha) * (lambda_p * H_pos - lambda_n * H_neg)`
//! where `data_loss` is the cross entropy of the positive among itself and the
//! sampled negatives, `H_pos` the attention entropy on the positive and `H_neg`
//! the summed attention entropy over the negatives.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{build_sampling_table, sample_negatives, Split};
use crate::error::{Error, Result};
use crate::model::{dot, softmax, ModelConfig, ParamBlocks, PersonaModel};
use crate::rank_eval::{evaluate, RankingProtocol};
use crate::scoring::PersonaScorer;

/// Weights below this are clamped inside the entropy logarithm.
pub const ENTROPY_CLAMP: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossConfig {
    pub alpha: f64,
    pub lambda_p: f64,
    pub lambda_n: f64,
    pub negatives_per_positive: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub patience: usize,
    pub max_epochs: usize,
    /// Weight decay added to every gradient before the Adam step.
    pub l2: f64,
    /// Gradient shards per minibatch; 1 is the deterministic single-thread
    /// mode, 0 means one per available core.
    pub workers: usize,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            alpha: 0.5,
            lambda_p: 1.0,
            lambda_n: 1.0,
            negatives_per_positive: 4,
            learning_rate: 0.001,
            batch_size: 256,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            patience: 5,
            max_epochs: 100,
            l2: 0.0,
            workers: 0,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config("train.alpha must lie in [0, 1]".into()));
        }
        if self.lambda_p < 0.0 || self.lambda_n < 0.0 {
            return Err(Error::Config("train.lambda_p and train.lambda_n must be >= 0".into()));
        }
        if self.negatives_per_positive == 0 {
            return Err(Error::Config("train.negatives_per_positive must be >= 1".into()));
        }
        if self.batch_size == 0 || self.max_epochs == 0 {
            return Err(Error::Config(
                "train.batch_size and train.max_epochs must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossBreakdown {
    pub data_loss: f64,
    pub pos_entropy: f64,
    pub neg_entropy: f64,
    pub entropy_loss: f64,
    pub total: f64,
}

impl LossBreakdown {
    fn accumulate(&mut self, other: &LossBreakdown, scale: f64) {
        self.data_loss += scale * other.data_loss;
        self.pos_entropy += scale * other.pos_entropy;
        self.neg_entropy += scale * other.neg_entropy;
        self.entropy_loss += scale * other.entropy_loss;
        self.total += scale * other.total;
    }

    fn is_finite(&self) -> bool {
        self.total.is_finite() && self.data_loss.is_finite()
    }
}

fn entropy(weights: &[f64]) -> f64 {
    -weights
        .iter()
        .map(|&a| a * a.max(ENTROPY_CLAMP).ln())
        .sum::<f64>()
}

/// d/da of `-a ln(max(a, clamp))`.
fn entropy_derivative(a: f64) -> f64 {
    if a >= ENTROPY_CLAMP {
        -(a.ln() + 1.0)
    } else {
        -ENTROPY_CLAMP.ln()
    }
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

fn combine(cfg: &LossConfig, data_loss: f64, pos_entropy: f64, neg_entropy: f64) -> LossBreakdown {
    let entropy_loss = cfg.lambda_p * pos_entropy - cfg.lambda_n * neg_entropy;
    LossBreakdown {
        data_loss,
        pos_entropy,
        neg_entropy,
        entropy_loss,
        total: cfg.alpha * data_loss + (1.0 - cfg.alpha) * entropy_loss,
    }
}

pub fn loss_for_example(
    model: &PersonaModel,
    user: usize,
    pos: usize,
    negs: &[usize],
    cfg: &LossConfig,
) -> LossBreakdown {
    debug_assert!(!negs.contains(&pos));
    let psi = model.persona_attn_vectors(user);
    let mut scores = Vec::with_capacity(negs.len() + 1);
    let mut pos_entropy = 0.0;
    let mut neg_entropy = 0.0;
    for (n, &j) in std::iter::once(&pos).chain(negs).enumerate() {
        let trace = model.attend_with(user, j, psi.clone(), model.item_attn_vector(j));
        scores.push(trace.score);
        let h = entropy(&trace.attn_weights);
        if n == 0 {
            pos_entropy = h;
        } else {
            neg_entropy += h;
        }
    }
    let data_loss = log_sum_exp(&scores) - scores[0];
    combine(cfg, data_loss, pos_entropy, neg_entropy)
}

/// Gradient of one example's total loss. Only parameters the example touches
/// have entries; the attention maps are always touched.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub user: usize,
    /// `personas × dim`, for `user` only.
    pub persona_matrix: Vec<f64>,
    pub item_vectors: BTreeMap<usize, Vec<f64>>,
    pub item_bias: BTreeMap<usize, f64>,
    pub attn_user_map: Vec<f64>,
    pub attn_item_map: Vec<f64>,
}

impl Gradients {
    /// Adds `scale ×` this gradient into a dense buffer of model shape.
    pub fn add_to(&self, dense: &mut ParamBlocks, config: &ModelConfig, scale: f64) {
        let d = config.dim;
        let block = config.personas * d;
        let start = self.user * block;
        for (o, g) in dense.persona_matrices[start..start + block]
            .iter_mut()
            .zip(&self.persona_matrix)
        {
            *o += scale * g;
        }
        for (&j, g) in &self.item_vectors {
            for (o, g) in dense.item_vectors[j * d..(j + 1) * d].iter_mut().zip(g) {
                *o += scale * g;
            }
        }
        for (&j, g) in &self.item_bias {
            dense.item_bias[j] += scale * g;
        }
        for (o, g) in dense.attn_user_map.iter_mut().zip(&self.attn_user_map) {
            *o += scale * g;
        }
        for (o, g) in dense.attn_item_map.iter_mut().zip(&self.attn_item_map) {
            *o += scale * g;
        }
    }
}

/// Per-example gradient pieces; attention-map gradients go straight into the
/// caller's accumulators.
struct ExampleGrad {
    user: usize,
    persona_matrix: Vec<f64>,
    /// (item, vector gradient, bias gradient) per candidate, duplicates not merged.
    items: Vec<(usize, Vec<f64>, f64)>,
}

fn backprop(
    model: &PersonaModel,
    user: usize,
    pos: usize,
    negs: &[usize],
    cfg: &LossConfig,
    attn_user_grad: &mut [f64],
    attn_item_grad: &mut [f64],
) -> (LossBreakdown, ExampleGrad) {
    let (d, da, r) = (model.config.dim, model.config.attn_dim, model.config.personas);
    let psi = model.persona_attn_vectors(user);
    let personas = model.personas_of(user);

    struct Candidate {
        item: usize,
        phi: Vec<f64>,
        weights: Vec<f64>,
        persona_dots: Vec<f64>,
        score: f64,
    }

    let candidates: Vec<Candidate> = std::iter::once(&pos)
        .chain(negs)
        .map(|&j| {
            let phi = model.item_attn_vector(j);
            let logits: Vec<f64> = psi.chunks_exact(da).map(|p| dot(p, &phi)).collect();
            let weights = softmax(&logits);
            let v = model.item_vector(j);
            let persona_dots: Vec<f64> = personas.chunks_exact(d).map(|u| dot(u, v)).collect();
            let score = dot(&weights, &persona_dots) + model.item_bias(j);
            Candidate {
                item: j,
                phi,
                weights,
                persona_dots,
                score,
            }
        })
        .collect();

    let scores: Vec<f64> = candidates.iter().map(|c| c.score).collect();
    let data_loss = log_sum_exp(&scores) - scores[0];
    let probs = softmax(&scores);
    let pos_entropy = entropy(&candidates[0].weights);
    let neg_entropy: f64 = candidates[1..].iter().map(|c| entropy(&c.weights)).sum();
    let loss = combine(cfg, data_loss, pos_entropy, neg_entropy);

    let mut grad_personas = vec![0.0; r * d];
    let mut grad_psi = vec![0.0; r * da];
    let mut items = Vec::with_capacity(candidates.len());
    for (n, c) in candidates.iter().enumerate() {
        let target = if n == 0 { 1.0 } else { 0.0 };
        let grad_score = cfg.alpha * (probs[n] - target);
        let entropy_weight = if n == 0 {
            (1.0 - cfg.alpha) * cfg.lambda_p
        } else {
            -(1.0 - cfg.alpha) * cfg.lambda_n
        };

        let grad_weights: Vec<f64> = (0..r)
            .map(|k| grad_score * c.persona_dots[k] + entropy_weight * entropy_derivative(c.weights[k]))
            .collect();
        let mean_grad = dot(&c.weights, &grad_weights);
        let grad_logits: Vec<f64> = (0..r)
            .map(|k| c.weights[k] * (grad_weights[k] - mean_grad))
            .collect();

        let mut grad_phi = vec![0.0; da];
        for k in 0..r {
            let psi_k = &psi[k * da..(k + 1) * da];
            let g_psi_k = &mut grad_psi[k * da..(k + 1) * da];
            for a in 0..da {
                grad_phi[a] += grad_logits[k] * psi_k[a];
                g_psi_k[a] += grad_logits[k] * c.phi[a];
            }
        }

        let v = model.item_vector(c.item);
        // score path: x·v with x = Σ a_k u_k
        let mut grad_v = vec![0.0; d];
        for k in 0..r {
            let u = &personas[k * d..(k + 1) * d];
            let gu = &mut grad_personas[k * d..(k + 1) * d];
            let wk = grad_score * c.weights[k];
            for f in 0..d {
                grad_v[f] += wk * u[f];
                gu[f] += wk * v[f];
            }
        }
        // attention path: φ = A^v v
        let map = &model.params.attn_item_map;
        for a in 0..da {
            let g = grad_phi[a];
            if g == 0.0 {
                continue;
            }
            let row = &map[a * d..(a + 1) * d];
            let grow = &mut attn_item_grad[a * d..(a + 1) * d];
            for f in 0..d {
                grad_v[f] += g * row[f];
                grow[f] += g * v[f];
            }
        }
        items.push((c.item, grad_v, grad_score));
    }

    // ψ_k = u_k A^u
    let map = &model.params.attn_user_map;
    for k in 0..r {
        let u = &personas[k * d..(k + 1) * d];
        let g_psi_k = &grad_psi[k * da..(k + 1) * da];
        let gu = &mut grad_personas[k * d..(k + 1) * d];
        for f in 0..d {
            let row = &map[f * da..(f + 1) * da];
            let grow = &mut attn_user_grad[f * da..(f + 1) * da];
            gu[f] += dot(row, g_psi_k);
            for a in 0..da {
                grow[a] += u[f] * g_psi_k[a];
            }
        }
    }

    (
        loss,
        ExampleGrad {
            user,
            persona_matrix: grad_personas,
            items,
        },
    )
}

/// Exact analytic gradient of `loss_for_example(..).total`.
pub fn gradients(
    model: &PersonaModel,
    user: usize,
    pos: usize,
    negs: &[usize],
    cfg: &LossConfig,
) -> (LossBreakdown, Gradients) {
    let mut attn_user_map = vec![0.0; model.params.attn_user_map.len()];
    let mut attn_item_map = vec![0.0; model.params.attn_item_map.len()];
    let (loss, g) = backprop(model, user, pos, negs, cfg, &mut attn_user_map, &mut attn_item_map);
    let mut item_vectors: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    let mut item_bias: BTreeMap<usize, f64> = BTreeMap::new();
    for (j, gv, gb) in g.items {
        let entry = item_vectors.entry(j).or_insert_with(|| vec![0.0; gv.len()]);
        for (e, x) in entry.iter_mut().zip(&gv) {
            *e += x;
        }
        *item_bias.entry(j).or_insert(0.0) += gb;
    }
    (
        loss,
        Gradients {
            user,
            persona_matrix: g.persona_matrix,
            item_vectors,
            item_bias,
            attn_user_map,
            attn_item_map,
        },
    )
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl From<&LossConfig> for AdamConfig {
    fn from(cfg: &LossConfig) -> Self {
        AdamConfig {
            learning_rate: cfg.learning_rate,
            beta1: cfg.adam_beta1,
            beta2: cfg.adam_beta2,
            eps: cfg.adam_eps,
        }
    }
}

/// Optimizer moments plus early-stopping bookkeeping.
#[derive(Clone, Debug)]
pub struct TrainState {
    pub first_moment: ParamBlocks,
    pub second_moment: ParamBlocks,
    pub step: u64,
    pub best_hr: f64,
    pub best_ndcg: f64,
    pub epochs_since_improvement: usize,
}

impl TrainState {
    pub fn new(config: &ModelConfig) -> Self {
        TrainState {
            first_moment: ParamBlocks::zeros(config),
            second_moment: ParamBlocks::zeros(config),
            step: 0,
            best_hr: f64::NEG_INFINITY,
            best_ndcg: f64::NEG_INFINITY,
            epochs_since_improvement: 0,
        }
    }

    /// One bias-corrected Adam update of every parameter.
    pub fn adam_step(&mut self, params: &mut ParamBlocks, grads: &ParamBlocks, cfg: &AdamConfig) {
        self.step += 1;
        let t = self.step as i32;
        let lr_t = cfg.learning_rate * (1.0 - cfg.beta2.powi(t)).sqrt() / (1.0 - cfg.beta1.powi(t));
        let eps_hat = cfg.eps * (1.0 - cfg.beta2.powi(t)).sqrt();
        let blocks = params
            .blocks_mut()
            .into_iter()
            .zip(grads.blocks())
            .zip(self.first_moment.blocks_mut())
            .zip(self.second_moment.blocks_mut());
        for (((p, g), m), v) in blocks {
            for i in 0..p.len() {
                let gi = g[i];
                m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
                v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
                p[i] -= lr_t * m[i] / (v[i].sqrt() + eps_hat);
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: LossBreakdown,
    pub val_hr: Option<f64>,
    pub val_ndcg: Option<f64>,
    pub improved: bool,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters of the best validation epoch (last epoch without validation users).
    pub model: PersonaModel,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub state: TrainState,
}

/// Tab-separated history, one line per epoch.
pub fn format_history(history: &[EpochRecord]) -> String {
    let mut out = String::from(
        "epoch\tdata_loss\tpos_entropy\tneg_entropy\tentropy_loss\ttotal\tval_hr\tval_ndcg\n",
    );
    let opt = |x: Option<f64>| x.map_or_else(|| "NA".to_string(), |v| v.to_string());
    for r in history {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.epoch,
            r.loss.data_loss,
            r.loss.pos_entropy,
            r.loss.neg_entropy,
            r.loss.entropy_loss,
            r.loss.total,
            opt(r.val_hr),
            opt(r.val_ndcg)
        );
    }
    out
}

pub fn train(
    split: &Split,
    model: PersonaModel,
    cfg: &LossConfig,
    rng: &mut impl Rng,
) -> Result<TrainOutcome> {
    train_with_protocol(split, model, cfg, &RankingProtocol::default(), rng)
}

/// Mixes the validation seed from the run generator once, so every epoch
/// ranks against the same sampled candidates.
fn validation_seed(rng: &mut impl Rng) -> u64 {
    rng.random()
}

pub fn train_with_protocol(
    split: &Split,
    mut model: PersonaModel,
    cfg: &LossConfig,
    protocol: &RankingProtocol,
    rng: &mut impl Rng,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let train = &split.train;
    if train.num_users() != model.num_users() || train.num_items() != model.num_items() {
        return Err(Error::ShapeMismatch(format!(
            "model is {}×{} but data is {}×{}",
            model.num_users(),
            model.num_items(),
            train.num_users(),
            train.num_items()
        )));
    }
    let table = build_sampling_table(train);
    let exclusions = train.sorted_item_sets();
    let mut events: Vec<(usize, usize)> = train.events().collect();
    let eval_seed = validation_seed(rng);
    let adam = AdamConfig::from(cfg);
    let mut state = TrainState::new(&model.config);
    let mut grads = ParamBlocks::zeros(&model.config);
    let mut history = Vec::new();
    let mut best = (model.clone(), 0usize, f64::NEG_INFINITY, f64::NEG_INFINITY);
    let n_neg = cfg.negatives_per_positive;
    let workers = match cfg.workers {
        0 => rayon::current_num_threads(),
        n => n,
    };

    for epoch in 1..=cfg.max_epochs {
        events.shuffle(rng);
        let mut negatives = Vec::with_capacity(events.len() * n_neg);
        for &(u, _) in &events {
            negatives.extend(sample_negatives(&table, &exclusions[u], n_neg, rng)?);
        }

        let mut epoch_loss = LossBreakdown::default();
        let mut batches = 0usize;
        for (batch_index, (batch, batch_negs)) in events
            .chunks(cfg.batch_size)
            .zip(negatives.chunks(cfg.batch_size * n_neg))
            .enumerate()
        {
            grads.fill(0.0);
            let scale = 1.0 / batch.len() as f64;
            let shard_len = batch.len().div_ceil(workers);
            let run_shard = |(events, negs): (&[(usize, usize)], &[usize])| {
                let mut au = vec![0.0; model.params.attn_user_map.len()];
                let mut av = vec![0.0; model.params.attn_item_map.len()];
                let mut loss = LossBreakdown::default();
                let mut pieces = Vec::with_capacity(events.len());
                for (&(u, j), negs) in events.iter().zip(negs.chunks(n_neg)) {
                    let (l, g) = backprop(&model, u, j, negs, cfg, &mut au, &mut av);
                    loss.accumulate(&l, 1.0);
                    pieces.push(g);
                }
                (loss, pieces, au, av)
            };
            let shards: Vec<(&[(usize, usize)], &[usize])> = batch
                .chunks(shard_len)
                .zip(batch_negs.chunks(shard_len * n_neg))
                .collect();
            let results: Vec<_> = if workers == 1 {
                shards.into_iter().map(run_shard).collect()
            } else {
                shards.into_par_iter().map(run_shard).collect()
            };

            let mut batch_loss = LossBreakdown::default();
            let (d, block) = (model.config.dim, model.config.personas * model.config.dim);
            for (loss, pieces, au, av) in results {
                batch_loss.accumulate(&loss, scale);
                for (o, g) in grads.attn_user_map.iter_mut().zip(&au) {
                    *o += scale * g;
                }
                for (o, g) in grads.attn_item_map.iter_mut().zip(&av) {
                    *o += scale * g;
                }
                for piece in pieces {
                    let start = piece.user * block;
                    for (o, g) in grads.persona_matrices[start..start + block]
                        .iter_mut()
                        .zip(&piece.persona_matrix)
                    {
                        *o += scale * g;
                    }
                    for (j, gv, gb) in piece.items {
                        for (o, g) in grads.item_vectors[j * d..(j + 1) * d].iter_mut().zip(&gv) {
                            *o += scale * g;
                        }
                        grads.item_bias[j] += scale * gb;
                    }
                }
            }
            if !batch_loss.is_finite() {
                let (user, item) = batch[0];
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: batch_index,
                    user,
                    item,
                });
            }
            if cfg.l2 > 0.0 {
                let params = model.params.blocks();
                for (g, p) in grads.blocks_mut().into_iter().zip(params) {
                    for (gi, pi) in g.iter_mut().zip(p) {
                        *gi += cfg.l2 * pi;
                    }
                }
            }
            state.adam_step(&mut model.params, &grads, &adam);
            epoch_loss.accumulate(&batch_loss, 1.0);
            batches += 1;
        }
        let mut mean_loss = LossBreakdown::default();
        mean_loss.accumulate(&epoch_loss, 1.0 / batches.max(1) as f64);

        let (val_hr, val_ndcg, improved) = if split.validation.is_empty() {
            best = (model.clone(), epoch, f64::NEG_INFINITY, f64::NEG_INFINITY);
            (None, None, false)
        } else {
            let scorer = PersonaScorer::new(&model);
            let report = evaluate(&scorer, &split.validation, &split.full, protocol, eval_seed);
            let improved = report.hr_at_k > state.best_hr || report.ndcg_at_k > state.best_ndcg;
            state.best_hr = state.best_hr.max(report.hr_at_k);
            state.best_ndcg = state.best_ndcg.max(report.ndcg_at_k);
            if improved {
                state.epochs_since_improvement = 0;
            } else {
                state.epochs_since_improvement += 1;
            }
            if report.hr_at_k > best.2 || (report.hr_at_k == best.2 && report.ndcg_at_k > best.3) {
                best = (model.clone(), epoch, report.hr_at_k, report.ndcg_at_k);
            }
            (Some(report.hr_at_k), Some(report.ndcg_at_k), improved)
        };
        log::info!(
            "epoch {epoch}: loss {:.5} (data {:.5}, H+ {:.4}, H- {:.4}) val HR {} NDCG {}",
            mean_loss.total,
            mean_loss.data_loss,
            mean_loss.pos_entropy,
            mean_loss.neg_entropy,
            val_hr.map_or("NA".into(), |v| format!("{v:.4}")),
            val_ndcg.map_or("NA".into(), |v| format!("{v:.4}")),
        );
        history.push(EpochRecord {
            epoch,
            loss: mean_loss,
            val_hr,
            val_ndcg,
            improved,
        });
        if !split.validation.is_empty() && state.epochs_since_improvement >= cfg.patience {
            break;
        }
    }

    Ok(TrainOutcome {
        model: best.0,
        best_epoch: best.1,
        history,
        state,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{split_leave_one_out, Interactions};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_model(d: usize, da: usize, r: usize, users: usize, items: usize, seed: u64) -> PersonaModel {
        let config = ModelConfig {
            dim: d,
            attn_dim: da,
            personas: r,
            num_users: users,
            num_items: items,
            seed,
        };
        let mut m = PersonaModel::new(config).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
        for block in m.params.blocks_mut() {
            for x in block.iter_mut() {
                *x = rng.random_range(-0.5..0.5);
            }
        }
        m
    }

    #[test]
    fn uniform_attention_entropy_is_ln_r() {
        let mut m = random_model(4, 4, 4, 2, 6, 1);
        // zero item attention map → all logits 0 → uniform weights
        m.params.attn_item_map.iter_mut().for_each(|x| *x = 0.0);
        let l = loss_for_example(&m, 0, 1, &[2, 3, 4, 5], &LossConfig::default());
        assert!((l.pos_entropy - 4f64.ln()).abs() < 1e-12);
        assert!((l.neg_entropy - 4.0 * 4f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn equal_scores_give_ln_five() {
        let mut m = random_model(4, 4, 2, 2, 6, 2);
        m.params.item_vectors.iter_mut().for_each(|x| *x = 0.0);
        m.params.item_bias.iter_mut().for_each(|x| *x = 0.7);
        let l = loss_for_example(&m, 1, 0, &[1, 2, 3, 4], &LossConfig::default());
        assert!((l.data_loss - 5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn breakdown_combines_components() {
        let m = random_model(5, 3, 3, 3, 8, 3);
        let cfg = LossConfig {
            alpha: 0.3,
            lambda_p: 0.7,
            lambda_n: 1.9,
            ..LossConfig::default()
        };
        let l = loss_for_example(&m, 2, 5, &[0, 1, 7, 1], &cfg);
        let expected = 0.3 * l.data_loss + 0.7 * (0.7 * l.pos_entropy - 1.9 * l.neg_entropy);
        assert!((l.total - expected).abs() < 1e-14);
        assert!(l.pos_entropy >= 0.0 && l.pos_entropy <= 3f64.ln() + 1e-12);
        assert!(l.neg_entropy >= 0.0 && l.neg_entropy <= 4.0 * 3f64.ln() + 1e-12);
    }

    #[test]
    fn gradient_loss_matches_forward_loss() {
        let m = random_model(6, 5, 2, 3, 9, 4);
        let cfg = LossConfig::default();
        let (l, _) = gradients(&m, 1, 3, &[0, 8, 2, 2], &cfg);
        let f = loss_for_example(&m, 1, 3, &[0, 8, 2, 2], &cfg);
        assert!((l.total - f.total).abs() < 1e-12);
    }

    #[test]
    fn untouched_parameters_have_no_entries() {
        let m = random_model(4, 4, 2, 3, 10, 5);
        let (_, g) = gradients(&m, 2, 1, &[4, 7, 4, 9], &LossConfig::default());
        assert_eq!(g.user, 2);
        assert_eq!(g.item_vectors.keys().copied().collect::<Vec<_>>(), vec![1, 4, 7, 9]);
        assert_eq!(g.item_bias.len(), 4);
    }

    #[test]
    fn single_persona_has_zero_attention_gradients() {
        let m = random_model(4, 3, 1, 2, 6, 6);
        let (_, g) = gradients(&m, 0, 2, &[1, 3, 4, 5], &LossConfig::default());
        assert!(g.attn_user_map.iter().all(|&x| x == 0.0));
        assert!(g.attn_item_map.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn alpha_one_drops_entropy_terms() {
        let m = random_model(4, 4, 3, 2, 6, 7);
        let with = LossConfig {
            alpha: 1.0,
            lambda_p: 5.0,
            lambda_n: 3.0,
            ..LossConfig::default()
        };
        let without = LossConfig {
            alpha: 1.0,
            lambda_p: 0.0,
            lambda_n: 0.0,
            ..LossConfig::default()
        };
        let (_, a) = gradients(&m, 1, 0, &[2, 3, 4, 5], &with);
        let (_, b) = gradients(&m, 1, 0, &[2, 3, 4, 5], &without);
        assert_eq!(a, b);
    }

    #[test]
    fn zero_gradient_adam_step_is_identity() {
        let m = random_model(4, 4, 2, 2, 5, 8);
        let mut params = m.params.clone();
        let mut state = TrainState::new(&m.config);
        let zeros = ParamBlocks::zeros(&m.config);
        state.adam_step(&mut params, &zeros, &AdamConfig::from(&LossConfig::default()));
        assert_eq!(params, m.params);
        assert_eq!(state.step, 1);
    }

    fn toy_split() -> Split {
        // two user groups, each consuming its own block of 10 items
        let mut per_user = Vec::new();
        for u in 0..20 {
            let base = if u < 10 { 0 } else { 10 };
            per_user.push((0..10).map(|k| base + (k + u) % 10).collect());
        }
        split_leave_one_out(&Interactions::from_user_items(20, per_user))
    }

    #[test]
    fn zero_patience_runs_exactly_one_epoch() {
        let split = toy_split();
        let m = PersonaModel::new(ModelConfig {
            dim: 8,
            attn_dim: 8,
            ..ModelConfig::new(20, 20, 2)
        })
        .unwrap();
        let cfg = LossConfig {
            patience: 0,
            batch_size: 16,
            ..LossConfig::default()
        };
        let protocol = RankingProtocol {
            num_sampled_negatives: 5,
            ..RankingProtocol::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = train_with_protocol(&split, m, &cfg, &protocol, &mut rng).unwrap();
        assert_eq!(out.history.len(), 1);
        assert_eq!(out.best_epoch, 1);
    }

    #[test]
    fn sharded_gradients_match_single_shard() {
        let split = toy_split();
        let m = PersonaModel::new(ModelConfig {
            dim: 8,
            attn_dim: 8,
            ..ModelConfig::new(20, 20, 2)
        })
        .unwrap();
        let protocol = RankingProtocol {
            num_sampled_negatives: 5,
            ..RankingProtocol::default()
        };
        let run = |workers| {
            let cfg = LossConfig {
                max_epochs: 2,
                batch_size: 16,
                workers,
                ..LossConfig::default()
            };
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            train_with_protocol(&split, m.clone(), &cfg, &protocol, &mut rng).unwrap()
        };
        let a = run(1);
        let b = run(3);
        for (x, y) in a.history.iter().zip(&b.history) {
            assert!((x.loss.total - y.loss.total).abs() < 1e-9);
        }
    }

    #[test]
    fn invalid_loss_config_rejected() {
        let bad = LossConfig {
            alpha: 1.5,
            ..LossConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = LossConfig {
            negatives_per_positive: 0,
            ..LossConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
