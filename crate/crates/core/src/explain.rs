//! Persona-level explanations of a user's recommendations.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::corpus::Interactions;
use crate::error::{Error, Result};
use crate::model::{argmax, PersonaModel};
use crate::rank_eval::{top_k_of, top_k_recommendations};
use crate::scoring::PersonaScorer;

#[derive(Clone, Debug, PartialEq)]
pub struct ExplainedItem {
    pub item: usize,
    pub score: f64,
    /// Persona with the largest attention weight, lowest index on ties.
    pub persona: usize,
    pub weights: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExplanationReport {
    pub user: usize,
    /// Per persona: unconsumed items ranked by `u_k · v + b`.
    pub persona_lists: Vec<Vec<(usize, f64)>>,
    pub final_list: Vec<ExplainedItem>,
    pub training_items: Vec<ExplainedItem>,
}

pub fn explain_user(model: &PersonaModel, user: usize, train: &Interactions, n: usize) -> ExplanationReport {
    assert!(n >= 1);
    let scorer = PersonaScorer::new(model);
    let psi = model.persona_attn_vectors(user);
    let explain = |item: usize, score: f64| {
        let weights = scorer.weights(user, &psi, item);
        ExplainedItem {
            item,
            score,
            persona: argmax(&weights),
            weights,
        }
    };

    let mut consumed = train.items_of(user).to_vec();
    consumed.sort_unstable();
    let candidates: Vec<usize> = (0..model.num_items())
        .filter(|j| consumed.binary_search(j).is_err())
        .collect();
    let persona_lists = (0..model.config.personas)
        .map(|k| {
            let scored = candidates
                .iter()
                .map(|&j| (j, model.persona_score(user, k, j)))
                .collect();
            top_k_of(scored, n)
        })
        .collect();

    let top = top_k_recommendations(&scorer, user, train, n);
    let final_list = top
        .items
        .iter()
        .zip(&top.scores)
        .map(|(&j, &s)| explain(j, s))
        .collect();
    let training_items = train
        .items_of(user)
        .iter()
        .map(|&j| explain(j, model.score_from(user, j, &psi, scorer.item_attn(j))))
        .collect();
    ExplanationReport {
        user,
        persona_lists,
        final_list,
        training_items,
    }
}

/// Reads `id<delim>title` lines.
pub fn load_titles(path: &Path, delimiter: &str) -> Result<HashMap<String, String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut titles = HashMap::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (id, title) = line.split_once(delimiter).ok_or_else(|| Error::Parse {
            line: n + 1,
            message: format!("expected `id{delimiter}title`"),
        })?;
        titles.insert(id.trim().to_string(), title.trim().to_string());
    }
    Ok(titles)
}

fn weights_cell(weights: &[f64]) -> String {
    weights
        .iter()
        .map(|w| format!("{w:.3}"))
        .collect::<Vec<_>>()
        .join(" / ")
}

/// Markdown rendering with items shown by external id (and title when known).
pub fn render_markdown(
    report: &ExplanationReport,
    users: &crate::corpus::IdMap,
    items: &crate::corpus::IdMap,
    titles: Option<&HashMap<String, String>>,
) -> String {
    let name = |j: usize| {
        let id = items.external(j);
        match titles.and_then(|t| t.get(id)) {
            Some(title) => format!("{title} ({id})"),
            None => id.to_string(),
        }
    };
    let mut out = String::new();
    let _ = writeln!(out, "# Explanation for user {}\n", users.external(report.user));

    let _ = writeln!(out, "## Recommendations\n");
    let _ = writeln!(out, "| rank | item | score | persona | attention |");
    let _ = writeln!(out, "|---:|---|---:|---:|---|");
    for (rank, e) in report.final_list.iter().enumerate() {
        let _ = writeln!(
            out,
            "| {} | {} | {:.4} | {} | {} |",
            rank + 1,
            name(e.item),
            e.score,
            e.persona + 1,
            weights_cell(&e.weights)
        );
    }

    for (k, list) in report.persona_lists.iter().enumerate() {
        let _ = writeln!(out, "\n## Persona {}\n", k + 1);
        let _ = writeln!(out, "| rank | item | score |");
        let _ = writeln!(out, "|---:|---|---:|");
        for (rank, (j, s)) in list.iter().enumerate() {
            let _ = writeln!(out, "| {} | {} | {:.4} |", rank + 1, name(*j), s);
        }
    }

    let _ = writeln!(out, "\n## Training items\n");
    let _ = writeln!(out, "| item | persona | attention |");
    let _ = writeln!(out, "|---|---:|---|");
    for e in &report.training_items {
        let _ = writeln!(out, "| {} | {} | {} |", name(e.item), e.persona + 1, weights_cell(&e.weights));
    }
    out
}
