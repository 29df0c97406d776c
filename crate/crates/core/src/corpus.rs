//! Rating-file ingestion, leave-one-out splitting and the unigram^0.5
//! negative-sampling table.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Column layout of a delimited rating file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RatingFormat {
    pub delimiter: String,
    pub user_col: usize,
    pub item_col: usize,
    pub rating_col: usize,
    /// When set, each user's items are stable-sorted by this column.
    pub timestamp_col: Option<usize>,
    pub has_header: bool,
    /// Drop events rated below this value. Off by default: every rating is a positive.
    pub min_rating: Option<f64>,
}

impl Default for RatingFormat {
    fn default() -> Self {
        RatingFormat {
            delimiter: "\t".to_string(),
            user_col: 0,
            item_col: 1,
            rating_col: 2,
            timestamp_col: Some(3),
            has_header: false,
            min_rating: None,
        }
    }
}

/// Bidirectional map between external string ids and dense indices.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct IdMap {
    external: Vec<String>,
    index: HashMap<String, usize>,
}

impl IdMap {
    pub fn from_external(external: Vec<String>) -> Self {
        let index = external
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), i))
            .collect();
        IdMap { external, index }
    }

    fn intern(&mut self, id: &str) -> usize {
        if let Some(&i) = self.index.get(id) {
            return i;
        }
        let i = self.external.len();
        self.external.push(id.to_string());
        self.index.insert(id.to_string(), i);
        i
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn external(&self, index: usize) -> &str {
        &self.external[index]
    }

    pub fn externals(&self) -> &[String] {
        &self.external
    }

    pub fn len(&self) -> usize {
        self.external.len()
    }

    pub fn is_empty(&self) -> bool {
        self.external.is_empty()
    }
}

/// De-duplicated positive user→item events with dense ids.
#[derive(Clone, Debug, PartialEq)]
pub struct Interactions {
    num_users: usize,
    num_items: usize,
    per_user: Vec<Vec<usize>>,
    pub user_ids: IdMap,
    pub item_ids: IdMap,
}

impl Interactions {
    /// Builds interactions from per-user item lists, collapsing repeated items.
    ///
    /// Panics if an item index is out of range.
    pub fn from_user_items(num_items: usize, per_user: Vec<Vec<usize>>) -> Self {
        let per_user: Vec<Vec<usize>> = per_user
            .into_iter()
            .map(|items| {
                let mut seen = vec![false; num_items];
                items
                    .into_iter()
                    .filter(|&j| {
                        assert!(j < num_items, "item {j} out of range");
                        !std::mem::replace(&mut seen[j], true)
                    })
                    .collect()
            })
            .collect();
        let num_users = per_user.len();
        Interactions {
            num_users,
            num_items,
            per_user,
            user_ids: IdMap::from_external((0..num_users).map(|u| u.to_string()).collect()),
            item_ids: IdMap::from_external((0..num_items).map(|j| j.to_string()).collect()),
        }
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn num_items(&self) -> usize {
        self.num_items
    }

    pub fn num_events(&self) -> usize {
        self.per_user.iter().map(Vec::len).sum()
    }

    /// Items of `user` in input order.
    pub fn items_of(&self, user: usize) -> &[usize] {
        &self.per_user[user]
    }

    pub fn per_user(&self) -> &[Vec<usize>] {
        &self.per_user
    }

    /// All (user, item) events, grouped by user.
    pub fn events(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.per_user
            .iter()
            .enumerate()
            .flat_map(|(u, items)| items.iter().map(move |&j| (u, j)))
    }

    /// Per-item event counts.
    pub fn item_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_items];
        for (_, j) in self.events() {
            counts[j] += 1;
        }
        counts
    }

    /// Per-user item lists sorted ascending, for binary-search membership.
    pub fn sorted_item_sets(&self) -> Vec<Vec<usize>> {
        self.per_user
            .iter()
            .map(|items| {
                let mut s = items.clone();
                s.sort_unstable();
                s
            })
            .collect()
    }
}

struct RawEvent {
    item: String,
    timestamp: f64,
}

fn parse_field<'a>(fields: &[&'a str], col: usize, line: usize, what: &str) -> Result<&'a str> {
    fields.get(col).map(|s| s.trim()).ok_or_else(|| Error::Parse {
        line,
        message: format!("missing {what} column {col} (found {} fields)", fields.len()),
    })
}

/// Reads a delimited rating file and converts it to implicit positives.
///
/// Users with fewer than two distinct items are dropped. User indices follow
/// first appearance in the file; item indices follow first appearance while
/// walking the kept users' (time-ordered) histories.
pub fn load_ratings(path: &Path, format: &RatingFormat) -> Result<Interactions> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_ratings(BufReader::new(file), format).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

pub fn read_ratings(reader: impl BufRead, format: &RatingFormat) -> Result<Interactions> {
    if format.delimiter.is_empty() {
        return Err(Error::Config("dataset.format.delimiter must not be empty".into()));
    }
    let mut users: Vec<String> = Vec::new();
    let mut user_index: HashMap<String, usize> = HashMap::new();
    let mut histories: Vec<Vec<RawEvent>> = Vec::new();

    for (n, line) in reader.lines().enumerate() {
        let line_no = n + 1;
        let line = line.map_err(|e| Error::io("<input>", e))?;
        if (n == 0 && format.has_header) || line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(format.delimiter.as_str()).collect();
        let user = parse_field(&fields, format.user_col, line_no, "user")?;
        let item = parse_field(&fields, format.item_col, line_no, "item")?;
        let rating_text = parse_field(&fields, format.rating_col, line_no, "rating")?;
        let rating: f64 = rating_text.parse().map_err(|_| Error::Parse {
            line: line_no,
            message: format!("rating `{rating_text}` is not a number"),
        })?;
        let timestamp = match format.timestamp_col {
            Some(col) => {
                let text = parse_field(&fields, col, line_no, "timestamp")?;
                text.parse::<f64>().map_err(|_| Error::Parse {
                    line: line_no,
                    message: format!("timestamp `{text}` is not a number"),
                })?
            }
            None => 0.0,
        };
        if user.is_empty() || item.is_empty() {
            return Err(Error::Parse {
                line: line_no,
                message: "empty user or item id".into(),
            });
        }
        if format.min_rating.is_some_and(|min| rating < min) {
            continue;
        }
        let u = *user_index.entry(user.to_string()).or_insert_with(|| {
            users.push(user.to_string());
            histories.push(Vec::new());
            users.len() - 1
        });
        histories[u].push(RawEvent {
            item: item.to_string(),
            timestamp,
        });
    }

    let mut user_ids = IdMap::default();
    let mut item_ids = IdMap::default();
    let mut per_user = Vec::new();
    for (external, mut history) in users.into_iter().zip(histories) {
        // sort_by is stable, so equal timestamps keep file order
        history.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
        let mut seen = std::collections::HashSet::new();
        history.retain(|e| seen.insert(e.item.clone()));
        if history.len() < 2 {
            continue;
        }
        user_ids.intern(&external);
        per_user.push(history.iter().map(|e| item_ids.intern(&e.item)).collect());
    }
    if per_user.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(Interactions {
        num_users: user_ids.len(),
        num_items: item_ids.len(),
        per_user,
        user_ids,
        item_ids,
    })
}

/// Leave-one-out split: last item → test, second-to-last → validation.
#[derive(Clone, Debug)]
pub struct Split {
    pub train: Interactions,
    pub validation: BTreeMap<usize, usize>,
    pub test: BTreeMap<usize, usize>,
    /// The unsplit data, used to keep every known positive out of evaluation negatives.
    pub full: Interactions,
}

/// Users with exactly two items get a test item but no validation item.
pub fn split_leave_one_out(data: &Interactions) -> Split {
    let mut validation = BTreeMap::new();
    let mut test = BTreeMap::new();
    let mut train_lists = Vec::with_capacity(data.num_users);
    for (u, items) in data.per_user.iter().enumerate() {
        let n = items.len();
        debug_assert!(n >= 2);
        test.insert(u, items[n - 1]);
        let train_len = if n >= 3 {
            validation.insert(u, items[n - 2]);
            n - 2
        } else {
            n - 1
        };
        train_lists.push(items[..train_len].to_vec());
    }
    let train = Interactions {
        num_users: data.num_users,
        num_items: data.num_items,
        per_user: train_lists,
        user_ids: data.user_ids.clone(),
        item_ids: data.item_ids.clone(),
    };
    Split {
        train,
        validation,
        test,
        full: data.clone(),
    }
}

/// Item distribution proportional to count^0.5, with a Walker alias table
/// for O(1) draws.
#[derive(Clone, Debug)]
pub struct SamplingTable {
    probabilities: Vec<f64>,
    alias_prob: Vec<f64>,
    alias: Vec<usize>,
}

pub const SAMPLING_POWER: f64 = 0.5;

impl SamplingTable {
    pub fn from_counts(counts: &[usize]) -> Self {
        let weights: Vec<f64> = counts
            .iter()
            .map(|&c| (c as f64).powf(SAMPLING_POWER))
            .collect();
        let total: f64 = weights.iter().sum();
        assert!(total > 0.0, "sampling table needs at least one counted item");
        let probabilities: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let (alias_prob, alias) = vose_alias(&probabilities);
        SamplingTable {
            probabilities,
            alias_prob,
            alias,
        }
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn num_items(&self) -> usize {
        self.probabilities.len()
    }

    pub fn draw(&self, rng: &mut impl Rng) -> usize {
        let column = rng.random_range(0..self.alias.len());
        if rng.random::<f64>() < self.alias_prob[column] {
            column
        } else {
            self.alias[column]
        }
    }
}

fn vose_alias(probabilities: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let n = probabilities.len();
    let mut scaled: Vec<f64> = probabilities.iter().map(|p| p * n as f64).collect();
    let mut alias_prob = vec![1.0; n];
    let mut alias: Vec<usize> = (0..n).collect();
    let (mut small, mut large): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| scaled[i] < 1.0);
    while let (Some(&s), Some(&l)) = (small.last(), large.last()) {
        small.pop();
        alias_prob[s] = scaled[s];
        alias[s] = l;
        scaled[l] -= 1.0 - scaled[s];
        if scaled[l] < 1.0 {
            large.pop();
            small.push(l);
        }
    }
    // leftovers are 1 up to rounding
    for i in small.into_iter().chain(large) {
        alias_prob[i] = 1.0;
        alias[i] = i;
    }
    (alias_prob, alias)
}

pub fn build_sampling_table(train: &Interactions) -> SamplingTable {
    SamplingTable::from_counts(&train.item_counts())
}

const MAX_CONSECUTIVE_REJECTIONS: usize = 1000;

/// Draws `n` i.i.d. items from `table`, redrawing anything in `exclude`.
///
/// `exclude` must be sorted ascending without duplicates. When rejection keeps
/// failing (the excluded set carries most of the mass) the remaining draws come
/// from the renormalized allowed distribution, which is the same conditional law.
pub fn sample_negatives(
    table: &SamplingTable,
    exclude: &[usize],
    n: usize,
    rng: &mut impl Rng,
) -> Result<Vec<usize>> {
    debug_assert!(exclude.windows(2).all(|w| w[0] < w[1]));
    let positive = table.probabilities.iter().filter(|&&p| p > 0.0).count();
    let excluded_positive = exclude
        .iter()
        .filter(|&&j| table.probabilities.get(j).is_some_and(|&p| p > 0.0))
        .count();
    let available = positive - excluded_positive;
    if n == 0 || available < n {
        return Err(Error::InsufficientNegatives {
            requested: n,
            available,
        });
    }

    let mut out = Vec::with_capacity(n);
    let mut rejections = 0;
    while out.len() < n {
        let j = table.draw(rng);
        if exclude.binary_search(&j).is_err() {
            out.push(j);
            rejections = 0;
            continue;
        }
        rejections += 1;
        if rejections >= MAX_CONSECUTIVE_REJECTIONS {
            let allowed: Vec<(usize, f64)> = table
                .probabilities
                .iter()
                .enumerate()
                .filter(|&(j, &p)| p > 0.0 && exclude.binary_search(&j).is_err())
                .map(|(j, &p)| (j, p))
                .collect();
            let mass: f64 = allowed.iter().map(|(_, p)| p).sum();
            while out.len() < n {
                let mut target = rng.random::<f64>() * mass;
                let mut pick = allowed[allowed.len() - 1].0;
                for &(j, p) in &allowed {
                    if target < p {
                        pick = j;
                        break;
                    }
                    target -= p;
                }
                out.push(pick);
            }
        }
    }
    Ok(out)
}
