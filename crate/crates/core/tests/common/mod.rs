#![allow(dead_code)]

use std::path::PathBuf;

use ampcf::corpus::Interactions;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Items `t*block..(t+1)*block` form taste `t`.
pub struct TwoTaste {
    pub data: Interactions,
    pub block: usize,
    pub tastes: usize,
}

impl TwoTaste {
    pub fn block_of(&self, item: usize) -> usize {
        item / self.block
    }
}

fn pick(rng: &mut ChaCha8Rng, range: std::ops::Range<usize>, n: usize) -> Vec<usize> {
    let mut items: Vec<usize> = range.collect();
    items.shuffle(rng);
    items.truncate(n);
    items
}

/// Every user holds exactly two of six tastes, eight items from each, in
/// shuffled order. With `skew`, half of the users have taste 0 as one of
/// their two, which makes block 0 the popular one.
pub fn two_taste_corpus(seed: u64, skew: bool) -> TwoTaste {
    let (tastes, block, users, per_taste) = (6, 30, 300, 8);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let per_user = (0..users)
        .map(|u| {
            let mut chosen: Vec<usize> = (0..tastes).collect();
            chosen.shuffle(&mut rng);
            if skew && u % 2 == 0 && !chosen[..2].contains(&0) {
                chosen[0] = 0;
            }
            let mut items = Vec::new();
            for &t in &chosen[..2] {
                items.extend(pick(&mut rng, t * block..(t + 1) * block, per_taste));
            }
            items.shuffle(&mut rng);
            items
        })
        .collect();
    TwoTaste {
        data: Interactions::from_user_items(tastes * block, per_user),
        block,
        tastes,
    }
}

/// Two disjoint populations, each consuming most of its own item set.
pub fn two_cluster_corpus(seed: u64) -> Interactions {
    let block = 15;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let per_user = (0..120)
        .map(|u| {
            let base = if u % 2 == 0 { 0 } else { block };
            pick(&mut rng, base..base + block, 10)
        })
        .collect();
    Interactions::from_user_items(2 * block, per_user)
}

/// Uniformly random interactions.
pub fn random_corpus(users: usize, items: usize, per_user: usize, seed: u64) -> Interactions {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lists = (0..users)
        .map(|_| {
            let n = rng.random_range(2..=per_user);
            pick(&mut rng, 0..items, n)
        })
        .collect();
    Interactions::from_user_items(items, lists)
}

/// Writes `data` as a tab-separated `user item rating timestamp` file, one
/// timestamp per position so the file order survives loading.
pub fn write_ratings(data: &Interactions, path: &std::path::Path) {
    let mut out = String::new();
    let mut t = 0u64;
    for u in 0..data.num_users() {
        for &j in data.items_of(u) {
            t += 1;
            out.push_str(&format!("{}\t{}\t1\t{t}\n", u + 1, j + 1));
        }
    }
    std::fs::write(path, out).unwrap();
}

/// The MovieLens 100K ratings file, if present.
pub fn ml100k_path() -> Option<PathBuf> {
    let path = std::env::var_os("AMPCF_ML100K").map(PathBuf::from).unwrap_or_else(|| {
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/ml-100k/u.data")
    });
    path.exists().then_some(path)
}
