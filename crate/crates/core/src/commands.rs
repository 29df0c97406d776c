//! The operations behind each CLI subcommand.
//!
//! Every command reads the run config, works in `output_dir` and returns its
//! in-memory result so tests can call it directly. Reports carry the config
//! hash and seed in `#` header lines; wall-clock times go to a `.meta` file
//! next to each report so the report itself stays reproducible.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::aisp::build_aisp;
use crate::checkpoint::Checkpoint;
use crate::config::{derive_seed, RunConfig};
use crate::corpus::{load_ratings, split_leave_one_out, IdMap, Split};
use crate::error::{Error, Result};
use crate::explain::{explain_user, load_titles, render_markdown};
use crate::model::PersonaModel;
use crate::rank_eval::{evaluate, CandidateMode, RankingReport};
use crate::scoring::{PersonaScorer, PopularityScorer, Scorer};
use crate::tdd::{build_taste_space, tdd_report, TasteSpace, TddReport};
use crate::trainer::{format_history, train_with_protocol, TrainOutcome};

pub const CHECKPOINT_FILE: &str = "checkpoint.ampcf";
pub const HISTORY_FILE: &str = "history.tsv";
pub const TASTE_SPACE_FILE: &str = "taste_space.bin";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvalSplit {
    Validation,
    Test,
}

impl EvalSplit {
    pub fn name(self) -> &'static str {
        match self {
            EvalSplit::Validation => "validation",
            EvalSplit::Test => "test",
        }
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    RunConfig::load(path)
}

pub fn load_split(cfg: &RunConfig) -> Result<Split> {
    let data = load_ratings(cfg.dataset_path(), &cfg.dataset.format)?;
    log::info!(
        "loaded {} users, {} items, {} events",
        data.num_users(),
        data.num_items(),
        data.num_events()
    );
    Ok(split_leave_one_out(&data))
}

fn out_path(cfg: &RunConfig, name: &str) -> PathBuf {
    cfg.output_dir.join(name)
}

fn ensure_output_dir(cfg: &RunConfig) -> Result<()> {
    fs::create_dir_all(&cfg.output_dir).map_err(|e| Error::io(&cfg.output_dir, e))
}

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

fn write_meta(path: &Path, command: &str, cfg: &RunConfig, started: f64) -> Result<()> {
    let mut meta_path = path.as_os_str().to_owned();
    meta_path.push(".meta");
    let text = format!(
        "command={command}\nconfig_hash={}\nseed={}\nstarted_unix={started:.3}\nfinished_unix={:.3}\n",
        cfg.hash(),
        cfg.seed,
        unix_now()
    );
    write_file(Path::new(&meta_path), text.as_bytes())
}

fn header(cfg: &RunConfig, report: &str, extra: &[(&str, String)]) -> String {
    let mut out = format!("# report={report}\n# config_hash={}\n# seed={}\n", cfg.hash(), cfg.seed);
    for (k, v) in extra {
        let _ = writeln!(out, "# {k}={v}");
    }
    out
}

fn protocol_line(cfg: &RunConfig) -> String {
    match cfg.eval.candidate_mode {
        CandidateMode::Sampled => format!(
            "sampled negatives={} cutoff={}",
            cfg.eval.num_sampled_negatives, cfg.eval.cutoff
        ),
        CandidateMode::AllItems => format!("all-items cutoff={}", cfg.eval.cutoff),
    }
}

/// Ranking report: one `user\trank` line per evaluated user, then a summary.
pub fn format_ranking_report(
    cfg: &RunConfig,
    scorer_name: &str,
    split_name: &str,
    report: &RankingReport,
    users: &IdMap,
) -> String {
    let mut out = header(
        cfg,
        "ranking",
        &[
            ("scorer", scorer_name.to_string()),
            ("split", split_name.to_string()),
            ("protocol", protocol_line(cfg)),
        ],
    );
    out.push_str("user\trank\n");
    for &(u, rank) in &report.per_user {
        let _ = writeln!(out, "{}\t{rank}", users.external(u));
    }
    let k = report.cutoff;
    let _ = writeln!(out, "# users={}", report.per_user.len());
    let _ = writeln!(out, "# skipped={}", report.skipped.len());
    let _ = writeln!(out, "# hr@{k}={}", report.hr_at_k);
    let _ = writeln!(out, "# ndcg@{k}={}", report.ndcg_at_k);
    out
}

/// TDD report: one `user\tjs\thellinger` line per user, then the means.
pub fn format_tdd_report(cfg: &RunConfig, scorer_name: &str, report: &TddReport, users: &IdMap) -> String {
    let mut out = header(
        cfg,
        "tdd",
        &[
            ("scorer", scorer_name.to_string()),
            ("list_size", cfg.tdd.list_size.to_string()),
            ("clusters", cfg.tdd.clusters.to_string()),
        ],
    );
    out.push_str("user\tjs\thellinger\n");
    for row in &report.per_user {
        let _ = writeln!(out, "{}\t{}\t{}", users.external(row.user), row.js, row.hellinger);
    }
    let _ = writeln!(out, "# users={}", report.per_user.len());
    let _ = writeln!(out, "# skipped={}", report.skipped.len());
    let _ = writeln!(out, "# mean_js={}", report.mean_js);
    let _ = writeln!(out, "# mean_hellinger={}", report.mean_hellinger);
    out
}

#[derive(Debug)]
pub struct TrainArtifacts {
    pub checkpoint: PathBuf,
    pub history: PathBuf,
    pub outcome: TrainOutcome,
}

/// Trains on the configured data. `deterministic` forces a single worker;
/// otherwise `workers` overrides the config value when given.
pub fn cmd_train(cfg: &RunConfig, deterministic: bool, workers: Option<usize>) -> Result<TrainArtifacts> {
    let started = unix_now();
    let split = load_split(cfg)?;
    let mut train_cfg = cfg.train.clone();
    if let Some(w) = workers {
        train_cfg.workers = w;
    }
    if deterministic {
        train_cfg.workers = 1;
    }
    let model = PersonaModel::new(cfg.model_config(split.train.num_users(), split.train.num_items()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "train"));
    let outcome = train_with_protocol(&split, model, &train_cfg, &cfg.eval, &mut rng)?;
    log::info!("best epoch {} of {}", outcome.best_epoch, outcome.history.len());

    ensure_output_dir(cfg)?;
    let checkpoint = out_path(cfg, CHECKPOINT_FILE);
    Checkpoint {
        model: outcome.model.clone(),
        train: cfg.train.clone(),
        user_ids: split.train.user_ids.clone(),
        item_ids: split.train.item_ids.clone(),
    }
    .save(&checkpoint)?;
    write_meta(&checkpoint, "train", cfg, started)?;

    let history = out_path(cfg, HISTORY_FILE);
    let mut text = header(cfg, "history", &[("best_epoch", outcome.best_epoch.to_string())]);
    text.push_str(&format_history(&outcome.history));
    write_file(&history, text.as_bytes())?;
    Ok(TrainArtifacts {
        checkpoint,
        history,
        outcome,
    })
}

/// Loads a checkpoint and checks it against the config and the data.
pub fn load_checkpoint(cfg: &RunConfig, split: &Split, path: Option<&Path>) -> Result<PersonaModel> {
    let path = path.map_or_else(|| out_path(cfg, CHECKPOINT_FILE), Path::to_path_buf);
    let ckpt = Checkpoint::load(&path)?;
    let c = &ckpt.model.config;
    if (c.dim, c.attn_dim, c.personas) != (cfg.model.dim, cfg.model.attn_dim, cfg.model.personas) {
        return Err(Error::ShapeMismatch(format!(
            "checkpoint has dim={} attn_dim={} personas={}, config has dim={} attn_dim={} personas={}",
            c.dim, c.attn_dim, c.personas, cfg.model.dim, cfg.model.attn_dim, cfg.model.personas
        )));
    }
    if ckpt.user_ids != split.train.user_ids || ckpt.item_ids != split.train.item_ids {
        return Err(Error::ShapeMismatch(
            "checkpoint id maps do not match the configured dataset".into(),
        ));
    }
    Ok(ckpt.model)
}

fn targets_of(split: &Split, which: EvalSplit) -> &std::collections::BTreeMap<usize, usize> {
    match which {
        EvalSplit::Validation => &split.validation,
        EvalSplit::Test => &split.test,
    }
}

fn eval_seed(cfg: &RunConfig, which: EvalSplit) -> u64 {
    derive_seed(cfg.seed, &format!("eval-{}", which.name()))
}

fn run_ranking(
    cfg: &RunConfig,
    split: &Split,
    scorer: &dyn Scorer,
    scorer_name: &str,
    which: EvalSplit,
    started: f64,
) -> Result<RankingReport> {
    let report = evaluate(scorer, targets_of(split, which), &split.full, &cfg.eval, eval_seed(cfg, which));
    ensure_output_dir(cfg)?;
    let path = out_path(cfg, &format!("{scorer_name}_eval_{}.tsv", which.name()));
    let text = format_ranking_report(cfg, scorer_name, which.name(), &report, &split.train.user_ids);
    write_file(&path, text.as_bytes())?;
    write_meta(&path, "eval", cfg, started)?;
    Ok(report)
}

pub fn cmd_eval(cfg: &RunConfig, checkpoint: Option<&Path>, which: EvalSplit) -> Result<RankingReport> {
    let started = unix_now();
    let split = load_split(cfg)?;
    let model = load_checkpoint(cfg, &split, checkpoint)?;
    run_ranking(cfg, &split, &PersonaScorer::new(&model), "amp", which, started)
}

/// Identifies a taste space by its settings, seed and training data.
pub fn taste_space_key(cfg: &RunConfig, split: &Split) -> String {
    let mut h = Sha256::new();
    h.update(toml::to_string(&cfg.tdd).expect("tdd config serializes").as_bytes());
    h.update(derive_seed(cfg.seed, "tdd").to_le_bytes());
    h.update((split.train.num_users() as u64).to_le_bytes());
    h.update((split.train.num_items() as u64).to_le_bytes());
    for (u, j) in split.train.events() {
        h.update((u as u64).to_le_bytes());
        h.update((j as u64).to_le_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Loads the cached taste space when its key matches, otherwise builds and
/// stores it. An explicit path with a stale key is an error.
pub fn obtain_taste_space(cfg: &RunConfig, split: &Split, path: Option<&Path>) -> Result<TasteSpace> {
    let key = taste_space_key(cfg, split);
    let explicit = path.is_some();
    let path = path.map_or_else(|| out_path(cfg, TASTE_SPACE_FILE), Path::to_path_buf);
    if path.exists() {
        let (space, stored) = TasteSpace::load(&path)?;
        if stored == key {
            log::info!("reusing taste space {}", path.display());
            return Ok(space);
        }
        if explicit {
            return Err(Error::ShapeMismatch(format!(
                "taste space {} was built for different data or settings",
                path.display()
            )));
        }
        log::warn!("taste space {} is stale, rebuilding", path.display());
    }
    let space = build_taste_space(&split.train, &cfg.tdd, derive_seed(cfg.seed, "tdd"))?;
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    space.save(&path, &key)?;
    Ok(space)
}

fn run_tdd(
    cfg: &RunConfig,
    split: &Split,
    space: &TasteSpace,
    scorer: &dyn Scorer,
    scorer_name: &str,
    started: f64,
) -> Result<TddReport> {
    let report = tdd_report(scorer, split, space, cfg.tdd.list_size);
    ensure_output_dir(cfg)?;
    let path = out_path(cfg, &format!("{scorer_name}_tdd.tsv"));
    let text = format_tdd_report(cfg, scorer_name, &report, &split.train.user_ids);
    write_file(&path, text.as_bytes())?;
    write_meta(&path, "tdd", cfg, started)?;
    Ok(report)
}

#[derive(Debug)]
pub struct TddOutcome {
    pub model: TddReport,
    pub popularity: Option<TddReport>,
}

/// TDD of the checkpointed model, and of the popularity ranking when asked.
pub fn cmd_tdd(
    cfg: &RunConfig,
    checkpoint: Option<&Path>,
    space_path: Option<&Path>,
    with_popularity: bool,
) -> Result<TddOutcome> {
    let started = unix_now();
    let split = load_split(cfg)?;
    let model = load_checkpoint(cfg, &split, checkpoint)?;
    let space = obtain_taste_space(cfg, &split, space_path)?;
    let model_report = run_tdd(cfg, &split, &space, &PersonaScorer::new(&model), "amp", started)?;
    let popularity = if with_popularity {
        let pop = PopularityScorer::new(&split.train);
        Some(run_tdd(cfg, &split, &space, &pop, "popularity", started)?)
    } else {
        None
    };
    Ok(TddOutcome {
        model: model_report,
        popularity,
    })
}

#[derive(Debug)]
pub struct AispOutcome {
    pub ranking: RankingReport,
    pub tdd: TddReport,
}

/// Builds the taste-space persona baseline and reports its ranking and TDD.
pub fn cmd_aisp(cfg: &RunConfig, space_path: Option<&Path>, which: EvalSplit) -> Result<AispOutcome> {
    let started = unix_now();
    let split = load_split(cfg)?;
    let space = obtain_taste_space(cfg, &split, space_path)?;
    let aisp = build_aisp(&split.train, &space, cfg.aisp.personas, derive_seed(cfg.seed, "aisp"));
    let ranking = run_ranking(cfg, &split, &aisp, "aisp", which, started)?;
    let tdd = run_tdd(cfg, &split, &space, &aisp, "aisp", started)?;
    Ok(AispOutcome { ranking, tdd })
}

/// Markdown explanation for one user, addressed by external id.
pub fn cmd_explain(
    cfg: &RunConfig,
    checkpoint: Option<&Path>,
    user: &str,
    titles: Option<&Path>,
    list_size: Option<usize>,
) -> Result<String> {
    let split = load_split(cfg)?;
    let model = load_checkpoint(cfg, &split, checkpoint)?;
    let index = split.train.user_ids.index_of(user).ok_or_else(|| Error::UnknownId {
        kind: "user",
        id: user.to_string(),
    })?;
    let n = list_size.unwrap_or(cfg.explain.list_size);
    if n == 0 {
        return Err(Error::Config("explain list size must be >= 1".into()));
    }
    let titles_path = titles.map(Path::to_path_buf).or_else(|| cfg.explain.titles.clone());
    let titles = titles_path
        .map(|p| load_titles(&p, &cfg.explain.titles_delimiter))
        .transpose()?;
    let report = explain_user(&model, index, &split.train, n);
    Ok(render_markdown(
        &report,
        &split.train.user_ids,
        &split.train.item_ids,
        titles.as_ref(),
    ))
}
