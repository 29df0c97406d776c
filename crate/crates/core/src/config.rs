//! Run configuration, read from a single TOML file.
//!
//! ```toml
//! seed = 42
//! output_dir = "runs/ml100k"
//!
//! [dataset]
//! path = "data/ml-100k/u.data"
//! [dataset.format]
//! delimiter = "\t"
//! user_col = 0
//! item_col = 1
//! rating_col = 2
//! timestamp_col = 3
//! has_header = false
//!
//! [model]
//! dim = 64
//! attn_dim = 64
//! personas = 2
//!
//! [train]      # LossConfig fields
//! [eval]       # RankingProtocol fields
//! [tdd]        # TddConfig fields
//! [aisp]
//! personas = 2
//! [explain]
//! list_size = 10
//! ```
//!
//! Unknown keys are rejected everywhere.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::RatingFormat;
use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::rank_eval::RankingProtocol;
use crate::tdd::TddConfig;
use crate::trainer::LossConfig;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    pub path: Option<PathBuf>,
    pub format: RatingFormat,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub dim: usize,
    pub attn_dim: usize,
    pub personas: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            dim: 64,
            attn_dim: 64,
            personas: 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AispSection {
    pub personas: usize,
}

impl Default for AispSection {
    fn default() -> Self {
        AispSection { personas: 2 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExplainSection {
    pub list_size: usize,
    pub titles: Option<PathBuf>,
    pub titles_delimiter: String,
}

impl Default for ExplainSection {
    fn default() -> Self {
        ExplainSection {
            list_size: 10,
            titles: None,
            titles_delimiter: "\t".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub dataset: DatasetConfig,
    pub model: ModelSection,
    pub train: LossConfig,
    pub eval: RankingProtocol,
    pub tdd: TddConfig,
    pub aisp: AispSection,
    pub explain: ExplainSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 42,
            output_dir: PathBuf::from("runs"),
            dataset: DatasetConfig::default(),
            model: ModelSection::default(),
            train: LossConfig::default(),
            eval: RankingProtocol::default(),
            tdd: TddConfig::default(),
            aisp: AispSection::default(),
            explain: ExplainSection::default(),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads the file; relative dataset and titles paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(p) = cfg.dataset.path.as_mut() {
            resolve(p);
        }
        if let Some(p) = cfg.explain.titles.as_mut() {
            resolve(p);
        }
        resolve(&mut cfg.output_dir);
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dataset.path.is_none() {
            return Err(Error::Config("missing required key `dataset.path`".into()));
        }
        self.train.validate()?;
        if self.eval.cutoff == 0 {
            return Err(Error::Config("eval.cutoff must be >= 1".into()));
        }
        if self.model.personas == 0 || self.model.dim == 0 || self.model.attn_dim == 0 {
            return Err(Error::Config("model.dim, model.attn_dim and model.personas must be >= 1".into()));
        }
        if self.aisp.personas == 0 || self.tdd.list_size == 0 || self.tdd.clusters == 0 {
            return Err(Error::Config("aisp.personas, tdd.list_size and tdd.clusters must be >= 1".into()));
        }
        Ok(())
    }

    pub fn dataset_path(&self) -> &Path {
        self.dataset.path.as_deref().expect("validated")
    }

    pub fn model_config(&self, num_users: usize, num_items: usize) -> ModelConfig {
        ModelConfig {
            dim: self.model.dim,
            attn_dim: self.model.attn_dim,
            personas: self.model.personas,
            num_users,
            num_items,
            seed: derive_seed(self.seed, "init"),
        }
    }

    /// SHA-256 of the canonical TOML rendering, hex encoded. The output
    /// directory is not part of the hash.
    pub fn hash(&self) -> String {
        let mut copy = self.clone();
        copy.output_dir = PathBuf::new();
        let canonical = toml::to_string(&copy).expect("config serializes");
        Sha256::digest(canonical.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

/// Independent sub-seed for one stage of a run.
pub fn derive_seed(seed: u64, stage: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(stage.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}
