//! Model checkpoints: config, id maps and the five parameter blocks.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::IdMap;
use crate::error::{Error, Result};
use crate::model::{ModelConfig, ParamBlocks, PersonaModel, BLOCK_NAMES};
use crate::store::{Block, Container};
use crate::trainer::LossConfig;

const KIND: &str = "ampcf-checkpoint";

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub model: PersonaModel,
    pub train: LossConfig,
    pub user_ids: IdMap,
    pub item_ids: IdMap,
}

#[derive(Serialize, Deserialize)]
struct Header {
    model: ModelConfig,
    train: LossConfig,
}

fn join_ids(ids: &IdMap) -> String {
    ids.externals().join("\n")
}

fn split_ids(text: &str) -> IdMap {
    if text.is_empty() {
        return IdMap::default();
    }
    IdMap::from_external(text.split('\n').map(str::to_string).collect())
}

impl Checkpoint {
    pub fn to_container(&self) -> Result<Container> {
        let header = toml::to_string(&Header {
            model: self.model.config.clone(),
            train: self.train.clone(),
        })
        .map_err(|e| Error::Checkpoint(e.to_string()))?;
        let mut c = Container::new(KIND);
        c.push("header", Block::Text(header))
            .push("user_ids", Block::Text(join_ids(&self.user_ids)))
            .push("item_ids", Block::Text(join_ids(&self.item_ids)));
        for (name, block) in BLOCK_NAMES.iter().zip(self.model.params.blocks()) {
            c.push(name, Block::F64(block.to_vec()));
        }
        Ok(c)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_container()?.write(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let c = Container::read(path)?;
        if c.kind != KIND {
            return Err(Error::Checkpoint(format!("{} is not a model checkpoint", path.display())));
        }
        let header: Header =
            toml::from_str(c.text("header")?).map_err(|e| Error::Checkpoint(e.to_string()))?;
        let mut params = ParamBlocks::zeros(&header.model);
        for (name, block) in BLOCK_NAMES.iter().zip(params.blocks_mut()) {
            let stored = c.f64s(name)?;
            if stored.len() != block.len() {
                return Err(Error::ShapeMismatch(format!(
                    "block `{name}` has {} values, config implies {}",
                    stored.len(),
                    block.len()
                )));
            }
            block.copy_from_slice(stored);
        }
        let user_ids = split_ids(c.text("user_ids")?);
        let item_ids = split_ids(c.text("item_ids")?);
        if user_ids.len() != header.model.num_users || item_ids.len() != header.model.num_items {
            return Err(Error::ShapeMismatch("id maps disagree with model config".into()));
        }
        Ok(Checkpoint {
            model: PersonaModel::from_params(header.model, params)?,
            train: header.train,
            user_ids,
            item_ids,
        })
    }
}
