//! Versioned JSON checkpoints.
//!
//! ```json
//! {
//!   "format": "edsmf-checkpoint",
//!   "version": 1,
//!   "model_kind": "model_a",
//!   "config": { "n_stocks": 33, "lookback": 16, ... },
//!   "blocks": [ { "name": "indicator.w1", "rows": 11, "cols": 16, "values": [...] }, ... ],
//!   "seed": 123,
//!   "step": 4000,
//!   "best_epoch": 7,
//!   "valid_loss": 0.41,
//!   "config_hash": "9f2c..."
//! }
//! ```
//!
//! Blocks appear in the model's parameter order; loading checks every name
//! and shape against a freshly laid-out model of the stored config. Floats
//! round-trip exactly.

use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use edsmf_core::experiment::ModelKind;
use edsmf_core::mixer::{MixerConfig, MixerModel};
use serde::{Deserialize, Serialize};

use crate::formats::{read_json, write_json};

pub const FORMAT: &str = "edsmf-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockValues {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub model_kind: ModelKind,
    pub config: MixerConfig,
    pub blocks: Vec<BlockValues>,
    pub seed: u64,
    pub step: u64,
    pub best_epoch: usize,
    pub valid_loss: f64,
    pub config_hash: String,
}

impl Checkpoint {
    pub fn from_model(kind: ModelKind, model: &MixerModel, best_epoch: usize, valid_loss: f64, config_hash: &str) -> Self {
        let blocks = model
            .blocks()
            .iter()
            .map(|b| BlockValues { name: b.name.clone(), rows: b.rows, cols: b.cols, values: model.params()[b.range()].to_vec() })
            .collect();
        Checkpoint {
            format: FORMAT.into(),
            version: VERSION,
            model_kind: kind,
            config: model.config().clone(),
            blocks,
            seed: model.seed,
            step: model.step,
            best_epoch,
            valid_loss,
            config_hash: config_hash.into(),
        }
    }

    pub fn to_model(&self) -> Result<MixerModel> {
        ensure!(self.format == FORMAT, "not a checkpoint (format `{}`)", self.format);
        ensure!(self.version == VERSION, "unsupported checkpoint version {}", self.version);
        let layout = MixerModel::init(self.config.clone(), 0)?;
        if layout.blocks().len() != self.blocks.len() {
            bail!("checkpoint has {} blocks, config needs {}", self.blocks.len(), layout.blocks().len());
        }
        let mut params = Vec::with_capacity(layout.params().len());
        for (want, got) in layout.blocks().iter().zip(&self.blocks) {
            ensure!(
                want.name == got.name && want.rows == got.rows && want.cols == got.cols && got.values.len() == want.len(),
                "block `{}` ({}x{}, {} values) does not match expected `{}` ({}x{})",
                got.name,
                got.rows,
                got.cols,
                got.values.len(),
                want.name,
                want.rows,
                want.cols
            );
            params.extend_from_slice(&got.values);
        }
        Ok(MixerModel::from_params(self.config.clone(), params, self.seed, self.step)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        read_json(path).with_context(|| format!("loading checkpoint {}", path.display()))
    }
}
