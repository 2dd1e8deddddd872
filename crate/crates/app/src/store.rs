//! On-disk layout of a run: resolved configs, per-fold checkpoints and
//! reports under one output directory.
//!
//! ```text
//! <out>/models/<variant>-<strategy>/config.json
//! <out>/models/<variant>-<strategy>/fold<k>/{cold,multi}.ckpt
//! <out>/models/<variant>-<strategy>/full/{cold,multi}.ckpt
//! <out>/reports/<variant>-<strategy>.{tsv,json,records.jsonl}
//! ```
//!
//! Feature contexts are not stored; they are rebuilt from the data and the
//! recorded seed, which gives the same vocabulary, topics and embeddings.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context};
use bundlerec::corpus::{load_repository, make_folds, FoldSplit, Repository};
use bundlerec::neural::{read_checkpoint, write_checkpoint};
use bundlerec::recmodel::{FeatureContext, PipelineConfig, Recommender, Strategy, TrainConfig, TrainedModel, Variant};
use bundlerec::seed;
use serde::{Deserialize, Serialize};

/// Everything that determines a trained model set besides the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub folds: usize,
    pub pipeline: PipelineConfig,
    pub train: TrainConfig,
}

/// Which split a model set was trained on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    Fold(usize),
    /// Every mashup, nothing held out; used for serving.
    Full,
}

impl Slot {
    pub fn dir_name(self) -> String {
        match self {
            Slot::Fold(k) => format!("fold{k}"),
            Slot::Full => "full".to_string(),
        }
    }
}

pub fn load_repo(data_dir: &Path) -> anyhow::Result<Arc<Repository>> {
    if !data_dir.is_dir() {
        bail!("data directory {} does not exist; run gen-data or point --data-dir at a corpus", data_dir.display());
    }
    let (repo, dropped) = load_repository(data_dir).with_context(|| format!("loading data from {}", data_dir.display()))?;
    if dropped.total() > 0 {
        log::warn!("dropped {} records while loading {}", dropped.total(), data_dir.display());
    }
    Ok(Arc::new(repo))
}

pub fn split(repo: &Repository, cfg: &RunConfig, slot: Slot) -> anyhow::Result<FoldSplit> {
    Ok(match slot {
        Slot::Full => FoldSplit::full(repo),
        Slot::Fold(k) => {
            let mut folds = make_folds(repo, cfg.folds, cfg.seed)?;
            if k >= folds.len() {
                bail!("fold {k} out of range for {} folds", cfg.folds);
            }
            folds.swap_remove(k)
        }
    })
}

fn slot_seed(root: u64, label: &str, slot: Slot) -> u64 {
    let s = seed::derive(root, label);
    match slot {
        Slot::Fold(k) => seed::derive_n(s, k as u64),
        Slot::Full => seed::derive(s, "full"),
    }
}

pub fn build_context(repo: Arc<Repository>, cfg: &RunConfig, slot: Slot) -> anyhow::Result<FeatureContext> {
    let fold = split(&repo, cfg, slot)?;
    log::info!("building features for {}", slot.dir_name());
    Ok(FeatureContext::build(repo, &fold, &cfg.pipeline, slot_seed(cfg.seed, "features", slot))?)
}

pub fn train_seed(cfg: &RunConfig, slot: Slot) -> u64 {
    slot_seed(cfg.seed, "train", slot)
}

pub fn eval_seed(cfg: &RunConfig) -> u64 {
    seed::derive(cfg.seed, "eval")
}

pub fn model_dir(out: &Path, variant: Variant, strategy: Strategy) -> PathBuf {
    out.join("models").join(format!("{variant}-{strategy}"))
}

pub fn reports_dir(out: &Path) -> PathBuf {
    out.join("reports")
}

pub fn write_config(dir: &Path, cfg: &RunConfig) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join("config.json");
    fs::write(&path, serde_json::to_string_pretty(cfg)? + "\n").with_context(|| format!("writing {}", path.display()))
}

pub fn read_config(dir: &Path) -> anyhow::Result<RunConfig> {
    let path = dir.join("config.json");
    let text = fs::read_to_string(&path).with_context(|| format!("no trained models at {}", dir.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn save_recommender(dir: &Path, slot: Slot, rec: &Recommender) -> anyhow::Result<()> {
    let dir = dir.join(slot.dir_name());
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let cold = dir.join("cold.ckpt");
    match &rec.cold {
        Some(m) => write_checkpoint(&cold, &m.to_checkpoint()?)?,
        None if cold.exists() => fs::remove_file(&cold).with_context(|| format!("removing {}", cold.display()))?,
        None => {}
    }
    write_checkpoint(&dir.join("multi.ckpt"), &rec.multi.to_checkpoint()?)?;
    Ok(())
}

pub fn load_recommender(dir: &Path, slot: Slot) -> anyhow::Result<Recommender> {
    let dir = dir.join(slot.dir_name());
    let load = |name: &str| -> anyhow::Result<TrainedModel> {
        let path = dir.join(name);
        let ckpt = read_checkpoint(&path).with_context(|| format!("missing checkpoint {}", path.display()))?;
        Ok(TrainedModel::from_checkpoint(&ckpt)?)
    };
    let cold = if dir.join("cold.ckpt").exists() { Some(load("cold.ckpt")?) } else { None };
    Ok(Recommender { cold, multi: load("multi.ckpt")? })
}

/// Combined hash of a model set's checkpoints.
pub fn recommender_hash(rec: &Recommender) -> anyhow::Result<String> {
    let multi = rec.multi.to_checkpoint()?.hash()?;
    Ok(match &rec.cold {
        Some(c) => format!("{}+{multi}", c.to_checkpoint()?.hash()?),
        None => multi,
    })
}
