//! Experiment harness: training, evaluation, the ablation matrix, the
//! multi-aspect distance analysis and error export.

mod ablate;
mod distance;
mod errors;
mod metrics;
pub mod synthetic;
mod train;

pub use ablate::{ablate, config_hash, AblationCell, AblationTable, SeedResult, TreeKind, Variant};
pub use distance::{
    bucket_accuracy, multi_aspect_analysis, nearest_aspect_distances, quintile_edges, AspectDistance, BucketRow,
    DistanceReport,
};
pub use errors::{export_errors, write_errors, ErrorSample};
pub use metrics::{evaluate, predict_all, ClassMetrics, EvalReport, Misclassified};
pub use train::{train, EpochRecord, TrainOutcome, BEST_CHECKPOINT, LAST_GOOD_CHECKPOINT, TRAIN_LOG};

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{self, build_vocab, load_embeddings, CorpusError, EmbeddingMatrix, Instance, Vocab};
use crate::nn::{AdamConfig, NnError};
use crate::rgat::{relation_vocab_for, Hyper, ModelError};
use crate::RelationVocab;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("configuration: {0}")]
    Config(String),
    #[error("training diverged at epoch {epoch}, step {step}: {reason}; last good parameters in {}", last_good.as_ref().map_or("<not saved>".into(), |p| p.display().to_string()))]
    Diverged {
        epoch: usize,
        step: usize,
        reason: String,
        last_good: Option<PathBuf>,
    },
}

impl From<NnError> for HarnessError {
    fn from(e: NnError) -> Self {
        HarnessError::Model(e.into())
    }
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Everything a training run depends on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// JSONL instances.
    pub train: PathBuf,
    pub test: PathBuf,
    /// GloVe-format text vectors; random vectors of `word_dim` when absent.
    pub embeddings: Option<PathBuf>,
    pub word_dim: usize,
    pub min_freq: usize,
    pub hyper: Hyper,
    pub adam: AdamConfig,
    pub seed: u64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Epochs without a test-accuracy improvement before stopping; 0 never stops.
    pub patience: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            train: PathBuf::new(),
            test: PathBuf::new(),
            embeddings: None,
            word_dim: 300,
            min_freq: 1,
            hyper: Hyper::default(),
            adam: AdamConfig::default(),
            seed: 1,
            epochs: 30,
            batch_size: 16,
            patience: 5,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        self.hyper.validate()?;
        if self.batch_size == 0 {
            return Err(HarnessError::Config("batch_size must be at least 1".into()));
        }
        if self.adam.lr.is_nan() || self.adam.lr <= 0.0 {
            return Err(HarnessError::Config("learning rate must be positive".into()));
        }
        Ok(())
    }
}

/// Loaded instances with the vocabularies a fresh model needs.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub train: Vec<Instance>,
    pub test: Vec<Instance>,
    pub vocab: Vocab,
    pub embeddings: EmbeddingMatrix,
}

impl Dataset {
    /// Reads the JSONL splits and word vectors named in `cfg`.
    pub fn load(cfg: &RunConfig) -> Result<Self, HarnessError> {
        let train = corpus::read_instances(&cfg.train)?;
        let test = corpus::read_instances(&cfg.test)?;
        let vocab = build_vocab(train.iter().chain(&test), cfg.min_freq);
        let embeddings = match &cfg.embeddings {
            Some(path) => {
                let (m, stats) = load_embeddings(path, &vocab, cfg.seed)?;
                log::info!("embeddings: {} found, {} random", stats.found, stats.missing);
                m
            }
            None => {
                log::warn!("no embeddings file; using random {}-d vectors", cfg.word_dim);
                EmbeddingMatrix::random(&vocab, cfg.word_dim, cfg.seed)
            }
        };
        Ok(Self {
            train,
            test,
            vocab,
            embeddings,
        })
    }

    /// Vocabulary and random vectors built from the instances themselves.
    pub fn from_instances(train: Vec<Instance>, test: Vec<Instance>, word_dim: usize, seed: u64) -> Self {
        let vocab = build_vocab(train.iter().chain(&test), 1);
        let embeddings = EmbeddingMatrix::random(&vocab, word_dim, seed);
        Self {
            train,
            test,
            vocab,
            embeddings,
        }
    }

    pub fn relations(&self, hyper: &Hyper) -> RelationVocab {
        let all: Vec<Instance> = self.train.iter().chain(&self.test).cloned().collect();
        relation_vocab_for(&all, hyper)
    }
}

/// Index of the largest probability; ties go to the lower class.
pub fn argmax(p: &[f64; 3]) -> usize {
    let mut best = 0;
    for i in 1..3 {
        if p[i] > p[best] {
            best = i;
        }
    }
    best
}
