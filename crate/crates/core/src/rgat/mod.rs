//! Relational graph attention network over aspect-oriented trees.
//!
//! Each layer concatenates `K` attentional heads (scaled dot-product
//! attention over graph neighbours) with `M` relational heads (softmax over
//! per-edge sigmoid gates computed from relation embeddings), then applies
//! an affine map and ReLU. The aspect root's final state feeds a
//! three-way softmax classifier.

mod graph;
mod model;

pub use graph::{aspect_trees, relation_vocab_for, GraphBatch, NodeKind};
pub use model::{
    attentional_head, forward, instance_loss, instance_seed, loss, predict, relational_head, rgat_layer,
    AttHeadParams, Forward, ForwardOptions, HeadKind, HeadOutput, HeadWeights, LayerContext, LayerOutput,
    LayerParams, Model, RelHeadParams, RgatParams,
};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nn::NnError;
use crate::reshape::ReshapeError;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Reshape(#[from] ReshapeError),
    #[error("relation {0:?} is not in the relation vocabulary")]
    UnknownRelation(String),
    #[error("instance {0} has an empty aspect")]
    EmptyAspect(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("invalid hyperparameters: {0}")]
    Hyper(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

/// Graph construction and head configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Aspect-oriented tree, attentional and relational heads.
    Rgat,
    /// Aspect-oriented tree, attentional heads only.
    GatOnly,
    /// Aspect-oriented tree without `n:con` edges.
    RgatNoNcon,
    /// Ordinary dependency tree, attentional and relational heads.
    #[serde(alias = "ordinary_rgat")]
    OrdinaryGraph,
    /// Ordinary dependency tree, attentional heads only.
    OrdinaryGat,
}

impl Mode {
    pub const ALL: [Mode; 5] = [Mode::Rgat, Mode::GatOnly, Mode::RgatNoNcon, Mode::OrdinaryGraph, Mode::OrdinaryGat];

    pub fn relational(self) -> bool {
        !matches!(self, Mode::GatOnly | Mode::OrdinaryGat)
    }

    pub fn ordinary(self) -> bool {
        matches!(self, Mode::OrdinaryGraph | Mode::OrdinaryGat)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Rgat => "rgat",
            Mode::GatOnly => "gat_only",
            Mode::RgatNoNcon => "rgat_no_ncon",
            Mode::OrdinaryGraph => "ordinary_graph",
            Mode::OrdinaryGat => "ordinary_gat",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rgat" => Ok(Mode::Rgat),
            "gat_only" | "gat" => Ok(Mode::GatOnly),
            "rgat_no_ncon" => Ok(Mode::RgatNoNcon),
            "ordinary_graph" | "ordinary_rgat" => Ok(Mode::OrdinaryGraph),
            "ordinary_gat" => Ok(Mode::OrdinaryGat),
            other => Err(format!(
                "unknown mode {other:?} (expected rgat, gat_only, rgat_no_ncon, ordinary_graph or ordinary_gat)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyper {
    pub layers: usize,
    pub att_heads: usize,
    pub rel_heads: usize,
    /// Width of every head's output.
    pub head_dim: usize,
    /// Node state width after each layer.
    pub hidden_dim: usize,
    /// Per-direction BiLSTM width; node states start at `2 * lstm_hidden`.
    pub lstm_hidden: usize,
    pub rel_dim: usize,
    /// Hidden width of the relation gate MLP.
    pub gate_dim: usize,
    pub dropout: f64,
    pub n_max: usize,
    pub mode: Mode,
    /// Mark relations where the child heads the aspect with `:rev`.
    pub mark_reversed: bool,
}

impl Default for Hyper {
    fn default() -> Self {
        Self {
            layers: 2,
            att_heads: 6,
            rel_heads: 6,
            head_dim: 50,
            hidden_dim: 300,
            lstm_hidden: 150,
            rel_dim: 300,
            gate_dim: 100,
            dropout: 0.7,
            n_max: crate::reshape::DEFAULT_N_MAX,
            mode: Mode::Rgat,
            mark_reversed: false,
        }
    }
}

impl Hyper {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::Hyper(m.to_string()));
        if self.layers == 0 {
            return bad("layers must be at least 1");
        }
        if self.att_heads == 0 || self.rel_heads == 0 {
            return bad("att_heads and rel_heads must be at least 1");
        }
        if [self.head_dim, self.hidden_dim, self.lstm_hidden, self.rel_dim, self.gate_dim].contains(&0) {
            return bad("dimensions must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        if self.n_max == 0 {
            return bad("n_max must be at least 1");
        }
        Ok(())
    }

    pub(crate) fn reshape_options(&self) -> crate::reshape::ReshapeOptions {
        crate::reshape::ReshapeOptions {
            n_max: self.n_max,
            mark_reversed: self.mark_reversed,
        }
    }

    /// Width of the concatenated head outputs for one layer.
    pub fn concat_dim(&self) -> usize {
        let rel = if self.mode.relational() { self.rel_heads } else { 0 };
        (self.att_heads + rel) * self.head_dim
    }
}

/// "great food but the service was dreadful", aspect "food".
#[cfg(test)]
pub(crate) fn sample_instance() -> crate::Instance {
    let tokens: Vec<String> = "great food but the service was dreadful"
        .split(' ')
        .map(String::from)
        .collect();
    let parse = crate::DepParse::new(
        tokens.clone(),
        vec![2, 7, 7, 5, 7, 7, 0],
        ["amod", "nsubj", "cc", "det", "nsubj", "cop", "root"].map(String::from).to_vec(),
    );
    crate::Instance {
        id: "s1#0".into(),
        sentence_id: "s1".into(),
        tokens,
        aspect: crate::Span::single(1),
        polarity: crate::Polarity::Positive,
        parse,
    }
}
