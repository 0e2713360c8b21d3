//! Aspect-level sentiment classification over aspect-oriented dependency
//! trees with a relational graph attention network.
//!
//! The pipeline runs in four stages:
//!
//! 1. [`corpus`] reads review datasets, CoNLL-U parses and word vectors and
//!    aligns them into [`corpus::Instance`]s.
//! 2. [`reshape`] turns each ordinary parse into a star rooted at the
//!    aspect, keeping direct dependency labels and marking every other
//!    token with its distance (`n:con`).
//! 3. [`rgat`] encodes the star with attentional and relational heads on
//!    top of BiLSTM states, using the reverse-mode tape in [`nn`].
//! 4. [`harness`] trains, evaluates, runs ablations and analyses.

pub mod corpus;
pub mod deptree;
pub mod harness;
pub mod nn;
pub mod reshape;
pub mod rgat;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use corpus::{Instance, Polarity, RawSentence, Vocab, EmbeddingMatrix};
pub use deptree::{DepParse, TreeView};
pub use harness::{EvalReport, RunConfig};
pub use reshape::{AspectTree, RelationLabel, RelationVocab};
pub use rgat::{Hyper, Mode, Model};

/// Inclusive range of 0-based token indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Span {
    pub first: usize,
    pub last: usize,
}

impl Span {
    pub fn new(first: usize, last: usize) -> Self {
        Self { first, last }
    }

    pub fn single(i: usize) -> Self {
        Self { first: i, last: i }
    }

    pub fn len(&self) -> usize {
        self.last + 1 - self.first
    }

    pub fn is_empty(&self) -> bool {
        self.last < self.first
    }

    pub fn contains(&self, i: usize) -> bool {
        (self.first..=self.last).contains(&i)
    }

    pub fn iter(&self) -> std::ops::RangeInclusive<usize> {
        self.first..=self.last
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.first, self.last)
    }
}
