//! Aspect-oriented dependency trees.
//!
//! An [`AspectTree`] is a depth-one star rooted at the aspect. Tokens that
//! share a dependency edge with any aspect word keep that edge's label; all
//! other tokens hang off the root with a virtual `n:con` label, where `n` is
//! their tree distance to the aspect (or `∞:con` past the cutoff).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::deptree::{DepParse, TreeView, TreeViolation};
use crate::Span;

pub const DEFAULT_N_MAX: usize = 4;
pub const SELF_LABEL: &str = "self";
pub const FAR_LABEL: &str = "∞:con";
pub const REVERSED_SUFFIX: &str = ":rev";

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", from = "String")]
pub enum RelationLabel {
    /// A label copied from the ordinary parse.
    Dependency(String),
    /// `n:con`, a token `n` edges away from the aspect.
    Connected(usize),
    /// `∞:con`, beyond the cutoff.
    Distant,
    /// Self-loop edge added by the model.
    SelfLoop,
}

impl RelationLabel {
    pub fn is_virtual(&self) -> bool {
        matches!(self, RelationLabel::Connected(_) | RelationLabel::Distant)
    }
}

impl fmt::Display for RelationLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RelationLabel::Dependency(l) => f.write_str(l),
            RelationLabel::Connected(n) => write!(f, "{n}:con"),
            RelationLabel::Distant => f.write_str(FAR_LABEL),
            RelationLabel::SelfLoop => f.write_str(SELF_LABEL),
        }
    }
}

impl FromStr for RelationLabel {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == FAR_LABEL {
            return Ok(RelationLabel::Distant);
        }
        if s == SELF_LABEL {
            return Ok(RelationLabel::SelfLoop);
        }
        if let Some(n) = s.strip_suffix(":con").and_then(|n| n.parse().ok()) {
            return Ok(RelationLabel::Connected(n));
        }
        Ok(RelationLabel::Dependency(s.to_string()))
    }
}

impl From<RelationLabel> for String {
    fn from(label: RelationLabel) -> Self {
        label.to_string()
    }
}

impl From<String> for RelationLabel {
    fn from(s: String) -> Self {
        match s.parse() {
            Ok(label) => label,
            Err(never) => match never {},
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// The child heads an aspect word in the original parse.
    ToRoot,
    /// An aspect word heads the child.
    FromRoot,
    Virtual,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::ToRoot => "to_root",
            Direction::FromRoot => "from_root",
            Direction::Virtual => "virtual",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Child {
    pub token: usize,
    pub relation: RelationLabel,
    pub direction: Direction,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AspectTree {
    pub root: Span,
    /// Ordered by token index.
    pub children: Vec<Child>,
    pub n_max: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReshapeOptions {
    pub n_max: usize,
    /// Suffix labels of children that head an aspect word with `:rev`.
    pub mark_reversed: bool,
}

impl Default for ReshapeOptions {
    fn default() -> Self {
        Self {
            n_max: DEFAULT_N_MAX,
            mark_reversed: false,
        }
    }
}

#[derive(Debug, Error)]
pub enum ReshapeError {
    #[error("invalid dependency tree: {0}")]
    Tree(#[from] TreeViolation),
    #[error("aspect span {span} outside a {len}-token sentence")]
    SpanOutOfRange { span: Span, len: usize },
}

/// Builds the aspect-rooted star for `aspect` over `parse`.
///
/// Direct relations take precedence over distances, and among direct
/// relations the lowest-indexed aspect word wins.
pub fn reshape(
    parse: &DepParse,
    aspect: Span,
    options: ReshapeOptions,
) -> Result<AspectTree, ReshapeError> {
    let view = TreeView::new(parse)?;
    let n = parse.len();
    if aspect.last >= n || aspect.first > aspect.last {
        return Err(ReshapeError::SpanOutOfRange { span: aspect, len: n });
    }

    let mut nearest = vec![usize::MAX; n];
    for a in aspect.iter() {
        let dist = view.distances_from(a).expect("aspect index checked above");
        for (best, d) in nearest.iter_mut().zip(dist) {
            *best = (*best).min(d);
        }
    }

    let mut children = Vec::with_capacity(n - aspect.len());
    for j in (0..n).filter(|&j| !aspect.contains(j)) {
        let direct = aspect.iter().find_map(|a| {
            if parse.head_of(a) == Some(j) {
                Some((parse.rels[a].clone(), Direction::ToRoot))
            } else if parse.head_of(j) == Some(a) {
                Some((parse.rels[j].clone(), Direction::FromRoot))
            } else {
                None
            }
        });
        let child = match direct {
            Some((label, direction)) => {
                let label = if options.mark_reversed && direction == Direction::ToRoot {
                    format!("{label}{REVERSED_SUFFIX}")
                } else {
                    label
                };
                Child {
                    token: j,
                    relation: RelationLabel::Dependency(label),
                    direction,
                }
            }
            None => {
                let d = nearest[j];
                let relation = if d > options.n_max {
                    RelationLabel::Distant
                } else {
                    RelationLabel::Connected(d)
                };
                Child {
                    token: j,
                    relation,
                    direction: Direction::Virtual,
                }
            }
        };
        children.push(child);
    }

    Ok(AspectTree {
        root: aspect,
        children,
        n_max: options.n_max,
    })
}

/// Labeled undirected graph with one node per token and one edge per head
/// link. Edges are `(head, dependent, label)` with 0-based indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrdinaryGraph {
    pub nodes: usize,
    pub edges: Vec<(usize, usize, String)>,
}

impl OrdinaryGraph {
    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.nodes];
        for (h, d, _) in &self.edges {
            deg[*h] += 1;
            deg[*d] += 1;
        }
        deg
    }
}

pub fn to_ordinary_graph(parse: &DepParse) -> Result<OrdinaryGraph, TreeViolation> {
    crate::deptree::validate_tree(parse)?;
    let edges = (0..parse.len())
        .filter_map(|d| parse.head_of(d).map(|h| (h, d, parse.rels[d].clone())))
        .collect();
    Ok(OrdinaryGraph {
        nodes: parse.len(),
        edges,
    })
}

/// Dense label → index map over relation labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct RelationVocab {
    labels: Vec<String>,
    index: BTreeMap<String, usize>,
}

impl From<Vec<String>> for RelationVocab {
    fn from(labels: Vec<String>) -> Self {
        Self::from_labels(labels)
    }
}

impl From<RelationVocab> for Vec<String> {
    fn from(vocab: RelationVocab) -> Self {
        vocab.labels
    }
}

impl RelationVocab {
    /// Sorted dependency labels followed by `1:con..n_max:con`, `∞:con`
    /// and `self`.
    pub fn build<I, S>(dependency_labels: I, n_max: usize) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let deps: BTreeSet<String> = dependency_labels
            .into_iter()
            .map(Into::into)
            .filter(|l| matches!(l.parse(), Ok(RelationLabel::Dependency(_))))
            .collect();
        let mut labels: Vec<String> = deps.into_iter().collect();
        labels.extend((1..=n_max).map(|n| RelationLabel::Connected(n).to_string()));
        labels.push(FAR_LABEL.to_string());
        labels.push(SELF_LABEL.to_string());
        Self::from_labels(labels)
    }

    /// Restores a vocabulary from its stored label order.
    pub fn from_labels(labels: Vec<String>) -> Self {
        let index = labels.iter().enumerate().map(|(i, l)| (l.clone(), i)).collect();
        Self { labels, index }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn get(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn index_of(&self, label: &RelationLabel) -> Option<usize> {
        self.get(&label.to_string())
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }
}

/// Vocabulary over every label used by `trees`.
pub fn relation_vocab(trees: &[AspectTree]) -> RelationVocab {
    let n_max = trees.iter().map(|t| t.n_max).max().unwrap_or(DEFAULT_N_MAX);
    let labels = trees.iter().flat_map(|t| {
        t.children.iter().filter_map(|c| match &c.relation {
            RelationLabel::Dependency(l) => Some(l.clone()),
            _ => None,
        })
    });
    RelationVocab::build(labels, n_max)
}

impl AspectTree {
    /// Graphviz rendering with the aspect as the root node.
    pub fn to_dot(&self, tokens: &[String]) -> String {
        let aspect: Vec<&str> = self.root.iter().map(|i| tokens[i].as_str()).collect();
        let mut out = String::from("digraph aspect_tree {\n");
        out.push_str(&format!("  root [label=\"{}\", shape=box];\n", escape(&aspect.join(" "))));
        for c in &self.children {
            out.push_str(&format!("  t{} [label=\"{}\"];\n", c.token + 1, escape(&tokens[c.token])));
            out.push_str(&format!(
                "  root -> t{} [label=\"{}\"];\n",
                c.token + 1,
                escape(&c.relation.to_string())
            ));
        }
        out.push_str("}\n");
        out
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}
