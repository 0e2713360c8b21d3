use std::collections::{BTreeMap, BTreeSet};

use crate::corpus::{Instance, Vocab};
use crate::reshape::{self, AspectTree, RelationVocab};
use crate::Span;

use super::{Hyper, Mode, ModelError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    /// The collapsed aspect span.
    Root,
    Token(usize),
}

/// Model input for one instance: node list, neighbour lists with self-loops
/// and per-edge relation indices.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphBatch {
    pub id: String,
    pub word_ids: Vec<usize>,
    pub aspect: Span,
    pub nodes: Vec<NodeKind>,
    /// `(neighbour node, relation index)` per node, self-loop included.
    pub neighbors: Vec<Vec<(usize, usize)>>,
    pub root: usize,
    pub label: usize,
}

impl GraphBatch {
    /// Builds the graph `hyper.mode` asks for.
    pub fn build(
        inst: &Instance,
        vocab: &Vocab,
        relations: &RelationVocab,
        hyper: &Hyper,
    ) -> Result<Self, ModelError> {
        if inst.aspect.is_empty() || inst.aspect.last >= inst.tokens.len() {
            return Err(ModelError::EmptyAspect(inst.id.clone()));
        }
        let tree = reshape::reshape(&inst.parse, inst.aspect, hyper.reshape_options())?;
        let self_rel = relations
            .get(reshape::SELF_LABEL)
            .ok_or_else(|| ModelError::UnknownRelation(reshape::SELF_LABEL.into()))?;
        let rel = |label: &str| relations.get(label).ok_or_else(|| ModelError::UnknownRelation(label.into()));

        let mut nodes = vec![NodeKind::Root];
        let mut node_of = BTreeMap::new();
        for c in &tree.children {
            node_of.insert(c.token, nodes.len());
            nodes.push(NodeKind::Token(c.token));
        }
        let mut neighbors: Vec<Vec<(usize, usize)>> = (0..nodes.len()).map(|i| vec![(i, self_rel)]).collect();
        let mut link = |a: usize, b: usize, r: usize| {
            neighbors[a].push((b, r));
            neighbors[b].push((a, r));
        };

        match hyper.mode {
            Mode::Rgat | Mode::GatOnly | Mode::RgatNoNcon => {
                for c in &tree.children {
                    if hyper.mode == Mode::RgatNoNcon && c.relation.is_virtual() {
                        continue;
                    }
                    link(0, node_of[&c.token], rel(&c.relation.to_string())?);
                }
            }
            Mode::OrdinaryGraph | Mode::OrdinaryGat => {
                for c in tree.children.iter().filter(|c| !c.relation.is_virtual()) {
                    link(0, node_of[&c.token], rel(&c.relation.to_string())?);
                }
                for d in 0..inst.parse.len() {
                    let Some(h) = inst.parse.head_of(d) else { continue };
                    if let (Some(&a), Some(&b)) = (node_of.get(&h), node_of.get(&d)) {
                        link(a, b, rel(&inst.parse.rels[d])?);
                    }
                }
            }
        }

        Ok(Self {
            id: inst.id.clone(),
            word_ids: inst.tokens.iter().map(|t| vocab.lookup(t)).collect(),
            aspect: inst.aspect,
            nodes,
            neighbors,
            root: 0,
            label: inst.polarity.index(),
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Row-major `n × n` adjacency mask.
    pub fn mask(&self) -> Vec<bool> {
        let n = self.len();
        let mut mask = vec![false; n * n];
        for (i, ns) in self.neighbors.iter().enumerate() {
            for &(j, _) in ns {
                mask[i * n + j] = true;
            }
        }
        mask
    }

    /// Sorted distinct relation indices and, per `(i, j)` cell, the
    /// position of that edge's relation in the list.
    pub fn relation_slots(&self) -> (Vec<usize>, Vec<Option<usize>>) {
        let used: Vec<usize> = self
            .neighbors
            .iter()
            .flatten()
            .map(|&(_, r)| r)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let n = self.len();
        let mut slots = vec![None; n * n];
        for (i, ns) in self.neighbors.iter().enumerate() {
            for &(j, r) in ns {
                slots[i * n + j] = Some(used.binary_search(&r).expect("collected above"));
            }
        }
        (used, slots)
    }

    /// Reorders the non-root nodes; `order[k]` is the old index of new node
    /// `k`. The root keeps its index.
    pub fn permute(&self, order: &[usize]) -> Self {
        assert_eq!(order.len(), self.len(), "permutation length");
        let mut new_of = vec![0; order.len()];
        for (new, &old) in order.iter().enumerate() {
            new_of[old] = new;
        }
        let nodes = order.iter().map(|&old| self.nodes[old]).collect();
        let neighbors = order
            .iter()
            .map(|&old| self.neighbors[old].iter().map(|&(j, r)| (new_of[j], r)).collect())
            .collect();
        Self {
            nodes,
            neighbors,
            root: new_of[self.root],
            ..self.clone()
        }
    }
}

/// Relation vocabulary covering every label `instances` can produce under
/// `hyper`, for both tree and ordinary wiring.
pub fn relation_vocab_for(instances: &[Instance], hyper: &Hyper) -> RelationVocab {
    let mut labels: BTreeSet<String> = instances.iter().flat_map(|i| i.parse.rels.iter().cloned()).collect();
    if hyper.mark_reversed {
        let reversed: Vec<String> = labels.iter().map(|l| format!("{l}{}", reshape::REVERSED_SUFFIX)).collect();
        labels.extend(reversed);
    }
    RelationVocab::build(labels, hyper.n_max)
}

/// Aspect trees for `instances`, reshaped with `hyper`'s options.
pub fn aspect_trees(instances: &[Instance], hyper: &Hyper) -> Result<Vec<AspectTree>, ModelError> {
    instances
        .iter()
        .map(|i| Ok(reshape::reshape(&i.parse, i.aspect, hyper.reshape_options())?))
        .collect()
}
