//! Dependency-tree validation and undirected node distances.
//!
//! Token indices in this module are 0-based. Head values follow CoNLL-U
//! conventions: `0` is the artificial root and `h > 0` points at token
//! `h - 1`.

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// One sentence's ordinary dependency tree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DepParse {
    pub tokens: Vec<String>,
    /// `0` marks the sentence root, otherwise a 1-based token index.
    pub heads: Vec<usize>,
    pub rels: Vec<String>,
}

impl DepParse {
    pub fn new(tokens: Vec<String>, heads: Vec<usize>, rels: Vec<String>) -> Self {
        Self { tokens, heads, rels }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// 0-based index of the head of `token`, or `None` for the root.
    pub fn head_of(&self, token: usize) -> Option<usize> {
        match self.heads[token] {
            0 => None,
            h => Some(h - 1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TreeViolation {
    #[error("column lengths differ: {tokens} tokens, {heads} heads, {rels} relations")]
    LengthMismatch {
        tokens: usize,
        heads: usize,
        rels: usize,
    },
    #[error("no token is attached to the artificial root")]
    NoRoot,
    #[error("two roots: tokens {0:?} all have head 0")]
    MultipleRoots(Vec<usize>),
    #[error("token {token} has head {head}, outside 0..={len}")]
    HeadOutOfRange { token: usize, head: usize, len: usize },
    #[error("cycle through tokens {0:?}")]
    Cycle(Vec<usize>),
}

/// Checks that `parse` is a single rooted tree.
///
/// Indices reported in violations are 1-based, matching the head column.
pub fn validate_tree(parse: &DepParse) -> Result<(), TreeViolation> {
    let n = parse.tokens.len();
    if parse.heads.len() != n || parse.rels.len() != n {
        return Err(TreeViolation::LengthMismatch {
            tokens: n,
            heads: parse.heads.len(),
            rels: parse.rels.len(),
        });
    }
    for (i, &h) in parse.heads.iter().enumerate() {
        if h > n {
            return Err(TreeViolation::HeadOutOfRange {
                token: i + 1,
                head: h,
                len: n,
            });
        }
    }
    // 0 = unvisited, 1 = on the current walk, 2 = known to reach the root.
    let mut state = vec![0u8; n];
    for start in 0..n {
        let mut walk = Vec::new();
        let mut cur = start;
        loop {
            match state[cur] {
                2 => break,
                1 => {
                    let pos = walk.iter().position(|&w| w == cur).unwrap_or(0);
                    let cycle = walk[pos..].iter().map(|&w| w + 1).collect();
                    return Err(TreeViolation::Cycle(cycle));
                }
                _ => {}
            }
            state[cur] = 1;
            walk.push(cur);
            match parse.heads[cur] {
                0 => break,
                h => cur = h - 1,
            }
        }
        for w in walk {
            state[w] = 2;
        }
    }

    let roots: Vec<usize> = (0..n).filter(|&i| parse.heads[i] == 0).map(|i| i + 1).collect();
    match roots.len() {
        0 => Err(TreeViolation::NoRoot),
        1 => Ok(()),
        _ => Err(TreeViolation::MultipleRoots(roots)),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("token index {index} out of range for a {len}-token tree")]
pub struct IndexOutOfRange {
    pub index: usize,
    pub len: usize,
}

/// Undirected adjacency view of a validated tree.
#[derive(Debug, Clone)]
pub struct TreeView {
    adjacency: Vec<Vec<usize>>,
}

impl TreeView {
    pub fn new(parse: &DepParse) -> Result<Self, TreeViolation> {
        validate_tree(parse)?;
        let n = parse.len();
        let mut adjacency = vec![Vec::new(); n];
        for dep in 0..n {
            if let Some(head) = parse.head_of(dep) {
                adjacency[dep].push(head);
                adjacency[head].push(dep);
            }
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        Ok(Self { adjacency })
    }

    pub fn len(&self) -> usize {
        self.adjacency.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adjacency.is_empty()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// BFS distances from `source` to every node.
    pub fn distances_from(&self, source: usize) -> Result<Vec<usize>, IndexOutOfRange> {
        let n = self.len();
        if source >= n {
            return Err(IndexOutOfRange { index: source, len: n });
        }
        let mut dist = vec![usize::MAX; n];
        dist[source] = 0;
        let mut queue = VecDeque::from([source]);
        while let Some(u) = queue.pop_front() {
            for &v in &self.adjacency[u] {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        Ok(dist)
    }

    /// Length of the unique path between `i` and `j`.
    pub fn distance(&self, i: usize, j: usize) -> Result<usize, IndexOutOfRange> {
        if j >= self.len() {
            return Err(IndexOutOfRange { index: j, len: self.len() });
        }
        Ok(self.distances_from(i)?[j])
    }
}

impl fmt::Display for DepParse {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, tok) in self.tokens.iter().enumerate() {
            writeln!(f, "{}\t{}\t{}\t{}", i + 1, tok, self.heads[i], self.rels[i])?;
        }
        Ok(())
    }
}
