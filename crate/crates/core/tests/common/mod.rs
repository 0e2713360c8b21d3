#![allow(dead_code)]

use std::collections::VecDeque;

use aspect_rgat::{DepParse, Span};
use rand::seq::SliceRandom;
use rand::Rng;

pub const LABELS: [&str; 10] = ["nsubj", "amod", "det", "dobj", "advmod", "conj", "cc", "prep", "pobj", "punct"];

/// Uniformly shuffled attachment order: every token after the first picks
/// a random earlier token as its head.
pub fn random_parse<R: Rng>(rng: &mut R, n: usize) -> DepParse {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut heads = vec![0; n];
    let mut rels = vec!["root".to_string(); n];
    for k in 1..n {
        let head = order[rng.random_range(0..k)];
        heads[order[k]] = head + 1;
        rels[order[k]] = LABELS[rng.random_range(0..LABELS.len())].to_string();
    }
    let tokens = (0..n).map(|i| format!("w{i}")).collect();
    DepParse::new(tokens, heads, rels)
}

pub fn random_span<R: Rng>(rng: &mut R, n: usize) -> Span {
    let first = rng.random_range(0..n);
    let len = rng.random_range(1..=3.min(n - first));
    Span::new(first, first + len - 1)
}

fn adjacency(parse: &DepParse) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); parse.heads.len()];
    for (d, &h) in parse.heads.iter().enumerate() {
        if h > 0 {
            adj[d].push(h - 1);
            adj[h - 1].push(d);
        }
    }
    adj
}

/// Breadth-first distances over the head links.
pub fn bfs(parse: &DepParse, source: usize) -> Vec<usize> {
    let adj = adjacency(parse);
    let mut dist = vec![usize::MAX; adj.len()];
    dist[source] = 0;
    let mut queue = VecDeque::from([source]);
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if dist[v] == usize::MAX {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    dist
}

/// All-pairs shortest paths by Floyd–Warshall.
pub fn floyd_warshall(parse: &DepParse) -> Vec<Vec<usize>> {
    let n = parse.heads.len();
    let inf = usize::MAX / 4;
    let mut d = vec![vec![inf; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0;
    }
    for (dep, &h) in parse.heads.iter().enumerate() {
        if h > 0 {
            d[dep][h - 1] = 1;
            d[h - 1][dep] = 1;
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    d
}

/// Tokens on the path from `i` to `k`, endpoints included, found by
/// climbing head links to the lowest common ancestor.
pub fn path_tokens(parse: &DepParse, i: usize, k: usize) -> Vec<usize> {
    let up = |mut t: usize| {
        let mut chain = vec![t];
        while parse.heads[t] > 0 {
            t = parse.heads[t] - 1;
            chain.push(t);
        }
        chain
    };
    let (a, b) = (up(i), up(k));
    let lca = *a.iter().find(|t| b.contains(t)).expect("connected tree");
    let mut path: Vec<usize> = a.iter().take_while(|&&t| t != lca).copied().collect();
    path.push(lca);
    path.extend(b.iter().take_while(|&&t| t != lca));
    path
}

/// Star-tree children as `(token, label, direction)`: the first aspect
/// word directly linked to a token supplies its label; otherwise the
/// minimum BFS distance gives `n:con`, or `∞:con` past `n_max`.
pub fn brute_force_reshape(parse: &DepParse, aspect: Span, n_max: usize) -> Vec<(usize, String, &'static str)> {
    let dists: Vec<Vec<usize>> = (aspect.first..=aspect.last).map(|a| bfs(parse, a)).collect();
    let mut out = Vec::new();
    for j in 0..parse.heads.len() {
        if (aspect.first..=aspect.last).contains(&j) {
            continue;
        }
        let mut direct = None;
        for a in aspect.first..=aspect.last {
            if parse.heads[a] == j + 1 {
                direct = Some((parse.rels[a].clone(), "to_root"));
                break;
            }
            if parse.heads[j] == a + 1 {
                direct = Some((parse.rels[j].clone(), "from_root"));
                break;
            }
        }
        match direct {
            Some((label, dir)) => out.push((j, label, dir)),
            None => {
                let d = dists.iter().map(|ds| ds[j]).min().unwrap();
                let label = if d > n_max { "∞:con".to_string() } else { format!("{d}:con") };
                out.push((j, label, "virtual"));
            }
        }
    }
    out
}
