use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use crate::corpus::{EmbeddingMatrix, Instance, Vocab, UNK};
use crate::rgat::{Model, ModelError};

use super::argmax;
use super::metrics::predict_all;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BucketRow {
    pub bucket: usize,
    /// Exclusive lower edge; `None` for the first bucket.
    pub lower: Option<f64>,
    /// Inclusive upper edge; `None` for the last bucket.
    pub upper: Option<f64>,
    pub count: usize,
    pub correct: usize,
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AspectDistance {
    pub id: String,
    pub distance: f64,
    pub bucket: usize,
    pub correct: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceReport {
    pub edges: Vec<f64>,
    pub rows: Vec<BucketRow>,
    pub aspects: Vec<AspectDistance>,
}

/// Four interior edges at the 20/40/60/80% nearest-rank positions.
pub fn quintile_edges(distances: &[f64]) -> Vec<f64> {
    if distances.is_empty() {
        return Vec::new();
    }
    let mut sorted = distances.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    (1..5).map(|q| sorted[(q * n).div_ceil(5) - 1]).collect()
}

/// Number of edges strictly below `d`.
fn bucket_of(edges: &[f64], d: f64) -> usize {
    edges.partition_point(|&e| e < d)
}

fn aspect_vector(inst: &Instance, vocab: &Vocab, emb: &EmbeddingMatrix) -> Vec<f64> {
    let ids: Vec<usize> = inst.aspect_tokens().iter().map(|t| vocab.lookup(t)).collect();
    if ids.iter().all(|&i| i == UNK) {
        log::warn!("aspect {:?} of {} is out of vocabulary; using the unknown-word row", inst.aspect_text(), inst.id);
    }
    let mut v = vec![0.0; emb.dim()];
    for &i in &ids {
        for (a, b) in v.iter_mut().zip(emb.row(i)) {
            *a += b;
        }
    }
    v.iter_mut().for_each(|a| *a /= ids.len() as f64);
    v
}

/// Nearest Euclidean distance from each aspect to another aspect of the
/// same sentence; `None` for single-aspect sentences.
pub fn nearest_aspect_distances(instances: &[Instance], vocab: &Vocab, emb: &EmbeddingMatrix) -> Vec<Option<f64>> {
    let mut by_sentence: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, inst) in instances.iter().enumerate() {
        by_sentence.entry(&inst.sentence_id).or_default().push(i);
    }
    let mut out = vec![None; instances.len()];
    for members in by_sentence.values().filter(|m| m.len() >= 2) {
        let vecs: Vec<Vec<f64>> = members.iter().map(|&i| aspect_vector(&instances[i], vocab, emb)).collect();
        for (a, &i) in members.iter().enumerate() {
            let nearest = (0..members.len())
                .filter(|&b| b != a)
                .map(|b| vecs[a].iter().zip(&vecs[b]).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt())
                .fold(f64::INFINITY, f64::min);
            out[i] = Some(nearest);
        }
    }
    out
}

/// Accuracy per distance bucket for the aspects of multi-aspect
/// sentences. `edges` are interior bucket edges; quintiles of the retained
/// distances when `None`.
pub fn bucket_accuracy(
    instances: &[Instance],
    distances: &[Option<f64>],
    correct: &[bool],
    edges: Option<&[f64]>,
) -> DistanceReport {
    let kept: Vec<(usize, f64)> = distances.iter().enumerate().filter_map(|(i, d)| d.map(|d| (i, d))).collect();
    let edges = match edges {
        Some(e) => e.to_vec(),
        None => quintile_edges(&kept.iter().map(|&(_, d)| d).collect::<Vec<_>>()),
    };
    let mut rows: Vec<BucketRow> = (0..=edges.len())
        .map(|b| BucketRow {
            bucket: b,
            lower: b.checked_sub(1).map(|p| edges[p]),
            upper: edges.get(b).copied(),
            count: 0,
            correct: 0,
            accuracy: None,
        })
        .collect();
    let mut aspects = Vec::with_capacity(kept.len());
    for &(i, d) in &kept {
        let b = bucket_of(&edges, d);
        rows[b].count += 1;
        rows[b].correct += usize::from(correct[i]);
        aspects.push(AspectDistance {
            id: instances[i].id.clone(),
            distance: d,
            bucket: b,
            correct: correct[i],
        });
    }
    for r in &mut rows {
        if r.count > 0 {
            r.accuracy = Some(r.correct as f64 / r.count as f64);
        }
    }
    DistanceReport { edges, rows, aspects }
}

/// Per-bucket accuracy of `model` on aspects of multi-aspect sentences,
/// bucketed by nearest averaged-embedding distance to a sibling aspect.
pub fn multi_aspect_analysis(
    model: &Model,
    instances: &[Instance],
    edges: Option<&[f64]>,
) -> Result<DistanceReport, ModelError> {
    let distances = nearest_aspect_distances(instances, &model.vocab, &model.embeddings);
    let kept: Vec<usize> = (0..instances.len()).filter(|&i| distances[i].is_some()).collect();
    let subset: Vec<Instance> = kept.iter().map(|&i| instances[i].clone()).collect();
    let probs = predict_all(model, &subset)?;
    let mut correct = vec![false; instances.len()];
    for (&i, p) in kept.iter().zip(&probs) {
        correct[i] = argmax(p) == instances[i].polarity.index();
    }
    Ok(bucket_accuracy(instances, &distances, &correct, edges))
}

impl DistanceReport {
    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v:.6}"));
        let mut out = String::from("bucket,lower,upper,count,correct,accuracy\n");
        for r in &self.rows {
            out += &format!(
                "{},{},{},{},{},{}\n",
                r.bucket,
                opt(r.lower),
                opt(r.upper),
                r.count,
                r.correct,
                opt(r.accuracy)
            );
        }
        out
    }
}

impl fmt::Display for DistanceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} aspects in multi-aspect sentences", self.aspects.len())?;
        writeln!(f, "{:<6} {:>22} {:>6} {:>9}", "bucket", "distance", "count", "accuracy")?;
        for r in &self.rows {
            let range = match (r.lower, r.upper) {
                (None, Some(u)) => format!("<= {u:.4}"),
                (Some(l), Some(u)) => format!("({l:.4}, {u:.4}]"),
                (Some(l), None) => format!("> {l:.4}"),
                (None, None) => "all".to_string(),
            };
            let acc = r.accuracy.map_or("-".to_string(), |a| format!("{a:.4}"));
            writeln!(f, "{:<6} {:>22} {:>6} {:>9}", r.bucket, range, r.count, acc)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Tensor;
    use crate::{DepParse, Polarity, Span};

    fn inst(sentence: &str, ord: usize, tokens: &[&str], aspect: usize) -> Instance {
        let tokens: Vec<String> = tokens.iter().map(|s| s.to_string()).collect();
        let n = tokens.len();
        let heads = (0..n).map(|i| if i == 0 { 0 } else { 1 }).collect();
        Instance {
            id: format!("{sentence}#{ord}"),
            sentence_id: sentence.into(),
            tokens: tokens.clone(),
            aspect: Span::single(aspect),
            polarity: Polarity::Positive,
            parse: DepParse::new(tokens, heads, vec!["dep".into(); n]),
        }
    }

    fn vectors() -> (Vocab, EmbeddingMatrix) {
        let vocab = Vocab::from(["<pad>", "<unk>", "a", "b", "c", "d", "e"].map(String::from).to_vec());
        #[rustfmt::skip]
        let rows = vec![
            0.0, 0.0,
            0.0, 0.0,
            0.0, 0.0,  // a
            3.0, 4.0,  // b
            1.0, 0.0,  // c
            1.0, 0.0,  // d
            0.0, 0.0,  // e
        ];
        (vocab, EmbeddingMatrix { table: Tensor::matrix(7, 2, rows).unwrap() })
    }

    #[test]
    fn hand_built_distances_and_buckets() {
        let (vocab, emb) = vectors();
        let data = vec![
            inst("s1", 0, &["a", "b", "e"], 0),
            inst("s1", 1, &["a", "b", "e"], 1),
            inst("s2", 0, &["c", "d"], 0),
            inst("s2", 1, &["c", "d"], 1),
            inst("s3", 0, &["a", "e"], 0),
        ];
        let d = nearest_aspect_distances(&data, &vocab, &emb);
        assert_eq!(d, vec![Some(5.0), Some(5.0), Some(0.0), Some(0.0), None]);
        let correct = [true, true, false, true, true];
        let r = bucket_accuracy(&data, &d, &correct, Some(&[1.0]));
        assert_eq!((r.rows[0].count, r.rows[0].correct), (2, 1));
        assert_eq!((r.rows[1].count, r.rows[1].correct), (2, 2));
        assert_eq!(r.aspects.len(), 4);
        assert!(r.aspects.iter().all(|a| a.id != "s3#0"));
    }

    #[test]
    fn identical_aspects_land_in_lowest_bucket() {
        let (vocab, emb) = vectors();
        let data = vec![inst("s", 0, &["c", "d", "a"], 0), inst("s", 1, &["c", "d", "a"], 1)];
        let d = nearest_aspect_distances(&data, &vocab, &emb);
        let r = bucket_accuracy(&data, &d, &[true, true], Some(&[0.5, 2.0]));
        assert!(r.aspects.iter().all(|a| a.distance == 0.0 && a.bucket == 0));
    }

    #[test]
    fn multiword_aspects_average_rows() {
        let (vocab, emb) = vectors();
        let mut two = inst("s", 0, &["a", "b", "c"], 0);
        two.aspect = Span::new(0, 1);
        let one = inst("s", 1, &["a", "b", "c"], 2);
        let d = nearest_aspect_distances(&[two, one], &vocab, &emb);
        // mean(a, b) = (1.5, 2); c = (1, 0)
        let expected = (0.25f64 + 4.0).sqrt();
        assert!((d[0].unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn quintiles_split_evenly() {
        let d: Vec<f64> = (1..=10).map(f64::from).collect();
        assert_eq!(quintile_edges(&d), vec![2.0, 4.0, 6.0, 8.0]);
        let r = bucket_accuracy(
            &(0..10).map(|i| inst(&format!("s{i}"), 0, &["a"], 0)).collect::<Vec<_>>(),
            &d.iter().map(|&x| Some(x)).collect::<Vec<_>>(),
            &[true; 10],
            None,
        );
        assert!(r.rows.iter().all(|r| r.count == 2));
    }

    #[test]
    fn unknown_aspect_uses_unknown_row() {
        let (vocab, emb) = vectors();
        let data = vec![inst("s", 0, &["zzz", "b"], 0), inst("s", 1, &["zzz", "b"], 1)];
        let d = nearest_aspect_distances(&data, &vocab, &emb);
        assert_eq!(d[0], Some(5.0));
    }
}
