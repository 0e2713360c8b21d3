use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{EvalReport, Misclassified};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorSample {
    /// Misclassifications available to sample from.
    pub total_errors: usize,
    pub requested: usize,
    /// Sampled errors in evaluation order.
    pub errors: Vec<Misclassified>,
}

/// Uniform sample of `k` misclassifications without replacement; all of
/// them when there are fewer than `k`.
pub fn export_errors(report: &EvalReport, k: usize, seed: u64) -> ErrorSample {
    let all = &report.misclassified;
    let errors = if k >= all.len() {
        all.clone()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut picked = rand::seq::index::sample(&mut rng, all.len(), k).into_vec();
        picked.sort_unstable();
        picked.into_iter().map(|i| all[i].clone()).collect()
    };
    if errors.len() < k {
        log::warn!("only {} misclassified instances; exporting all", all.len());
    }
    ErrorSample {
        total_errors: all.len(),
        requested: k,
        errors,
    }
}

/// One JSON object per sampled error.
pub fn write_errors<W: Write>(mut out: W, sample: &ErrorSample) -> std::io::Result<()> {
    for e in &sample.errors {
        writeln!(out, "{}", serde_json::to_string(e).map_err(std::io::Error::other)?)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Polarity;

    fn report(errors: usize) -> EvalReport {
        let mut r = EvalReport::from_confusion([[errors, 0, 0], [0, 0, 0], [0, 0, 0]]);
        r.misclassified = (0..errors)
            .map(|i| Misclassified {
                id: format!("s{i}#0"),
                tokens: vec!["x".into()],
                aspect: [1, 1],
                gold: Polarity::Neutral,
                pred: Polarity::Positive,
                probs: [0.5, 0.3, 0.2],
            })
            .collect();
        r
    }

    #[test]
    fn perfect_model_exports_nothing() {
        let s = export_errors(&report(0), 100, 1);
        assert!(s.errors.is_empty());
        assert_eq!(s.total_errors, 0);
    }

    #[test]
    fn fewer_errors_than_requested_exports_all() {
        let s = export_errors(&report(7), 100, 1);
        assert_eq!(s.errors.len(), 7);
    }

    #[test]
    fn seeded_sample_is_stable_and_distinct() {
        let r = report(500);
        let a = export_errors(&r, 100, 9);
        assert_eq!(a, export_errors(&r, 100, 9));
        assert_ne!(a, export_errors(&r, 100, 10));
        let mut ids: Vec<_> = a.errors.iter().map(|e| e.id.clone()).collect();
        ids.dedup();
        assert_eq!(ids.len(), 100);
    }

    #[test]
    fn jsonl_has_one_line_per_error() {
        let s = export_errors(&report(3), 2, 0);
        let mut buf = Vec::new();
        write_errors(&mut buf, &s).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.lines().all(|l| l.contains("\"gold\":\"neutral\"")));
    }
}
