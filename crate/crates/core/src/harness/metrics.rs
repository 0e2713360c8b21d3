use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Instance, Polarity};
use crate::rgat::{predict, GraphBatch, Model, ModelError};

use super::argmax;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: Polarity,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Gold instances of this class.
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Misclassified {
    pub id: String,
    pub tokens: Vec<String>,
    /// 1-based inclusive token span.
    pub aspect: [usize; 2],
    pub gold: Polarity,
    pub pred: Polarity,
    /// Class probabilities in positive, neutral, negative order.
    pub probs: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub total: usize,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub per_class: Vec<ClassMetrics>,
    /// `confusion[gold][pred]`.
    pub confusion: [[usize; 3]; 3],
    pub misclassified: Vec<Misclassified>,
}

impl EvalReport {
    /// Metrics implied by a confusion matrix; `misclassified` is left empty.
    pub fn from_confusion(confusion: [[usize; 3]; 3]) -> Self {
        let total: usize = confusion.iter().flatten().sum();
        let correct: usize = (0..3).map(|i| confusion[i][i]).sum();
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let per_class: Vec<ClassMetrics> = Polarity::ALL
            .iter()
            .enumerate()
            .map(|(c, &class)| {
                let tp = confusion[c][c];
                let predicted: usize = (0..3).map(|g| confusion[g][c]).sum();
                let support: usize = confusion[c].iter().sum();
                let precision = ratio(tp, predicted);
                let recall = ratio(tp, support);
                let f1 = if precision + recall == 0.0 {
                    0.0
                } else {
                    2.0 * precision * recall / (precision + recall)
                };
                ClassMetrics {
                    class,
                    precision,
                    recall,
                    f1,
                    support,
                }
            })
            .collect();
        let macro_f1 = per_class.iter().map(|m| m.f1).sum::<f64>() / 3.0;
        Self {
            total,
            accuracy: ratio(correct, total),
            macro_f1,
            per_class,
            confusion,
            misclassified: Vec::new(),
        }
    }

    pub fn from_predictions(instances: &[Instance], probs: &[[f64; 3]]) -> Self {
        let mut confusion = [[0; 3]; 3];
        let mut misclassified = Vec::new();
        for (inst, p) in instances.iter().zip(probs) {
            let gold = inst.polarity.index();
            let pred = argmax(p);
            confusion[gold][pred] += 1;
            if gold != pred {
                misclassified.push(Misclassified {
                    id: inst.id.clone(),
                    tokens: inst.tokens.clone(),
                    aspect: [inst.aspect.first + 1, inst.aspect.last + 1],
                    gold: inst.polarity,
                    pred: Polarity::ALL[pred],
                    probs: *p,
                });
            }
        }
        Self {
            misclassified,
            ..Self::from_confusion(confusion)
        }
    }

    /// One row per class plus a `macro` row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("class,precision,recall,f1,support\n");
        for m in &self.per_class {
            out += &format!("{},{:.6},{:.6},{:.6},{}\n", m.class, m.precision, m.recall, m.f1, m.support);
        }
        out += &format!("macro,,,{:.6},{}\n", self.macro_f1, self.total);
        out
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "instances  {}", self.total)?;
        writeln!(f, "accuracy   {:.4}", self.accuracy)?;
        writeln!(f, "macro-F1   {:.4}", self.macro_f1)?;
        writeln!(f)?;
        writeln!(f, "{:<10} {:>9} {:>9} {:>9} {:>8}", "class", "precision", "recall", "f1", "support")?;
        for m in &self.per_class {
            writeln!(
                f,
                "{:<10} {:>9.4} {:>9.4} {:>9.4} {:>8}",
                m.class.as_str(),
                m.precision,
                m.recall,
                m.f1,
                m.support
            )?;
        }
        writeln!(f)?;
        writeln!(f, "confusion (rows gold, columns predicted)")?;
        writeln!(f, "{:<10} {:>8} {:>8} {:>8}", "", "positive", "neutral", "negative")?;
        for (g, row) in self.confusion.iter().enumerate() {
            writeln!(f, "{:<10} {:>8} {:>8} {:>8}", Polarity::ALL[g].as_str(), row[0], row[1], row[2])?;
        }
        Ok(())
    }
}

/// Evaluation-mode predictions for every instance, in input order.
pub fn predict_all(model: &Model, instances: &[Instance]) -> Result<Vec<[f64; 3]>, ModelError> {
    predict_graphs(model, &model.graphs(instances)?)
}

pub(crate) fn predict_graphs(model: &Model, graphs: &[GraphBatch]) -> Result<Vec<[f64; 3]>, ModelError> {
    graphs.par_iter().map(|g| predict(model, g)).collect()
}

/// Argmax predictions scored against gold labels.
pub fn evaluate(model: &Model, instances: &[Instance]) -> Result<EvalReport, ModelError> {
    let probs = predict_all(model, instances)?;
    Ok(EvalReport::from_predictions(instances, &probs))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_diagonal() {
        let r = EvalReport::from_confusion([[10, 0, 0], [0, 10, 0], [0, 0, 10]]);
        assert_eq!(r.accuracy, 1.0);
        assert_eq!(r.macro_f1, 1.0);
    }

    #[test]
    fn all_first_class_on_balanced_set() {
        let r = EvalReport::from_confusion([[10, 0, 0], [10, 0, 0], [10, 0, 0]]);
        assert!((r.accuracy - 1.0 / 3.0).abs() < 1e-15);
        // positive: P = 1/3, R = 1, F1 = 0.5; the others score 0
        assert!((r.per_class[0].f1 - 0.5).abs() < 1e-15);
        assert!((r.macro_f1 - 0.5 / 3.0).abs() < 1e-15);
        assert_eq!(r.per_class[1].precision, 0.0);
    }

    #[test]
    fn hand_computed_mixed_matrix() {
        // gold pos: 3 right, 1 as neu; gold neu: 2 right, 2 as neg; gold neg: 1 as pos, 1 right
        let r = EvalReport::from_confusion([[3, 1, 0], [0, 2, 2], [1, 0, 1]]);
        assert_eq!(r.total, 10);
        assert!((r.accuracy - 0.6).abs() < 1e-15);
        let f1 = |p: f64, r: f64| 2.0 * p * r / (p + r);
        let expected = (f1(3.0 / 4.0, 3.0 / 4.0) + f1(2.0 / 3.0, 2.0 / 4.0) + f1(1.0 / 3.0, 1.0 / 2.0)) / 3.0;
        assert!((r.macro_f1 - expected).abs() < 1e-15);
    }

    #[test]
    fn empty_report_is_zero() {
        let r = EvalReport::from_confusion([[0; 3]; 3]);
        assert_eq!((r.total, r.accuracy, r.macro_f1), (0, 0.0, 0.0));
    }

    #[test]
    fn predictions_fill_misclassified() {
        let inst = crate::rgat::sample_instance();
        let mut neutral = inst.clone();
        neutral.polarity = Polarity::Neutral;
        let probs = [[0.2, 0.5, 0.3], [0.2, 0.5, 0.3]];
        let r = EvalReport::from_predictions(&[inst, neutral], &probs);
        assert_eq!(r.confusion, [[0, 1, 0], [0, 1, 0], [0, 0, 0]]);
        assert_eq!(r.misclassified.len(), 1);
        assert_eq!(r.misclassified[0].aspect, [2, 2]);
        assert_eq!(r.misclassified[0].pred, Polarity::Neutral);
    }
}
