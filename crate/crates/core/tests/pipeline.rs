use std::fs::File;

use aspect_rgat::corpus::write_instances;
use aspect_rgat::harness::{
    ablate, evaluate, export_errors, multi_aspect_analysis, synthetic, train, Dataset, TreeKind, Variant,
    BEST_CHECKPOINT,
};
use aspect_rgat::{EvalReport, Instance, Model, RunConfig, Span};

/// Each synthetic sentence once per noun, so every sentence has two aspects.
fn both_aspects(data: &[Instance]) -> Vec<Instance> {
    data.iter()
        .flat_map(|inst| {
            [1usize, 6].map(|noun| Instance {
                id: format!("{}#{}", inst.sentence_id, usize::from(noun == 6)),
                aspect: Span::single(noun),
                polarity: synthetic::opinion_polarity(&inst.tokens[inst.parse.head_of(noun).unwrap()]).unwrap(),
                ..inst.clone()
            })
        })
        .collect()
}

fn config(dir: &std::path::Path, epochs: usize) -> RunConfig {
    let data = synthetic::dataset(30, 5);
    let test = both_aspects(&synthetic::dataset(12, 6));
    let train_path = dir.join("train.jsonl");
    let test_path = dir.join("test.jsonl");
    write_instances(&train_path, &data).unwrap();
    write_instances(&test_path, &test).unwrap();
    RunConfig {
        train: train_path,
        test: test_path,
        word_dim: 12,
        hyper: synthetic::small_hyper(),
        epochs,
        batch_size: 10,
        patience: 0,
        seed: 3,
        ..RunConfig::default()
    }
}

#[test]
fn train_checkpoint_evaluate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), 4);
    let data = Dataset::load(&cfg).unwrap();
    let outcome = train(&cfg, &data, Some(dir.path())).unwrap();

    let (model, run) = Model::load(File::open(dir.path().join(BEST_CHECKPOINT)).unwrap()).unwrap();
    let stored: RunConfig = serde_json::from_value(run["config"].clone()).unwrap();
    assert_eq!(stored, cfg);
    assert_eq!(run["epoch"], outcome.best_epoch);

    let report = evaluate(&model, &data.test).unwrap();
    assert_eq!(report, outcome.best_report);
    assert_eq!(report, evaluate(&model, &data.test).unwrap());

    let recomputed = EvalReport::from_confusion(report.confusion);
    assert_eq!(recomputed.accuracy, report.accuracy);
    assert_eq!(recomputed.macro_f1, report.macro_f1);
    let correct: usize = (0..3).map(|i| report.confusion[i][i]).sum();
    assert_eq!(report.total - correct, report.misclassified.len());

    let sample = export_errors(&report, 5, 1);
    assert_eq!(sample.errors.len(), report.misclassified.len().min(5));
}

#[test]
fn distance_analysis_keeps_multi_aspect_sentences() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), 1);
    let data = Dataset::load(&cfg).unwrap();
    let model = train(&cfg, &data, None).unwrap().model;
    let mut instances = data.test.clone();
    instances.extend(data.train.iter().take(3).map(|i| Instance {
        sentence_id: format!("single-{}", i.sentence_id),
        ..i.clone()
    }));
    let r = multi_aspect_analysis(&model, &instances, None).unwrap();
    assert_eq!(r.aspects.len(), data.test.len());
    assert_eq!(r.rows.len(), 5);
    assert_eq!(r.rows.iter().map(|b| b.count).sum::<usize>(), data.test.len());
    assert!(r.edges.windows(2).all(|w| w[0] <= w[1]));
    let fixed = multi_aspect_analysis(&model, &instances, Some(&[0.5])).unwrap();
    assert_eq!(fixed.rows.len(), 2);
}

#[test]
fn ablation_fills_five_cells() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), 1);
    let data = Dataset::load(&cfg).unwrap();
    let table = ablate(&cfg, &data, &[1, 2], Some(&dir.path().join("ablate"))).unwrap();
    assert_eq!(table.config_hash.len(), 64);
    let populated: Vec<_> = table.cells.iter().filter(|c| c.mode.is_some()).collect();
    assert_eq!(populated.len(), 5);
    assert!(table.cell(TreeKind::Ordinary, Variant::RgatNoNcon).runs.is_empty());
    for c in &populated {
        assert_eq!(c.runs.len(), 2);
        assert!(c.runs.iter().all(|r| (0.0..=1.0).contains(&r.accuracy)));
    }
    for tree in TreeKind::ALL {
        let gat = table.cell(tree, Variant::GatOnly);
        assert!(gat.runs.iter().all(|r| r.max_relation_grad_norm == 0.0));
        let rgat = table.cell(tree, Variant::Rgat);
        assert!(rgat.runs.iter().all(|r| r.max_relation_grad_norm > 0.0));
    }
    assert!(dir.path().join("ablate/rgat_no_ncon/seed-2").join(BEST_CHECKPOINT).exists());
    assert_eq!(table.to_csv().lines().count(), 1 + 5 * 2 + 1);
    assert!(table.to_string().contains("reshaped"));
}
