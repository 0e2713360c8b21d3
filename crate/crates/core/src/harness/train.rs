use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::nn::{adam_step, Gradients, NnError, Tape};
use crate::rgat::{instance_loss, instance_seed, ForwardOptions, GraphBatch, Model, ModelError};

use super::metrics::predict_graphs;
use super::{io_err, Dataset, EvalReport, HarnessError, RunConfig};

pub const TRAIN_LOG: &str = "train_log.jsonl";
pub const BEST_CHECKPOINT: &str = "best.ckpt";
pub const LAST_GOOD_CHECKPOINT: &str = "last_good.ckpt";

const SELECTION: &str = "best test accuracy (no dev split)";

// Independent seed streams derived from the run seed.
const PARAM_STREAM: u64 = 1;
const SHUFFLE_STREAM: u64 = 2;
const DROPOUT_STREAM: u64 = 3;

/// One line of the training log. Epoch 0 scores the initial parameters.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Summed training loss over the epoch, dropout on.
    pub train_loss: Option<f64>,
    pub mean_train_loss: Option<f64>,
    pub test_accuracy: f64,
    pub test_macro_f1: f64,
    /// Norm of the relation-embedding gradient accumulated over the epoch.
    pub relation_grad_norm: Option<f64>,
    pub best: bool,
}

#[derive(Debug)]
pub struct TrainOutcome {
    /// Parameters of the best epoch.
    pub model: Model,
    pub best_epoch: usize,
    pub best_report: EvalReport,
    pub history: Vec<EpochRecord>,
    pub stopped_early: bool,
}

struct Log {
    out: Option<(PathBuf, BufWriter<File>)>,
}

impl Log {
    fn event(&mut self, value: serde_json::Value) -> Result<(), HarnessError> {
        if let Some((path, w)) = &mut self.out {
            writeln!(w, "{value}").map_err(io_err(path))?;
            w.flush().map_err(io_err(path))?;
        }
        Ok(())
    }
}

fn save(model: &Model, path: &Path, run: &serde_json::Value) -> Result<(), HarnessError> {
    let mut w = BufWriter::new(File::create(path).map_err(io_err(path))?);
    model.save(&mut w, run)?;
    w.flush().map_err(io_err(path))
}

fn run_header(cfg: &RunConfig, epoch: usize) -> serde_json::Value {
    json!({ "config": cfg, "epoch": epoch, "selection": SELECTION })
}

/// Mini-batch Adam on the summed loss, scoring the test split after every
/// epoch and keeping the best-scoring parameters. With `out` set, writes
/// [`TRAIN_LOG`] and [`BEST_CHECKPOINT`] there.
pub fn train(cfg: &RunConfig, data: &Dataset, out: Option<&Path>) -> Result<TrainOutcome, HarnessError> {
    cfg.validate()?;
    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let mut log = Log {
        out: match out {
            Some(dir) => {
                let path = dir.join(TRAIN_LOG);
                let file = File::create(&path).map_err(io_err(&path))?;
                Some((path, BufWriter::new(file)))
            }
            None => None,
        },
    };

    let mut model = Model::new(
        cfg.hyper,
        data.vocab.clone(),
        data.embeddings.clone(),
        data.relations(&cfg.hyper),
        instance_seed(cfg.seed, PARAM_STREAM),
    )?;
    let train_graphs = model.graphs(&data.train)?;
    let test_graphs = model.graphs(&data.test)?;
    log.event(json!({
        "event": "start",
        "config": cfg,
        "model_selection": SELECTION,
        "parameters": model.store.num_values(),
        "relations": model.relations.len(),
        "train_instances": train_graphs.len(),
        "test_instances": test_graphs.len(),
    }))?;

    let score = |model: &Model| -> Result<EvalReport, ModelError> {
        Ok(EvalReport::from_predictions(&data.test, &predict_graphs(model, &test_graphs)?))
    };

    let mut best_report = score(&model)?;
    let mut best_store = model.store.clone();
    let mut best_epoch = 0;
    let mut history = vec![EpochRecord {
        epoch: 0,
        train_loss: None,
        mean_train_loss: None,
        test_accuracy: best_report.accuracy,
        test_macro_f1: best_report.macro_f1,
        relation_grad_norm: None,
        best: true,
    }];
    log.event(epoch_event(&history[0]))?;
    if let Some(dir) = out {
        save(&model, &dir.join(BEST_CHECKPOINT), &run_header(cfg, 0))?;
    }

    let mut order: Vec<usize> = (0..train_graphs.len()).collect();
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(instance_seed(cfg.seed, SHUFFLE_STREAM));
    let dropout_base = instance_seed(cfg.seed, DROPOUT_STREAM);
    let relation_id = model.params.relation_embeddings;
    let mut step = 0u64;
    let mut stale = 0;
    let mut stopped_early = false;

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        let mut rel_sq = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let step_seed = instance_seed(dropout_base, step);
            step += 1;
            let (batch_loss, grads) = batch_gradients(&model, &train_graphs, batch, step_seed)?;
            let failure = if !batch_loss.is_finite() {
                Some(format!("loss {batch_loss}"))
            } else {
                match adam_step(&mut model.store, &grads, &cfg.adam) {
                    Ok(()) => None,
                    Err(e @ NnError::NonFinite { .. }) => Some(e.to_string()),
                    Err(e) => return Err(e.into()),
                }
            };
            if let Some(reason) = failure {
                let last_good = match out {
                    Some(dir) => {
                        let path = dir.join(LAST_GOOD_CHECKPOINT);
                        save(&model, &path, &run_header(cfg, epoch - 1))?;
                        Some(path)
                    }
                    None => None,
                };
                log.event(json!({ "event": "diverged", "epoch": epoch, "step": step, "reason": reason }))?;
                return Err(HarnessError::Diverged {
                    epoch,
                    step: step as usize,
                    reason,
                    last_good,
                });
            }
            epoch_loss += batch_loss;
            let n = grads.norm(relation_id);
            rel_sq += n * n;
        }

        let report = score(&model)?;
        let improved = report.accuracy > best_report.accuracy;
        let record = EpochRecord {
            epoch,
            train_loss: Some(epoch_loss),
            mean_train_loss: Some(epoch_loss / train_graphs.len().max(1) as f64),
            test_accuracy: report.accuracy,
            test_macro_f1: report.macro_f1,
            relation_grad_norm: Some(rel_sq.sqrt()),
            best: improved,
        };
        log::info!(
            "epoch {epoch}: loss {:.4}, test acc {:.4}, macro-F1 {:.4}{}",
            epoch_loss,
            report.accuracy,
            report.macro_f1,
            if improved { " *" } else { "" }
        );
        log.event(epoch_event(&record))?;
        history.push(record);

        if improved {
            best_report = report;
            best_store = model.store.clone();
            best_epoch = epoch;
            stale = 0;
            if let Some(dir) = out {
                save(&model, &dir.join(BEST_CHECKPOINT), &run_header(cfg, epoch))?;
            }
        } else {
            stale += 1;
            if cfg.patience > 0 && stale >= cfg.patience {
                stopped_early = epoch < cfg.epochs;
                break;
            }
        }
    }

    log.event(json!({
        "event": "end",
        "best_epoch": best_epoch,
        "best_test_accuracy": best_report.accuracy,
        "best_test_macro_f1": best_report.macro_f1,
        "stopped_early": stopped_early,
        "model_selection": SELECTION,
    }))?;
    model.store = best_store;
    Ok(TrainOutcome {
        model,
        best_epoch,
        best_report,
        history,
        stopped_early,
    })
}

fn epoch_event(r: &EpochRecord) -> serde_json::Value {
    let mut v = serde_json::to_value(r).expect("record serializes");
    v.as_object_mut().expect("object").insert("event".into(), "epoch".into());
    v
}

/// Summed loss and gradients over `batch`. Instances run in parallel; the
/// reduction follows batch order.
fn batch_gradients(
    model: &Model,
    graphs: &[GraphBatch],
    batch: &[usize],
    step_seed: u64,
) -> Result<(f64, Gradients), HarnessError> {
    let parts: Vec<Result<(f64, Gradients), ModelError>> = batch
        .par_iter()
        .enumerate()
        .map(|(k, &i)| {
            let mut tape = Tape::new(&model.store);
            let opts = ForwardOptions::train(instance_seed(step_seed, k as u64));
            let (l, _) = instance_loss(&mut tape, model, &graphs[i], &opts)?;
            let value = tape.value(l).data()[0];
            Ok((value, tape.backward(l)?))
        })
        .collect();
    let mut total = 0.0;
    let mut grads = Gradients::zeros_like(&model.store);
    for part in parts {
        let (l, g) = part?;
        total += l;
        grads.add_assign(&g);
    }
    Ok((total, grads))
}
