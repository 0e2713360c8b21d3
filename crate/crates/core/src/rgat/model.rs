use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{EmbeddingMatrix, Instance, Vocab};
use crate::nn::{
    bilstm_forward, init_params, read_checkpoint, write_checkpoint, BiLstmParams, Init, ParamId, ParamSpec,
    ParamStore, Tape, Tensor, Var,
};
use crate::reshape::RelationVocab;

use super::graph::{GraphBatch, NodeKind};
use super::{Hyper, ModelError};

const ROW_SUM_TOL: f64 = 1e-10;
const PROB_SUM_TOL: f64 = 1e-12;
const EMBEDDINGS_TENSOR: &str = "word_embeddings";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttHeadParams {
    pub query: ParamId,
    pub key: ParamId,
    pub value: ParamId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelHeadParams {
    pub gate1_w: ParamId,
    pub gate1_b: ParamId,
    pub gate2_w: ParamId,
    pub gate2_b: ParamId,
    pub value: ParamId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerParams {
    pub att: Vec<AttHeadParams>,
    pub rel: Vec<RelHeadParams>,
    pub combine_w: ParamId,
    pub combine_b: ParamId,
}

/// Handles into a [`ParamStore`] for every trainable tensor of the model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgatParams {
    pub relation_embeddings: ParamId,
    pub sentence_lstm: BiLstmParams,
    pub aspect_lstm: BiLstmParams,
    pub layers: Vec<LayerParams>,
    pub classifier_w: ParamId,
    pub classifier_b: ParamId,
}

impl RgatParams {
    pub fn specs(hyper: &Hyper, word_dim: usize, relations: usize) -> Vec<ParamSpec> {
        use Init::{XavierUniform as X, Zeros as Z};
        let dh = hyper.head_dim;
        let mut specs = vec![ParamSpec::new("relation_embeddings", &[relations, hyper.rel_dim], X)];
        specs.extend(BiLstmParams::specs("sentence_lstm", word_dim, hyper.lstm_hidden));
        specs.extend(BiLstmParams::specs("aspect_lstm", word_dim, hyper.lstm_hidden));
        for l in 0..hyper.layers {
            let d_in = if l == 0 { 2 * hyper.lstm_hidden } else { hyper.hidden_dim };
            for k in 0..hyper.att_heads {
                for part in ["query", "key", "value"] {
                    specs.push(ParamSpec::new(format!("layer{l}.att{k}.{part}"), &[d_in, dh], X));
                }
            }
            for m in 0..hyper.rel_heads {
                let p = format!("layer{l}.rel{m}");
                specs.push(ParamSpec::new(format!("{p}.gate1.w"), &[hyper.rel_dim, hyper.gate_dim], X));
                specs.push(ParamSpec::new(format!("{p}.gate1.b"), &[1, hyper.gate_dim], Z));
                specs.push(ParamSpec::new(format!("{p}.gate2.w"), &[hyper.gate_dim, 1], X));
                specs.push(ParamSpec::new(format!("{p}.gate2.b"), &[1, 1], Z));
                specs.push(ParamSpec::new(format!("{p}.value"), &[d_in, dh], X));
            }
            specs.push(ParamSpec::new(format!("layer{l}.combine.w"), &[hyper.concat_dim(), hyper.hidden_dim], X));
            specs.push(ParamSpec::new(format!("layer{l}.combine.b"), &[1, hyper.hidden_dim], Z));
        }
        specs.push(ParamSpec::new("classifier.w", &[hyper.hidden_dim, 3], X));
        specs.push(ParamSpec::new("classifier.b", &[1, 3], Z));
        specs
    }

    pub fn lookup(store: &ParamStore, hyper: &Hyper) -> Result<Self, ModelError> {
        let id = |name: String| store.id(&name);
        let mut layers = Vec::with_capacity(hyper.layers);
        for l in 0..hyper.layers {
            let att = (0..hyper.att_heads)
                .map(|k| {
                    Ok(AttHeadParams {
                        query: id(format!("layer{l}.att{k}.query"))?,
                        key: id(format!("layer{l}.att{k}.key"))?,
                        value: id(format!("layer{l}.att{k}.value"))?,
                    })
                })
                .collect::<Result<_, crate::nn::NnError>>()?;
            let rel = (0..hyper.rel_heads)
                .map(|m| {
                    let p = format!("layer{l}.rel{m}");
                    Ok(RelHeadParams {
                        gate1_w: id(format!("{p}.gate1.w"))?,
                        gate1_b: id(format!("{p}.gate1.b"))?,
                        gate2_w: id(format!("{p}.gate2.w"))?,
                        gate2_b: id(format!("{p}.gate2.b"))?,
                        value: id(format!("{p}.value"))?,
                    })
                })
                .collect::<Result<_, crate::nn::NnError>>()?;
            layers.push(LayerParams {
                att,
                rel,
                combine_w: id(format!("layer{l}.combine.w"))?,
                combine_b: id(format!("layer{l}.combine.b"))?,
            });
        }
        let combine_in = store.value(layers[0].combine_w).rows();
        if combine_in != hyper.concat_dim() {
            return Err(ModelError::Hyper(format!(
                "mode {} needs a {}-wide combiner input, parameters have {combine_in}",
                hyper.mode,
                hyper.concat_dim()
            )));
        }
        Ok(Self {
            relation_embeddings: id("relation_embeddings".into())?,
            sentence_lstm: BiLstmParams::lookup(store, "sentence_lstm")?,
            aspect_lstm: BiLstmParams::lookup(store, "aspect_lstm")?,
            layers,
            classifier_w: id("classifier.w".into())?,
            classifier_b: id("classifier.b".into())?,
        })
    }
}

/// Trainable parameters plus the frozen lookup tables they were built for.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub hyper: Hyper,
    pub vocab: Vocab,
    pub embeddings: EmbeddingMatrix,
    pub relations: RelationVocab,
    pub store: ParamStore,
    pub params: RgatParams,
}

#[derive(Serialize, Deserialize)]
struct CheckpointConfig {
    run: serde_json::Value,
    hyper: Hyper,
    vocab: Vocab,
    relations: RelationVocab,
}

impl Model {
    pub fn new(
        hyper: Hyper,
        vocab: Vocab,
        embeddings: EmbeddingMatrix,
        relations: RelationVocab,
        seed: u64,
    ) -> Result<Self, ModelError> {
        hyper.validate()?;
        if embeddings.rows() != vocab.len() {
            return Err(ModelError::Hyper(format!(
                "{} embedding rows for a {}-token vocabulary",
                embeddings.rows(),
                vocab.len()
            )));
        }
        let specs = RgatParams::specs(&hyper, embeddings.dim(), relations.len());
        let store = init_params(&specs, seed)?;
        let params = RgatParams::lookup(&store, &hyper)?;
        Ok(Self {
            hyper,
            vocab,
            embeddings,
            relations,
            store,
            params,
        })
    }

    pub fn graph(&self, inst: &Instance) -> Result<GraphBatch, ModelError> {
        GraphBatch::build(inst, &self.vocab, &self.relations, &self.hyper)
    }

    pub fn graphs(&self, instances: &[Instance]) -> Result<Vec<GraphBatch>, ModelError> {
        instances.iter().map(|i| self.graph(i)).collect()
    }

    /// Writes the model with `run` embedded in the checkpoint header.
    pub fn save<W: Write>(&self, out: W, run: &serde_json::Value) -> Result<(), ModelError> {
        let config = CheckpointConfig {
            run: run.clone(),
            hyper: self.hyper,
            vocab: self.vocab.clone(),
            relations: self.relations.clone(),
        };
        let config = serde_json::to_value(&config).map_err(|e| ModelError::Checkpoint(e.to_string()))?;
        let mut tensors: Vec<(&str, &Tensor)> = vec![(EMBEDDINGS_TENSOR, &self.embeddings.table)];
        tensors.extend(self.store.iter().map(|(_, p)| (p.name.as_str(), &p.value)));
        write_checkpoint(out, &config, &tensors)?;
        Ok(())
    }

    /// Reads a model and the run configuration stored with it.
    pub fn load<R: Read>(input: R) -> Result<(Self, serde_json::Value), ModelError> {
        let (config, tensors) = read_checkpoint(input)?;
        let config: CheckpointConfig =
            serde_json::from_value(config).map_err(|e| ModelError::Checkpoint(e.to_string()))?;
        let mut tensors = tensors.into_iter();
        let table = match tensors.next() {
            Some((name, t)) if name == EMBEDDINGS_TENSOR => t,
            _ => return Err(ModelError::Checkpoint(format!("first tensor must be {EMBEDDINGS_TENSOR}"))),
        };
        let mut store = ParamStore::new();
        for (name, t) in tensors {
            store.insert(name, t)?;
        }
        let params = RgatParams::lookup(&store, &config.hyper)?;
        let model = Self {
            hyper: config.hyper,
            vocab: config.vocab,
            embeddings: EmbeddingMatrix { table },
            relations: config.relations,
            store,
            params,
        };
        Ok((model, config.run))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ForwardOptions {
    pub train: bool,
    /// Dropout seed; ignored when `train` is false.
    pub seed: u64,
    /// Keep every head's attention matrix in [`Forward::heads`].
    pub record: bool,
    /// Fail on normalization or gate-range violations.
    pub check: bool,
}

impl ForwardOptions {
    pub fn eval() -> Self {
        Self::default()
    }

    pub fn train(seed: u64) -> Self {
        Self {
            train: true,
            seed,
            ..Self::default()
        }
    }

    pub fn checked() -> Self {
        Self {
            record: true,
            check: true,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeadKind {
    Attentional,
    Relational,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeadWeights {
    pub layer: usize,
    pub kind: HeadKind,
    pub head: usize,
    /// `n × n`, zero off the neighbourhood.
    pub weights: Tensor,
    /// Per-edge gates `g`, relational heads only.
    pub gates: Option<Tensor>,
}

#[derive(Debug, Clone)]
pub struct Forward {
    /// `[1, 3]` class probabilities.
    pub probs: Var,
    pub heads: Vec<HeadWeights>,
}

fn check_rows(w: &Tensor, mask: &[bool], what: &str) -> Result<(), ModelError> {
    let n = w.cols();
    for i in 0..w.rows() {
        if !mask[i * n..(i + 1) * n].iter().any(|&m| m) {
            continue;
        }
        let s: f64 = w.row(i).iter().sum();
        if (s - 1.0).abs() > ROW_SUM_TOL {
            return Err(ModelError::Invariant(format!("{what} row {i} sums to {s}")));
        }
    }
    Ok(())
}

/// Class probabilities for one graph.
pub fn forward(tape: &mut Tape<'_>, model: &Model, g: &GraphBatch, opts: &ForwardOptions) -> Result<Forward, ModelError> {
    let hyper = &model.hyper;
    let p = &model.params;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let t = g.word_ids.len();
    if g.aspect.is_empty() || g.aspect.last >= t {
        return Err(ModelError::EmptyAspect(g.id.clone()));
    }
    let n = g.len();

    let dim = model.embeddings.dim();
    let mut words = Vec::with_capacity(t * dim);
    for &w in &g.word_ids {
        words.extend_from_slice(model.embeddings.row(w));
    }
    let words = tape.constant(Tensor::matrix(t, dim, words)?);
    let words = tape.dropout(words, hyper.dropout, &mut rng, opts.train)?;

    let sentence = bilstm_forward(tape, &p.sentence_lstm, words)?;
    let aspect_words = tape.gather_rows(words, g.aspect.iter().collect())?;
    let aspect = bilstm_forward(tape, &p.aspect_lstm, aspect_words)?;
    let root = tape.mean_rows(aspect);
    let pool = tape.concat_rows(&[sentence, root])?;
    let rows = g
        .nodes
        .iter()
        .map(|k| match *k {
            NodeKind::Root => t,
            NodeKind::Token(i) => i,
        })
        .collect();
    let mut states = tape.gather_rows(pool, rows)?;

    let mask = g.mask();
    let relational = hyper.mode.relational();
    let (used, slots) = g.relation_slots();
    if let Some(&r) = used.iter().find(|&&r| r >= model.relations.len()) {
        return Err(ModelError::UnknownRelation(format!("index {r}")));
    }
    let rel_rows = if relational {
        let table = tape.param(p.relation_embeddings);
        Some(tape.gather_rows(table, used)?)
    } else {
        None
    };
    let ctx = LayerContext {
        nodes: n,
        mask,
        slots,
        relations: rel_rows,
        head_dim: hyper.head_dim,
    };
    let mut trace = Vec::new();

    for (l, layer) in p.layers.iter().enumerate() {
        let out = rgat_layer(tape, layer, states, &ctx)?;
        for h in &out.heads {
            let w = tape.value(h.weights);
            if opts.check {
                check_rows(w, &ctx.mask, &format!("{:?} head {} of layer {l}", h.kind, h.head))?;
                if let Some(gates) = h.gates {
                    if let Some(v) = tape.value(gates).data().iter().find(|v| !(**v > 0.0 && **v < 1.0)) {
                        return Err(ModelError::Invariant(format!("gate {v} in head {} of layer {l}", h.head)));
                    }
                }
            }
            if opts.record {
                trace.push(HeadWeights {
                    layer: l,
                    kind: h.kind,
                    head: h.head,
                    weights: w.clone(),
                    gates: h.gates.map(|g| expand_gates(tape.value(g), &ctx.slots, n)),
                });
            }
        }
        states = tape.dropout(out.states, hyper.dropout, &mut rng, opts.train)?;
    }

    let h_root = tape.row(states, g.root)?;
    let wp = tape.param(p.classifier_w);
    let bp = tape.param(p.classifier_b);
    let logits = tape.matmul(h_root, wp)?;
    let logits = tape.add_row(logits, bp)?;
    let probs = tape.softmax(logits)?;
    if opts.check {
        let s = tape.value(probs).sum();
        if (s - 1.0).abs() > PROB_SUM_TOL || tape.value(probs).data().iter().any(|&v| v < 0.0) {
            return Err(ModelError::Invariant(format!("class probabilities sum to {s}")));
        }
    }
    Ok(Forward { probs, heads: trace })
}

/// Graph-level inputs shared by every head of a layer.
#[derive(Debug, Clone)]
pub struct LayerContext {
    pub nodes: usize,
    /// Row-major `n × n` neighbourhood mask.
    pub mask: Vec<bool>,
    /// Per-cell position into `relations`.
    pub slots: Vec<Option<usize>>,
    /// Embeddings of the relations used by the graph; `None` without
    /// relational heads.
    pub relations: Option<Var>,
    pub head_dim: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct HeadOutput {
    pub kind: HeadKind,
    pub head: usize,
    /// `[n, head_dim]`
    pub output: Var,
    /// `α` or `β`, `[n, n]`.
    pub weights: Var,
    /// Gates per used relation, `[u, 1]`.
    pub gates: Option<Var>,
}

#[derive(Debug, Clone)]
pub struct LayerOutput {
    pub states: Var,
    pub heads: Vec<HeadOutput>,
}

/// Scaled dot-product attention over each node's neighbourhood.
pub fn attentional_head(
    tape: &mut Tape<'_>,
    p: &AttHeadParams,
    h: Var,
    ctx: &LayerContext,
    head: usize,
) -> Result<HeadOutput, ModelError> {
    let wq = tape.param(p.query);
    let wk = tape.param(p.key);
    let wv = tape.param(p.value);
    let q = tape.matmul(h, wq)?;
    let k = tape.matmul(h, wk)?;
    let v = tape.matmul(h, wv)?;
    let k_t = tape.transpose(k)?;
    let scores = tape.matmul(q, k_t)?;
    let scores = tape.scale(scores, 1.0 / (ctx.head_dim as f64).sqrt());
    let alpha = tape.masked_softmax(scores, &ctx.mask)?;
    let output = tape.matmul(alpha, v)?;
    Ok(HeadOutput {
        kind: HeadKind::Attentional,
        head,
        output,
        weights: alpha,
        gates: None,
    })
}

/// Softmax over neighbour gates `σ(relu(r W1 + b1) W2 + b2)`.
pub fn relational_head(
    tape: &mut Tape<'_>,
    p: &RelHeadParams,
    h: Var,
    ctx: &LayerContext,
    head: usize,
) -> Result<HeadOutput, ModelError> {
    let relations = ctx
        .relations
        .ok_or_else(|| ModelError::Hyper("relational head without relation embeddings".into()))?;
    let w1 = tape.param(p.gate1_w);
    let b1 = tape.param(p.gate1_b);
    let w2 = tape.param(p.gate2_w);
    let b2 = tape.param(p.gate2_b);
    let wv = tape.param(p.value);
    let hidden = tape.matmul(relations, w1)?;
    let hidden = tape.add_row(hidden, b1)?;
    let hidden = tape.relu(hidden);
    let gates = tape.matmul(hidden, w2)?;
    let gates = tape.add_row(gates, b2)?;
    let gates = tape.sigmoid(gates);
    let logits = tape.scatter(gates, ctx.slots.clone(), ctx.nodes, ctx.nodes)?;
    let beta = tape.masked_softmax(logits, &ctx.mask)?;
    let v = tape.matmul(h, wv)?;
    let output = tape.matmul(beta, v)?;
    Ok(HeadOutput {
        kind: HeadKind::Relational,
        head,
        output,
        weights: beta,
        gates: Some(gates),
    })
}

/// `relu(W [att_1 .. att_K ‖ rel_1 .. rel_M] + b)`; the relational block
/// is skipped when `ctx.relations` is `None`.
pub fn rgat_layer(tape: &mut Tape<'_>, p: &LayerParams, h: Var, ctx: &LayerContext) -> Result<LayerOutput, ModelError> {
    let mut heads = Vec::with_capacity(p.att.len() + p.rel.len());
    for (k, a) in p.att.iter().enumerate() {
        heads.push(attentional_head(tape, a, h, ctx, k)?);
    }
    if ctx.relations.is_some() {
        for (m, r) in p.rel.iter().enumerate() {
            heads.push(relational_head(tape, r, h, ctx, m)?);
        }
    }
    let parts: Vec<Var> = heads.iter().map(|o| o.output).collect();
    let x = tape.concat_cols(&parts)?;
    let w = tape.param(p.combine_w);
    let b = tape.param(p.combine_b);
    let out = tape.matmul(x, w)?;
    let out = tape.add_row(out, b)?;
    Ok(LayerOutput {
        states: tape.relu(out),
        heads,
    })
}

fn expand_gates(gates: &Tensor, slots: &[Option<usize>], n: usize) -> Tensor {
    let data = slots.iter().map(|s| s.map_or(0.0, |i| gates.data()[i])).collect();
    Tensor::matrix(n, n, data).expect("n x n")
}

/// `-ln p_gold` for one graph, plus the forward pass that produced it.
pub fn instance_loss(
    tape: &mut Tape<'_>,
    model: &Model,
    g: &GraphBatch,
    opts: &ForwardOptions,
) -> Result<(Var, Forward), ModelError> {
    let fwd = forward(tape, model, g, opts)?;
    let nll = tape.nll(fwd.probs, vec![g.label])?;
    Ok((nll, fwd))
}

/// Summed negative log-likelihood over `graphs`. Instance `i` draws its
/// dropout masks from [`instance_seed`]`(opts.seed, i)`.
pub fn loss(tape: &mut Tape<'_>, model: &Model, graphs: &[GraphBatch], opts: &ForwardOptions) -> Result<Var, ModelError> {
    let mut total: Option<Var> = None;
    for (i, g) in graphs.iter().enumerate() {
        let o = ForwardOptions {
            seed: instance_seed(opts.seed, i as u64),
            ..*opts
        };
        let (l, _) = instance_loss(tape, model, g, &o)?;
        total = Some(match total {
            None => l,
            Some(t) => tape.add(t, l)?,
        });
    }
    match total {
        Some(t) => Ok(t),
        None => Ok(tape.constant(Tensor::scalar(0.0))),
    }
}

/// Mixes a base seed with a stream index.
pub fn instance_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Evaluation-mode class probabilities.
pub fn predict(model: &Model, g: &GraphBatch) -> Result<[f64; 3], ModelError> {
    let mut tape = Tape::new(&model.store);
    let fwd = forward(&mut tape, model, g, &ForwardOptions::eval())?;
    let p = tape.value(fwd.probs).data();
    Ok([p[0], p[1], p[2]])
}
