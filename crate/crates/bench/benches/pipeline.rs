use std::hint::black_box;

use aspect_rgat::corpus::EmbeddingMatrix;
use aspect_rgat::harness::{synthetic, Dataset};
use aspect_rgat::nn::Tape;
use aspect_rgat::reshape::{reshape, ReshapeOptions};
use aspect_rgat::rgat::{instance_loss, predict, ForwardOptions};
use aspect_rgat::{DepParse, Hyper, Model, Span, TreeView};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

/// Deterministic tree: token `i` attaches to a scrambled earlier token.
fn scrambled_parse(n: usize) -> DepParse {
    let mut heads = vec![0; n];
    for (i, h) in heads.iter_mut().enumerate().skip(1) {
        *h = (i * 2_654_435_761) % i + 1;
    }
    let rels = (0..n).map(|i| if i == 0 { "root" } else { "dep" }.to_string()).collect();
    DepParse::new((0..n).map(|i| format!("w{i}")).collect(), heads, rels)
}

fn bench_trees(c: &mut Criterion) {
    let mut group = c.benchmark_group("reshape");
    for n in [10, 40, 120] {
        let parse = scrambled_parse(n);
        let aspect = Span::new(n / 2, n / 2 + 1);
        group.bench_with_input(BenchmarkId::from_parameter(n), &parse, |b, p| {
            b.iter(|| reshape(black_box(p), aspect, ReshapeOptions::default()).unwrap())
        });
    }
    group.finish();

    let parse = scrambled_parse(40);
    c.bench_function("distances_from/40", |b| {
        let view = TreeView::new(&parse).unwrap();
        b.iter(|| view.distances_from(black_box(17)).unwrap())
    });
}

fn model(hyper: Hyper, word_dim: usize) -> (Model, aspect_rgat::rgat::GraphBatch) {
    let data = synthetic::dataset(4, 1);
    let ds = Dataset::from_instances(data.clone(), Vec::new(), word_dim, 1);
    let relations = ds.relations(&hyper);
    let emb: EmbeddingMatrix = ds.embeddings;
    let model = Model::new(hyper, ds.vocab, emb, relations, 1).unwrap();
    let g = model.graph(&data[0]).unwrap();
    (model, g)
}

fn bench_model(c: &mut Criterion) {
    for (name, hyper, dim) in [("default", Hyper::default(), 300), ("small", synthetic::small_hyper(), 16)] {
        let (model, g) = model(hyper, dim);
        c.bench_function(&format!("predict/{name}"), |b| b.iter(|| predict(&model, black_box(&g)).unwrap()));
        c.bench_function(&format!("loss_and_backward/{name}"), |b| {
            b.iter(|| {
                let mut tape = Tape::new(&model.store);
                let (loss, _) = instance_loss(&mut tape, &model, &g, &ForwardOptions::train(7)).unwrap();
                tape.backward(loss).unwrap()
            })
        });
    }
}

criterion_group!(benches, bench_trees, bench_model);
criterion_main!(benches);
