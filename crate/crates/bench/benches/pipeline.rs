use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use apirel::candidate::{filter_sentences, ApiInventory};
use apirel::corpus::tokenize_software;
use apirel::eval::evaluate_dataset;
use apirel::sel::{decode_sel, encode_sel};
use apirel_bench::{dataset, example};

fn sel(c: &mut Criterion) {
    let mut group = c.benchmark_group("sel");
    for width in [2, 8, 32] {
        let e = example(3, width);
        let text = encode_sel(&e.record);
        group.bench_with_input(BenchmarkId::new("encode", width), &e, |b, e| b.iter(|| encode_sel(black_box(&e.record))));
        group.bench_with_input(BenchmarkId::new("decode", width), &text, |b, t| {
            b.iter(|| decode_sel(black_box(t), &e.sentence))
        });
    }
    group.finish();
}

fn tokenizer(c: &mut Criterion) {
    let text = "By default, printWriter calls flush in println(), whereas java.io.PrintWriter.print(String) doesn't; \
                see Map<String, List<Integer>> and 3.14 ... for details."
        .repeat(4);
    c.bench_function("tokenize_software", |b| b.iter(|| tokenize_software(black_box(&text))));
    let sentences: Vec<_> = dataset(200, 4).examples.into_iter().map(|e| e.sentence).collect();
    let inventory = ApiInventory::from_names(["java.util.Iterator.remove()", "java.lang.StringBuilder", "javax.swing.JFrame"]);
    c.bench_function("filter_200_sentences", |b| b.iter(|| filter_sentences(black_box(&sentences), &inventory)));
}

fn metrics(c: &mut Criterion) {
    let gold = dataset(1000, 6);
    let preds: Vec<_> = gold
        .examples
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let mut r = e.record.clone();
            if i % 3 == 0 {
                r.relations.pop();
            }
            r
        })
        .collect();
    c.bench_function("evaluate_1000", |b| b.iter(|| evaluate_dataset(black_box(&gold), black_box(&preds)).unwrap()));
}

criterion_group!(benches, sel, tokenizer, metrics);
criterion_main!(benches);
