use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wfalearn_core::dyck::DyckGrammar;
use wfalearn_core::hankel::{build_basis, estimate_hankel};
use wfalearn_core::linwfa::spectral_learn;
use wfalearn_core::neural::TrainConfig;
use wfalearn_core::nlwfa::{learn_from_hankel, train_factorization, LearnConfig};
use wfalearn_core::Variant;

fn pipeline(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let grammar = DyckGrammar::default();
    let samples = grammar.sample_set(&mut rng, 5_000, 60);
    let test = grammar.sample_set(&mut rng, 100, 60);
    let basis = build_basis(&samples, 100, 100).unwrap();
    let h = estimate_hankel(&samples, &basis).unwrap();

    c.bench_function("estimate_hankel/100x100_from_5k", |b| {
        b.iter(|| estimate_hankel(black_box(&samples), black_box(&basis)).unwrap())
    });

    c.bench_function("spectral_learn/k4", |b| {
        b.iter(|| spectral_learn(black_box(&h), 4).unwrap())
    });

    let mut cfg = LearnConfig::for_rank(4, 3);
    cfg.factorization.epochs = 60;
    cfg.transition.epochs = 60;
    let model = learn_from_hankel(&h, 4, Variant::BothNon, &cfg).unwrap().model;
    c.bench_function("nlwfa_evaluate/100_words", |b| {
        b.iter(|| {
            test.words()
                .iter()
                .map(|w| model.evaluate(black_box(w)))
                .sum::<f64>()
        })
    });

    let mut training = c.benchmark_group("training");
    training.sample_size(10);
    training.bench_function("autoencoder_20_epochs", |b| {
        let cfg = TrainConfig {
            epochs: 20,
            early_stop_patience: None,
            seed: 5,
            ..TrainConfig::default()
        };
        b.iter(|| train_factorization(black_box(&h), 4, &[8, 4, 8], true, &cfg).unwrap())
    });
    training.finish();
}

criterion_group!(benches, pipeline);
criterion_main!(benches);
