//! Timings for the paths that dominate real runs: the analytic
//! transform stack, the layer forward pass, the loss gradient that
//! training spends its life in, attack iterations and table recovery.

use bnn_core::{
    attack, bispectrum, cayley_from_irreps, find_isomorphism, forward, generate, loss_gradient,
    sample_batch, AttackConfig, CharacterTable, FiniteAbelianGroup, NetworkWeights, C64,
};
use criterion::{criterion_group, criterion_main, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn signal(n: usize, rng: &mut ChaCha8Rng) -> Vec<C64> {
    (0..n).map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))).collect()
}

fn bench_character_table(c: &mut Criterion) {
    let group = FiniteAbelianGroup::new(&[256]).unwrap();
    c.bench_function("character_table_256", |b| {
        b.iter(|| CharacterTable::new(std::hint::black_box(&group)))
    });
}

fn bench_analytic_bispectrum(c: &mut Criterion) {
    let group = FiniteAbelianGroup::new(&[64]).unwrap();
    let table = CharacterTable::new(&group);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let x = signal(64, &mut rng);
    c.bench_function("gft_and_bispectrum_64", |b| {
        b.iter(|| {
            let fhat = table.gft(std::hint::black_box(&x)).unwrap();
            bispectrum(&fhat, &table).unwrap()
        })
    });
}

fn bench_forward(c: &mut Criterion) {
    let group = FiniteAbelianGroup::new(&[8]).unwrap();
    let w = NetworkWeights::analytic(&CharacterTable::new(&group));
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = signal(8, &mut rng);
    c.bench_function("forward_8", |b| b.iter(|| forward(&w, std::hint::black_box(&x)).unwrap()));
}

fn bench_loss_gradient(c: &mut Criterion) {
    let group = FiniteAbelianGroup::new(&[8]).unwrap();
    let ds = generate(&group, 100, 1.0, false, 0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let indices = sample_batch(&ds, 80, 8, &mut rng).unwrap();
    let batch = ds.batch_views(&indices);
    let w = NetworkWeights::analytic(&CharacterTable::new(&group));
    c.bench_function("loss_gradient_8_batch80", |b| {
        b.iter(|| loss_gradient(&w, std::hint::black_box(&batch), 1.0).unwrap())
    });
}

fn bench_attack_iterations(c: &mut Criterion) {
    let group = FiniteAbelianGroup::new(&[8]).unwrap();
    let table = CharacterTable::new(&group);
    let w = NetworkWeights::analytic(&table);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let target: Vec<C64> =
        (0..8).map(|_| C64::new(rng.sample(StandardNormal), 0.0)).collect();
    let cfg = AttackConfig { candidates: 1, max_iters: 64, ..AttackConfig::default() };
    c.bench_function("attack_64_iterations", |b| {
        b.iter(|| attack(&w, &group, std::hint::black_box(&target), &cfg).unwrap())
    });
}

fn bench_cayley_recovery(c: &mut Criterion) {
    let group = FiniteAbelianGroup::new(&[8]).unwrap();
    let w = NetworkWeights::analytic(&CharacterTable::new(&group));
    c.bench_function("cayley_recovery_8", |b| {
        b.iter(|| {
            let report = cayley_from_irreps(std::hint::black_box(&w));
            find_isomorphism(report.table().unwrap(), &group).unwrap().unwrap()
        })
    });
}

criterion_group!(
    benches,
    bench_character_table,
    bench_analytic_bispectrum,
    bench_forward,
    bench_loss_gradient,
    bench_attack_iterations,
    bench_cayley_recovery
);
criterion_main!(benches);
