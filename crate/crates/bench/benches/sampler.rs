use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use spatrpm::experiment::{generate_ushape_data, select_hyperparams};
use spatrpm::likelihood::block_stats;
use spatrpm::metrics::{crps, epsilon_n};
use spatrpm::sampler::Diagnostics;
use spatrpm::tree::{prim_mst, sample_rst};
use spatrpm::{BlockGrid, EdgeWeights, Likelihood, ModelConfig, Sampler, SamplerConfig};

fn setup() -> (spatrpm::Dataset, BlockGrid, f64) {
    let hyper = select_hyperparams(4000, 5.0, 1.0, 0.1, 0.5).unwrap();
    let data = generate_ushape_data(4000, 1).unwrap();
    let (grid, kept, _) = BlockGrid::build_largest_component(&data.dataset, hyper.k).unwrap();
    (kept, grid, hyper.log_lambda)
}

fn bench_tree(c: &mut Criterion) {
    let (_, grid, _) = setup();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    c.bench_function("prim_mst K=38", |b| {
        b.iter_batched(
            || EdgeWeights::uniform(grid.graph(), &mut rng),
            |w| prim_mst(grid.graph(), &w).unwrap(),
            BatchSize::SmallInput,
        )
    });
}

fn bench_likelihood(c: &mut Criterion) {
    let (ds, grid, _) = setup();
    let lik = Likelihood::for_dataset(&ModelConfig::default(), &ds).unwrap();
    let mut total = block_stats(&ds, &grid)[0].clone();
    for s in &block_stats(&ds, &grid)[1..] {
        total.add(s);
    }
    c.bench_function("cluster term d=2", |b| b.iter(|| lik.term(&total)));
}

fn bench_sampler(c: &mut Criterion) {
    let (ds, grid, log_lambda) = setup();
    let config = SamplerConfig {
        log_lambda,
        ..Default::default()
    };
    let sampler = Sampler::new(&ds, &grid, &ModelConfig::default(), &config).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut state = sampler.initial_state(&mut rng).unwrap();
    let mut diag = Diagnostics::default();
    for _ in 0..5000 {
        sampler.step(&mut state, &mut rng, &mut diag).unwrap();
    }
    c.bench_function("sampler step n=4000", |b| {
        b.iter(|| sampler.step(&mut state, &mut rng, &mut diag).unwrap())
    });
    c.bench_function("random tree K=38", |b| b.iter(|| sample_rst(grid.graph(), &mut rng).unwrap()));
}

fn bench_metrics(c: &mut Criterion) {
    let a: Vec<usize> = (0..4000).map(|i| i % 3).collect();
    let b: Vec<usize> = (0..4000).map(|i| (i / 7) % 4).collect();
    c.bench_function("epsilon_n n=4000", |bench| bench.iter(|| epsilon_n(&a, &b).unwrap()));
    let ens: Vec<f64> = (0..3000).map(|i| ((i * 37) % 101) as f64 / 10.0).collect();
    c.bench_function("crps M=3000", |bench| bench.iter(|| crps(&ens, 4.2).unwrap()));
}

criterion_group!(benches, bench_tree, bench_likelihood, bench_sampler, bench_metrics);
criterion_main!(benches);
