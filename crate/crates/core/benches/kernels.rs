//! Parallel-vs-sequential comparison of the data-parallel kernels.
//!
//! The `default` variants run on the execution driver selected at compile
//! time (rayon under the default `parallel` feature); the `sequential`
//! variants pin the always-available sequential fallback. Rebuilding with
//! `--no-default-features` makes the default variants sequential too,
//! which criterion's saved baselines will show as a regression on the
//! parallel-friendly kernels.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use paynet_core::dataset::{schema_hash, ColumnDef, FeatureBlock, FeatureKind, FeatureMatrix};
use paynet_core::features::{
    betweenness_centrality, betweenness_centrality_seq, extract_features_batch,
    extract_features_batch_seq, FeatureOptions,
};
use paynet_core::graph::{QuarterlyGraph, SquareMatrix};
use paynet_core::model::{fit_forest, ForestParams, TreeParams};
use paynet_core::quarter::Quarter;

fn random_graph(n: usize, density: f64, seed: u64) -> QuarterlyGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = SquareMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            if i != j && rng.gen::<f64>() < density {
                m.set(i, j, rng.gen::<f64>() * 1.0e6 + 1.0);
            }
        }
    }
    QuarterlyGraph::from_matrix(Quarter::new(2020, 1).unwrap(), m).unwrap()
}

fn bench_betweenness(c: &mut Criterion) {
    let g = random_graph(89, 0.7, 7);
    let mut group = c.benchmark_group("betweenness_89");
    group.bench_function(BenchmarkId::new("default", "unweighted"), |b| {
        b.iter(|| betweenness_centrality(&g, false))
    });
    group.bench_function(BenchmarkId::new("sequential", "unweighted"), |b| {
        b.iter(|| betweenness_centrality_seq(&g, false))
    });
    group.bench_function(BenchmarkId::new("default", "weighted"), |b| {
        b.iter(|| betweenness_centrality(&g, true))
    });
    group.bench_function(BenchmarkId::new("sequential", "weighted"), |b| {
        b.iter(|| betweenness_centrality_seq(&g, true))
    });
    group.finish();
}

fn bench_feature_batch(c: &mut Criterion) {
    let graphs: Vec<QuarterlyGraph> =
        (0..8).map(|i| random_graph(89, 0.7, 100 + i as u64)).collect();
    let opts = FeatureOptions::default();
    let mut group = c.benchmark_group("feature_batch_8q");
    group.sample_size(10);
    group.bench_function("default", |b| b.iter(|| extract_features_batch(&graphs, &opts)));
    group.bench_function("sequential", |b| b.iter(|| extract_features_batch_seq(&graphs, &opts)));
    group.finish();
}

fn bench_forest(c: &mut Criterion) {
    let n_rows = 20_000;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let defs: Vec<ColumnDef> = (0..12)
        .map(|i| ColumnDef {
            name: format!("f{i}"),
            block: FeatureBlock::Network,
            kind: FeatureKind::Numeric,
        })
        .collect();
    let cols: Vec<Vec<f64>> = (0..12)
        .map(|_| (0..n_rows).map(|_| rng.gen::<f64>()).collect())
        .collect();
    let y: Vec<f64> = (0..n_rows)
        .map(|r| cols[0][r] * 2.0 - cols[1][r] + 0.1 * rng.gen::<f64>())
        .collect();
    let columns: Vec<(&ColumnDef, &[f64])> =
        defs.iter().zip(&cols).map(|(d, c)| (d, c.as_slice())).collect();
    let matrix = FeatureMatrix { columns, schema_hash: schema_hash(defs.iter()), n_rows };
    let params = ForestParams {
        n_trees: 24,
        bootstrap: true,
        tree: TreeParams {
            max_depth: Some(8),
            min_leaf: 20,
            feature_subsample: 1.0 / 3.0,
            max_bins: 255,
        },
        seed: 1,
    };

    let mut group = c.benchmark_group("forest_fit_20k");
    group.sample_size(10);
    group.bench_function("default", |b| b.iter(|| fit_forest(&matrix, &y, &params).unwrap()));
    group.finish();
}

criterion_group!(benches, bench_betweenness, bench_feature_batch, bench_forest);
criterion_main!(benches);
