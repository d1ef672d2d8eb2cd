use criterion::{black_box, criterion_group, criterion_main, Criterion};

use graphbandits::contextual::{ContextVector, EdgeEstimator};
use graphbandits::harness::SpiderWebSpec;
use graphbandits::{
    all_pairs_shortest_paths, generate_graph, generate_spider_web, max_diameter_spanning_tree,
    min_diameter_spanning_tree, run_nne, BanditEnvironment, GraphKind, NodeRewards, NoiseModel,
    PacParams,
};

fn bench_shortest_paths(c: &mut Criterion) {
    let web = generate_spider_web(&SpiderWebSpec::new(3, 5).unwrap());
    let er = generate_graph(&GraphKind::ErdosRenyiConnected {
        nodes: 60,
        edge_prob: 0.15,
        seed: 7,
    })
    .unwrap();
    c.bench_function("apsp_spider_web_15", |b| {
        b.iter(|| all_pairs_shortest_paths(black_box(&web)))
    });
    c.bench_function("apsp_erdos_renyi_60", |b| {
        b.iter(|| all_pairs_shortest_paths(black_box(&er)))
    });
}

fn bench_spanning_trees(c: &mut Criterion) {
    let web = generate_spider_web(&SpiderWebSpec::new(3, 5).unwrap());
    c.bench_function("min_diameter_tree_spider_web", |b| {
        b.iter(|| min_diameter_spanning_tree(black_box(&web)))
    });
    c.bench_function("max_diameter_tree_spider_web", |b| {
        b.iter(|| max_diameter_spanning_tree(black_box(&web)))
    });
}

fn bench_nne(c: &mut Criterion) {
    let web = generate_spider_web(&SpiderWebSpec::new(3, 5).unwrap());
    let params = PacParams::new(0.5, 0.25).unwrap();
    c.bench_function("run_nne_spider_web_eps05", |b| {
        b.iter(|| {
            let rewards = NodeRewards::uniform(15, 3).unwrap();
            let mut env =
                BanditEnvironment::new(web.clone(), rewards, NoiseModel::UniformBounded, 4)
                    .unwrap();
            run_nne(&mut env, black_box(&web), &params).unwrap()
        })
    });
}

fn bench_estimator(c: &mut Criterion) {
    let x = ContextVector::basis(8, 3);
    c.bench_function("estimator_update_and_width_d8", |b| {
        let mut est = EdgeEstimator::new(8);
        b.iter(|| {
            est.update(&x, 0.3);
            black_box(est.confidence_width(&x, 0.1, est.pulls().max(1)));
        })
    });
}

criterion_group!(
    benches,
    bench_shortest_paths,
    bench_spanning_trees,
    bench_nne,
    bench_estimator
);
criterion_main!(benches);
