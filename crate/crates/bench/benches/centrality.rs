use blognet::centrality::{
    betweenness_centrality, closeness_centrality, pagerank, PageRankParams,
};
use blognet_bench::bench_network;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn bench_measures(c: &mut Criterion) {
    let mut group = c.benchmark_group("centrality");
    for n in [500usize, 2000] {
        let net = bench_network(n);
        group.bench_with_input(BenchmarkId::new("betweenness", n), &net, |b, net| {
            b.iter(|| betweenness_centrality(net))
        });
        group.bench_with_input(BenchmarkId::new("closeness", n), &net, |b, net| {
            b.iter(|| closeness_centrality(net))
        });
        let params = PageRankParams::default();
        group.bench_with_input(BenchmarkId::new("pagerank", n), &net, |b, net| {
            b.iter(|| pagerank(net, &params).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_measures);
criterion_main!(benches);
