use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use lofa_bench::wc_scale_free;
use lofa_core::graph::line_graph;
use lofa_core::{exact_spread, seeded_rng, CascadeEnvironment, Simulator};

fn single_cascade(c: &mut Criterion) {
    let mut group = c.benchmark_group("cascade");
    for n in [200, 2000] {
        let g = wc_scale_free(n, 3, 1);
        let seeds = [0, 1, 2, 3];
        let mut sim = Simulator::new(n);
        let mut rng = seeded_rng(7, 0);
        group.bench_with_input(BenchmarkId::new("scale_free_k4", n), &g, |b, g| {
            b.iter(|| sim.run(g, black_box(&seeds), &mut rng).unwrap().len())
        });
    }
    group.finish();
}

fn environment_plays(c: &mut Criterion) {
    let g = wc_scale_free(200, 3, 1);
    c.bench_function("mean_of_plays/m=100", |b| {
        b.iter(|| {
            let mut env = CascadeEnvironment::new(&g, 100, seeded_rng(3, 0));
            env.mean_of_plays(black_box(&[0, 5, 9]), 100).unwrap()
        })
    });
}

fn exact_enumeration(c: &mut Criterion) {
    let g = line_graph(13, 0.5).unwrap();
    c.bench_function("exact_spread/line13", |b| b.iter(|| exact_spread(&g, black_box(&[0, 6])).unwrap()));
}

criterion_group!(benches, single_cascade, environment_plays, exact_enumeration);
criterion_main!(benches);
