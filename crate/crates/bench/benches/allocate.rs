use circalloc::alloc::{build_problem, SolverTolerances};
use circalloc::circuits::{disaggregate, Disaggregation};
use circalloc::utility::AlphaFairness;
use circalloc_bench::{experiment, history_family, realtime_family};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn allocation(c: &mut Criterion) {
    let exp = experiment();
    let mut group = c.benchmark_group("allocate");
    group.sample_size(10);
    for alpha in [0.0, 1.0, 2.0, 32.0] {
        let family = realtime_family(&exp, alpha);
        group.bench_with_input(BenchmarkId::new("realtime", alpha), &family, |b, f| {
            b.iter(|| {
                build_problem(&exp.topology, f, AlphaFairness::new(alpha).unwrap(), SolverTolerances::default())
                    .unwrap()
                    .solve()
                    .unwrap()
            })
        });
    }
    let family = history_family(&exp, 2.0);
    group.bench_function("history/2", |b| {
        b.iter(|| {
            build_problem(&exp.topology, &family, AlphaFairness::new(2.0).unwrap(), SolverTolerances::default())
                .unwrap()
                .solve()
                .unwrap()
        })
    });
    group.finish();
}

fn disaggregation(c: &mut Criterion) {
    let exp = experiment();
    let family = realtime_family(&exp, 2.0);
    let r = build_problem(&exp.topology, &family, family.alpha(), SolverTolerances::default())
        .unwrap()
        .solve()
        .unwrap();
    let mut group = c.benchmark_group("disaggregate");
    for (name, method) in [("greedy", Disaggregation::Greedy), ("proportional", Disaggregation::Proportional)] {
        group.bench_function(name, |b| {
            b.iter(|| disaggregate(&exp.topology, &r.flows, &r.demand, method, None).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, allocation, disaggregation);
criterion_main!(benches);
