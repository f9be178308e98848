use bayescp_core::approx::{algorithm1_step, MarginalState};
use bayescp_core::exact::{build_tex, exact_initial, exact_step};
use bayescp_core::graph::{sample_changes, sample_frame, theta_from_frame};
use bayescp_core::{bayes_update, Network, ProbVec, WeightVec};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn kernel_construction(c: &mut Criterion) {
    let mut group = c.benchmark_group("build_tex");
    for d in [4usize, 8, 12] {
        let rhos = vec![0.1; d];
        group.bench_with_input(BenchmarkId::from_parameter(d), &rhos, |b, r| {
            b.iter(|| build_tex(std::hint::black_box(r)).unwrap());
        });
    }
    group.finish();
}

fn filter_steps(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut group = c.benchmark_group("step");
    for d in [4usize, 8] {
        let net = Network::random_tree(d, &mut rng).unwrap();
        let changes = sample_changes(&net, &mut rng).unwrap();
        let frame = sample_frame(&net, &changes, 5, &mut rng).unwrap();
        let theta = theta_from_frame(&net, &frame).unwrap();
        let kernel = build_tex(&net.rhos()).unwrap();
        let y = exact_initial(d).unwrap();
        group.bench_with_input(BenchmarkId::new("exact", d), &d, |b, _| {
            b.iter(|| exact_step(&y, &theta, &kernel).unwrap());
        });
        let state = MarginalState::initial(d);
        group.bench_with_input(BenchmarkId::new("marginal", d), &d, |b, _| {
            b.iter(|| algorithm1_step(&state, &frame, &net).unwrap());
        });
    }
    for d in [32usize, 128] {
        let net = Network::random_tree(d, &mut rng).unwrap();
        let changes = sample_changes(&net, &mut rng).unwrap();
        let frame = sample_frame(&net, &changes, 5, &mut rng).unwrap();
        let state = MarginalState::initial(d);
        group.bench_with_input(BenchmarkId::new("marginal", d), &d, |b, _| {
            b.iter(|| algorithm1_step(&state, &frame, &net).unwrap());
        });
    }
    group.finish();
}

fn bayes(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let d = 10;
    let x = ProbVec::sample_uniform(d, &mut rng).unwrap();
    let theta = WeightVec::from_log(
        d,
        (0..1 << d).map(|_| rng.random_range(-3.0..3.0)).collect(),
    )
    .unwrap();
    c.bench_function("bayes_update/10", |b| {
        b.iter(|| bayes_update(&x, &theta).unwrap())
    });
}

criterion_group!(benches, kernel_construction, filter_steps, bayes);
criterion_main!(benches);
