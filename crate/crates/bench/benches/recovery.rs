use std::hint::black_box;

use bkic::channel::{realize_fading, synthesize, FadingModel, TargetGain};
use bkic::rbp::{Estimate, PowerBound, RbpRecovery};
use bkic::{combine, generate_stream, CombinedSignal, Recovery, Role, Smoothing, SymbolStream};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn frame(n: usize, alpha: f64, sigma2: f64) -> (Vec<f64>, SymbolStream) {
    let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
    let x = generate_stream(2, n, Role::Target, &mut rng).unwrap();
    let i = generate_stream(2, n, Role::Interferer, &mut rng).unwrap();
    let model = if alpha == 1.0 {
        FadingModel::block_unit()
    } else {
        FadingModel::gauss_markov(alpha, 1.0)
    };
    let fading = realize_fading(&model, n, &mut rng).unwrap();
    let f = synthesize(
        &x,
        &i,
        &fading,
        &TargetGain::Constant(1.0),
        sigma2,
        &mut rng,
    )
    .unwrap();
    (f.r, i)
}

fn bench_combine_and_smooth(c: &mut Criterion) {
    let mut group = c.benchmark_group("smoothing");
    for n in [100usize, 1000] {
        let (r, i) = frame(n, 1.0, 0.1);
        group.bench_with_input(BenchmarkId::new("combine", n), &n, |b, _| {
            b.iter(|| combine(black_box(&r), &i, 0).unwrap())
        });
        let combined = combine(&r, &i, 0).unwrap();
        group.bench_with_input(BenchmarkId::new("recover", n), &n, |b, _| {
            b.iter(|| Smoothing.recover(black_box(&combined), &i).unwrap())
        });
    }
    group.finish();
}

fn rbp(block: bool, step: f64) -> RbpRecovery {
    RbpRecovery {
        p_max: PowerBound::MaxReceived,
        sigma2: 0.1,
        sigma_delta2: if block { 0.0 } else { 0.001 },
        step,
        block_fading: block,
        estimate: Estimate::Argmax,
    }
}

fn bench_rbp(c: &mut Criterion) {
    let mut group = c.benchmark_group("rbp");
    group.sample_size(20);
    let cases: [(&str, f64, bool, f64); 3] = [
        ("block", 1.0, true, 0.025),
        ("block_fine", 1.0, true, 0.0125),
        ("continuous", 0.999, false, 0.0125),
    ];
    for (name, alpha, block, step) in cases {
        let (r, i) = frame(100, alpha, 0.1);
        let combined: CombinedSignal = combine(&r, &i, 0).unwrap();
        let strategy = rbp(block, step);
        group.bench_function(BenchmarkId::new(name, 100), |b| {
            b.iter(|| strategy.recover(black_box(&combined), &i).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_combine_and_smooth, bench_rbp);
criterion_main!(benches);
