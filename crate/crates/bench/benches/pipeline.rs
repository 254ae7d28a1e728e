use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use lsqiga::cases::{example1_case, example2_case};
use lsqiga::forward::{assemble_forward, solve_forward, ForwardConfig};
use lsqiga::inverse::{default_observation, solve_blocks, ControlSpace, InverseConfig, InverseOperators, SolveStrategy};
use lsqiga::solve::factor_and_solve;
use lsqiga::SolveOptions;

fn forward_config(level: u32) -> ForwardConfig {
    ForwardConfig {
        degree: 2,
        level,
        alpha2: 1.0,
        k: 1,
    }
}

fn forward(c: &mut Criterion) {
    let case = example1_case(1).unwrap();
    let opts = SolveOptions::default();
    let mut group = c.benchmark_group("forward");
    group.sample_size(10);
    for level in [4, 5, 6] {
        let cfg = forward_config(level);
        group.bench_with_input(BenchmarkId::new("assemble", level), &cfg, |b, cfg| {
            b.iter(|| assemble_forward(black_box(cfg), case.f(), case.g()).unwrap())
        });
        let sys = assemble_forward(&cfg, case.f(), case.g()).unwrap();
        group.bench_with_input(BenchmarkId::new("factor_and_solve", level), &sys.system, |b, sys| {
            b.iter(|| factor_and_solve(black_box(sys), &opts).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("end_to_end", level), &cfg, |b, cfg| {
            b.iter(|| solve_forward(black_box(cfg), case.f(), case.g(), &opts).unwrap())
        });
    }
    group.finish();
}

fn inverse(c: &mut Criterion) {
    let case = example2_case(1).unwrap();
    let opts = SolveOptions::default();
    let mut group = c.benchmark_group("inverse");
    group.sample_size(10);
    for control in [ControlSpace::Reduced, ControlSpace::MaxContinuity] {
        let cfg = InverseConfig {
            degree: 2,
            level: 5,
            beta2: 1e-2,
            gamma2: 1e2,
            k: 1,
            control,
            observation: default_observation(),
        };
        let ops = InverseOperators::assemble(&cfg, case.u_d(), case.f_p()).unwrap();
        group.bench_function(BenchmarkId::new("assemble", control.name()), |b| {
            b.iter(|| InverseOperators::assemble(black_box(&cfg), case.u_d(), case.f_p()).unwrap())
        });
        group.bench_function(BenchmarkId::new("solve", control.name()), |b| {
            b.iter(|| solve_blocks(black_box(&ops), cfg.beta2, cfg.gamma2, SolveStrategy::Auto, &opts).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, forward, inverse);
criterion_main!(benches);
