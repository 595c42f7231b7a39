use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use hpkm_core::fixtures::{circle_entry_exit, reference_circle, reference_poses, square_program};
use hpkm_core::{
    plan_circular, plan_gcode_program, plan_linear_tour, run_sim, MachineParams, PlanOptions,
    SimConfig,
};

fn planning(c: &mut Criterion) {
    let p = MachineParams::default();
    let opts = PlanOptions::default();
    let tour = reference_poses();
    let (entry, exit) = circle_entry_exit();
    let circle = reference_circle();
    let program = square_program();

    let mut group = c.benchmark_group("plan");
    group.sample_size(20);
    group.bench_function("reference_tour", |b| {
        b.iter(|| plan_linear_tour(black_box(&tour), &p, &opts).unwrap())
    });
    group.bench_function("reference_circle", |b| {
        b.iter(|| plan_circular(black_box(&circle), &entry, &exit, &p, &opts).unwrap())
    });
    group.bench_function("square_program", |b| {
        b.iter(|| plan_gcode_program(black_box(&program), &tour[0], &p, 0.01, &opts).unwrap())
    });
    group.finish();

    let plan = plan_linear_tour(&tour, &p, &opts).unwrap();
    let sim = SimConfig::default();
    let mut group = c.benchmark_group("sim");
    group.sample_size(20);
    group.bench_function("reference_tour", |b| {
        b.iter(|| run_sim(black_box(&plan.samples), &p, &sim).unwrap())
    });
    group.finish();
}

criterion_group!(benches, planning);
criterion_main!(benches);
