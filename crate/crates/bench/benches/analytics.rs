use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use wedgeq_core::verification::policy_profile;
use wedgeq_core::{
    run, solve_equilibrium, wq_pk, AiRoute, BetaDensity, ErrorCurve, ManualRoute, QueueInputs, ReworkModel, RiskMap,
    RouteMoments, SignalEnvironment, SimConfig, Workload,
};

fn env(alpha: f64, beta: f64) -> SignalEnvironment {
    SignalEnvironment {
        risk_map: RiskMap {
            base: 0.02,
            amplitude: 0.88,
            gain: 10.0,
            midpoint: 0.55,
        },
        density: BetaDensity { alpha, beta },
        loss_k: 2.0,
        kappa: 2.0,
        c_w: 0.5,
        p_inf: 0.0,
        quadrature_nodes: 256,
    }
}

fn closed_form(c: &mut Criterion) {
    let q = QueueInputs::new(0.5, 1.0, RouteMoments::new(0.85, 1.625625).unwrap()).unwrap();
    c.bench_function("wq_pk", |b| b.iter(|| wq_pk(black_box(&q)).unwrap()));
}

fn signal_model(c: &mut Criterion) {
    let rework = ReworkModel::new(1.5, 4.0).unwrap();
    let e = env(5.0, 2.0);
    c.bench_function("policy_profile", |b| {
        b.iter(|| policy_profile(black_box(&e), 0.4, &rework).unwrap())
    });
    c.bench_function("solve_equilibrium", |b| {
        b.iter(|| solve_equilibrium(black_box(&e), &rework, 0.75, 1.0).unwrap())
    });
}

fn simulation(c: &mut Criterion) {
    let workload = Workload {
        lambda: 0.5,
        capacity: 1.0,
        x: 1.0,
        manual: ManualRoute::new(1.0, 0.1).unwrap(),
        ai: AiRoute::FixedReview {
            curve: ErrorCurve::new(0.15, 0.15, 1.0).unwrap(),
            rework: ReworkModel::new(7.0 / 3.0, 6.8375).unwrap(),
            review: 0.5,
        },
    };
    let cfg = SimConfig {
        n_arrivals: 100_000,
        ..SimConfig::new(workload, 42)
    };
    let mut group = c.benchmark_group("simulate");
    group.sample_size(20);
    group.bench_function("fixed_review_1e5", |b| b.iter(|| run(black_box(&cfg)).unwrap()));
    group.finish();
}

criterion_group!(benches, closed_form, signal_model, simulation);
criterion_main!(benches);
