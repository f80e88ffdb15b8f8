//! Micro-benchmarks for the hot paths: residual and Jacobian evaluation,
//! a single implicit-trapezoid step, the power flow, and a short
//! time-domain run on the bundled two-area case.

use criterion::{black_box, criterion_group, criterion_main, Criterion};

use tstab_core::case::load_case;
use tstab_core::powerflow::{init_dynamics, nr_powerflow};
use tstab_core::solver::{
    integrate, trapezoid_step, EventSchedule, NewtonConfig, StepController, StepperKind,
};

fn kundur() -> tstab_core::case::SystemCase {
    load_case(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/../../cases/kundur_two_area.json"
    ))
    .unwrap()
}

fn bench_evaluations(c: &mut Criterion) {
    let case = kundur();
    let sys = init_dynamics(&case, 1e-10, 20).unwrap();
    let p = &sys.problem;
    let init = p.initial().clone();
    let mut f_hat = vec![0.0; p.n_diff()];
    let mut g = vec![0.0; p.n_alg()];
    let mut ws = p.jacobian_workspace();

    c.bench_function("residual_eval_two_area", |b| {
        b.iter(|| {
            p.eval_residuals_into(
                black_box(&init.x),
                black_box(&init.y),
                &init.u,
                0.0,
                &mut f_hat,
                &mut g,
            )
            .unwrap();
        })
    });

    c.bench_function("jacobian_eval_two_area", |b| {
        b.iter(|| {
            p.eval_jacobians(black_box(&init.x), black_box(&init.y), &init.u, 0.0, &mut ws)
                .unwrap();
        })
    });
}

fn bench_trapezoid_step(c: &mut Criterion) {
    let case = kundur();
    let sys = init_dynamics(&case, 1e-10, 20).unwrap();
    let p = &sys.problem;
    let init = p.initial().clone();
    let (f_prev, _) = p.eval_residuals(&init.x, &init.y, &init.u, 0.0).unwrap();
    let cfg = NewtonConfig::with_tol(1e-8);

    c.bench_function("itm_step_two_area", |b| {
        b.iter(|| {
            let (x, y, iters) = trapezoid_step(
                p,
                black_box(&init.x),
                &init.y,
                &f_prev,
                &init.u,
                1e-3,
                1e-3,
                1e-3,
                &cfg,
            )
            .unwrap();
            black_box((x, y, iters));
        })
    });
}

fn bench_power_flow(c: &mut Criterion) {
    let case = kundur();
    let net = case.network_data();
    let dispatch = case.dispatch();
    c.bench_function("power_flow_two_area", |b| {
        b.iter(|| nr_powerflow(black_box(&net), &dispatch, 1e-8, 20).unwrap())
    });
}

fn bench_short_run(c: &mut Criterion) {
    let case = kundur();
    let sys = init_dynamics(&case, 1e-10, 20).unwrap();
    let p = &sys.problem;
    let mut group = c.benchmark_group("short_run");
    group.sample_size(10);
    group.bench_function("two_area_100_steps_trap", |b| {
        b.iter(|| {
            integrate(
                p,
                (0.0, 0.1),
                StepperKind::Trapezoid,
                &StepController::fixed(1e-3),
                &NewtonConfig::default(),
                &EventSchedule::empty(),
            )
            .unwrap()
        })
    });
    group.finish();
}

criterion_group!(
    benches,
    bench_evaluations,
    bench_trapezoid_step,
    bench_power_flow,
    bench_short_run
);
criterion_main!(benches);
