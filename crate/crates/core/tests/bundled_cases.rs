//! Behavior of the bundled cases: power-flow convergence, consistent
//! initialization, and the switching scenario.

mod common;

use std::path::PathBuf;

use tstab_core::case::{load_case, SystemCase};
use tstab_core::powerflow::init_dynamics;
use tstab_core::solver::{
    integrate, EventSchedule, NewtonConfig, StepController, StepperKind,
};

pub fn case_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../cases")
        .join(name)
}

pub fn kundur() -> SystemCase {
    load_case(case_path("kundur_two_area.json")).unwrap()
}

pub fn two_machine() -> SystemCase {
    load_case(case_path("two_machine.json")).unwrap()
}

#[test]
fn kundur_loads_with_reference_topology() {
    let case = kundur();
    assert_eq!(case.generators.len(), 4);
    assert_eq!(case.buses.len(), 11);
    assert_eq!(case.lines.len(), 12);
    assert!(case.is_unreduced());
}

#[test]
fn kundur_power_flow_converges_quickly() {
    let case = kundur();
    let sol = tstab_core::powerflow::nr_powerflow(
        &case.network_data(),
        &case.dispatch(),
        1e-8,
        20,
    )
    .unwrap();
    assert!(sol.iterations < 10, "{} iterations", sol.iterations);
    assert!(sol.final_mismatch <= 1e-8);
    // All voltages in a sane band for the stable operating point.
    for (k, v) in sol.v.iter().enumerate() {
        assert!((0.9..=1.1).contains(v), "bus {k}: V = {v}");
    }
}

#[test]
fn kundur_initializes_consistently() {
    let sys = init_dynamics(&kundur(), 1e-8, 20).unwrap();
    assert!(sys.report.pass, "{}", sys.report);
    assert!(sys.report.f_norm <= 1e-8);
    assert!(sys.report.g_norm <= 1e-8);
    assert!(sys.warnings.is_empty(), "{:?}", sys.warnings);
    // 4 machines x 6 + 4 exciters x 1 + 4 governors x 2 states.
    assert_eq!(sys.problem.n_diff(), 36);
    // Currents (8) + governor torques (4) + bus pairs (22).
    assert_eq!(sys.problem.n_alg(), 34);
}

#[test]
fn two_machine_initializes_consistently() {
    let sys = init_dynamics(&two_machine(), 1e-8, 20).unwrap();
    assert!(sys.report.pass, "{}", sys.report);
}

#[test]
fn case_without_dynamic_elements_initializes_to_network_only() {
    let case = tstab_core::case::parse_case(
        r#"{
        "schema_version": 1,
        "name": "static_only",
        "base_mva": 100.0,
        "buses": [
            {"id": "1", "kind": "slack", "v": 1.0},
            {"id": "2", "kind": "pq"}
        ],
        "lines": [{"id": "L1", "from": "1", "to": "2", "x": 0.1}],
        "loads": [{"id": "ld", "bus": "2", "p": 0.1}],
        "simulation": {"tf": 1.0, "h": 0.01}
    }"#,
    )
    .unwrap();
    let sys = init_dynamics(&case, 1e-10, 20).unwrap();
    assert_eq!(sys.problem.n_diff(), 0);
    assert_eq!(sys.problem.n_alg(), 4);
    assert!(sys.report.pass, "{}", sys.report);
}

#[test]
fn constant_power_load_model_initializes_and_matches_fd() {
    use rand::{Rng, SeedableRng};
    let mut case = two_machine();
    case.load_model = tstab_core::case::LoadModelSpec::Power;
    let sys = init_dynamics(&case, 1e-10, 20).unwrap();
    assert!(sys.report.pass, "{}", sys.report);

    let p = &sys.problem;
    let init = p.initial().clone();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    for _ in 0..5 {
        let x: Vec<f64> = init.x.iter().map(|v| v + rng.gen_range(-0.01..0.01)).collect();
        let y: Vec<f64> = init.y.iter().map(|v| v + rng.gen_range(-0.01..0.01)).collect();
        let worst = common::fd_jacobian_worst_rel(p, &x, &y, &init.u, 0.0);
        assert!(worst <= 1e-5, "constant-power Jacobian off by {worst:.3e}");
    }

    // The disturbed run completes with power loads kept in g.
    let traj = integrate(
        p,
        (0.0, 1.0),
        StepperKind::Trapezoid,
        &StepController::fixed(1e-3),
        &NewtonConfig::with_tol(1e-8),
        &case.event_schedule(),
    )
    .unwrap();
    assert_eq!(traj.stats.steps_accepted, 1000);
}

#[test]
fn kundur_zero_disturbance_run_holds_equilibrium() {
    let sys = init_dynamics(&kundur(), 1e-10, 20).unwrap();
    let p = &sys.problem;
    let init = p.initial().clone();
    let traj = integrate(
        p,
        (0.0, 1.0),
        StepperKind::Trapezoid,
        &StepController::fixed(1e-3),
        &NewtonConfig::with_tol(1e-10),
        &EventSchedule::empty(),
    )
    .unwrap();
    let mut start = init.x.clone();
    start.extend_from_slice(&init.y);
    let mut drift = 0.0f64;
    let mut worst = 0;
    for (i, (a, b)) in traj.last_row().unwrap().iter().zip(&start).enumerate() {
        if (a - b).abs() > drift {
            drift = (a - b).abs();
            worst = i;
        }
    }
    assert!(
        drift <= 1e-6,
        "equilibrium drift {drift:.3e} at {}",
        p.layout().var(worst).name
    );
}

#[test]
fn kundur_trip_reconnect_scenario_decays() {
    let case = kundur();
    let sys = init_dynamics(&case, 1e-10, 20).unwrap();
    let p = &sys.problem;
    let traj = integrate(
        p,
        (0.0, 5.0),
        StepperKind::Trapezoid,
        &StepController::fixed(1e-3),
        &NewtonConfig::with_tol(1e-8),
        &case.event_schedule(),
    )
    .unwrap();
    assert_eq!(traj.events().len(), 2);

    // Relative rotor angles vs machine 1: the transient must ring down.
    let delta_cols: Vec<usize> = (1..=4)
        .map(|i| p.layout().index_of(&format!("G{i}.delta")).unwrap())
        .collect();
    let window_max = |lo: f64, hi: f64| -> f64 {
        let mut m = 0.0f64;
        for (t, row) in traj.iter_rows() {
            if t < lo || t > hi {
                continue;
            }
            for &col in &delta_cols[1..] {
                m = m.max((row[col] - row[delta_cols[0]]).abs());
            }
        }
        m
    };
    let early = window_max(1.0, 2.0);
    let late = window_max(4.0, 5.0);
    assert!(
        late < early,
        "rotor-angle envelope did not decay: [1,2]s max {early:.6}, [4,5]s max {late:.6}"
    );

    // Differential states stay continuous across both events.
    let n = p.n_diff();
    let times = traj.times();
    for ev_t in [0.1, 0.15] {
        let idx = times.iter().position(|&t| (t - ev_t).abs() < 1e-9).unwrap();
        let before = traj.row(idx - 1);
        let at = traj.row(idx);
        for j in 0..n {
            let jump = (at[j] - before[j]).abs();
            assert!(
                jump <= 1.0,
                "state {} jumped {jump} across the event",
                p.layout().var(j).name
            );
        }
    }
}
