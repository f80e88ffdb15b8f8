//! Shared helpers for integration tests: a single-machine-infinite-bus
//! problem built by hand and a central-difference Jacobian oracle that stays
//! independent of the analytic stamping path.
#![allow(dead_code)] // each test binary uses its own subset

use nalgebra::DMatrix;
use num_complex::Complex64;
use tstab_core::machines::{
    genrou_initialize, ExciterModel, ExciterParams, GenrouModel, GenrouParams, GovParams,
    GovernorModel, MachinePort,
};
use tstab_core::network::{BusKind, BusRecord, LineRecord, LineStatus, LoadModel, NetworkData, NetworkModel};
use tstab_core::powerflow::{nr_powerflow, GenDispatch};
use tstab_core::problem::{assemble_problem, DaeProblem, Model};

pub fn genrou_params_system_base() -> GenrouParams {
    GenrouParams {
        xd: 1.8,
        xq: 1.7,
        xdp: 0.3,
        xqp: 0.55,
        xpp: 0.25,
        xl: 0.2,
        ra: 0.0025,
        td0p: 8.0,
        tq0p: 0.4,
        td0pp: 0.03,
        tq0pp: 0.05,
        h: 6.5,
        d: 2.0,
    }
}

pub struct SmibOptions {
    pub gen_p: f64,
    pub d: f64,
    pub reduced: bool,
    pub with_controls: bool,
}

impl Default for SmibOptions {
    fn default() -> Self {
        Self {
            gen_p: 0.5,
            d: 2.0,
            reduced: false,
            with_controls: true,
        }
    }
}

/// One machine on a PV bus against a slack bus over a short line; the
/// machine is back-initialized from the power flow so the assembled problem
/// starts at equilibrium.
pub fn smib_problem(opts: &SmibOptions) -> DaeProblem {
    let net = NetworkData {
        buses: vec![
            BusRecord {
                id: "1".into(),
                kind: BusKind::Pv,
                v0: 1.03,
                theta0: 0.0,
                p_load: 0.0,
                q_load: 0.0,
            },
            BusRecord {
                id: "2".into(),
                kind: BusKind::Slack,
                v0: 1.0,
                theta0: 0.0,
                p_load: 0.2,
                q_load: 0.05,
            },
        ],
        lines: vec![LineRecord {
            id: "L1".into(),
            from: 0,
            to: 1,
            r: 0.01,
            x: 0.2,
            b_shunt: 0.02,
            status: LineStatus::In,
        }],
    };
    let sol = nr_powerflow(&net, &[GenDispatch { bus: 0, p_set: opts.gen_p }], 1e-10, 20).unwrap();

    let mut params = genrou_params_system_base();
    params.d = opts.d;
    if opts.reduced {
        params.td0pp = 0.0;
        params.tq0pp = 0.0;
    }
    let v = sol.voltage_phasor(0);
    let s = Complex64::new(sol.gen_p[0], sol.gen_q[0]);
    let state = genrou_initialize(&params, v, s).unwrap();

    let mut models: Vec<Box<dyn Model>> = Vec::new();
    let (vf_port, tm_port) = if opts.with_controls {
        (
            MachinePort::Var("exc1.vf".into()),
            MachinePort::Var("gov1.ll.y".into()),
        )
    } else {
        (MachinePort::Const(state.vf0), MachinePort::Const(state.tm0))
    };
    models.push(Box::new(
        GenrouModel::new(
            "gen1",
            params,
            2.0 * std::f64::consts::PI * 60.0,
            "1",
            vf_port,
            tm_port,
            state,
        )
        .unwrap(),
    ));
    if opts.with_controls {
        models.push(Box::new(
            ExciterModel::new("exc1", ExciterParams { ka: 50.0, ta: 0.05 }, "1", sol.v[0], state.vf0)
                .unwrap(),
        ));
        models.push(Box::new(
            GovernorModel::new(
                "gov1",
                GovParams { r: 0.05, t1: 0.5, t2: 1.0, t3: 2.0 },
                "gen1",
                state.tm0,
            )
            .unwrap(),
        ));
    }
    models.push(Box::new(
        NetworkModel::new(net, LoadModel::Impedance, sol.voltages_rect()).with_infinite_bus("2"),
    ));
    assemble_problem(models).unwrap()
}

/// Two machines over one line with a mid load split onto bus 2. Both
/// generating buses carry machines, so no angle reference is pinned.
pub fn two_machine_problem() -> DaeProblem {
    let net = NetworkData {
        buses: vec![
            BusRecord {
                id: "1".into(),
                kind: BusKind::Pv,
                v0: 1.02,
                theta0: 0.0,
                p_load: 0.0,
                q_load: 0.0,
            },
            BusRecord {
                id: "2".into(),
                kind: BusKind::Slack,
                v0: 1.0,
                theta0: 0.0,
                p_load: 0.9,
                q_load: 0.2,
            },
        ],
        lines: vec![LineRecord {
            id: "L1".into(),
            from: 0,
            to: 1,
            r: 0.01,
            x: 0.15,
            b_shunt: 0.02,
            status: LineStatus::In,
        }],
    };
    let dispatch = [
        GenDispatch { bus: 0, p_set: 0.45 },
        GenDispatch { bus: 1, p_set: 0.0 },
    ];
    let sol = nr_powerflow(&net, &dispatch, 1e-10, 20).unwrap();

    let mut models: Vec<Box<dyn Model>> = Vec::new();
    for (i, d) in dispatch.iter().enumerate() {
        let gen_id = format!("gen{}", i + 1);
        let mut params = genrou_params_system_base();
        params.h = if i == 0 { 6.5 } else { 4.0 };
        let v = sol.voltage_phasor(d.bus);
        let s = Complex64::new(sol.gen_p[i], sol.gen_q[i]);
        let state = genrou_initialize(&params, v, s).unwrap();
        let bus_id = net.buses[d.bus].id.clone();
        models.push(Box::new(
            GenrouModel::new(
                &gen_id,
                params,
                2.0 * std::f64::consts::PI * 60.0,
                &bus_id,
                MachinePort::Const(state.vf0),
                MachinePort::Const(state.tm0),
                state,
            )
            .unwrap(),
        ));
    }
    models.push(Box::new(NetworkModel::new(
        net,
        LoadModel::Impedance,
        sol.voltages_rect(),
    )));
    assemble_problem(models).unwrap()
}

/// Dense [[fx, fy], [gx, gy]] from the analytic stamps.
pub fn analytic_dense(p: &DaeProblem, x: &[f64], y: &[f64], u: &[f64], t: f64) -> DMatrix<f64> {
    let n = p.n_diff();
    let m = p.n_alg();
    let mut ws = p.jacobian_workspace();
    p.eval_jacobians(x, y, u, t, &mut ws).unwrap();
    let mut full = DMatrix::zeros(n + m, n + m);
    ws.fx.scatter_add(&mut full, 1.0, 0, 0);
    ws.fy.scatter_add(&mut full, 1.0, 0, n);
    ws.gx.scatter_add(&mut full, 1.0, n, 0);
    ws.gy.scatter_add(&mut full, 1.0, n, n);
    full
}

/// Central-difference Jacobian columns against the analytic blocks; returns
/// the worst relative error (denominator max(1, |analytic|)).
pub fn fd_jacobian_worst_rel(p: &DaeProblem, x: &[f64], y: &[f64], u: &[f64], t: f64) -> f64 {
    let n = p.n_diff();
    let m = p.n_alg();
    let analytic = analytic_dense(p, x, y, u, t);
    let mut worst: f64 = 0.0;

    let mut xs = x.to_vec();
    let mut ys = y.to_vec();
    for col in 0..n + m {
        let base = if col < n { xs[col] } else { ys[col - n] };
        let h = 1e-6 * base.abs().max(1.0);
        let set = |xs: &mut [f64], ys: &mut [f64], v: f64| {
            if col < n {
                xs[col] = v;
            } else {
                ys[col - n] = v;
            }
        };
        set(&mut xs, &mut ys, base + h);
        let (fp, gp) = p.eval_residuals(&xs, &ys, u, t).unwrap();
        set(&mut xs, &mut ys, base - h);
        let (fm, gm) = p.eval_residuals(&xs, &ys, u, t).unwrap();
        set(&mut xs, &mut ys, base);

        for row in 0..n + m {
            let fd = if row < n {
                (fp[row] - fm[row]) / (2.0 * h)
            } else {
                (gp[row - n] - gm[row - n]) / (2.0 * h)
            };
            let an = analytic[(row, col)];
            let rel = (an - fd).abs() / an.abs().max(1.0);
            worst = worst.max(rel);
        }
    }
    worst
}
