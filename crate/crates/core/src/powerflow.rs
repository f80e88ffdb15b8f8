//! Newton-Raphson AC power flow.
//!
//! Polar formulation with a full Jacobian refresh each iteration: PV buses
//! hold V and P, PQ buses hold P and Q, the slack bus holds V and theta. The
//! solution provides the consistent operating point that dynamic
//! initialization builds on.

use num_complex::Complex64;

use crate::error::PowerFlowError;
use crate::network::{BusKind, NetworkData};
use nalgebra::{DMatrix, DVector};

/// One generator's scheduled active power injection.
#[derive(Debug, Clone)]
pub struct GenDispatch {
    pub bus: usize,
    pub p_set: f64,
}

/// Converged operating point.
#[derive(Debug, Clone)]
pub struct PowerFlowSolution {
    /// Voltage magnitude per bus, p.u.
    pub v: Vec<f64>,
    /// Voltage angle per bus, rad.
    pub theta: Vec<f64>,
    /// Net active injection supplied by each dispatch entry (slack resolved).
    pub gen_p: Vec<f64>,
    /// Reactive injection supplied by each dispatch entry.
    pub gen_q: Vec<f64>,
    pub iterations: usize,
    pub final_mismatch: f64,
    /// Mismatch infinity norm before each iteration (ends with the
    /// converged value).
    pub mismatch_history: Vec<f64>,
}

impl PowerFlowSolution {
    pub fn voltage_phasor(&self, bus: usize) -> Complex64 {
        Complex64::from_polar(self.v[bus], self.theta[bus])
    }

    pub fn voltages_rect(&self) -> Vec<Complex64> {
        (0..self.v.len()).map(|k| self.voltage_phasor(k)).collect()
    }
}

/// Calculated injections at one point: P_i, Q_i per bus.
fn calc_injections(
    g: &DMatrix<f64>,
    b: &DMatrix<f64>,
    v: &[f64],
    theta: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let n = v.len();
    let mut p = vec![0.0; n];
    let mut q = vec![0.0; n];
    for i in 0..n {
        let mut pi = 0.0;
        let mut qi = 0.0;
        for j in 0..n {
            let th = theta[i] - theta[j];
            let (s, c) = th.sin_cos();
            pi += v[j] * (g[(i, j)] * c + b[(i, j)] * s);
            qi += v[j] * (g[(i, j)] * s - b[(i, j)] * c);
        }
        p[i] = v[i] * pi;
        q[i] = v[i] * qi;
    }
    (p, q)
}

/// Solve the AC power flow with Newton-Raphson in polar coordinates.
///
/// Starts from the bus-record guesses (flat start when they are 1.0 / 0.0).
pub fn nr_powerflow(
    net: &NetworkData,
    dispatch: &[GenDispatch],
    tol: f64,
    max_iter: usize,
) -> Result<PowerFlowSolution, PowerFlowError> {
    let n = net.buses.len();
    let ybus = net.ybus(None)?;
    let mut g = DMatrix::zeros(n, n);
    let mut b = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let y = ybus.get(i, j);
            g[(i, j)] = y.re;
            b[(i, j)] = y.im;
        }
    }

    let slack: Vec<usize> = net
        .buses
        .iter()
        .enumerate()
        .filter(|(_, bus)| bus.kind == BusKind::Slack)
        .map(|(k, _)| k)
        .collect();
    if slack.len() != 1 {
        return Err(PowerFlowError::InitFailed {
            element: "network".into(),
            message: format!("expected exactly one slack bus, found {}", slack.len()),
        });
    }

    // Scheduled injections: generation minus load.
    let mut p_sched = vec![0.0; n];
    let mut q_sched = vec![0.0; n];
    for (k, bus) in net.buses.iter().enumerate() {
        p_sched[k] -= bus.p_load;
        q_sched[k] -= bus.q_load;
    }
    for d in dispatch {
        p_sched[d.bus] += d.p_set;
    }

    let p_unknowns: Vec<usize> = (0..n).filter(|k| net.buses[*k].kind != BusKind::Slack).collect();
    let q_unknowns: Vec<usize> = (0..n).filter(|k| net.buses[*k].kind == BusKind::Pq).collect();
    let dim = p_unknowns.len() + q_unknowns.len();

    let mut v: Vec<f64> = net.buses.iter().map(|bus| bus.v0).collect();
    let mut theta: Vec<f64> = net.buses.iter().map(|bus| bus.theta0).collect();

    let mut iterations = 0usize;
    let mut mismatch_history = Vec::new();
    loop {
        let (p_calc, q_calc) = calc_injections(&g, &b, &v, &theta);
        let mut mismatch = DVector::zeros(dim);
        let mut worst = 0.0f64;
        let mut worst_bus = 0usize;
        for (r, &k) in p_unknowns.iter().enumerate() {
            let d = p_sched[k] - p_calc[k];
            mismatch[r] = d;
            if d.abs() > worst {
                worst = d.abs();
                worst_bus = k;
            }
        }
        for (r, &k) in q_unknowns.iter().enumerate() {
            let d = q_sched[k] - q_calc[k];
            mismatch[p_unknowns.len() + r] = d;
            if d.abs() > worst {
                worst = d.abs();
                worst_bus = k;
            }
        }
        mismatch_history.push(worst);

        if worst <= tol || dim == 0 {
            // Resolve the dispatch: slack picks up its bus balance; PV
            // generators supply their bus's reactive balance. Multiple
            // machines on one bus share equally.
            let mut gen_p = vec![0.0; dispatch.len()];
            let mut gen_q = vec![0.0; dispatch.len()];
            for (i, d) in dispatch.iter().enumerate() {
                let at_bus = dispatch.iter().filter(|o| o.bus == d.bus).count() as f64;
                let bus = &net.buses[d.bus];
                gen_p[i] = if bus.kind == BusKind::Slack {
                    (p_calc[d.bus] + bus.p_load) / at_bus
                } else {
                    d.p_set
                };
                gen_q[i] = (q_calc[d.bus] + bus.q_load) / at_bus;
            }
            return Ok(PowerFlowSolution {
                v,
                theta,
                gen_p,
                gen_q,
                iterations,
                final_mismatch: worst,
                mismatch_history,
            });
        }
        if iterations >= max_iter {
            return Err(PowerFlowError::NonConvergence {
                iterations,
                mismatch: worst,
                bus: net.buses[worst_bus].id.clone(),
            });
        }

        // Polar Jacobian blocks [[dP/dtheta, dP/dV], [dQ/dtheta, dQ/dV]].
        let mut jac = DMatrix::zeros(dim, dim);
        for (r, &i) in p_unknowns.iter().enumerate() {
            for (c, &j) in p_unknowns.iter().enumerate() {
                jac[(r, c)] = if i == j {
                    -q_calc[i] - b[(i, i)] * v[i] * v[i]
                } else {
                    let th = theta[i] - theta[j];
                    let (s, cth) = th.sin_cos();
                    v[i] * v[j] * (g[(i, j)] * s - b[(i, j)] * cth)
                };
            }
            for (c, &j) in q_unknowns.iter().enumerate() {
                jac[(r, p_unknowns.len() + c)] = if i == j {
                    p_calc[i] / v[i] + g[(i, i)] * v[i]
                } else {
                    let th = theta[i] - theta[j];
                    let (s, cth) = th.sin_cos();
                    v[i] * (g[(i, j)] * cth + b[(i, j)] * s)
                };
            }
        }
        for (r, &i) in q_unknowns.iter().enumerate() {
            for (c, &j) in p_unknowns.iter().enumerate() {
                jac[(p_unknowns.len() + r, c)] = if i == j {
                    p_calc[i] - g[(i, i)] * v[i] * v[i]
                } else {
                    let th = theta[i] - theta[j];
                    let (s, cth) = th.sin_cos();
                    -v[i] * v[j] * (g[(i, j)] * cth + b[(i, j)] * s)
                };
            }
            for (c, &j) in q_unknowns.iter().enumerate() {
                jac[(p_unknowns.len() + r, p_unknowns.len() + c)] = if i == j {
                    q_calc[i] / v[i] - b[(i, i)] * v[i]
                } else {
                    let th = theta[i] - theta[j];
                    let (s, cth) = th.sin_cos();
                    v[i] * (g[(i, j)] * s - b[(i, j)] * cth)
                };
            }
        }

        let delta = jac
            .lu()
            .solve(&mismatch)
            .ok_or(PowerFlowError::Singular { iteration: iterations })?;
        for (r, &k) in p_unknowns.iter().enumerate() {
            theta[k] += delta[r];
        }
        for (r, &k) in q_unknowns.iter().enumerate() {
            v[k] += delta[p_unknowns.len() + r];
        }
        iterations += 1;
    }
}

/// Everything produced by dynamic initialization.
pub struct InitializedSystem {
    pub problem: crate::problem::DaeProblem,
    pub pf: PowerFlowSolution,
    pub report: crate::problem::ConsistencyReport,
    /// Modeling diagnostics (degenerate block parameters and the like).
    pub warnings: Vec<String>,
}

/// Chain the power flow into a fully assembled, consistently initialized
/// dynamic problem: every machine, exciter, and governor is back-solved to
/// its equilibrium and loads are folded per the case's load model.
pub fn init_dynamics(
    case: &crate::case::SystemCase,
    pf_tol: f64,
    pf_max_iter: usize,
) -> Result<InitializedSystem, PowerFlowError> {
    use crate::machines::{
        genrou_initialize, ExciterModel, ExciterParams, GenrouModel, GovParams, GovernorModel,
        MachinePort,
    };
    use crate::network::NetworkModel;
    use crate::problem::{assemble_problem, Model};

    let net = case.network_data();
    let dispatch = case.dispatch();
    let pf = nr_powerflow(&net, &dispatch, pf_tol, pf_max_iter)?;

    let mut warnings = Vec::new();
    let mut gen_models = Vec::new();
    let mut exc_models = Vec::new();
    let mut gov_models = Vec::new();

    for (i, gen) in case.generators.iter().enumerate() {
        let params = gen
            .machine_base_params()
            .to_system_base(gen.mva, case.base_mva);
        let bus = dispatch[i].bus;
        let v = pf.voltage_phasor(bus);
        let s = Complex64::new(pf.gen_p[i], pf.gen_q[i]);
        let state = genrou_initialize(&params, v, s).map_err(|message| {
            PowerFlowError::InitFailed {
                element: gen.id.clone(),
                message,
            }
        })?;

        let exciter = case.exciters.iter().find(|e| e.gen == gen.id);
        let governor = case.governors.iter().find(|g| g.gen == gen.id);

        let vf_port = match exciter {
            Some(e) => MachinePort::Var(format!("{}.vf", e.id)),
            None => MachinePort::Const(state.vf0),
        };
        let tm_port = match governor {
            Some(g) => MachinePort::Var(format!("{}.ll.y", g.id)),
            None => MachinePort::Const(state.tm0),
        };

        gen_models.push(
            GenrouModel::new(
                &gen.id,
                params,
                case.omega_base(),
                &gen.bus,
                vf_port,
                tm_port,
                state,
            )
            .map_err(|e| PowerFlowError::InitFailed {
                element: gen.id.clone(),
                message: e.to_string(),
            })?,
        );

        if let Some(e) = exciter {
            exc_models.push(
                ExciterModel::new(
                    &e.id,
                    ExciterParams { ka: e.ka, ta: e.ta },
                    &gen.bus,
                    pf.v[bus],
                    state.vf0,
                )
                .map_err(|err| PowerFlowError::InitFailed {
                    element: e.id.clone(),
                    message: err.to_string(),
                })?,
            );
        }
        if let Some(g) = governor {
            let gov = GovernorModel::new(
                &g.id,
                GovParams { r: g.r, t1: g.t1, t2: g.t2, t3: g.t3 },
                &gen.id,
                state.tm0,
            )
            .map_err(|err| PowerFlowError::InitFailed {
                element: g.id.clone(),
                message: err.to_string(),
            })?;
            if let Some(w) = gov.validation_warning() {
                warnings.push(w);
            }
            gov_models.push(gov);
        }
    }

    let mut models: Vec<Box<dyn Model>> = Vec::new();
    models.extend(gen_models.into_iter().map(|m| Box::new(m) as Box<dyn Model>));
    models.extend(exc_models.into_iter().map(|m| Box::new(m) as Box<dyn Model>));
    models.extend(gov_models.into_iter().map(|m| Box::new(m) as Box<dyn Model>));
    // A slack bus without a machine stands for the external grid: model it
    // as an ideal source so its balance rows pin the power-flow voltage.
    let mut network = NetworkModel::new(net, case.load_model_kind(), pf.voltages_rect());
    for bus in &case.buses {
        let is_slack = bus.kind == crate::case::BusKindSpec::Slack;
        let has_gen = case.generators.iter().any(|g| g.bus == bus.id);
        if is_slack && !has_gen {
            network = network.with_infinite_bus(&bus.id);
        }
    }
    models.push(Box::new(network));

    let problem = assemble_problem(models).map_err(|e| PowerFlowError::InitFailed {
        element: "system".into(),
        message: e.to_string(),
    })?;

    let init = problem.initial().clone();
    let report = problem
        .check_consistency(&init.x, &init.y, &init.u, init.t, 1e-6)
        .map_err(|e| PowerFlowError::InitFailed {
            element: "system".into(),
            message: e.to_string(),
        })?;
    if !report.pass {
        return Err(PowerFlowError::InitFailed {
            element: "system".into(),
            message: format!("initialization inconsistent: {report}"),
        });
    }

    Ok(InitializedSystem {
        problem,
        pf,
        report,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{BusRecord, LineRecord, LineStatus};

    fn bus(id: &str, kind: BusKind, v0: f64, p_load: f64, q_load: f64) -> BusRecord {
        BusRecord {
            id: id.into(),
            kind,
            v0,
            theta0: 0.0,
            p_load,
            q_load,
        }
    }

    /// Slack + PQ load over a lossless line: the closed-form solution is
    /// V2 = cos(theta2) with 10 sin(theta2) cos(theta2) = -0.1.
    fn two_bus_case() -> NetworkData {
        NetworkData {
            buses: vec![
                bus("1", BusKind::Slack, 1.0, 0.0, 0.0),
                bus("2", BusKind::Pq, 1.0, 0.1, 0.0),
            ],
            lines: vec![LineRecord {
                id: "L1".into(),
                from: 0,
                to: 1,
                r: 0.0,
                x: 0.1,
                b_shunt: 0.0,
                status: LineStatus::In,
            }],
        }
    }

    /// Independent oracle: bisect 10·sin(θ)cos(θ) + 0.1 = 0 on [-0.1, 0];
    /// V2 = cos(θ) follows from the reactive balance.
    fn two_bus_oracle() -> (f64, f64) {
        let f = |th: f64| 10.0 * th.sin() * th.cos() + 0.1;
        let (mut lo, mut hi) = (-0.1f64, 0.0f64);
        assert!(f(lo) < 0.0 && f(hi) > 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let theta = 0.5 * (lo + hi);
        (theta, theta.cos())
    }

    #[test]
    fn two_bus_matches_bisection_oracle() {
        let (theta_ref, v_ref) = two_bus_oracle();
        // Frozen expected values computed by the oracle.
        assert!((theta_ref - (-0.0100007)).abs() < 5e-8);
        assert!((v_ref - 0.9999500).abs() < 5e-8);

        let sol = nr_powerflow(&two_bus_case(), &[], 1e-10, 20).unwrap();
        assert!((sol.theta[1] - theta_ref).abs() < 1e-7, "theta {}", sol.theta[1]);
        assert!((sol.v[1] - v_ref).abs() < 1e-7, "v {}", sol.v[1]);
        assert_eq!(sol.theta[0], 0.0);
        assert_eq!(sol.v[0], 1.0);
    }

    #[test]
    fn slack_only_converges_immediately() {
        let net = NetworkData {
            buses: vec![bus("1", BusKind::Slack, 1.0, 0.0, 0.0)],
            lines: vec![],
        };
        let sol = nr_powerflow(&net, &[], 1e-8, 20).unwrap();
        assert_eq!(sol.iterations, 0);
        assert_eq!(sol.v, vec![1.0]);
    }

    #[test]
    fn quadratic_tail_convergence() {
        // The last iteration must reduce the mismatch by at least four
        // orders of magnitude (quadratic convergence near the solution).
        let sol = nr_powerflow(&two_bus_case(), &[], 1e-8, 20).unwrap();
        let h = &sol.mismatch_history;
        assert!(h.len() >= 2, "history {h:?}");
        let last = h[h.len() - 1];
        let before = h[h.len() - 2];
        assert!(
            last <= before * 1e-4,
            "tail not quadratic: {before:.3e} -> {last:.3e}"
        );
    }

    #[test]
    fn nonconvergence_reports_worst_bus() {
        // An absurd load that no feasible voltage supports.
        let mut net = two_bus_case();
        net.buses[1].p_load = 100.0;
        let err = nr_powerflow(&net, &[], 1e-8, 10).unwrap_err();
        match err {
            PowerFlowError::NonConvergence { bus, .. } => assert_eq!(bus, "2"),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn network_residuals_vanish_at_solution() {
        // Closure with the network module: injections computed from the
        // power-flow solution satisfy the current balance to 1e-8.
        let net = two_bus_case();
        let sol = nr_powerflow(&net, &[GenDispatch { bus: 0, p_set: 0.0 }], 1e-12, 20).unwrap();
        let ybus = net.ybus(None).unwrap();
        let v = sol.voltages_rect();
        // Injected powers: slack supplies its dispatch, bus 2 draws the load.
        let s_inj = [
            num_complex::Complex64::new(sol.gen_p[0], sol.gen_q[0]),
            num_complex::Complex64::new(-net.buses[1].p_load, -net.buses[1].q_load),
        ];
        let injections: Vec<num_complex::Complex64> = s_inj
            .iter()
            .zip(&v)
            .map(|(s, vk)| (s / vk).conj())
            .collect();
        let g = crate::network::network_residuals(&ybus, &v, &injections);
        let worst = g.iter().fold(0.0f64, |acc, &e| acc.max(e.abs()));
        assert!(worst <= 1e-8, "residual {worst:.3e}");
    }

    #[test]
    fn slack_dispatch_covers_losses() {
        let mut net = two_bus_case();
        net.lines[0].r = 0.05;
        let sol = nr_powerflow(
            &net,
            &[GenDispatch { bus: 0, p_set: 0.0 }],
            1e-10,
            20,
        )
        .unwrap();
        // Slack supplies load plus line loss, so strictly more than 0.1.
        assert!(sol.gen_p[0] > 0.1, "gen_p = {}", sol.gen_p[0]);
    }
}
