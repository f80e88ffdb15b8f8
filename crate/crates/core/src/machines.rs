//! Round-rotor synchronous generator with swing dynamics and algebraic
//! stator closure, plus a lag exciter and a droop/lag/lead-lag governor.
//!
//! The six machine states are (delta, omega, e'_q, e'_d, e''_d, e''_q) with
//! mass entries (1, 2H, T'_d0, T'_q0, T''_d0, T''_q0). Setting both
//! sub-transient time constants to zero converts the e'' rows to algebraic
//! constraints and leaves the one d- and one q-axis flux-decay model. The
//! e''_d state is driven by e'_q and e''_q by e'_d, matching damper-flux
//! conventions.
//!
//! Conventions (fixed by requiring zero residuals at back-initialization and
//! angle-reference invariance):
//!   - rotor frame: v_d = V_re sin(d) − V_im cos(d), v_q = V_re cos(d) + V_im sin(d)
//!   - stator balance: 0 = v_q + r_a I_q − psi_d and 0 = v_d + r_a I_d + psi_q
//!     with psi_d = g_d1 e'_q + (1−g_d1) e''_d − x'' I_d and
//!     psi_q = −(g_q1 e'_d + (1−g_q1) e''_q) − x'' I_q
//!   - torque: tau_e = psi_d I_q − psi_q I_d
//!   - field/damper closure:
//!     Xad·Ifd = e'_q + (x_d − x'_d)[I_d + g_d2 (e'_q − e''_d − (x'_d − x_l) I_d)]
//!     Xaq·I1q = e'_d + (x_q − x'_q)[−I_q + g_q2 (e'_d − e''_q + (x'_q − x_l) I_q)]
//!
//! Sub-transient saliency is neglected (common x''), stator-flux speed terms
//! are omitted (omega ~ 1 in the stator equations), and saturation is not
//! modeled.

use num_complex::Complex64;

use crate::blocks::{BlockInput, LagBlock, LeadLagBlock};
use crate::error::AssemblyError;
use crate::network::NetworkModel;
use crate::problem::{AlgVarDecl, Binder, DiffVarDecl, EvalCtx, JacWriter, Model, ModelDecl};

/// Round-rotor machine parameters. Reactances, resistance, inertia and
/// damping are interpreted on the system base after
/// [`GenrouParams::to_system_base`].
#[derive(Debug, Clone)]
pub struct GenrouParams {
    pub xd: f64,
    pub xq: f64,
    pub xdp: f64,
    pub xqp: f64,
    /// Common sub-transient reactance (x''_d = x''_q).
    pub xpp: f64,
    pub xl: f64,
    pub ra: f64,
    pub td0p: f64,
    pub tq0p: f64,
    pub td0pp: f64,
    pub tq0pp: f64,
    pub h: f64,
    pub d: f64,
}

impl GenrouParams {
    /// Rescale from the machine MVA base to the system base.
    pub fn to_system_base(&self, machine_mva: f64, system_mva: f64) -> Self {
        let z = system_mva / machine_mva;
        let s = machine_mva / system_mva;
        Self {
            xd: self.xd * z,
            xq: self.xq * z,
            xdp: self.xdp * z,
            xqp: self.xqp * z,
            xpp: self.xpp * z,
            xl: self.xl * z,
            ra: self.ra * z,
            td0p: self.td0p,
            tq0p: self.tq0p,
            td0pp: self.td0pp,
            tq0pp: self.tq0pp,
            h: self.h * s,
            d: self.d * s,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.xl.is_nan() || self.xl < 0.0 {
            return Err(format!("leakage reactance must be nonnegative, got {}", self.xl));
        }
        if !(self.xd > self.xdp && self.xdp > self.xpp && self.xpp > self.xl) {
            return Err(format!(
                "require x_d > x'_d > x'' > x_l, got {} / {} / {} / {}",
                self.xd, self.xdp, self.xpp, self.xl
            ));
        }
        if !(self.xq > self.xqp && self.xqp > self.xpp) {
            return Err(format!(
                "require x_q > x'_q > x'', got {} / {} / {}",
                self.xq, self.xqp, self.xpp
            ));
        }
        if self.td0p <= 0.0 || self.tq0p <= 0.0 {
            return Err("transient time constants must be positive".into());
        }
        if self.td0pp < 0.0 || self.tq0pp < 0.0 {
            return Err("sub-transient time constants must be nonnegative".into());
        }
        if (self.td0pp == 0.0) != (self.tq0pp == 0.0) {
            return Err("flux-decay reduction requires both T''_d0 and T''_q0 zero".into());
        }
        if self.h <= 0.0 {
            return Err(format!("inertia must be positive, got {}", self.h));
        }
        if self.d < 0.0 || self.ra < 0.0 {
            return Err("damping and stator resistance must be nonnegative".into());
        }
        Ok(())
    }

    fn gammas(&self) -> (f64, f64, f64, f64) {
        let gd1 = (self.xpp - self.xl) / (self.xdp - self.xl);
        let gq1 = (self.xpp - self.xl) / (self.xqp - self.xl);
        let gd2 = (self.xdp - self.xpp) / ((self.xdp - self.xl) * (self.xdp - self.xl));
        let gq2 = (self.xqp - self.xpp) / ((self.xqp - self.xl) * (self.xqp - self.xl));
        (gd1, gq1, gd2, gq2)
    }
}

/// Back-initialized machine state and controller references.
#[derive(Debug, Clone, Copy, Default)]
pub struct GenrouState {
    pub delta: f64,
    pub omega: f64,
    pub eqp: f64,
    pub edp: f64,
    pub edpp: f64,
    pub eqpp: f64,
    pub i_d: f64,
    pub i_q: f64,
    /// Field voltage that holds the operating point.
    pub vf0: f64,
    /// Mechanical torque that holds the operating point.
    pub tm0: f64,
}

/// Back-solve the machine state from the power-flow operating point so every
/// residual of the contribution vanishes.
///
/// `v` is the bus voltage phasor and `s` the injected complex power, both on
/// the system base.
pub fn genrou_initialize(
    p: &GenrouParams,
    v: Complex64,
    s: Complex64,
) -> Result<GenrouState, String> {
    let i = (s / v).conj();
    let e = v + Complex64::new(p.ra, p.xq) * i;
    if e.norm() < 1e-9 {
        return Err("non-physical operating point: internal EMF is zero".into());
    }
    let delta = e.arg();
    let rot = Complex64::from_polar(1.0, -delta);
    // phasor -> (q - j d) components in the rotor frame
    let idq = i * rot;
    let vdq = v * rot;
    let (i_q, i_d) = (idq.re, -idq.im);
    let (v_q, v_d) = (vdq.re, -vdq.im);

    let edp = (p.xq - p.xqp) * i_q;
    let eqp = v_q + p.ra * i_q + p.xdp * i_d;
    let edpp = eqp - (p.xdp - p.xl) * i_d;
    let eqpp = edp + (p.xqp - p.xl) * i_q;
    let vf0 = eqp + (p.xd - p.xdp) * i_d;

    let (gd1, gq1, _, _) = p.gammas();
    let psi_d = gd1 * eqp + (1.0 - gd1) * edpp - p.xpp * i_d;
    let psi_q = -(gq1 * edp + (1.0 - gq1) * eqpp) - p.xpp * i_q;
    let tm0 = psi_d * i_q - psi_q * i_d;

    debug_assert!((v_d + p.ra * i_d + psi_q).abs() < 1e-9);
    debug_assert!((v_q + p.ra * i_q - psi_d).abs() < 1e-9);

    Ok(GenrouState {
        delta,
        omega: 1.0,
        eqp,
        edp,
        edpp,
        eqpp,
        i_d,
        i_q,
        vf0,
        tm0,
    })
}

/// Where a machine input comes from: another model's variable or a constant
/// frozen at initialization.
#[derive(Debug, Clone)]
pub enum MachinePort {
    Var(String),
    Const(f64),
}

#[derive(Debug, Clone, Copy)]
enum BoundPort {
    Var(usize),
    Const(f64),
}

impl BoundPort {
    fn value(&self, ctx: &EvalCtx) -> f64 {
        match *self {
            BoundPort::Var(i) => ctx.val(i),
            BoundPort::Const(c) => c,
        }
    }

    fn var(&self) -> Option<usize> {
        match *self {
            BoundPort::Var(i) => Some(i),
            BoundPort::Const(_) => None,
        }
    }
}

fn bind_port(port: &MachinePort, binder: &Binder) -> Result<BoundPort, AssemblyError> {
    Ok(match port {
        MachinePort::Var(name) => BoundPort::Var(binder.var(name)?),
        MachinePort::Const(c) => BoundPort::Const(*c),
    })
}

/// The assembled machine contribution.
pub struct GenrouModel {
    id: String,
    p: GenrouParams,
    omega_b: f64,
    bus_id: String,
    vf_port: MachinePort,
    tm_port: MachinePort,
    init: GenrouState,
    delta: usize,
    omega: usize,
    eqp: usize,
    edp: usize,
    edpp: usize,
    eqpp: usize,
    i_d: usize,
    i_q: usize,
    vre: usize,
    vim: usize,
    vf: Option<BoundPort>,
    tm: Option<BoundPort>,
}

impl GenrouModel {
    /// `omega_b` is the synchronous speed in rad/s (2 pi f_base).
    pub fn new(
        id: &str,
        params: GenrouParams,
        omega_b: f64,
        bus_id: &str,
        vf_port: MachinePort,
        tm_port: MachinePort,
        init: GenrouState,
    ) -> Result<Self, AssemblyError> {
        params.validate().map_err(|message| AssemblyError::InvalidParameter {
            owner: id.to_string(),
            message,
        })?;
        Ok(Self {
            id: id.to_string(),
            p: params,
            omega_b,
            bus_id: bus_id.to_string(),
            vf_port,
            tm_port,
            init,
            delta: 0,
            omega: 0,
            eqp: 0,
            edp: 0,
            edpp: 0,
            eqpp: 0,
            i_d: 0,
            i_q: 0,
            vre: 0,
            vim: 0,
            vf: None,
            tm: None,
        })
    }

    pub fn params(&self) -> &GenrouParams {
        &self.p
    }

    pub fn omega_var(&self) -> String {
        self.var("omega")
    }

    pub fn delta_var(&self) -> String {
        self.var("delta")
    }

    fn var(&self, suffix: &str) -> String {
        format!("{}.{suffix}", self.id)
    }
}

impl Model for GenrouModel {
    fn id(&self) -> &str {
        &self.id
    }

    fn declare(&self) -> ModelDecl {
        ModelDecl {
            diff_vars: vec![
                DiffVarDecl { name: self.var("delta"), mass: 1.0, init: self.init.delta },
                DiffVarDecl { name: self.var("omega"), mass: 2.0 * self.p.h, init: self.init.omega },
                DiffVarDecl { name: self.var("eqp"), mass: self.p.td0p, init: self.init.eqp },
                DiffVarDecl { name: self.var("edp"), mass: self.p.tq0p, init: self.init.edp },
                DiffVarDecl { name: self.var("edpp"), mass: self.p.td0pp, init: self.init.edpp },
                DiffVarDecl { name: self.var("eqpp"), mass: self.p.tq0pp, init: self.init.eqpp },
            ],
            alg_vars: vec![
                AlgVarDecl { name: self.var("id"), init: self.init.i_d },
                AlgVarDecl { name: self.var("iq"), init: self.init.i_q },
            ],
            discretes: vec![],
        }
    }

    fn bind(&mut self, binder: &Binder) -> Result<(), AssemblyError> {
        self.delta = binder.var(&self.var("delta"))?;
        self.omega = binder.var(&self.var("omega"))?;
        self.eqp = binder.var(&self.var("eqp"))?;
        self.edp = binder.var(&self.var("edp"))?;
        self.edpp = binder.var(&self.var("edpp"))?;
        self.eqpp = binder.var(&self.var("eqpp"))?;
        self.i_d = binder.var(&self.var("id"))?;
        self.i_q = binder.var(&self.var("iq"))?;
        self.vre = binder.var(&NetworkModel::vre_name(&self.bus_id))?;
        self.vim = binder.var(&NetworkModel::vim_name(&self.bus_id))?;
        self.vf = Some(bind_port(&self.vf_port, binder)?);
        self.tm = Some(bind_port(&self.tm_port, binder)?);
        Ok(())
    }

    fn residual(&self, ctx: &EvalCtx, f_hat: &mut [f64], g: &mut [f64]) {
        let n = f_hat.len();
        let p = &self.p;
        let (gd1, gq1, gd2, gq2) = p.gammas();
        let delta = ctx.val(self.delta);
        let omega = ctx.val(self.omega);
        let eqp = ctx.val(self.eqp);
        let edp = ctx.val(self.edp);
        let edpp = ctx.val(self.edpp);
        let eqpp = ctx.val(self.eqpp);
        let i_d = ctx.val(self.i_d);
        let i_q = ctx.val(self.i_q);
        let vre = ctx.val(self.vre);
        let vim = ctx.val(self.vim);
        let vf = self.vf.as_ref().unwrap().value(ctx);
        let tm = self.tm.as_ref().unwrap().value(ctx);

        let (s, c) = delta.sin_cos();
        let v_d = vre * s - vim * c;
        let v_q = vre * c + vim * s;
        let psi_d = gd1 * eqp + (1.0 - gd1) * edpp - p.xpp * i_d;
        let psi_q = -(gq1 * edp + (1.0 - gq1) * eqpp) - p.xpp * i_q;
        let tau_e = psi_d * i_q - psi_q * i_d;
        let xad_ifd = eqp + (p.xd - p.xdp) * (i_d + gd2 * (eqp - edpp - (p.xdp - p.xl) * i_d));
        let xaq_i1q = edp + (p.xq - p.xqp) * (-i_q + gq2 * (edp - eqpp + (p.xqp - p.xl) * i_q));

        f_hat[self.delta] += self.omega_b * (omega - 1.0);
        f_hat[self.omega] += tm - tau_e - p.d * (omega - 1.0);
        f_hat[self.eqp] += -xad_ifd + vf;
        f_hat[self.edp] += -xaq_i1q;
        f_hat[self.edpp] += -i_d * (p.xdp - p.xl) - edpp + eqp;
        f_hat[self.eqpp] += i_q * (p.xqp - p.xl) - eqpp + edp;

        // Stator balance rows, paired with (I_d, I_q).
        g[self.i_d - n] += v_q + p.ra * i_q - psi_d;
        g[self.i_q - n] += v_d + p.ra * i_d + psi_q;

        // Current injection into the bus balance (network frame).
        g[self.vre - n] += i_q * c + i_d * s;
        g[self.vim - n] += i_q * s - i_d * c;
    }

    fn jacobian_pattern(&self) -> Vec<(usize, usize)> {
        let mut pat = vec![(self.delta, self.omega)];
        pat.extend([
            (self.omega, self.omega),
            (self.omega, self.eqp),
            (self.omega, self.edp),
            (self.omega, self.edpp),
            (self.omega, self.eqpp),
            (self.omega, self.i_d),
            (self.omega, self.i_q),
        ]);
        if let Some(tm) = self.tm.as_ref().unwrap().var() {
            pat.push((self.omega, tm));
        }
        pat.extend([
            (self.eqp, self.eqp),
            (self.eqp, self.edpp),
            (self.eqp, self.i_d),
        ]);
        if let Some(vf) = self.vf.as_ref().unwrap().var() {
            pat.push((self.eqp, vf));
        }
        pat.extend([
            (self.edp, self.edp),
            (self.edp, self.eqpp),
            (self.edp, self.i_q),
        ]);
        pat.extend([
            (self.edpp, self.i_d),
            (self.edpp, self.edpp),
            (self.edpp, self.eqp),
            (self.eqpp, self.i_q),
            (self.eqpp, self.eqpp),
            (self.eqpp, self.edp),
        ]);
        pat.extend([
            (self.i_d, self.delta),
            (self.i_d, self.vre),
            (self.i_d, self.vim),
            (self.i_d, self.i_q),
            (self.i_d, self.i_d),
            (self.i_d, self.eqp),
            (self.i_d, self.edpp),
            (self.i_q, self.delta),
            (self.i_q, self.vre),
            (self.i_q, self.vim),
            (self.i_q, self.i_d),
            (self.i_q, self.i_q),
            (self.i_q, self.edp),
            (self.i_q, self.eqpp),
        ]);
        pat.extend([
            (self.vre, self.delta),
            (self.vre, self.i_d),
            (self.vre, self.i_q),
            (self.vim, self.delta),
            (self.vim, self.i_d),
            (self.vim, self.i_q),
        ]);
        pat
    }

    fn jacobian(&self, ctx: &EvalCtx, out: &mut JacWriter) {
        let p = &self.p;
        let (gd1, gq1, gd2, gq2) = p.gammas();
        let delta = ctx.val(self.delta);
        let eqp = ctx.val(self.eqp);
        let edp = ctx.val(self.edp);
        let edpp = ctx.val(self.edpp);
        let eqpp = ctx.val(self.eqpp);
        let i_d = ctx.val(self.i_d);
        let i_q = ctx.val(self.i_q);
        let vre = ctx.val(self.vre);
        let vim = ctx.val(self.vim);

        let (s, c) = delta.sin_cos();
        let v_d = vre * s - vim * c;
        let v_q = vre * c + vim * s;
        let psi_d = gd1 * eqp + (1.0 - gd1) * edpp - p.xpp * i_d;
        let psi_q = -(gq1 * edp + (1.0 - gq1) * eqpp) - p.xpp * i_q;

        // delta row
        out.push(self.omega_b);
        // omega row: f = tm - tau_e - D(omega - 1)
        out.push(-p.d);
        out.push(-gd1 * i_q);
        out.push(-gq1 * i_d);
        out.push(-(1.0 - gd1) * i_q);
        out.push(-(1.0 - gq1) * i_d);
        out.push(p.xpp * i_q + psi_q);
        out.push(-(psi_d + p.xpp * i_d));
        if self.tm.as_ref().unwrap().var().is_some() {
            out.push(1.0);
        }
        // e'_q row: f = -XadIfd + vf
        out.push(-(1.0 + (p.xd - p.xdp) * gd2));
        out.push((p.xd - p.xdp) * gd2);
        out.push(-(p.xd - p.xdp) * (1.0 - gd2 * (p.xdp - p.xl)));
        if self.vf.as_ref().unwrap().var().is_some() {
            out.push(1.0);
        }
        // e'_d row: f = -XaqI1q
        out.push(-(1.0 + (p.xq - p.xqp) * gq2));
        out.push((p.xq - p.xqp) * gq2);
        out.push(-(p.xq - p.xqp) * (-1.0 + gq2 * (p.xqp - p.xl)));
        // e''_d row
        out.push(-(p.xdp - p.xl));
        out.push(-1.0);
        out.push(1.0);
        // e''_q row
        out.push(p.xqp - p.xl);
        out.push(-1.0);
        out.push(1.0);
        // stator q-balance (I_d row): g = v_q + ra i_q - psi_d
        out.push(-v_d);
        out.push(c);
        out.push(s);
        out.push(p.ra);
        out.push(p.xpp);
        out.push(-gd1);
        out.push(-(1.0 - gd1));
        // stator d-balance (I_q row): g = v_d + ra i_d + psi_q
        out.push(v_q);
        out.push(s);
        out.push(-c);
        out.push(p.ra);
        out.push(-p.xpp);
        out.push(-gq1);
        out.push(-(1.0 - gq1));
        // injection rows: i_re = i_q c + i_d s, i_im = i_q s - i_d c
        out.push(-i_q * s + i_d * c);
        out.push(s);
        out.push(c);
        out.push(i_q * c + i_d * s);
        out.push(-c);
        out.push(s);
    }
}

/// Exciter parameters: a lag (gain K_A, time constant T_A) on the voltage
/// error driving the field voltage. T_A = 0 degrades to a pure gain.
#[derive(Debug, Clone, Copy)]
pub struct ExciterParams {
    pub ka: f64,
    pub ta: f64,
}

/// Governor parameters: droop 1/R into a lag (T1) into a lead-lag (T2/T3)
/// producing the mechanical torque.
#[derive(Debug, Clone, Copy)]
pub struct GovParams {
    pub r: f64,
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
}

/// Lag exciter: `T_A v̇_f = K_A (v_ref − |V|) − v_f`.
pub struct ExciterModel {
    id: String,
    ka: f64,
    ta: f64,
    bus_id: String,
    vf_init: f64,
    vref_init: f64,
    vf: usize,
    vre: usize,
    vim: usize,
    vref_slot_idx: usize,
}

impl ExciterModel {
    /// Back-initialized so the lag is at equilibrium: v_ref = |V0| + vf0/K_A.
    pub fn new(
        id: &str,
        params: ExciterParams,
        bus_id: &str,
        v0_mag: f64,
        vf0: f64,
    ) -> Result<Self, AssemblyError> {
        if params.ka <= 0.0 || params.ta < 0.0 {
            return Err(AssemblyError::InvalidParameter {
                owner: id.to_string(),
                message: format!("require K_A > 0 and T_A >= 0, got {} / {}", params.ka, params.ta),
            });
        }
        Ok(Self {
            id: id.to_string(),
            ka: params.ka,
            ta: params.ta,
            bus_id: bus_id.to_string(),
            vf_init: vf0,
            vref_init: v0_mag + vf0 / params.ka,
            vf: 0,
            vre: 0,
            vim: 0,
            vref_slot_idx: 0,
        })
    }

    pub fn vf_var(&self) -> String {
        format!("{}.vf", self.id)
    }

    fn vref_slot(&self) -> String {
        format!("{}.v_ref", self.id)
    }
}

impl Model for ExciterModel {
    fn id(&self) -> &str {
        &self.id
    }

    fn declare(&self) -> ModelDecl {
        ModelDecl {
            diff_vars: vec![DiffVarDecl {
                name: self.vf_var(),
                mass: self.ta,
                init: self.vf_init,
            }],
            alg_vars: vec![],
            discretes: vec![(self.vref_slot(), self.vref_init)],
        }
    }

    fn bind(&mut self, binder: &Binder) -> Result<(), AssemblyError> {
        self.vf = binder.var(&self.vf_var())?;
        self.vre = binder.var(&NetworkModel::vre_name(&self.bus_id))?;
        self.vim = binder.var(&NetworkModel::vim_name(&self.bus_id))?;
        self.vref_slot_idx = binder.discrete(&self.vref_slot())?;
        Ok(())
    }

    fn residual(&self, ctx: &EvalCtx, f_hat: &mut [f64], _g: &mut [f64]) {
        let vre = ctx.val(self.vre);
        let vim = ctx.val(self.vim);
        let vmag = (vre * vre + vim * vim).sqrt();
        let vref = ctx.u[self.vref_slot_idx];
        f_hat[self.vf] += self.ka * (vref - vmag) - ctx.val(self.vf);
    }

    fn jacobian_pattern(&self) -> Vec<(usize, usize)> {
        vec![
            (self.vf, self.vf),
            (self.vf, self.vre),
            (self.vf, self.vim),
        ]
    }

    fn jacobian(&self, ctx: &EvalCtx, out: &mut JacWriter) {
        let vre = ctx.val(self.vre);
        let vim = ctx.val(self.vim);
        let vmag = (vre * vre + vim * vim).sqrt().max(1e-12);
        out.push(-1.0);
        out.push(-self.ka * vre / vmag);
        out.push(-self.ka * vim / vmag);
    }
}

/// Droop governor assembled from the transfer-function blocks: the speed
/// error enters a lag, the lag output a lead-lag whose algebraic output is
/// the mechanical torque.
pub struct GovernorModel {
    id: String,
    lag: LagBlock,
    leadlag: LeadLagBlock,
    tau_ref_init: f64,
}

impl GovernorModel {
    pub fn new(id: &str, params: GovParams, gen_id: &str, tm0: f64) -> Result<Self, AssemblyError> {
        if params.r <= 0.0 {
            return Err(AssemblyError::InvalidParameter {
                owner: id.to_string(),
                message: format!("droop R must be positive, got {}", params.r),
            });
        }
        // Input: tau_ref + (1 - omega)/R, affine in the machine speed.
        let mut lag = LagBlock::new(
            &format!("{id}.lag"),
            1.0,
            params.t1,
            BlockInput::Affine {
                var: format!("{gen_id}.omega"),
                coeff: -1.0 / params.r,
                discrete: Some(format!("{id}.tau_ref")),
                constant: 1.0 / params.r,
            },
        )?;
        lag.set_initial_state(tm0);
        let mut leadlag = LeadLagBlock::new(
            &format!("{id}.ll"),
            params.t2,
            params.t3,
            BlockInput::Var(format!("{id}.lag.y")),
        )?;
        leadlag.initialize(tm0);
        Ok(Self {
            id: id.to_string(),
            lag,
            leadlag,
            tau_ref_init: tm0,
        })
    }

    /// The torque output variable a machine's tm port binds to.
    pub fn tm_var(&self) -> String {
        self.leadlag.output_var()
    }

    pub fn validation_warning(&self) -> Option<String> {
        self.leadlag.validation_warning()
    }
}

impl Model for GovernorModel {
    fn id(&self) -> &str {
        &self.id
    }

    fn declare(&self) -> ModelDecl {
        let mut decl = self.lag.declare();
        let ll = self.leadlag.declare();
        decl.diff_vars.extend(ll.diff_vars);
        decl.alg_vars.extend(ll.alg_vars);
        decl.discretes.extend(ll.discretes);
        decl.discretes.push((format!("{}.tau_ref", self.id), self.tau_ref_init));
        decl
    }

    fn bind(&mut self, binder: &Binder) -> Result<(), AssemblyError> {
        self.lag.bind(binder)?;
        self.leadlag.bind(binder)?;
        Ok(())
    }

    fn residual(&self, ctx: &EvalCtx, f_hat: &mut [f64], g: &mut [f64]) {
        self.lag.residual(ctx, f_hat, g);
        self.leadlag.residual(ctx, f_hat, g);
    }

    fn jacobian_pattern(&self) -> Vec<(usize, usize)> {
        let mut pat = self.lag.jacobian_pattern();
        pat.extend(self.leadlag.jacobian_pattern());
        pat
    }

    fn jacobian(&self, ctx: &EvalCtx, out: &mut JacWriter) {
        self.lag.jacobian(ctx, out);
        self.leadlag.jacobian(ctx, out);
    }
}
