//! Algebraic network layer: admittance assembly, nodal current balance, and
//! line switching.
//!
//! Network variables are rectangular bus voltages (V_re, V_im); the algebraic
//! rows are real/imaginary nodal current balance. The dynamic model stamps
//! per line rather than through a cached Ybus, with the line status read from
//! the discrete vector, so residuals stay a pure function of (x, y, u, t) and
//! the Jacobian pattern survives switching events. Loads fold into constant
//! shunt admittances at initialization by default; a constant-power option
//! keeps them in g as `-conj(S/V)` injections.

use num_complex::Complex64;

use crate::error::{AssemblyError, NetworkError};
use crate::problem::{AlgVarDecl, Binder, EvalCtx, JacWriter, Model, ModelDecl};

/// Bus role in the power flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BusKind {
    Slack,
    Pv,
    Pq,
}

/// One bus with its aggregated load.
#[derive(Debug, Clone)]
pub struct BusRecord {
    pub id: String,
    pub kind: BusKind,
    /// Voltage magnitude setpoint (slack, PV) or initial guess (PQ), p.u.
    pub v0: f64,
    /// Angle setpoint (slack) or initial guess, rad.
    pub theta0: f64,
    pub p_load: f64,
    pub q_load: f64,
}

/// Line status flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LineStatus {
    In,
    Out,
}

/// A pi-model branch (series r + jx, total charging b).
#[derive(Debug, Clone)]
pub struct LineRecord {
    pub id: String,
    pub from: usize,
    pub to: usize,
    pub r: f64,
    pub x: f64,
    pub b_shunt: f64,
    pub status: LineStatus,
}

impl LineRecord {
    pub fn series_admittance(&self) -> Complex64 {
        Complex64::new(1.0, 0.0) / Complex64::new(self.r, self.x)
    }
}

/// Dense complex nodal admittance matrix (desk-scale networks).
#[derive(Debug, Clone, PartialEq)]
pub struct AdmittanceMatrix {
    n: usize,
    vals: Vec<Complex64>,
}

impl AdmittanceMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            vals: vec![Complex64::new(0.0, 0.0); n * n],
        }
    }

    pub fn n_bus(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.vals[i * self.n + j]
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: Complex64) {
        self.vals[i * self.n + j] += v;
    }

    /// `Y · V`.
    pub fn mul_vec(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(v.len(), self.n);
        (0..self.n)
            .map(|i| {
                (0..self.n)
                    .map(|j| self.get(i, j) * v[j])
                    .sum::<Complex64>()
            })
            .collect()
    }
}

/// Discrete-slot name carrying a line's status; shared convention between
/// the network model and the event compiler.
pub fn line_status_slot_name(line_id: &str) -> String {
    format!("net.status.{line_id}")
}

/// Connectivity over in-service lines: every bus reachable from bus 0.
pub fn check_connected(n_bus: usize, lines: &[LineRecord], in_service: &[bool]) -> Result<(), NetworkError> {
    if n_bus == 0 {
        return Ok(());
    }
    let mut adj = vec![Vec::new(); n_bus];
    for (l, &status) in lines.iter().zip(in_service) {
        if status {
            adj[l.from].push(l.to);
            adj[l.to].push(l.from);
        }
    }
    let mut seen = vec![false; n_bus];
    let mut stack = vec![0usize];
    seen[0] = true;
    let mut count = 1;
    while let Some(k) = stack.pop() {
        for &j in &adj[k] {
            if !seen[j] {
                seen[j] = true;
                count += 1;
                stack.push(j);
            }
        }
    }
    if count != n_bus {
        // Count the components for the report.
        let mut comp = 0;
        let mut seen = vec![false; n_bus];
        for s in 0..n_bus {
            if !seen[s] {
                comp += 1;
                let mut stack = vec![s];
                seen[s] = true;
                while let Some(k) = stack.pop() {
                    for &j in &adj[k] {
                        if !seen[j] {
                            seen[j] = true;
                            stack.push(j);
                        }
                    }
                }
            }
        }
        return Err(NetworkError::Island { islands: comp });
    }
    Ok(())
}

/// Buses plus branches; the static description the power flow and the
/// dynamic model both consume.
#[derive(Debug, Clone)]
pub struct NetworkData {
    pub buses: Vec<BusRecord>,
    pub lines: Vec<LineRecord>,
}

impl NetworkData {
    pub fn bus_index(&self, id: &str) -> Option<usize> {
        self.buses.iter().position(|b| b.id == id)
    }

    pub fn line_index(&self, id: &str) -> Option<usize> {
        self.lines.iter().position(|l| l.id == id)
    }

    /// Standard pi-model Ybus over in-service lines, optionally with constant
    /// per-bus shunt admittances (impedance-folded loads) on the diagonal.
    pub fn ybus(&self, folded_loads: Option<&[Complex64]>) -> Result<AdmittanceMatrix, NetworkError> {
        let statuses: Vec<bool> = self.lines.iter().map(|l| l.status == LineStatus::In).collect();
        check_connected(self.buses.len(), &self.lines, &statuses)?;
        let mut y = AdmittanceMatrix::zeros(self.buses.len());
        for l in &self.lines {
            if l.status != LineStatus::In {
                continue;
            }
            if l.x == 0.0 && l.r == 0.0 {
                return Err(NetworkError::InvalidLine {
                    line: l.id.clone(),
                    message: "zero series impedance".into(),
                });
            }
            let ys = l.series_admittance();
            let ysh = Complex64::new(0.0, 0.5 * l.b_shunt);
            y.add(l.from, l.from, ys + ysh);
            y.add(l.to, l.to, ys + ysh);
            y.add(l.from, l.to, -ys);
            y.add(l.to, l.from, -ys);
        }
        if let Some(loads) = folded_loads {
            for (k, &yl) in loads.iter().enumerate() {
                y.add(k, k, yl);
            }
        }
        Ok(y)
    }

    /// Switch one line and rebuild the admittance matrix. Returns the new
    /// matrix and the set of buses whose rows changed.
    pub fn apply_event(
        &mut self,
        line_id: &str,
        close: bool,
    ) -> Result<(AdmittanceMatrix, [usize; 2]), NetworkError> {
        let idx = self
            .line_index(line_id)
            .ok_or_else(|| NetworkError::UnknownLine(line_id.to_string()))?;
        let current = self.lines[idx].status;
        let wanted_prev = if close { LineStatus::Out } else { LineStatus::In };
        if current != wanted_prev {
            return Err(NetworkError::RedundantSwitch {
                line: line_id.to_string(),
                status: if current == LineStatus::In { "in service".into() } else { "out of service".into() },
            });
        }
        self.lines[idx].status = if close { LineStatus::In } else { LineStatus::Out };
        let changed = [self.lines[idx].from, self.lines[idx].to];
        match self.ybus(None) {
            Ok(y) => Ok((y, changed)),
            Err(e) => {
                // Roll back so the caller keeps a valid network.
                self.lines[idx].status = current;
                Err(e)
            }
        }
    }
}

/// Standard pi-model admittance assembly over in-service lines; constant
/// per-bus shunt admittances (impedance-folded loads) are added to the
/// diagonal when given.
pub fn build_ybus(
    buses: &[BusRecord],
    lines: &[LineRecord],
    folded_loads: Option<&[Complex64]>,
) -> Result<AdmittanceMatrix, NetworkError> {
    NetworkData {
        buses: buses.to_vec(),
        lines: lines.to_vec(),
    }
    .ybus(folded_loads)
}

/// Current-balance residuals `I_inj − Y·V` per bus, stacked (Re, Im).
pub fn network_residuals(
    y: &AdmittanceMatrix,
    v: &[Complex64],
    injections: &[Complex64],
) -> Vec<f64> {
    let yv = y.mul_vec(v);
    let mut g = Vec::with_capacity(2 * y.n_bus());
    for k in 0..y.n_bus() {
        let r = injections[k] - yv[k];
        g.push(r.re);
        g.push(r.im);
    }
    g
}

/// How loads enter the dynamic equations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LoadModel {
    /// Folded into constant shunt admittances at the initial voltage.
    #[default]
    Impedance,
    /// Kept in g as constant-power `-conj(S/V)` injections.
    ConstantPower,
}

/// The network as an assembled model: declares (V_re, V_im) per bus and the
/// matching current-balance rows; machines add their injections into the
/// same rows.
pub struct NetworkModel {
    data: NetworkData,
    /// Folded load admittance per bus (impedance model), fixed at init.
    y_load: Vec<Complex64>,
    /// Constant-power load per bus (power model).
    s_load: Vec<Complex64>,
    v_init: Vec<Complex64>,
    /// Buses modeled as ideal sources: their rows pin V to v_init instead of
    /// balancing currents (the classic infinite bus).
    fixed: Vec<bool>,
    vre: Vec<usize>,
    vim: Vec<usize>,
    status_slots: Vec<usize>,
}

impl NetworkModel {
    /// Build the model. `v_init` is the power-flow solution; with the
    /// impedance load model the loads are folded at those voltages.
    pub fn new(data: NetworkData, load_model: LoadModel, v_init: Vec<Complex64>) -> Self {
        let nb = data.buses.len();
        assert_eq!(v_init.len(), nb);
        let mut y_load = vec![Complex64::new(0.0, 0.0); nb];
        let mut s_load = vec![Complex64::new(0.0, 0.0); nb];
        for (k, bus) in data.buses.iter().enumerate() {
            let s = Complex64::new(bus.p_load, bus.q_load);
            match load_model {
                LoadModel::Impedance => {
                    let v2 = v_init[k].norm_sqr();
                    if s != Complex64::new(0.0, 0.0) {
                        y_load[k] = s.conj() / v2;
                    }
                }
                LoadModel::ConstantPower => s_load[k] = s,
            }
        }
        Self {
            fixed: vec![false; data.buses.len()],
            data,
            y_load,
            s_load,
            v_init,
            vre: Vec::new(),
            vim: Vec::new(),
            status_slots: Vec::new(),
        }
    }

    /// Treat a bus as an ideal voltage source: its balance rows become
    /// `V = V_init` and its loads are served by the source directly.
    pub fn with_infinite_bus(mut self, bus_id: &str) -> Self {
        let k = self
            .data
            .bus_index(bus_id)
            .unwrap_or_else(|| panic!("unknown bus `{bus_id}`"));
        self.fixed[k] = true;
        self
    }

    pub fn data(&self) -> &NetworkData {
        &self.data
    }

    pub fn vre_name(bus_id: &str) -> String {
        format!("net.vre.{bus_id}")
    }

    pub fn vim_name(bus_id: &str) -> String {
        format!("net.vim.{bus_id}")
    }

    /// Per-line admittance pair (W_ff, W_ft) with I_f = W_ff V_f + W_ft V_t.
    fn line_coeffs(l: &LineRecord) -> (Complex64, Complex64) {
        let ys = l.series_admittance();
        (ys + Complex64::new(0.0, 0.5 * l.b_shunt), -ys)
    }
}

impl Model for NetworkModel {
    fn id(&self) -> &str {
        "net"
    }

    fn declare(&self) -> ModelDecl {
        let mut decl = ModelDecl::default();
        for (k, bus) in self.data.buses.iter().enumerate() {
            decl.alg_vars.push(AlgVarDecl {
                name: Self::vre_name(&bus.id),
                init: self.v_init[k].re,
            });
            decl.alg_vars.push(AlgVarDecl {
                name: Self::vim_name(&bus.id),
                init: self.v_init[k].im,
            });
        }
        for l in &self.data.lines {
            let init = if l.status == LineStatus::In { 1.0 } else { 0.0 };
            decl.discretes.push((line_status_slot_name(&l.id), init));
        }
        decl
    }

    fn bind(&mut self, binder: &Binder) -> Result<(), AssemblyError> {
        self.vre.clear();
        self.vim.clear();
        for bus in &self.data.buses {
            self.vre.push(binder.var(&Self::vre_name(&bus.id))?);
            self.vim.push(binder.var(&Self::vim_name(&bus.id))?);
        }
        self.status_slots.clear();
        for l in &self.data.lines {
            self.status_slots.push(binder.discrete(&line_status_slot_name(&l.id))?);
        }
        Ok(())
    }

    fn residual(&self, ctx: &EvalCtx, f_hat: &mut [f64], g: &mut [f64]) {
        let n = f_hat.len();
        let row = |var: usize| var - n;
        // Line currents leave the bus: g -= status * I_line. Rows of fixed
        // (ideal-source) buses carry the voltage pin instead.
        for (l, &slot) in self.data.lines.iter().zip(&self.status_slots) {
            let status = ctx.u[slot];
            if status == 0.0 {
                continue;
            }
            let (wff, wft) = Self::line_coeffs(l);
            let vf = Complex64::new(ctx.val(self.vre[l.from]), ctx.val(self.vim[l.from]));
            let vt = Complex64::new(ctx.val(self.vre[l.to]), ctx.val(self.vim[l.to]));
            if !self.fixed[l.from] {
                let i_f = wff * vf + wft * vt;
                g[row(self.vre[l.from])] -= status * i_f.re;
                g[row(self.vim[l.from])] -= status * i_f.im;
            }
            if !self.fixed[l.to] {
                let i_t = wff * vt + wft * vf;
                g[row(self.vre[l.to])] -= status * i_t.re;
                g[row(self.vim[l.to])] -= status * i_t.im;
            }
        }
        for k in 0..self.data.buses.len() {
            let v = Complex64::new(ctx.val(self.vre[k]), ctx.val(self.vim[k]));
            if self.fixed[k] {
                g[row(self.vre[k])] += self.v_init[k].re - v.re;
                g[row(self.vim[k])] += self.v_init[k].im - v.im;
                continue;
            }
            // Folded impedance loads: g -= y_load * V.
            let yl = self.y_load[k];
            if yl != Complex64::new(0.0, 0.0) {
                let i = yl * v;
                g[row(self.vre[k])] -= i.re;
                g[row(self.vim[k])] -= i.im;
            }
            // Constant-power loads: g += -conj(S / V). Near-zero voltage is a
            // division hazard; emit NaN so the evaluator flags the bus row.
            let s = self.s_load[k];
            if s != Complex64::new(0.0, 0.0) {
                let v2 = v.norm_sqr();
                let i = if v2 < 1e-12 {
                    Complex64::new(f64::NAN, f64::NAN)
                } else {
                    -(s / v).conj()
                };
                g[row(self.vre[k])] += i.re;
                g[row(self.vim[k])] += i.im;
            }
        }
    }

    fn jacobian_pattern(&self) -> Vec<(usize, usize)> {
        let mut p = Vec::new();
        // Per line: both terminal row pairs against both terminal var pairs,
        // skipping rows of fixed buses.
        for l in &self.data.lines {
            for (rbus, cbus) in [
                (l.from, l.from),
                (l.from, l.to),
                (l.to, l.to),
                (l.to, l.from),
            ] {
                if self.fixed[rbus] {
                    continue;
                }
                for rvar in [self.vre[rbus], self.vim[rbus]] {
                    for cvar in [self.vre[cbus], self.vim[cbus]] {
                        p.push((rvar, cvar));
                    }
                }
            }
        }
        for k in 0..self.data.buses.len() {
            if self.fixed[k] {
                p.push((self.vre[k], self.vre[k]));
                p.push((self.vim[k], self.vim[k]));
                continue;
            }
            // Load blocks (2x2 per bus with any load term).
            if self.y_load[k] != Complex64::new(0.0, 0.0) || self.s_load[k] != Complex64::new(0.0, 0.0) {
                for rvar in [self.vre[k], self.vim[k]] {
                    for cvar in [self.vre[k], self.vim[k]] {
                        p.push((rvar, cvar));
                    }
                }
            }
        }
        p
    }

    fn jacobian(&self, ctx: &EvalCtx, out: &mut JacWriter) {
        // d(I_re)/d(a, b) = (Re W, -Im W); d(I_im)/d(a, b) = (Im W, Re W),
        // with g -= status * I: push the negated entries. Order must mirror
        // jacobian_pattern exactly.
        for (l, &slot) in self.data.lines.iter().zip(&self.status_slots) {
            let status = ctx.u[slot];
            let (wff, wft) = Self::line_coeffs(l);
            for (rbus, w) in [
                (l.from, wff),
                (l.from, wft),
                (l.to, wff),
                (l.to, wft),
            ] {
                if self.fixed[rbus] {
                    continue;
                }
                out.push(-status * w.re);
                out.push(status * w.im);
                out.push(-status * w.im);
                out.push(-status * w.re);
            }
        }
        for k in 0..self.data.buses.len() {
            if self.fixed[k] {
                out.push(-1.0);
                out.push(-1.0);
                continue;
            }
            let yl = self.y_load[k];
            let s = self.s_load[k];
            if yl == Complex64::new(0.0, 0.0) && s == Complex64::new(0.0, 0.0) {
                continue;
            }
            // Impedance part, same structure as a line self-term.
            let mut da_re = -yl.re;
            let mut db_re = yl.im;
            let mut da_im = -yl.im;
            let mut db_im = -yl.re;
            if s != Complex64::new(0.0, 0.0) {
                // I = -conj(S/V): I_re = -(P a + Q b)/D, I_im = (Q a - P b)/D,
                // D = a^2 + b^2.
                let a = ctx.val(self.vre[k]);
                let b = ctx.val(self.vim[k]);
                let d = a * a + b * b;
                let (p, q) = (s.re, s.im);
                if d >= 1e-12 {
                    let ire = -(p * a + q * b) / d;
                    let iim = (q * a - p * b) / d;
                    da_re += (-p - 2.0 * a * ire) / d;
                    db_re += (-q - 2.0 * b * ire) / d;
                    da_im += (q - 2.0 * a * iim) / d;
                    db_im += (-p - 2.0 * b * iim) / d;
                } else {
                    da_re = f64::NAN;
                }
            }
            out.push(da_re);
            out.push(db_re);
            out.push(da_im);
            out.push(db_im);
        }
    }

    fn validate_discrete(&self, u: &[f64]) -> Result<(), String> {
        let in_service: Vec<bool> = self
            .status_slots
            .iter()
            .map(|&slot| u[slot] > 0.5)
            .collect();
        check_connected(self.data.buses.len(), &self.data.lines, &in_service)
            .map_err(|e| e.to_string())
    }
}
