//! Transfer-function building blocks in mass-matrix form.
//!
//! The first-order lag keeps its time constant on the mass diagonal,
//! `T ẏ = K u − y`, so `T = 0` degrades it to a pure gain without touching
//! the equation. The lead-lag is realized serially as
//! `T₂ ẋ' = u − x'`, `0 = T₁T₂'(u − x') + x' − y` with the reciprocal `T₂'`
//! precomputed at build time; `T₁ = 0` turns it into a lag and
//! `T₁ = T₂ = 0` into a pass-through.

use crate::error::AssemblyError;
use crate::problem::{AlgVarDecl, Binder, DiffVarDecl, EvalCtx, JacWriter, Model, ModelDecl};

/// Reciprocal of a lead-lag denominator time constant: `1/T₂` when `T₂ ≠ 0`,
/// zero otherwise. Precomputed once per block.
pub fn leadlag_aux(t2: f64) -> f64 {
    if t2 != 0.0 {
        1.0 / t2
    } else {
        0.0
    }
}

/// Input wiring of a block: a constant, a discrete slot, another model's
/// variable, or an affine expression of one variable (covers droop paths).
#[derive(Debug, Clone)]
pub enum BlockInput {
    /// The block declares its own discrete input `<id>.u`, settable by events.
    OwnedDiscrete(f64),
    Const(f64),
    Var(String),
    Affine {
        var: String,
        coeff: f64,
        discrete: Option<String>,
        constant: f64,
    },
}

#[derive(Debug, Clone)]
enum BoundInput {
    Discrete(usize),
    Const(f64),
    Var(usize),
    Affine {
        var: usize,
        coeff: f64,
        discrete: Option<usize>,
        constant: f64,
    },
}

impl BoundInput {
    fn value(&self, ctx: &EvalCtx) -> f64 {
        match *self {
            BoundInput::Discrete(slot) => ctx.u[slot],
            BoundInput::Const(c) => c,
            BoundInput::Var(i) => ctx.val(i),
            BoundInput::Affine {
                var,
                coeff,
                discrete,
                constant,
            } => coeff * ctx.val(var) + discrete.map_or(0.0, |s| ctx.u[s]) + constant,
        }
    }

    /// Dependence on a system variable, as (global index, d input / d var).
    fn var_dep(&self) -> Option<(usize, f64)> {
        match *self {
            BoundInput::Var(i) => Some((i, 1.0)),
            BoundInput::Affine { var, coeff, .. } => Some((var, coeff)),
            _ => None,
        }
    }
}

fn bind_input(input: &BlockInput, own_slot_name: &str, binder: &Binder) -> Result<BoundInput, AssemblyError> {
    Ok(match input {
        BlockInput::OwnedDiscrete(_) => BoundInput::Discrete(binder.discrete(own_slot_name)?),
        BlockInput::Const(c) => BoundInput::Const(*c),
        BlockInput::Var(name) => BoundInput::Var(binder.var(name)?),
        BlockInput::Affine {
            var,
            coeff,
            discrete,
            constant,
        } => BoundInput::Affine {
            var: binder.var(var)?,
            coeff: *coeff,
            discrete: discrete
                .as_ref()
                .map(|d| binder.discrete(d))
                .transpose()?,
            constant: *constant,
        },
    })
}

/// First-order lag `T ẏ = K u − y` with the mass entry equal to `T`.
#[derive(Debug, Clone)]
pub struct LagBlock {
    id: String,
    pub gain: f64,
    pub time_constant: f64,
    input: BlockInput,
    y_init: f64,
    y: usize,
    bound: Option<BoundInput>,
}

impl LagBlock {
    pub fn new(id: &str, gain: f64, time_constant: f64, input: BlockInput) -> Result<Self, AssemblyError> {
        if time_constant < 0.0 {
            return Err(AssemblyError::InvalidParameter {
                owner: id.to_string(),
                message: format!("negative time constant T = {time_constant}"),
            });
        }
        Ok(Self {
            id: id.to_string(),
            gain,
            time_constant,
            input,
            y_init: 0.0,
            y: usize::MAX,
            bound: None,
        })
    }

    /// Steady-state back-initialization: forces the residual to exactly zero.
    pub fn initialize(&mut self, u0: f64) {
        self.y_init = self.gain * u0;
    }

    pub fn set_initial_state(&mut self, y0: f64) {
        self.y_init = y0;
    }

    pub fn state_var(&self) -> String {
        format!("{}.y", self.id)
    }

    fn input_slot_name(&self) -> String {
        format!("{}.u", self.id)
    }
}

impl Model for LagBlock {
    fn id(&self) -> &str {
        &self.id
    }

    fn declare(&self) -> ModelDecl {
        let mut decl = ModelDecl {
            diff_vars: vec![DiffVarDecl {
                name: self.state_var(),
                mass: self.time_constant,
                init: self.y_init,
            }],
            ..Default::default()
        };
        if let BlockInput::OwnedDiscrete(init) = self.input {
            decl.discretes.push((self.input_slot_name(), init));
        }
        decl
    }

    fn bind(&mut self, binder: &Binder) -> Result<(), AssemblyError> {
        self.y = binder.var(&self.state_var())?;
        self.bound = Some(bind_input(&self.input, &self.input_slot_name(), binder)?);
        Ok(())
    }

    fn residual(&self, ctx: &EvalCtx, f_hat: &mut [f64], _g: &mut [f64]) {
        let u = self.bound.as_ref().unwrap().value(ctx);
        f_hat[self.y] += self.gain * u - ctx.val(self.y);
    }

    fn jacobian_pattern(&self) -> Vec<(usize, usize)> {
        let mut p = vec![(self.y, self.y)];
        if let Some((var, _)) = self.bound.as_ref().unwrap().var_dep() {
            p.push((self.y, var));
        }
        p
    }

    fn jacobian(&self, _ctx: &EvalCtx, out: &mut JacWriter) {
        out.push(-1.0);
        if let Some((_, coeff)) = self.bound.as_ref().unwrap().var_dep() {
            out.push(self.gain * coeff);
        }
    }
}

/// Lead-lag `(1 + T₁s)/(1 + T₂s)` in serial form: differential state `x'`
/// with mass `T₂` and an always-algebraic output row.
#[derive(Debug, Clone)]
pub struct LeadLagBlock {
    id: String,
    pub t1: f64,
    pub t2: f64,
    /// Precomputed `1/T₂` (zero when `T₂ = 0`).
    pub t2_aux: f64,
    input: BlockInput,
    x_init: f64,
    y_init: f64,
    x: usize,
    y: usize,
    bound: Option<BoundInput>,
}

impl LeadLagBlock {
    pub fn new(id: &str, t1: f64, t2: f64, input: BlockInput) -> Result<Self, AssemblyError> {
        if t1 < 0.0 || t2 < 0.0 {
            return Err(AssemblyError::InvalidParameter {
                owner: id.to_string(),
                message: format!("negative time constant (T1 = {t1}, T2 = {t2})"),
            });
        }
        Ok(Self {
            id: id.to_string(),
            t1,
            t2,
            t2_aux: leadlag_aux(t2),
            input,
            x_init: 0.0,
            y_init: 0.0,
            x: usize::MAX,
            y: usize::MAX,
            bound: None,
        })
    }

    /// T₂ = 0 with T₁ > 0 forces a pass-through and silently ignores T₁;
    /// callers surface this to the user.
    pub fn validation_warning(&self) -> Option<String> {
        if self.t2 == 0.0 && self.t1 > 0.0 {
            Some(format!(
                "lead-lag `{}`: T2 = 0 with T1 = {} degenerates to a pass-through (T1 ignored)",
                self.id, self.t1
            ))
        } else {
            None
        }
    }

    /// Steady-state back-initialization: `x' = y = u`.
    pub fn initialize(&mut self, u0: f64) {
        self.x_init = u0;
        self.y_init = u0;
    }

    pub fn state_var(&self) -> String {
        format!("{}.xp", self.id)
    }

    pub fn output_var(&self) -> String {
        format!("{}.y", self.id)
    }

    fn input_slot_name(&self) -> String {
        format!("{}.u", self.id)
    }
}

impl Model for LeadLagBlock {
    fn id(&self) -> &str {
        &self.id
    }

    fn declare(&self) -> ModelDecl {
        let mut decl = ModelDecl {
            diff_vars: vec![DiffVarDecl {
                name: self.state_var(),
                mass: self.t2,
                init: self.x_init,
            }],
            alg_vars: vec![AlgVarDecl {
                name: self.output_var(),
                init: self.y_init,
            }],
            ..Default::default()
        };
        if let BlockInput::OwnedDiscrete(init) = self.input {
            decl.discretes.push((self.input_slot_name(), init));
        }
        decl
    }

    fn bind(&mut self, binder: &Binder) -> Result<(), AssemblyError> {
        self.x = binder.var(&self.state_var())?;
        self.y = binder.var(&self.output_var())?;
        self.bound = Some(bind_input(&self.input, &self.input_slot_name(), binder)?);
        Ok(())
    }

    fn residual(&self, ctx: &EvalCtx, f_hat: &mut [f64], g: &mut [f64]) {
        let n = f_hat.len();
        let u = self.bound.as_ref().unwrap().value(ctx);
        let xp = ctx.val(self.x);
        f_hat[self.x] += u - xp;
        g[self.y - n] += self.t1 * self.t2_aux * (u - xp) + xp - ctx.val(self.y);
    }

    fn jacobian_pattern(&self) -> Vec<(usize, usize)> {
        let mut p = vec![(self.x, self.x), (self.y, self.x), (self.y, self.y)];
        if let Some((var, _)) = self.bound.as_ref().unwrap().var_dep() {
            p.push((self.x, var));
            p.push((self.y, var));
        }
        p
    }

    fn jacobian(&self, _ctx: &EvalCtx, out: &mut JacWriter) {
        let k = self.t1 * self.t2_aux;
        out.push(-1.0); // d(u - x')/dx'
        out.push(-k + 1.0); // d(g)/dx'
        out.push(-1.0); // d(g)/dy
        if let Some((_, coeff)) = self.bound.as_ref().unwrap().var_dep() {
            out.push(coeff); // d(u - x')/d var
            out.push(k * coeff); // d(g)/d var
        }
    }
}
