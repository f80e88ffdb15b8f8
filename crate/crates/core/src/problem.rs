//! Assembled DAE problem in mass-matrix form.
//!
//! The system is `M ẋ = f̂(x, y, u, t)`, `0 = g(x, y, u, t)` with a diagonal
//! nonnegative `M`. Models contribute variables, mass entries, residual terms
//! and Jacobian stamps; the assembler fixes a deterministic layout (all
//! differential rows first, grouped by model in input order, then algebraic
//! rows) and freezes the Jacobian sparsity pattern. A problem is immutable
//! after assembly and cheap to share between concurrent runs; every run owns
//! its own [`JacWorkspace`].

use std::sync::Arc;

use crate::error::{AssemblyError, EvalError, SolveError};
use crate::layout::{VarInfo, VarKind, VariableLayout};
use crate::mass::MassDiagonal;
use crate::sparse::SparseMatrixHandle;

/// Declaration of one differential state.
#[derive(Debug, Clone)]
pub struct DiffVarDecl {
    pub name: String,
    /// Mass entry of the owning row (time constant, 2H, or 1). Zero converts
    /// the state to an algebraic one.
    pub mass: f64,
    pub init: f64,
}

/// Declaration of one algebraic variable.
#[derive(Debug, Clone)]
pub struct AlgVarDecl {
    pub name: String,
    pub init: f64,
}

/// Everything a model contributes to the layout.
#[derive(Debug, Clone, Default)]
pub struct ModelDecl {
    pub diff_vars: Vec<DiffVarDecl>,
    pub alg_vars: Vec<AlgVarDecl>,
    /// Discrete (discontinuous) quantities: line statuses, setpoints.
    pub discretes: Vec<(String, f64)>,
}

/// Name resolution handed to models during binding.
pub struct Binder<'a> {
    layout: &'a VariableLayout,
    discrete_names: &'a [String],
    owner: &'a str,
}

impl Binder<'_> {
    /// Global index of a variable (differential or algebraic).
    pub fn var(&self, name: &str) -> Result<usize, AssemblyError> {
        self.layout
            .index_of(name)
            .ok_or_else(|| AssemblyError::DanglingReference {
                owner: self.owner.to_string(),
                reference: name.to_string(),
            })
    }

    /// Slot of a discrete quantity in the `u` vector.
    pub fn discrete(&self, name: &str) -> Result<usize, AssemblyError> {
        self.discrete_names
            .iter()
            .position(|d| d == name)
            .ok_or_else(|| AssemblyError::DanglingReference {
                owner: self.owner.to_string(),
                reference: name.to_string(),
            })
    }
}

/// Evaluation context: borrowed state slices at one time point.
#[derive(Clone, Copy)]
pub struct EvalCtx<'a> {
    pub x: &'a [f64],
    pub y: &'a [f64],
    pub u: &'a [f64],
    pub t: f64,
    n: usize,
}

impl EvalCtx<'_> {
    /// Value of a variable by global index.
    #[inline]
    pub fn val(&self, index: usize) -> f64 {
        if index < self.n {
            self.x[index]
        } else {
            self.y[index - self.n]
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BlockId {
    Fx,
    Fy,
    Gx,
    Gy,
}

/// Destination for a model's Jacobian values, in the exact order of its
/// declared pattern.
pub struct JacWriter<'a> {
    map: &'a [(BlockId, u32)],
    fx: &'a mut [f64],
    fy: &'a mut [f64],
    gx: &'a mut [f64],
    gy: &'a mut [f64],
    cursor: usize,
}

impl JacWriter<'_> {
    /// Write the next entry of the model's pattern.
    #[inline]
    pub fn push(&mut self, value: f64) {
        let (block, slot) = self.map[self.cursor];
        let dst = match block {
            BlockId::Fx => &mut self.fx[slot as usize],
            BlockId::Fy => &mut self.fy[slot as usize],
            BlockId::Gx => &mut self.gx[slot as usize],
            BlockId::Gy => &mut self.gy[slot as usize],
        };
        *dst = value;
        self.cursor += 1;
    }

    fn written(&self) -> usize {
        self.cursor
    }
}

/// A contribution to the assembled system: a dynamic device, a transfer
/// function block, or the network itself.
///
/// Binding happens once; after assembly a model is only read. Jacobian values
/// must be pushed in the same order as [`Model::jacobian_pattern`] reports
/// coordinates.
pub trait Model: Send + Sync {
    fn id(&self) -> &str;
    fn declare(&self) -> ModelDecl;
    fn bind(&mut self, binder: &Binder) -> Result<(), AssemblyError>;
    /// Add residual terms. `f_hat` is indexed by global differential row,
    /// `g` by algebraic row (global index minus `n`).
    fn residual(&self, ctx: &EvalCtx, f_hat: &mut [f64], g: &mut [f64]);
    /// Jacobian coordinates as (global equation row, global variable column),
    /// valid only after `bind`.
    fn jacobian_pattern(&self) -> Vec<(usize, usize)>;
    fn jacobian(&self, ctx: &EvalCtx, out: &mut JacWriter);
    /// Validate a discrete-state vector after an event touched it.
    fn validate_discrete(&self, _u: &[f64]) -> Result<(), String> {
        Ok(())
    }
}

/// Mutable Jacobian value storage for one evaluation thread.
#[derive(Debug, Clone)]
pub struct JacWorkspace {
    pub fx: SparseMatrixHandle,
    pub fy: SparseMatrixHandle,
    pub gx: SparseMatrixHandle,
    pub gy: SparseMatrixHandle,
}

#[derive(Debug)]
struct JacLayout {
    fx_pattern: Vec<(u32, u32)>,
    fy_pattern: Vec<(u32, u32)>,
    gx_pattern: Vec<(u32, u32)>,
    gy_pattern: Vec<(u32, u32)>,
    /// Per model, per pattern entry: destination block and slot.
    model_maps: Vec<Vec<(BlockId, u32)>>,
}

/// Consistency report of one state point, from [`DaeProblem::check_consistency`].
#[derive(Debug, Clone)]
pub struct ConsistencyReport {
    pub f_norm: f64,
    pub g_norm: f64,
    /// Equation with the largest differential residual, if any rows exist.
    pub worst_f: Option<String>,
    pub worst_g: Option<String>,
    pub tol: f64,
    pub pass: bool,
}

impl std::fmt::Display for ConsistencyReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "|f|inf = {:.3e} ({}), |g|inf = {:.3e} ({}), tol = {:.1e}: {}",
            self.f_norm,
            self.worst_f.as_deref().unwrap_or("-"),
            self.g_norm,
            self.worst_g.as_deref().unwrap_or("-"),
            self.tol,
            if self.pass { "pass" } else { "FAIL" }
        )
    }
}

/// Initial point of the assembled problem.
#[derive(Debug, Clone)]
pub struct InitialCondition {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub u: Vec<f64>,
    pub t: f64,
}

/// The assembled mass-matrix DAE problem.
pub struct DaeProblem {
    layout: VariableLayout,
    mass: MassDiagonal,
    models: Arc<Vec<Box<dyn Model>>>,
    jac: Arc<JacLayout>,
    init: InitialCondition,
    /// Row scaling applied to f̂ and its Jacobian rows; used by the
    /// traditional-form twin (divide row i by its original mass entry).
    row_scale: Option<Arc<Vec<f64>>>,
    /// Discrete slot names, in `u` order.
    discrete_names: Arc<Vec<String>>,
}

impl std::fmt::Debug for DaeProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DaeProblem")
            .field("n_diff", &self.n_diff())
            .field("n_alg", &self.n_alg())
            .field("mass_rank", &crate::mass::mass_rank(&self.mass))
            .field("models", &self.models.len())
            .field("traditional_twin", &self.row_scale.is_some())
            .finish()
    }
}

/// Assemble a problem from model contributions. The network, when present,
/// goes last by convention so bus variables sit at the end of the algebraic
/// block.
pub fn assemble_problem(models: Vec<Box<dyn Model>>) -> Result<DaeProblem, AssemblyError> {
    DaeProblem::assemble(models)
}

impl DaeProblem {
    pub fn assemble(mut models: Vec<Box<dyn Model>>) -> Result<Self, AssemblyError> {
        if models.is_empty() {
            return Err(AssemblyError::Empty);
        }

        let mut diff = Vec::new();
        let mut alg = Vec::new();
        let mut mass = Vec::new();
        let mut x0 = Vec::new();
        let mut y0 = Vec::new();
        let mut u0 = Vec::new();
        let mut discrete_names: Vec<String> = Vec::new();

        for model in &models {
            let decl = model.declare();
            for d in decl.diff_vars {
                if d.mass < 0.0 {
                    return Err(AssemblyError::NegativeMass {
                        row: d.name,
                        value: d.mass,
                    });
                }
                diff.push(VarInfo {
                    name: d.name,
                    kind: VarKind::Differential,
                    owner: model.id().to_string(),
                });
                mass.push(d.mass);
                x0.push(d.init);
            }
            for a in decl.alg_vars {
                alg.push(VarInfo {
                    name: a.name,
                    kind: VarKind::Algebraic,
                    owner: model.id().to_string(),
                });
                y0.push(a.init);
            }
            for (name, init) in decl.discretes {
                if discrete_names.contains(&name) {
                    return Err(AssemblyError::DuplicateDiscrete(name));
                }
                discrete_names.push(name);
                u0.push(init);
            }
        }

        let layout = VariableLayout::new(diff, alg)?;
        let n = layout.n_diff();

        for model in models.iter_mut() {
            let owner = model.id().to_string();
            let binder = Binder {
                layout: &layout,
                discrete_names: &discrete_names,
                owner: &owner,
            };
            model.bind(&binder)?;
        }

        // Freeze the sparsity pattern: partition every model entry into its
        // block and remember the slot so evaluations write values in order.
        let mut fx_pattern = Vec::new();
        let mut fy_pattern = Vec::new();
        let mut gx_pattern = Vec::new();
        let mut gy_pattern = Vec::new();
        let mut model_maps = Vec::with_capacity(models.len());
        for model in &models {
            let mut map = Vec::new();
            for (row, col) in model.jacobian_pattern() {
                let entry = match (row < n, col < n) {
                    (true, true) => {
                        fx_pattern.push((row as u32, col as u32));
                        (BlockId::Fx, (fx_pattern.len() - 1) as u32)
                    }
                    (true, false) => {
                        fy_pattern.push((row as u32, (col - n) as u32));
                        (BlockId::Fy, (fy_pattern.len() - 1) as u32)
                    }
                    (false, true) => {
                        gx_pattern.push(((row - n) as u32, col as u32));
                        (BlockId::Gx, (gx_pattern.len() - 1) as u32)
                    }
                    (false, false) => {
                        gy_pattern.push(((row - n) as u32, (col - n) as u32));
                        (BlockId::Gy, (gy_pattern.len() - 1) as u32)
                    }
                };
                map.push(entry);
            }
            model_maps.push(map);
        }

        Ok(Self {
            init: InitialCondition {
                x: x0,
                y: y0,
                u: u0,
                t: 0.0,
            },
            layout,
            mass: MassDiagonal::new(mass),
            models: Arc::new(models),
            jac: Arc::new(JacLayout {
                fx_pattern,
                fy_pattern,
                gx_pattern,
                gy_pattern,
                model_maps,
            }),
            row_scale: None,
            discrete_names: Arc::new(discrete_names),
        })
    }

    pub fn layout(&self) -> &VariableLayout {
        &self.layout
    }

    pub fn mass(&self) -> &MassDiagonal {
        &self.mass
    }

    pub fn n_diff(&self) -> usize {
        self.layout.n_diff()
    }

    pub fn n_alg(&self) -> usize {
        self.layout.n_alg()
    }

    pub fn initial(&self) -> &InitialCondition {
        &self.init
    }

    /// Replace the initial condition (used after back-initialization).
    pub fn set_initial(&mut self, init: InitialCondition) {
        assert_eq!(init.x.len(), self.n_diff());
        assert_eq!(init.y.len(), self.n_alg());
        assert_eq!(init.u.len(), self.discrete_names.len());
        self.init = init;
    }

    pub fn discrete_names(&self) -> &[String] {
        &self.discrete_names
    }

    pub fn discrete_slot(&self, name: &str) -> Option<usize> {
        self.discrete_names.iter().position(|d| d == name)
    }

    /// A fresh value workspace matching the frozen pattern.
    pub fn jacobian_workspace(&self) -> JacWorkspace {
        let n = self.n_diff();
        let m = self.n_alg();
        JacWorkspace {
            fx: SparseMatrixHandle::new(n, n, self.jac.fx_pattern.clone()),
            fy: SparseMatrixHandle::new(n, m, self.jac.fy_pattern.clone()),
            gx: SparseMatrixHandle::new(m, n, self.jac.gx_pattern.clone()),
            gy: SparseMatrixHandle::new(m, m, self.jac.gy_pattern.clone()),
        }
    }

    /// Evaluate f̂ and g into caller buffers. Pure in (x, y, u, t).
    pub fn eval_residuals_into(
        &self,
        x: &[f64],
        y: &[f64],
        u: &[f64],
        t: f64,
        f_hat: &mut [f64],
        g: &mut [f64],
    ) -> Result<(), EvalError> {
        let n = self.n_diff();
        debug_assert_eq!(x.len(), n);
        debug_assert_eq!(y.len(), self.n_alg());
        debug_assert_eq!(f_hat.len(), n);
        debug_assert_eq!(g.len(), self.n_alg());
        f_hat.fill(0.0);
        g.fill(0.0);
        let ctx = EvalCtx { x, y, u, t, n };
        for model in self.models.iter() {
            model.residual(&ctx, f_hat, g);
        }
        if let Some(scale) = &self.row_scale {
            for (v, s) in f_hat.iter_mut().zip(scale.iter()) {
                *v /= s;
            }
        }
        if let Some(i) = f_hat.iter().position(|v| !v.is_finite()) {
            return Err(EvalError::NonFiniteResidual {
                equation: self.layout.equation_name(i).to_string(),
            });
        }
        if let Some(i) = g.iter().position(|v| !v.is_finite()) {
            return Err(EvalError::NonFiniteResidual {
                equation: self.layout.equation_name(n + i).to_string(),
            });
        }
        Ok(())
    }

    /// Allocating wrapper around [`Self::eval_residuals_into`].
    pub fn eval_residuals(
        &self,
        x: &[f64],
        y: &[f64],
        u: &[f64],
        t: f64,
    ) -> Result<(Vec<f64>, Vec<f64>), EvalError> {
        let mut f_hat = vec![0.0; self.n_diff()];
        let mut g = vec![0.0; self.n_alg()];
        self.eval_residuals_into(x, y, u, t, &mut f_hat, &mut g)?;
        Ok((f_hat, g))
    }

    /// Evaluate the four analytic Jacobian blocks into `ws`. The pattern is
    /// the assembly-time one; only values change.
    pub fn eval_jacobians(
        &self,
        x: &[f64],
        y: &[f64],
        u: &[f64],
        t: f64,
        ws: &mut JacWorkspace,
    ) -> Result<(), EvalError> {
        let n = self.n_diff();
        let ctx = EvalCtx { x, y, u, t, n };
        let JacWorkspace { fx, fy, gx, gy } = ws;
        for (model, map) in self.models.iter().zip(&self.jac.model_maps) {
            let mut writer = JacWriter {
                map,
                fx: fx.values_mut(),
                fy: fy.values_mut(),
                gx: gx.values_mut(),
                gy: gy.values_mut(),
                cursor: 0,
            };
            model.jacobian(&ctx, &mut writer);
            debug_assert_eq!(
                writer.written(),
                map.len(),
                "model `{}` wrote a partial Jacobian",
                model.id()
            );
        }
        if let Some(scale) = &self.row_scale {
            fx.scale_rows_by_inverse(scale);
            fy.scale_rows_by_inverse(scale);
        }
        for (handle, name) in [(&*fx, "fx"), (&*fy, "fy"), (&*gx, "gx"), (&*gy, "gy")] {
            if let Some((r, c)) = handle.first_non_finite() {
                return Err(EvalError::NonFiniteJacobian {
                    row: format!("{name}[{r}]"),
                    col: c.to_string(),
                });
            }
        }
        Ok(())
    }

    /// Consistency diagnostic: infinity norms of both residual parts with the
    /// worst-offending equation names.
    pub fn check_consistency(
        &self,
        x: &[f64],
        y: &[f64],
        u: &[f64],
        t: f64,
        tol: f64,
    ) -> Result<ConsistencyReport, EvalError> {
        let (f_hat, g) = self.eval_residuals(x, y, u, t)?;
        let worst = |v: &[f64]| -> (f64, Option<usize>) {
            let mut norm = 0.0;
            let mut idx = None;
            for (i, &e) in v.iter().enumerate() {
                if e.abs() > norm {
                    norm = e.abs();
                    idx = Some(i);
                }
            }
            (norm, idx)
        };
        let (f_norm, worst_f) = worst(&f_hat);
        let (g_norm, worst_g) = worst(&g);
        let n = self.n_diff();
        Ok(ConsistencyReport {
            f_norm,
            g_norm,
            worst_f: worst_f.map(|i| self.layout.equation_name(i).to_string()),
            worst_g: worst_g.map(|i| self.layout.equation_name(n + i).to_string()),
            tol,
            pass: f_norm <= tol && g_norm <= tol,
        })
    }

    /// Equivalence-test twin in the traditional formulation: mass all ones,
    /// every residual row divided by its original mass entry. Fails on
    /// reduced problems (a zero mass entry has no traditional counterpart).
    pub fn to_traditional(&self) -> Result<DaeProblem, SolveError> {
        if let Some(i) = self.mass.entries().iter().position(|&e| e == 0.0) {
            return Err(SolveError::NotRepresentable {
                row: self.layout.equation_name(i).to_string(),
            });
        }
        let scale: Vec<f64> = match &self.row_scale {
            Some(existing) => existing
                .iter()
                .zip(self.mass.entries())
                .map(|(s, m)| s * m)
                .collect(),
            None => self.mass.entries().to_vec(),
        };
        Ok(DaeProblem {
            layout: self.layout.clone(),
            mass: MassDiagonal::ones(self.n_diff()),
            models: Arc::clone(&self.models),
            jac: Arc::clone(&self.jac),
            init: self.init.clone(),
            row_scale: Some(Arc::new(scale)),
            discrete_names: Arc::clone(&self.discrete_names),
        })
    }

    /// Ask every model whether the discrete vector is valid (e.g. the network
    /// checks connectivity after a switching event).
    pub fn validate_discrete(&self, u: &[f64]) -> Result<(), String> {
        for model in self.models.iter() {
            model.validate_discrete(u)?;
        }
        Ok(())
    }
}
