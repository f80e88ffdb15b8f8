//! Variable layout of an assembled problem.
//!
//! Differential states occupy indices `0..n`, algebraic variables `n..n+m`.
//! Equation row `i` is owned by variable `i`: each differential state has its
//! own dynamic equation, and each algebraic variable is paired with the
//! balance or definition row that determines it.

use std::collections::HashMap;

use crate::error::AssemblyError;

/// Whether a variable carries a derivative term or is purely algebraic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Differential,
    Algebraic,
}

/// One variable of the assembled system.
#[derive(Debug, Clone)]
pub struct VarInfo {
    pub name: String,
    pub kind: VarKind,
    /// Id of the model that declared the variable.
    pub owner: String,
}

/// Ordered variable table: `n` differential states followed by `m` algebraic
/// variables. Names are unique across the whole system.
#[derive(Debug, Clone)]
pub struct VariableLayout {
    vars: Vec<VarInfo>,
    n: usize,
    m: usize,
    by_name: HashMap<String, usize>,
}

impl VariableLayout {
    pub(crate) fn new(diff: Vec<VarInfo>, alg: Vec<VarInfo>) -> Result<Self, AssemblyError> {
        let n = diff.len();
        let m = alg.len();
        let mut vars = diff;
        vars.extend(alg);
        let mut by_name = HashMap::with_capacity(vars.len());
        for (i, v) in vars.iter().enumerate() {
            if by_name.insert(v.name.clone(), i).is_some() {
                return Err(AssemblyError::DuplicateVariable(v.name.clone()));
            }
        }
        Ok(Self { vars, n, m, by_name })
    }

    /// Number of differential states.
    pub fn n_diff(&self) -> usize {
        self.n
    }

    /// Number of algebraic variables.
    pub fn n_alg(&self) -> usize {
        self.m
    }

    /// Total variable count `n + m`.
    pub fn total(&self) -> usize {
        self.n + self.m
    }

    pub fn var(&self, index: usize) -> &VarInfo {
        &self.vars[index]
    }

    pub fn vars(&self) -> &[VarInfo] {
        &self.vars
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.by_name.get(name).copied()
    }

    /// Name of the equation row `i` (the row owned by variable `i`).
    pub fn equation_name(&self, row: usize) -> &str {
        &self.vars[row].name
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.vars.iter().map(|v| v.name.as_str())
    }
}
