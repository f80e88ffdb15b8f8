//! Diagonal mass matrix over the differential states.
//!
//! Entry `i` multiplies the derivative of state `i`. A zero entry converts the
//! row into an algebraic constraint; the rank of the mass matrix is the count
//! of states that remain genuinely differential. The all-ones diagonal
//! recovers the traditional formulation, a {0,1} diagonal the flexible one.

/// Nonnegative diagonal of the mass matrix (seconds or p.u.-seconds, per
/// owning equation).
#[derive(Debug, Clone, PartialEq)]
pub struct MassDiagonal {
    entries: Vec<f64>,
}

impl MassDiagonal {
    pub fn new(entries: Vec<f64>) -> Self {
        debug_assert!(entries.iter().all(|&e| e >= 0.0));
        Self { entries }
    }

    pub fn ones(n: usize) -> Self {
        Self {
            entries: vec![1.0; n],
        }
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// True when every entry is strictly positive (no reduced states).
    pub fn all_positive(&self) -> bool {
        self.entries.iter().all(|&e| e > 0.0)
    }

    /// Indices of reduced (converted-to-algebraic) states.
    pub fn zero_rows(&self) -> Vec<usize> {
        self.entries
            .iter()
            .enumerate()
            .filter(|(_, &e)| e == 0.0)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Count of strictly positive diagonal entries.
pub fn mass_rank(mass: &MassDiagonal) -> usize {
    mass.entries.iter().filter(|&&e| e > 0.0).count()
}
