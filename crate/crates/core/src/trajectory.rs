//! Time-series output of an integration run.

/// Counters accumulated over one integration run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunStats {
    pub steps_accepted: u64,
    pub steps_rejected: u64,
    pub newton_iters: u64,
}

/// Accepted-step history: strictly increasing times, one value row per step
/// (all `n + m` variables in layout order), plus event markers.
#[derive(Debug, Clone)]
pub struct Trajectory {
    times: Vec<f64>,
    values: Vec<f64>,
    width: usize,
    events: Vec<(f64, String)>,
    pub stats: RunStats,
}

impl Trajectory {
    pub fn new(width: usize) -> Self {
        Self {
            times: Vec::new(),
            values: Vec::new(),
            width,
            events: Vec::new(),
            stats: RunStats::default(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn push_row(&mut self, t: f64, row: &[f64]) {
        assert_eq!(row.len(), self.width);
        if let Some(&last) = self.times.last() {
            assert!(t > last, "times must be strictly increasing ({t} after {last})");
        }
        self.times.push(t);
        self.values.extend_from_slice(row);
    }

    /// Overwrite the last row in place (post-event algebraic update).
    pub fn replace_last_row(&mut self, row: &[f64]) {
        assert_eq!(row.len(), self.width);
        let start = self.values.len() - self.width;
        self.values[start..].copy_from_slice(row);
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.width..(i + 1) * self.width]
    }

    pub fn last_row(&self) -> Option<&[f64]> {
        if self.is_empty() {
            None
        } else {
            Some(self.row(self.len() - 1))
        }
    }

    pub fn push_event(&mut self, t: f64, id: &str) {
        self.events.push((t, id.to_string()));
    }

    pub fn events(&self) -> &[(f64, String)] {
        &self.events
    }

    /// Values of one variable over time.
    pub fn column(&self, var: usize) -> Vec<f64> {
        (0..self.len()).map(|i| self.row(i)[var]).collect()
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = (f64, &[f64])> {
        self.times
            .iter()
            .copied()
            .zip(self.values.chunks_exact(self.width))
    }
}
