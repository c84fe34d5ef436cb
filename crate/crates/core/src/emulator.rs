//! A uniform handle over "what runs the code": fitted GP surrogates or the
//! exact simulator, laid out as a grid indexed by output `t` and point id.
//! Every call through the grid is one simulator run and bumps a shared
//! counter, so cost formulas can be checked against actual usage.

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crate::error::{CalibError, Result};
use crate::gp::{GpSurrogate, SurrogateSet};
use crate::testbed::{CalibrationProblem, Simulator};

/// Predictive mean and variance of one output at one control point.
pub trait Emulator: Send + Sync {
    fn predict(&self, lambda: &[f64]) -> (f64, f64);
}

impl Emulator for GpSurrogate {
    fn predict(&self, lambda: &[f64]) -> (f64, f64) {
        GpSurrogate::predict(self, lambda)
    }
}

/// The simulator itself; variance is always zero.
pub struct ExactEmulator {
    simulator: Arc<dyn Simulator>,
    x: Vec<f64>,
    t: usize,
}

impl ExactEmulator {
    pub fn new(simulator: Arc<dyn Simulator>, x: Vec<f64>, t: usize) -> Self {
        Self { simulator, x, t }
    }
}

impl Emulator for ExactEmulator {
    fn predict(&self, lambda: &[f64]) -> (f64, f64) {
        (self.simulator.output(&self.x, lambda, self.t), 0.0)
    }
}

/// Constant mean and variance, handy for degenerate cases.
#[derive(Debug, Clone, Copy)]
pub struct ConstantEmulator {
    pub mean: f64,
    pub variance: f64,
}

impl Emulator for ConstantEmulator {
    fn predict(&self, _lambda: &[f64]) -> (f64, f64) {
        (self.mean, self.variance)
    }
}

impl<F> Emulator for F
where
    F: Fn(&[f64]) -> (f64, f64) + Send + Sync,
{
    fn predict(&self, lambda: &[f64]) -> (f64, f64) {
        self(lambda)
    }
}

/// Emulators for every `(t, point)` pair, sharing one run counter.
/// Cloning shares the counter.
#[derive(Clone)]
pub struct EmulatorGrid {
    points: Vec<Vec<f64>>,
    cells: Vec<Vec<Arc<dyn Emulator>>>,
    runs: Arc<AtomicU64>,
}

impl fmt::Debug for EmulatorGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EmulatorGrid")
            .field("n_outputs", &self.cells.len())
            .field("n_points", &self.points.len())
            .field("runs", &self.runs())
            .finish()
    }
}

impl EmulatorGrid {
    /// `cells` is indexed `[t][point]`.
    pub fn new(points: Vec<Vec<f64>>, cells: Vec<Vec<Arc<dyn Emulator>>>) -> Result<Self> {
        if cells.is_empty() {
            return Err(CalibError::Empty("emulator grid"));
        }
        if cells.iter().any(|row| row.len() != points.len()) {
            return Err(CalibError::InvalidArgument(
                "every output needs one emulator per point".into(),
            ));
        }
        Ok(Self {
            points,
            cells,
            runs: Arc::new(AtomicU64::new(0)),
        })
    }

    pub fn from_surrogates(set: &SurrogateSet) -> Self {
        let cells = set
            .surrogates
            .iter()
            .map(|row| row.iter().map(|g| g.clone() as Arc<dyn Emulator>).collect())
            .collect();
        Self {
            points: set.points.clone(),
            cells,
            runs: Arc::new(AtomicU64::new(0)),
        }
    }

    /// Exact simulator at the given control points.
    pub fn exact(problem: &CalibrationProblem, points: &[Vec<f64>]) -> Self {
        let cells = (0..problem.n_outputs)
            .map(|t| {
                points
                    .iter()
                    .map(|x| {
                        Arc::new(ExactEmulator::new(problem.simulator.clone(), x.clone(), t)) as Arc<dyn Emulator>
                    })
                    .collect()
            })
            .collect();
        Self {
            points: points.to_vec(),
            cells,
            runs: Arc::new(AtomicU64::new(0)),
        }
    }

    pub fn n_points(&self) -> usize {
        self.points.len()
    }

    pub fn n_outputs(&self) -> usize {
        self.cells.len()
    }

    pub fn point(&self, j: usize) -> &[f64] {
        &self.points[j]
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    /// Uncounted access to one emulator.
    pub fn cell(&self, t: usize, j: usize) -> &Arc<dyn Emulator> {
        &self.cells[t][j]
    }

    /// One run at point `j`, reading output `t`.
    pub fn run_output(&self, t: usize, j: usize, lambda: &[f64]) -> (f64, f64) {
        self.runs.fetch_add(1, Ordering::Relaxed);
        self.cells[t][j].predict(lambda)
    }

    /// One run at point `j`, reading every output.
    pub fn run_all(&self, j: usize, lambda: &[f64]) -> Vec<(f64, f64)> {
        self.runs.fetch_add(1, Ordering::Relaxed);
        self.cells.iter().map(|row| row[j].predict(lambda)).collect()
    }

    pub fn runs(&self) -> u64 {
        self.runs.load(Ordering::Relaxed)
    }

    pub fn reset_runs(&self) {
        self.runs.store(0, Ordering::Relaxed);
    }

    /// Same emulators with a fresh, independent counter.
    pub fn with_fresh_counter(&self) -> Self {
        Self {
            points: self.points.clone(),
            cells: self.cells.clone(),
            runs: Arc::new(AtomicU64::new(0)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testbed::canonical_simulator;

    #[test]
    fn exact_grid_counts_runs() {
        let problem = canonical_simulator();
        let pts = vec![vec![0.5; 3], vec![0.1, 0.2, 0.3]];
        let grid = EmulatorGrid::exact(&problem, &pts);
        let lam = [0.4, 0.6, 0.5, 0.5, 0.3, 0.7];
        let (m, v) = grid.run_output(0, 0, &lam);
        assert!((m - 0.80).abs() < 1e-12);
        assert_eq!(v, 0.0);
        let all = grid.run_all(1, &lam);
        assert_eq!(all.len(), 3);
        let shared = grid.clone();
        shared.run_output(2, 1, &lam);
        assert_eq!(grid.runs(), 3);
        assert_eq!(grid.with_fresh_counter().runs(), 0);
        grid.reset_runs();
        assert_eq!(shared.runs(), 0);
    }

    #[test]
    fn ragged_cells_rejected() {
        let c: Arc<dyn Emulator> = Arc::new(ConstantEmulator { mean: 1.0, variance: 0.0 });
        assert!(EmulatorGrid::new(vec![vec![0.0]; 2], vec![vec![c.clone()]]).is_err());
        assert!(EmulatorGrid::new(vec![vec![0.0]; 2], vec![vec![c.clone(), c]]).is_ok());
    }
}
