//! Gaussian measurement model with surrogate uncertainty added to the noise:
//! `y_j ~ N(f̂(x_j, λ), σ_ε² + v(x_j, λ))`, independently over `j`.

use crate::emulator::EmulatorGrid;
use crate::error::{CalibError, Result};
use crate::stats::LN_SQRT_2PI;
use crate::testbed::ObservationSet;

/// Anything that scores a parameter vector against the data.
pub trait LogLikelihood: Sync {
    fn log_likelihood(&self, lambda: &[f64]) -> f64;
}

impl<F> LogLikelihood for F
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    fn log_likelihood(&self, lambda: &[f64]) -> f64 {
        self(lambda)
    }
}

#[derive(Debug, Clone)]
pub struct MeasurementModel {
    values: Vec<f64>,
    sigma_eps: f64,
    /// 0-based observed output.
    obs_output: usize,
    /// Grid point id of each observation.
    point_ids: Vec<usize>,
    grid: EmulatorGrid,
}

impl MeasurementModel {
    pub fn new(values: Vec<f64>, sigma_eps: f64, obs_output: usize, point_ids: Vec<usize>, grid: EmulatorGrid) -> Result<Self> {
        if values.len() != point_ids.len() {
            return Err(CalibError::InvalidArgument("one point id per observation required".into()));
        }
        if !(sigma_eps > 0.0 && sigma_eps.is_finite()) {
            return Err(CalibError::InvalidArgument(format!("sigma_eps must be positive, got {sigma_eps}")));
        }
        if obs_output >= grid.n_outputs() {
            return Err(CalibError::IndexOutOfRange {
                index: obs_output,
                len: grid.n_outputs(),
            });
        }
        if let Some(&bad) = point_ids.iter().find(|&&j| j >= grid.n_points()) {
            return Err(CalibError::IndexOutOfRange {
                index: bad,
                len: grid.n_points(),
            });
        }
        Ok(Self {
            values,
            sigma_eps,
            obs_output,
            point_ids,
            grid,
        })
    }

    /// Observation `j` maps to grid point `j`.
    pub fn from_observations(obs: &ObservationSet, grid: EmulatorGrid) -> Result<Self> {
        if grid.n_points() < obs.len() {
            return Err(CalibError::InvalidArgument(format!(
                "grid has {} points for {} observations",
                grid.n_points(),
                obs.len()
            )));
        }
        Self::new(obs.values.clone(), obs.sigma_eps, obs.t_obs - 1, (0..obs.len()).collect(), grid)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn sigma_eps(&self) -> f64 {
        self.sigma_eps
    }

    pub fn obs_output(&self) -> usize {
        self.obs_output
    }

    pub fn point_ids(&self) -> &[usize] {
        &self.point_ids
    }

    pub fn grid(&self) -> &EmulatorGrid {
        &self.grid
    }

    /// Same data with a different noise level.
    pub fn with_sigma(&self, sigma_eps: f64) -> Result<Self> {
        Self::new(self.values.clone(), sigma_eps, self.obs_output, self.point_ids.clone(), self.grid.clone())
    }

    /// Same data on a grid with its own run counter.
    pub fn with_fresh_counter(&self) -> Self {
        Self {
            grid: self.grid.with_fresh_counter(),
            ..self.clone()
        }
    }

    /// `Σ_j log N(y_j; f̂_j, σ_ε² + v_j)`; `n` runs per call.
    pub fn log_likelihood(&self, lambda: &[f64]) -> f64 {
        let s2 = self.sigma_eps * self.sigma_eps;
        let mut total = 0.0;
        for (&y, &j) in self.values.iter().zip(&self.point_ids) {
            let (f, v) = self.grid.run_output(self.obs_output, j, lambda);
            if !(f.is_finite() && v.is_finite()) {
                log::warn!("non-finite surrogate output at point {j}");
                return f64::NEG_INFINITY;
            }
            let var = s2 + v.max(0.0);
            let r = y - f;
            total += -LN_SQRT_2PI - 0.5 * var.ln() - 0.5 * r * r / var;
        }
        total
    }

    /// Drops observation `j_hold`.
    pub fn loo_model(&self, j_hold: usize) -> Result<Self> {
        if j_hold >= self.len() {
            return Err(CalibError::IndexOutOfRange {
                index: j_hold,
                len: self.len(),
            });
        }
        if self.len() < 2 {
            return Err(CalibError::InvalidArgument("leave-one-out needs n >= 2".into()));
        }
        let mut values = self.values.clone();
        let mut ids = self.point_ids.clone();
        values.remove(j_hold);
        ids.remove(j_hold);
        Self::new(values, self.sigma_eps, self.obs_output, ids, self.grid.clone())
    }
}

impl LogLikelihood for MeasurementModel {
    fn log_likelihood(&self, lambda: &[f64]) -> f64 {
        MeasurementModel::log_likelihood(self, lambda)
    }
}

pub fn log_likelihood(model: &MeasurementModel, lambda: &[f64]) -> f64 {
    model.log_likelihood(lambda)
}

pub fn loo_model(model: &MeasurementModel, j_hold: usize) -> Result<MeasurementModel> {
    model.loo_model(j_hold)
}
