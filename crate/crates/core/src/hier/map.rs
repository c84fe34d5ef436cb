use serde::{Deserialize, Serialize};

use super::bank::IsBank;
use super::prior::HierPrior;
use crate::error::{CalibError, Result};
use crate::lhs::{lhs_design, scale_to_box};
use crate::likelihood::LogLikelihood;
use crate::optim::{bounded_quasi_newton, multistart, OptimOptions};
use crate::seed;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MapConfig {
    pub tau: f64,
    pub max_iters: usize,
    /// Starting hyperparameter; `None` means 0.5 in every coordinate.
    pub alpha0: Option<Vec<f64>>,
    /// Bank size `L`.
    pub n_bank: usize,
    /// Latin-hypercube starts added to the current iterate.
    pub n_lhs_starts: usize,
}

impl Default for MapConfig {
    fn default() -> Self {
        Self {
            tau: 0.05,
            max_iters: 20,
            alpha0: None,
            n_bank: 10_000,
            n_lhs_starts: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapIterate {
    pub alpha: Vec<f64>,
    /// Euclidean distance to the previous iterate.
    pub nu: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MapResult {
    pub alpha_star: Vec<f64>,
    pub alpha0: Vec<f64>,
    pub iterates: Vec<MapIterate>,
    pub converged: bool,
    pub tau: f64,
    /// Bank of the last iteration, drawn at the previous iterate.
    #[serde(skip)]
    pub bank: Option<IsBank>,
}

impl MapResult {
    pub fn n_iterations(&self) -> usize {
        self.iterates.len()
    }
}

/// Maximizes `bank.loglik_alpha(α) + log_p_a(α)` over the prior's α box.
pub fn maximize_alpha(
    prior: &HierPrior,
    bank: &IsBank,
    log_p_a: &(dyn Fn(&[f64]) -> f64 + Sync),
    n_lhs_starts: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let (lo, hi) = prior.alpha_box();
    let mut starts = vec![bank.alpha_ref.iter().zip(lo.iter().zip(&hi)).map(|(a, (l, h))| a.clamp(*l, *h)).collect::<Vec<f64>>()];
    if n_lhs_starts > 0 {
        let design = lhs_design(n_lhs_starts, prior.n_error(), seed)?;
        starts.extend(scale_to_box(&design, &lo, &hi));
    }
    let objective = |a: &[f64]| -(bank.loglik_alpha(prior, a) + log_p_a(a));
    let opts = OptimOptions::default();
    let best = multistart(&starts, |s| bounded_quasi_newton(objective, s, &lo, &hi, &opts));
    if !best.fx.is_finite() {
        return Err(CalibError::DegenerateWeights { row: 0 });
    }
    Ok(best.x)
}

/// Iterative MAP estimate of the hyperparameters: rebuild the bank at the
/// current iterate, maximize the estimated posterior, repeat until the step
/// falls below `tau` or `max_iters` is reached. On non-convergence the last
/// iterate is returned with `converged = false`.
pub fn map_iterate<L: LogLikelihood + ?Sized>(
    prior: &HierPrior,
    log_p_a: &(dyn Fn(&[f64]) -> f64 + Sync),
    lik: &L,
    cfg: &MapConfig,
    seed: u64,
) -> Result<MapResult> {
    if !(cfg.tau > 0.0) {
        return Err(CalibError::InvalidArgument(format!("tau must be positive, got {}", cfg.tau)));
    }
    if cfg.max_iters == 0 {
        return Err(CalibError::InvalidArgument("max_iters must be >= 1".into()));
    }
    let alpha0 = cfg.alpha0.clone().unwrap_or_else(|| vec![0.5; prior.n_error()]);
    prior.check_alpha(&alpha0)?;
    if alpha0.iter().any(|a| *a < prior.alpha_lo || *a > prior.alpha_hi) {
        return Err(CalibError::InvalidArgument("alpha0 outside the alpha box".into()));
    }

    let mut current = alpha0.clone();
    let mut iterates = Vec::new();
    let mut converged = false;
    let mut bank = None;
    for ell in 0..cfg.max_iters {
        let b = IsBank::build(
            prior,
            &current,
            cfg.n_bank,
            lik,
            seed::derive(seed, &[seed::stream::BANK, ell as u64]),
        )?;
        let next = maximize_alpha(
            prior,
            &b,
            log_p_a,
            cfg.n_lhs_starts,
            seed::derive(seed, &[seed::stream::MAP_STARTS, ell as u64]),
        )?;
        let nu = current.iter().zip(&next).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        log::debug!("MAP iteration {}: alpha = {:?}, nu = {:.4}", ell + 1, next, nu);
        iterates.push(MapIterate { alpha: next.clone(), nu });
        bank = Some(b);
        current = next;
        if nu <= cfg.tau {
            converged = true;
            break;
        }
    }
    Ok(MapResult {
        alpha_star: current,
        alpha0,
        iterates,
        converged,
        tau: cfg.tau,
        bank,
    })
}

/// Flat log-prior, the default for the MAP stage.
pub fn flat_log_prior(_alpha: &[f64]) -> f64 {
    0.0
}
