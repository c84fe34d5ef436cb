use serde::{Deserialize, Serialize};

use super::bank::IsBank;
use super::prior::HierPrior;
use crate::error::{CalibError, Result};
use crate::stats::norm_cdf;

/// Asymptotic confidence that `p(α|y) < β p(α*|y)`, estimated from a large
/// bank drawn at `α*`.
///
/// Each bank sample contributes
/// `c_k = p(y|Λ'_k) [p(Λ'_k|α) p_A(α) - β p(Λ'_k|α*) p_A(α*)] / p(Λ'_k|α*)`;
/// the result is `Φ(-√L' mean(c) / sd(c))`. All terms are rescaled by a
/// common factor before leaving log space, which cancels in the ratio.
pub fn confidence_level(
    bank: &IsBank,
    prior: &HierPrior,
    alpha: &[f64],
    beta: f64,
    log_p_a: &dyn Fn(&[f64]) -> f64,
) -> Result<f64> {
    let n = bank.len();
    if n < 2 {
        return Err(CalibError::InvalidArgument("confidence level needs at least 2 samples".into()));
    }
    if !(beta >= 1.0) {
        return Err(CalibError::InvalidArgument(format!("beta must be >= 1, got {beta}")));
    }
    prior.check_alpha(alpha)?;
    let lpa = log_p_a(alpha);
    let lpa_ref = log_p_a(&bank.alpha_ref);
    let at = prior.at(alpha);
    let offset = lpa - lpa_ref - beta.ln();
    // c_k / (β p(Λ'|α*) p_A(α*)) = L_k (r_k - 1), with r_k the prior ratio
    let log_ratio: Vec<f64> = bank
        .lambdas
        .iter()
        .zip(&bank.logprior_ref)
        .map(|(l, &lr)| at.logpdf(l) - lr + offset)
        .collect();
    let shift = bank
        .loglik
        .iter()
        .zip(&log_ratio)
        .map(|(&ll, &d)| ll + d.max(0.0))
        .filter(|v| v.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    if shift == f64::NEG_INFINITY {
        return Ok(0.5);
    }
    let c: Vec<f64> = bank
        .loglik
        .iter()
        .zip(&log_ratio)
        .map(|(&ll, &d)| if d == f64::NEG_INFINITY { -(ll - shift).exp() } else { (ll - shift).exp() * d.exp_m1() })
        .collect();
    let mean = c.iter().sum::<f64>() / n as f64;
    let var = c.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let numerator = -mean;
    let s = var.sqrt();
    if s == 0.0 {
        return Ok(if numerator > 0.0 {
            1.0
        } else if numerator == 0.0 {
            0.5
        } else {
            0.0
        });
    }
    Ok(norm_cdf((n as f64).sqrt() * numerator / s))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConfidenceCell {
    pub alpha: Vec<f64>,
    pub gamma: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConfidenceMap {
    pub alpha_star: Vec<f64>,
    pub beta: f64,
    pub zeta: f64,
    pub cells: Vec<ConfidenceCell>,
    pub min_gamma: f64,
    pub meets_threshold: bool,
}

/// Uniform grid with `per_axis` nodes per coordinate over `[lo, hi]`.
pub fn uniform_grid(lo: &[f64], hi: &[f64], per_axis: usize) -> Vec<Vec<f64>> {
    let d = lo.len();
    let per_axis = per_axis.max(1);
    let axis = |i: usize, k: usize| {
        if per_axis == 1 {
            0.5 * (lo[i] + hi[i])
        } else {
            lo[i] + (hi[i] - lo[i]) * k as f64 / (per_axis - 1) as f64
        }
    };
    let total = per_axis.pow(d as u32);
    (0..total)
        .map(|mut idx| {
            (0..d)
                .map(|i| {
                    let k = idx % per_axis;
                    idx /= per_axis;
                    axis(i, k)
                })
                .collect()
        })
        .collect()
}

/// Evaluates `γ` over a grid and summarizes it against `ζ`.
pub fn confidence_map(
    bank: &IsBank,
    prior: &HierPrior,
    grid: &[Vec<f64>],
    beta: f64,
    zeta: f64,
    log_p_a: &(dyn Fn(&[f64]) -> f64 + Sync),
) -> Result<ConfidenceMap> {
    let cells: Vec<Result<ConfidenceCell>> = crate::par::map_slice(grid, |a| {
        confidence_level(bank, prior, a, beta, log_p_a).map(|gamma| ConfidenceCell { alpha: a.clone(), gamma })
    });
    let cells = cells.into_iter().collect::<Result<Vec<_>>>()?;
    let min_gamma = cells.iter().map(|c| c.gamma).fold(f64::INFINITY, f64::min);
    Ok(ConfidenceMap {
        alpha_star: bank.alpha_ref.clone(),
        beta,
        zeta,
        min_gamma,
        meets_threshold: min_gamma >= zeta,
        cells,
    })
}
