//! One-dimensional conjugate model with a closed-form marginal likelihood:
//! a single error coordinate `λ ~ TN(α, σ², 0, 1)` observed once through
//! `y ~ N(λ, s²)`.

use super::prior::HierPrior;
use crate::stats::{norm_logpdf, TruncNormal};

#[derive(Debug, Clone, Copy)]
pub struct ConjugateToy {
    pub y: f64,
    pub s: f64,
}

impl ConjugateToy {
    pub fn prior(&self) -> HierPrior {
        HierPrior::new(0, 1)
    }

    pub fn log_likelihood(&self, lambda: &[f64]) -> f64 {
        norm_logpdf((self.y - lambda[0]) / self.s) - self.s.ln()
    }

    /// `ln ∫₀¹ N(y; λ, s²) TN(λ; α, σ², 0, 1) dλ`.
    pub fn log_marginal(&self, alpha: f64, sigma_prior: f64) -> f64 {
        let s2 = self.s * self.s;
        let p2 = sigma_prior * sigma_prior;
        let tot = (s2 + p2).sqrt();
        let v = 1.0 / (1.0 / s2 + 1.0 / p2);
        let m = v * (self.y / s2 + alpha / p2);
        norm_logpdf((self.y - alpha) / tot) - tot.ln() + TruncNormal::new(m, v.sqrt(), 0.0, 1.0).log_mass()
            - TruncNormal::new(alpha, sigma_prior, 0.0, 1.0).log_mass()
    }

    /// Posterior mean of `λ` given `α`.
    pub fn posterior_mean(&self, alpha: f64, sigma_prior: f64) -> f64 {
        let s2 = self.s * self.s;
        let p2 = sigma_prior * sigma_prior;
        let v = 1.0 / (1.0 / s2 + 1.0 / p2);
        let m = v * (self.y / s2 + alpha / p2);
        TruncNormal::new(m, v.sqrt(), 0.0, 1.0).mean()
    }
}
