use serde::{Deserialize, Serialize};

use super::prior::HierPrior;
use crate::error::{CalibError, Result};
use crate::likelihood::LogLikelihood;
use crate::par;
use crate::seed;
use crate::stats::{log_mean_exp, log_sum_exp};

/// Draws from `p_Λ(·|α*)` with their cached log-likelihoods, reusable for
/// importance-sampling estimates of the likelihood of any `α`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsBank {
    pub alpha_ref: Vec<f64>,
    pub lambdas: Vec<Vec<f64>>,
    pub loglik: Vec<f64>,
    pub logprior_ref: Vec<f64>,
}

impl IsBank {
    /// `n` draws at `alpha_ref`; likelihoods are evaluated in parallel.
    pub fn build<L: LogLikelihood + ?Sized>(
        prior: &HierPrior,
        alpha_ref: &[f64],
        n: usize,
        lik: &L,
        seed: u64,
    ) -> Result<Self> {
        if n == 0 {
            return Err(CalibError::InvalidArgument("bank size must be >= 1".into()));
        }
        prior.check_alpha(alpha_ref)?;
        let mut rng = seed::rng(seed);
        let lambdas: Vec<Vec<f64>> = (0..n).map(|_| prior.sample(alpha_ref, &mut rng)).collect();
        let loglik = par::map_slice(&lambdas, |l| lik.log_likelihood(l));
        Self::from_parts(prior, alpha_ref, lambdas, loglik)
    }

    /// Assembles a bank from given draws and log-likelihoods.
    pub fn from_parts(prior: &HierPrior, alpha_ref: &[f64], lambdas: Vec<Vec<f64>>, loglik: Vec<f64>) -> Result<Self> {
        if lambdas.len() != loglik.len() || lambdas.is_empty() {
            return Err(CalibError::InvalidArgument("bank draws and likelihoods must align".into()));
        }
        let at = prior.at(alpha_ref);
        let logprior_ref = lambdas.iter().map(|l| at.logpdf(l)).collect();
        Ok(Self {
            alpha_ref: alpha_ref.to_vec(),
            lambdas,
            loglik,
            logprior_ref,
        })
    }

    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    /// `ln p(y|Λ'_k) + ln p_Λ(Λ'_k|α) - ln p_Λ(Λ'_k|α*)` for every `k`.
    pub fn log_terms(&self, prior: &HierPrior, alpha: &[f64]) -> Vec<f64> {
        let at = prior.at(alpha);
        self.lambdas
            .iter()
            .zip(&self.loglik)
            .zip(&self.logprior_ref)
            .map(|((l, &ll), &lr)| ll + at.logpdf(l) - lr)
            .collect()
    }

    /// Log of the importance-sampling estimate of `p(y|α)`.
    pub fn loglik_alpha(&self, prior: &HierPrior, alpha: &[f64]) -> f64 {
        log_mean_exp(&self.log_terms(prior, alpha))
    }

    /// Estimate together with its delta-method standard error on the log
    /// scale, `sd(w) / (√L · mean(w))`.
    pub fn loglik_alpha_with_se(&self, prior: &HierPrior, alpha: &[f64]) -> (f64, f64) {
        let terms = self.log_terms(prior, alpha);
        let est = log_mean_exp(&terms);
        if !est.is_finite() || terms.len() < 2 {
            return (est, f64::INFINITY);
        }
        let n = terms.len() as f64;
        // relative variance of the weights, computed on the scale exp(t - est)
        let sq: Vec<f64> = terms.iter().map(|t| 2.0 * (t - est)).collect();
        let mean_sq = (log_sum_exp(&sq) - n.ln()).exp();
        let rel_var = (mean_sq - 1.0).max(0.0) * n / (n - 1.0);
        (est, (rel_var / n).sqrt())
    }
}

pub fn is_bank_build<L: LogLikelihood + ?Sized>(
    prior: &HierPrior,
    alpha_ref: &[f64],
    n: usize,
    lik: &L,
    seed: u64,
) -> Result<IsBank> {
    IsBank::build(prior, alpha_ref, n, lik, seed)
}

pub fn is_loglik_alpha(bank: &IsBank, prior: &HierPrior, alpha: &[f64]) -> f64 {
    bank.loglik_alpha(prior, alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::TruncNormal;

    #[test]
    fn self_reference_is_log_mean_of_cache() {
        let prior = HierPrior::new(1, 2);
        let lik = |l: &[f64]| -((l[0] - 0.2).powi(2) + (l[1] - 0.7).powi(2)) * 10.0;
        let bank = IsBank::build(&prior, &[0.4], 500, &lik, 9).unwrap();
        let direct = log_mean_exp(&bank.loglik);
        assert!((bank.loglik_alpha(&prior, &[0.4]) - direct).abs() < 1e-12);
    }

    #[test]
    fn single_draw_bank() {
        let prior = HierPrior::new(0, 1);
        let lik = |l: &[f64]| -l[0];
        let bank = IsBank::build(&prior, &[0.5], 1, &lik, 3).unwrap();
        let l = bank.lambdas[0][0];
        let expect = -l + prior.logpdf(&[l], &[2.0]) - prior.logpdf(&[l], &[0.5]);
        assert!((bank.loglik_alpha(&prior, &[2.0]) - expect).abs() < 1e-12);
        assert!(IsBank::build(&prior, &[0.5], 0, &lik, 3).is_err());
    }

    #[test]
    fn error_coordinate_mean() {
        let prior = HierPrior::new(2, 3);
        let bank = IsBank::build(&prior, &[-0.7], 10_000, &|_: &[f64]| 0.0, 4).unwrap();
        let xs: Vec<f64> = bank.lambdas.iter().map(|l| l[2]).collect();
        let m = crate::stats::mean(&xs);
        let se = crate::stats::sample_variance(&xs).sqrt() / 100.0;
        let tn = TruncNormal::new(-0.7, 0.45, 0.0, 1.0);
        assert!((m - tn.mean()).abs() < 3.0 * se);
    }

    #[test]
    fn all_neg_inf_terms() {
        let prior = HierPrior::new(0, 1);
        let bank = IsBank::build(&prior, &[0.5], 10, &|_: &[f64]| f64::NEG_INFINITY, 1).unwrap();
        assert_eq!(bank.loglik_alpha(&prior, &[0.1]), f64::NEG_INFINITY);
    }

    #[test]
    fn constant_shift_moves_estimate_only() {
        let prior = HierPrior::new(0, 1);
        let lik = |l: &[f64]| -8.0 * (l[0] - 0.3).powi(2);
        let a = IsBank::build(&prior, &[0.5], 300, &lik, 2).unwrap();
        let mut b = a.clone();
        b.loglik.iter_mut().for_each(|v| *v += 5.0);
        for &al in &[-1.0, 0.0, 0.4, 1.3] {
            assert!((b.loglik_alpha(&prior, &[al]) - a.loglik_alpha(&prior, &[al]) - 5.0).abs() < 1e-10);
        }
    }
}
