use serde::{Deserialize, Serialize};

use super::bank::IsBank;
use super::prior::HierPrior;
use crate::emulator::Emulator;
use crate::error::{CalibError, Result};
use crate::likelihood::LogLikelihood;
use crate::mcmc::{self, Chain, DramConfig};
use crate::par;
use crate::stats::log_sum_exp;

/// `[α*_i - κ, α*_i + κ] ∩ [lo, hi]` per coordinate.
pub fn kappa_box(prior: &HierPrior, alpha_star: &[f64], kappa: f64) -> (Vec<f64>, Vec<f64>) {
    let lo = alpha_star.iter().map(|a| (a - kappa).max(prior.alpha_lo)).collect();
    let hi = alpha_star.iter().map(|a| (a + kappa).min(prior.alpha_hi)).collect();
    (lo, hi)
}

/// Samples `α` from the IS-estimated likelihood times a uniform prior on the
/// κ-box around `alpha_star`, starting at `alpha_star`.
pub fn sample_alpha_chain(
    prior: &HierPrior,
    bank: &IsBank,
    alpha_star: &[f64],
    kappa: f64,
    mut cfg: DramConfig,
) -> Result<Chain> {
    let (lo, hi) = kappa_box(prior, alpha_star, kappa);
    cfg.init = alpha_star.iter().zip(lo.iter().zip(&hi)).map(|(a, (l, h))| a.clamp(*l, *h)).collect();
    mcmc::sample(|a| bank.loglik_alpha(prior, a), &lo, &hi, &cfg)
}

/// Samples `λ` from `p(y|λ) p_Λ(λ|α*)` over the unit cube.
pub fn sample_lambda_chain<L: LogLikelihood + ?Sized>(
    prior: &HierPrior,
    alpha_star: &[f64],
    lik: &L,
    cfg: &DramConfig,
) -> Result<Chain> {
    let at = prior.at(alpha_star);
    let lo = vec![0.0; prior.q];
    let hi = vec![1.0; prior.q];
    mcmc::sample(
        |l| {
            let lp = at.logpdf(l);
            if lp == f64::NEG_INFINITY {
                lp
            } else {
                lp + lik.log_likelihood(l)
            }
        },
        &lo,
        &hi,
        cfg,
    )
}

/// Hyperparameter draws, one λ-chain, and the normalized weight matrix
/// `w_ik ∝ p_Λ(Λ_k|A_i) / p_Λ(Λ_k|α*)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PosteriorEnsemble {
    pub alpha_star: Vec<f64>,
    pub alpha_samples: Vec<Vec<f64>>,
    pub lambda_samples: Vec<Vec<f64>>,
    /// `N × M`, each row sums to one.
    pub weights: Vec<Vec<f64>>,
    /// Row average of `weights`, the effective weight of each `Λ_k`.
    pub mixture: Vec<f64>,
}

impl PosteriorEnsemble {
    pub fn assemble(
        prior: &HierPrior,
        alpha_star: &[f64],
        alpha_samples: Vec<Vec<f64>>,
        lambda_samples: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if alpha_samples.is_empty() || lambda_samples.is_empty() {
            return Err(CalibError::Empty("posterior ensemble"));
        }
        let ref_at = prior.at(alpha_star);
        let lp_ref: Vec<f64> = lambda_samples.iter().map(|l| ref_at.logpdf(l)).collect();
        if lp_ref.iter().any(|v| !v.is_finite()) {
            return Err(CalibError::InvalidArgument("λ sample outside the prior support".into()));
        }
        let rows: Vec<Result<Vec<f64>>> = par::map_range(alpha_samples.len(), |i| {
            let at = prior.at(&alpha_samples[i]);
            let lw: Vec<f64> = lambda_samples.iter().zip(&lp_ref).map(|(l, r)| at.logpdf(l) - r).collect();
            let z = log_sum_exp(&lw);
            if !z.is_finite() {
                return Err(CalibError::DegenerateWeights { row: i });
            }
            Ok(lw.iter().map(|v| (v - z).exp()).collect())
        });
        let weights = rows.into_iter().collect::<Result<Vec<_>>>()?;
        let m = lambda_samples.len();
        let n = weights.len() as f64;
        let mut mixture = vec![0.0; m];
        for row in &weights {
            for (acc, w) in mixture.iter_mut().zip(row) {
                *acc += w;
            }
        }
        mixture.iter_mut().for_each(|v| *v /= n);
        Ok(Self {
            alpha_star: alpha_star.to_vec(),
            alpha_samples,
            lambda_samples,
            weights,
            mixture,
        })
    }

    /// Plug-in ensemble: a single hyperparameter equal to `α*`, so every
    /// weight is `1/M`.
    pub fn plug_in(prior: &HierPrior, alpha_star: &[f64], lambda_samples: Vec<Vec<f64>>) -> Result<Self> {
        Self::assemble(prior, alpha_star, vec![alpha_star.to_vec()], lambda_samples)
    }

    /// Equal weights without any prior, for the non-hierarchical methods.
    pub fn uniform(lambda_samples: Vec<Vec<f64>>) -> Result<Self> {
        if lambda_samples.is_empty() {
            return Err(CalibError::Empty("posterior ensemble"));
        }
        let m = lambda_samples.len();
        let w = vec![1.0 / m as f64; m];
        Ok(Self {
            alpha_star: vec![],
            alpha_samples: vec![vec![]],
            lambda_samples,
            weights: vec![w.clone()],
            mixture: w,
        })
    }

    pub fn n_alpha(&self) -> usize {
        self.alpha_samples.len()
    }

    pub fn n_lambda(&self) -> usize {
        self.lambda_samples.len()
    }

    /// `Σ_k w̄_k h_k` for precomputed `h_k = h(Λ_k)`.
    pub fn expectation_of_values(&self, values: &[f64]) -> f64 {
        self.mixture.iter().zip(values).map(|(w, h)| w * h).sum()
    }

    /// Predictive mean and variance from per-sample `(f̂, v)` pairs.
    pub fn moments_of_predictions(&self, preds: &[(f64, f64)]) -> (f64, f64) {
        let mean: f64 = self.mixture.iter().zip(preds).map(|(w, (f, _))| w * f).sum();
        let second: f64 = self.mixture.iter().zip(preds).map(|(w, (f, v))| w * (f * f + v)).sum();
        (mean, (second - mean * mean).max(0.0))
    }
}

pub fn posterior_expectation(ens: &PosteriorEnsemble, h: impl Fn(&[f64]) -> f64) -> f64 {
    let values: Vec<f64> = ens.lambda_samples.iter().map(|l| h(l)).collect();
    ens.expectation_of_values(&values)
}

/// `(E[f̂], E[f̂² + v] - E[f̂]²)` under the ensemble.
pub fn predictive_moments(ens: &PosteriorEnsemble, emulator: &dyn Emulator) -> (f64, f64) {
    let preds: Vec<(f64, f64)> = ens.lambda_samples.iter().map(|l| emulator.predict(l)).collect();
    ens.moments_of_predictions(&preds)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FullBayesConfig {
    pub n_alpha: usize,
    pub n_lambda: usize,
    pub kappa: f64,
    pub alpha_thin: usize,
    pub lambda_thin: usize,
}

impl Default for FullBayesConfig {
    fn default() -> Self {
        Self {
            n_alpha: 750,
            n_lambda: 3000,
            kappa: 4.0,
            alpha_thin: 1,
            lambda_thin: 1,
        }
    }
}

/// Both chains plus the weight matrix.
pub fn full_bayes_sample<L: LogLikelihood + ?Sized>(
    prior: &HierPrior,
    alpha_star: &[f64],
    lik: &L,
    bank: &IsBank,
    cfg: &FullBayesConfig,
    alpha_seed: u64,
    lambda_seed: u64,
) -> Result<(PosteriorEnsemble, Chain, Chain)> {
    if cfg.n_alpha == 0 || cfg.n_lambda == 0 {
        return Err(CalibError::InvalidArgument("N and M must be >= 1".into()));
    }
    let mut a_cfg = DramConfig::new(DramConfig::steps_for(cfg.n_alpha, cfg.alpha_thin), alpha_star.to_vec(), alpha_seed);
    a_cfg.thin = cfg.alpha_thin;
    let alpha_chain = sample_alpha_chain(prior, bank, alpha_star, cfg.kappa, a_cfg)?;
    let mut l_cfg = DramConfig::new(
        DramConfig::steps_for(cfg.n_lambda, cfg.lambda_thin),
        lambda_init(prior, alpha_star),
        lambda_seed,
    );
    l_cfg.thin = cfg.lambda_thin;
    let lambda_chain = sample_lambda_chain(prior, alpha_star, lik, &l_cfg)?;
    let ens = PosteriorEnsemble::assemble(
        prior,
        alpha_star,
        alpha_chain.samples.clone(),
        lambda_chain.samples.clone(),
    )?;
    Ok((ens, alpha_chain, lambda_chain))
}

/// Chain start: cube center for physical coordinates, the clamped
/// hyperparameter for error coordinates.
pub fn lambda_init(prior: &HierPrior, alpha_star: &[f64]) -> Vec<f64> {
    let mut v = vec![0.5; prior.p];
    v.extend(alpha_star.iter().map(|a| a.clamp(0.05, 0.95)));
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::emulator::ConstantEmulator;
    use crate::hier::toy::ConjugateToy;
    use crate::seed;
    use rand::Rng as _;

    fn random_ensemble(n: usize, m: usize, s: u64) -> (HierPrior, PosteriorEnsemble) {
        let prior = HierPrior::new(2, 4);
        let mut rng = seed::rng(s);
        let star = vec![0.3, 0.6];
        let alphas = (0..n).map(|_| vec![rng.random::<f64>() * 4.0 - 2.0, rng.random::<f64>() * 2.0]).collect();
        let lams = (0..m).map(|_| prior.sample(&star, &mut rng)).collect();
        (prior.clone(), PosteriorEnsemble::assemble(&prior, &star, alphas, lams).unwrap())
    }

    #[test]
    fn rows_normalized_and_constant_h() {
        let (_, ens) = random_ensemble(30, 200, 1);
        for row in &ens.weights {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert!((posterior_expectation(&ens, |_| 3.5) - 3.5).abs() < 1e-12);
        assert!((posterior_expectation(&ens, |_| 1.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn plug_in_is_plain_mean() {
        let prior = HierPrior::new(2, 4);
        let mut rng = seed::rng(2);
        let star = [0.3, 0.6];
        let lams: Vec<Vec<f64>> = (0..300).map(|_| prior.sample(&star, &mut rng)).collect();
        let ens = PosteriorEnsemble::plug_in(&prior, &star, lams.clone()).unwrap();
        for row in &ens.weights {
            for w in row {
                assert!((w - 1.0 / 300.0).abs() < 1e-15);
            }
        }
        let h = |l: &[f64]| (3.0 * l[0]).sin() + l[3] * l[1];
        let plain = lams.iter().map(|l| h(l)).sum::<f64>() / 300.0;
        assert!((posterior_expectation(&ens, h) - plain).abs() < 1e-12);
    }

    #[test]
    fn predictive_moments_cases_and_brute_force() {
        let (_, ens) = random_ensemble(10, 100, 3);
        let c = ConstantEmulator { mean: 2.0, variance: 0.0 };
        let (m, v) = predictive_moments(&ens, &c);
        assert!((m - 2.0).abs() < 1e-12 && v.abs() < 1e-12);
        let c = ConstantEmulator { mean: 2.0, variance: 0.25 };
        let (m, v) = predictive_moments(&ens, &c);
        assert!((m - 2.0).abs() < 1e-12 && (v - 0.25).abs() < 1e-12);

        let em = |l: &[f64]| (l[0] + 2.0 * l[2], 0.01 * l[1]);
        let (m, v) = predictive_moments(&ens, &em);
        // double sum over (i, k)
        let n = ens.n_alpha() as f64;
        let mut e1 = 0.0;
        let mut e2 = 0.0;
        for row in &ens.weights {
            for (w, l) in row.iter().zip(&ens.lambda_samples) {
                let (f, vv) = em(l);
                e1 += w * f / n;
                e2 += w * (f * f + vv) / n;
            }
        }
        assert!((m - e1).abs() < 1e-12);
        assert!((v - (e2 - e1 * e1)).abs() < 1e-12);
    }

    #[test]
    fn kappa_box_clips() {
        let prior = HierPrior::new(4, 6);
        let (lo, hi) = kappa_box(&prior, &[8.0, -1.0], 4.0);
        assert_eq!(lo, vec![4.0, -5.0]);
        assert_eq!(hi, vec![10.0, 3.0]);
    }

    #[test]
    fn conjugate_posterior_mean() {
        // λ | y with TN(α*, σ²) prior and N(y; λ, s²) likelihood, truncation
        // inactive
        let toy = ConjugateToy { y: 0.5, s: 0.08 };
        let prior = toy.prior();
        let star = [0.5];
        let mut cfg = DramConfig::new(60_000, vec![0.5], 7);
        cfg.thin = 2;
        let chain = sample_lambda_chain(&prior, &star, &|l: &[f64]| toy.log_likelihood(l), &cfg).unwrap();
        let ens = PosteriorEnsemble::plug_in(&prior, &star, chain.samples.clone()).unwrap();
        let est = posterior_expectation(&ens, |l| l[0]);
        let xs: Vec<f64> = chain.samples.iter().map(|s| s[0]).collect();
        // batch-means standard error
        let b = 50;
        let per = xs.len() / b;
        let means: Vec<f64> = (0..b).map(|i| crate::stats::mean(&xs[i * per..(i + 1) * per])).collect();
        let se = (crate::stats::sample_variance(&means) / b as f64).sqrt();
        let exact = toy.posterior_mean(0.5, 0.45);
        assert!((est - exact).abs() < 3.0 * se, "{est} vs {exact} (se {se})");
    }

    #[test]
    fn single_alpha_at_star_gives_uniform_weights() {
        let prior = HierPrior::new(0, 1);
        let lams: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64 / 50.0 + 0.01]).collect();
        let ens = PosteriorEnsemble::assemble(&prior, &[0.2], vec![vec![0.2]], lams).unwrap();
        assert!(ens.weights[0].iter().all(|w| (w - 0.02).abs() < 1e-15));
    }
}
