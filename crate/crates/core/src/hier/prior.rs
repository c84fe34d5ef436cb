use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{CalibError, Result};
use crate::seed;
use crate::stats::{TruncNormal, LN_SQRT_2PI};

/// Uniform on `[0,1]^p` times independent `TN(α_i, σ², 0, 1)` on the error
/// coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierPrior {
    pub p: usize,
    pub q: usize,
    pub sigma_prior: f64,
    pub alpha_lo: f64,
    pub alpha_hi: f64,
}

impl HierPrior {
    pub fn new(p: usize, q: usize) -> Self {
        Self {
            p,
            q,
            sigma_prior: 0.45,
            alpha_lo: -10.0,
            alpha_hi: 10.0,
        }
    }

    pub fn n_error(&self) -> usize {
        self.q - self.p
    }

    pub fn alpha_box(&self) -> (Vec<f64>, Vec<f64>) {
        (vec![self.alpha_lo; self.n_error()], vec![self.alpha_hi; self.n_error()])
    }

    pub fn check_alpha(&self, alpha: &[f64]) -> Result<()> {
        if alpha.len() != self.n_error() {
            return Err(CalibError::InvalidArgument(format!(
                "alpha has {} entries, expected {}",
                alpha.len(),
                self.n_error()
            )));
        }
        if alpha.iter().any(|a| !a.is_finite()) {
            return Err(CalibError::InvalidArgument("non-finite alpha".into()));
        }
        Ok(())
    }

    /// Density at a fixed `α`, with normalizing constants precomputed.
    pub fn at(&self, alpha: &[f64]) -> PriorAt {
        let norms = alpha
            .iter()
            .map(|&a| TruncNormal::new(a, self.sigma_prior, 0.0, 1.0).log_mass() + self.sigma_prior.ln() + LN_SQRT_2PI)
            .collect();
        PriorAt {
            p: self.p,
            q: self.q,
            alpha: alpha.to_vec(),
            inv_sigma: 1.0 / self.sigma_prior,
            norms,
        }
    }

    pub fn logpdf(&self, lambda: &[f64], alpha: &[f64]) -> f64 {
        self.at(alpha).logpdf(lambda)
    }

    /// One draw by inverse CDF on the truncated coordinates.
    pub fn sample(&self, alpha: &[f64], rng: &mut seed::Rng) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.q);
        for _ in 0..self.p {
            out.push(rng.random::<f64>());
        }
        for &a in alpha {
            let u: f64 = rng.random();
            out.push(TruncNormal::new(a, self.sigma_prior, 0.0, 1.0).quantile(u));
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct PriorAt {
    p: usize,
    q: usize,
    alpha: Vec<f64>,
    inv_sigma: f64,
    /// `ln σ + ln √(2π) + ln Z_i`.
    norms: Vec<f64>,
}

impl PriorAt {
    pub fn logpdf(&self, lambda: &[f64]) -> f64 {
        if lambda.len() != self.q || lambda.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return f64::NEG_INFINITY;
        }
        let mut s = 0.0;
        for ((&l, &a), &c) in lambda[self.p..].iter().zip(&self.alpha).zip(&self.norms) {
            let z = (l - a) * self.inv_sigma;
            s -= 0.5 * z * z + c;
        }
        s
    }
}

pub fn prior_logpdf(prior: &HierPrior, lambda: &[f64], alpha: &[f64]) -> f64 {
    prior.logpdf(lambda, alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{ks_distance, mean};

    /// Gauss–Legendre nodes and weights on [0,1] by Newton iteration on P_n.
    fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-15 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            out.push((0.5 * (x + 1.0), 0.5 * w));
        }
        out
    }

    #[test]
    fn mode_value() {
        let prior = HierPrior::new(0, 1);
        assert!((prior.logpdf(&[0.5], &[0.5]) - 1.2087_f64.ln()).abs() < 1e-4);
    }

    #[test]
    fn identical_alpha_ratio_is_one() {
        let prior = HierPrior::new(4, 6);
        let mut rng = seed::rng(1);
        for _ in 0..50 {
            let lam = prior.sample(&[0.3, -2.0], &mut rng);
            let a = prior.logpdf(&lam, &[1.7, 0.2]);
            assert_eq!(a - prior.logpdf(&lam, &[1.7, 0.2]), 0.0);
        }
    }

    #[test]
    fn integrates_to_one() {
        let nodes = gauss_legendre(60);
        let prior = HierPrior::new(1, 3);
        for &a in &[-4.0, 0.0, 0.5, 4.0] {
            let alpha = [a, a];
            let pa = prior.at(&alpha);
            let mut total = 0.0;
            for &(x0, w0) in &nodes {
                for &(x1, w1) in &nodes {
                    for &(x2, w2) in &nodes {
                        total += w0 * w1 * w2 * pa.logpdf(&[x0, x1, x2]).exp();
                    }
                }
            }
            assert!((total - 1.0).abs() < 1e-6, "alpha={a}: {total}");
        }
    }

    #[test]
    fn support_is_the_unit_cube_for_every_alpha() {
        let prior = HierPrior::new(1, 3);
        for &a in &[-10.0, -3.0, 0.0, 0.5, 7.0, 10.0] {
            for corner in 0..8u32 {
                let lam: Vec<f64> = (0..3).map(|i| f64::from((corner >> i) & 1)).collect();
                assert!(prior.logpdf(&lam, &[a, -a]).is_finite());
                let mut out = lam.clone();
                out[(corner % 3) as usize] += if lam[(corner % 3) as usize] == 1.0 { 1e-9 } else { -1e-9 };
                assert_eq!(prior.logpdf(&out, &[a, -a]), f64::NEG_INFINITY);
            }
        }
    }

    #[test]
    fn samples_match_marginals() {
        let prior = HierPrior::new(2, 3);
        let mut rng = seed::rng(2);
        let draws: Vec<Vec<f64>> = (0..10_000).map(|_| prior.sample(&[0.8], &mut rng)).collect();
        let err: Vec<f64> = draws.iter().map(|d| d[2]).collect();
        let tn = TruncNormal::new(0.8, 0.45, 0.0, 1.0);
        let sd = (err.iter().map(|e| (e - tn.mean()).powi(2)).sum::<f64>() / err.len() as f64).sqrt();
        assert!((mean(&err) - tn.mean()).abs() < 3.0 * sd / 100.0);
        for c in 0..2 {
            let u: Vec<f64> = draws.iter().map(|d| d[c]).collect();
            // 1% critical value for n = 10^4 is about 1.63 / √n
            assert!(ks_distance(&u, |x| x.clamp(0.0, 1.0)) < 1.63 / 100.0);
        }
    }
}
