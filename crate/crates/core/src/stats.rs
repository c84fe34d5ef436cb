//! Scalar probability helpers: standard normal functions in log space,
//! the truncated normal used by the hierarchical prior, and small
//! summary statistics.

use libm::erfc;
use statrs::function::erf::erfc_inv;
use std::f64::consts::{PI, SQRT_2};

/// `0.5 * ln(2π)`.
pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

pub fn norm_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

pub fn norm_logpdf(z: f64) -> f64 {
    -0.5 * z * z - LN_SQRT_2PI
}

/// Standard normal CDF.
pub fn norm_cdf(z: f64) -> f64 {
    if z.is_nan() {
        return f64::NAN;
    }
    0.5 * erfc(-z / SQRT_2)
}

/// `ln Φ(z)`, accurate deep into the lower tail.
pub fn norm_logcdf(z: f64) -> f64 {
    if z > -30.0 {
        if z > 5.0 {
            // Φ(z) = 1 - Q(z) with Q tiny
            return (-0.5 * erfc(z / SQRT_2)).ln_1p();
        }
        return norm_cdf(z).ln();
    }
    // asymptotic Mills-ratio expansion
    let z2 = z * z;
    let series = 1.0 - 1.0 / z2 + 3.0 / (z2 * z2) - 15.0 / (z2 * z2 * z2);
    norm_logpdf(z) - (-z).ln() + series.ln()
}

/// Inverse standard normal CDF.
pub fn norm_ppf(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    if p < 0.5 {
        -SQRT_2 * erfc_inv(2.0 * p)
    } else {
        SQRT_2 * erfc_inv(2.0 * (1.0 - p))
    }
}

/// `ln(e^a - e^b)` for `a >= b`.
pub fn log_diff_exp(a: f64, b: f64) -> f64 {
    if b == f64::NEG_INFINITY {
        return a;
    }
    a + (-(b - a).exp()).ln_1p()
}

/// Numerically stable `ln Σ exp(x_i)`; `-inf` for empty or all `-inf` input.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let s: f64 = xs.iter().map(|&x| (x - max).exp()).sum();
    max + s.ln()
}

/// `ln((1/n) Σ exp(x_i))`.
pub fn log_mean_exp(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NEG_INFINITY;
    }
    log_sum_exp(xs) - (xs.len() as f64).ln()
}

/// Normal distribution with mean `mu` and std `sigma` truncated to `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncNormal {
    pub mu: f64,
    pub sigma: f64,
    pub lo: f64,
    pub hi: f64,
}

impl TruncNormal {
    pub fn new(mu: f64, sigma: f64, lo: f64, hi: f64) -> Self {
        debug_assert!(sigma > 0.0 && lo < hi);
        Self { mu, sigma, lo, hi }
    }

    fn std_bounds(&self) -> (f64, f64) {
        ((self.lo - self.mu) / self.sigma, (self.hi - self.mu) / self.sigma)
    }

    /// `ln(Φ(b) - Φ(a))` on standardized bounds, stable in both tails.
    pub fn log_mass(&self) -> f64 {
        let (a, b) = self.std_bounds();
        if a > 0.0 {
            // both bounds in the upper tail: use Q(a) - Q(b) = Φ(-a) - Φ(-b)
            log_diff_exp(norm_logcdf(-a), norm_logcdf(-b))
        } else {
            log_diff_exp(norm_logcdf(b), norm_logcdf(a))
        }
    }

    pub fn logpdf(&self, x: f64) -> f64 {
        if !(self.lo..=self.hi).contains(&x) {
            return f64::NEG_INFINITY;
        }
        let z = (x - self.mu) / self.sigma;
        norm_logpdf(z) - self.sigma.ln() - self.log_mass()
    }

    pub fn mean(&self) -> f64 {
        let (a, b) = self.std_bounds();
        let lz = self.log_mass();
        let ta = (norm_logpdf(a) - lz).exp();
        let tb = (norm_logpdf(b) - lz).exp();
        self.mu + self.sigma * (ta - tb)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= self.lo {
            return 0.0;
        }
        if x >= self.hi {
            return 1.0;
        }
        let (a, _) = self.std_bounds();
        let z = (x - self.mu) / self.sigma;
        let lz = self.log_mass();
        let num = if a > 0.0 {
            log_diff_exp(norm_logcdf(-a), norm_logcdf(-z))
        } else {
            log_diff_exp(norm_logcdf(z), norm_logcdf(a))
        };
        (num - lz).exp().clamp(0.0, 1.0)
    }

    /// Inverse-CDF draw from a uniform variate `u` in `[0, 1)`.
    pub fn quantile(&self, u: f64) -> f64 {
        let (a, b) = self.std_bounds();
        let z = if a > 0.0 {
            // work with the survival function so tail masses stay representable
            let qa = norm_cdf(-a);
            let qb = norm_cdf(-b);
            -norm_ppf(qa - u * (qa - qb))
        } else {
            let pa = norm_cdf(a);
            let pb = norm_cdf(b);
            norm_ppf(pa + u * (pb - pa))
        };
        (self.mu + self.sigma * z.clamp(a, b)).clamp(self.lo, self.hi)
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance (`n - 1` denominator); 0 for fewer than two values.
pub fn sample_variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Empirical quantile with linear interpolation between order statistics at
/// 1-based rank `1 + prob * (n - 1)`.
pub fn quantile_linear(values: &[f64], prob: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let h = prob.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    Some(v[lo] + (h - lo as f64) * (v[hi] - v[lo]))
}

/// Two-sided Kolmogorov–Smirnov distance between a sample and a CDF.
pub fn ks_distance(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut v = sample.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn cdf_reference_values() {
        assert_relative_eq!(norm_cdf(0.0), 0.5, epsilon = 1e-15);
        assert_relative_eq!(norm_cdf(1.0) - norm_cdf(-1.0), 0.682_689_492_137_086, epsilon = 1e-12);
        assert_relative_eq!(norm_cdf(1.96), 0.975_002_104_851_780, epsilon = 1e-12);
    }

    #[test]
    fn logcdf_matches_direct_and_tail() {
        for &z in &[-5.0, -1.0, 0.0, 2.0, 7.0] {
            assert_relative_eq!(norm_logcdf(z), norm_cdf(z).ln(), max_relative = 1e-10);
        }
        // continuity across the asymptotic switch
        let l = norm_logcdf(-30.0 - 1e-9);
        let r = norm_logcdf(-30.0 + 1e-9);
        assert!((l - r).abs() < 1e-6, "{l} vs {r}");
        assert!(norm_logcdf(-40.0).is_finite());
    }

    #[test]
    fn ppf_inverts_cdf_including_far_tail() {
        for &z in &[-24.0, -12.0, -3.0, -0.2, 0.0, 1.5, 6.0] {
            let p = norm_cdf(z);
            assert!((norm_ppf(p) - z).abs() < 1e-6 * (1.0 + z.abs()), "z={z}");
        }
    }

    #[test]
    fn truncated_normal_density_at_mode() {
        // TN(0.5, 0.45^2) on [0, 1] evaluated at 0.5
        let tn = TruncNormal::new(0.5, 0.45, 0.0, 1.0);
        assert!((tn.logpdf(0.5) - 1.2087_f64.ln()).abs() < 1e-4);
    }

    #[test]
    fn truncated_normal_tail_mass_is_finite() {
        for &mu in &[-10.0, -4.0, 0.5, 4.0, 10.0] {
            let tn = TruncNormal::new(mu, 0.45, 0.0, 1.0);
            assert!(tn.log_mass().is_finite(), "mu={mu}");
            for &u in &[0.0, 0.3, 0.999_999] {
                let x = tn.quantile(u);
                assert!((0.0..=1.0).contains(&x));
                assert!((tn.cdf(x) - u).abs() < 1e-6, "mu={mu} u={u}");
            }
        }
    }

    #[test]
    fn quantile_linear_convention() {
        let v: Vec<f64> = (1..=10).map(f64::from).collect();
        assert_relative_eq!(quantile_linear(&v, 0.9).unwrap(), 9.1, epsilon = 1e-12);
        assert_eq!(quantile_linear(&[3.0], 0.9), Some(3.0));
        assert_eq!(quantile_linear(&[], 0.9), None);
    }

    #[test]
    fn log_sum_exp_handles_infinities() {
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY; 3]), f64::NEG_INFINITY);
        assert_relative_eq!(log_sum_exp(&[0.0, 0.0]), 2f64.ln());
        assert_relative_eq!(log_mean_exp(&[1000.0, 1000.0]), 1000.0);
    }
}
