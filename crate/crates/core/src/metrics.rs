//! Scoring of leave-one-out predictions.

use crate::emulator::Emulator;
use crate::error::{CalibError, Result};
use crate::hier::PosteriorEnsemble;
use crate::stats::{norm_cdf, quantile_linear};

/// Root mean squared relative error.
pub fn rmsre(predictions: &[f64], truths: &[f64]) -> Result<f64> {
    if predictions.len() != truths.len() {
        return Err(CalibError::InvalidArgument("predictions and truths differ in length".into()));
    }
    if predictions.is_empty() {
        return Err(CalibError::Empty("rmsre input"));
    }
    if let Some(j) = truths.iter().position(|&y| y == 0.0) {
        return Err(CalibError::ZeroTruth(j));
    }
    let s: f64 = predictions.iter().zip(truths).map(|(p, y)| ((p - y) / y).powi(2)).sum();
    Ok((s / truths.len() as f64).sqrt())
}

/// Mass of `N(f, v)` inside `[a, b]`; an indicator when `v = 0`.
pub fn interval_mass(f: f64, v: f64, a: f64, b: f64) -> f64 {
    if v <= 0.0 {
        return if a <= f && f <= b { 1.0 } else { 0.0 };
    }
    let s = v.sqrt();
    (norm_cdf((b - f) / s) - norm_cdf((a - f) / s)).max(0.0)
}

/// Posterior probability of the smallest interval centred on `mean` that
/// contains `truth`, from per-sample predictions `(f̂_k, v_k)`.
pub fn interval_probability_from(ens: &PosteriorEnsemble, preds: &[(f64, f64)], mean: f64, truth: f64) -> f64 {
    let eta = (truth - mean).abs();
    let (a, b) = (mean - eta, mean + eta);
    let h: Vec<f64> = preds.iter().map(|&(f, v)| interval_mass(f, v, a, b)).collect();
    ens.expectation_of_values(&h).clamp(0.0, 1.0)
}

/// Same, evaluating the emulator over the ensemble first.
pub fn interval_probability(ens: &PosteriorEnsemble, emulator: &dyn Emulator, truth: f64) -> f64 {
    let preds: Vec<(f64, f64)> = ens.lambda_samples.iter().map(|l| emulator.predict(l)).collect();
    let (mean, _) = ens.moments_of_predictions(&preds);
    interval_probability_from(ens, &preds, mean, truth)
}

/// Empirical 0.9 quantile, linear interpolation at rank `1 + 0.9 (n - 1)`.
pub fn quantile_09(values: &[f64]) -> Result<f64> {
    quantile_linear(values, 0.9).ok_or(CalibError::Empty("quantile input"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::emulator::ConstantEmulator;

    #[test]
    fn rmsre_examples() {
        assert_eq!(rmsre(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!((rmsre(&[1.1], &[1.0]).unwrap() - 0.1).abs() < 1e-15);
        assert!((rmsre(&[1.1, 0.9], &[1.0, 1.0]).unwrap() - 0.1).abs() < 1e-15);
        assert!(matches!(rmsre(&[1.0], &[0.0]), Err(CalibError::ZeroTruth(0))));
        assert!(rmsre(&[], &[]).is_err());
    }

    #[test]
    fn interval_examples() {
        let ens = PosteriorEnsemble::uniform(vec![vec![0.5]]).unwrap();
        let c = ConstantEmulator { mean: 0.0, variance: 1.0 };
        let p = interval_probability(&ens, &c, 1.0);
        assert!((p - 0.682_689_492_137_085_9).abs() < 1e-12);
        assert_eq!(interval_probability(&ens, &c, 0.0), 0.0);
        let point = ConstantEmulator { mean: 0.0, variance: 0.0 };
        assert_eq!(interval_probability(&ens, &point, 0.3), 1.0);
    }

    #[test]
    fn interval_grows_with_distance() {
        let lams: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64 / 50.0]).collect();
        let ens = PosteriorEnsemble::uniform(lams).unwrap();
        let em = |l: &[f64]| (l[0], 0.01);
        let mut last = 0.0;
        for k in 0..40 {
            let p = interval_probability(&ens, &em, 0.49 + 0.02 * k as f64);
            assert!(p + 1e-15 >= last);
            last = p;
        }
    }

    #[test]
    fn quantile_examples() {
        let v: Vec<f64> = (1..=10).map(f64::from).collect();
        assert!((quantile_09(&v).unwrap() - 9.1).abs() < 1e-12);
        assert_eq!(quantile_09(&[2.5; 7]).unwrap(), 2.5);
        assert_eq!(quantile_09(&[4.0]).unwrap(), 4.0);
        assert!(quantile_09(&[]).is_err());
    }
}

pub use crate::loo::{loo_evaluate, LooReport, LooRow, LooSummary};
