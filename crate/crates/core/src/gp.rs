//! Gaussian-process surrogates of `λ ↦ f_t(x, λ)` for a fixed output `t` and
//! control point `x`, with an anisotropic Matérn-5/2 kernel and a constant
//! prior mean.
//!
//! Hyperparameters are fitted by maximizing the marginal likelihood with the
//! process variance profiled out, so the search runs over the `q`
//! log-lengthscales only. The nugget is kept as a fraction of the variance
//! during the search and stored as an absolute value once fitted.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{CalibError, Result};
use crate::lhs::lhs_design;
use crate::optim::{multistart, nelder_mead, OptimOptions};
use crate::par;
use crate::seed;
use crate::stats;
use crate::testbed::CalibrationProblem;

const SQRT5: f64 = 2.236_067_977_499_79;

/// Matérn-5/2 covariance at distance `d`.
pub fn matern52(d: f64, variance: f64, lengthscale: f64) -> Result<f64> {
    if !(d.is_finite() && variance.is_finite() && lengthscale.is_finite()) {
        return Err(CalibError::InvalidArgument("non-finite kernel argument".into()));
    }
    if d < 0.0 || variance <= 0.0 || lengthscale <= 0.0 {
        return Err(CalibError::InvalidArgument(format!(
            "kernel needs d >= 0, variance > 0, lengthscale > 0 (got {d}, {variance}, {lengthscale})"
        )));
    }
    Ok(variance * matern52_corr(d / lengthscale))
}

/// Correlation at scaled distance `r = d / ρ`.
#[inline]
pub fn matern52_corr(r: f64) -> f64 {
    let sr = SQRT5 * r;
    (1.0 + sr + sr * sr / 3.0) * (-sr).exp()
}

#[inline]
fn scaled_dist(a: &[f64], b: &[f64], inv_ls: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .zip(inv_ls)
        .map(|((x, y), il)| {
            let t = (x - y) * il;
            t * t
        })
        .sum::<f64>()
        .sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    /// Process variance `σ_k²`.
    pub variance: f64,
    pub lengthscales: Vec<f64>,
    /// Absolute nugget added to the diagonal of the training covariance.
    pub nugget: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitConfig {
    pub lengthscale_bounds: (f64, f64),
    pub variance_lower: f64,
    /// Upper variance bound as a multiple of the target variance.
    pub variance_upper_factor: f64,
    /// Starting nugget, relative to the process variance.
    pub base_nugget: f64,
    pub max_nugget: f64,
    pub n_starts: usize,
    pub max_evals_per_start: usize,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            lengthscale_bounds: (1e-2, 10.0),
            variance_lower: 1e-6,
            variance_upper_factor: 100.0,
            base_nugget: 1e-10,
            max_nugget: 1e-4,
            n_starts: 8,
            max_evals_per_start: 400,
            seed: 0,
        }
    }
}

/// In-place lower Cholesky factorization of a row-major `n×n` matrix.
/// Returns `false` when a pivot is not strictly positive.
pub(crate) fn cholesky_in_place(a: &mut [f64], n: usize) -> bool {
    for j in 0..n {
        let rj = j * n;
        let mut diag = a[rj + j];
        for k in 0..j {
            diag -= a[rj + k] * a[rj + k];
        }
        if !(diag > 0.0) || !diag.is_finite() {
            return false;
        }
        let ljj = diag.sqrt();
        a[rj + j] = ljj;
        for i in (j + 1)..n {
            let ri = i * n;
            let mut s = a[ri + j];
            for k in 0..j {
                s -= a[ri + k] * a[rj + k];
            }
            a[ri + j] = s / ljj;
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            a[i * n + j] = 0.0;
        }
    }
    true
}

/// Solves `L z = b` in place.
pub(crate) fn forward_solve(l: &[f64], n: usize, b: &mut [f64]) {
    for i in 0..n {
        let row = &l[i * n..i * n + i];
        let s: f64 = row.iter().zip(&b[..i]).map(|(a, c)| a * c).sum();
        b[i] = (b[i] - s) / l[i * n + i];
    }
}

/// Solves `Lᵀ z = b` in place.
pub(crate) fn backward_solve(l: &[f64], n: usize, b: &mut [f64]) {
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in (i + 1)..n {
            s -= l[k * n + i] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

/// Serializable part of a surrogate; the factorization is rebuilt on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateDoc {
    pub train_inputs: Vec<Vec<f64>>,
    pub train_targets: Vec<f64>,
    pub kernel: KernelParams,
    pub prior_mean: f64,
}

/// A conditioned GP ready for prediction. Immutable once built.
#[derive(Debug, Clone)]
pub struct GpSurrogate {
    train_inputs: Vec<Vec<f64>>,
    train_targets: Vec<f64>,
    kernel: KernelParams,
    prior_mean: f64,
    inv_ls: Vec<f64>,
    chol: Vec<f64>,
    /// `K⁻¹ (y - μ)`.
    weights: Vec<f64>,
}

impl GpSurrogate {
    /// Conditions a GP with fixed hyperparameters.
    pub fn with_params(
        train_inputs: Vec<Vec<f64>>,
        train_targets: Vec<f64>,
        kernel: KernelParams,
        prior_mean: f64,
    ) -> Result<Self> {
        let n = train_inputs.len();
        if n == 0 || n != train_targets.len() {
            return Err(CalibError::InvalidArgument(format!(
                "{} inputs vs {} targets",
                n,
                train_targets.len()
            )));
        }
        let inv_ls: Vec<f64> = kernel.lengthscales.iter().map(|l| 1.0 / l).collect();
        let mut k = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let c = kernel.variance * matern52_corr(scaled_dist(&train_inputs[i], &train_inputs[j], &inv_ls));
                k[i * n + j] = c;
                k[j * n + i] = c;
            }
            k[i * n + i] += kernel.nugget;
        }
        if !cholesky_in_place(&mut k, n) {
            return Err(CalibError::IllConditioned { nugget: kernel.nugget });
        }
        let mut weights: Vec<f64> = train_targets.iter().map(|y| y - prior_mean).collect();
        forward_solve(&k, n, &mut weights);
        backward_solve(&k, n, &mut weights);
        Ok(Self {
            train_inputs,
            train_targets,
            kernel,
            prior_mean,
            inv_ls,
            chol: k,
            weights,
        })
    }

    /// Fits hyperparameters by maximum marginal likelihood, then conditions.
    pub fn fit(train_inputs: Vec<Vec<f64>>, train_targets: Vec<f64>, cfg: &FitConfig) -> Result<Self> {
        let n = train_inputs.len();
        if n < 2 {
            return Err(CalibError::InvalidArgument("GP fit needs at least 2 points".into()));
        }
        if train_inputs.iter().flatten().any(|v| !v.is_finite()) || train_targets.iter().any(|v| !v.is_finite()) {
            return Err(CalibError::InvalidArgument("non-finite training data".into()));
        }
        let dim = train_inputs[0].len();
        let mu = stats::mean(&train_targets);
        let var_y = stats::sample_variance(&train_targets);
        let var_lo = cfg.variance_lower;
        let var_hi = (cfg.variance_upper_factor * var_y).max(var_lo);

        let mut nugget_ladder = vec![];
        let mut g = cfg.base_nugget;
        while g <= cfg.max_nugget * (1.0 + 1e-9) {
            nugget_ladder.push(g);
            g *= 10.0;
        }

        let objective = ProfiledLikelihood::new(&train_inputs, &train_targets, mu, var_lo, var_hi);
        let (llo, lhi) = (cfg.lengthscale_bounds.0.ln(), cfg.lengthscale_bounds.1.ln());
        let lo = vec![llo; dim];
        let hi = vec![lhi; dim];

        let best_theta = if var_y > 0.0 {
            let starts = lhs_design(cfg.n_starts.max(1), dim, cfg.seed)?;
            let starts: Vec<Vec<f64>> = crate::lhs::scale_to_box(&starts, &lo, &hi);
            let opts = OptimOptions {
                max_evals: cfg.max_evals_per_start,
                ftol: 1e-8,
                ..Default::default()
            };
            let nll = |theta: &[f64]| {
                nugget_ladder
                    .iter()
                    .find_map(|&g| objective.neg_log_lik(theta, g).map(|(v, _)| v))
                    .unwrap_or(f64::INFINITY)
            };
            multistart(&starts, |s| nelder_mead(nll, s, &lo, &hi, &opts)).x
        } else {
            // constant targets: the likelihood is flat in the lengthscales
            vec![0.0_f64.clamp(llo, lhi); dim]
        };

        let lengthscales: Vec<f64> = best_theta.iter().map(|t| t.exp()).collect();
        for &g in &nugget_ladder {
            let Some((_, variance)) = objective.neg_log_lik(&best_theta, g) else {
                continue;
            };
            let kernel = KernelParams {
                variance,
                lengthscales: lengthscales.clone(),
                nugget: g * variance,
            };
            match Self::with_params(train_inputs.clone(), train_targets.clone(), kernel, mu) {
                Ok(gp) => return Ok(gp),
                Err(CalibError::IllConditioned { .. }) => continue,
                Err(e) => return Err(e),
            }
        }
        Err(CalibError::IllConditioned {
            nugget: *nugget_ladder.last().unwrap_or(&cfg.max_nugget),
        })
    }

    pub fn kernel(&self) -> &KernelParams {
        &self.kernel
    }

    pub fn prior_mean(&self) -> f64 {
        self.prior_mean
    }

    pub fn train_inputs(&self) -> &[Vec<f64>] {
        &self.train_inputs
    }

    pub fn train_targets(&self) -> &[f64] {
        &self.train_targets
    }

    /// Posterior mean and variance (clamped at zero) at `lambda`.
    pub fn predict(&self, lambda: &[f64]) -> (f64, f64) {
        let n = self.train_inputs.len();
        let mut k: Vec<f64> = self
            .train_inputs
            .iter()
            .map(|xi| self.kernel.variance * matern52_corr(scaled_dist(lambda, xi, &self.inv_ls)))
            .collect();
        let mean = self.prior_mean + k.iter().zip(&self.weights).map(|(a, b)| a * b).sum::<f64>();
        forward_solve(&self.chol, n, &mut k);
        let explained: f64 = k.iter().map(|v| v * v).sum();
        (mean, (self.kernel.variance - explained).max(0.0))
    }

    pub fn predict_mean(&self, lambda: &[f64]) -> f64 {
        self.prior_mean
            + self
                .train_inputs
                .iter()
                .zip(&self.weights)
                .map(|(xi, w)| w * self.kernel.variance * matern52_corr(scaled_dist(lambda, xi, &self.inv_ls)))
                .sum::<f64>()
    }

    /// Closed-form leave-one-out predictive means at fixed hyperparameters.
    pub fn loo_means(&self) -> Vec<f64> {
        let n = self.train_inputs.len();
        let mut diag = vec![0.0; n];
        for (i, d) in diag.iter_mut().enumerate() {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            forward_solve(&self.chol, n, &mut e);
            *d = e.iter().map(|v| v * v).sum();
        }
        (0..n)
            .map(|i| self.train_targets[i] - self.weights[i] / diag[i])
            .collect()
    }

    pub fn to_doc(&self) -> SurrogateDoc {
        SurrogateDoc {
            train_inputs: self.train_inputs.clone(),
            train_targets: self.train_targets.clone(),
            kernel: self.kernel.clone(),
            prior_mean: self.prior_mean,
        }
    }

    pub fn from_doc(doc: SurrogateDoc) -> Result<Self> {
        Self::with_params(doc.train_inputs, doc.train_targets, doc.kernel, doc.prior_mean)
    }
}

/// Concentrated negative log marginal likelihood over log-lengthscales.
struct ProfiledLikelihood<'a> {
    n: usize,
    dim: usize,
    /// Squared coordinate differences for each pair `i > j`, `dim` values per pair.
    sq_diffs: Vec<f64>,
    centered: Vec<f64>,
    var_bounds: (f64, f64),
    _inputs: &'a [Vec<f64>],
}

impl<'a> ProfiledLikelihood<'a> {
    fn new(inputs: &'a [Vec<f64>], targets: &[f64], mu: f64, var_lo: f64, var_hi: f64) -> Self {
        let n = inputs.len();
        let dim = inputs[0].len();
        let mut sq_diffs = Vec::with_capacity(n * (n - 1) / 2 * dim);
        for i in 0..n {
            for j in 0..i {
                for d in 0..dim {
                    let t = inputs[i][d] - inputs[j][d];
                    sq_diffs.push(t * t);
                }
            }
        }
        Self {
            n,
            dim,
            sq_diffs,
            centered: targets.iter().map(|y| y - mu).collect(),
            var_bounds: (var_lo, var_hi),
            _inputs: inputs,
        }
    }

    /// Returns `(nll, profiled variance)` or `None` if the factorization fails.
    fn neg_log_lik(&self, log_ls: &[f64], rel_nugget: f64) -> Option<(f64, f64)> {
        let n = self.n;
        let inv_sq: Vec<f64> = log_ls.iter().map(|t| (-2.0 * t).exp()).collect();
        let mut c = vec![0.0; n * n];
        let mut idx = 0;
        for i in 0..n {
            for j in 0..i {
                let r2: f64 = self.sq_diffs[idx..idx + self.dim]
                    .iter()
                    .zip(&inv_sq)
                    .map(|(a, b)| a * b)
                    .sum();
                idx += self.dim;
                c[i * n + j] = matern52_corr(r2.sqrt());
            }
            c[i * n + i] = 1.0 + rel_nugget;
        }
        if !cholesky_in_place(&mut c, n) {
            return None;
        }
        let mut z = self.centered.clone();
        forward_solve(&c, n, &mut z);
        let quad: f64 = z.iter().map(|v| v * v).sum();
        let variance = (quad / n as f64).clamp(self.var_bounds.0, self.var_bounds.1);
        let log_det: f64 = (0..n).map(|i| c[i * n + i].ln()).sum::<f64>() * 2.0;
        let nll = 0.5 * (n as f64 * variance.ln() + log_det + quad / variance);
        Some((nll, variance))
    }
}

/// Independent surrogates for every `(output, point)` pair.
#[derive(Debug, Clone)]
pub struct SurrogateSet {
    pub points: Vec<Vec<f64>>,
    /// Indexed `[t][point]`.
    pub surrogates: Vec<Vec<Arc<GpSurrogate>>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SurrogateSetDoc {
    pub points: Vec<Vec<f64>>,
    pub surrogates: Vec<Vec<SurrogateDoc>>,
}

impl SurrogateSet {
    /// Fits `T × points.len()` surrogates, each on its own `n_train`-point
    /// Latin hypercube over `[0,1]^q`. Fits run in parallel.
    pub fn fit(
        problem: &CalibrationProblem,
        points: &[Vec<f64>],
        n_train: usize,
        fit_cfg: &FitConfig,
        seed: u64,
    ) -> Result<Self> {
        let n_pts = points.len();
        let jobs = problem.n_outputs * n_pts;
        let fitted: Vec<Result<GpSurrogate>> = par::map_range(jobs, |job| {
            let (t, j) = (job / n_pts, job % n_pts);
            let design = lhs_design(
                n_train,
                problem.q,
                seed::derive(seed, &[seed::stream::SURROGATE_DESIGN, t as u64, j as u64]),
            )?;
            let targets: Vec<f64> = design
                .points
                .iter()
                .map(|lam| problem.eval(&points[j], lam, t))
                .collect();
            let cfg = FitConfig {
                seed: seed::derive(seed, &[seed::stream::SURROGATE_FIT, t as u64, j as u64]),
                ..fit_cfg.clone()
            };
            GpSurrogate::fit(design.points, targets, &cfg)
        });
        let mut surrogates: Vec<Vec<Arc<GpSurrogate>>> = vec![Vec::with_capacity(n_pts); problem.n_outputs];
        for (job, gp) in fitted.into_iter().enumerate() {
            surrogates[job / n_pts].push(Arc::new(gp?));
        }
        Ok(Self {
            points: points.to_vec(),
            surrogates,
        })
    }

    pub fn get(&self, t: usize, point: usize) -> &Arc<GpSurrogate> {
        &self.surrogates[t][point]
    }

    pub fn to_doc(&self) -> SurrogateSetDoc {
        SurrogateSetDoc {
            points: self.points.clone(),
            surrogates: self
                .surrogates
                .iter()
                .map(|row| row.iter().map(|g| g.to_doc()).collect())
                .collect(),
        }
    }

    pub fn from_doc(doc: SurrogateSetDoc) -> Result<Self> {
        let surrogates = doc
            .surrogates
            .into_iter()
            .map(|row| {
                row.into_iter()
                    .map(|d| GpSurrogate::from_doc(d).map(Arc::new))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            points: doc.points,
            surrogates,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testbed::canonical_simulator;
    use rand::Rng as _;

    /// Dense Gaussian elimination with partial pivoting, independent of the
    /// Cholesky path.
    fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        for col in 0..n {
            let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
            a.swap(col, piv);
            b.swap(col, piv);
            for r in (col + 1)..n {
                let f = a[r][col] / a[col][col];
                for c in col..n {
                    a[r][c] -= f * a[col][c];
                }
                b[r] -= f * b[col];
            }
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let s: f64 = ((i + 1)..n).map(|k| a[i][k] * x[k]).sum();
            x[i] = (b[i] - s) / a[i][i];
        }
        x
    }

    fn naive_predict(gp: &GpSurrogate, lam: &[f64]) -> (f64, f64) {
        let kp = gp.kernel();
        let kern = |a: &[f64], b: &[f64]| {
            let r: f64 = a
                .iter()
                .zip(b)
                .zip(&kp.lengthscales)
                .map(|((x, y), l)| ((x - y) / l).powi(2))
                .sum::<f64>()
                .sqrt();
            matern52(r, kp.variance, 1.0).unwrap()
        };
        let x = gp.train_inputs();
        let n = x.len();
        let kmat: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| kern(&x[i], &x[j]) + if i == j { kp.nugget } else { 0.0 }).collect())
            .collect();
        let kv: Vec<f64> = x.iter().map(|xi| kern(lam, xi)).collect();
        let centered: Vec<f64> = gp.train_targets().iter().map(|y| y - gp.prior_mean()).collect();
        let w = dense_solve(kmat.clone(), centered);
        let v = dense_solve(kmat, kv.clone());
        let mean = gp.prior_mean() + kv.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
        let var = kp.variance - kv.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>();
        (mean, var.max(0.0))
    }

    fn fitted_testbed_gp() -> GpSurrogate {
        let problem = canonical_simulator();
        let design = lhs_design(60, 6, 3).unwrap();
        let x = [0.3, 0.6, 0.8];
        let y = design.points.iter().map(|l| problem.eval(&x, l, 2)).collect();
        GpSurrogate::fit(design.points, y, &FitConfig::default()).unwrap()
    }

    #[test]
    fn kernel_values() {
        assert_eq!(matern52(0.0, 2.5, 0.7).unwrap(), 2.5);
        // (1 + √5 + 5/3) e^{-√5}
        assert!((matern52(1.0, 1.0, 1.0).unwrap() - 0.52399).abs() < 1e-5);
        assert!(matern52(1e3, 1.0, 1.0).unwrap() < 1e-300);
        assert!(matern52(f64::NAN, 1.0, 1.0).is_err());
        assert!(matern52(-1.0, 1.0, 1.0).is_err());
        assert!(matern52(1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn constant_targets_give_constant_mean() {
        let design = lhs_design(15, 2, 1).unwrap();
        let gp = GpSurrogate::fit(design.points, vec![3.25; 15], &FitConfig::default()).unwrap();
        assert_eq!(gp.kernel().variance, FitConfig::default().variance_lower);
        for lam in [[0.1, 0.9], [0.5, 0.5], [0.99, 0.0]] {
            assert!((gp.predict(&lam).0 - 3.25).abs() < 1e-12);
        }
    }

    #[test]
    fn sine_loo_error_small_and_matches_refit_oracle() {
        let design = lhs_design(20, 1, 7).unwrap();
        let y: Vec<f64> = design.points.iter().map(|p| (2.0 * std::f64::consts::PI * p[0]).sin()).collect();
        let gp = GpSurrogate::fit(design.points.clone(), y.clone(), &FitConfig::default()).unwrap();
        let loo = gp.loo_means();
        let rmse = (loo.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / 20.0).sqrt();
        assert!(rmse < 0.05, "LOO RMSE {rmse}");
        // brute-force oracle: condition on the other 19 points with the same
        // hyperparameters and prior mean
        for i in 0..20 {
            let mut xs = design.points.clone();
            let mut ys = y.clone();
            let held = xs.remove(i);
            ys.remove(i);
            let sub = GpSurrogate::with_params(xs, ys, gp.kernel().clone(), gp.prior_mean()).unwrap();
            assert!((sub.predict(&held).0 - loo[i]).abs() < 1e-6);
        }
    }

    #[test]
    fn duplicate_rows_fit() {
        let mut pts = lhs_design(10, 2, 4).unwrap().points;
        pts.push(pts[0].clone());
        pts.push(pts[3].clone());
        let y: Vec<f64> = pts.iter().map(|p| p[0] + p[1] * p[1]).collect();
        let gp = GpSurrogate::fit(pts, y, &FitConfig::default()).unwrap();
        assert!(gp.kernel().nugget > 0.0);
    }

    #[test]
    fn interpolates_training_points() {
        let gp = fitted_testbed_gp();
        for (x, y) in gp.train_inputs().iter().zip(gp.train_targets()) {
            let (m, v) = gp.predict(x);
            assert!((m - y).abs() < 1e-4 * gp.kernel().variance.sqrt(), "{m} vs {y}");
            assert!(v <= 2.0 * gp.kernel().nugget);
        }
    }

    #[test]
    fn reverts_to_prior_far_away() {
        let design = lhs_design(10, 2, 5).unwrap();
        let y: Vec<f64> = design.points.iter().map(|p| p[0] - p[1]).collect();
        let kernel = KernelParams {
            variance: 0.7,
            lengthscales: vec![0.01, 0.01],
            nugget: 1e-10,
        };
        let gp = GpSurrogate::with_params(design.points, y, kernel, 0.2).unwrap();
        let (m, v) = gp.predict(&[50.0, -50.0]);
        assert!((m - 0.2).abs() < 1e-12);
        assert!((v - 0.7).abs() < 1e-12);
    }

    #[test]
    fn matches_dense_solve_oracle() {
        let gp = fitted_testbed_gp();
        let mut rng = seed::rng(77);
        for _ in 0..100 {
            let lam: Vec<f64> = (0..6).map(|_| rng.random()).collect();
            let (m, v) = gp.predict(&lam);
            let (mo, vo) = naive_predict(&gp, &lam);
            assert!((m - mo).abs() < 1e-8, "{m} vs {mo}");
            assert!((v - vo).abs() < 1e-8, "{v} vs {vo}");
        }
    }

    #[test]
    fn variance_nonnegative_on_random_queries() {
        let gp = fitted_testbed_gp();
        let mut rng = seed::rng(78);
        for _ in 0..10_000 {
            let lam: Vec<f64> = (0..6).map(|_| rng.random()).collect();
            assert!(gp.predict(&lam).1 >= 0.0);
        }
    }

    #[test]
    fn conditioning_on_own_mean_is_neutral() {
        let gp = fitted_testbed_gp();
        let star = vec![0.37, 0.21, 0.83, 0.5, 0.66, 0.12];
        let m = gp.predict(&star).0;
        let mut xs = gp.train_inputs().to_vec();
        let mut ys = gp.train_targets().to_vec();
        xs.push(star.clone());
        ys.push(m);
        let aug = GpSurrogate::with_params(xs, ys, gp.kernel().clone(), gp.prior_mean()).unwrap();
        assert!((aug.predict(&star).0 - m).abs() < 1e-8);
    }

    #[test]
    fn permuting_rows_is_stable() {
        let gp = fitted_testbed_gp();
        let mut idx: Vec<usize> = (0..gp.train_inputs().len()).collect();
        idx.reverse();
        idx.swap(3, 17);
        let xs = idx.iter().map(|&i| gp.train_inputs()[i].clone()).collect();
        let ys = idx.iter().map(|&i| gp.train_targets()[i]).collect();
        let perm = GpSurrogate::with_params(xs, ys, gp.kernel().clone(), gp.prior_mean()).unwrap();
        let mut rng = seed::rng(79);
        for _ in 0..50 {
            let lam: Vec<f64> = (0..6).map(|_| rng.random()).collect();
            let (a, b) = (gp.predict(&lam), perm.predict(&lam));
            assert!((a.0 - b.0).abs() < 1e-10 && (a.1 - b.1).abs() < 1e-10);
        }
    }

    #[test]
    fn json_round_trip_rebuilds_factor() {
        let gp = fitted_testbed_gp();
        let text = serde_json::to_string(&gp.to_doc()).unwrap();
        let back = GpSurrogate::from_doc(serde_json::from_str(&text).unwrap()).unwrap();
        let lam = [0.2, 0.4, 0.6, 0.8, 0.1, 0.3];
        assert_eq!(gp.predict(&lam), back.predict(&lam));
    }

    #[test]
    fn too_few_points_rejected() {
        assert!(GpSurrogate::fit(vec![vec![0.5]], vec![1.0], &FitConfig::default()).is_err());
    }
}
