//! Delayed-rejection adaptive Metropolis (DRAM) over a bounded box.
//!
//! The first stage is a Gaussian random walk whose covariance is learned from
//! the chain history; a rejected first-stage proposal gets one retry with a
//! shrunken covariance. Proposals outside the box are rejected without
//! calling the density.

use std::path::Path;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{CalibError, Result};
use crate::gp::cholesky_in_place;
use crate::io;
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DramConfig {
    pub n_steps: usize,
    /// Discarded leading steps; `None` means 20% of `n_steps`.
    pub burn_in: Option<usize>,
    pub thin: usize,
    pub init: Vec<f64>,
    /// Row-major `d×d` starting proposal covariance. When absent a diagonal
    /// with standard deviations `init_scale × box width` is used.
    pub init_cov: Option<Vec<f64>>,
    pub init_scale: f64,
    pub adapt_start: usize,
    pub adapt_interval: usize,
    /// Adaptive scaling; `None` means `2.38² / d`.
    pub sd: Option<f64>,
    pub epsilon: f64,
    pub dr_scale: f64,
    pub seed: u64,
}

impl DramConfig {
    pub fn new(n_steps: usize, init: Vec<f64>, seed: u64) -> Self {
        Self {
            n_steps,
            burn_in: None,
            thin: 1,
            init,
            init_cov: None,
            init_scale: 0.1,
            adapt_start: 1000,
            adapt_interval: 100,
            sd: None,
            epsilon: 1e-10,
            dr_scale: 0.2,
            seed,
        }
    }

    /// Number of steps needed to keep `retained` samples at the configured
    /// thinning with a 20% burn-in.
    pub fn steps_for(retained: usize, thin: usize) -> usize {
        // n - floor(0.2 n) >= retained * thin
        let need = retained * thin.max(1);
        let mut n = (need as f64 / 0.8).ceil() as usize;
        while n - n / 5 < need {
            n += 1;
        }
        while n > 0 && (n - 1) - (n - 1) / 5 >= need {
            n -= 1;
        }
        n
    }

    pub fn burn_in_steps(&self) -> usize {
        self.burn_in.unwrap_or(self.n_steps / 5).min(self.n_steps)
    }

    pub fn n_retained(&self) -> usize {
        (self.n_steps - self.burn_in_steps()) / self.thin.max(1)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Chain {
    pub samples: Vec<Vec<f64>>,
    pub log_densities: Vec<f64>,
    pub acceptance_rate: f64,
    /// Number of density evaluations, including the initial point.
    pub n_evals: usize,
    pub config: DramConfig,
}

impl Chain {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.config.init.len()
    }

    /// Writes one row per retained sample, log-density last.
    pub fn write_csv(&self, path: &Path, names: &[String]) -> Result<()> {
        let mut header: Vec<String> = if names.len() == self.dim() {
            names.to_vec()
        } else {
            (1..=self.dim()).map(|i| format!("theta{i}")).collect()
        };
        header.push("log_density".into());
        let rows: Vec<Vec<f64>> = self
            .samples
            .iter()
            .zip(&self.log_densities)
            .map(|(s, &ld)| {
                let mut r = s.clone();
                r.push(ld);
                r
            })
            .collect();
        io::write_numeric_csv(path, &header, &rows)
    }

    /// Coordinate means of the retained samples.
    pub fn mean(&self) -> Vec<f64> {
        let d = self.dim();
        let mut m = vec![0.0; d];
        for s in &self.samples {
            for (a, b) in m.iter_mut().zip(s) {
                *a += b;
            }
        }
        m.iter_mut().for_each(|a| *a /= self.samples.len() as f64);
        m
    }
}

/// Running mean and covariance of all visited states.
struct History {
    n: f64,
    mean: Vec<f64>,
    /// Sum of centered outer products, row-major.
    m2: Vec<f64>,
}

impl History {
    fn new(d: usize) -> Self {
        Self {
            n: 0.0,
            mean: vec![0.0; d],
            m2: vec![0.0; d * d],
        }
    }

    fn push(&mut self, x: &[f64]) {
        let d = x.len();
        self.n += 1.0;
        let delta: Vec<f64> = x.iter().zip(&self.mean).map(|(a, b)| a - b).collect();
        for (m, dl) in self.mean.iter_mut().zip(&delta) {
            *m += dl / self.n;
        }
        for i in 0..d {
            let di2 = x[i] - self.mean[i];
            for j in 0..d {
                self.m2[i * d + j] += delta[j] * di2;
            }
        }
    }

    fn covariance(&self) -> Vec<f64> {
        let denom = (self.n - 1.0).max(1.0);
        self.m2.iter().map(|v| v / denom).collect()
    }
}

struct Proposal {
    d: usize,
    chol: Vec<f64>,
    /// Cholesky factor of the second-stage covariance.
    chol2: Vec<f64>,
}

impl Proposal {
    fn from_cov(cov: &[f64], d: usize, dr_scale: f64) -> Option<Self> {
        let mut chol = cov.to_vec();
        if !cholesky_in_place(&mut chol, d) {
            return None;
        }
        let chol2 = chol.iter().map(|v| v * dr_scale).collect();
        Some(Self { d, chol, chol2 })
    }

    fn draw(&self, x: &[f64], second: bool, rng: &mut seed::Rng) -> Vec<f64> {
        let l = if second { &self.chol2 } else { &self.chol };
        let z: Vec<f64> = (0..self.d).map(|_| StandardNormal.sample(rng)).collect();
        (0..self.d)
            .map(|i| x[i] + (0..=i).map(|k| l[i * self.d + k] * z[k]).sum::<f64>())
            .collect()
    }

    /// `(a - b)ᵀ C⁻¹ (a - b)` for the first-stage covariance.
    fn mahalanobis(&self, a: &[f64], b: &[f64]) -> f64 {
        let mut r: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        crate::gp::forward_solve(&self.chol, self.d, &mut r);
        r.iter().map(|v| v * v).sum()
    }
}

fn in_box(x: &[f64], lo: &[f64], hi: &[f64]) -> bool {
    x.iter().zip(lo.iter().zip(hi)).all(|(v, (l, h))| *v >= *l && *v <= *h)
}

/// `ln min(1, e^x)`.
fn log_min1(x: f64) -> f64 {
    x.min(0.0)
}

/// `ln(1 - min(1, e^x))`, `-inf` when the move is certain.
fn log_one_minus_min1(x: f64) -> f64 {
    if x >= 0.0 {
        f64::NEG_INFINITY
    } else {
        (-x.exp()).ln_1p()
    }
}

/// Samples the density restricted to `[lo, hi]`.
pub fn sample(log_density: impl Fn(&[f64]) -> f64, lo: &[f64], hi: &[f64], cfg: &DramConfig) -> Result<Chain> {
    sample_with_aux(|x| (log_density(x), ()), lo, hi, cfg).map(|(c, _)| c)
}

/// Like [`sample`], but the density also returns a payload that is kept for
/// every retained sample. The payload of a state is computed once, when the
/// state is first evaluated.
pub fn sample_with_aux<A: Clone>(
    density: impl Fn(&[f64]) -> (f64, A),
    lo: &[f64],
    hi: &[f64],
    cfg: &DramConfig,
) -> Result<(Chain, Vec<A>)> {
    let d = cfg.init.len();
    if d == 0 || lo.len() != d || hi.len() != d {
        return Err(CalibError::InvalidArgument("box and init dimensions differ".into()));
    }
    if lo.iter().zip(hi).any(|(l, h)| !(l < h)) {
        return Err(CalibError::InvalidArgument("empty box".into()));
    }
    if cfg.thin == 0 || cfg.n_steps == 0 {
        return Err(CalibError::InvalidArgument("n_steps and thin must be positive".into()));
    }
    if !in_box(&cfg.init, lo, hi) {
        return Err(CalibError::InfeasibleStart(cfg.init.clone()));
    }
    let (mut fx, mut aux) = density(&cfg.init);
    if !(fx > f64::NEG_INFINITY) || fx.is_nan() {
        return Err(CalibError::InfeasibleStart(cfg.init.clone()));
    }
    let mut n_evals = 1usize;
    let sd = cfg.sd.unwrap_or(2.38 * 2.38 / d as f64);
    let init_cov = match &cfg.init_cov {
        Some(c) if c.len() == d * d => c.clone(),
        Some(_) => return Err(CalibError::InvalidArgument("init_cov must be d×d".into())),
        None => {
            let mut c = vec![0.0; d * d];
            for i in 0..d {
                c[i * d + i] = (cfg.init_scale * (hi[i] - lo[i])).powi(2);
            }
            c
        }
    };
    let mut prop = Proposal::from_cov(&init_cov, d, cfg.dr_scale)
        .ok_or_else(|| CalibError::InvalidArgument("initial proposal covariance is not SPD".into()))?;

    let mut rng = seed::rng(cfg.seed);
    let burn = cfg.burn_in_steps();
    let thin = cfg.thin;
    let mut x = cfg.init.clone();
    let mut hist = History::new(d);
    let mut accepted = 0usize;
    let mut streak = 0usize;
    let stuck_limit = 10 * d * 1000;

    let keep = cfg.n_retained();
    let mut samples = Vec::with_capacity(keep);
    let mut log_densities = Vec::with_capacity(keep);
    let mut auxes = Vec::with_capacity(keep);

    for step in 0..cfg.n_steps {
        let y1 = prop.draw(&x, false, &mut rng);
        let (f1, a1) = if in_box(&y1, lo, hi) {
            n_evals += 1;
            let (f, a) = density(&y1);
            (if f.is_nan() { f64::NEG_INFINITY } else { f }, Some(a))
        } else {
            (f64::NEG_INFINITY, None)
        };
        let log_a1 = log_min1(f1 - fx);
        let mut moved = false;
        if f1 > f64::NEG_INFINITY && rng_log_uniform(&mut rng) < log_a1 {
            x = y1;
            fx = f1;
            aux = a1.expect("evaluated state has payload");
            moved = true;
        } else {
            let y2 = prop.draw(&x, true, &mut rng);
            if in_box(&y2, lo, hi) {
                n_evals += 1;
                let (f2, a2) = density(&y2);
                if f2 > f64::NEG_INFINITY && !f2.is_nan() {
                    // DR acceptance: π(y2) q1(y2,y1) (1 - α1(y2,y1)) / [π(x) q1(x,y1) (1 - α1(x,y1))]
                    let log_q_ratio = -0.5 * (prop.mahalanobis(&y1, &y2) - prop.mahalanobis(&y1, &x));
                    let num = f2 + log_q_ratio + log_one_minus_min1(f1 - f2);
                    let den = fx + log_one_minus_min1(f1 - fx);
                    let log_a2 = if den == f64::NEG_INFINITY {
                        f64::NEG_INFINITY
                    } else {
                        log_min1(num - den)
                    };
                    if rng_log_uniform(&mut rng) < log_a2 {
                        x = y2;
                        fx = f2;
                        aux = a2;
                        moved = true;
                    }
                }
            }
        }
        if moved {
            accepted += 1;
            streak = 0;
        } else {
            streak += 1;
            if streak >= stuck_limit {
                return Err(CalibError::ChainStuck {
                    rejections: streak,
                    dim: d,
                    state: x,
                });
            }
        }

        hist.push(&x);
        let done = step + 1;
        if done >= cfg.adapt_start && done % cfg.adapt_interval.max(1) == 0 {
            let mut cov = hist.covariance();
            for i in 0..d {
                cov[i * d + i] += cfg.epsilon;
            }
            cov.iter_mut().for_each(|v| *v *= sd);
            if let Some(p) = Proposal::from_cov(&cov, d, cfg.dr_scale) {
                prop = p;
            } else {
                log::debug!("adapted covariance not SPD at step {done}; keeping previous proposal");
            }
        }

        if step >= burn && (step + 1 - burn) % thin == 0 {
            samples.push(x.clone());
            log_densities.push(fx);
            auxes.push(aux.clone());
        }
    }

    Ok((
        Chain {
            samples,
            log_densities,
            acceptance_rate: accepted as f64 / cfg.n_steps as f64,
            n_evals,
            config: cfg.clone(),
        },
        auxes,
    ))
}

fn rng_log_uniform(rng: &mut seed::Rng) -> f64 {
    use rand::Rng as _;
    let u: f64 = rng.random();
    u.ln()
}
