//! Embedded model discrepancy: every parameter becomes a first-order
//! Legendre-uniform variable `λ¹_i + λ²_i ξ_i`, `ξ ~ U([-1,1]^q)`, and the
//! likelihood uses independent normals with the propagated moments.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{CalibError, Result};
use crate::likelihood::MeasurementModel;
use crate::mcmc::{self, Chain, DramConfig};
use crate::par;
use crate::seed;
use crate::stats::LN_SQRT_2PI;

pub const DEFAULT_R: usize = 64;

/// `λ¹_i + λ²_i ξ_i` elementwise.
pub fn pc_embed(lambda1: &[f64], lambda2: &[f64], xi: &[f64]) -> Vec<f64> {
    lambda1.iter().zip(lambda2).zip(xi).map(|((a, b), x)| a + b * x).collect()
}

/// Location and half-width, stacked as `(λ¹, λ²)` in a `2q` vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddedParams {
    pub lambda1: Vec<f64>,
    pub lambda2: Vec<f64>,
}

impl EmbeddedParams {
    pub fn from_stacked(v: &[f64]) -> Self {
        let q = v.len() / 2;
        Self {
            lambda1: v[..q].to_vec(),
            lambda2: v[q..].to_vec(),
        }
    }

    pub fn stacked(&self) -> Vec<f64> {
        let mut v = self.lambda1.clone();
        v.extend_from_slice(&self.lambda2);
        v
    }

    pub fn q(&self) -> usize {
        self.lambda1.len()
    }

    pub fn is_feasible(&self) -> bool {
        self.lambda1.len() == self.lambda2.len()
            && self
                .lambda1
                .iter()
                .zip(&self.lambda2)
                .all(|(&a, &b)| b > 0.0 && a - b > 0.0 && a + b < 1.0)
    }

    pub fn embed(&self, xi: &[f64]) -> Vec<f64> {
        pc_embed(&self.lambda1, &self.lambda2, xi)
    }
}

/// Unnormalized uniform prior on the feasible set, over the stacked vector.
pub fn embedded_prior_logpdf(stacked: &[f64]) -> f64 {
    if stacked.len() % 2 == 0 && EmbeddedParams::from_stacked(stacked).is_feasible() {
        0.0
    } else {
        f64::NEG_INFINITY
    }
}

/// `R` frozen draws from `U([-1,1]^q)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XiBank {
    pub xi: Vec<Vec<f64>>,
}

impl XiBank {
    pub fn draw(r: usize, q: usize, seed: u64) -> Self {
        let mut rng = seed::rng(seed);
        let xi = (0..r).map(|_| (0..q).map(|_| rng.random_range(-1.0..=1.0)).collect()).collect();
        Self { xi }
    }

    pub fn len(&self) -> usize {
        self.xi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xi.is_empty()
    }

    /// First `r` draws.
    pub fn truncated(&self, r: usize) -> Self {
        Self {
            xi: self.xi[..r.min(self.len())].to_vec(),
        }
    }
}

/// `(μ̂_j, σ̂_j²)` for every observation; `R·n` runs.
pub fn embedded_moments(params: &EmbeddedParams, xi: &XiBank, model: &MeasurementModel) -> Result<Vec<(f64, f64)>> {
    let r = xi.len();
    if r < 2 {
        return Err(CalibError::InvalidArgument(format!("embedding needs R >= 2, got {r}")));
    }
    let grid = model.grid();
    let t = model.obs_output();
    let ids = model.point_ids();
    let runs: Vec<Vec<(f64, f64)>> = par::map_slice(&xi.xi, |x| {
        let lam = params.embed(x);
        ids.iter().map(|&j| grid.run_output(t, j, &lam)).collect()
    });
    let s2 = model.sigma_eps().powi(2);
    let rf = r as f64;
    Ok((0..ids.len())
        .map(|j| {
            let mu = runs.iter().map(|row| row[j].0).sum::<f64>() / rf;
            let spread = runs.iter().map(|row| (row[j].0 - mu).powi(2)).sum::<f64>() / (rf - 1.0);
            let gp_var = runs.iter().map(|row| row[j].1.max(0.0)).sum::<f64>() / rf;
            (mu, spread + gp_var + s2)
        })
        .collect())
}

/// `Σ_j log N(y_j; μ̂_j, σ̂_j²)`.
pub fn embedded_log_likelihood(params: &EmbeddedParams, xi: &XiBank, model: &MeasurementModel) -> Result<f64> {
    let moments = embedded_moments(params, xi, model)?;
    let mut total = 0.0;
    for (&y, (mu, var)) in model.values().iter().zip(moments) {
        if !(mu.is_finite() && var.is_finite()) {
            return Ok(f64::NEG_INFINITY);
        }
        total += -LN_SQRT_2PI - 0.5 * var.ln() - 0.5 * (y - mu).powi(2) / var;
    }
    Ok(total)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmbeddedPosterior {
    pub chain: Chain,
    pub xi: XiBank,
    /// `λ¹_k + λ²_k ξ_r` over every retained `k` and every `r`, `k` major.
    pub pushforward: Vec<Vec<f64>>,
}

/// Chain box: `λ¹ ∈ [0,1]`, `λ² ∈ [0, 1/2]`. The prior carves out the
/// feasible set inside it.
pub fn chain_box(q: usize) -> (Vec<f64>, Vec<f64>) {
    let lo = vec![0.0; 2 * q];
    let mut hi = vec![1.0; q];
    hi.extend(std::iter::repeat_n(0.5, q));
    (lo, hi)
}

pub fn default_init(q: usize) -> Vec<f64> {
    let mut v = vec![0.5; q];
    v.extend(std::iter::repeat_n(0.1, q));
    v
}

/// Samples the `2q`-dimensional posterior of `loglik + prior` and builds
/// the pushforward sample from `xi`.
pub fn sample_embedded(
    loglik: impl Fn(&EmbeddedParams) -> f64,
    q: usize,
    xi: XiBank,
    cfg: &DramConfig,
) -> Result<EmbeddedPosterior> {
    if cfg.init.len() != 2 * q {
        return Err(CalibError::InvalidArgument(format!("init must have {} entries", 2 * q)));
    }
    let (lo, hi) = chain_box(q);
    let chain = mcmc::sample(
        |v| {
            if embedded_prior_logpdf(v) == f64::NEG_INFINITY {
                return f64::NEG_INFINITY;
            }
            loglik(&EmbeddedParams::from_stacked(v))
        },
        &lo,
        &hi,
        cfg,
    )?;
    let pushforward = pushforward(&chain.samples, &xi);
    Ok(EmbeddedPosterior { chain, xi, pushforward })
}

pub fn pushforward(samples: &[Vec<f64>], xi: &XiBank) -> Vec<Vec<f64>> {
    samples
        .iter()
        .flat_map(|s| {
            let p = EmbeddedParams::from_stacked(s);
            xi.xi.iter().map(move |x| p.embed(x))
        })
        .collect()
}

/// Full embedded calibration against a measurement model, with a frozen
/// `ξ` bank of size `r` drawn from `seed`.
pub fn embedded_calibrate(model: &MeasurementModel, cfg: &DramConfig, r: usize, seed: u64) -> Result<EmbeddedPosterior> {
    if r < 2 {
        return Err(CalibError::InvalidArgument(format!("embedding needs R >= 2, got {r}")));
    }
    let q = cfg.init.len() / 2;
    let xi = XiBank::draw(r, q, seed);
    sample_embedded(
        |p| embedded_log_likelihood(p, &xi, model).unwrap_or(f64::NEG_INFINITY),
        q,
        xi.clone(),
        cfg,
    )
}

/// One row of the `R` study: largest relative change of `μ̂_j` against the
/// reference bank size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RStudyRow {
    pub r: usize,
    pub max_rel_change: f64,
}

/// Compares `μ̂` for each candidate `R` (prefixes of one bank) against the
/// largest candidate. Returns the rows and the smallest `R` within `tol`.
pub fn r_convergence_study(
    params: &EmbeddedParams,
    model: &MeasurementModel,
    candidates: &[usize],
    tol: f64,
    seed: u64,
) -> Result<(Vec<RStudyRow>, usize)> {
    let r_max = *candidates.iter().max().ok_or(CalibError::Empty("R candidates"))?;
    let bank = XiBank::draw(r_max, params.q(), seed);
    let reference = embedded_moments(params, &bank, model)?;
    let mut rows = Vec::new();
    let mut chosen = r_max;
    let mut sorted = candidates.to_vec();
    sorted.sort_unstable();
    for &r in &sorted {
        let m = embedded_moments(params, &bank.truncated(r), model)?;
        let worst = m
            .iter()
            .zip(&reference)
            .map(|((a, _), (b, _))| ((a - b) / b).abs())
            .fold(0.0, f64::max);
        if worst <= tol && chosen == r_max {
            chosen = r;
        }
        rows.push(RStudyRow { r, max_rel_change: worst });
    }
    Ok((rows, chosen))
}
