//! The five calibration methods compared in the study, behind one entry
//! point that returns a weighted λ-ensemble and, optionally, predictions of
//! every output at one grid point for each ensemble member.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::embedded::{self, EmbeddedParams, XiBank};
use crate::error::{CalibError, Result};
use crate::hier::{
    flat_log_prior, lambda_init, map_iterate, sample_alpha_chain, HierPrior, MapConfig, MapResult, PosteriorEnsemble,
};
use crate::likelihood::MeasurementModel;
use crate::mcmc::{self, Chain, DramConfig};
use crate::par;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    NoError,
    UniformError,
    HierMap,
    HierFullBayes,
    Embedded,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::NoError,
        Method::UniformError,
        Method::HierMap,
        Method::HierFullBayes,
        Method::Embedded,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Method::NoError => "no_error",
            Method::UniformError => "uniform_error",
            Method::HierMap => "hier_map",
            Method::HierFullBayes => "hier_full_bayes",
            Method::Embedded => "embedded",
        }
    }

    pub fn is_hierarchical(self) -> bool {
        matches!(self, Method::HierMap | Method::HierFullBayes)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Method {
    type Err = CalibError;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.tag() == s)
            .ok_or_else(|| CalibError::Config(format!("unknown method '{s}'")))
    }
}

/// Sample sizes and tuning shared by the methods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MethodConfig {
    /// IS bank size `L` per MAP iteration.
    pub n_bank: usize,
    /// Retained λ samples `M`.
    pub n_lambda: usize,
    /// Retained α samples `N`.
    pub n_alpha: usize,
    pub kappa: f64,
    pub tau: f64,
    pub max_iters: usize,
    pub n_lhs_starts: usize,
    pub sigma_prior: f64,
    /// Embedded `ξ` bank size.
    pub r: usize,
    pub lambda_thin: usize,
    pub alpha_thin: usize,
    pub embedded_thin: usize,
    /// Value of the error parameters when they are not calibrated.
    pub pinned_error: f64,
}

impl Default for MethodConfig {
    fn default() -> Self {
        Self {
            n_bank: 10_000,
            n_lambda: 3000,
            n_alpha: 750,
            kappa: 4.0,
            tau: 0.05,
            max_iters: 20,
            n_lhs_starts: 4,
            sigma_prior: 0.45,
            r: embedded::DEFAULT_R,
            lambda_thin: 1,
            alpha_thin: 1,
            embedded_thin: 1,
            pinned_error: 0.5,
        }
    }
}

impl MethodConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = [
            ("n_bank", self.n_bank),
            ("n_lambda", self.n_lambda),
            ("n_alpha", self.n_alpha),
            ("max_iters", self.max_iters),
            ("lambda_thin", self.lambda_thin),
            ("alpha_thin", self.alpha_thin),
            ("embedded_thin", self.embedded_thin),
        ];
        if let Some((name, _)) = pos.iter().find(|(_, v)| *v == 0) {
            return Err(CalibError::Config(format!("{name} must be positive")));
        }
        if self.n_bank < 2 {
            return Err(CalibError::Config("n_bank must be >= 2".into()));
        }
        if self.r < 2 {
            return Err(CalibError::Config("r must be >= 2".into()));
        }
        if !(self.kappa > 0.0) || !(self.tau > 0.0) || !(self.sigma_prior > 0.0) {
            return Err(CalibError::Config("kappa, tau and sigma_prior must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.pinned_error) {
            return Err(CalibError::Config("pinned_error must lie in [0,1]".into()));
        }
        Ok(())
    }

    pub fn prior(&self, p: usize, q: usize) -> HierPrior {
        HierPrior {
            sigma_prior: self.sigma_prior,
            ..HierPrior::new(p, q)
        }
    }

    pub fn map_config(&self) -> MapConfig {
        MapConfig {
            tau: self.tau,
            max_iters: self.max_iters,
            alpha0: None,
            n_bank: self.n_bank,
            n_lhs_starts: self.n_lhs_starts,
        }
    }
}

/// Output of one method on one data set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Calibration {
    pub method: Method,
    /// Members are full `q`-vectors.
    pub ensemble: PosteriorEnsemble,
    /// Chain in the method's own coordinates.
    pub chain: Chain,
    pub alpha_chain: Option<Chain>,
    pub map: Option<MapResult>,
    /// `predictions[k][t]` at the requested point, aligned with the ensemble.
    #[serde(skip)]
    pub predictions: Option<Vec<Vec<(f64, f64)>>>,
}

impl Calibration {
    /// Predictive `(mean, variance)` of output `t` at the requested point.
    pub fn moments(&self, t: usize) -> Option<(f64, f64)> {
        let preds = self.output_predictions(t)?;
        Some(self.ensemble.moments_of_predictions(&preds))
    }

    pub fn output_predictions(&self, t: usize) -> Option<Vec<(f64, f64)>> {
        self.predictions.as_ref().map(|p| p.iter().map(|row| row[t]).collect())
    }
}

/// Which sub-seeds each stage draws from.
fn chain_seed(seed: u64, method: Method) -> u64 {
    let tag = match method {
        Method::NoError => 1,
        Method::UniformError => 2,
        // both hierarchical methods share their λ-chain
        Method::HierMap | Method::HierFullBayes => 3,
        Method::Embedded => 4,
    };
    seed::derive(seed, &[seed::stream::LAMBDA_CHAIN, tag])
}

/// λ-chain over `[0,1]^d` with an optional prediction payload. `expand`
/// maps chain coordinates to a full `q`-vector.
fn lambda_chain(
    model: &MeasurementModel,
    d: usize,
    log_prior: &dyn Fn(&[f64]) -> f64,
    expand: &dyn Fn(&[f64]) -> Vec<f64>,
    init: Vec<f64>,
    retained: usize,
    thin: usize,
    seed: u64,
    predict_at: Option<usize>,
) -> Result<(Chain, Option<Vec<Vec<(f64, f64)>>>)> {
    let mut cfg = DramConfig::new(DramConfig::steps_for(retained, thin), init, seed);
    cfg.thin = thin;
    let lo = vec![0.0; d];
    let hi = vec![1.0; d];
    let grid = model.grid();
    let (chain, aux) = mcmc::sample_with_aux(
        |x| {
            let full = expand(x);
            let lp = log_prior(x);
            let ld = if lp == f64::NEG_INFINITY { lp } else { lp + model.log_likelihood(&full) };
            let pred = predict_at.map(|j| grid.run_all(j, &full));
            (ld, pred)
        },
        &lo,
        &hi,
        &cfg,
    )?;
    let preds = predict_at.map(|_| aux.into_iter().map(|a| a.expect("payload present")).collect());
    Ok((chain, preds))
}

/// Runs each requested method. The MAP stage and λ-chain are computed once
/// and shared by the two hierarchical methods.
///
/// With `predict_at = Some(j)`, every density evaluation of a λ-chain also
/// runs the code at grid point `j` (one `run_all`), and the embedded
/// pushforward is evaluated there after sampling.
pub fn calibrate_many(
    model: &MeasurementModel,
    p: usize,
    q: usize,
    methods: &[Method],
    cfg: &MethodConfig,
    seed: u64,
    predict_at: Option<usize>,
) -> Result<Vec<Calibration>> {
    cfg.validate()?;
    if p >= q {
        return Err(CalibError::InvalidArgument(format!("need p < q, got p={p} q={q}")));
    }
    let mut hier: Option<(MapResult, Chain, Option<Vec<Vec<(f64, f64)>>>)> = None;
    let mut out = Vec::with_capacity(methods.len());
    for &method in methods {
        let cal = match method {
            Method::NoError => {
                let pin = cfg.pinned_error;
                let expand = move |x: &[f64]| {
                    let mut v = x.to_vec();
                    v.resize(q, pin);
                    v
                };
                let (chain, predictions) = lambda_chain(
                    model,
                    p,
                    &|_| 0.0,
                    &expand,
                    vec![0.5; p],
                    cfg.n_lambda,
                    cfg.lambda_thin,
                    chain_seed(seed, method),
                    predict_at,
                )?;
                let lams = chain.samples.iter().map(|x| expand(x)).collect();
                Calibration {
                    method,
                    ensemble: PosteriorEnsemble::uniform(lams)?,
                    chain,
                    alpha_chain: None,
                    map: None,
                    predictions,
                }
            }
            Method::UniformError => {
                let (chain, predictions) = lambda_chain(
                    model,
                    q,
                    &|_| 0.0,
                    &|x| x.to_vec(),
                    vec![0.5; q],
                    cfg.n_lambda,
                    cfg.lambda_thin,
                    chain_seed(seed, method),
                    predict_at,
                )?;
                Calibration {
                    method,
                    ensemble: PosteriorEnsemble::uniform(chain.samples.clone())?,
                    chain,
                    alpha_chain: None,
                    map: None,
                    predictions,
                }
            }
            Method::HierMap | Method::HierFullBayes => {
                let prior = cfg.prior(p, q);
                if hier.is_none() {
                    let map = map_iterate(&prior, &flat_log_prior, model, &cfg.map_config(), seed)?;
                    if !map.converged {
                        log::warn!("MAP iteration stopped after {} steps without reaching tau", map.n_iterations());
                    }
                    let at = prior.at(&map.alpha_star);
                    let (chain, predictions) = lambda_chain(
                        model,
                        q,
                        &|x| at.logpdf(x),
                        &|x| x.to_vec(),
                        lambda_init(&prior, &map.alpha_star),
                        cfg.n_lambda,
                        cfg.lambda_thin,
                        chain_seed(seed, method),
                        predict_at,
                    )?;
                    hier = Some((map, chain, predictions));
                }
                let (map, chain, predictions) = hier.clone().expect("hierarchical stage computed");
                let (ensemble, alpha_chain) = if method == Method::HierMap {
                    (PosteriorEnsemble::plug_in(&prior, &map.alpha_star, chain.samples.clone())?, None)
                } else {
                    let bank = map.bank.as_ref().ok_or(CalibError::Empty("MAP bank"))?;
                    let mut a_cfg = DramConfig::new(
                        DramConfig::steps_for(cfg.n_alpha, cfg.alpha_thin),
                        map.alpha_star.clone(),
                        seed::derive(seed, &[seed::stream::ALPHA_CHAIN]),
                    );
                    a_cfg.thin = cfg.alpha_thin;
                    let a_chain = sample_alpha_chain(&prior, bank, &map.alpha_star, cfg.kappa, a_cfg)?;
                    let ens = PosteriorEnsemble::assemble(
                        &prior,
                        &map.alpha_star,
                        a_chain.samples.clone(),
                        chain.samples.clone(),
                    )?;
                    (ens, Some(a_chain))
                };
                Calibration {
                    method,
                    ensemble,
                    chain,
                    alpha_chain,
                    map: Some(map),
                    predictions,
                }
            }
            Method::Embedded => {
                let xi = XiBank::draw(cfg.r, q, seed::derive(seed, &[seed::stream::EMBEDDED_XI]));
                let mut e_cfg = DramConfig::new(
                    DramConfig::steps_for(cfg.n_lambda, cfg.embedded_thin),
                    embedded::default_init(q),
                    seed::derive(seed, &[seed::stream::EMBEDDED_CHAIN]),
                );
                e_cfg.thin = cfg.embedded_thin;
                let post = embedded::sample_embedded(
                    |pr: &EmbeddedParams| {
                        embedded::embedded_log_likelihood(pr, &xi, model).unwrap_or(f64::NEG_INFINITY)
                    },
                    q,
                    xi.clone(),
                    &e_cfg,
                )?;
                let grid = model.grid();
                let predictions = predict_at.map(|j| par::map_slice(&post.pushforward, |l| grid.run_all(j, l)));
                Calibration {
                    method,
                    ensemble: PosteriorEnsemble::uniform(post.pushforward)?,
                    chain: post.chain,
                    alpha_chain: None,
                    map: None,
                    predictions,
                }
            }
        };
        out.push(cal);
    }
    Ok(out)
}

pub fn calibrate(
    model: &MeasurementModel,
    p: usize,
    q: usize,
    method: Method,
    cfg: &MethodConfig,
    seed: u64,
    predict_at: Option<usize>,
) -> Result<Calibration> {
    calibrate_many(model, p, q, &[method], cfg, seed, predict_at).map(|mut v| v.remove(0))
}

/// Predictive moments of every output at grid point `j`, evaluating the
/// ensemble after the fact.
pub fn predict_point(model: &MeasurementModel, ens: &PosteriorEnsemble, j: usize) -> Vec<(f64, f64)> {
    let grid = model.grid();
    let preds: Vec<Vec<(f64, f64)>> = par::map_slice(&ens.lambda_samples, |l| grid.run_all(j, l));
    (0..grid.n_outputs())
        .map(|t| {
            let col: Vec<(f64, f64)> = preds.iter().map(|r| r[t]).collect();
            ens.moments_of_predictions(&col)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::emulator::EmulatorGrid;
    use crate::lhs::lhs_design;
    use crate::testbed::{canonical_simulator, generate_observations, GroundTruthConfig};

    fn small_cfg() -> MethodConfig {
        MethodConfig {
            n_bank: 200,
            n_lambda: 150,
            n_alpha: 50,
            max_iters: 3,
            tau: 0.2,
            r: 4,
            ..Default::default()
        }
    }

    fn model() -> MeasurementModel {
        let problem = canonical_simulator();
        let design = lhs_design(6, 3, 3).unwrap();
        let obs = generate_observations(&problem, &GroundTruthConfig::default(), &design, 0.05, 3).unwrap();
        MeasurementModel::from_observations(&obs, EmulatorGrid::exact(&problem, &design.points)).unwrap()
    }

    #[test]
    fn tags_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.tag().parse::<Method>().unwrap(), m);
            assert_eq!(serde_json::to_string(&m).unwrap(), format!("\"{}\"", m.tag()));
        }
        assert!("bogus".parse::<Method>().is_err());
    }

    #[test]
    fn dimensions_per_method() {
        let m = model();
        let cals = calibrate_many(&m, 4, 6, &Method::ALL, &small_cfg(), 1, Some(0)).unwrap();
        let dims: Vec<usize> = cals.iter().map(|c| c.chain.dim()).collect();
        assert_eq!(dims, vec![4, 6, 6, 6, 12]);
        for c in &cals {
            assert!(c.ensemble.lambda_samples.iter().all(|l| l.len() == 6));
            let preds = c.predictions.as_ref().unwrap();
            assert_eq!(preds.len(), c.ensemble.n_lambda());
            assert!(c.moments(2).unwrap().1 >= 0.0);
        }
        assert!(cals[0].ensemble.lambda_samples.iter().all(|l| l[4] == 0.5 && l[5] == 0.5));
        assert_eq!(cals[4].ensemble.n_lambda(), 150 * 4);
    }

    #[test]
    fn hier_methods_share_lambda_chain() {
        let m = model();
        let cfg = small_cfg();
        let both = calibrate_many(&m, 4, 6, &[Method::HierMap, Method::HierFullBayes], &cfg, 2, None).unwrap();
        let alone = calibrate(&m, 4, 6, Method::HierFullBayes, &cfg, 2, None).unwrap();
        assert_eq!(both[0].chain.samples, both[1].chain.samples);
        assert_eq!(both[1].chain.samples, alone.chain.samples);
        assert_eq!(both[1].alpha_chain.as_ref().unwrap().len(), 50);
    }

    #[test]
    fn bad_config_rejected() {
        let m = model();
        let cfg = MethodConfig {
            r: 1,
            ..small_cfg()
        };
        assert!(matches!(
            calibrate(&m, 4, 6, Method::Embedded, &cfg, 1, None),
            Err(CalibError::Config(_))
        ));
    }
}
