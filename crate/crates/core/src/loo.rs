//! Leave-one-out evaluation: each fold drops one observation, calibrates on
//! the rest and predicts every output at the dropped control point.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CalibError, Result};
use crate::io;
use crate::likelihood::MeasurementModel;
use crate::methods::{calibrate_many, Method, MethodConfig};
use crate::metrics::{interval_probability_from, quantile_09, rmsre};
use crate::par;
use crate::seed;
use crate::testbed::ObservationSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LooRow {
    /// Held-out observation, 1-based.
    pub j: usize,
    /// Output, 1-based.
    pub t: usize,
    pub mean: f64,
    pub std: f64,
    pub truth: f64,
    pub p_hat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldFailure {
    pub j: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LooReport {
    pub method: Method,
    pub t_obs: usize,
    pub rows: Vec<LooRow>,
    /// Per output, over successful folds.
    pub rmsre: Vec<f64>,
    pub p_quantile: Vec<f64>,
    pub failed: Vec<FoldFailure>,
    /// Code runs summed over folds.
    pub runs: u64,
}

/// JSON summary of one report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LooSummary {
    pub method: Method,
    pub t_obs: usize,
    pub rmsre: Vec<f64>,
    pub rmsre_percent: Vec<f64>,
    pub p09: Vec<f64>,
    pub complete: bool,
    pub failed: Vec<FoldFailure>,
    pub runs: u64,
}

impl LooReport {
    pub fn is_complete(&self) -> bool {
        self.failed.is_empty()
    }

    pub fn summary(&self) -> LooSummary {
        LooSummary {
            method: self.method,
            t_obs: self.t_obs,
            rmsre: self.rmsre.clone(),
            rmsre_percent: self.rmsre.iter().map(|v| 100.0 * v).collect(),
            p09: self.p_quantile.clone(),
            complete: self.is_complete(),
            failed: self.failed.clone(),
            runs: self.runs,
        }
    }

    /// Long format: `method, j, t, mean, std, truth, p_hat`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                vec![
                    self.method.tag().to_string(),
                    r.j.to_string(),
                    r.t.to_string(),
                    io::fmt_f64(r.mean),
                    io::fmt_f64(r.std),
                    io::fmt_f64(r.truth),
                    io::fmt_f64(r.p_hat),
                ]
            })
            .collect();
        io::write_text_csv(path, &["method", "j", "t", "mean", "std", "truth", "p_hat"], &rows)
    }

    pub fn write_summary(&self, path: &Path) -> Result<()> {
        io::write_json(path, &self.summary())
    }
}

struct FoldOutput {
    /// `[method][t] -> (mean, std, p_hat)`
    per_method: Vec<Vec<(f64, f64, f64)>>,
    runs: u64,
}

/// Runs the leave-one-out study for several methods at once. Folds run in
/// parallel, each on its own run counter and with seed
/// `derive(seed, [FOLD, j])`.
pub fn loo_evaluate(
    obs: &ObservationSet,
    model: &MeasurementModel,
    p: usize,
    q: usize,
    methods: &[Method],
    cfg: &MethodConfig,
    seed: u64,
) -> Result<Vec<LooReport>> {
    let n = model.len();
    if n < 2 {
        return Err(CalibError::InvalidArgument("leave-one-out needs n >= 2".into()));
    }
    if obs.len() != n {
        return Err(CalibError::InvalidArgument("observation set and model differ in size".into()));
    }
    if methods.is_empty() {
        return Err(CalibError::Empty("method list"));
    }
    cfg.validate()?;
    let n_out = model.grid().n_outputs();
    let folds: Vec<std::result::Result<FoldOutput, String>> = par::map_range(n, |j| {
        let fold = || -> Result<FoldOutput> {
            let sub = model.with_fresh_counter().loo_model(j)?;
            let point = model.point_ids()[j];
            let fold_seed = seed::derive(seed, &[seed::stream::FOLD, j as u64]);
            let cals = calibrate_many(&sub, p, q, methods, cfg, fold_seed, Some(point))?;
            let per_method = cals
                .iter()
                .map(|c| {
                    (0..n_out)
                        .map(|t| {
                            let preds = c.output_predictions(t).expect("predictions requested");
                            let (mean, var) = c.ensemble.moments_of_predictions(&preds);
                            let p_hat = interval_probability_from(&c.ensemble, &preds, mean, obs.truth[j][t]);
                            (mean, var.sqrt(), p_hat)
                        })
                        .collect()
                })
                .collect();
            Ok(FoldOutput {
                per_method,
                runs: sub.grid().runs(),
            })
        };
        fold().map_err(|e| {
            log::warn!("fold {} failed: {e}", j + 1);
            e.to_string()
        })
    });

    let runs: u64 = folds.iter().filter_map(|f| f.as_ref().ok()).map(|f| f.runs).sum();
    let failed: Vec<FoldFailure> = folds
        .iter()
        .enumerate()
        .filter_map(|(j, f)| f.as_ref().err().map(|e| FoldFailure { j: j + 1, error: e.clone() }))
        .collect();
    let mut reports = Vec::with_capacity(methods.len());
    for (mi, &method) in methods.iter().enumerate() {
        let mut rows = Vec::new();
        let mut by_t: BTreeMap<usize, (Vec<f64>, Vec<f64>, Vec<f64>)> = BTreeMap::new();
        for (j, f) in folds.iter().enumerate() {
            let Ok(f) = f else { continue };
            for t in 0..n_out {
                let (mean, std, p_hat) = f.per_method[mi][t];
                let truth = obs.truth[j][t];
                rows.push(LooRow {
                    j: j + 1,
                    t: t + 1,
                    mean,
                    std,
                    truth,
                    p_hat,
                });
                let e = by_t.entry(t).or_default();
                e.0.push(mean);
                e.1.push(truth);
                e.2.push(p_hat);
            }
        }
        let mut rm = Vec::with_capacity(n_out);
        let mut pq = Vec::with_capacity(n_out);
        for t in 0..n_out {
            match by_t.get(&t) {
                Some((pred, truth, ph)) => {
                    rm.push(rmsre(pred, truth)?);
                    pq.push(quantile_09(ph)?);
                }
                None => {
                    rm.push(f64::NAN);
                    pq.push(f64::NAN);
                }
            }
        }
        reports.push(LooReport {
            method,
            t_obs: obs.t_obs,
            rows,
            rmsre: rm,
            p_quantile: pq,
            failed: failed.clone(),
            runs,
        });
    }
    Ok(reports)
}
