//! End-to-end pipeline for one design seed: design, surrogates,
//! observations for each transposition, leave-one-out comparison.

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::emulator::EmulatorGrid;
use crate::error::Result;
use crate::gp::SurrogateSet;
use crate::lhs::{lhs_design, Design};
use crate::likelihood::MeasurementModel;
use crate::loo::{loo_evaluate, LooReport};
use crate::seed;
use crate::testbed::{canonical_simulator, generate_observations, CalibrationProblem, ObservationSet};

pub fn design_for(cfg: &ExperimentConfig, problem: &CalibrationProblem, seed: u64) -> Result<Design> {
    lhs_design(cfg.testbed.n, problem.s, seed::derive(seed, &[seed::stream::DESIGN]))
}

pub fn surrogates_for(
    cfg: &ExperimentConfig,
    problem: &CalibrationProblem,
    design: &Design,
    seed: u64,
) -> Result<SurrogateSet> {
    SurrogateSet::fit(
        problem,
        &design.points,
        cfg.surrogate.n_train,
        &cfg.surrogate.fit_config(),
        seed,
    )
}

pub fn observations_for(
    cfg: &ExperimentConfig,
    problem: &CalibrationProblem,
    design: &Design,
    t_obs: usize,
    seed: u64,
) -> Result<ObservationSet> {
    let p = problem.with_t_obs(t_obs)?;
    generate_observations(&p, &cfg.truth(), design, cfg.sigma_for(t_obs)?, seed)
}

/// Seed used by the methods for one `(design seed, t_obs)` pair.
pub fn method_seed(seed: u64, t_obs: usize) -> u64 {
    seed::derive(seed, &[seed::stream::FOLD, 1000 + t_obs as u64])
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeedStudy {
    pub seed: u64,
    /// One entry per transposition, each holding one report per method.
    pub reports: Vec<(usize, Vec<LooReport>)>,
}

/// Runs every configured transposition and method for one design seed.
pub fn run_seed(cfg: &ExperimentConfig, seed: u64) -> Result<SeedStudy> {
    let problem = canonical_simulator();
    let design = design_for(cfg, &problem, seed)?;
    let set = surrogates_for(cfg, &problem, &design, seed)?;
    let grid = EmulatorGrid::from_surrogates(&set);
    let mut reports = Vec::new();
    for &t_obs in &cfg.testbed.t_obs {
        let obs = observations_for(cfg, &problem, &design, t_obs, seed)?;
        let model = MeasurementModel::from_observations(&obs, grid.with_fresh_counter())?;
        let r = loo_evaluate(
            &obs,
            &model,
            problem.p,
            problem.q,
            &cfg.method.methods,
            &cfg.method.tuning,
            method_seed(seed, t_obs),
        )?;
        reports.push((t_obs, r));
    }
    Ok(SeedStudy { seed, reports })
}
