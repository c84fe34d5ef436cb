//! Hierarchical model error: a prior over the error parameters indexed by a
//! hyperparameter `α`, importance-sampling estimates of `p(y|α)`, the
//! iterative MAP search, confidence levels, and the full-Bayes ensemble.

mod bank;
mod confidence;
mod full_bayes;
mod map;
mod prior;
pub mod toy;

pub use bank::{is_bank_build, is_loglik_alpha, IsBank};
pub use confidence::{confidence_level, confidence_map, uniform_grid, ConfidenceCell, ConfidenceMap};
pub use full_bayes::{
    full_bayes_sample, kappa_box, lambda_init, posterior_expectation, predictive_moments, sample_alpha_chain,
    sample_lambda_chain, FullBayesConfig, PosteriorEnsemble,
};
pub use map::{flat_log_prior, map_iterate, maximize_alpha, MapConfig, MapIterate, MapResult};
pub use prior::{prior_logpdf, HierPrior, PriorAt};
