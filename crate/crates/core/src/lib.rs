//! Hierarchical Bayesian calibration of multi-output simulators observed
//! through a single output.

pub mod config;
pub mod embedded;
pub mod emulator;
pub mod error;
pub mod gp;
pub mod hier;
pub mod io;
pub mod lhs;
pub mod likelihood;
pub mod loo;
pub mod mcmc;
pub mod methods;
pub mod metrics;
pub mod optim;
pub mod par;
pub mod seed;
pub mod stats;
pub mod study;
pub mod testbed;

pub use error::{CalibError, Result};
