//! Experiment configuration, read from a sectioned TOML file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{CalibError, Result};
use crate::gp::FitConfig;
use crate::methods::{Method, MethodConfig};
use crate::testbed::GroundTruthConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TestbedSection {
    pub n: usize,
    /// Noise standard deviation for each observed output, indexed by `t_obs`.
    pub sigma_eps: Vec<f64>,
    pub delta_v: f64,
    pub lambda0: Vec<f64>,
    /// Observed outputs to study, 1-based.
    pub t_obs: Vec<usize>,
    /// One design per seed.
    pub seeds: Vec<u64>,
}

impl Default for TestbedSection {
    fn default() -> Self {
        let truth = GroundTruthConfig::default();
        Self {
            n: 10,
            sigma_eps: vec![0.09, 0.09, 0.03],
            delta_v: truth.delta_v,
            lambda0: truth.lambda0,
            t_obs: vec![1, 2, 3],
            seeds: vec![1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurrogateSection {
    pub n_train: usize,
    pub lengthscale_lo: f64,
    pub lengthscale_hi: f64,
    pub n_starts: usize,
}

impl Default for SurrogateSection {
    fn default() -> Self {
        let f = FitConfig::default();
        Self {
            n_train: 60,
            lengthscale_lo: f.lengthscale_bounds.0,
            lengthscale_hi: f.lengthscale_bounds.1,
            n_starts: f.n_starts,
        }
    }
}

impl SurrogateSection {
    pub fn fit_config(&self) -> FitConfig {
        FitConfig {
            lengthscale_bounds: (self.lengthscale_lo, self.lengthscale_hi),
            n_starts: self.n_starts,
            ..FitConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MethodSection {
    /// Method used by `calibrate`.
    pub method: Method,
    /// Methods compared by `loo-evaluate`.
    pub methods: Vec<Method>,
    /// Confidence bank size `L'`.
    pub l_prime: usize,
    pub beta: f64,
    pub zeta: f64,
    /// Grid nodes per axis for confidence maps.
    pub grid_per_axis: usize,
    #[serde(flatten)]
    pub tuning: MethodConfig,
}

impl Default for MethodSection {
    fn default() -> Self {
        Self {
            method: Method::HierMap,
            methods: Method::ALL.to_vec(),
            l_prime: 20_000,
            beta: 1.05,
            zeta: 0.95,
            grid_per_axis: 9,
            tuning: MethodConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub directory: PathBuf,
    /// Any of `csv`, `json`.
    pub formats: Vec<String>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("out"),
            formats: vec!["csv".into(), "json".into()],
        }
    }
}

impl OutputSection {
    pub fn wants(&self, format: &str) -> bool {
        self.formats.iter().any(|f| f == format)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub testbed: TestbedSection,
    pub surrogate: SurrogateSection,
    pub method: MethodSection,
    pub output: OutputSection,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| CalibError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CalibError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn truth(&self) -> GroundTruthConfig {
        GroundTruthConfig {
            lambda0: self.testbed.lambda0.clone(),
            delta_v: self.testbed.delta_v,
        }
    }

    /// Noise level used when output `t_obs` is observed.
    pub fn sigma_for(&self, t_obs: usize) -> Result<f64> {
        self.testbed
            .sigma_eps
            .get(t_obs.wrapping_sub(1))
            .copied()
            .ok_or_else(|| CalibError::Config(format!("no sigma_eps entry for t_obs = {t_obs}")))
    }

    pub fn validate(&self) -> Result<()> {
        let tb = &self.testbed;
        if tb.n < 2 {
            return Err(CalibError::Config("testbed.n must be >= 2".into()));
        }
        if tb.seeds.is_empty() {
            return Err(CalibError::Config("testbed.seeds must not be empty".into()));
        }
        if tb.t_obs.is_empty() || tb.t_obs.iter().any(|&t| t == 0 || t > tb.sigma_eps.len()) {
            return Err(CalibError::Config(
                "testbed.t_obs entries must index testbed.sigma_eps (1-based)".into(),
            ));
        }
        if tb.sigma_eps.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(CalibError::Config("testbed.sigma_eps must be positive".into()));
        }
        if tb.lambda0.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(CalibError::Config("testbed.lambda0 must lie in [0,1]".into()));
        }
        let sg = &self.surrogate;
        if sg.n_train < 2 || sg.n_starts == 0 {
            return Err(CalibError::Config("surrogate.n_train >= 2 and n_starts >= 1 required".into()));
        }
        if !(0.0 < sg.lengthscale_lo && sg.lengthscale_lo < sg.lengthscale_hi) {
            return Err(CalibError::Config("surrogate lengthscale bounds must satisfy 0 < lo < hi".into()));
        }
        let m = &self.method;
        m.tuning.validate()?;
        if m.methods.is_empty() {
            return Err(CalibError::Config("method.methods must not be empty".into()));
        }
        if !(m.beta >= 1.0) {
            return Err(CalibError::Config("method.beta must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&m.zeta) {
            return Err(CalibError::Config("method.zeta must lie in [0,1]".into()));
        }
        if m.l_prime < 2 || m.grid_per_axis == 0 {
            return Err(CalibError::Config("method.l_prime >= 2 and grid_per_axis >= 1 required".into()));
        }
        if let Some(f) = self.output.formats.iter().find(|f| !matches!(f.as_str(), "csv" | "json")) {
            return Err(CalibError::Config(format!("unknown output format '{f}'")));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_the_reference_operating_point() {
        let c = ExperimentConfig::default();
        assert_eq!(c.testbed.n, 10);
        assert_eq!(c.method.tuning.n_bank, 10_000);
        assert_eq!(c.method.tuning.n_lambda, 3000);
        assert_eq!(c.method.tuning.n_alpha, 750);
        assert_eq!(c.method.l_prime, 20_000);
        assert_eq!(c.method.beta, 1.05);
        assert_eq!(c.method.tuning.kappa, 4.0);
        assert_eq!(c.method.tuning.sigma_prior, 0.45);
        c.validate().unwrap();
    }

    #[test]
    fn toml_round_trip_and_partial_files() {
        let c = ExperimentConfig::default();
        assert_eq!(ExperimentConfig::from_toml_str(&c.to_toml_string()).unwrap(), c);
        let partial = "[testbed]\nn = 6\nseeds = [3, 4]\n\n[method]\nmethod = \"embedded\"\nr = 16\n";
        let p = ExperimentConfig::from_toml_str(partial).unwrap();
        assert_eq!(p.testbed.n, 6);
        assert_eq!(p.testbed.seeds, vec![3, 4]);
        assert_eq!(p.method.method, Method::Embedded);
        assert_eq!(p.method.tuning.r, 16);
        assert_eq!(p.method.tuning.n_lambda, 3000);
    }

    #[test]
    fn invalid_files_are_config_errors() {
        for text in [
            "[testbed]\nn = 1\n",
            "[testbed]\nbogus = 1\n",
            "[method]\nmethod = \"magic\"\n",
            "[method]\nbeta = 0.5\n",
            "[method]\nr = 1\n",
            "[method]\nbogus = 1\n",
            "[testbed]\nt_obs = [4]\n",
            "[output]\nformats = [\"xml\"]\n",
            "not toml at all [",
        ] {
            assert!(matches!(ExperimentConfig::from_toml_str(text), Err(CalibError::Config(_))), "{text}");
        }
    }

    #[test]
    fn sigma_lookup() {
        let c = ExperimentConfig::default();
        assert_eq!(c.sigma_for(3).unwrap(), 0.03);
        assert!(c.sigma_for(0).is_err());
    }
}
