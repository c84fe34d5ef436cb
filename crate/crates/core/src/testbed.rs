//! Synthetic three-output simulator and the virtual-measurement protocol used
//! to benchmark the calibration methods.
//!
//! Controls are `x = (l0, r0, v0)` and parameters `λ = (λ1..λ6)`, all in the
//! unit cube. The first four parameters play the role of physical constants,
//! the last two are the extra "error" parameters whose influence has opposite
//! sign on output 1 versus outputs 2 and 3.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{CalibError, Result};
use crate::io;
use crate::lhs::Design;
use crate::seed;

/// A multi-output simulator `f : [0,1]^s × [0,1]^q → R^T`.
pub trait Simulator: Send + Sync {
    fn n_controls(&self) -> usize;
    fn n_params(&self) -> usize;
    fn n_outputs(&self) -> usize;
    /// Output `t` (0-based).
    fn output(&self, x: &[f64], lambda: &[f64], t: usize) -> f64;

    fn outputs(&self, x: &[f64], lambda: &[f64]) -> Vec<f64> {
        (0..self.n_outputs()).map(|t| self.output(x, lambda, t)).collect()
    }
}

/// The fixed analytic stand-in for the impact code.
#[derive(Debug, Clone, Copy, Default)]
pub struct CanonicalSimulator;

impl CanonicalSimulator {
    /// Constant offsets of the three outputs (their value at `x = 0, λ = 0`).
    pub const OFFSETS: [f64; 3] = [0.0, 0.0, 0.5];
}

impl Simulator for CanonicalSimulator {
    fn n_controls(&self) -> usize {
        3
    }

    fn n_params(&self) -> usize {
        6
    }

    fn n_outputs(&self) -> usize {
        3
    }

    fn output(&self, x: &[f64], l: &[f64], t: usize) -> f64 {
        let (l0, r0, v0) = (x[0], x[1], x[2]);
        match t {
            0 => 0.2 * l0 + v0 * (1.0 + 0.5 * l[0] + 0.3 * l[1]) + 0.15 * l[4] - 0.1 * l[5] * r0,
            1 => {
                0.8 * r0 + 0.6 * v0 * (0.5 + 0.4 * l[2]) + 0.1 * l[0] * v0 * v0 - 0.12 * l[4]
                    + 0.08 * l[5]
            }
            2 => {
                0.5 + 0.7 * v0 * v0 * (0.6 + 0.4 * l[3]) + 0.1 * l0 * l[1] - 0.1 * l[4]
                    - 0.05 * l[5]
            }
            _ => panic!("output index {t} out of range"),
        }
    }
}

/// Dimensions and simulator handle of a calibration study.
#[derive(Clone)]
pub struct CalibrationProblem {
    /// Control dimension.
    pub s: usize,
    /// Number of physical parameters (the first `p` of `λ`).
    pub p: usize,
    /// Total parameter count, physical plus error parameters.
    pub q: usize,
    /// Number of outputs.
    pub n_outputs: usize,
    /// Observed output, 1-based.
    pub t_obs: usize,
    pub simulator: Arc<dyn Simulator>,
}

impl fmt::Debug for CalibrationProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CalibrationProblem")
            .field("s", &self.s)
            .field("p", &self.p)
            .field("q", &self.q)
            .field("n_outputs", &self.n_outputs)
            .field("t_obs", &self.t_obs)
            .finish_non_exhaustive()
    }
}

impl CalibrationProblem {
    pub fn new(simulator: Arc<dyn Simulator>, p: usize, t_obs: usize) -> Result<Self> {
        let problem = Self {
            s: simulator.n_controls(),
            q: simulator.n_params(),
            n_outputs: simulator.n_outputs(),
            p,
            t_obs,
            simulator,
        };
        problem.validate()?;
        Ok(problem)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=self.n_outputs).contains(&self.t_obs) {
            return Err(CalibError::InvalidArgument(format!(
                "t_obs must be in 1..={}, got {}",
                self.n_outputs, self.t_obs
            )));
        }
        if self.p >= self.q {
            return Err(CalibError::InvalidArgument(format!(
                "need p < q, got p={} q={}",
                self.p, self.q
            )));
        }
        Ok(())
    }

    /// 0-based index of the observed output.
    pub fn obs_index(&self) -> usize {
        self.t_obs - 1
    }

    /// Number of error parameters, `q - p`.
    pub fn n_error(&self) -> usize {
        self.q - self.p
    }

    pub fn with_t_obs(&self, t_obs: usize) -> Result<Self> {
        let mut out = self.clone();
        out.t_obs = t_obs;
        out.validate()?;
        Ok(out)
    }

    pub fn eval(&self, x: &[f64], lambda: &[f64], t: usize) -> f64 {
        self.simulator.output(x, lambda, t)
    }
}

/// The canonical problem: 3 controls, 4 physical + 2 error parameters,
/// 3 outputs, output 1 observed.
pub fn canonical_simulator() -> CalibrationProblem {
    CalibrationProblem::new(Arc::new(CanonicalSimulator), 4, 1).expect("canonical problem is valid")
}

/// Parameters of the virtual reality used to generate measurements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthConfig {
    pub lambda0: Vec<f64>,
    /// Shift applied to the velocity control before evaluating the truth.
    pub delta_v: f64,
}

impl Default for GroundTruthConfig {
    fn default() -> Self {
        Self {
            lambda0: vec![0.4, 0.6, 0.5, 0.5, 0.3, 0.7],
            delta_v: 0.1,
        }
    }
}

impl GroundTruthConfig {
    /// `ω(x) = (l0, r0, v0 + ΔV)`, clamped to the unit cube. The flag reports
    /// whether clamping was needed.
    pub fn omega(&self, x: &[f64]) -> (Vec<f64>, bool) {
        let mut w = x.to_vec();
        let last = w.len() - 1;
        let shifted = w[last] + self.delta_v;
        let clamped = shifted.clamp(0.0, 1.0);
        w[last] = clamped;
        (w, clamped != shifted)
    }

    /// True outputs `y_t(x) = f_t(ω(x), λ0)` for every `t`.
    pub fn truth(&self, problem: &CalibrationProblem, x: &[f64]) -> (Vec<f64>, bool) {
        let (w, clamped) = self.omega(x);
        (problem.simulator.outputs(&w, &self.lambda0), clamped)
    }
}

/// Noisy measurements of the observed output plus the noiseless truth matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationSet {
    pub values: Vec<f64>,
    pub design: Design,
    pub sigma_eps: f64,
    /// `truth[j][t] = y_t(x_j)`; used for scoring only.
    pub truth: Vec<Vec<f64>>,
    /// Observed output, 1-based.
    pub t_obs: usize,
    pub seed: u64,
    pub delta_v: f64,
    pub lambda0: Vec<f64>,
    /// Set when `ω(x_j)` left the valid domain for some `j` and was clamped.
    pub clamped: bool,
}

/// JSON sidecar accompanying the observation CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationMeta {
    pub seed: u64,
    pub sigma_eps: f64,
    pub delta_v: f64,
    pub lambda0: Vec<f64>,
    pub t_obs: usize,
}

impl ObservationSet {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Truth column for output `t` (0-based).
    pub fn truth_column(&self, t: usize) -> Vec<f64> {
        self.truth.iter().map(|row| row[t]).collect()
    }

    pub fn meta(&self) -> ObservationMeta {
        ObservationMeta {
            seed: self.seed,
            sigma_eps: self.sigma_eps,
            delta_v: self.delta_v,
            lambda0: self.lambda0.clone(),
            t_obs: self.t_obs,
        }
    }

    /// Writes `x1..xs, y_obs, y_true_1..y_true_T` to `csv_path` and the
    /// metadata sidecar to `json_path`.
    pub fn write(&self, csv_path: &Path, json_path: &Path) -> Result<()> {
        let s = self.design.dim();
        let n_out = self.truth.first().map_or(0, Vec::len);
        let mut header: Vec<String> = (1..=s).map(|i| format!("x{i}")).collect();
        header.push("y_obs".into());
        header.extend((1..=n_out).map(|t| format!("y_true_{t}")));
        let rows: Vec<Vec<f64>> = (0..self.len())
            .map(|j| {
                let mut r = self.design.points[j].clone();
                r.push(self.values[j]);
                r.extend_from_slice(&self.truth[j]);
                r
            })
            .collect();
        io::write_numeric_csv(csv_path, &header, &rows)?;
        io::write_json(json_path, &self.meta())
    }

    pub fn read(csv_path: &Path, json_path: &Path) -> Result<Self> {
        let meta: ObservationMeta = io::read_json(json_path)?;
        let (header, rows) = io::read_numeric_csv(csv_path)?;
        let s = header.iter().take_while(|h| h.starts_with('x')).count();
        if header.get(s).map(String::as_str) != Some("y_obs") {
            return Err(CalibError::Parse("expected y_obs column after controls".into()));
        }
        let points = rows.iter().map(|r| r[..s].to_vec()).collect();
        let values = rows.iter().map(|r| r[s]).collect();
        let truth = rows.iter().map(|r| r[s + 1..].to_vec()).collect();
        Ok(Self {
            values,
            design: Design {
                points,
                seed: meta.seed,
            },
            sigma_eps: meta.sigma_eps,
            truth,
            t_obs: meta.t_obs,
            seed: meta.seed,
            delta_v: meta.delta_v,
            lambda0: meta.lambda0,
            clamped: false,
        })
    }

    /// Same design and truth, measured through a different output.
    ///
    /// The noise stream is keyed by the seed and the output, so each
    /// transposition gets its own realization.
    pub fn retarget(
        &self,
        problem: &CalibrationProblem,
        truth_cfg: &GroundTruthConfig,
        t_obs: usize,
        sigma_eps: f64,
    ) -> Result<Self> {
        let p = problem.with_t_obs(t_obs)?;
        generate_observations(&p, truth_cfg, &self.design, sigma_eps, self.seed)
    }
}

/// Runs the virtual-measurement protocol on `design`: evaluates the shifted
/// truth at every point and perturbs the observed output with i.i.d.
/// `N(0, σ_ε²)` noise drawn from a dedicated stream.
pub fn generate_observations(
    problem: &CalibrationProblem,
    truth_cfg: &GroundTruthConfig,
    design: &Design,
    sigma_eps: f64,
    seed: u64,
) -> Result<ObservationSet> {
    if design.is_empty() {
        return Err(CalibError::Empty("design"));
    }
    if !(sigma_eps > 0.0 && sigma_eps.is_finite()) {
        return Err(CalibError::InvalidArgument(format!(
            "sigma_eps must be positive, got {sigma_eps}"
        )));
    }
    if truth_cfg.lambda0.len() != problem.q || truth_cfg.lambda0.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(CalibError::InvalidArgument("lambda0 must lie in [0,1]^q".into()));
    }
    let normal = Normal::new(0.0, sigma_eps).expect("positive std");
    let mut rng = seed::rng(seed::derive(seed, &[seed::stream::NOISE, problem.t_obs as u64]));
    let mut clamped_any = false;
    let mut truth = Vec::with_capacity(design.len());
    let mut values = Vec::with_capacity(design.len());
    for x in &design.points {
        let (y, clamped) = truth_cfg.truth(problem, x);
        clamped_any |= clamped;
        values.push(y[problem.obs_index()] + normal.sample(&mut rng));
        truth.push(y);
    }
    if clamped_any {
        log::warn!("shifted velocity left [0,1] for some design points and was clamped");
    }
    Ok(ObservationSet {
        values,
        design: design.clone(),
        sigma_eps,
        truth,
        t_obs: problem.t_obs,
        seed,
        delta_v: truth_cfg.delta_v,
        lambda0: truth_cfg.lambda0.clone(),
        clamped: clamped_any,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lhs::lhs_design;
    use rand::Rng as _;

    const LAMBDA0: [f64; 6] = [0.4, 0.6, 0.5, 0.5, 0.3, 0.7];

    #[test]
    fn hand_evaluated_output() {
        let sim = CanonicalSimulator;
        let y = sim.output(&[0.5, 0.5, 0.5], &LAMBDA0, 0);
        assert!((y - 0.80).abs() < 1e-12, "{y}");
    }

    #[test]
    fn zero_inputs_give_offsets() {
        let y = CanonicalSimulator.outputs(&[0.0; 3], &[0.0; 6]);
        assert_eq!(y, CanonicalSimulator::OFFSETS.to_vec());
    }

    #[test]
    fn error_parameter_has_opposite_monotone_influence() {
        let mut rng = seed::rng(1);
        for _ in 0..10 {
            let x: Vec<f64> = (0..3).map(|_| rng.random()).collect();
            let mut lo = LAMBDA0.to_vec();
            let mut hi = LAMBDA0.to_vec();
            lo[4] = 0.1;
            hi[4] = 0.9;
            let (a, b) = (CanonicalSimulator.outputs(&x, &lo), CanonicalSimulator.outputs(&x, &hi));
            assert!(b[0] > a[0]);
            assert!(b[1] < a[1]);
            assert!(b[2] < a[2]);
        }
    }

    #[test]
    fn evaluation_is_bit_stable() {
        let x = [0.3, 0.7, 0.2];
        let a = CanonicalSimulator.outputs(&x, &LAMBDA0);
        let b = CanonicalSimulator.outputs(&x, &LAMBDA0);
        assert!(a.iter().zip(&b).all(|(u, v)| u.to_bits() == v.to_bits()));
    }

    #[test]
    fn problem_validation() {
        let p = canonical_simulator();
        assert_eq!((p.s, p.p, p.q, p.n_outputs, p.t_obs), (3, 4, 6, 3, 1));
        assert!(p.with_t_obs(0).is_err());
        assert!(p.with_t_obs(4).is_err());
        assert!(CalibrationProblem::new(Arc::new(CanonicalSimulator), 6, 1).is_err());
    }

    #[test]
    fn tiny_noise_reproduces_truth() {
        let problem = canonical_simulator();
        let design = lhs_design(10, 3, 9).unwrap();
        let obs = generate_observations(&problem, &GroundTruthConfig::default(), &design, 1e-12, 4).unwrap();
        for j in 0..10 {
            assert!((obs.values[j] - obs.truth[j][0]).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_shift_truth_is_simulator() {
        let problem = canonical_simulator();
        let design = lhs_design(10, 3, 9).unwrap();
        let cfg = GroundTruthConfig {
            delta_v: 0.0,
            ..Default::default()
        };
        let obs = generate_observations(&problem, &cfg, &design, 0.3, 4).unwrap();
        for (j, x) in design.points.iter().enumerate() {
            assert_eq!(obs.truth[j], CanonicalSimulator.outputs(x, &LAMBDA0));
        }
        assert!(!obs.clamped);
    }

    #[test]
    fn ten_point_configuration_and_clamping() {
        let problem = canonical_simulator();
        let design = lhs_design(10, 3, 2).unwrap();
        for sigma in [0.9, 0.3] {
            let obs = generate_observations(&problem, &GroundTruthConfig::default(), &design, sigma, 8).unwrap();
            assert_eq!(obs.len(), 10);
            assert_eq!(obs.truth[0].len(), 3);
        }
        // a velocity near 1 gets clamped by a shift of 0.1
        let top = Design {
            points: vec![vec![0.5, 0.5, 0.95]],
            seed: 0,
        };
        let obs = generate_observations(&problem, &GroundTruthConfig::default(), &top, 0.1, 0).unwrap();
        assert!(obs.clamped);
        assert!(generate_observations(&problem, &GroundTruthConfig::default(), &top, 0.0, 0).is_err());
    }

    #[test]
    fn csv_and_sidecar_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let problem = canonical_simulator();
        let design = lhs_design(10, 3, 21).unwrap();
        let obs = generate_observations(&problem, &GroundTruthConfig::default(), &design, 0.05, 3).unwrap();
        let (c, j) = (dir.path().join("o.csv"), dir.path().join("o.json"));
        obs.write(&c, &j).unwrap();
        let back = ObservationSet::read(&c, &j).unwrap();
        assert_eq!(back.values, obs.values);
        assert_eq!(back.truth, obs.truth);
        assert_eq!(back.design.points, obs.design.points);
        assert_eq!(back.meta(), obs.meta());
    }

    /// With a velocity shift no parameter reproduces the observed output
    /// exactly; with none, `λ0` does.
    #[test]
    fn shifted_truth_is_unreachable() {
        let problem = canonical_simulator();
        let design = lhs_design(10, 3, 5).unwrap();
        let worst_residual = |cfg: &GroundTruthConfig| -> f64 {
            let truths: Vec<f64> = design.points.iter().map(|x| cfg.truth(&problem, x).0[0]).collect();
            // dense grid over the parameters that matter for output 1
            let grid: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
            let mut best = f64::INFINITY;
            for &a in &grid {
                for &b in &grid {
                    for &c in &grid {
                        for &d in &grid {
                            let lam = [a, b, 0.5, 0.5, c, d];
                            let m = design
                                .points
                                .iter()
                                .zip(&truths)
                                .map(|(x, y)| (problem.eval(x, &lam, 0) - y).abs())
                                .fold(0.0, f64::max);
                            best = best.min(m);
                        }
                    }
                }
            }
            best
        };
        let exact = GroundTruthConfig {
            lambda0: vec![0.4, 0.6, 0.5, 0.5, 0.3, 0.7],
            delta_v: 0.0,
        };
        assert!(worst_residual(&exact) < 1e-12);
        assert!(worst_residual(&GroundTruthConfig::default()) > 1e-3);
    }
}
