use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use hiercal::config::ExperimentConfig;
use hiercal::emulator::EmulatorGrid;
use hiercal::gp::{SurrogateSet, SurrogateSetDoc};
use hiercal::hier::{
    confidence_map, flat_log_prior, kappa_box, uniform_grid, IsBank, MapResult,
};
use hiercal::io;
use hiercal::likelihood::MeasurementModel;
use hiercal::loo::{loo_evaluate, LooSummary};
use hiercal::methods::{calibrate, predict_point, Method};
use hiercal::seed;
use hiercal::study::{design_for, method_seed, observations_for, surrogates_for};
use hiercal::testbed::{canonical_simulator, CalibrationProblem, ObservationSet};
use hiercal::{CalibError, Result};
use serde::Serialize;

use crate::manifest::Manifest;
use crate::{Cli, Command};

/// Reads the config file (or defaults) and applies the command-line
/// overrides.
pub fn effective_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.testbed.seeds = vec![s];
    }
    if let Some(m) = &cli.method {
        let m: Method = m.parse()?;
        cfg.method.method = m;
        cfg.method.methods = vec![m];
    }
    if let Some(t) = cli.t_obs {
        cfg.testbed.t_obs = vec![t as usize];
    }
    if let Some(out) = &cli.out {
        cfg.output.directory = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn run(cli: &Cli) -> Result<()> {
    let cfg = effective_config(cli)?;
    let out = cfg.output.directory.clone();
    fs::create_dir_all(&out)?;
    let mut ctx = Ctx {
        cfg: &cfg,
        out: &out,
        problem: canonical_simulator(),
        outputs: Vec::new(),
        evaluations: 0,
    };
    match cli.command {
        Command::GenerateData => ctx.generate_data()?,
        Command::FitSurrogates => ctx.fit_surrogates()?,
        Command::Calibrate => ctx.calibrate()?,
        Command::ConfidenceMap => ctx.confidence_map()?,
        Command::LooEvaluate => ctx.loo_evaluate()?,
        Command::Report => ctx.report()?,
    }
    let mut outputs = ctx.outputs;
    outputs.sort();
    Manifest::new(cli.command.name(), &cfg, ctx.evaluations, outputs).write(&out)
}

struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    out: &'a Path,
    problem: CalibrationProblem,
    outputs: Vec<String>,
    evaluations: u64,
}

fn seed_dir(seed: u64, t_obs: usize) -> PathBuf {
    PathBuf::from(format!("seed_{seed}")).join(format!("t{t_obs}"))
}

#[derive(Serialize)]
struct EnsembleSummary {
    method: Method,
    n_alpha: usize,
    n_lambda: usize,
    alpha_star: Vec<f64>,
    /// `1 / Σ w̄_k²`
    effective_size: f64,
    max_weight: f64,
    acceptance_rate: f64,
    alpha_acceptance_rate: Option<f64>,
}

#[derive(Serialize)]
struct ConfidenceSummary {
    alpha_star: Vec<f64>,
    beta: f64,
    zeta: f64,
    kappa: f64,
    l_prime: usize,
    n_cells: usize,
    min_gamma: f64,
    meets_threshold: bool,
}

impl Ctx<'_> {
    fn path(&mut self, rel: PathBuf) -> Result<PathBuf> {
        let full = self.out.join(&rel);
        if let Some(parent) = full.parent() {
            fs::create_dir_all(parent)?;
        }
        self.outputs.push(rel.to_string_lossy().replace('\\', "/"));
        Ok(full)
    }

    fn csv(&self) -> bool {
        self.cfg.output.wants("csv")
    }

    fn json(&self) -> bool {
        self.cfg.output.wants("json")
    }

    fn data_paths(&self, seed: u64, t_obs: usize) -> (PathBuf, PathBuf) {
        let base = PathBuf::from("data").join(seed_dir(seed, t_obs));
        (base.join("observations.csv"), base.join("observations.json"))
    }

    fn surrogate_path(seed: u64) -> PathBuf {
        PathBuf::from("surrogates").join(format!("seed_{seed}.json"))
    }

    /// Stored observations when present, regenerated otherwise.
    fn observations(&self, seed: u64, t_obs: usize) -> Result<ObservationSet> {
        let (csv, json) = self.data_paths(seed, t_obs);
        let (csv, json) = (self.out.join(csv), self.out.join(json));
        if csv.exists() && json.exists() {
            return ObservationSet::read(&csv, &json);
        }
        let design = design_for(self.cfg, &self.problem, seed)?;
        observations_for(self.cfg, &self.problem, &design, t_obs, seed)
    }

    /// Stored surrogates when present, fitted otherwise.
    fn surrogates(&self, seed: u64) -> Result<SurrogateSet> {
        let path = self.out.join(Self::surrogate_path(seed));
        if path.exists() {
            let doc: SurrogateSetDoc = io::read_json(&path)?;
            return SurrogateSet::from_doc(doc);
        }
        log::info!("fitting surrogates for seed {seed}");
        let design = design_for(self.cfg, &self.problem, seed)?;
        surrogates_for(self.cfg, &self.problem, &design, seed)
    }

    fn model(&self, obs: &ObservationSet, set: &SurrogateSet) -> Result<MeasurementModel> {
        MeasurementModel::from_observations(obs, EmulatorGrid::from_surrogates(set))
    }

    fn generate_data(&mut self) -> Result<()> {
        for &s in &self.cfg.testbed.seeds {
            let design = design_for(self.cfg, &self.problem, s)?;
            for &t in &self.cfg.testbed.t_obs {
                let obs = observations_for(self.cfg, &self.problem, &design, t, s)?;
                let (csv, json) = self.data_paths(s, t);
                let (csv, json) = (self.path(csv)?, self.path(json)?);
                obs.write(&csv, &json)?;
                if obs.clamped {
                    log::warn!("seed {s}: shifted controls were clamped");
                }
            }
        }
        Ok(())
    }

    fn fit_surrogates(&mut self) -> Result<()> {
        for &s in &self.cfg.testbed.seeds {
            let design = design_for(self.cfg, &self.problem, s)?;
            let set = surrogates_for(self.cfg, &self.problem, &design, s)?;
            let path = self.path(Self::surrogate_path(s))?;
            io::write_json(&path, &set.to_doc())?;
            self.evaluations += (self.problem.n_outputs * design.len() * self.cfg.surrogate.n_train) as u64;
        }
        Ok(())
    }

    fn calibrate(&mut self) -> Result<()> {
        let method = self.cfg.method.method;
        let (p, q) = (self.problem.p, self.problem.q);
        for &s in &self.cfg.testbed.seeds {
            let set = self.surrogates(s)?;
            for &t in &self.cfg.testbed.t_obs {
                let obs = self.observations(s, t)?;
                let model = self.model(&obs, &set)?;
                let cal = calibrate(&model, p, q, method, &self.cfg.method.tuning, method_seed(s, t), None)
                    .map_err(|e| context(e, &format!("calibrate seed {s} t_obs {t} method {method}")))?;
                let dir = PathBuf::from("calibrate").join(seed_dir(s, t)).join(method.tag());
                if self.csv() {
                    let names = chain_names(method, p, q);
                    cal.chain.write_csv(&self.path(dir.join("chain.csv"))?, &names)?;
                    if let Some(a) = &cal.alpha_chain {
                        let names: Vec<String> = (1..=q - p).map(|i| format!("alpha{i}")).collect();
                        a.write_csv(&self.path(dir.join("alpha_chain.csv"))?, &names)?;
                    }
                    let mut rows = Vec::new();
                    for j in 0..obs.len() {
                        for (ti, (mean, var)) in predict_point(&model, &cal.ensemble, j).into_iter().enumerate() {
                            rows.push(vec![(j + 1) as f64, (ti + 1) as f64, mean, var.sqrt(), obs.truth[j][ti]]);
                        }
                    }
                    let header: Vec<String> = ["j", "t", "mean", "std", "truth"].map(String::from).to_vec();
                    io::write_numeric_csv(&self.path(dir.join("predictions.csv"))?, &header, &rows)?;
                }
                if self.json() {
                    if let Some(map) = &cal.map {
                        io::write_json(&self.path(dir.join("map_trace.json"))?, map)?;
                    }
                    let ens = &cal.ensemble;
                    let summary = EnsembleSummary {
                        method,
                        n_alpha: ens.n_alpha(),
                        n_lambda: ens.n_lambda(),
                        alpha_star: ens.alpha_star.clone(),
                        effective_size: 1.0 / ens.mixture.iter().map(|w| w * w).sum::<f64>(),
                        max_weight: ens.mixture.iter().copied().fold(0.0, f64::max),
                        acceptance_rate: cal.chain.acceptance_rate,
                        alpha_acceptance_rate: cal.alpha_chain.as_ref().map(|c| c.acceptance_rate),
                    };
                    io::write_json(&self.path(dir.join("ensemble.json"))?, &summary)?;
                }
                self.evaluations += model.grid().runs();
            }
        }
        Ok(())
    }

    fn load_map(&self, seed: u64, t_obs: usize) -> Result<MapResult> {
        let base = self.out.join("calibrate").join(seed_dir(seed, t_obs));
        for m in [Method::HierMap, Method::HierFullBayes] {
            let path = base.join(m.tag()).join("map_trace.json");
            if path.exists() {
                return io::read_json(&path);
            }
        }
        Err(CalibError::Config(format!(
            "no MAP trace under {}; run `calibrate --method hier_map` first",
            base.display()
        )))
    }

    fn confidence_map(&mut self) -> Result<()> {
        let mcfg = &self.cfg.method;
        let prior = mcfg.tuning.prior(self.problem.p, self.problem.q);
        for &s in &self.cfg.testbed.seeds {
            for &t in &self.cfg.testbed.t_obs {
                let map = self.load_map(s, t)?;
                let set = self.surrogates(s)?;
                let obs = self.observations(s, t)?;
                let model = self.model(&obs, &set)?;
                let bank = IsBank::build(
                    &prior,
                    &map.alpha_star,
                    mcfg.l_prime,
                    &model,
                    seed::derive(s, &[seed::stream::CONFIDENCE_BANK, t as u64]),
                )?;
                let (lo, hi) = kappa_box(&prior, &map.alpha_star, mcfg.tuning.kappa);
                let grid = uniform_grid(&lo, &hi, mcfg.grid_per_axis);
                let cm = confidence_map(&bank, &prior, &grid, mcfg.beta, mcfg.zeta, &flat_log_prior)?;
                let dir = PathBuf::from("confidence").join(seed_dir(s, t));
                if self.csv() {
                    let mut header: Vec<String> = (1..=prior.n_error()).map(|i| format!("alpha{i}")).collect();
                    header.push("gamma".into());
                    let rows: Vec<Vec<f64>> = cm
                        .cells
                        .iter()
                        .map(|c| {
                            let mut r = c.alpha.clone();
                            r.push(c.gamma);
                            r
                        })
                        .collect();
                    io::write_numeric_csv(&self.path(dir.join("confidence.csv"))?, &header, &rows)?;
                }
                if self.json() {
                    let summary = ConfidenceSummary {
                        alpha_star: map.alpha_star.clone(),
                        beta: mcfg.beta,
                        zeta: mcfg.zeta,
                        kappa: mcfg.tuning.kappa,
                        l_prime: mcfg.l_prime,
                        n_cells: cm.cells.len(),
                        min_gamma: cm.min_gamma,
                        meets_threshold: cm.meets_threshold,
                    };
                    io::write_json(&self.path(dir.join("confidence.json"))?, &summary)?;
                }
                log::info!(
                    "seed {s} t_obs {t}: min gamma {:.4} ({} zeta {})",
                    cm.min_gamma,
                    if cm.meets_threshold { ">=" } else { "<" },
                    mcfg.zeta
                );
                self.evaluations += model.grid().runs();
            }
        }
        Ok(())
    }

    fn loo_evaluate(&mut self) -> Result<()> {
        let (p, q) = (self.problem.p, self.problem.q);
        let mut table = Vec::new();
        for &s in &self.cfg.testbed.seeds {
            let set = self.surrogates(s)?;
            for &t in &self.cfg.testbed.t_obs {
                let obs = self.observations(s, t)?;
                let model = self.model(&obs, &set)?;
                let reports = loo_evaluate(
                    &obs,
                    &model,
                    p,
                    q,
                    &self.cfg.method.methods,
                    &self.cfg.method.tuning,
                    method_seed(s, t),
                )?;
                let dir = PathBuf::from("loo").join(seed_dir(s, t));
                for r in &reports {
                    if !r.is_complete() {
                        log::warn!("seed {s} t_obs {t} {}: {} folds failed", r.method, r.failed.len());
                    }
                    if self.csv() {
                        r.write_csv(&self.path(dir.join(format!("{}.csv", r.method.tag())))?)?;
                    }
                    if self.json() {
                        r.write_summary(&self.path(dir.join(format!("{}.json", r.method.tag())))?)?;
                    }
                    for (ti, (rm, pq)) in r.rmsre.iter().zip(&r.p_quantile).enumerate() {
                        table.push(vec![
                            s.to_string(),
                            t.to_string(),
                            r.method.tag().to_string(),
                            (ti + 1).to_string(),
                            io::fmt_f64(100.0 * rm),
                            io::fmt_f64(100.0 * pq),
                            r.is_complete().to_string(),
                        ]);
                    }
                }
                // folds count their own runs
                self.evaluations += reports.first().map_or(0, |r| r.runs);
            }
        }
        if self.csv() {
            io::write_text_csv(
                &self.path(PathBuf::from("loo").join("summary.csv"))?,
                &["seed", "t_obs", "method", "t", "rmsre_percent", "p09_percent", "complete"],
                &table,
            )?;
        }
        Ok(())
    }

    fn report(&mut self) -> Result<()> {
        let root = self.out.join("loo");
        let mut found = Vec::new();
        collect_json(&root, &mut found)?;
        if found.is_empty() {
            return Err(CalibError::Config(format!(
                "no leave-one-out summaries under {}; run `loo-evaluate` first",
                root.display()
            )));
        }
        found.sort();
        // (t_obs, method, t) -> (rmsre %, p09 %) per seed
        let mut acc: BTreeMap<(usize, Method, usize), Vec<(f64, f64)>> = BTreeMap::new();
        for path in &found {
            let s: LooSummary = io::read_json(path)?;
            for (ti, (rm, pq)) in s.rmsre_percent.iter().zip(&s.p09).enumerate() {
                acc.entry((s.t_obs, s.method, ti + 1)).or_default().push((*rm, 100.0 * pq));
            }
        }
        let mut rows = Vec::new();
        println!("{:>5}  {:<16} {:>2}  {:>12}  {:>10}  {:>5}", "t_obs", "method", "t", "rmsre_%", "p09_%", "seeds");
        for ((t_obs, m, t), v) in &acc {
            let n = v.len() as f64;
            let rm = v.iter().map(|x| x.0).sum::<f64>() / n;
            let pq = v.iter().map(|x| x.1).sum::<f64>() / n;
            println!("{t_obs:>5}  {:<16} {t:>2}  {rm:>12.3}  {pq:>10.2}  {:>5}", m.tag(), v.len());
            rows.push(vec![
                t_obs.to_string(),
                m.tag().to_string(),
                t.to_string(),
                io::fmt_f64(rm),
                io::fmt_f64(pq),
                v.len().to_string(),
            ]);
        }
        io::write_text_csv(
            &self.path(PathBuf::from("report.csv"))?,
            &["t_obs", "method", "t", "rmsre_percent_mean", "p09_percent_mean", "n_seeds"],
            &rows,
        )
    }
}

fn collect_json(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    if !dir.is_dir() {
        return Ok(());
    }
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            collect_json(&path, out)?;
        } else if path.extension().is_some_and(|e| e == "json") {
            out.push(path);
        }
    }
    Ok(())
}

fn chain_names(method: Method, p: usize, q: usize) -> Vec<String> {
    match method {
        Method::NoError => (1..=p).map(|i| format!("lambda{i}")).collect(),
        Method::Embedded => (1..=q)
            .map(|i| format!("loc{i}"))
            .chain((1..=q).map(|i| format!("halfwidth{i}")))
            .collect(),
        _ => (1..=q).map(|i| format!("lambda{i}")).collect(),
    }
}

/// Keeps the variant (and so the exit code) while naming the stage.
fn context(e: CalibError, stage: &str) -> CalibError {
    log::error!("{stage}: {e}");
    e
}
