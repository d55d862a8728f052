use std::time::Instant;

use bvmlab_core::bayes::{
    credible_band, posterior_mean, run_pcn, simulate_from_trajectory, Dataset, PcnConfig,
    PosteriorChain,
};
use bvmlab_core::forward::Trajectory;
use bvmlab_core::information::{limit_covariance, InfoOperator, MAX_CONDITION};
use bvmlab_core::lab::{
    bvm_path_experiment, bvm_theta_experiment, cell_seed, clt_experiment, condition_probes,
    contraction_experiment, coverage_experiment, Check, ExperimentReport, MetricTable, Problem,
};
use bvmlab_core::schrodinger::{build_flow_matrix, PotentialPath};
use serde_json::{json, Value};

use crate::config::{Command, RunConfig};
use crate::stages::{self, Run};
use crate::Failure;

fn compute<T>(stage: &str, r: bvmlab_core::Result<T>) -> Result<T, Failure> {
    r.map_err(|e| Failure::compute(stage, e.to_string()))
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    problem: Problem,
    run: &'a mut Run,
}

impl Ctx<'_> {
    fn forward_key(&self) -> Value {
        let p = &self.cfg.problem;
        json!({
            "d": p.d, "K": p.k, "T": p.t,
            "reaction": p.reaction, "theta0": p.theta0,
            "solver": self.cfg.solver,
        })
    }

    fn truth(&mut self) -> Result<Trajectory, Failure> {
        let key = self.forward_key();
        let cut = self.problem.cut().clone();
        let problem = &self.problem;
        self.run.stage(
            "forward",
            &key,
            |dir| stages::load_trajectory(dir, &cut),
            || compute("forward", problem.truth()),
            stages::save_trajectory,
        )
    }

    /// Linearisation about the (possibly cached) truth; identical to a fresh assembly.
    fn info(&mut self, truth: Trajectory) -> Result<InfoOperator, Failure> {
        let start = Instant::now();
        let path = compute(
            "info",
            PotentialPath::from_trajectory(&truth, &self.problem.reaction),
        )?;
        let flow = compute("info", build_flow_matrix(&path, self.problem.cut()))?;
        let info = compute("info", InfoOperator::from_flow(truth, path, flow))?;
        self.run
            .record("info", start.elapsed().as_secs_f64(), false);
        Ok(info)
    }

    fn data_seed(&self) -> u64 {
        cell_seed(self.cfg.seed, 0, 0)
    }

    fn data_key(&self) -> Value {
        json!({
            "forward": self.forward_key(),
            "n": self.cfg.prior.n,
            "noise_sd": self.cfg.problem.noise_sd,
            "seed": self.data_seed(),
        })
    }

    fn data(&mut self, truth: &Trajectory) -> Result<Dataset, Failure> {
        let n = self.cfg.prior.n;
        let noise = self.cfg.problem.noise_sd;
        let seed = self.data_seed();
        let key = self.data_key();
        let (horizon, theta0) = (self.problem.horizon, self.problem.theta0.clone());
        self.run.stage(
            "data",
            &key,
            |dir| stages::load_dataset(dir, horizon, noise, seed, &theta0),
            || {
                compute(
                    "data",
                    simulate_from_trajectory(truth, &theta0, n, noise, seed),
                )
            },
            stages::save_dataset,
        )
    }

    fn chain(&mut self, data: &Dataset, pcn: &PcnConfig) -> Result<PosteriorChain, Failure> {
        let pcn = PcnConfig {
            seed: cell_seed(self.cfg.seed, 1, 0),
            ..*pcn
        };
        let key = json!({ "data": self.data_key(), "gamma": self.cfg.prior.gamma, "pcn": pcn });
        let problem = &self.problem;
        let gamma = self.cfg.prior.gamma;
        self.run.stage(
            "chain",
            &key,
            stages::load_chain,
            || {
                let lik = compute("chain", problem.likelihood(data))?;
                let prior = compute("chain", problem.prior(gamma, data.len()))?;
                compute("chain", run_pcn(&lik, &prior, &pcn))
            },
            stages::save_chain,
        )
    }
}

fn info_report(ctx: &mut Ctx, value: Value) -> Result<ExperimentReport, Failure> {
    let truth = ctx.truth()?;
    let info = ctx.info(truth)?;
    let lim = compute("info", limit_covariance(&info))?;
    let cut = info.cut().clone();
    let mut report = ExperimentReport::new("info", value);
    let mut table = MetricTable::new("spectrum", &["index", "lambda", "gram", "limit_cov"]);
    for a in 0..info.dim() {
        table.push(vec![
            (a + 1) as f64,
            cut.eigenvalue(a + 1),
            info.gram()[(a, a)],
            lim.cov()[(a, a)],
        ]);
    }
    let s = info.high_mode_structure();
    report.notes.push(format!(
        "high-mode block of G against (-2Δ)^-1: {:.4}, against (-Δ)^-1: {:.4}",
        s.relative_to_half_inverse, s.relative_to_inverse
    ));
    report.checks.push(Check::within(
        "condition",
        info.condition(),
        Some(1.0),
        Some(MAX_CONDITION),
    ));
    report.checks.push(Check::within(
        "symmetry_residual",
        info.symmetry_residual(),
        None,
        Some(1e-10),
    ));
    report.tables.push(table);
    ctx.run.write_matrix(
        "gram",
        info.gram(),
        json!({ "basis": "zero-mean real cos/sin" }),
    )?;
    ctx.run.write_matrix(
        "limit_cov",
        lim.cov(),
        json!({ "scale": "unit design volume" }),
    )?;
    Ok(report)
}

fn simulate_report(ctx: &mut Ctx, value: Value) -> Result<ExperimentReport, Failure> {
    let truth = ctx.truth()?;
    let data = ctx.data(&truth)?;
    let ys: Vec<f64> = data.records().iter().map(|r| r.y).collect();
    let n = ys.len() as f64;
    let mean = ys.iter().sum::<f64>() / n;
    let sd = (ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0)).sqrt();
    let mut report = ExperimentReport::new("simulate", value);
    report.seeds.push(data.seed());
    let mut table = MetricTable::new("summary", &["n", "noise_sd", "mean_y", "sd_y"]);
    table.push(vec![n, data.noise_sd(), mean, sd]);
    report.tables.push(table);
    ctx.run.write_dataset(&data)?;
    let grid = (2 * ctx.cfg.problem.k + 1).max(64) as usize;
    ctx.run.write_trajectory(&truth, grid)?;
    Ok(report)
}

fn posterior_report(ctx: &mut Ctx, value: Value) -> Result<ExperimentReport, Failure> {
    let truth = ctx.truth()?;
    let data = ctx.data(&truth)?;
    let block = ctx.cfg.experiment.posterior.clone();
    let chain = ctx.chain(&data, &block.pcn)?;
    let start = Instant::now();
    let cut = ctx.problem.cut().clone();
    let mean = compute("summary", posterior_mean(&chain, &cut))?;
    let lik = compute("summary", ctx.problem.likelihood(&data))?;
    let band = compute(
        "summary",
        credible_band(std::slice::from_ref(&chain), &lik, &block.band),
    )?;
    let dist = compute("summary", band.sup_distance(&truth))?;
    ctx.run
        .record("summary", start.elapsed().as_secs_f64(), false);

    let mut report = ExperimentReport::new("posterior", value);
    report.seeds.extend([data.seed(), chain.seed]);
    let theta0 = ctx.problem.theta0.zero_mean_coords();
    let mut coeffs = MetricTable::new("coefficients", &["index", "truth", "mean", "se"]);
    for (a, t) in theta0.iter().enumerate() {
        coeffs.push(vec![(a + 1) as f64, *t, mean.coords[a], mean.se[a]]);
    }
    let mut stats = MetricTable::new("chain", &["kept", "acceptance", "beta", "failed_solves"]);
    stats.push(vec![
        chain.len() as f64,
        chain.acceptance,
        chain.beta,
        chain.failed_solves as f64,
    ]);
    let mut bands = MetricTable::new("band", &["alpha", "radius", "truth_distance", "covered"]);
    bands.push(vec![
        block.band.alpha,
        band.radius,
        dist,
        f64::from(u8::from(dist <= band.radius)),
    ]);
    report.notes.extend(chain.warnings.iter().cloned());
    report.notes.extend(mean.warnings.iter().cloned());
    report.tables.extend([coeffs, stats, bands]);
    Ok(report)
}

/// Runs `cmd`; returns the report written to the run directory.
pub fn execute(cmd: Command, cfg: &RunConfig, run: &mut Run) -> Result<ExperimentReport, Failure> {
    let problem = cfg.problem().map_err(Failure::Invalid)?;
    let value = cfg.command_value(cmd);
    let mut ctx = Ctx { cfg, problem, run };
    let report = match cmd {
        Command::Info => info_report(&mut ctx, value)?,
        Command::Simulate => simulate_report(&mut ctx, value)?,
        Command::Posterior => posterior_report(&mut ctx, value)?,
        Command::BvmTheta | Command::BvmPath | Command::Clt | Command::Probes => {
            let truth = ctx.truth()?;
            let info = ctx.info(truth)?;
            let start = Instant::now();
            let stage = cmd.name();
            let r = match cmd {
                Command::BvmTheta => bvm_theta_experiment(&ctx.problem, &info, &cfg.bvm_theta()),
                Command::BvmPath => bvm_path_experiment(&ctx.problem, &info, &cfg.bvm_path()),
                Command::Clt => clt_experiment(&ctx.problem, &info, &cfg.clt()),
                _ => condition_probes(&ctx.problem, &info, &cfg.probes()),
            };
            let r = compute(stage, r)?;
            ctx.run.record(stage, start.elapsed().as_secs_f64(), false);
            r
        }
        Command::Coverage | Command::Contraction => {
            let start = Instant::now();
            let stage = cmd.name();
            let r = if cmd == Command::Coverage {
                coverage_experiment(&ctx.problem, &cfg.coverage())
            } else {
                contraction_experiment(&ctx.problem, &cfg.contraction())
            };
            let r = compute(stage, r)?;
            ctx.run.record(stage, start.elapsed().as_secs_f64(), false);
            r
        }
    };
    Ok(report)
}
