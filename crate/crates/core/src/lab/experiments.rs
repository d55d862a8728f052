use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::bayes::{
    credible_band, efficient_estimator, simulate_from_trajectory, BandConfig, ConjugateGaussian,
    ContractionSchedule, PcnConfig, PosteriorChain,
};
use crate::error::{Error, Result};
use crate::information::{limit_covariance, InfoOperator};
use crate::par;
use crate::spectral::{sobolev_norm_coords, SpectralField};

use super::report::{log_log_slope, mean_se, median, Check, ExperimentReport, MetricTable};
use super::wasserstein::{gaussian_w1, w1_1d};
use super::{cell_seed, Problem, ProjectionFamily};

/// Sub-stream tags separating data, chain and limit seeds of one cell.
const DATA: u64 = 0;
const CHAIN: u64 = 1 << 20;
const LIMIT: u64 = 1 << 30;

fn chain_cfg(pcn: &PcnConfig, seed: u64) -> PcnConfig {
    PcnConfig { seed, ..*pcn }
}

fn config_value<T: Serialize>(cfg: &T) -> serde_json::Value {
    serde_json::to_value(cfg).unwrap_or(serde_json::Value::Null)
}

fn dot(a: &[f64], b: &DVector<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// `√N(⟨θ, ψ⟩ − mean)` over the chain.
fn centered_projection(chain: &PosteriorChain, psi: &DVector<f64>, n: usize) -> Vec<f64> {
    let v: Vec<f64> = chain.states.iter().map(|s| dot(s, psi)).collect();
    let m = v.iter().sum::<f64>() / v.len() as f64;
    let r = (n as f64).sqrt();
    v.into_iter().map(|x| r * (x - m)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BvmThetaConfig {
    pub ns: Vec<usize>,
    pub gamma: f64,
    pub pcn: PcnConfig,
    pub replications: usize,
    pub limit_draws: usize,
    pub family_size: usize,
    /// Sobolev order used to normalise the test directions.
    pub family_order: f64,
    /// Trend bars are `± bar_width` standard errors.
    pub bar_width: f64,
    pub seed: u64,
}

impl Default for BvmThetaConfig {
    fn default() -> Self {
        Self {
            ns: vec![250, 1000, 4000],
            gamma: 4.0,
            pcn: PcnConfig {
                steps: 20_000,
                burn_in: 2_000,
                thin: 5,
                ..PcnConfig::default()
            },
            replications: 4,
            limit_draws: 10_000,
            family_size: 4,
            family_order: 3.0,
            bar_width: 1.0,
            seed: 0,
        }
    }
}

struct ThetaCell {
    w1: Vec<f64>,
    conjugate: Vec<f64>,
    acceptance: f64,
    beta: f64,
}

/// Projected `W₁` between `√N(θ − θ̃_N)` under the posterior and the limit law.
///
/// The limit draws are shared by every cell, so differences across `N` are not
/// masked by independent reference noise.
pub fn bvm_theta_experiment(
    problem: &Problem,
    info: &InfoOperator,
    cfg: &BvmThetaConfig,
) -> Result<ExperimentReport> {
    if cfg.ns.is_empty() || cfg.replications == 0 {
        return Err(Error::InvalidInput(
            "experiment.ns and experiment.replications must be non-empty".into(),
        ));
    }
    let mut report = ExperimentReport::new("bvm-theta", config_value(cfg));
    report.seeds.push(cfg.seed);
    let family = ProjectionFamily::first_modes(problem.cut(), cfg.family_size, cfg.family_order)?;
    let psis = family.coords();
    let lim = limit_covariance(info)?.scaled(problem.horizon);
    let draws = report.time("limit draws", || {
        lim.sample(cfg.limit_draws, cell_seed(cfg.seed, LIMIT, 0))
    });
    let limit_proj: Vec<Vec<f64>> = psis
        .iter()
        .map(|p| draws.iter().map(|z| z.dot(p)).collect())
        .collect();
    let lim_sd: Vec<f64> = psis
        .iter()
        .map(|p| p.dot(&(lim.cov() * p)).sqrt())
        .collect();
    let truth = info.trajectory();

    let cells: Vec<(usize, usize)> = (0..cfg.ns.len())
        .flat_map(|k| (0..cfg.replications).map(move |r| (k, r)))
        .collect();
    let results = report.time("cells", || {
        par::map_indexed(cells.len(), |c| -> Result<ThetaCell> {
            let (k, r) = cells[c];
            let n = cfg.ns[k];
            let data = simulate_from_trajectory(
                truth,
                &problem.theta0,
                n,
                1.0,
                cell_seed(cfg.seed, DATA + k as u64, r as u64),
            )?;
            let pcn = chain_cfg(&cfg.pcn, cell_seed(cfg.seed, CHAIN + k as u64, r as u64));
            let chain = problem.posterior(&data, cfg.gamma, &pcn)?;
            let w1 = psis
                .iter()
                .zip(&limit_proj)
                .map(|(p, l)| w1_1d(&centered_projection(&chain, p, n), l))
                .collect::<Result<Vec<_>>>()?;
            let conjugate = if problem.reaction.is_zero() {
                let post = ConjugateGaussian::heat(&data, &problem.prior(cfg.gamma, n)?)?;
                psis.iter()
                    .zip(&lim_sd)
                    .map(|(p, &s)| gaussian_w1((n as f64 * p.dot(&(&post.cov * p))).sqrt(), s))
                    .collect()
            } else {
                vec![f64::NAN; psis.len()]
            };
            Ok(ThetaCell {
                w1,
                conjugate,
                acceptance: chain.acceptance,
                beta: chain.beta,
            })
        })
    });

    let mut table = MetricTable::new("cells", &["N", "rep", "psi", "w1", "conjugate_w1"]);
    let mut chains = MetricTable::new("chains", &["N", "rep", "acceptance", "beta"]);
    let mut trend = MetricTable::new("trend", &["N", "median_w1", "se", "cells"]);
    let mut medians: Vec<Vec<f64>> = vec![Vec::new(); cfg.ns.len()];
    for (&(k, r), res) in cells.iter().zip(&results) {
        let n = cfg.ns[k] as f64;
        match res {
            Ok(cell) => {
                for (i, (w, c)) in cell.w1.iter().zip(&cell.conjugate).enumerate() {
                    table.push(vec![n, r as f64, i as f64, *w, *c]);
                }
                chains.push(vec![n, r as f64, cell.acceptance, cell.beta]);
                medians[k].push(median(&cell.w1));
            }
            Err(e) => report.notes.push(format!("cell N={n} rep={r} failed: {e}")),
        }
    }
    let (mut means, mut ses) = (Vec::new(), Vec::new());
    for (k, m) in medians.iter().enumerate() {
        let (mean, se) = mean_se(m);
        trend.push(vec![cfg.ns[k] as f64, mean, se, m.len() as f64]);
        means.push(mean);
        ses.push(se);
    }
    report
        .notes
        .push(format!("test directions: {}", family.labels.join(", ")));
    report.checks.push(Check::decreasing(
        "median_w1_decreasing",
        &means,
        &ses,
        cfg.bar_width,
    ));
    report.tables.extend([trend, table, chains]);
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BvmPathConfig {
    pub ns: Vec<usize>,
    pub gamma: f64,
    pub pcn: PcnConfig,
    pub replications: usize,
    pub limit_draws: usize,
    /// Posterior states pushed through the forward map per cell.
    pub max_draws: usize,
    pub t_min: f64,
    pub t_max: f64,
    pub time_points: usize,
    /// Points per axis of the spatial grid.
    pub space_points: usize,
    pub bar_width: f64,
    pub seed: u64,
}

impl Default for BvmPathConfig {
    fn default() -> Self {
        Self {
            ns: vec![250, 1000, 4000],
            gamma: 4.0,
            pcn: BvmThetaConfig::default().pcn,
            replications: 4,
            limit_draws: 2_000,
            max_draws: 400,
            t_min: 0.05,
            t_max: 0.5,
            time_points: 6,
            space_points: 8,
            bar_width: 1.0,
            seed: 0,
        }
    }
}

/// Space-time evaluation points of the path comparison.
fn path_grid(cfg: &BvmPathConfig, dim: usize) -> Vec<(f64, [f64; 2])> {
    let nt = cfg.time_points.max(1);
    let times: Vec<f64> = (0..nt)
        .map(|k| {
            if nt == 1 {
                cfg.t_max
            } else {
                cfg.t_min + (cfg.t_max - cfg.t_min) * k as f64 / (nt - 1) as f64
            }
        })
        .collect();
    let m = cfg.space_points.max(1);
    let xs: Vec<[f64; 2]> = if dim == 1 {
        (0..m).map(|i| [i as f64 / m as f64, 0.0]).collect()
    } else {
        (0..m * m)
            .map(|i| [(i / m) as f64 / m as f64, (i % m) as f64 / m as f64])
            .collect()
    };
    times
        .iter()
        .flat_map(|&t| xs.iter().map(move |&x| (t, x)))
        .collect()
}

struct PathCell {
    marginal_w1: Vec<f64>,
    post_var: Vec<f64>,
    post_var_theory: Vec<f64>,
    sup_w1: f64,
}

fn sample_var(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)
}

/// Posterior paths `√N(u_θ − u_{θ̃_N})` against limit-process draws.
pub fn bvm_path_experiment(
    problem: &Problem,
    info: &InfoOperator,
    cfg: &BvmPathConfig,
) -> Result<ExperimentReport> {
    if !(cfg.t_min > 0.0 && cfg.t_min <= cfg.t_max && cfg.t_max <= problem.horizon) {
        return Err(Error::InvalidInput(
            "experiment.t_min must be positive and ≤ t_max ≤ T".into(),
        ));
    }
    if cfg.ns.is_empty() || cfg.replications == 0 || cfg.max_draws < 2 || cfg.limit_draws < 2 {
        return Err(Error::InvalidInput(
            "experiment grids and draw counts must be non-trivial".into(),
        ));
    }
    let mut report = ExperimentReport::new("bvm-path", config_value(cfg));
    report.seeds.push(cfg.seed);
    let dim = problem.cut().dim();
    let grid = path_grid(cfg, dim);
    let flow = info.flow();
    let responses: Vec<DVector<f64>> = grid
        .iter()
        .map(|(t, x)| flow.point_responses(*t, &x[..dim]))
        .collect::<Result<_>>()?;
    let lim = limit_covariance(info)?.scaled(problem.horizon);
    let draws = lim.sample(cfg.limit_draws, cell_seed(cfg.seed, LIMIT, 0));
    let limit_vals: Vec<Vec<f64>> = responses
        .iter()
        .map(|r| draws.iter().map(|z| r.dot(z)).collect())
        .collect();
    let limit_sup: Vec<f64> = (0..draws.len())
        .map(|s| limit_vals.iter().fold(0.0f64, |m, v| m.max(v[s].abs())))
        .collect();
    let lim_var: Vec<f64> = limit_vals.iter().map(|v| sample_var(v)).collect();
    let lim_var_theory: Vec<f64> = responses.iter().map(|r| r.dot(&(lim.cov() * r))).collect();
    let truth = info.trajectory();
    let cut = problem.cut().clone();

    let cells: Vec<(usize, usize)> = (0..cfg.ns.len())
        .flat_map(|k| (0..cfg.replications).map(move |r| (k, r)))
        .collect();
    let results = report.time("cells", || {
        par::map_indexed(cells.len(), |c| -> Result<PathCell> {
            let (k, r) = cells[c];
            let n = cfg.ns[k];
            let data = simulate_from_trajectory(
                truth,
                &problem.theta0,
                n,
                1.0,
                cell_seed(cfg.seed, DATA + k as u64, r as u64),
            )?;
            let lik = problem.likelihood(&data)?;
            let prior = problem.prior(cfg.gamma, n)?;
            let chain = crate::bayes::run_pcn(
                &lik,
                &prior,
                &chain_cfg(&cfg.pcn, cell_seed(cfg.seed, CHAIN + k as u64, r as u64)),
            )?;
            let mean = crate::bayes::posterior_mean(&chain, &cut)?;
            let center = lik.solve(&mean.field)?;
            let used = chain.len().min(cfg.max_draws);
            let stride = chain.len() as f64 / used as f64;
            let scale = (n as f64).sqrt();
            let mut vals = vec![Vec::with_capacity(used); grid.len()];
            for d in 0..used {
                let s = &chain.states[(d as f64 * stride) as usize];
                let traj = lik.solve(&SpectralField::from_zero_mean_coords(cut.clone(), s)?)?;
                for (p, (t, x)) in grid.iter().enumerate() {
                    let x = &x[..dim];
                    vals[p].push(scale * (traj.evaluate(*t, x)? - center.evaluate(*t, x)?));
                }
            }
            let sups: Vec<f64> = (0..used)
                .map(|d| vals.iter().fold(0.0f64, |m, v| m.max(v[d].abs())))
                .collect();
            let marginal_w1 = vals
                .iter()
                .zip(&limit_vals)
                .map(|(a, b)| w1_1d(a, b))
                .collect::<Result<Vec<_>>>()?;
            let post_var_theory = if problem.reaction.is_zero() {
                let post = ConjugateGaussian::heat(&data, &prior)?;
                grid.iter()
                    .map(|(t, x)| {
                        let a = DVector::from_fn(cut.len() - 1, |j, _| {
                            (-cut.eigenvalue(j + 1) * t).exp()
                                * cut.real_basis_value(j + 1, &x[..dim])
                        });
                        n as f64 * a.dot(&(&post.cov * &a))
                    })
                    .collect()
            } else {
                vec![f64::NAN; grid.len()]
            };
            Ok(PathCell {
                post_var: vals.iter().map(|v| sample_var(v)).collect(),
                marginal_w1,
                post_var_theory,
                sup_w1: w1_1d(&sups, &limit_sup)?,
            })
        })
    });

    let mut points = MetricTable::new(
        "points",
        &[
            "N",
            "rep",
            "t",
            "x1",
            "x2",
            "w1",
            "post_var",
            "post_var_theory",
            "lim_var",
            "lim_var_theory",
        ],
    );
    let mut trend = MetricTable::new(
        "trend",
        &[
            "N",
            "median_marginal_w1",
            "marginal_se",
            "sup_w1",
            "sup_se",
            "cells",
        ],
    );
    let mut marg: Vec<Vec<f64>> = vec![Vec::new(); cfg.ns.len()];
    let mut sup: Vec<Vec<f64>> = vec![Vec::new(); cfg.ns.len()];
    for (&(k, r), res) in cells.iter().zip(&results) {
        let n = cfg.ns[k] as f64;
        match res {
            Ok(cell) => {
                for (p, (t, x)) in grid.iter().enumerate() {
                    points.push(vec![
                        n,
                        r as f64,
                        *t,
                        x[0],
                        x[1],
                        cell.marginal_w1[p],
                        cell.post_var[p],
                        cell.post_var_theory[p],
                        lim_var[p],
                        lim_var_theory[p],
                    ]);
                }
                marg[k].push(median(&cell.marginal_w1));
                sup[k].push(cell.sup_w1);
            }
            Err(e) => report.notes.push(format!("cell N={n} rep={r} failed: {e}")),
        }
    }
    let (mut sup_means, mut sup_ses) = (Vec::new(), Vec::new());
    for k in 0..cfg.ns.len() {
        let (mm, ms) = mean_se(&marg[k]);
        let (sm, ss) = mean_se(&sup[k]);
        trend.push(vec![cfg.ns[k] as f64, mm, ms, sm, ss, sup[k].len() as f64]);
        sup_means.push(sm);
        sup_ses.push(ss);
    }
    report.checks.push(Check::decreasing(
        "sup_w1_decreasing",
        &sup_means,
        &sup_ses,
        cfg.bar_width,
    ));
    report.tables.extend([trend, points]);
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CltConfig {
    pub n: usize,
    pub replications: usize,
    /// Lattice index of the real test mode `ψ = e_j`.
    pub psi_mode: usize,
    /// Highest lattice index kept by the estimator; `None` keeps the whole cut.
    pub j_max: Option<usize>,
    pub reference_draws: usize,
    pub resamples: usize,
    pub band_factor: f64,
    pub variance_window: (f64, f64),
    pub noise_sd: f64,
    pub seed: u64,
}

impl Default for CltConfig {
    fn default() -> Self {
        Self {
            n: 1000,
            replications: 500,
            psi_mode: 1,
            j_max: None,
            reference_draws: 20_000,
            resamples: 200,
            band_factor: 4.0,
            variance_window: (0.85, 1.15),
            noise_sd: 1.0,
            seed: 0,
        }
    }
}

/// Replicate law of `√N⟨θ̂_N − θ0, ψ⟩` against `N(0, T‖𝕀ψ̄‖²)`.
pub fn clt_experiment(
    problem: &Problem,
    info: &InfoOperator,
    cfg: &CltConfig,
) -> Result<ExperimentReport> {
    if cfg.replications < 200 {
        return Err(Error::InvalidInput(format!(
            "experiment.replications must be at least 200, got {}",
            cfg.replications
        )));
    }
    let cut = problem.cut();
    if cfg.psi_mode == 0 || cfg.psi_mode >= cut.len() {
        return Err(Error::InvalidInput(format!(
            "experiment.psi_mode must lie in 1..{}",
            cut.len() - 1
        )));
    }
    let mut report = ExperimentReport::new("clt", config_value(cfg));
    report.seeds.push(cfg.seed);
    let a = cfg.psi_mode - 1;
    let j_max = cfg.j_max.unwrap_or(cut.len() - 1);
    let lim = limit_covariance(info)?;
    let target_var = problem.horizon * lim.cov()[(a, a)];
    let truth = info.trajectory();
    let theta0 = problem.theta0.zero_mean_coords();
    let root_n = (cfg.n as f64).sqrt();
    let z = report.time("replications", || {
        par::try_map_indexed(cfg.replications, |r| -> Result<f64> {
            let data = simulate_from_trajectory(
                truth,
                &problem.theta0,
                cfg.n,
                cfg.noise_sd,
                cell_seed(cfg.seed, DATA, r as u64),
            )?;
            let est = efficient_estimator(&data, info, j_max)?;
            Ok(root_n * (est.zero_mean_coords()[a] - theta0[a]))
        })
    })?;

    let mut reps = MetricTable::new("replicates", &["rep", "z"]);
    for (r, v) in z.iter().enumerate() {
        reps.push(vec![r as f64, *v]);
    }
    let mut summary = MetricTable::new(
        "summary",
        &["target_var", "sample_var", "ratio", "w1", "resolution"],
    );
    if cfg.noise_sd == 0.0 {
        let worst = z.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        report.checks.push(Check::within(
            "zero_noise_replicates",
            worst,
            None,
            Some(1e-10),
        ));
        report
            .checks
            .push(Check::skipped("variance_ratio", "noise-free probe"));
        summary.push(vec![target_var, 0.0, f64::NAN, f64::NAN, f64::NAN]);
    } else {
        let sd = target_var.sqrt();
        let gauss = |seed: u64, n: usize| -> Vec<f64> {
            let mut rng = par::stream_rng(seed, 0);
            (0..n)
                .map(|_| sd * rand::Rng::sample::<f64, _>(&mut rng, rand_distr::StandardNormal))
                .collect()
        };
        let reference = gauss(cell_seed(cfg.seed, LIMIT, 0), cfg.reference_draws);
        let resolution = par::try_map_indexed(cfg.resamples, |b| {
            w1_1d(
                &gauss(cell_seed(cfg.seed, LIMIT, 1 + b as u64), cfg.replications),
                &reference,
            )
        })?
        .iter()
        .sum::<f64>()
            / cfg.resamples as f64;
        let var = sample_var(&z);
        let ratio = var / target_var;
        let w1 = w1_1d(&z, &reference)?;
        summary.push(vec![target_var, var, ratio, w1, resolution]);
        report.checks.push(Check::within(
            "variance_ratio",
            ratio,
            Some(cfg.variance_window.0),
            Some(cfg.variance_window.1),
        ));
        report.checks.push(Check::within(
            "w1_to_target",
            w1,
            None,
            Some(cfg.band_factor * resolution),
        ));
    }
    report.tables.extend([summary, reps]);
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CoverageConfig {
    pub n: usize,
    pub gamma: f64,
    pub pcn: PcnConfig,
    pub band: BandConfig,
    pub replications: usize,
    pub noise_sd: f64,
    /// Accepted coverage window is `[1 − α − slack, 1]`.
    pub slack: f64,
    pub seed: u64,
}

impl Default for CoverageConfig {
    fn default() -> Self {
        Self {
            n: 4000,
            gamma: 4.0,
            pcn: PcnConfig {
                steps: 5_000,
                burn_in: 1_000,
                thin: 5,
                ..PcnConfig::default()
            },
            band: BandConfig::default(),
            replications: 100,
            noise_sd: 1.0,
            slack: 0.1,
            seed: 0,
        }
    }
}

/// Frequentist coverage of the sup-norm credible band for the true path.
pub fn coverage_experiment(problem: &Problem, cfg: &CoverageConfig) -> Result<ExperimentReport> {
    if cfg.replications == 0 {
        return Err(Error::InvalidInput(
            "experiment.replications must be positive".into(),
        ));
    }
    let mut report = ExperimentReport::new("coverage", config_value(cfg));
    report.seeds.push(cfg.seed);
    let truth = report.time("truth", || problem.truth())?;
    let results = report.time("replications", || {
        par::map_indexed(cfg.replications, |r| -> Result<(f64, f64, f64)> {
            let data = simulate_from_trajectory(
                &truth,
                &problem.theta0,
                cfg.n,
                cfg.noise_sd,
                cell_seed(cfg.seed, DATA, r as u64),
            )?;
            let lik = problem.likelihood(&data)?;
            let prior = problem.prior(cfg.gamma, cfg.n)?;
            let chain = crate::bayes::run_pcn(
                &lik,
                &prior,
                &chain_cfg(&cfg.pcn, cell_seed(cfg.seed, CHAIN, r as u64)),
            )?;
            let band = credible_band(std::slice::from_ref(&chain), &lik, &cfg.band)?;
            Ok((band.radius, band.sup_distance(&truth)?, chain.acceptance))
        })
    });
    let mut table = MetricTable::new(
        "replications",
        &["rep", "radius", "distance", "covered", "acceptance"],
    );
    let mut covered = 0usize;
    let mut ok = 0usize;
    for (r, res) in results.iter().enumerate() {
        match res {
            Ok((radius, dist, acc)) => {
                let hit = dist <= radius;
                covered += usize::from(hit);
                ok += 1;
                table.push(vec![
                    r as f64,
                    *radius,
                    *dist,
                    f64::from(u8::from(hit)),
                    *acc,
                ]);
            }
            Err(e) => report.notes.push(format!("replication {r} failed: {e}")),
        }
    }
    let coverage = if ok > 0 {
        covered as f64 / ok as f64
    } else {
        f64::NAN
    };
    let mut summary = MetricTable::new("summary", &["alpha", "replications", "coverage"]);
    summary.push(vec![cfg.band.alpha, ok as f64, coverage]);
    report.checks.push(Check::within(
        "coverage",
        coverage,
        Some(1.0 - cfg.band.alpha - cfg.slack),
        Some(1.0),
    ));
    report.tables.extend([summary, table]);
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ContractionConfig {
    pub ns: Vec<usize>,
    pub xis: Vec<f64>,
    /// Defaults to `γ − d/2 − 1/2`, inside the range charged by prior draws.
    pub gamma_bar: Option<f64>,
    pub gamma: f64,
    pub pcn: PcnConfig,
    pub replications: usize,
    pub bar_width: f64,
    /// Relative tolerance of the measured slope against the conjugate slope.
    pub slope_tolerance: f64,
    pub seed: u64,
}

impl Default for ContractionConfig {
    fn default() -> Self {
        Self {
            ns: vec![250, 1000, 4000],
            xis: vec![0.0, 1.0],
            gamma_bar: None,
            gamma: 4.0,
            pcn: PcnConfig {
                steps: 5_000,
                burn_in: 1_000,
                thin: 5,
                ..PcnConfig::default()
            },
            replications: 20,
            bar_width: 1.0,
            slope_tolerance: 0.3,
            seed: 0,
        }
    }
}

/// Posterior root-mean-square `H^ξ` error per `N` against `δ̃_N(ξ)`.
pub fn contraction_experiment(
    problem: &Problem,
    cfg: &ContractionConfig,
) -> Result<ExperimentReport> {
    if cfg.replications < 20 {
        return Err(Error::InvalidInput(format!(
            "experiment.replications must be at least 20, got {}",
            cfg.replications
        )));
    }
    let cut = problem.cut().clone();
    let d = cut.dim() as f64;
    let gamma_bar = cfg.gamma_bar.unwrap_or(cfg.gamma - d / 2.0 - 0.5);
    let mut report = ExperimentReport::new("contraction", config_value(cfg));
    report.seeds.push(cfg.seed);
    let truth = problem.truth()?;
    let theta0 = problem.theta0.zero_mean_coords();
    let cells: Vec<(usize, usize)> = (0..cfg.ns.len())
        .flat_map(|k| (0..cfg.replications).map(move |r| (k, r)))
        .collect();
    // Per cell and ξ: (posterior RMSE, mean error, conjugate RMSE).
    let results = report.time("cells", || {
        par::map_indexed(cells.len(), |c| -> Result<Vec<(f64, f64, f64)>> {
            let (k, r) = cells[c];
            let n = cfg.ns[k];
            let data = simulate_from_trajectory(
                &truth,
                &problem.theta0,
                n,
                1.0,
                cell_seed(cfg.seed, DATA + k as u64, r as u64),
            )?;
            let chain = problem.posterior(
                &data,
                cfg.gamma,
                &chain_cfg(&cfg.pcn, cell_seed(cfg.seed, CHAIN + k as u64, r as u64)),
            )?;
            let mean = crate::bayes::posterior_mean(&chain, &cut)?;
            let conj = if problem.reaction.is_zero() {
                Some(ConjugateGaussian::heat(
                    &data,
                    &problem.prior(cfg.gamma, n)?,
                )?)
            } else {
                None
            };
            Ok(cfg
                .xis
                .iter()
                .map(|&xi| {
                    let err = |s: &[f64]| {
                        let diff: Vec<f64> = s.iter().zip(&theta0).map(|(a, b)| a - b).collect();
                        sobolev_norm_coords(&cut, &diff, xi, true)
                    };
                    let ms = chain.states.iter().map(|s| err(s).powi(2)).sum::<f64>()
                        / chain.len() as f64;
                    let conj_rmse = conj.as_ref().map_or(f64::NAN, |g| {
                        let bias = err(g.mean.as_slice()).powi(2);
                        let spread: f64 = (0..g.cov.nrows())
                            .map(|a| (1.0 + cut.eigenvalue(a + 1)).powf(xi) * g.cov[(a, a)])
                            .sum();
                        (bias + spread).sqrt()
                    });
                    (ms.sqrt(), err(&mean.coords), conj_rmse)
                })
                .collect())
        })
    });

    let mut table = MetricTable::new(
        "cells",
        &["N", "rep", "xi", "rmse", "mean_error", "conjugate_rmse"],
    );
    let mut summary = MetricTable::new(
        "summary",
        &[
            "xi",
            "N",
            "delta_tilde",
            "median_rmse",
            "mean_rmse",
            "se",
            "median_conjugate_rmse",
        ],
    );
    let mut per: Vec<Vec<Vec<(f64, f64, f64)>>> =
        vec![vec![Vec::new(); cfg.ns.len()]; cfg.xis.len()];
    for (&(k, r), res) in cells.iter().zip(&results) {
        match res {
            Ok(v) => {
                for (x, &(rmse, me, cr)) in v.iter().enumerate() {
                    table.push(vec![cfg.ns[k] as f64, r as f64, cfg.xis[x], rmse, me, cr]);
                    per[x][k].push((rmse, me, cr));
                }
            }
            Err(e) => report
                .notes
                .push(format!("cell N={} rep={r} failed: {e}", cfg.ns[k])),
        }
    }
    for (x, &xi) in cfg.xis.iter().enumerate() {
        let schedule =
            ContractionSchedule::new(cfg.gamma, gamma_bar, xi.min(gamma_bar), cut.dim(), &cfg.ns)?;
        let (mut meds, mut means, mut ses, mut conj) =
            (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for k in 0..cfg.ns.len() {
            let rm: Vec<f64> = per[x][k].iter().map(|v| v.0).collect();
            let cr: Vec<f64> = per[x][k].iter().map(|v| v.2).collect();
            let (m, s) = mean_se(&rm);
            meds.push(median(&rm));
            means.push(m);
            ses.push(s);
            conj.push(median(&cr));
            summary.push(vec![
                xi,
                cfg.ns[k] as f64,
                schedule.values[k],
                meds[k],
                m,
                s,
                conj[k],
            ]);
        }
        if xi == 0.0 {
            report.checks.push(Check::decreasing(
                "xi0_rmse_decreasing",
                &means,
                &ses,
                cfg.bar_width,
            ));
            let slope = log_log_slope(&schedule.values, &meds);
            report.checks.push(Check::within(
                "xi0_slope_sign",
                slope,
                Some(f64::MIN_POSITIVE),
                None,
            ));
            if problem.reaction.is_zero() {
                let reference = log_log_slope(&schedule.values, &conj);
                let rel = (slope / reference - 1.0).abs();
                report.checks.push(
                    Check::within(
                        "xi0_slope_vs_conjugate",
                        rel,
                        None,
                        Some(cfg.slope_tolerance),
                    )
                    .with_detail(format!(
                        "measured slope {slope}, conjugate slope {reference}"
                    )),
                );
            }
        }
        if xi >= gamma_bar {
            report.notes.push(format!(
                "xi = {xi} ≥ gamma_bar = {gamma_bar}: exponent zero, no contraction claimed"
            ));
        }
    }
    report.notes.push(format!("gamma_bar = {gamma_bar}"));
    report.tables.extend([summary, table]);
    Ok(report)
}
