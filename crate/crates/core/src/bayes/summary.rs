use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::forward::Trajectory;
use crate::information::InfoOperator;
use crate::par;
use crate::spectral::{Collocation, FrequencyCut, SpectralField};

use super::data::Dataset;
use super::likelihood::ForwardLikelihood;
use super::pcn::PosteriorChain;
use super::prior::PriorSpec;

/// Batch-means standard error of the mean of `series`, with `⌊√n⌋` batches.
///
/// Returns `∞` when fewer than two batches are available.
pub fn batch_means_se(series: &[f64]) -> f64 {
    let n = series.len();
    let b = (n as f64).sqrt().floor() as usize;
    if b < 2 {
        return f64::INFINITY;
    }
    let m = n / b;
    let tail = &series[n - b * m..];
    let means: Vec<f64> = tail
        .chunks(m)
        .map(|c| c.iter().sum::<f64>() / m as f64)
        .collect();
    let grand = means.iter().sum::<f64>() / b as f64;
    let var = means.iter().map(|x| (x - grand).powi(2)).sum::<f64>() / (b - 1) as f64;
    (var / b as f64).sqrt()
}

/// Ergodic mean with per-coordinate Monte Carlo standard errors.
#[derive(Debug, Clone)]
pub struct PosteriorMean {
    pub field: SpectralField,
    pub coords: Vec<f64>,
    pub se: Vec<f64>,
    pub warnings: Vec<String>,
}

pub fn posterior_mean(chain: &PosteriorChain, cut: &Arc<FrequencyCut>) -> Result<PosteriorMean> {
    if chain.is_empty() {
        return Err(Error::EmptySample);
    }
    if chain.dim() + 1 != cut.len() {
        return Err(Error::CutMismatch);
    }
    let n = chain.len() as f64;
    let mut coords = vec![0.0; chain.dim()];
    for s in &chain.states {
        for (c, v) in coords.iter_mut().zip(s) {
            *c += v / n;
        }
    }
    let se: Vec<f64> = (0..chain.dim())
        .map(|a| batch_means_se(&chain.coordinate(a)))
        .collect();
    let mut warnings = Vec::new();
    if se.iter().any(|s| !s.is_finite()) {
        warnings.push(format!(
            "chain of {} states too short for batch-means errors",
            chain.len()
        ));
    }
    Ok(PosteriorMean {
        field: SpectralField::from_zero_mean_coords(cut.clone(), &coords)?,
        coords,
        se,
        warnings,
    })
}

/// Samples of `⟨θ, ψ⟩` over the kept states.
pub fn posterior_functional(chain: &PosteriorChain, psi: &SpectralField) -> Result<Vec<f64>> {
    if chain.dim() + 1 != psi.cut().len() && !chain.is_empty() {
        return Err(Error::CutMismatch);
    }
    let w = psi.zero_mean_coords();
    Ok(chain
        .states
        .iter()
        .map(|s| s.iter().zip(&w).map(|(a, b)| a * b).sum())
        .collect())
}

/// Piecewise-linear empirical quantile through `(0, 0)` and `(i/n, v₍ᵢ₎)`.
///
/// Level 0 gives 0 and level 1 the sample maximum; meant for non-negative samples.
pub fn anchored_quantile(values: &[f64], level: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptySample);
    }
    if !(0.0..=1.0).contains(&level) {
        return Err(Error::InvalidInput(format!(
            "quantile level must lie in [0, 1], got {level}"
        )));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let pos = level * n as f64;
    let i = (pos.floor() as usize).min(n - 1);
    let lo = if i == 0 { 0.0 } else { v[i - 1] };
    Ok(lo + (pos - i as f64) * (v[i] - lo))
}

/// Window and grid for sup-norm path bands.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(default)]
pub struct BandConfig {
    pub t_min: f64,
    pub t_max: f64,
    pub grid_size: usize,
    pub alpha: f64,
    /// Evenly spaced posterior states pushed through the forward map.
    pub max_draws: usize,
}

impl Default for BandConfig {
    fn default() -> Self {
        Self {
            t_min: 0.05,
            t_max: 0.5,
            grid_size: 128,
            alpha: 0.1,
            max_draws: 400,
        }
    }
}

/// `{v : sup_{window × grid} |v − center| ≤ radius}`.
#[derive(Debug, Clone)]
pub struct CredibleBand {
    pub center: Trajectory,
    pub radius: f64,
    pub sup_draws: Vec<f64>,
    pub config: BandConfig,
}

impl CredibleBand {
    /// Sup distance of `other` from the center over the band's window and grid.
    pub fn sup_distance(&self, other: &Trajectory) -> Result<f64> {
        if other.cut().dim() != self.center.cut().dim() {
            return Err(Error::CutMismatch);
        }
        let mut col_c = Collocation::new(self.center.cut().clone(), self.config.grid_size)?;
        let mut col_o = Collocation::new(other.cut().clone(), self.config.grid_size)?;
        let (mut a, mut b) = (Vec::new(), Vec::new());
        let mut sup = 0.0f64;
        for (t, s) in window(&self.center, &self.config) {
            col_c.grid_values_into(s.coeffs(), &mut a);
            col_o.grid_values_into(other.state_at(t)?.coeffs(), &mut b);
            sup = a.iter().zip(&b).fold(sup, |m, (x, y)| m.max((x - y).abs()));
        }
        Ok(sup)
    }

    pub fn contains(&self, other: &Trajectory) -> Result<bool> {
        Ok(self.sup_distance(other)? <= self.radius)
    }
}

fn window<'a>(
    traj: &'a Trajectory,
    cfg: &BandConfig,
) -> impl Iterator<Item = (f64, &'a SpectralField)> + 'a {
    let (lo, hi) = (cfg.t_min - 1e-12, cfg.t_max + 1e-12);
    traj.times()
        .iter()
        .copied()
        .zip(traj.states())
        .filter(move |(t, _)| *t >= lo && *t <= hi)
}

/// Sup-norm credible band around the forward image of the pooled posterior mean.
pub fn credible_band(
    chains: &[PosteriorChain],
    lik: &ForwardLikelihood,
    cfg: &BandConfig,
) -> Result<CredibleBand> {
    if !(cfg.alpha >= 0.0 && cfg.alpha < 1.0) {
        return Err(Error::InvalidInput(format!(
            "band alpha must lie in [0, 1), got {}",
            cfg.alpha
        )));
    }
    if !(cfg.t_min > 0.0 && cfg.t_min <= cfg.t_max && cfg.t_max <= lik.horizon() + 1e-12) {
        return Err(Error::InvalidInput(format!(
            "band window [{}, {}] must satisfy 0 < t_min ≤ t_max ≤ T",
            cfg.t_min, cfg.t_max
        )));
    }
    let pooled: Vec<&Vec<f64>> = chains.iter().flat_map(|c| c.states.iter()).collect();
    let needed = if cfg.alpha > 0.0 {
        (1.0 / cfg.alpha).ceil() as usize
    } else {
        1
    };
    let used = pooled.len().min(cfg.max_draws.max(1));
    if used < needed {
        return Err(Error::TooFewDraws { needed, got: used });
    }
    let cut = lik.evaluator().cut().clone();
    let dim = cut.len() - 1;
    let mut mean = vec![0.0; dim];
    for s in &pooled {
        for (m, v) in mean.iter_mut().zip(s.iter()) {
            *m += v / pooled.len() as f64;
        }
    }
    let center = lik.solve(&SpectralField::from_zero_mean_coords(cut.clone(), &mean)?)?;
    let mut band = CredibleBand {
        center,
        radius: 0.0,
        sup_draws: Vec::new(),
        config: *cfg,
    };
    let stride = pooled.len() as f64 / used as f64;
    band.sup_draws = par::try_map_indexed(used, |i| {
        let s = pooled[(i as f64 * stride) as usize];
        let traj = lik.solve(&SpectralField::from_zero_mean_coords(cut.clone(), s)?)?;
        band.sup_distance(&traj)
    })?;
    band.radius = anchored_quantile(&band.sup_draws, 1.0 - cfg.alpha)?;
    Ok(band)
}

/// Efficient centering `θ̂_N` on the first `j_max` lattice modes.
///
/// `Ψ̂_a = ⟨θ0, e_a⟩ + (T/N) Σ_i U_{ē_a}(t_i, x_i) ε_i` with `ε_i` recovered from
/// the true trajectory stored in `info`.
pub fn efficient_estimator(
    data: &Dataset,
    info: &InfoOperator,
    j_max: usize,
) -> Result<SpectralField> {
    let theta0 = data.theta0().ok_or(Error::MissingTruth)?;
    let cut = info.cut();
    if !theta0.cut().same_shape(cut) {
        return Err(Error::CutMismatch);
    }
    if data.is_empty() {
        return Err(Error::EmptySample);
    }
    let truth = info.trajectory();
    let flow = info.flow();
    let jz = cut.len() - 1;
    let mut acc = DVector::zeros(jz);
    for (i, r) in data.records().iter().enumerate() {
        let x = data.point(i);
        let eps = r.y - truth.evaluate(r.t, x)?;
        if eps != 0.0 {
            acc.axpy(eps, &flow.point_responses(r.t, x)?, 1.0);
        }
    }
    let b = info.inverse_directions()?;
    let shift = b.tr_mul(&acc) * (data.horizon() / data.len() as f64);
    let base = theta0.zero_mean_coords();
    let coords: Vec<f64> = (0..jz)
        .map(|a| if a < j_max { base[a] + shift[a] } else { 0.0 })
        .collect();
    SpectralField::from_zero_mean_coords(cut.clone(), &coords)
}

/// Exact Gaussian posterior of a linear regression with independent Gaussian prior.
#[derive(Debug, Clone)]
pub struct ConjugateGaussian {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl ConjugateGaussian {
    /// Posterior for `y = Aθ + ε`, `ε ∼ N(0, I)`, `θ ∼ N(0, diag(prior_vars))`.
    ///
    /// Works in whitened coordinates `θ = Sz` so tiny prior variances stay well conditioned.
    pub fn linear_model(
        design: &DMatrix<f64>,
        y: &DVector<f64>,
        prior_vars: &[f64],
    ) -> Result<Self> {
        let p = design.ncols();
        if prior_vars.len() != p || design.nrows() != y.len() {
            return Err(Error::InvalidInput(
                "design, responses and prior sizes disagree".into(),
            ));
        }
        let s = DVector::from_iterator(p, prior_vars.iter().map(|v| v.sqrt()));
        let mut a_s = design.clone();
        for (mut col, sj) in a_s.column_iter_mut().zip(s.iter()) {
            col *= *sj;
        }
        let prec = DMatrix::identity(p, p) + a_s.tr_mul(&a_s);
        let chol = prec.cholesky().ok_or(Error::Singular {
            condition: f64::INFINITY,
        })?;
        let z_mean = chol.solve(&a_s.tr_mul(y));
        let z_cov = chol.inverse();
        let mean = z_mean.component_mul(&s);
        let cov = DMatrix::from_fn(p, p, |r, c| s[r] * z_cov[(r, c)] * s[c]);
        Ok(Self { mean, cov })
    }

    /// Closed-form heat-equation design `A_{ia} = e^{−λ_a t_i} φ_a(x_i)`.
    pub fn heat(data: &Dataset, prior: &PriorSpec) -> Result<Self> {
        let cut = prior.cut();
        let design = heat_design(data, cut);
        let y = DVector::from_iterator(data.len(), data.records().iter().map(|r| r.y));
        Self::linear_model(&design, &y, &prior.coord_vars())
    }

    pub fn sd(&self) -> Vec<f64> {
        self.cov.diagonal().iter().map(|v| v.sqrt()).collect()
    }
}

/// Rows `e^{−λ_a t_i} φ_a(x_i)` over the zero-mean coordinates.
pub fn heat_design(data: &Dataset, cut: &FrequencyCut) -> DMatrix<f64> {
    let jz = cut.len() - 1;
    DMatrix::from_fn(data.len(), jz, |i, a| {
        let r = &data.records()[i];
        (-cut.eigenvalue(a + 1) * r.t).exp() * cut.real_basis_value(a + 1, data.point(i))
    })
}
