use std::sync::Arc;

use crate::error::{Error, Result};
use crate::forward::{
    hermite_weights, locate, solve_rd, uniform_times, ReactionFunction, SolverConfig, Trajectory,
};
use crate::spectral::{FrequencyCut, SpectralField};

use super::data::Dataset;

/// Log-likelihood of a zero-mean initial condition, up to an additive constant.
pub trait LogLikelihood: Sync {
    fn cut(&self) -> &Arc<FrequencyCut>;

    fn eval(&self, theta: &SpectralField) -> Result<f64>;
}

/// `ℓ ≡ 0`; pCN then samples the prior.
#[derive(Debug, Clone)]
pub struct NoData {
    cut: Arc<FrequencyCut>,
}

impl NoData {
    pub fn new(cut: Arc<FrequencyCut>) -> Self {
        Self { cut }
    }
}

impl LogLikelihood for NoData {
    fn cut(&self) -> &Arc<FrequencyCut> {
        &self.cut
    }

    fn eval(&self, _theta: &SpectralField) -> Result<f64> {
        Ok(0.0)
    }
}

/// Precomputed per-record interpolation data for trajectories on a fixed time grid.
///
/// Predictions are `Σ_j φ_j(x_i)·(w₀aₙ + w₁rₙ + w₂aₙ₊₁ + w₃rₙ₊₁)_j` in real
/// coordinates, which is exactly `Trajectory::evaluate` reorganised.
#[derive(Debug, Clone)]
pub struct LikelihoodEvaluator {
    cut: Arc<FrequencyCut>,
    times: Vec<f64>,
    intervals: Vec<usize>,
    weights: Vec<[f64; 4]>,
    basis: Vec<f64>,
    ys: Vec<f64>,
}

impl LikelihoodEvaluator {
    pub fn new(data: &Dataset, cut: Arc<FrequencyCut>, times: Vec<f64>) -> Result<Self> {
        if cut.dim() != data.dim() {
            return Err(Error::CutMismatch);
        }
        if times.len() < 2 {
            return Err(Error::GridMismatch(
                "likelihood needs at least two grid times".into(),
            ));
        }
        let mut intervals = Vec::with_capacity(data.len());
        let mut weights = Vec::with_capacity(data.len());
        let mut basis = Vec::with_capacity(data.len() * cut.len());
        for (i, r) in data.records().iter().enumerate() {
            let (n, s) = locate(&times, r.t)?;
            intervals.push(n);
            weights.push(hermite_weights(s, times[n + 1] - times[n]));
            basis.extend(cut.real_basis_values(data.point(i)));
        }
        Ok(Self {
            cut,
            times,
            intervals,
            weights,
            basis,
            ys: data.records().iter().map(|r| r.y).collect(),
        })
    }

    pub fn cut(&self) -> &Arc<FrequencyCut> {
        &self.cut
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// `u(t_i, x_i)` for every record.
    pub fn predictions(&self, traj: &Trajectory) -> Result<Vec<f64>> {
        if !traj.cut().same_shape(&self.cut) {
            return Err(Error::CutMismatch);
        }
        if traj.len() != self.times.len()
            || (traj.horizon() - self.times[self.times.len() - 1]).abs() > 1e-12
        {
            return Err(Error::GridMismatch(format!(
                "trajectory has {} times up to {}, evaluator expects {} up to {}",
                traj.len(),
                traj.horizon(),
                self.times.len(),
                self.times[self.times.len() - 1]
            )));
        }
        let states: Vec<Vec<f64>> = traj
            .states()
            .iter()
            .map(SpectralField::real_coords)
            .collect();
        let rates: Vec<Vec<f64>> = traj
            .rates()
            .iter()
            .map(|r| {
                SpectralField::from_coeffs(self.cut.clone(), r.clone()).map(|f| f.real_coords())
            })
            .collect::<Result<_>>()?;
        let jn = self.cut.len();
        Ok((0..self.ys.len())
            .map(|i| {
                let n = self.intervals[i];
                let w = &self.weights[i];
                let phi = &self.basis[i * jn..(i + 1) * jn];
                let (a, ra, b, rb) = (&states[n], &rates[n], &states[n + 1], &rates[n + 1]);
                (0..jn)
                    .map(|j| phi[j] * (w[0] * a[j] + w[1] * ra[j] + w[2] * b[j] + w[3] * rb[j]))
                    .sum()
            })
            .collect())
    }

    /// `−½ Σ (Y_i − u(t_i, x_i))²`.
    pub fn log_likelihood(&self, traj: &Trajectory) -> Result<f64> {
        let pred = self.predictions(traj)?;
        Ok(-0.5
            * self
                .ys
                .iter()
                .zip(&pred)
                .map(|(y, u)| (y - u).powi(2))
                .sum::<f64>())
    }
}

/// Gaussian-noise log-likelihood through the nonlinear forward map.
#[derive(Debug, Clone)]
pub struct ForwardLikelihood {
    evaluator: LikelihoodEvaluator,
    reaction: ReactionFunction,
    horizon: f64,
    solver: SolverConfig,
}

impl ForwardLikelihood {
    pub fn new(
        data: &Dataset,
        cut: Arc<FrequencyCut>,
        reaction: ReactionFunction,
        solver: SolverConfig,
    ) -> Result<Self> {
        solver.validate()?;
        let times = uniform_times(data.horizon(), solver.dt);
        Ok(Self {
            evaluator: LikelihoodEvaluator::new(data, cut, times)?,
            reaction,
            horizon: data.horizon(),
            solver,
        })
    }

    pub fn evaluator(&self) -> &LikelihoodEvaluator {
        &self.evaluator
    }

    pub fn reaction(&self) -> &ReactionFunction {
        &self.reaction
    }

    pub fn solver(&self) -> &SolverConfig {
        &self.solver
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn solve(&self, theta: &SpectralField) -> Result<Trajectory> {
        solve_rd(theta, &self.reaction, self.horizon, &self.solver)
    }
}

impl LogLikelihood for ForwardLikelihood {
    fn cut(&self) -> &Arc<FrequencyCut> {
        self.evaluator.cut()
    }

    fn eval(&self, theta: &SpectralField) -> Result<f64> {
        self.evaluator.log_likelihood(&self.solve(theta)?)
    }
}

/// `ℓ_N(θ)` with one forward solve.
pub fn log_likelihood(
    theta: &SpectralField,
    data: &Dataset,
    reaction: &ReactionFunction,
    cfg: &SolverConfig,
) -> Result<f64> {
    ForwardLikelihood::new(data, theta.cut().clone(), reaction.clone(), *cfg)?.eval(theta)
}
