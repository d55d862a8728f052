//! Experiment drivers checking the limit theorems at desk scale.
//!
//! The continuum `W₁` distances are not computable, so every comparison runs on
//! 1-Lipschitz images: projections `⟨·, ψ⟩` and the sup-grid functional of paths.
//! Those lower-bound the full distances. Each cell of an experiment is a pure
//! function of its configuration and a derived seed, so reports are reproducible
//! whatever the thread count.

mod experiments;
mod probes;
mod report;
mod wasserstein;

use std::sync::Arc;

use nalgebra::DVector;
use rand::Rng;

use crate::bayes::{run_pcn, Dataset, ForwardLikelihood, PcnConfig, PosteriorChain, PriorSpec};
use crate::error::{Error, Result};
use crate::forward::{solve_rd, ReactionFunction, SolverConfig, Trajectory};
use crate::information::{assemble_info, InfoOperator};
use crate::par;
use crate::spectral::{FrequencyCut, SpectralField};

pub use experiments::{
    bvm_path_experiment, bvm_theta_experiment, clt_experiment, contraction_experiment,
    coverage_experiment, BvmPathConfig, BvmThetaConfig, CltConfig, ContractionConfig,
    CoverageConfig,
};
pub use probes::{condition_probes, quadratic_remainder, ProbeConfig};
pub use report::{Check, ExperimentReport, MetricTable};
pub use wasserstein::{gaussian_w1, w1_1d};

/// Ground truth, reaction and discretisation shared by an experiment.
#[derive(Debug, Clone)]
pub struct Problem {
    pub theta0: SpectralField,
    pub reaction: ReactionFunction,
    pub horizon: f64,
    pub solver: SolverConfig,
}

impl Problem {
    pub fn new(
        theta0: SpectralField,
        reaction: ReactionFunction,
        horizon: f64,
        solver: SolverConfig,
    ) -> Result<Self> {
        solver.validate()?;
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "problem.T must be positive, got {horizon}"
            )));
        }
        if !theta0.is_zero_mean() || !theta0.is_real(1e-12) {
            return Err(Error::InvalidInput(
                "problem.theta0 must be a real zero-mean field".into(),
            ));
        }
        Ok(Self {
            theta0,
            reaction,
            horizon,
            solver,
        })
    }

    pub fn cut(&self) -> &Arc<FrequencyCut> {
        self.theta0.cut()
    }

    pub fn truth(&self) -> Result<Trajectory> {
        solve_rd(&self.theta0, &self.reaction, self.horizon, &self.solver)
    }

    pub fn info(&self) -> Result<InfoOperator> {
        assemble_info(&self.theta0, &self.reaction, self.horizon, &self.solver)
    }

    pub fn likelihood(&self, data: &Dataset) -> Result<ForwardLikelihood> {
        ForwardLikelihood::new(data, self.cut().clone(), self.reaction.clone(), self.solver)
    }

    pub fn prior(&self, gamma: f64, n: usize) -> Result<PriorSpec> {
        PriorSpec::new(gamma, n, self.cut().clone())
    }

    /// pCN chain for `data` under the `N`-scaled prior.
    pub fn posterior(&self, data: &Dataset, gamma: f64, pcn: &PcnConfig) -> Result<PosteriorChain> {
        let lik = self.likelihood(data)?;
        run_pcn(&lik, &self.prior(gamma, data.len())?, pcn)
    }
}

/// A prior draw at sample size `n` used as a prior-typical truth.
pub fn prior_typical_truth(
    cut: Arc<FrequencyCut>,
    gamma: f64,
    n: usize,
    scale: f64,
    seed: u64,
) -> Result<SpectralField> {
    let spec = PriorSpec::new(gamma, n, cut)?;
    Ok(crate::bayes::sample_prior(&spec, seed).scale(scale))
}

/// Seed for cell `(a, b)` of an experiment under master `seed`.
pub fn cell_seed(seed: u64, a: u64, b: u64) -> u64 {
    par::stream_rng(seed, (a << 32) | (b & 0xffff_ffff)).random()
}

/// Finite family of zero-mean test directions.
#[derive(Debug, Clone)]
pub struct ProjectionFamily {
    pub psis: Vec<SpectralField>,
    pub labels: Vec<String>,
}

impl ProjectionFamily {
    /// The first `m` zero-mean real modes, each scaled to unit `H^order` norm.
    pub fn first_modes(cut: &Arc<FrequencyCut>, m: usize, order: f64) -> Result<Self> {
        if m == 0 || m >= cut.len() {
            return Err(Error::InvalidInput(format!(
                "family size must be in 1..{}, got {m}",
                cut.len() - 1
            )));
        }
        let mut psis = Vec::with_capacity(m);
        let mut labels = Vec::with_capacity(m);
        for j in 1..=m {
            let mut coords = vec![0.0; cut.len() - 1];
            coords[j - 1] = (1.0 + cut.eigenvalue(j)).powf(-order / 2.0);
            psis.push(SpectralField::from_zero_mean_coords(cut.clone(), &coords)?);
            labels.push(
                format!(
                    "{:?}{:?}",
                    cut.real_mode(j),
                    cut.freq(j)[..cut.dim()].to_vec()
                )
                .to_lowercase(),
            );
        }
        Ok(Self { psis, labels })
    }

    pub fn from_fields(psis: Vec<SpectralField>, labels: Vec<String>) -> Result<Self> {
        if psis.is_empty() || psis.len() != labels.len() {
            return Err(Error::InvalidInput(
                "family needs one label per test function".into(),
            ));
        }
        if psis
            .iter()
            .any(|p| !p.is_zero_mean() || !p.cut().same_shape(psis[0].cut()))
        {
            return Err(Error::InvalidInput(
                "test functions must be zero-mean on a common cut".into(),
            ));
        }
        Ok(Self { psis, labels })
    }

    pub fn len(&self) -> usize {
        self.psis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.psis.is_empty()
    }

    /// Zero-mean coordinate vectors.
    pub fn coords(&self) -> Vec<DVector<f64>> {
        self.psis
            .iter()
            .map(|p| DVector::from_vec(p.zero_mean_coords()))
            .collect()
    }
}
