//! Gaussian-process prior, synthetic data, likelihood and pCN posterior sampling.

mod data;
mod likelihood;
mod pcn;
mod prior;
mod summary;

pub use data::{simulate_data, simulate_from_trajectory, Dataset, Record};
pub use likelihood::{
    log_likelihood, ForwardLikelihood, LikelihoodEvaluator, LogLikelihood, NoData,
};
pub use pcn::{run_pcn, run_pcn_from, PcnConfig, PosteriorChain};
pub use prior::{sample_prior, ContractionSchedule, PriorSpec};
pub use summary::{
    anchored_quantile, batch_means_se, credible_band, efficient_estimator, heat_design,
    posterior_functional, posterior_mean, BandConfig, ConjugateGaussian, CredibleBand,
    PosteriorMean,
};
