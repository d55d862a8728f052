use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::spectral::SpectralField;

use super::likelihood::LogLikelihood;
use super::prior::PriorSpec;

/// Acceptance band outside which a frozen chain is flagged.
const ACCEPT_BAND: (f64, f64) = (0.1, 0.5);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PcnConfig {
    /// Post-burn-in iterations.
    pub steps: usize,
    pub burn_in: usize,
    /// Fixed step; `None` adapts it during burn-in.
    pub beta: Option<f64>,
    pub thin: usize,
    pub target_accept: f64,
    pub seed: u64,
}

impl Default for PcnConfig {
    fn default() -> Self {
        Self {
            steps: 200_000,
            burn_in: 20_000,
            beta: None,
            thin: 10,
            target_accept: 0.23,
            seed: 0,
        }
    }
}

impl PcnConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(b) = self.beta {
            if !(b > 0.0 && b <= 1.0) {
                return Err(Error::InvalidInput(format!(
                    "pcn.beta must lie in (0, 1], got {b}"
                )));
            }
        }
        if self.thin == 0 || self.steps == 0 {
            return Err(Error::InvalidInput(
                "pcn.steps and pcn.thin must be positive".into(),
            ));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(Error::InvalidInput(format!(
                "pcn.target_accept must lie in (0, 1), got {}",
                self.target_accept
            )));
        }
        Ok(())
    }
}

/// Post-burn-in pCN output in zero-mean real coordinates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PosteriorChain {
    pub states: Vec<Vec<f64>>,
    pub loglik: Vec<f64>,
    pub acceptance: f64,
    pub beta: f64,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    /// Proposals rejected because the forward solve failed.
    pub failed_solves: usize,
    pub warnings: Vec<String>,
}

impl PosteriorChain {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.states.first().map_or(0, Vec::len)
    }

    /// Series of coordinate `a` across kept states.
    pub fn coordinate(&self, a: usize) -> Vec<f64> {
        self.states.iter().map(|s| s[a]).collect()
    }
}

/// Dual averaging of `log β` toward a target acceptance probability.
struct DualAveraging {
    mu: f64,
    h_bar: f64,
    log_beta: f64,
    log_beta_bar: f64,
    m: f64,
    target: f64,
}

impl DualAveraging {
    const GAMMA: f64 = 0.05;
    const T0: f64 = 10.0;
    const KAPPA: f64 = 0.75;

    fn new(beta0: f64, target: f64) -> Self {
        Self {
            mu: (10.0 * beta0).ln().min(0.0),
            h_bar: 0.0,
            log_beta: beta0.ln(),
            log_beta_bar: beta0.ln(),
            m: 0.0,
            target,
        }
    }

    fn update(&mut self, accept_prob: f64) {
        self.m += 1.0;
        let eta = 1.0 / (self.m + Self::T0);
        self.h_bar = (1.0 - eta) * self.h_bar + eta * (self.target - accept_prob);
        self.log_beta = (self.mu - self.m.sqrt() / Self::GAMMA * self.h_bar).min(0.0);
        let w = self.m.powf(-Self::KAPPA);
        self.log_beta_bar = w * self.log_beta + (1.0 - w) * self.log_beta_bar;
    }

    fn beta(&self) -> f64 {
        self.log_beta.exp()
    }

    fn frozen(&self) -> f64 {
        self.log_beta_bar.exp().min(1.0)
    }
}

/// Preconditioned Crank–Nicolson sampler started at the prior mean.
///
/// Proposals `θ′ = √(1−β²)θ + βξ`, `ξ ∼` prior, are accepted with probability
/// `min(1, exp(ℓ(θ′) − ℓ(θ)))`. A failed forward solve counts as a rejection.
pub fn run_pcn(
    lik: &dyn LogLikelihood,
    prior: &PriorSpec,
    cfg: &PcnConfig,
) -> Result<PosteriorChain> {
    run_pcn_from(lik, prior, cfg, None)
}

/// As [`run_pcn`], from explicit zero-mean coordinates.
pub fn run_pcn_from(
    lik: &dyn LogLikelihood,
    prior: &PriorSpec,
    cfg: &PcnConfig,
    init: Option<&[f64]>,
) -> Result<PosteriorChain> {
    cfg.validate()?;
    if !lik.cut().same_shape(prior.cut()) {
        return Err(Error::CutMismatch);
    }
    let cut = prior.cut().clone();
    let dim = prior.dim();
    let mut rng = par::stream_rng(cfg.seed, 0);
    let field = |c: &[f64]| SpectralField::from_zero_mean_coords(cut.clone(), c);

    let mut theta = match init {
        Some(c) if c.len() == dim => c.to_vec(),
        Some(c) => {
            return Err(Error::InvalidInput(format!(
                "initial state has {} coordinates, expected {dim}",
                c.len()
            )))
        }
        None => vec![0.0; dim],
    };
    let mut ll = lik.eval(&field(&theta)?)?;
    let mut adapt = cfg
        .beta
        .is_none()
        .then(|| DualAveraging::new(0.2, cfg.target_accept));
    let mut beta = cfg.beta.unwrap_or(0.2);
    let mut prop = vec![0.0; dim];
    let mut failed = 0;
    let mut accepted = 0usize;
    let keep = cfg.steps / cfg.thin;
    let mut states = Vec::with_capacity(keep);
    let mut logliks = Vec::with_capacity(keep);

    for it in 0..cfg.burn_in + cfg.steps {
        if it == cfg.burn_in {
            if let Some(a) = adapt.take() {
                beta = a.frozen();
            }
        }
        let s = (1.0 - beta * beta).max(0.0).sqrt();
        let xi = prior.draw_coords(&mut rng);
        for a in 0..dim {
            prop[a] = s * theta[a] + beta * xi[a];
        }
        let (alpha, ll_prop) = match lik.eval(&field(&prop)?) {
            Ok(v) if v.is_finite() => (((v - ll).min(0.0)).exp(), v),
            _ => {
                failed += 1;
                (0.0, f64::NEG_INFINITY)
            }
        };
        let u: f64 = rand::Rng::random(&mut rng);
        if u < alpha {
            std::mem::swap(&mut theta, &mut prop);
            ll = ll_prop;
            if it >= cfg.burn_in {
                accepted += 1;
            }
        }
        if let Some(a) = adapt.as_mut() {
            a.update(alpha);
            beta = a.beta();
        }
        if it >= cfg.burn_in && (it - cfg.burn_in + 1).is_multiple_of(cfg.thin) {
            states.push(theta.clone());
            logliks.push(ll);
        }
    }

    let acceptance = accepted as f64 / cfg.steps as f64;
    let mut warnings = Vec::new();
    if !(ACCEPT_BAND.0..=ACCEPT_BAND.1).contains(&acceptance) {
        warnings.push(format!(
            "acceptance {acceptance:.3} outside [{}, {}] at beta {beta:.3}",
            ACCEPT_BAND.0, ACCEPT_BAND.1
        ));
    }
    if failed > 0 {
        warnings.push(format!(
            "{failed} proposals rejected after forward-solve failure"
        ));
    }
    Ok(PosteriorChain {
        states,
        loglik: logliks,
        acceptance,
        beta,
        burn_in: cfg.burn_in,
        thin: cfg.thin,
        seed: cfg.seed,
        failed_solves: failed,
        warnings,
    })
}
