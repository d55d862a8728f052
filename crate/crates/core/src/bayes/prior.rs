use std::sync::Arc;

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::par;
use crate::spectral::{FrequencyCut, SpectralField};

/// Rescaled Gaussian prior `N(0, ρ_N² Δ^{−γ})` on zero-mean fields.
#[derive(Debug, Clone)]
pub struct PriorSpec {
    gamma: f64,
    n: usize,
    cut: Arc<FrequencyCut>,
}

impl PriorSpec {
    /// Requires `γ > 1 + d/2` and `N ≥ 1`.
    pub fn new(gamma: f64, n: usize, cut: Arc<FrequencyCut>) -> Result<Self> {
        let d = cut.dim() as f64;
        if !(gamma > 1.0 + d / 2.0) || !gamma.is_finite() {
            return Err(Error::InvalidInput(format!(
                "prior.gamma must exceed 1 + d/2 = {}, got {gamma}",
                1.0 + d / 2.0
            )));
        }
        if n == 0 {
            return Err(Error::InvalidInput("sample size N must be positive".into()));
        }
        Ok(Self { gamma, n, cut })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn cut(&self) -> &Arc<FrequencyCut> {
        &self.cut
    }

    /// `δ_N = N^{−γ/(2γ+d)}`.
    pub fn delta(&self) -> f64 {
        (self.n as f64).powf(-self.gamma / (2.0 * self.gamma + self.cut.dim() as f64))
    }

    /// `ρ_N = 1/(√N δ_N)`.
    pub fn rho(&self) -> f64 {
        1.0 / ((self.n as f64).sqrt() * self.delta())
    }

    /// Number of zero-mean real coordinates.
    pub fn dim(&self) -> usize {
        self.cut.len() - 1
    }

    /// Per-coordinate standard deviations `ρ_N λ_j^{−γ/2}`, `j ≥ 1`.
    pub fn coord_sds(&self) -> Vec<f64> {
        let rho = self.rho();
        (1..self.cut.len())
            .map(|j| rho * self.cut.eigenvalue(j).powf(-self.gamma / 2.0))
            .collect()
    }

    pub fn coord_vars(&self) -> Vec<f64> {
        self.coord_sds().into_iter().map(|s| s * s).collect()
    }

    pub fn draw_coords(&self, rng: &mut impl Rng) -> Vec<f64> {
        self.coord_sds()
            .into_iter()
            .map(|s| s * rng.sample::<f64, _>(rand_distr::StandardNormal))
            .collect()
    }

    /// `−½ Σ a_j² / var_j` (the RKHS energy, up to constants).
    pub fn log_density(&self, coords: &[f64]) -> f64 {
        -0.5 * coords
            .iter()
            .zip(self.coord_vars())
            .map(|(a, v)| a * a / v)
            .sum::<f64>()
    }
}

/// One prior draw from stream 0 of `seed`.
pub fn sample_prior(spec: &PriorSpec, seed: u64) -> SpectralField {
    let coords = spec.draw_coords(&mut par::stream_rng(seed, 0));
    SpectralField::from_zero_mean_coords(spec.cut.clone(), &coords)
        .expect("coordinate count matches cut")
}

/// Contraction rates `δ̃_N(ξ) = δ_N^{(γ̄−ξ)/(γ̄+1)}` over an `N` grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContractionSchedule {
    pub xi: f64,
    pub gamma_bar: f64,
    pub ns: Vec<usize>,
    pub values: Vec<f64>,
}

impl ContractionSchedule {
    pub fn new(gamma: f64, gamma_bar: f64, xi: f64, d: usize, ns: &[usize]) -> Result<Self> {
        if !(0.0..=gamma_bar).contains(&xi) {
            return Err(Error::InvalidInput(format!(
                "need 0 ≤ ξ ≤ γ̄, got ξ={xi}, γ̄={gamma_bar}"
            )));
        }
        let values = ns
            .iter()
            .map(|&n| {
                let delta = (n as f64).powf(-gamma / (2.0 * gamma + d as f64));
                delta.powf((gamma_bar - xi) / (gamma_bar + 1.0))
            })
            .collect();
        Ok(Self {
            xi,
            gamma_bar,
            ns: ns.to_vec(),
            values,
        })
    }
}
