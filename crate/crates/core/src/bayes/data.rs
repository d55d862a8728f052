use std::io::{Read, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::{solve_rd, ReactionFunction, SolverConfig, Trajectory};
use crate::par;
use crate::spectral::SpectralField;

/// One observation `Y = u(t, x) + ε`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub y: f64,
    pub t: f64,
    /// Unused trailing coordinates are zero when `d = 1`.
    pub x: [f64; 2],
}

/// Space-time regression sample on `[0, T] × [0,1]^d`.
#[derive(Debug, Clone)]
pub struct Dataset {
    records: Vec<Record>,
    dim: usize,
    horizon: f64,
    noise_sd: f64,
    seed: u64,
    theta0: Option<SpectralField>,
}

impl Dataset {
    pub fn new(
        records: Vec<Record>,
        dim: usize,
        horizon: f64,
        noise_sd: f64,
        seed: u64,
    ) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(Error::InvalidInput(format!(
                "dimension must be 1 or 2, got {dim}"
            )));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        if !(noise_sd >= 0.0 && noise_sd.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "noise_sd must be non-negative, got {noise_sd}"
            )));
        }
        for (i, r) in records.iter().enumerate() {
            if !(0.0..=horizon).contains(&r.t) {
                return Err(Error::InvalidInput(format!(
                    "record {i}: t = {} outside [0, {horizon}]",
                    r.t
                )));
            }
            if let Some(a) = (0..dim).find(|&a| !(0.0..=1.0).contains(&r.x[a])) {
                return Err(Error::InvalidInput(format!(
                    "record {i}: x{} = {} outside [0, 1]",
                    a + 1,
                    r.x[a]
                )));
            }
            if !r.y.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "record {i}: non-finite response"
                )));
            }
        }
        Ok(Self {
            records,
            dim,
            horizon,
            noise_sd,
            seed,
            theta0: None,
        })
    }

    pub fn with_truth(mut self, theta0: SpectralField) -> Result<Self> {
        if theta0.cut().dim() != self.dim {
            return Err(Error::CutMismatch);
        }
        self.theta0 = Some(theta0);
        Ok(self)
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn noise_sd(&self) -> f64 {
        self.noise_sd
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn theta0(&self) -> Option<&SpectralField> {
        self.theta0.as_ref()
    }

    /// Point of record `i` as a slice of length `d`.
    pub fn point(&self, i: usize) -> &[f64] {
        &self.records[i].x[..self.dim]
    }

    /// First `n` records (same provenance).
    pub fn truncated(&self, n: usize) -> Self {
        Self {
            records: self.records[..n.min(self.records.len())].to_vec(),
            ..self.clone()
        }
    }

    /// CSV with header `Y,t,x1[,x2]`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec!["Y".to_string(), "t".to_string()];
        header.extend((1..=self.dim).map(|a| format!("x{a}")));
        wtr.write_record(&header)?;
        for r in &self.records {
            let mut row = vec![r.y.to_string(), r.t.to_string()];
            row.extend(r.x[..self.dim].iter().map(f64::to_string));
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Reads the CSV layout of [`Dataset::write_csv`]; the dimension comes from the header.
    pub fn read_csv<R: Read>(r: R, horizon: f64, noise_sd: f64, seed: u64) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let header: Vec<String> = rdr
            .headers()?
            .iter()
            .map(|h| h.trim().to_string())
            .collect();
        let dim = match header
            .iter()
            .map(String::as_str)
            .collect::<Vec<_>>()
            .as_slice()
        {
            ["Y", "t", "x1"] => 1,
            ["Y", "t", "x1", "x2"] => 2,
            other => {
                return Err(Error::InvalidInput(format!(
                    "unexpected dataset header {other:?}"
                )))
            }
        };
        let mut records = Vec::new();
        for row in rdr.records() {
            let row = row?;
            let num = |k: usize| -> Result<f64> {
                row[k].trim().parse().map_err(|e| {
                    Error::InvalidInput(format!(
                        "line {}: column {}: {e}",
                        records.len() + 2,
                        header[k]
                    ))
                })
            };
            let mut x = [0.0; 2];
            for (a, xa) in x.iter_mut().enumerate().take(dim) {
                *xa = num(2 + a)?;
            }
            records.push(Record {
                y: num(0)?,
                t: num(1)?,
                x,
            });
        }
        Self::new(records, dim, horizon, noise_sd, seed)
    }
}

/// Draws the design on stream 0 and the noise on stream 1 of `seed`.
///
/// `truth` is the trajectory from `theta0`; `noise_sd = 0` gives exact responses.
pub fn simulate_from_trajectory(
    truth: &Trajectory,
    theta0: &SpectralField,
    n: usize,
    noise_sd: f64,
    seed: u64,
) -> Result<Dataset> {
    let dim = truth.cut().dim();
    let horizon = truth.horizon();
    let mut design = par::stream_rng(seed, 0);
    let mut noise = par::stream_rng(seed, 1);
    let mut records = Vec::with_capacity(n);
    for _ in 0..n {
        let t = design.random_range(0.0..=horizon);
        let mut x = [0.0; 2];
        for xa in x.iter_mut().take(dim) {
            *xa = design.random_range(0.0..1.0);
        }
        let eps: f64 = noise.sample(rand_distr::StandardNormal);
        let y = truth.evaluate(t, &x[..dim])? + noise_sd * eps;
        records.push(Record { y, t, x });
    }
    Dataset::new(records, dim, horizon, noise_sd, seed)?.with_truth(theta0.clone())
}

/// `N` observations of `u_{θ0}` at uniform space-time points with standard normal noise.
pub fn simulate_data(
    theta0: &SpectralField,
    reaction: &ReactionFunction,
    n: usize,
    horizon: f64,
    cfg: &SolverConfig,
    seed: u64,
) -> Result<Dataset> {
    let truth = solve_rd(theta0, reaction, horizon, cfg)?;
    simulate_from_trajectory(&truth, theta0, n, 1.0, seed)
}
