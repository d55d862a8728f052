//! Run directories, content-addressed stage caches and artifact writers.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use bvmlab_core::bayes::{Dataset, PosteriorChain};
use bvmlab_core::forward::Trajectory;
use bvmlab_core::lab::{ExperimentReport, MetricTable};
use bvmlab_core::spectral::{Complex64, FrequencyCut, SpectralField};
use bvmlab_core::store::{read_matrix, write_matrix};
use nalgebra::DMatrix;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::Failure;

/// Hex SHA-256 of the canonical JSON form of `value`.
pub fn hash_value(value: &Value) -> String {
    let bytes = serde_json::to_vec(value).expect("JSON values always serialize");
    format!("{:x}", Sha256::digest(bytes))
}

pub fn versions() -> Value {
    json!({
        "bvmlab-core": bvmlab_core::VERSION,
        "bvmlab-cli": env!("CARGO_PKG_VERSION"),
    })
}

#[derive(Debug, Serialize)]
struct StageTiming {
    stage: String,
    seconds: f64,
    cached: bool,
}

/// Output location and bookkeeping for one invocation.
pub struct Run {
    pub dir: PathBuf,
    stage_root: PathBuf,
    pub hash: String,
    pub seed: u64,
    use_cache: bool,
    timings: Vec<StageTiming>,
}

fn io_err(stage: &str, e: impl std::fmt::Display) -> Failure {
    Failure::compute(stage, e.to_string())
}

impl Run {
    pub fn open(
        out_dir: &Path,
        command: &str,
        hash: &str,
        seed: u64,
        use_cache: bool,
    ) -> Result<Self, Failure> {
        let dir = out_dir.join(format!("{command}-{}", &hash[..16]));
        fs::create_dir_all(&dir).map_err(|e| io_err("io", e))?;
        Ok(Self {
            dir,
            stage_root: out_dir.join("stages"),
            hash: hash.to_string(),
            seed,
            use_cache,
            timings: Vec::new(),
        })
    }

    pub fn stamp(&self) -> Value {
        json!({ "config_hash": self.hash, "seed": self.seed, "versions": versions() })
    }

    fn csv_preamble(&self) -> String {
        format!(
            "# config_hash={} seed={} bvmlab-core={} bvmlab-cli={}\n",
            self.hash,
            self.seed,
            bvmlab_core::VERSION,
            env!("CARGO_PKG_VERSION")
        )
    }

    pub fn record(&mut self, stage: &str, seconds: f64, cached: bool) {
        let what = if cached { "cached" } else { "computed" };
        println!("[{stage}] {what} in {seconds:.3}s");
        self.timings.push(StageTiming {
            stage: stage.into(),
            seconds,
            cached,
        });
    }

    /// Runs `compute` unless `<stages>/<name>-<key>` already holds a result.
    pub fn stage<T>(
        &mut self,
        name: &str,
        key: &Value,
        load: impl FnOnce(&Path) -> Result<T, Failure>,
        compute: impl FnOnce() -> Result<T, Failure>,
        save: impl FnOnce(&Path, &T) -> Result<(), Failure>,
    ) -> Result<T, Failure> {
        let key_hash = hash_value(key);
        let dir = self.stage_root.join(format!("{name}-{}", &key_hash[..16]));
        let done = dir.join("key.json");
        let start = Instant::now();
        if self.use_cache && done.exists() {
            if let Ok(v) = load(&dir) {
                self.record(name, start.elapsed().as_secs_f64(), true);
                return Ok(v);
            }
        }
        let v = compute()?;
        let seconds = start.elapsed().as_secs_f64();
        fs::create_dir_all(&dir).map_err(|e| io_err(name, e))?;
        save(&dir, &v)?;
        let body =
            json!({ "stage": name, "key": key, "key_hash": key_hash, "versions": versions() });
        fs::write(
            &done,
            serde_json::to_string_pretty(&body).unwrap_or_default(),
        )
        .map_err(|e| io_err(name, e))?;
        self.record(name, seconds, false);
        Ok(v)
    }

    pub fn write_json(&self, name: &str, value: &Value) -> Result<(), Failure> {
        let text = serde_json::to_string_pretty(value).map_err(|e| io_err("io", e))?;
        fs::write(self.dir.join(name), text + "\n").map_err(|e| io_err("io", e))
    }

    pub fn write_text(&self, name: &str, text: &str) -> Result<(), Failure> {
        fs::write(self.dir.join(name), text).map_err(|e| io_err("io", e))
    }

    pub fn write_table(&self, table: &MetricTable) -> Result<(), Failure> {
        let mut buf = self.csv_preamble().into_bytes();
        table.write_csv(&mut buf).map_err(|e| io_err("io", e))?;
        fs::write(self.dir.join(format!("{}.csv", table.name)), buf).map_err(|e| io_err("io", e))
    }

    pub fn write_dataset(&self, data: &Dataset) -> Result<(), Failure> {
        let mut buf = self.csv_preamble().into_bytes();
        data.write_csv(&mut buf).map_err(|e| io_err("io", e))?;
        fs::write(self.dir.join("data.csv"), buf).map_err(|e| io_err("io", e))
    }

    pub fn write_trajectory(&self, traj: &Trajectory, grid: usize) -> Result<(), Failure> {
        let mut buf = self.csv_preamble().into_bytes();
        traj.write_csv(&mut buf, grid)
            .map_err(|e| io_err("io", e))?;
        fs::write(self.dir.join("truth.csv"), buf).map_err(|e| io_err("io", e))
    }

    pub fn write_matrix(&self, name: &str, m: &DMatrix<f64>, meta: Value) -> Result<(), Failure> {
        let mut full = self.stamp();
        full["meta"] = meta;
        write_matrix(&self.dir.join(name), m, full).map_err(|e| io_err("io", e))
    }

    /// Report JSON with its stamp, one CSV per table and the timing file.
    pub fn finish(&self, command: &str, report: &ExperimentReport) -> Result<(), Failure> {
        let mut body = self.stamp();
        body["command"] = json!(command);
        body["passed"] = json!(report.passed());
        body["report"] = serde_json::to_value(report).map_err(|e| io_err("io", e))?;
        self.write_json("report.json", &body)?;
        for t in &report.tables {
            self.write_table(t)?;
        }
        let driver: Vec<Value> = report
            .timings
            .iter()
            .map(|(s, t)| json!({ "stage": s, "seconds": t }))
            .collect();
        let mut timings = self.stamp();
        timings["stages"] = json!(self.timings);
        timings["driver"] = json!(driver);
        self.write_json("timings.json", &timings)
    }
}

fn interleave(v: &[Complex64]) -> impl Iterator<Item = f64> + '_ {
    v.iter().flat_map(|c| [c.re, c.im])
}

fn deinterleave(row: impl Iterator<Item = f64>) -> Vec<Complex64> {
    let flat: Vec<f64> = row.collect();
    flat.chunks_exact(2)
        .map(|p| Complex64::new(p[0], p[1]))
        .collect()
}

/// Stores times, states and rates as raw coefficients so a reload is bit-exact.
pub fn save_trajectory(dir: &Path, traj: &Trajectory) -> Result<(), Failure> {
    let n = traj.len();
    let w = 2 * traj.cut().len();
    let rows = |parts: Vec<Vec<f64>>| {
        DMatrix::from_fn(n, w + 1, |r, c| {
            if c == 0 {
                traj.times()[r]
            } else {
                parts[r][c - 1]
            }
        })
    };
    let states = rows(
        traj.states()
            .iter()
            .map(|s| interleave(s.coeffs()).collect())
            .collect(),
    );
    let rates = rows(
        traj.rates()
            .iter()
            .map(|r| interleave(r).collect())
            .collect(),
    );
    let meta = json!({ "layout": "t, then (re, im) per coefficient" });
    write_matrix(&dir.join("states"), &states, meta.clone()).map_err(|e| io_err("forward", e))?;
    write_matrix(&dir.join("rates"), &rates, meta).map_err(|e| io_err("forward", e))
}

pub fn load_trajectory(
    dir: &Path,
    cut: &std::sync::Arc<FrequencyCut>,
) -> Result<Trajectory, Failure> {
    let (states, _) = read_matrix(&dir.join("states")).map_err(|e| io_err("forward", e))?;
    let (rates, _) = read_matrix(&dir.join("rates")).map_err(|e| io_err("forward", e))?;
    let coeffs = |m: &DMatrix<f64>, r: usize| deinterleave(m.row(r).iter().skip(1).copied());
    let times: Vec<f64> = (0..states.nrows()).map(|r| states[(r, 0)]).collect();
    let fields = (0..states.nrows())
        .map(|r| SpectralField::from_coeffs(cut.clone(), coeffs(&states, r)))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| io_err("forward", e))?;
    let rates = (0..rates.nrows()).map(|r| coeffs(&rates, r)).collect();
    Trajectory::from_parts(times, fields, rates).map_err(|e| io_err("forward", e))
}

pub fn save_dataset(dir: &Path, data: &Dataset) -> Result<(), Failure> {
    let mut buf = Vec::new();
    data.write_csv(&mut buf).map_err(|e| io_err("data", e))?;
    fs::write(dir.join("data.csv"), buf).map_err(|e| io_err("data", e))
}

pub fn load_dataset(
    dir: &Path,
    horizon: f64,
    noise_sd: f64,
    seed: u64,
    theta0: &SpectralField,
) -> Result<Dataset, Failure> {
    let file = fs::File::open(dir.join("data.csv")).map_err(|e| io_err("data", e))?;
    Dataset::read_csv(file, horizon, noise_sd, seed)
        .and_then(|d| d.with_truth(theta0.clone()))
        .map_err(|e| io_err("data", e))
}

/// Chain states (plus log-likelihood column) as binary, scalars as JSON.
pub fn save_chain(dir: &Path, chain: &PosteriorChain) -> Result<(), Failure> {
    let dim = chain.dim();
    let m = DMatrix::from_fn(chain.len(), dim + 1, |r, c| {
        if c < dim {
            chain.states[r][c]
        } else {
            chain.loglik[r]
        }
    });
    let scalars = PosteriorChain {
        states: Vec::new(),
        loglik: Vec::new(),
        ..chain.clone()
    };
    let meta = serde_json::to_value(&scalars).map_err(|e| io_err("chain", e))?;
    write_matrix(&dir.join("chain"), &m, meta).map_err(|e| io_err("chain", e))
}

pub fn load_chain(dir: &Path) -> Result<PosteriorChain, Failure> {
    let (m, header) = read_matrix(&dir.join("chain")).map_err(|e| io_err("chain", e))?;
    let mut chain: PosteriorChain =
        serde_json::from_value(header.meta).map_err(|e| io_err("chain", e))?;
    let dim = m.ncols() - 1;
    chain.states = (0..m.nrows())
        .map(|r| (0..dim).map(|c| m[(r, c)]).collect())
        .collect();
    chain.loglik = (0..m.nrows()).map(|r| m[(r, dim)]).collect();
    Ok(chain)
}
