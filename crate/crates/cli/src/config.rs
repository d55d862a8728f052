//! Run configuration: one TOML document, validated before any compute.

use std::fmt;

use bvmlab_core::bayes::{BandConfig, PcnConfig};
use bvmlab_core::forward::{ReactionFunction, SolverConfig};
use bvmlab_core::lab::{
    prior_typical_truth, BvmPathConfig, BvmThetaConfig, CltConfig, ContractionConfig,
    CoverageConfig, ProbeConfig, Problem,
};
use bvmlab_core::spectral::{FrequencyCut, SpectralField};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

/// A rejected configuration field, named by its dotted path.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

type Check = Result<(), ConfigError>;

fn require(ok: bool, path: &str, message: impl Into<String>) -> Check {
    if ok {
        Ok(())
    } else {
        Err(ConfigError::new(path, message))
    }
}

fn positive(v: f64, path: &str) -> Check {
    require(
        v > 0.0 && v.is_finite(),
        path,
        format!("must be positive and finite, got {v}"),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Info,
    Simulate,
    Posterior,
    BvmTheta,
    BvmPath,
    Clt,
    Coverage,
    Probes,
    Contraction,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Info => "info",
            Command::Simulate => "simulate",
            Command::Posterior => "posterior",
            Command::BvmTheta => "bvm-theta",
            Command::BvmPath => "bvm-path",
            Command::Clt => "clt",
            Command::Coverage => "coverage",
            Command::Probes => "probes",
            Command::Contraction => "contraction",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ReactionSpec {
    Zero,
    Bump {
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default = "two")]
        radius: f64,
    },
}

fn one() -> f64 {
    1.0
}

fn two() -> f64 {
    2.0
}

/// Initial condition: a seeded prior draw, or explicit zero-mean real coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Theta0Spec {
    Prior {
        gamma: f64,
        n: usize,
        #[serde(default = "one")]
        scale: f64,
        #[serde(default)]
        seed: u64,
    },
    /// Coordinates in cut order, padded with zeros.
    Coords { values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemBlock {
    pub d: usize,
    #[serde(rename = "K")]
    pub k: i32,
    #[serde(rename = "T")]
    pub t: f64,
    pub noise_sd: f64,
    pub reaction: ReactionSpec,
    pub theta0: Theta0Spec,
}

impl Default for ProblemBlock {
    fn default() -> Self {
        Self {
            d: 1,
            k: 32,
            t: 0.5,
            noise_sd: 1.0,
            reaction: ReactionSpec::Bump {
                amplitude: 1.0,
                radius: 2.0,
            },
            theta0: Theta0Spec::Prior {
                gamma: 4.0,
                n: 4000,
                scale: 1.0,
                seed: 0,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorBlock {
    pub gamma: f64,
    pub n: usize,
}

impl Default for PriorBlock {
    fn default() -> Self {
        Self {
            gamma: 4.0,
            n: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct PosteriorBlock {
    pub pcn: PcnConfig,
    pub band: BandConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentBlock {
    pub posterior: PosteriorBlock,
    pub bvm_theta: BvmThetaConfig,
    pub bvm_path: BvmPathConfig,
    pub clt: CltConfig,
    pub coverage: CoverageConfig,
    pub probes: ProbeConfig,
    pub contraction: ContractionConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IoBlock {
    pub out_dir: String,
}

impl Default for IoBlock {
    fn default() -> Self {
        Self {
            out_dir: "runs".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub problem: ProblemBlock,
    pub prior: PriorBlock,
    pub solver: SolverConfig,
    pub experiment: ExperimentBlock,
    pub io: IoBlock,
}

/// Sets `path = value` in a TOML table, creating intermediate tables.
fn set_path(table: &mut toml::Table, path: &str, value: toml::Value) -> Check {
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(ConfigError::new(path, "malformed override key"));
    }
    let mut cur = table;
    for k in &keys[..keys.len() - 1] {
        let entry = cur
            .entry(k.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| ConfigError::new(path, format!("`{k}` is not a table")))?;
    }
    cur.insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}

/// Deep merge; a table whose `kind` changes replaces the base table wholesale.
fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o))
                if b.get("kind") == o.get("kind") || o.get("kind").is_none() =>
            {
                merge(b, o)
            }
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Parses the right-hand side of `--set key=value` as a TOML scalar.
fn parse_scalar(path: &str, raw: &str) -> Result<toml::Value, ConfigError> {
    let parsed = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    match parsed {
        toml::Value::Array(_) | toml::Value::Table(_) => Err(ConfigError::new(
            path,
            "overrides take scalars only; edit the config file for lists and tables",
        )),
        v => Ok(v),
    }
}

impl RunConfig {
    /// Parses TOML text over the defaults and applies `key=value` scalar overrides on top.
    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self, ConfigError> {
        let file: toml::Table = toml::from_str(text)
            .map_err(|e| ConfigError::new("config", e.to_string().trim().to_string()))?;
        let mut table: toml::Table = toml::from_str(&Self::default().to_toml())
            .map_err(|e| ConfigError::new("config", e.to_string()))?;
        merge(&mut table, file);
        for o in overrides {
            let (key, raw) = o
                .split_once('=')
                .ok_or_else(|| ConfigError::new(o.as_str(), "override must read key=value"))?;
            let key = key.trim();
            set_path(&mut table, key, parse_scalar(key, raw.trim())?)?;
        }
        serde_path_to_error::deserialize(toml::Value::Table(table)).map_err(|e| {
            let path = e.path().to_string();
            let path = if path == "." {
                "config".to_string()
            } else {
                path
            };
            ConfigError::new(path, e.into_inner().message().to_string())
        })
    }

    /// TOML form without the driver fields that shared blocks own.
    pub fn to_toml(&self) -> String {
        let Ok(mut table) = toml::Table::try_from(self) else {
            return String::new();
        };
        if let Some(toml::Value::Table(exp)) = table.get_mut("experiment") {
            for (driver, fields) in OWNED {
                let Some(toml::Value::Table(t)) = exp.get_mut(*driver) else {
                    continue;
                };
                for f in *fields {
                    match f.split_once('.') {
                        Some((sub, key)) => {
                            if let Some(toml::Value::Table(s)) = t.get_mut(sub) {
                                s.remove(key);
                            }
                        }
                        None => {
                            t.remove(*f);
                        }
                    }
                }
            }
        }
        toml::to_string(&table).unwrap_or_default()
    }

    pub fn cut(&self) -> Result<std::sync::Arc<FrequencyCut>, ConfigError> {
        FrequencyCut::shared(self.problem.d, self.problem.k)
            .map_err(|e| ConfigError::new("problem.K", e.to_string()))
    }

    pub fn reaction(&self) -> ReactionFunction {
        match self.problem.reaction {
            ReactionSpec::Zero => ReactionFunction::Zero,
            ReactionSpec::Bump { amplitude, radius } => {
                ReactionFunction::Bump { amplitude, radius }
            }
        }
    }

    pub fn theta0(&self) -> Result<SpectralField, ConfigError> {
        let cut = self.cut()?;
        let path = "problem.theta0";
        match &self.problem.theta0 {
            Theta0Spec::Prior {
                gamma,
                n,
                scale,
                seed,
            } => prior_typical_truth(cut, *gamma, *n, *scale, *seed)
                .map_err(|e| ConfigError::new(path, e.to_string())),
            Theta0Spec::Coords { values } => {
                let mut c = values.clone();
                c.resize(cut.len() - 1, 0.0);
                SpectralField::from_zero_mean_coords(cut, &c)
                    .map_err(|e| ConfigError::new(path, e.to_string()))
            }
        }
    }

    pub fn problem(&self) -> Result<Problem, ConfigError> {
        Problem::new(self.theta0()?, self.reaction(), self.problem.t, self.solver)
            .map_err(|e| ConfigError::new("problem", e.to_string()))
    }

    /// The parts of the configuration a command depends on; hashed to name its run.
    pub fn command_value(&self, cmd: Command) -> Value {
        let e = &self.experiment;
        let driver = match cmd {
            Command::Info | Command::Simulate => Value::Null,
            Command::Posterior => json!(e.posterior),
            Command::BvmTheta => json!(self.bvm_theta()),
            Command::BvmPath => json!(self.bvm_path()),
            Command::Clt => json!(self.clt()),
            Command::Coverage => json!(self.coverage()),
            Command::Probes => json!(self.probes()),
            Command::Contraction => json!(self.contraction()),
        };
        json!({
            "command": cmd,
            "seed": self.seed,
            "problem": self.problem,
            "prior": self.prior,
            "solver": self.solver,
            "experiment": driver,
        })
    }

    fn chain(&self, pcn: &PcnConfig) -> PcnConfig {
        PcnConfig {
            seed: self.seed,
            ..*pcn
        }
    }

    pub fn bvm_theta(&self) -> BvmThetaConfig {
        let c = &self.experiment.bvm_theta;
        BvmThetaConfig {
            gamma: self.prior.gamma,
            seed: self.seed,
            pcn: self.chain(&c.pcn),
            ..c.clone()
        }
    }

    pub fn bvm_path(&self) -> BvmPathConfig {
        let c = &self.experiment.bvm_path;
        BvmPathConfig {
            gamma: self.prior.gamma,
            seed: self.seed,
            pcn: self.chain(&c.pcn),
            ..c.clone()
        }
    }

    pub fn clt(&self) -> CltConfig {
        CltConfig {
            n: self.prior.n,
            noise_sd: self.problem.noise_sd,
            seed: self.seed,
            ..self.experiment.clt.clone()
        }
    }

    pub fn coverage(&self) -> CoverageConfig {
        let c = &self.experiment.coverage;
        CoverageConfig {
            n: self.prior.n,
            gamma: self.prior.gamma,
            noise_sd: self.problem.noise_sd,
            seed: self.seed,
            pcn: self.chain(&c.pcn),
            ..c.clone()
        }
    }

    pub fn probes(&self) -> ProbeConfig {
        ProbeConfig {
            seed: self.seed,
            ..self.experiment.probes.clone()
        }
    }

    pub fn contraction(&self) -> ContractionConfig {
        let c = &self.experiment.contraction;
        ContractionConfig {
            gamma: self.prior.gamma,
            seed: self.seed,
            pcn: self.chain(&c.pcn),
            ..c.clone()
        }
    }

    /// Checks every precondition the command will hit, before any compute.
    pub fn validate(&self, cmd: Command) -> Check {
        let p = &self.problem;
        require(
            matches!(p.d, 1 | 2),
            "problem.d",
            format!("must be 1 or 2, got {}", p.d),
        )?;
        let kmax = if p.d == 1 { 256 } else { 32 };
        require(
            (1..=kmax).contains(&p.k),
            "problem.K",
            format!("must lie in 1..={kmax} for d = {}, got {}", p.d, p.k),
        )?;
        positive(p.t, "problem.T")?;
        require(
            p.noise_sd >= 0.0 && p.noise_sd.is_finite(),
            "problem.noise_sd",
            format!("must be non-negative, got {}", p.noise_sd),
        )?;
        let gamma_min = 1.0 + p.d as f64 / 2.0;
        if let ReactionSpec::Bump { amplitude, radius } = p.reaction {
            require(
                amplitude.is_finite(),
                "problem.reaction.amplitude",
                "must be finite",
            )?;
            positive(radius, "problem.reaction.radius")?;
        }
        let cut = self.cut()?;
        let dim = cut.len() - 1;
        match &p.theta0 {
            Theta0Spec::Prior {
                gamma, n, scale, ..
            } => {
                require(
                    *gamma > gamma_min && gamma.is_finite(),
                    "problem.theta0.gamma",
                    format!("must exceed 1 + d/2 = {gamma_min}, got {gamma}"),
                )?;
                require(*n >= 1, "problem.theta0.n", "must be at least 1")?;
                require(scale.is_finite(), "problem.theta0.scale", "must be finite")?;
            }
            Theta0Spec::Coords { values } => {
                require(
                    values.len() <= dim,
                    "problem.theta0.values",
                    format!(
                        "the cut has {dim} zero-mean coordinates, got {}",
                        values.len()
                    ),
                )?;
                require(
                    values.iter().all(|v| v.is_finite()),
                    "problem.theta0.values",
                    "must be finite",
                )?;
            }
        }
        require(
            self.prior.gamma > gamma_min && self.prior.gamma.is_finite(),
            "prior.gamma",
            format!(
                "must exceed 1 + d/2 = {gamma_min}, got {}",
                self.prior.gamma
            ),
        )?;
        require(self.prior.n >= 1, "prior.n", "must be at least 1")?;
        let s = &self.solver;
        positive(s.dt, "solver.dt")?;
        require(
            s.dt <= p.t,
            "solver.dt",
            format!("must not exceed T = {}", p.t),
        )?;
        require(
            s.picard_iters >= 1,
            "solver.picard_iters",
            "must be at least 1",
        )?;
        positive(s.picard_tol, "solver.picard_tol")?;
        if let Some(c) = s.collocation {
            check_grid(c, p.k, "solver.collocation")?;
        }
        self.validate_driver(cmd, dim)
    }

    fn validate_driver(&self, cmd: Command, dim: usize) -> Check {
        let e = &self.experiment;
        let t = self.problem.t;
        let k = self.problem.k;
        match cmd {
            Command::Info | Command::Simulate => Ok(()),
            Command::Posterior => {
                owned_fields(
                    "experiment.posterior",
                    &[("pcn.seed", e.posterior.pcn.seed != 0, "seed")],
                )?;
                check_pcn(&e.posterior.pcn, "experiment.posterior.pcn")?;
                check_band(&e.posterior.band, t, k, "experiment.posterior.band")?;
                let kept = e.posterior.pcn.steps / e.posterior.pcn.thin;
                let needed = (1.0 / e.posterior.band.alpha).ceil() as usize;
                require(
                    kept.min(e.posterior.band.max_draws) >= needed,
                    "experiment.posterior.band.max_draws",
                    format!("a band at this alpha needs at least {needed} kept states"),
                )
            }
            Command::BvmTheta => {
                let c = &e.bvm_theta;
                let base = "experiment.bvm_theta";
                owned_fields(
                    base,
                    &[
                        (
                            "gamma",
                            c.gamma != BvmThetaConfig::default().gamma,
                            "prior.gamma",
                        ),
                        ("seed", c.seed != 0, "seed"),
                        ("pcn.seed", c.pcn.seed != 0, "seed"),
                    ],
                )?;
                check_grid_ns(&c.ns, &format!("{base}.ns"))?;
                require(
                    c.replications >= 1,
                    &format!("{base}.replications"),
                    "must be at least 1",
                )?;
                require(
                    c.limit_draws >= 2,
                    &format!("{base}.limit_draws"),
                    "must be at least 2",
                )?;
                require(
                    (1..dim).contains(&c.family_size),
                    &format!("{base}.family_size"),
                    format!("must lie in 1..{dim}"),
                )?;
                require(
                    c.family_order.is_finite(),
                    &format!("{base}.family_order"),
                    "must be finite",
                )?;
                check_bar(c.bar_width, &format!("{base}.bar_width"))?;
                check_pcn(&c.pcn, &format!("{base}.pcn"))
            }
            Command::BvmPath => {
                let c = &e.bvm_path;
                let base = "experiment.bvm_path";
                owned_fields(
                    base,
                    &[
                        (
                            "gamma",
                            c.gamma != BvmPathConfig::default().gamma,
                            "prior.gamma",
                        ),
                        ("seed", c.seed != 0, "seed"),
                        ("pcn.seed", c.pcn.seed != 0, "seed"),
                    ],
                )?;
                check_grid_ns(&c.ns, &format!("{base}.ns"))?;
                require(
                    c.replications >= 1,
                    &format!("{base}.replications"),
                    "must be at least 1",
                )?;
                require(
                    c.limit_draws >= 2,
                    &format!("{base}.limit_draws"),
                    "must be at least 2",
                )?;
                require(
                    c.max_draws >= 2,
                    &format!("{base}.max_draws"),
                    "must be at least 2",
                )?;
                check_window(c.t_min, c.t_max, t, base)?;
                require(
                    c.time_points >= 1,
                    &format!("{base}.time_points"),
                    "must be at least 1",
                )?;
                require(
                    c.space_points >= 1,
                    &format!("{base}.space_points"),
                    "must be at least 1",
                )?;
                check_bar(c.bar_width, &format!("{base}.bar_width"))?;
                check_pcn(&c.pcn, &format!("{base}.pcn"))
            }
            Command::Clt => {
                let c = &e.clt;
                let d = CltConfig::default();
                let base = "experiment.clt";
                owned_fields(
                    base,
                    &[
                        ("n", c.n != d.n, "prior.n"),
                        ("noise_sd", c.noise_sd != d.noise_sd, "problem.noise_sd"),
                        ("seed", c.seed != 0, "seed"),
                    ],
                )?;
                require(
                    c.replications >= 200,
                    &format!("{base}.replications"),
                    format!("must be at least 200, got {}", c.replications),
                )?;
                require(
                    (1..=dim).contains(&c.psi_mode),
                    &format!("{base}.psi_mode"),
                    format!("must lie in 1..={dim}"),
                )?;
                if let Some(j) = c.j_max {
                    require(
                        j >= c.psi_mode && j <= dim,
                        &format!("{base}.j_max"),
                        format!("must lie in psi_mode..={dim}"),
                    )?;
                }
                require(
                    c.reference_draws >= 2,
                    &format!("{base}.reference_draws"),
                    "must be at least 2",
                )?;
                require(
                    c.resamples >= 2,
                    &format!("{base}.resamples"),
                    "must be at least 2",
                )?;
                positive(c.band_factor, &format!("{base}.band_factor"))?;
                let (lo, hi) = c.variance_window;
                require(
                    lo > 0.0 && lo < hi && hi.is_finite(),
                    &format!("{base}.variance_window"),
                    "must read [lo, hi] with 0 < lo < hi",
                )
            }
            Command::Coverage => {
                let c = &e.coverage;
                let d = CoverageConfig::default();
                let base = "experiment.coverage";
                owned_fields(
                    base,
                    &[
                        ("n", c.n != d.n, "prior.n"),
                        ("gamma", c.gamma != d.gamma, "prior.gamma"),
                        ("noise_sd", c.noise_sd != d.noise_sd, "problem.noise_sd"),
                        ("seed", c.seed != 0, "seed"),
                        ("pcn.seed", c.pcn.seed != 0, "seed"),
                    ],
                )?;
                require(
                    c.replications >= 1,
                    &format!("{base}.replications"),
                    "must be at least 1",
                )?;
                require(
                    (0.0..=1.0).contains(&c.slack),
                    &format!("{base}.slack"),
                    "must lie in [0, 1]",
                )?;
                check_pcn(&c.pcn, &format!("{base}.pcn"))?;
                check_band(&c.band, t, k, &format!("{base}.band"))
            }
            Command::Probes => {
                let c = &e.probes;
                let base = "experiment.probes";
                owned_fields(base, &[("seed", c.seed != 0, "seed")])?;
                require(
                    c.trials >= 2,
                    &format!("{base}.trials"),
                    "must be at least 2",
                )?;
                positive(c.radius, &format!("{base}.radius"))?;
                require(
                    c.gamma_bar.is_finite(),
                    &format!("{base}.gamma_bar"),
                    "must be finite",
                )?;
                require(
                    c.zeta.is_finite(),
                    &format!("{base}.zeta"),
                    "must be finite",
                )?;
                positive(c.remainder_size, &format!("{base}.remainder_size"))?;
                check_grid(c.grid_size, k, &format!("{base}.grid_size"))
            }
            Command::Contraction => {
                let c = &e.contraction;
                let base = "experiment.contraction";
                owned_fields(
                    base,
                    &[
                        (
                            "gamma",
                            c.gamma != ContractionConfig::default().gamma,
                            "prior.gamma",
                        ),
                        ("seed", c.seed != 0, "seed"),
                        ("pcn.seed", c.pcn.seed != 0, "seed"),
                    ],
                )?;
                check_grid_ns(&c.ns, &format!("{base}.ns"))?;
                require(
                    !c.xis.is_empty() && c.xis.iter().all(|x| x.is_finite()),
                    &format!("{base}.xis"),
                    "must be a non-empty list of finite orders",
                )?;
                if let Some(g) = c.gamma_bar {
                    require(
                        g.is_finite(),
                        &format!("{base}.gamma_bar"),
                        "must be finite",
                    )?;
                }
                require(
                    c.replications >= 20,
                    &format!("{base}.replications"),
                    format!("must be at least 20, got {}", c.replications),
                )?;
                check_bar(c.bar_width, &format!("{base}.bar_width"))?;
                positive(c.slope_tolerance, &format!("{base}.slope_tolerance"))?;
                check_pcn(&c.pcn, &format!("{base}.pcn"))
            }
        }
    }
}

/// Driver fields filled from the shared blocks at run time.
const OWNED: &[(&str, &[&str])] = &[
    ("posterior", &["pcn.seed"]),
    ("bvm_theta", &["gamma", "seed", "pcn.seed"]),
    ("bvm_path", &["gamma", "seed", "pcn.seed"]),
    ("clt", &["n", "noise_sd", "seed"]),
    ("coverage", &["n", "gamma", "noise_sd", "seed", "pcn.seed"]),
    ("probes", &["seed"]),
    ("contraction", &["gamma", "seed", "pcn.seed"]),
];

/// Fields a driver table may not set because another block owns them.
fn owned_fields(base: &str, fields: &[(&str, bool, &str)]) -> Check {
    for (name, set, owner) in fields {
        require(
            !set,
            &format!("{base}.{name}"),
            format!("is taken from `{owner}`; set it there"),
        )?;
    }
    Ok(())
}

fn check_grid(size: usize, k: i32, path: &str) -> Check {
    let need = (2 * k + 1) as usize;
    require(
        size >= need,
        path,
        format!("must be at least 2K + 1 = {need}, got {size}"),
    )
}

fn check_grid_ns(ns: &[usize], path: &str) -> Check {
    require(
        !ns.is_empty() && ns.iter().all(|&n| n >= 1),
        path,
        "must be a non-empty list of positive sample sizes",
    )
}

fn check_bar(z: f64, path: &str) -> Check {
    require(z >= 0.0 && z.is_finite(), path, "must be non-negative")
}

fn check_window(t_min: f64, t_max: f64, horizon: f64, base: &str) -> Check {
    positive(t_min, &format!("{base}.t_min"))?;
    require(
        t_min <= t_max && t_max <= horizon,
        &format!("{base}.t_max"),
        format!("must satisfy t_min ≤ t_max ≤ T = {horizon}"),
    )
}

fn check_pcn(c: &PcnConfig, base: &str) -> Check {
    require(c.steps >= 1, &format!("{base}.steps"), "must be at least 1")?;
    require(
        c.thin >= 1 && c.thin <= c.steps,
        &format!("{base}.thin"),
        "must lie in 1..=steps",
    )?;
    if let Some(b) = c.beta {
        require(
            b > 0.0 && b <= 1.0,
            &format!("{base}.beta"),
            format!("must lie in (0, 1], got {b}"),
        )?;
    }
    require(
        c.target_accept > 0.0 && c.target_accept < 1.0,
        &format!("{base}.target_accept"),
        "must lie in (0, 1)",
    )
}

fn check_band(b: &BandConfig, horizon: f64, k: i32, base: &str) -> Check {
    require(
        b.alpha > 0.0 && b.alpha < 1.0,
        &format!("{base}.alpha"),
        format!("must lie in (0, 1), got {}", b.alpha),
    )?;
    check_window(b.t_min, b.t_max, horizon, base)?;
    check_grid(b.grid_size, k, &format!("{base}.grid_size"))?;
    require(
        b.max_draws >= 1,
        &format!("{base}.max_draws"),
        "must be at least 1",
    )
}
