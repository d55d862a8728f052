//! Spectral Galerkin solver for `∂ₜu − Δu = f(u)` on the torus.
//!
//! Each step applies the variation-of-constants formula with the reaction
//! term interpolated linearly across the step (exponential trapezoid rule),
//! closing the implicit end-point value by Picard iteration. Between grid
//! times states are reconstructed by cubic Hermite interpolation using the
//! semi-discrete time derivative stored at every grid time.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{sobolev_norm, Collocation, FrequencyCut, Grid, SobolevIndex, SpectralField};

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Smooth compactly supported reaction term with its first two derivatives.
#[derive(Clone)]
pub enum ReactionFunction {
    Zero,
    /// `A·x·exp(−1/(1 − (x/R)²))` on `|x| < R`, zero elsewhere.
    Bump {
        amplitude: f64,
        radius: f64,
    },
    Custom {
        label: String,
        radius: f64,
        value: ScalarFn,
        deriv1: ScalarFn,
        deriv2: ScalarFn,
    },
}

impl fmt::Debug for ReactionFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ReactionFunction({})", self.label())
    }
}

impl Default for ReactionFunction {
    fn default() -> Self {
        Self::Bump {
            amplitude: 1.0,
            radius: 2.0,
        }
    }
}

/// `(g, g′, g″)` for `g(x) = exp(−1/(1 − (x/R)²))`.
fn bump_jet(x: f64, r: f64) -> (f64, f64, f64) {
    let s = x / r;
    let w = 1.0 - s * s;
    if w <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    let g = (-1.0 / w).exp();
    if g == 0.0 {
        return (0.0, 0.0, 0.0);
    }
    let q1 = -2.0 * s / (r * w * w);
    let q2 = -2.0 * (1.0 + 3.0 * s * s) / (r * r * w * w * w);
    (g, g * q1, g * (q1 * q1 + q2))
}

impl ReactionFunction {
    pub fn bump(amplitude: f64, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite() && amplitude.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "bump reaction needs finite amplitude and positive radius, got A={amplitude}, R={radius}"
            )));
        }
        Ok(Self::Bump { amplitude, radius })
    }

    pub fn label(&self) -> String {
        match self {
            Self::Zero => "zero".into(),
            Self::Bump { amplitude, radius } => format!("bump(A={amplitude},R={radius})"),
            Self::Custom { label, .. } => label.clone(),
        }
    }

    pub fn support_radius(&self) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::Bump { radius, .. } => *radius,
            Self::Custom { radius, .. } => *radius,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Self::Zero)
    }

    pub fn value(&self, x: f64) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::Bump { amplitude, radius } => amplitude * x * bump_jet(x, *radius).0,
            Self::Custom { value, .. } => value(x),
        }
    }

    pub fn deriv1(&self, x: f64) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::Bump { amplitude, radius } => {
                let (g, g1, _) = bump_jet(x, *radius);
                amplitude * (g + x * g1)
            }
            Self::Custom { deriv1, .. } => deriv1(x),
        }
    }

    pub fn deriv2(&self, x: f64) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::Bump { amplitude, radius } => {
                let (_, g1, g2) = bump_jet(x, *radius);
                amplitude * (2.0 * g1 + x * g2)
            }
            Self::Custom { deriv2, .. } => deriv2(x),
        }
    }

    /// Largest `|f′|` on a fine probe of the support (a Lipschitz constant).
    pub fn lipschitz_bound(&self) -> f64 {
        let r = self.support_radius();
        (0..=4000)
            .map(|i| self.deriv1(-r + 2.0 * r * i as f64 / 4000.0).abs())
            .fold(0.0, f64::max)
    }

    /// Checks that the derivatives match central differences.
    ///
    /// Returns the largest `|Δ_h f − f′| / h²` (and the same for `f″`) over a
    /// probe grid; fails when it exceeds `max_constant`.
    pub fn check_consistency(&self, h: f64, max_constant: f64) -> Result<f64> {
        let r = self.support_radius().max(1.0);
        let mut worst: f64 = 0.0;
        for i in 0..=400 {
            let x = -1.25 * r + 2.5 * r * i as f64 / 400.0;
            let d1 = (self.value(x + h) - self.value(x - h)) / (2.0 * h);
            let d2 = (self.deriv1(x + h) - self.deriv1(x - h)) / (2.0 * h);
            worst = worst
                .max((d1 - self.deriv1(x)).abs() / (h * h))
                .max((d2 - self.deriv2(x)).abs() / (h * h));
        }
        if self.value(1.01 * self.support_radius() + 1e-9).abs() > 0.0
            || self.value(-1.01 * self.support_radius() - 1e-9).abs() > 0.0
        {
            return Err(Error::InvalidInput(format!(
                "reaction {} is non-zero outside its declared support",
                self.label()
            )));
        }
        if worst > max_constant {
            return Err(Error::InvalidInput(format!(
                "reaction {} derivatives inconsistent: central-difference constant {worst:.3e}",
                self.label()
            )));
        }
        Ok(worst)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub dt: f64,
    pub picard_iters: usize,
    pub picard_tol: f64,
    /// Collocation points per axis; `None` picks the dealiased default.
    pub collocation: Option<usize>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            picard_iters: 50,
            picard_tol: 1e-10,
            collocation: None,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "solver.dt must be positive, got {}",
                self.dt
            )));
        }
        if !(self.picard_tol > 0.0) {
            return Err(Error::InvalidInput(format!(
                "solver.picard_tol must be positive, got {}",
                self.picard_tol
            )));
        }
        if self.picard_iters == 0 {
            return Err(Error::InvalidInput(
                "solver.picard_iters must be at least 1".into(),
            ));
        }
        Ok(())
    }

    pub fn collocation_for(&self, cut: Arc<FrequencyCut>) -> Result<Collocation> {
        match self.collocation {
            Some(m) => Collocation::new(cut, m),
            None => Ok(Collocation::dealiased(cut)),
        }
    }
}

/// Uniform grid with `ceil(T/dt)` steps ending exactly at `T`.
pub fn uniform_times(horizon: f64, dt: f64) -> Vec<f64> {
    let n = ((horizon / dt) - 1e-9).ceil().max(1.0) as usize;
    (0..=n).map(|i| horizon * i as f64 / n as f64).collect()
}

/// Locates `t` on a strictly increasing grid: interval index and fraction in `[0, 1]`.
pub fn locate(times: &[f64], t: f64) -> Result<(usize, f64)> {
    let (start, end) = (times[0], *times.last().expect("non-empty grid"));
    let slack = 1e-12 * (end - start).abs().max(1.0);
    if !(t >= start - slack && t <= end + slack) {
        return Err(Error::TimeOutOfRange { t, start, end });
    }
    let t = t.clamp(start, end);
    let n = times.len() - 1;
    if n == 0 {
        return Ok((0, 0.0));
    }
    let i = match times.binary_search_by(|p| p.total_cmp(&t)) {
        Ok(i) => i.min(n - 1),
        Err(i) => i.saturating_sub(1).min(n - 1),
    };
    let h = times[i + 1] - times[i];
    Ok((i, ((t - times[i]) / h).clamp(0.0, 1.0)))
}

/// Cubic Hermite weights `(h00, h10·h, h01, h11·h)` for fraction `s` and step `h`.
pub fn hermite_weights(s: f64, h: f64) -> [f64; 4] {
    let s2 = s * s;
    let s3 = s2 * s;
    [
        2.0 * s3 - 3.0 * s2 + 1.0,
        (s3 - 2.0 * s2 + s) * h,
        -2.0 * s3 + 3.0 * s2,
        (s3 - s2) * h,
    ]
}

/// Solution states on a time grid, with time derivatives for interpolation.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    cut: Arc<FrequencyCut>,
    times: Vec<f64>,
    states: Vec<SpectralField>,
    rates: Vec<Vec<Complex64>>,
}

#[derive(Serialize)]
struct TrajectoryRepr<'a> {
    times: &'a [f64],
    states: &'a [SpectralField],
}

impl Trajectory {
    /// Builds a trajectory from states; rates default to finite differences.
    pub fn from_states(times: Vec<f64>, states: Vec<SpectralField>) -> Result<Self> {
        if times.len() != states.len() || times.is_empty() {
            return Err(Error::InvalidInput(
                "times and states must be non-empty and equal in length".into(),
            ));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput(
                "times must be strictly increasing".into(),
            ));
        }
        let cut = states[0].cut().clone();
        if states.iter().any(|s| !s.cut().same_shape(&cut)) {
            return Err(Error::CutMismatch);
        }
        let n = times.len();
        let rates = (0..n)
            .map(|i| {
                if n == 1 {
                    return vec![Complex64::default(); cut.len()];
                }
                let (a, b) = if i == 0 {
                    (0, 1)
                } else if i == n - 1 {
                    (n - 2, n - 1)
                } else {
                    (i - 1, i + 1)
                };
                let h = times[b] - times[a];
                states[b]
                    .coeffs()
                    .iter()
                    .zip(states[a].coeffs())
                    .map(|(x, y)| (x - y) / h)
                    .collect()
            })
            .collect();
        Ok(Self {
            cut,
            times,
            states,
            rates,
        })
    }

    /// Reassembles a trajectory from stored states and rates, e.g. a cached solve.
    pub fn from_parts(
        times: Vec<f64>,
        states: Vec<SpectralField>,
        rates: Vec<Vec<Complex64>>,
    ) -> Result<Self> {
        let mut traj = Self::from_states(times, states)?;
        if rates.len() != traj.len() || rates.iter().any(|r| r.len() != traj.cut.len()) {
            return Err(Error::InvalidInput(
                "rates must match the time grid and the cut".into(),
            ));
        }
        traj.rates = rates;
        Ok(traj)
    }

    pub fn cut(&self) -> &Arc<FrequencyCut> {
        &self.cut
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[SpectralField] {
        &self.states
    }

    /// Time derivative coefficients at each grid time.
    pub fn rates(&self) -> &[Vec<Complex64>] {
        &self.rates
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().expect("non-empty")
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Interpolated state at time `t`.
    pub fn state_at(&self, t: f64) -> Result<SpectralField> {
        let (n, s) = locate(&self.times, t)?;
        if self.times.len() == 1 {
            return Ok(self.states[0].clone());
        }
        if s == 0.0 {
            return Ok(self.states[n].clone());
        }
        if s == 1.0 {
            return Ok(self.states[n + 1].clone());
        }
        let w = hermite_weights(s, self.times[n + 1] - self.times[n]);
        let (a, b) = (self.states[n].coeffs(), self.states[n + 1].coeffs());
        let (ra, rb) = (&self.rates[n], &self.rates[n + 1]);
        let coeffs = (0..a.len())
            .map(|j| a[j] * w[0] + ra[j] * w[1] + b[j] * w[2] + rb[j] * w[3])
            .collect();
        SpectralField::from_coeffs(self.cut.clone(), coeffs)
    }

    /// `u(t, x)`.
    pub fn evaluate(&self, t: f64, x: &[f64]) -> Result<f64> {
        if x.len() != self.cut.dim() {
            return Err(Error::InvalidInput(format!(
                "point has {} coordinates, domain dimension is {}",
                x.len(),
                self.cut.dim()
            )));
        }
        Ok(self.state_at(t)?.value_at(x))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&TrajectoryRepr {
            times: &self.times,
            states: &self.states,
        })?)
    }

    /// CSV matrix: one row per time, first column `t`, then grid values.
    pub fn write_csv<W: Write>(&self, mut w: W, grid_size: usize) -> Result<()> {
        let mut col = Collocation::new(self.cut.clone(), grid_size)?;
        let mut vals = Vec::new();
        for (t, s) in self.times.iter().zip(&self.states) {
            col.grid_values_into(s.coeffs(), &mut vals);
            write!(w, "{t}")?;
            for v in &vals {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// `φ₁(z) = (1 − e^{−z})/z` and `φ₂(z) = (e^{−z} − 1 + z)/z²`.
fn phi12(z: f64) -> (f64, f64) {
    if z < 1e-4 {
        (
            1.0 - z / 2.0 + z * z / 6.0 - z * z * z / 24.0,
            0.5 - z / 6.0 + z * z / 24.0 - z * z * z / 120.0,
        )
    } else {
        let e = (-z).exp();
        ((1.0 - e) / z, (e - 1.0 + z) / (z * z))
    }
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

/// Solves the reaction-diffusion equation from `theta` up to `horizon`.
pub fn solve_rd(
    theta: &SpectralField,
    reaction: &ReactionFunction,
    horizon: f64,
    cfg: &SolverConfig,
) -> Result<Trajectory> {
    cfg.validate()?;
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "horizon must be positive, got {horizon}"
        )));
    }
    if !theta.is_real(1e-10) {
        return Err(Error::InvalidInput(
            "initial condition must be real-valued".into(),
        ));
    }
    let cut = theta.cut().clone();
    let times = uniform_times(horizon, cfg.dt);
    let dt = times[1] - times[0];
    let jn = cut.len();
    let mut col = cfg.collocation_for(cut.clone())?;

    let decay: Vec<f64> = cut.eigenvalues().iter().map(|l| (-l * dt).exp()).collect();
    let (w_old, w_new): (Vec<f64>, Vec<f64>) = cut
        .eigenvalues()
        .iter()
        .map(|l| {
            let (p1, p2) = phi12(l * dt);
            (dt * (p1 - p2), dt * p2)
        })
        .unzip();
    let w_euler: Vec<f64> = cut
        .eigenvalues()
        .iter()
        .map(|l| dt * phi12(l * dt).0)
        .collect();

    let nonlinear = |col: &mut Collocation, u: &[Complex64], out: &mut [Complex64]| {
        if reaction.is_zero() {
            out.fill(Complex64::default());
        } else {
            col.compose_into(u, |x| reaction.value(x), out);
        }
    };
    let rate = |u: &[Complex64], nl: &[Complex64]| -> Vec<Complex64> {
        (0..jn).map(|j| nl[j] - u[j] * cut.eigenvalue(j)).collect()
    };

    let mut states = Vec::with_capacity(times.len());
    let mut rates = Vec::with_capacity(times.len());
    let mut u = theta.coeffs().to_vec();
    let mut n_old = vec![Complex64::default(); jn];
    nonlinear(&mut col, &u, &mut n_old);
    states.push(theta.clone());
    rates.push(rate(&u, &n_old));

    let mut base = vec![Complex64::default(); jn];
    let mut next = vec![Complex64::default(); jn];
    let mut n_new = vec![Complex64::default(); jn];
    let mut cand = vec![Complex64::default(); jn];
    for (step, &time) in times.iter().enumerate().skip(1) {
        for j in 0..jn {
            base[j] = u[j] * decay[j] + n_old[j] * w_old[j];
            next[j] = u[j] * decay[j] + n_old[j] * w_euler[j];
        }
        let mut prev_diff = f64::NAN;
        let mut contraction = 0.0;
        let mut converged = false;
        for _ in 0..cfg.picard_iters {
            nonlinear(&mut col, &next, &mut n_new);
            let mut diff = 0.0;
            for j in 0..jn {
                cand[j] = base[j] + n_new[j] * w_new[j];
                diff += (cand[j] - next[j]).norm_sqr();
            }
            let diff = diff.sqrt();
            if prev_diff.is_finite() && prev_diff > 0.0 {
                contraction = diff / prev_diff;
            }
            std::mem::swap(&mut next, &mut cand);
            if diff <= cfg.picard_tol * norm(&next) {
                converged = true;
                break;
            }
            prev_diff = diff;
        }
        if !converged {
            return Err(Error::PicardNonConvergence {
                step,
                time,
                contraction,
            });
        }
        nonlinear(&mut col, &next, &mut n_new);
        std::mem::swap(&mut u, &mut next);
        std::mem::swap(&mut n_old, &mut n_new);
        rates.push(rate(&u, &n_old));
        states.push(SpectralField::from_coeffs(cut.clone(), u.clone())?);
    }
    Ok(Trajectory {
        cut,
        times,
        states,
        rates,
    })
}

/// `sup_t ‖u(t)‖_{H^s}` and `∫₀^T ‖u(t)‖²_{H^{s+1}} dt` for one order `s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularityRow {
    pub order: f64,
    pub sup_norm: f64,
    pub integrated_next: f64,
}

pub fn regularity_report(traj: &Trajectory, orders: &[f64]) -> Result<Vec<RegularityRow>> {
    orders
        .iter()
        .map(|&s| {
            let mut sup: f64 = 0.0;
            let mut sq = Vec::with_capacity(traj.len());
            for st in &traj.states {
                sup = sup.max(sobolev_norm(st, SobolevIndex::new(s))?);
                sq.push(sobolev_norm(st, SobolevIndex::new(s + 1.0))?.powi(2));
            }
            let integral = traj
                .times
                .windows(2)
                .zip(sq.windows(2))
                .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
                .sum();
            Ok(RegularityRow {
                order: s,
                sup_norm: sup,
                integrated_next: integral,
            })
        })
        .collect()
}

/// `‖(u_{n+1} − u_{n−1})/(t_{n+1} − t_{n−1}) − Δu_n − P f(u_n)‖_{L²}` at interior index `n`.
pub fn pde_residual(
    traj: &Trajectory,
    reaction: &ReactionFunction,
    n: usize,
    collocation: Option<usize>,
) -> Result<f64> {
    if n == 0 || n + 1 >= traj.len() {
        return Err(Error::InvalidInput(format!(
            "residual index {n} is not interior"
        )));
    }
    let cfg = SolverConfig {
        collocation,
        ..SolverConfig::default()
    };
    let mut col = cfg.collocation_for(traj.cut.clone())?;
    let u = traj.states[n].coeffs();
    let mut nl = vec![Complex64::default(); u.len()];
    col.compose_into(u, |x| reaction.value(x), &mut nl);
    let h = traj.times[n + 1] - traj.times[n - 1];
    let (a, b) = (traj.states[n + 1].coeffs(), traj.states[n - 1].coeffs());
    Ok((0..u.len())
        .map(|j| ((a[j] - b[j]) / h + u[j] * traj.cut.eigenvalue(j) - nl[j]).norm_sqr())
        .sum::<f64>()
        .sqrt())
}

/// `sup_t ‖u(t) − v(t)‖_{L²}` over the shared grid.
pub fn sup_l2_distance(a: &Trajectory, b: &Trajectory) -> Result<f64> {
    if a.times.len() != b.times.len() {
        return Err(Error::GridMismatch(
            "trajectories have different time grids".into(),
        ));
    }
    Ok(a.states
        .iter()
        .zip(&b.states)
        .map(|(x, y)| (x - y).l2_norm())
        .fold(0.0, f64::max))
}

/// `(∫₀ᵀ ‖u(t)‖²_{L²} dt)^{1/2}` by the trapezoid rule on the trajectory grid.
pub fn space_time_l2(traj: &Trajectory) -> f64 {
    let sq: Vec<f64> = traj.states.iter().map(SpectralField::l2_norm_sq).collect();
    traj.times
        .windows(2)
        .zip(sq.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
        .sum::<f64>()
        .sqrt()
}

/// Space-time `L²` distance of two trajectories on a common grid.
pub fn space_time_l2_distance(a: &Trajectory, b: &Trajectory) -> Result<f64> {
    if a.times.len() != b.times.len() {
        return Err(Error::GridMismatch(
            "trajectories have different time grids".into(),
        ));
    }
    let diff = a.states.iter().zip(&b.states).map(|(x, y)| x - y).collect();
    Ok(space_time_l2(&Trajectory::from_states(
        a.times.clone(),
        diff,
    )?))
}

/// `sup_t ‖u(t) − v(t)‖_∞` measured on a grid of `size` points per axis.
pub fn sup_linf_distance(a: &Trajectory, b: &Trajectory, size: usize) -> Result<f64> {
    if a.times.len() != b.times.len() {
        return Err(Error::GridMismatch(
            "trajectories have different time grids".into(),
        ));
    }
    let mut col = Collocation::new(a.cut.clone(), size)?;
    let mut best: f64 = 0.0;
    for (x, y) in a.states.iter().zip(&b.states) {
        let g: Grid = col.synthesize(&(x - y))?;
        best = best.max(g.max_abs());
    }
    Ok(best)
}
