//! Linear parabolic flow `∂ₜU = ΔU + V(t,·)U + m` and the elliptic theory of
//! `Δ − W` behind it.
//!
//! Potentials are frozen over each time step at the step midpoint, where the
//! propagator is exact: with `W = −V_mid`, `U(t + τ) = E e^{−τμ} Eᵀ U(t)` for the
//! eigenpairs `(μ, E)` of `−Δ + W` on the cut. Matrices live in the real
//! coordinates of [`crate::spectral`].

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::forward::{locate, uniform_times, ReactionFunction, Trajectory};
use crate::par;
use crate::spectral::{
    smooth_size, sobolev_norm_coords, Collocation, FrequencyCut, RealMode, SpectralField,
};

/// Time-dependent potential `V(t,·)` sampled on a time grid.
#[derive(Debug, Clone)]
pub struct PotentialPath {
    times: Vec<f64>,
    fields: Vec<SpectralField>,
    wbar: f64,
}

impl PotentialPath {
    /// Validates the grid and recomputes `W̄ = sup_{t,x} |V|`.
    pub fn new(times: Vec<f64>, fields: Vec<SpectralField>) -> Result<Self> {
        if times.is_empty() || times.len() != fields.len() {
            return Err(Error::InvalidInput(
                "potential path needs one field per time".into(),
            ));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput(
                "potential times must be strictly increasing".into(),
            ));
        }
        let cut = fields[0].cut().clone();
        if fields.iter().any(|f| !f.cut().same_shape(&cut)) {
            return Err(Error::CutMismatch);
        }
        if fields.iter().any(|f| !f.is_real(1e-10)) {
            return Err(Error::InvalidInput("potential must be real-valued".into()));
        }
        let mut col = Collocation::dealiased(cut);
        let mut wbar: f64 = 0.0;
        for f in &fields {
            wbar = wbar.max(col.sup_abs(f)?);
        }
        Ok(Self {
            times,
            fields,
            wbar,
        })
    }

    /// `V(t) = f′(u(t))` along a reaction-diffusion trajectory.
    ///
    /// The potential is resolved on the doubled cut so that the Galerkin
    /// multiplication matrix on the solution cut sees every difference frequency.
    pub fn from_trajectory(traj: &Trajectory, reaction: &ReactionFunction) -> Result<Self> {
        let cut = traj.cut();
        let wide = Arc::new(FrequencyCut::new(cut.dim(), 2 * cut.max_freq())?);
        let size =
            smooth_size(2 * (2 * cut.max_freq() as usize + 1)).max(4 * cut.max_freq() as usize + 1);
        let fields = par::try_map_indexed(traj.len(), |n| {
            let mut col = Collocation::new(wide.clone(), size)?;
            let u = traj.states()[n].to_cut(&wide)?;
            col.compose(|x| reaction.deriv1(x), &u)
        })?;
        Self::new(traj.times().to_vec(), fields)
    }

    /// `V ≡ value` on `times`.
    pub fn constant(cut: &Arc<FrequencyCut>, times: Vec<f64>, value: f64) -> Result<Self> {
        let n = times.len();
        Self::new(times, vec![SpectralField::constant(cut.clone(), value); n])
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn fields(&self) -> &[SpectralField] {
        &self.fields
    }

    pub fn wbar(&self) -> f64 {
        self.wbar
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().expect("non-empty")
    }

    /// Linear interpolation in time.
    pub fn at(&self, t: f64) -> Result<SpectralField> {
        let (n, s) = locate(&self.times, t)?;
        if self.times.len() == 1 || s == 0.0 {
            return Ok(self.fields[n].clone());
        }
        self.fields[n].scale(1.0 - s).axpy(s, &self.fields[n + 1])
    }

    /// Potential held at `V(0)` on `[0, ε/2]`, ramped linearly to `V(ε)` on
    /// `[ε/2, ε]` and equal to `V` afterwards.
    pub fn mollified(&self, eps: f64) -> Result<Self> {
        if !(eps > 0.0) {
            return Err(Error::InvalidInput(format!(
                "mollification width must be positive, got {eps}"
            )));
        }
        let v0 = &self.fields[0];
        let ve = self.at(eps.min(self.horizon()))?;
        let fields = self
            .times
            .iter()
            .zip(&self.fields)
            .map(|(&t, v)| {
                if t <= eps / 2.0 {
                    Ok(v0.clone())
                } else if t < eps {
                    let s = (t - eps / 2.0) / (eps / 2.0);
                    v0.scale(1.0 - s).axpy(s, &ve)
                } else {
                    Ok(v.clone())
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(self.times.clone(), fields)
    }
}

/// Eigen-decomposition of `−Δ + W` on a cut after the shift `W₊ = W + W̄ + 1`.
#[derive(Debug, Clone)]
pub struct SchrodingerSpectrum {
    potential: SpectralField,
    cut: Arc<FrequencyCut>,
    wbar: f64,
    /// Eigenvalues of `−Δ + W₊`, ascending.
    pub eigvals_shifted: Vec<f64>,
    /// `λ_{j,W} = λ_{j,W₊} − W̄ − 1`.
    pub eigvals: Vec<f64>,
    /// Orthonormal eigenvectors in real coordinates, one per column.
    pub eigvecs: DMatrix<f64>,
}

#[derive(Serialize)]
struct SpectrumDump<'a> {
    eigvals: &'a [f64],
    eigvals_shifted: &'a [f64],
    bound_check: bool,
}

/// The (at most two) complex coefficients of real basis function `b`.
fn real_basis_coeffs(cut: &FrequencyCut, b: usize) -> [(usize, Complex64); 2] {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let n = cut.negation(b);
    match cut.real_mode(b) {
        RealMode::Constant => [(0, Complex64::new(1.0, 0.0)), (0, Complex64::new(0.0, 0.0))],
        RealMode::Cos => [(b, Complex64::new(r, 0.0)), (n, Complex64::new(r, 0.0))],
        RealMode::Sin => [(b, Complex64::new(0.0, r)), (n, Complex64::new(0.0, -r))],
    }
}

/// Real-coordinate matrix of `−Δ + W + shift` on `cut` (Galerkin, exact products).
pub fn operator_matrix(
    w: &SpectralField,
    cut: &Arc<FrequencyCut>,
    shift: f64,
) -> Result<DMatrix<f64>> {
    if w.cut().dim() != cut.dim() {
        return Err(Error::CutMismatch);
    }
    let wc = w.cut();
    let d = cut.dim();
    let jn = cut.len();
    let mut m = DMatrix::zeros(jn, jn);
    let mut col = vec![Complex64::default(); jn];
    for b in 0..jn {
        col.fill(Complex64::default());
        for (l, cl) in real_basis_coeffs(cut, b) {
            if cl == Complex64::default() {
                continue;
            }
            col[l] += cl * (cut.eigenvalue(l) + shift);
            let kl = cut.freq(l);
            for (k, slot) in col.iter_mut().enumerate() {
                let kk = cut.freq(k);
                let diff = [kk[0] - kl[0], kk[1] - kl[1]];
                if let Some(i) = wc.index_of(&diff[..d]) {
                    *slot += w.coeff(i) * cl;
                }
            }
        }
        let field = SpectralField::from_coeffs(cut.clone(), col.clone())?;
        for (a, v) in field.real_coords().into_iter().enumerate() {
            m[(a, b)] = v;
        }
    }
    Ok(m)
}

/// Symmetric eigensolve with ascending eigenvalues.
pub(crate) fn sorted_eigen(m: DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let sym = (&m + m.transpose()) * 0.5;
    let scale = sym.amax();
    let eig = SymmetricEigen::try_new(sym.clone(), f64::EPSILON, 100_000).ok_or_else(|| {
        Error::Eigen {
            reason: "symmetric QR iteration did not converge".into(),
            condition: condition_estimate(&sym, scale),
        }
    })?;
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(m.nrows(), order.len(), |r, c| {
        eig.eigenvectors[(r, order[c])]
    });
    Ok((vals, vecs))
}

fn condition_estimate(m: &DMatrix<f64>, scale: f64) -> f64 {
    let sv = m.clone().singular_values();
    let (lo, hi) = sv
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(a, b), &s| (a.min(s), b.max(s)));
    if lo > 0.0 {
        hi / lo
    } else if scale > 0.0 {
        f64::INFINITY
    } else {
        1.0
    }
}

/// Spectrum of `Δ − W` on `cut`.
pub fn elliptic_spectrum(
    w: &SpectralField,
    cut: &Arc<FrequencyCut>,
) -> Result<SchrodingerSpectrum> {
    if !w.is_real(1e-10) {
        return Err(Error::InvalidInput("potential must be real-valued".into()));
    }
    let wbar = Collocation::dealiased(w.cut().clone()).sup_abs(w)?;
    elliptic_spectrum_with_bound(w, cut, wbar)
}

/// As [`elliptic_spectrum`] with a caller-supplied bound `W̄ ≥ sup|W|`.
pub fn elliptic_spectrum_with_bound(
    w: &SpectralField,
    cut: &Arc<FrequencyCut>,
    wbar: f64,
) -> Result<SchrodingerSpectrum> {
    let m = operator_matrix(w, cut, wbar + 1.0)?;
    let (shifted, eigvecs) = sorted_eigen(m)?;
    let eigvals = shifted.iter().map(|l| l - wbar - 1.0).collect();
    Ok(SchrodingerSpectrum {
        potential: w.clone(),
        cut: cut.clone(),
        wbar,
        eigvals_shifted: shifted,
        eigvals,
        eigvecs,
    })
}

impl SchrodingerSpectrum {
    pub fn potential(&self) -> &SpectralField {
        &self.potential
    }

    pub fn cut(&self) -> &Arc<FrequencyCut> {
        &self.cut
    }

    pub fn wbar(&self) -> f64 {
        self.wbar
    }

    /// Largest violation of `λ_{j,W₊} ∈ [λ_j + 1, λ_j + 2W̄ + 1]` (zero when all hold).
    pub fn bound_violation(&self) -> f64 {
        self.eigvals_shifted
            .iter()
            .zip(self.cut.eigenvalues())
            .map(|(&mu, &lam)| {
                let lo = lam + 1.0 - mu;
                let hi = mu - (lam + 2.0 * self.wbar + 1.0);
                lo.max(hi).max(0.0)
            })
            .fold(0.0, f64::max)
    }

    pub fn bounds_hold(&self, tol: f64) -> bool {
        self.bound_violation() <= tol
    }

    /// `max |EᵀE − I|`.
    pub fn orthonormality_error(&self) -> f64 {
        let g = self.eigvecs.transpose() * &self.eigvecs;
        (g - DMatrix::identity(self.eigvecs.ncols(), self.eigvecs.ncols())).amax()
    }

    pub fn eigenfunction(&self, j: usize) -> SpectralField {
        let coords: Vec<f64> = self.eigvecs.column(j).iter().copied().collect();
        SpectralField::from_real_coords(self.cut.clone(), &coords).expect("sizes agree")
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&SpectrumDump {
            eigvals: &self.eigvals,
            eigvals_shifted: &self.eigvals_shifted,
            bound_check: self.bounds_hold(1e-8 * (1.0 + self.wbar)),
        })?)
    }

    /// `E e^{−τμ} Eᵀ` in real coordinates.
    pub fn propagator(&self, tau: f64) -> DMatrix<f64> {
        let d = DVector::from_iterator(
            self.eigvals.len(),
            self.eigvals.iter().map(|m| (-tau * m).exp()),
        );
        let scaled = DMatrix::from_fn(self.eigvecs.nrows(), self.eigvecs.ncols(), |r, c| {
            self.eigvecs[(r, c)] * d[c]
        });
        scaled * self.eigvecs.transpose()
    }
}

/// Number of `|λ_{j,W}| ≤ tol`; `None` uses `1e−8·(1 + W̄)`.
pub fn kernel_dimension(spec: &SchrodingerSpectrum, tol: Option<f64>) -> usize {
    let tol = tol.unwrap_or(1e-8 * (1.0 + spec.wbar));
    spec.eigvals.iter().filter(|l| l.abs() <= tol).count()
}

/// `Σ_j e^{−τλ_{j,W}} e_{j,W}⟨e_{j,W}, h⟩`.
pub fn frozen_step(
    h: &SpectralField,
    spec: &SchrodingerSpectrum,
    tau: f64,
) -> Result<SpectralField> {
    if tau < 0.0 {
        return Err(Error::InvalidInput(format!(
            "step must be non-negative, got {tau}"
        )));
    }
    if !h.cut().same_shape(&spec.cut) {
        return Err(Error::CutMismatch);
    }
    let apply = |f: &SpectralField| -> Result<SpectralField> {
        let a = DVector::from_vec(f.real_coords());
        let proj = spec.eigvecs.transpose() * a;
        let damped = DVector::from_iterator(
            proj.len(),
            proj.iter()
                .zip(&spec.eigvals)
                .map(|(p, m)| p * (-tau * m).exp()),
        );
        let out = &spec.eigvecs * damped;
        SpectralField::from_real_coords(spec.cut.clone(), out.as_slice())
    };
    let (re, im) = h.split_real_imag();
    if im.l2_norm() == 0.0 {
        apply(&re)
    } else {
        SpectralField::combine(&apply(&re)?, &apply(&im)?)
    }
}

/// One frozen step: eigenpairs of `−Δ − V_mid` and the step length.
#[derive(Debug, Clone)]
pub struct FrozenStep {
    pub tau: f64,
    pub mu: Vec<f64>,
    pub vecs: DMatrix<f64>,
}

impl FrozenStep {
    /// `E e^{−sμ} Eᵀ x` for `0 ≤ s ≤ τ`, applied column-wise.
    pub fn apply(&self, s: f64, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut p = self.vecs.transpose() * x;
        for (r, m) in self.mu.iter().enumerate() {
            let e = (-s * m).exp();
            p.row_mut(r).scale_mut(e);
        }
        &self.vecs * p
    }

    /// `∫₀^τ e^{−2sμ} ds` per eigenvalue.
    pub fn energy_weights(&self) -> Vec<f64> {
        self.mu
            .iter()
            .map(|&m| {
                let z = 2.0 * self.tau * m;
                if z.abs() < 1e-8 {
                    self.tau * (1.0 - z / 2.0)
                } else {
                    -(-z).exp_m1() / (2.0 * m)
                }
            })
            .collect()
    }
}

/// Piecewise-frozen propagator for a potential path on a uniform grid.
#[derive(Debug, Clone)]
pub struct LinearPropagator {
    cut: Arc<FrequencyCut>,
    times: Vec<f64>,
    steps: Vec<FrozenStep>,
}

impl LinearPropagator {
    /// Steps of length `horizon / ceil(horizon / dt)`, each frozen at its midpoint.
    pub fn new(
        path: &PotentialPath,
        cut: &Arc<FrequencyCut>,
        horizon: f64,
        dt: f64,
    ) -> Result<Self> {
        if !(horizon > 0.0) || horizon > path.horizon() * (1.0 + 1e-12) {
            return Err(Error::GridMismatch(format!(
                "horizon {horizon} exceeds the potential path horizon {}",
                path.horizon()
            )));
        }
        if !(dt > 0.0) {
            return Err(Error::InvalidInput(format!(
                "dt must be positive, got {dt}"
            )));
        }
        let times = uniform_times(horizon, dt);
        let steps = par::try_map_indexed(times.len() - 1, |n| {
            let tau = times[n + 1] - times[n];
            let mid = path.at(0.5 * (times[n] + times[n + 1]))?;
            let (mu, vecs) = frozen_eigen(&mid, cut, path.wbar())?;
            Ok::<_, Error>(FrozenStep { tau, mu, vecs })
        })?;
        Ok(Self {
            cut: cut.clone(),
            times,
            steps,
        })
    }

    /// Uses the path's own grid.
    pub fn on_path_grid(path: &PotentialPath, cut: &Arc<FrequencyCut>) -> Result<Self> {
        let t = path.times();
        let dt = if t.len() > 1 {
            t[1] - t[0]
        } else {
            path.horizon()
        };
        Self::new(path, cut, path.horizon(), dt)
    }

    pub fn cut(&self) -> &Arc<FrequencyCut> {
        &self.cut
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn steps(&self) -> &[FrozenStep] {
        &self.steps
    }

    /// States (real coordinates, one column per input) at every grid time.
    pub fn propagate(&self, init: &DMatrix<f64>) -> Vec<DMatrix<f64>> {
        let mut out = Vec::with_capacity(self.times.len());
        out.push(init.clone());
        for st in &self.steps {
            let next = st.apply(st.tau, out.last().expect("non-empty"));
            out.push(next);
        }
        out
    }

    /// Solution with source `m`, Duhamel term by the trapezoid rule.
    pub fn propagate_with_source(
        &self,
        init: &DVector<f64>,
        source: &[DVector<f64>],
    ) -> Vec<DVector<f64>> {
        let mut out = Vec::with_capacity(self.times.len());
        out.push(init.clone());
        for (n, st) in self.steps.iter().enumerate() {
            let prev = DMatrix::from_column_slice(init.len(), 1, out[n].as_slice());
            let m0 = DMatrix::from_column_slice(init.len(), 1, source[n].as_slice());
            let mut next = st.apply(st.tau, &prev) + st.apply(st.tau, &m0) * (0.5 * st.tau);
            next += DMatrix::from_column_slice(init.len(), 1, source[n + 1].as_slice())
                * (0.5 * st.tau);
            out.push(DVector::from_column_slice(next.as_slice()));
        }
        out
    }
}

fn frozen_eigen(
    v: &SpectralField,
    cut: &Arc<FrequencyCut>,
    wbar: f64,
) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let w = v.scale(-1.0);
    let m = operator_matrix(&w, cut, wbar + 1.0)?;
    let (shifted, vecs) = sorted_eigen(m)?;
    Ok((shifted.iter().map(|l| l - wbar - 1.0).collect(), vecs))
}

/// Solves `∂ₜU = ΔU + VU + m`, `U(0) = h` with midpoint-frozen steps of size `dt`.
pub fn solve_linear(
    h: &SpectralField,
    path: &PotentialPath,
    source: Option<&Trajectory>,
    horizon: f64,
    dt: f64,
) -> Result<Trajectory> {
    if !h.is_real(1e-10) {
        return Err(Error::InvalidInput(
            "initial condition must be real-valued".into(),
        ));
    }
    let cut = h.cut().clone();
    let prop = LinearPropagator::new(path, &cut, horizon, dt)?;
    let init = DVector::from_vec(h.real_coords());
    let states: Vec<DVector<f64>> = match source {
        None => prop
            .propagate(&DMatrix::from_column_slice(init.len(), 1, init.as_slice()))
            .into_iter()
            .map(|m| DVector::from_column_slice(m.as_slice()))
            .collect(),
        Some(m) => {
            if m.horizon() < horizon * (1.0 - 1e-12) || !m.cut().same_shape(&cut) {
                return Err(Error::GridMismatch(
                    "source does not cover the solve".into(),
                ));
            }
            let src = prop
                .times()
                .iter()
                .map(|&t| Ok(DVector::from_vec(m.state_at(t)?.real_coords())))
                .collect::<Result<Vec<_>>>()?;
            prop.propagate_with_source(&init, &src)
        }
    };
    let fields = states
        .iter()
        .map(|s| SpectralField::from_real_coords(cut.clone(), s.as_slice()))
        .collect::<Result<Vec<_>>>()?;
    Trajectory::from_states(prop.times().to_vec(), fields)
}

/// Discretized linearization: zero-mean initial coordinates to space-time L².
///
/// Rows are stacked per step; the block for step `n` is `diag(√q) Eₙᵀ Φₙ₋₁`
/// with `q_a = ∫₀^τ e^{−2sμ_a} ds`, so `‖M h‖²` is the exact space-time energy
/// of the frozen-potential solution.
#[derive(Debug, Clone)]
pub struct LinearFlowMatrix {
    prop: LinearPropagator,
    /// `Φₙ`: states at grid time `n` for each zero-mean unit input.
    phis: Vec<DMatrix<f64>>,
    /// `Eₙᵀ Φₙ₋₁`: step-`n` eigen-coordinates of the state entering the step.
    projected: Vec<DMatrix<f64>>,
    weights: Vec<Vec<f64>>,
    gram: DMatrix<f64>,
}

/// Builds the flow matrix on the path grid.
pub fn build_flow_matrix(
    path: &PotentialPath,
    cut: &Arc<FrequencyCut>,
) -> Result<LinearFlowMatrix> {
    LinearFlowMatrix::from_propagator(LinearPropagator::on_path_grid(path, cut)?)
}

impl LinearFlowMatrix {
    pub fn from_propagator(prop: LinearPropagator) -> Result<Self> {
        let jn = prop.cut.len();
        let init = DMatrix::from_fn(jn, jn - 1, |r, c| if r == c + 1 { 1.0 } else { 0.0 });
        let phis = prop.propagate(&init);
        let weights: Vec<Vec<f64>> = prop.steps.iter().map(FrozenStep::energy_weights).collect();
        let projected = par::map_indexed(prop.steps.len(), |n| {
            prop.steps[n].vecs.transpose() * &phis[n]
        });
        let blocks = par::map_indexed(prop.steps.len(), |n| {
            let mut b = projected[n].clone();
            for (r, q) in weights[n].iter().enumerate() {
                b.row_mut(r).scale_mut(q.sqrt());
            }
            b.transpose() * b
        });
        let mut gram = DMatrix::zeros(jn - 1, jn - 1);
        for b in blocks {
            gram += b;
        }
        let gram = (&gram + gram.transpose()) * 0.5;
        Ok(Self {
            prop,
            phis,
            projected,
            weights,
            gram,
        })
    }

    pub fn cut(&self) -> &Arc<FrequencyCut> {
        &self.prop.cut
    }

    pub fn times(&self) -> &[f64] {
        &self.prop.times
    }

    pub fn propagator(&self) -> &LinearPropagator {
        &self.prop
    }

    pub fn nrows(&self) -> usize {
        self.prop.steps.len() * self.prop.cut.len()
    }

    pub fn ncols(&self) -> usize {
        self.prop.cut.len() - 1
    }

    fn block(&self, n: usize) -> DMatrix<f64> {
        let mut b = self.projected[n].clone();
        for (r, q) in self.weights[n].iter().enumerate() {
            b.row_mut(r).scale_mut(q.sqrt());
        }
        b
    }

    /// Dense matrix (rows = steps × J).
    pub fn matrix(&self) -> DMatrix<f64> {
        let jn = self.prop.cut.len();
        let mut m = DMatrix::zeros(self.nrows(), self.ncols());
        for n in 0..self.prop.steps.len() {
            m.view_mut((n * jn, 0), (jn, self.ncols()))
                .copy_from(&self.block(n));
        }
        m
    }

    pub fn apply(&self, h: &DVector<f64>) -> DVector<f64> {
        let jn = self.prop.cut.len();
        let mut out = DVector::zeros(self.nrows());
        for n in 0..self.prop.steps.len() {
            out.rows_mut(n * jn, jn).copy_from(&(self.block(n) * h));
        }
        out
    }

    pub fn adjoint_apply(&self, g: &DVector<f64>) -> DVector<f64> {
        let jn = self.prop.cut.len();
        let mut out = DVector::zeros(self.ncols());
        for n in 0..self.prop.steps.len() {
            out += self.block(n).transpose() * g.rows(n * jn, jn);
        }
        out
    }

    /// `MᵀM`: the Gram matrix `⟨𝕀ē_a, 𝕀ē_b⟩_{L²([0,T]×Ω)}`.
    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// `U_{ē_j}(t)` for all zero-mean inputs (columns), in real coordinates.
    pub fn states_at(&self, t: f64) -> Result<DMatrix<f64>> {
        let (n, s) = locate(&self.prop.times, t)?;
        if s == 0.0 {
            return Ok(self.phis[n].clone());
        }
        let st = &self.prop.steps[n];
        Ok(st.apply(s * st.tau, &self.phis[n]))
    }

    /// `U_{ē_a}(t, x)` for every zero-mean unit input `ē_a`.
    pub fn point_responses(&self, t: f64, x: &[f64]) -> Result<DVector<f64>> {
        let (n, s) = locate(&self.prop.times, t)?;
        let phi = DVector::from_vec(self.prop.cut.real_basis_values(x));
        if self.prop.steps.is_empty() {
            return Ok(self.phis[n].transpose() * phi);
        }
        let st = &self.prop.steps[n];
        let mut v = st.vecs.transpose() * phi;
        for (vi, m) in v.iter_mut().zip(&st.mu) {
            *vi *= (-s * st.tau * m).exp();
        }
        Ok(self.projected[n].transpose() * v)
    }

    /// States at grid time index `n`.
    pub fn grid_states(&self, n: usize) -> &DMatrix<f64> {
        &self.phis[n]
    }
}

/// Random zero-mean coordinates with standard deviation `λ_j^{−(a + d/2 + 0.1)/2}`.
pub fn rough_coords(cut: &FrequencyCut, a: f64, rng: &mut impl Rng) -> Vec<f64> {
    let expo = -(a + cut.dim() as f64 / 2.0 + 0.1) / 2.0;
    (1..cut.len())
        .map(|j| {
            let g: f64 = rng.sample(rand_distr::StandardNormal);
            g * cut.eigenvalue(j).powf(expo)
        })
        .collect()
}

/// `max sup_{t ≥ t_min} ‖U_h(t)‖_{H^b} / ‖h‖_{H^a}` over random rough `h`.
pub fn smoothing_probe(
    prop: &LinearPropagator,
    a: f64,
    b: f64,
    t_min: f64,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    if !(b > a) || !(t_min > 0.0) {
        return Err(Error::InvalidInput(
            "smoothing probe needs b > a and t_min > 0".into(),
        ));
    }
    let cut = prop.cut.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jn = cut.len();
    let init = DMatrix::from_fn(jn, trials, |_, _| 0.0);
    let mut init = init;
    for c in 0..trials {
        let h = rough_coords(&cut, a, &mut rng);
        for (j, v) in h.into_iter().enumerate() {
            init[(j + 1, c)] = v;
        }
    }
    smoothing_ratio(prop, &init, a, b, t_min)
}

/// Same ratio for explicit initial conditions (columns of real coordinates).
pub fn smoothing_ratio(
    prop: &LinearPropagator,
    init: &DMatrix<f64>,
    a: f64,
    b: f64,
    t_min: f64,
) -> Result<f64> {
    let cut = &prop.cut;
    let states = prop.propagate(init);
    let mut worst: f64 = 0.0;
    for c in 0..init.ncols() {
        let h: Vec<f64> = init.column(c).iter().copied().collect();
        let hn = sobolev_norm_coords(cut, &h, a, false);
        if hn == 0.0 {
            continue;
        }
        let sup = prop
            .times
            .iter()
            .zip(&states)
            .filter(|(t, _)| **t >= t_min - 1e-12)
            .map(|(_, s)| {
                let v: Vec<f64> = s.column(c).iter().copied().collect();
                sobolev_norm_coords(cut, &v, b, false)
            })
            .fold(0.0, f64::max);
        worst = worst.max(sup / hn);
    }
    Ok(worst)
}

/// Result of the lower stability probe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabilityProbe {
    /// Minimum of `∫‖U_h‖² / ‖h‖²_{H^{−1}}` over the random trials.
    pub monte_carlo_min: f64,
    /// Exact minimum over the zero-mean cut (smallest generalized eigenvalue).
    pub exact_min: f64,
}

/// Lower bound `∫₀ᵀ‖U_h‖²_{L²} ≥ c‖h‖²_{H^{−1}}` measured over random zero-mean `h`.
pub fn stability_lower_probe(
    flow: &LinearFlowMatrix,
    trials: usize,
    seed: u64,
) -> Result<StabilityProbe> {
    let cut = flow.cut().clone();
    let g = flow.gram();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mc = f64::INFINITY;
    for _ in 0..trials {
        let h = DVector::from_vec(rough_coords(&cut, -1.0, &mut rng));
        let energy = (g * &h).dot(&h);
        let norm = sobolev_norm_coords(&cut, h.as_slice(), -1.0, true).powi(2);
        mc = mc.min(energy / norm);
    }
    // D^{1/2} G D^{1/2} with D = diag(1 + λ_j)
    let jz = flow.ncols();
    let s = DMatrix::from_fn(jz, jz, |r, c| {
        g[(r, c)] * ((1.0 + cut.eigenvalue(r + 1)) * (1.0 + cut.eigenvalue(c + 1))).sqrt()
    });
    let (vals, _) = sorted_eigen(s)?;
    Ok(StabilityProbe {
        monte_carlo_min: mc,
        exact_min: vals[0],
    })
}
