//! Fourier calculus on the torus `Ω = [0,1]^d` for `d ∈ {1, 2}`.
//!
//! Fields are stored as coefficients of the L²-orthonormal exponentials
//! `e_k(x) = exp(2πi k·x)` on a box lattice `|k_axis| ≤ K`. The lattice is
//! ordered by `|k|²` with a lexicographic tie-break, so index 0 is always the
//! constant mode and eigenvalues `λ_j = 4π²|k_j|²` are nondecreasing in `j`.
//!
//! Matrices elsewhere in the crate use the *real coordinates* of a field: the
//! coefficients in the real orthonormal basis that shares the lattice index,
//!
//! * `k = 0` → `1`,
//! * `k > 0` (first non-zero component positive) → `√2 cos(2πk·x)`,
//! * `k < 0` → `√2 sin(2π(−k)·x)`.
//!
//! The map between complex coefficients of a real field and real coordinates
//! is an isometry and keeps `Δ` diagonal with the same eigenvalue per index.

mod collocation;

pub use collocation::{analyze, pointwise_compose, smooth_size, synthesize, Collocation, Grid};

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::ops::{Add, Mul, Sub};
use std::sync::Arc;

pub use rustfft::num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Relative tolerance below which the constant coefficient counts as zero.
pub const ZERO_MEAN_TOL: f64 = 1e-12;

/// `λ(k) = 4π²|k|²`, so that `Δ e_k = −λ(k) e_k`.
pub fn laplacian_eigenvalue(k: &[i32]) -> f64 {
    4.0 * PI * PI * k.iter().map(|&c| f64::from(c) * f64::from(c)).sum::<f64>()
}

/// Which real basis function sits at a lattice index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RealMode {
    Constant,
    /// `√2 cos(2πk·x)` for the positive representative `k`.
    Cos,
    /// `√2 sin(2πk·x)` where `k` is the negation of this index's frequency.
    Sin,
}

/// Symmetric frequency cut `{k ∈ ℤ^d : |k_axis| ≤ K}`.
#[derive(Clone, PartialEq)]
pub struct FrequencyCut {
    dim: usize,
    max_freq: i32,
    lattice: Vec<[i32; 2]>,
    lookup: Vec<usize>,
    negation: Vec<usize>,
    eigenvalues: Vec<f64>,
}

impl fmt::Debug for FrequencyCut {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FrequencyCut")
            .field("dim", &self.dim)
            .field("max_freq", &self.max_freq)
            .field("modes", &self.lattice.len())
            .finish()
    }
}

impl FrequencyCut {
    pub fn new(dim: usize, max_freq: i32) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(Error::InvalidInput(format!(
                "dimension must be 1 or 2, got {dim}"
            )));
        }
        if max_freq < 0 {
            return Err(Error::InvalidInput(format!(
                "max frequency must be non-negative, got {max_freq}"
            )));
        }
        let side = 2 * max_freq + 1;
        let mut lattice: Vec<[i32; 2]> = if dim == 1 {
            (-max_freq..=max_freq).map(|k| [k, 0]).collect()
        } else {
            let mut v = Vec::with_capacity((side * side) as usize);
            for a in -max_freq..=max_freq {
                for b in -max_freq..=max_freq {
                    v.push([a, b]);
                }
            }
            v
        };
        lattice.sort_by(|a, b| {
            let na = a[0] * a[0] + a[1] * a[1];
            let nb = b[0] * b[0] + b[1] * b[1];
            na.cmp(&nb).then(a.cmp(b))
        });

        let box_len = if dim == 1 { side } else { side * side } as usize;
        let mut lookup = vec![usize::MAX; box_len];
        for (j, k) in lattice.iter().enumerate() {
            lookup[Self::box_index(dim, max_freq, *k)] = j;
        }
        let negation = lattice
            .iter()
            .map(|k| lookup[Self::box_index(dim, max_freq, [-k[0], -k[1]])])
            .collect();
        let eigenvalues = lattice
            .iter()
            .map(|k| laplacian_eigenvalue(&k[..dim]))
            .collect();
        Ok(Self {
            dim,
            max_freq,
            lattice,
            lookup,
            negation,
            eigenvalues,
        })
    }

    /// Shared handle, the form every field stores.
    pub fn shared(dim: usize, max_freq: i32) -> Result<Arc<Self>> {
        Self::new(dim, max_freq).map(Arc::new)
    }

    fn box_index(dim: usize, max_freq: i32, k: [i32; 2]) -> usize {
        let side = 2 * max_freq + 1;
        if dim == 1 {
            (k[0] + max_freq) as usize
        } else {
            ((k[0] + max_freq) * side + (k[1] + max_freq)) as usize
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn max_freq(&self) -> i32 {
        self.max_freq
    }

    /// Total mode count `J` (including the constant).
    pub fn len(&self) -> usize {
        self.lattice.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lattice.is_empty()
    }

    /// Frequency vector of index `j`; the second component is 0 when `d = 1`.
    pub fn freq(&self, j: usize) -> [i32; 2] {
        self.lattice[j]
    }

    pub fn lattice(&self) -> &[[i32; 2]] {
        &self.lattice
    }

    pub fn index_of(&self, k: &[i32]) -> Option<usize> {
        let kk = [k[0], if self.dim == 2 { k[1] } else { 0 }];
        if k.len() != self.dim || kk.iter().any(|c| c.abs() > self.max_freq) {
            return None;
        }
        Some(self.lookup[Self::box_index(self.dim, self.max_freq, kk)])
    }

    /// Index of `−k_j`.
    pub fn negation(&self, j: usize) -> usize {
        self.negation[j]
    }

    pub fn eigenvalue(&self, j: usize) -> f64 {
        self.eigenvalues[j]
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn real_mode(&self, j: usize) -> RealMode {
        let k = self.lattice[j];
        if k == [0, 0] {
            RealMode::Constant
        } else if k[0] > 0 || (k[0] == 0 && k[1] > 0) {
            RealMode::Cos
        } else {
            RealMode::Sin
        }
    }

    /// Value of the real basis function at index `j` at point `x`.
    pub fn real_basis_value(&self, j: usize, x: &[f64]) -> f64 {
        let k = self.lattice[j];
        let phase = 2.0 * PI * (0..self.dim).map(|a| f64::from(k[a]) * x[a]).sum::<f64>();
        match self.real_mode(j) {
            RealMode::Constant => 1.0,
            RealMode::Cos => SQRT_2 * phase.cos(),
            // k here is the negative member of the pair: sin(2π(−k)·x) = −sin(phase)
            RealMode::Sin => -SQRT_2 * phase.sin(),
        }
    }

    /// All real basis values at `x`.
    pub fn real_basis_values(&self, x: &[f64]) -> Vec<f64> {
        (0..self.len())
            .map(|j| self.real_basis_value(j, x))
            .collect()
    }

    /// Same cut with doubled per-axis frequency.
    pub fn doubled(&self) -> Self {
        Self::new(self.dim, 2 * self.max_freq.max(1)).expect("valid cut")
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.dim == other.dim && self.max_freq == other.max_freq
    }
}

/// Real Sobolev order together with the norm variant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SobolevIndex {
    pub order: f64,
    /// Use `λ_j^s` over `j ≥ 1` (the `H^s_0` norm) instead of `(1 + λ_j)^s`.
    pub zero_mean: bool,
}

impl SobolevIndex {
    pub fn new(order: f64) -> Self {
        Self {
            order,
            zero_mean: false,
        }
    }

    pub fn zero_mean(order: f64) -> Self {
        Self {
            order,
            zero_mean: true,
        }
    }

    /// Squared-norm weight of a mode with eigenvalue `lambda`.
    pub fn weight(&self, lambda: f64) -> f64 {
        if self.zero_mean {
            if lambda == 0.0 {
                0.0
            } else {
                lambda.powf(self.order)
            }
        } else {
            (1.0 + lambda).powf(self.order)
        }
    }
}

/// A function on the torus as complex coefficients over a [`FrequencyCut`].
#[derive(Clone, PartialEq)]
pub struct SpectralField {
    cut: Arc<FrequencyCut>,
    coeffs: Vec<Complex64>,
}

impl fmt::Debug for SpectralField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralField")
            .field("cut", &self.cut)
            .field("l2", &self.l2_norm())
            .finish()
    }
}

impl SpectralField {
    pub fn zeros(cut: Arc<FrequencyCut>) -> Self {
        let n = cut.len();
        Self {
            cut,
            coeffs: vec![Complex64::new(0.0, 0.0); n],
        }
    }

    pub fn from_coeffs(cut: Arc<FrequencyCut>, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != cut.len() {
            return Err(Error::InvalidInput(format!(
                "expected {} coefficients, got {}",
                cut.len(),
                coeffs.len()
            )));
        }
        if coeffs
            .iter()
            .any(|c| !c.re.is_finite() || !c.im.is_finite())
        {
            return Err(Error::InvalidInput("non-finite coefficient".into()));
        }
        Ok(Self { cut, coeffs })
    }

    /// The exponential `e_j` at lattice index `j`.
    pub fn mode(cut: Arc<FrequencyCut>, j: usize) -> Self {
        let mut f = Self::zeros(cut);
        f.coeffs[j] = Complex64::new(1.0, 0.0);
        f
    }

    /// Field with value `value` everywhere.
    pub fn constant(cut: Arc<FrequencyCut>, value: f64) -> Self {
        let mut f = Self::zeros(cut);
        f.coeffs[0] = Complex64::new(value, 0.0);
        f
    }

    /// Real field from its full real coordinates (length `J`).
    pub fn from_real_coords(cut: Arc<FrequencyCut>, coords: &[f64]) -> Result<Self> {
        if coords.len() != cut.len() {
            return Err(Error::InvalidInput(format!(
                "expected {} real coordinates, got {}",
                cut.len(),
                coords.len()
            )));
        }
        let mut coeffs = vec![Complex64::new(0.0, 0.0); cut.len()];
        for j in 0..cut.len() {
            match cut.real_mode(j) {
                RealMode::Constant => coeffs[j] = Complex64::new(coords[j], 0.0),
                RealMode::Cos => {
                    let n = cut.negation(j);
                    let c = Complex64::new(coords[j], -coords[n]) / SQRT_2;
                    coeffs[j] = c;
                    coeffs[n] = c.conj();
                }
                RealMode::Sin => {}
            }
        }
        Ok(Self { cut, coeffs })
    }

    /// Real zero-mean field from its real coordinates without the constant (length `J − 1`).
    pub fn from_zero_mean_coords(cut: Arc<FrequencyCut>, coords: &[f64]) -> Result<Self> {
        if coords.len() + 1 != cut.len() {
            return Err(Error::InvalidInput(format!(
                "expected {} zero-mean coordinates, got {}",
                cut.len() - 1,
                coords.len()
            )));
        }
        let mut full = Vec::with_capacity(cut.len());
        full.push(0.0);
        full.extend_from_slice(coords);
        Self::from_real_coords(cut, &full)
    }

    /// Samples `g` on a grid of `size` points per axis and analyses the result.
    pub fn from_fn<F: Fn(&[f64]) -> f64>(
        cut: Arc<FrequencyCut>,
        size: usize,
        g: F,
    ) -> Result<Self> {
        let grid = Grid::sample(cut.dim(), size, g);
        analyze(&grid, cut)
    }

    pub fn cut(&self) -> &Arc<FrequencyCut> {
        &self.cut
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    pub fn coeff(&self, j: usize) -> Complex64 {
        self.coeffs[j]
    }

    pub fn mean(&self) -> Complex64 {
        self.coeffs[0]
    }

    /// `Σ|c_j|²`.
    pub fn l2_norm_sq(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2_norm_sq().sqrt()
    }

    /// `max_k |c_k − conj(c_{−k})|` relative to the L² norm.
    pub fn asymmetry(&self) -> f64 {
        let scale = self.l2_norm().max(f64::MIN_POSITIVE);
        (0..self.coeffs.len())
            .map(|j| (self.coeffs[j] - self.coeffs[self.cut.negation(j)].conj()).norm())
            .fold(0.0, f64::max)
            / scale
    }

    pub fn is_real(&self, tol: f64) -> bool {
        self.l2_norm() == 0.0 || self.asymmetry() <= tol
    }

    pub fn is_zero_mean(&self) -> bool {
        self.coeffs[0].norm() <= ZERO_MEAN_TOL * self.l2_norm().max(f64::MIN_POSITIVE)
    }

    /// Real coordinates (length `J`); only meaningful for real fields.
    pub fn real_coords(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.cut.len()];
        for (j, c) in self.coeffs.iter().enumerate() {
            out[j] = match self.cut.real_mode(j) {
                RealMode::Constant => c.re,
                RealMode::Cos => SQRT_2 * c.re,
                RealMode::Sin => SQRT_2 * c.im,
            };
        }
        out
    }

    /// Real coordinates without the constant (length `J − 1`).
    pub fn zero_mean_coords(&self) -> Vec<f64> {
        let mut v = self.real_coords();
        v.remove(0);
        v
    }

    /// Splits `f = re + i·im` with both parts real fields.
    pub fn split_real_imag(&self) -> (Self, Self) {
        let mut re = Self::zeros(self.cut.clone());
        let mut im = Self::zeros(self.cut.clone());
        for j in 0..self.coeffs.len() {
            let c = self.coeffs[j];
            let cn = self.coeffs[self.cut.negation(j)].conj();
            re.coeffs[j] = (c + cn) * 0.5;
            im.coeffs[j] = (c - cn) * Complex64::new(0.0, -0.5);
        }
        (re, im)
    }

    /// Recombines `re + i·im`.
    pub fn combine(re: &Self, im: &Self) -> Result<Self> {
        check_same_cut(re, im)?;
        let coeffs = re
            .coeffs
            .iter()
            .zip(&im.coeffs)
            .map(|(a, b)| a + Complex64::new(0.0, 1.0) * b)
            .collect();
        Ok(Self {
            cut: re.cut.clone(),
            coeffs,
        })
    }

    /// `⟨self, other⟩_{L²} = Σ c_k conj(d_k)`.
    pub fn inner(&self, other: &Self) -> Result<Complex64> {
        check_same_cut(self, other)?;
        Ok(self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a * b.conj())
            .sum())
    }

    /// Point value (real part of the synthesis).
    pub fn value_at(&self, x: &[f64]) -> f64 {
        self.value_at_complex(x).re
    }

    pub fn value_at_complex(&self, x: &[f64]) -> Complex64 {
        let d = self.cut.dim();
        self.coeffs
            .iter()
            .enumerate()
            .map(|(j, c)| {
                let k = self.cut.freq(j);
                let phase = 2.0 * PI * (0..d).map(|a| f64::from(k[a]) * x[a]).sum::<f64>();
                c * Complex64::from_polar(1.0, phase)
            })
            .sum()
    }

    /// Applies `Δ` (multiplies each coefficient by `−λ_j`).
    pub fn laplacian(&self) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(j, c)| c * -self.cut.eigenvalue(j))
            .collect();
        Self {
            cut: self.cut.clone(),
            coeffs,
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            cut: self.cut.clone(),
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    /// `self + s·other`.
    pub fn axpy(&self, s: f64, other: &Self) -> Result<Self> {
        check_same_cut(self, other)?;
        Ok(Self {
            cut: self.cut.clone(),
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a + b * s)
                .collect(),
        })
    }

    /// Copies coefficients into `cut`, dropping or zero-filling frequencies.
    pub fn to_cut(&self, cut: &Arc<FrequencyCut>) -> Result<Self> {
        if cut.dim() != self.cut.dim() {
            return Err(Error::CutMismatch);
        }
        let mut out = Self::zeros(cut.clone());
        for (j, c) in self.coeffs.iter().enumerate() {
            let k = self.cut.freq(j);
            if let Some(i) = cut.index_of(&k[..cut.dim()]) {
                out.coeffs[i] = *c;
            }
        }
        Ok(out)
    }

    pub fn max_coeff_diff(&self, other: &Self) -> f64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

pub(crate) fn check_same_cut(a: &SpectralField, b: &SpectralField) -> Result<()> {
    if Arc::ptr_eq(&a.cut, &b.cut) || a.cut.same_shape(&b.cut) {
        Ok(())
    } else {
        Err(Error::CutMismatch)
    }
}

impl Add for &SpectralField {
    type Output = SpectralField;
    fn add(self, rhs: Self) -> SpectralField {
        self.axpy(1.0, rhs).expect("fields share a cut")
    }
}

impl Sub for &SpectralField {
    type Output = SpectralField;
    fn sub(self, rhs: Self) -> SpectralField {
        self.axpy(-1.0, rhs).expect("fields share a cut")
    }
}

impl Mul<f64> for &SpectralField {
    type Output = SpectralField;
    fn mul(self, rhs: f64) -> SpectralField {
        self.scale(rhs)
    }
}

/// `(Σ_j w_s(λ_j) |c_j|²)^{1/2}`.
pub fn sobolev_norm(f: &SpectralField, idx: SobolevIndex) -> Result<f64> {
    if !idx.order.is_finite() {
        return Err(Error::InvalidInput("Sobolev order must be finite".into()));
    }
    if idx.zero_mean {
        let tol = ZERO_MEAN_TOL * f.l2_norm();
        let mean = f.coeffs[0].norm();
        if mean > tol {
            return Err(Error::NonZeroMean { mean, tol });
        }
    }
    Ok(f.coeffs
        .iter()
        .enumerate()
        .map(|(j, c)| idx.weight(f.cut.eigenvalue(j)) * c.norm_sqr())
        .sum::<f64>()
        .sqrt())
}

/// Sobolev norm of a vector of real coordinates (`zero_mean_coords` layout when
/// `skip_constant` is set).
pub fn sobolev_norm_coords(
    cut: &FrequencyCut,
    coords: &[f64],
    order: f64,
    skip_constant: bool,
) -> f64 {
    let offset = usize::from(skip_constant);
    coords
        .iter()
        .enumerate()
        .map(|(i, a)| (1.0 + cut.eigenvalue(i + offset)).powf(order) * a * a)
        .sum::<f64>()
        .sqrt()
}

/// L² projection onto `span{e_j : 0 ≤ j ≤ j_max}`.
pub fn project(f: &SpectralField, j_max: usize) -> SpectralField {
    let mut out = f.clone();
    for c in out.coeffs.iter_mut().skip(j_max + 1) {
        *c = Complex64::new(0.0, 0.0);
    }
    out
}

#[derive(Serialize, Deserialize)]
struct FieldRepr {
    d: usize,
    #[serde(rename = "K")]
    k: i32,
    coeffs: Vec<[f64; 2]>,
}

impl Serialize for SpectralField {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        FieldRepr {
            d: self.cut.dim(),
            k: self.cut.max_freq(),
            coeffs: self.coeffs.iter().map(|c| [c.re, c.im]).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for SpectralField {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = FieldRepr::deserialize(d)?;
        let cut = FrequencyCut::shared(repr.d, repr.k).map_err(serde::de::Error::custom)?;
        let coeffs = repr
            .coeffs
            .into_iter()
            .map(|[re, im]| Complex64::new(re, im))
            .collect();
        SpectralField::from_coeffs(cut, coeffs).map_err(serde::de::Error::custom)
    }
}
