//! Grid transforms and pointwise composition on a uniform collocation grid.

use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{FrequencyCut, SpectralField};
use crate::error::{Error, Result};

/// Smallest `2^a 3^b 5^c ≥ n`.
pub fn smooth_size(n: usize) -> usize {
    let mut m = n.max(1);
    loop {
        let mut r = m;
        for p in [2, 3, 5] {
            while r.is_multiple_of(p) {
                r /= p;
            }
        }
        if r == 1 {
            return m;
        }
        m += 1;
    }
}

/// Real samples on the uniform grid `x_m = m / size` (row-major for `d = 2`).
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub dim: usize,
    pub size: usize,
    pub values: Vec<f64>,
}

impl Grid {
    pub fn sample<F: Fn(&[f64]) -> f64>(dim: usize, size: usize, g: F) -> Self {
        let n = size.pow(dim as u32);
        let values = (0..n)
            .map(|m| g(&Self::point_of(dim, size, m)[..dim]))
            .collect();
        Self { dim, size, values }
    }

    fn point_of(dim: usize, size: usize, m: usize) -> [f64; 2] {
        let h = 1.0 / size as f64;
        if dim == 1 {
            [m as f64 * h, 0.0]
        } else {
            [(m / size) as f64 * h, (m % size) as f64 * h]
        }
    }

    pub fn point(&self, m: usize) -> [f64; 2] {
        Self::point_of(self.dim, self.size, m)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    /// Writes `x1[,x2],value` rows with a header.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        if self.dim == 1 {
            writeln!(w, "x1,value")?;
        } else {
            writeln!(w, "x1,x2,value")?;
        }
        for (m, v) in self.values.iter().enumerate() {
            let p = self.point(m);
            if self.dim == 1 {
                writeln!(w, "{},{}", p[0], v)?;
            } else {
                writeln!(w, "{},{},{}", p[0], p[1], v)?;
            }
        }
        Ok(())
    }
}

/// Cached FFT plans and work buffers for one cut and grid size.
#[derive(Clone)]
pub struct Collocation {
    cut: Arc<FrequencyCut>,
    size: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    bins: Vec<usize>,
    buf: Vec<Complex64>,
    tmp: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl std::fmt::Debug for Collocation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Collocation")
            .field("cut", &self.cut)
            .field("size", &self.size)
            .finish()
    }
}

impl Collocation {
    /// Fails with [`Error::Aliasing`] when `size < 2K + 1`.
    pub fn new(cut: Arc<FrequencyCut>, size: usize) -> Result<Self> {
        let required = (2 * cut.max_freq() + 1) as usize;
        if size < required {
            return Err(Error::Aliasing {
                size,
                max_freq: cut.max_freq(),
                required,
            });
        }
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(size);
        let inverse = planner.plan_fft_inverse(size);
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        let n = size.pow(cut.dim() as u32);
        let wrap = |k: i32| k.rem_euclid(size as i32) as usize;
        let bins = cut
            .lattice()
            .iter()
            .map(|k| {
                if cut.dim() == 1 {
                    wrap(k[0])
                } else {
                    wrap(k[0]) * size + wrap(k[1])
                }
            })
            .collect();
        Ok(Self {
            cut,
            size,
            forward,
            inverse,
            bins,
            buf: vec![Complex64::default(); n],
            tmp: if size > 1 {
                vec![Complex64::default(); n]
            } else {
                Vec::new()
            },
            scratch: vec![Complex64::default(); scratch_len],
        })
    }

    /// Grid large enough that quadratic products are resolved without aliasing.
    pub fn dealiased(cut: Arc<FrequencyCut>) -> Self {
        let size = smooth_size(2 * (2 * cut.max_freq() as usize + 1));
        Self::new(cut, size).expect("dealiased size exceeds the aliasing bound")
    }

    pub fn cut(&self) -> &Arc<FrequencyCut> {
        &self.cut
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn num_points(&self) -> usize {
        self.buf.len()
    }

    pub fn dim(&self) -> usize {
        self.cut.dim()
    }

    fn transform(&mut self, inverse: bool) {
        let plan = if inverse {
            &self.inverse
        } else {
            &self.forward
        };
        plan.process_with_scratch(&mut self.buf, &mut self.scratch);
        if self.cut.dim() == 2 {
            let m = self.size;
            transpose(&self.buf, &mut self.tmp, m);
            plan.process_with_scratch(&mut self.tmp, &mut self.scratch);
            transpose(&self.tmp, &mut self.buf, m);
        }
    }

    fn load(&mut self, coeffs: &[Complex64]) {
        self.buf.fill(Complex64::default());
        for (c, &b) in coeffs.iter().zip(&self.bins) {
            self.buf[b] = *c;
        }
    }

    fn store(&self, out: &mut [Complex64]) {
        let norm = 1.0 / self.buf.len() as f64;
        for (o, &b) in out.iter_mut().zip(&self.bins) {
            *o = self.buf[b] * norm;
        }
    }

    /// Real parts of the grid values of `coeffs`.
    pub fn grid_values_into(&mut self, coeffs: &[Complex64], out: &mut Vec<f64>) {
        self.load(coeffs);
        self.transform(true);
        out.clear();
        out.extend(self.buf.iter().map(|z| z.re));
    }

    /// Complex grid values of `coeffs`.
    pub fn complex_values(&mut self, coeffs: &[Complex64]) -> Vec<Complex64> {
        self.load(coeffs);
        self.transform(true);
        self.buf.clone()
    }

    /// Coefficients over the cut of the trigonometric interpolant of `values`.
    pub fn analyze_into(&mut self, values: &[f64], out: &mut [Complex64]) {
        for (b, v) in self.buf.iter_mut().zip(values) {
            *b = Complex64::new(*v, 0.0);
        }
        self.transform(false);
        self.store(out);
    }

    pub fn analyze_complex_into(&mut self, values: &[Complex64], out: &mut [Complex64]) {
        self.buf.copy_from_slice(values);
        self.transform(false);
        self.store(out);
    }

    /// `out = P_K[g(u)]` where `u` is synthesized from `coeffs`.
    pub fn compose_into<G: FnMut(f64) -> f64>(
        &mut self,
        coeffs: &[Complex64],
        mut g: G,
        out: &mut [Complex64],
    ) {
        self.load(coeffs);
        self.transform(true);
        for z in self.buf.iter_mut() {
            *z = Complex64::new(g(z.re), 0.0);
        }
        self.transform(false);
        self.store(out);
    }

    pub fn synthesize(&mut self, f: &SpectralField) -> Result<Grid> {
        self.check(f)?;
        let mut values = Vec::with_capacity(self.buf.len());
        self.grid_values_into(f.coeffs(), &mut values);
        Ok(Grid {
            dim: self.dim(),
            size: self.size,
            values,
        })
    }

    pub fn analyze(&mut self, grid: &Grid) -> Result<SpectralField> {
        if grid.dim != self.dim() || grid.size != self.size {
            return Err(Error::GridMismatch(format!(
                "grid is d={} M={}, collocation is d={} M={}",
                grid.dim,
                grid.size,
                self.dim(),
                self.size
            )));
        }
        let mut out = vec![Complex64::default(); self.cut.len()];
        self.analyze_into(&grid.values, &mut out);
        SpectralField::from_coeffs(self.cut.clone(), out)
    }

    pub fn compose<G: Fn(f64) -> f64>(&mut self, g: G, f: &SpectralField) -> Result<SpectralField> {
        self.check(f)?;
        let mut out = vec![Complex64::default(); self.cut.len()];
        let mut bad = false;
        self.compose_into(
            f.coeffs(),
            |u| {
                let v = g(u);
                bad |= !v.is_finite();
                v
            },
            &mut out,
        );
        if bad {
            return Err(Error::InvalidInput(
                "composed function returned a non-finite value".into(),
            ));
        }
        SpectralField::from_coeffs(self.cut.clone(), out)
    }

    fn check(&self, f: &SpectralField) -> Result<()> {
        if f.cut().same_shape(&self.cut) {
            Ok(())
        } else {
            Err(Error::CutMismatch)
        }
    }

    /// `sup_x |f(x)|` from a grid search refined by Newton steps on the gradient.
    ///
    /// The result never falls below the best grid value.
    pub fn sup_abs(&mut self, f: &SpectralField) -> Result<f64> {
        self.check(f)?;
        let mut values = Vec::new();
        self.grid_values_into(f.coeffs(), &mut values);
        let (best, &grid_max) = values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .ok_or(Error::EmptySample)?;
        let grid_max = grid_max.abs();
        let d = self.dim();
        let start = Grid::point_of(d, self.size, best);
        let mut x = start;
        let h = 1.0 / self.size as f64;
        let mut refined = grid_max;
        for _ in 0..20 {
            let (v, grad, hess) = local_jet(f, &x[..d]);
            refined = refined.max(v.abs());
            let step = if d == 1 {
                if hess[0] == 0.0 {
                    break;
                }
                [-grad[0] / hess[0], 0.0]
            } else {
                let det = hess[0] * hess[3] - hess[1] * hess[2];
                if det == 0.0 {
                    break;
                }
                [
                    -(hess[3] * grad[0] - hess[1] * grad[1]) / det,
                    -(-hess[2] * grad[0] + hess[0] * grad[1]) / det,
                ]
            };
            // stay inside the cell around the grid maximiser
            let mut moved = false;
            for a in 0..d {
                let nx = (x[a] + step[a]).clamp(start[a] - h, start[a] + h);
                moved |= (nx - x[a]).abs() > 1e-15;
                x[a] = nx;
            }
            if !moved {
                break;
            }
        }
        let (v, _, _) = local_jet(f, &x[..d]);
        Ok(refined.max(v.abs()))
    }
}

/// Value, gradient and Hessian (row-major) of the real part of `f` at `x`.
fn local_jet(f: &SpectralField, x: &[f64]) -> (f64, [f64; 2], [f64; 4]) {
    let cut = f.cut();
    let d = cut.dim();
    let mut v = 0.0;
    let mut g = [0.0; 2];
    let mut h = [0.0; 4];
    for (j, c) in f.coeffs().iter().enumerate() {
        let k = cut.freq(j);
        let kx = [2.0 * PI * f64::from(k[0]), 2.0 * PI * f64::from(k[1])];
        let phase: f64 = (0..d).map(|a| kx[a] * x[a]).sum();
        let z = c * Complex64::from_polar(1.0, phase);
        v += z.re;
        for a in 0..d {
            g[a] += (z * Complex64::new(0.0, kx[a])).re;
            for b in 0..d {
                h[a * 2 + b] -= kx[a] * kx[b] * z.re;
            }
        }
    }
    let h = if d == 1 { [h[0], 0.0, 0.0, 0.0] } else { h };
    (v, g, h)
}

fn transpose(src: &[Complex64], dst: &mut [Complex64], m: usize) {
    for i in 0..m {
        for j in 0..m {
            dst[j * m + i] = src[i * m + j];
        }
    }
}

/// Grid values of `f` on `size` points per axis.
pub fn synthesize(f: &SpectralField, size: usize) -> Result<Grid> {
    Collocation::new(f.cut().clone(), size)?.synthesize(f)
}

/// Discrete Fourier coefficients of `grid` restricted to `cut`.
pub fn analyze(grid: &Grid, cut: Arc<FrequencyCut>) -> Result<SpectralField> {
    if grid.dim != cut.dim() {
        return Err(Error::GridMismatch(format!(
            "grid dimension {} does not match cut dimension {}",
            grid.dim,
            cut.dim()
        )));
    }
    Collocation::new(cut, grid.size)?.analyze(grid)
}

/// `P_K[g ∘ f]` by collocation on `size` points per axis.
pub fn pointwise_compose<G: Fn(f64) -> f64>(
    g: G,
    f: &SpectralField,
    size: usize,
) -> Result<SpectralField> {
    Collocation::new(f.cut().clone(), size)?.compose(g, f)
}
