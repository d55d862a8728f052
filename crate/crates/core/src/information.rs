//! Fisher information of the linearised forward map and the Gaussian limit law.
//!
//! Everything here works on zero-mean real coordinates (constants removed).
//! With `G = MᵀM` the Gram matrix of the flow and `D = diag(−λ_j)`, the
//! information operator is `ℐ = D·G`, efficient directions are
//! `ψ̄ = ℐ⁻¹Dψ = G⁻¹ψ`, and the limit covariance is `C = B̄ᵀGB̄` with
//! `B̄ = ℐ⁻¹D`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, LU};
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::forward::{solve_rd, ReactionFunction, SolverConfig, Trajectory};
use crate::par;
use crate::schrodinger::{build_flow_matrix, sorted_eigen, LinearFlowMatrix, PotentialPath};
use crate::spectral::{FrequencyCut, SpectralField};

/// Condition numbers above this are reported as ill-posed.
pub const MAX_CONDITION: f64 = 1e12;

/// Assembled information operator about `θ0`.
#[derive(Debug, Clone)]
pub struct InfoOperator {
    cut: Arc<FrequencyCut>,
    trajectory: Trajectory,
    path: PotentialPath,
    flow: LinearFlowMatrix,
    gram: DMatrix<f64>,
    script_i: DMatrix<f64>,
    lu: LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    condition: f64,
}

/// `−λ_j` over the zero-mean coordinates.
fn laplacian_diag(cut: &FrequencyCut) -> DVector<f64> {
    DVector::from_iterator(cut.len() - 1, (1..cut.len()).map(|j| -cut.eigenvalue(j)))
}

fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().singular_values();
    let hi = sv.max();
    let lo = sv.min();
    if lo > 0.0 {
        hi / lo
    } else {
        f64::INFINITY
    }
}

/// Solves the forward problem from `theta0`, linearises, and assembles `ℐ`.
pub fn assemble_info(
    theta0: &SpectralField,
    reaction: &ReactionFunction,
    horizon: f64,
    cfg: &SolverConfig,
) -> Result<InfoOperator> {
    if !theta0.is_zero_mean() {
        return Err(Error::NonZeroMean {
            mean: theta0.mean().norm(),
            tol: crate::spectral::ZERO_MEAN_TOL * theta0.l2_norm(),
        });
    }
    let traj = solve_rd(theta0, reaction, horizon, cfg)?;
    let path = PotentialPath::from_trajectory(&traj, reaction)?;
    let flow = build_flow_matrix(&path, theta0.cut())?;
    InfoOperator::from_flow(traj, path, flow)
}

impl InfoOperator {
    pub fn from_flow(
        trajectory: Trajectory,
        path: PotentialPath,
        flow: LinearFlowMatrix,
    ) -> Result<Self> {
        let cut = flow.cut().clone();
        let gram = flow.gram().clone();
        let d = laplacian_diag(&cut);
        let script_i = DMatrix::from_fn(gram.nrows(), gram.ncols(), |r, c| d[r] * gram[(r, c)]);
        let condition = condition_number(&script_i);
        if !condition.is_finite() || condition > MAX_CONDITION {
            return Err(Error::IllPosed { condition });
        }
        let lu = script_i.clone().lu();
        Ok(Self {
            cut,
            trajectory,
            path,
            flow,
            gram,
            script_i,
            lu,
            condition,
        })
    }

    pub fn cut(&self) -> &Arc<FrequencyCut> {
        &self.cut
    }

    pub fn trajectory(&self) -> &Trajectory {
        &self.trajectory
    }

    pub fn path(&self) -> &PotentialPath {
        &self.path
    }

    pub fn flow(&self) -> &LinearFlowMatrix {
        &self.flow
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn script_i(&self) -> &DMatrix<f64> {
        &self.script_i
    }

    pub fn condition(&self) -> f64 {
        self.condition
    }

    pub fn dim(&self) -> usize {
        self.gram.nrows()
    }

    /// `‖G − Gᵀ‖ / ‖G‖` (max norms).
    pub fn symmetry_residual(&self) -> f64 {
        (&self.gram - self.gram.transpose()).amax() / self.gram.amax()
    }

    /// Solves `ℐx = Dψ` in zero-mean coordinates.
    pub fn fisher_inverse_coords(&self, psi: &DVector<f64>) -> Result<DVector<f64>> {
        let d = laplacian_diag(&self.cut);
        let rhs = psi.component_mul(&d);
        self.lu.solve(&rhs).ok_or(Error::Singular {
            condition: self.condition,
        })
    }

    /// `B̄ = ℐ⁻¹D` (columns are `ψ̄` for the unit directions).
    pub fn inverse_directions(&self) -> Result<DMatrix<f64>> {
        let d = laplacian_diag(&self.cut);
        let rhs = DMatrix::from_diagonal(&d);
        self.lu.solve(&rhs).ok_or(Error::Singular {
            condition: self.condition,
        })
    }

    /// High-mode block norms of `G − (−2Δ)⁻¹` relative to `(−2Δ)⁻¹`.
    ///
    /// The block is the top quarter of the zero-mean modes; values well below 1
    /// mark the leading part as `(−2Δ)⁻¹` and the rest as a smoothing perturbation.
    pub fn high_mode_structure(&self) -> StructureCheck {
        let n = self.dim();
        let start = n - n / 4;
        let size = n - start;
        let lead = DMatrix::from_fn(size, size, |r, c| {
            if r == c {
                1.0 / (2.0 * self.cut.eigenvalue(start + r + 1))
            } else {
                0.0
            }
        });
        let block = self.gram.view((start, start), (size, size)).into_owned();
        let lead_norm = lead.amax();
        let diff = spectral_norm(&(&block - &lead));
        let naive = spectral_norm(&(&block - &lead * 2.0));
        StructureCheck {
            relative_to_half_inverse: diff / lead_norm,
            relative_to_inverse: naive / (2.0 * lead_norm),
        }
    }
}

fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    m.clone().singular_values().max()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StructureCheck {
    /// `‖(G − (−2Δ)⁻¹)_{hi}‖ / ‖((−2Δ)⁻¹)_{hi}‖`.
    pub relative_to_half_inverse: f64,
    /// `‖(G − (−Δ)⁻¹)_{hi}‖ / ‖((−Δ)⁻¹)_{hi}‖`.
    pub relative_to_inverse: f64,
}

/// `ψ̄ = ℐ⁻¹Δψ` for a zero-mean field `ψ`.
pub fn fisher_inverse(info: &InfoOperator, psi: &SpectralField) -> Result<SpectralField> {
    if !psi.cut().same_shape(&info.cut) {
        return Err(Error::CutMismatch);
    }
    if !psi.is_zero_mean() {
        return Err(Error::NonZeroMean {
            mean: psi.mean().norm(),
            tol: crate::spectral::ZERO_MEAN_TOL * psi.l2_norm(),
        });
    }
    let x = info.fisher_inverse_coords(&DVector::from_vec(psi.zero_mean_coords()))?;
    SpectralField::from_zero_mean_coords(info.cut.clone(), x.as_slice())
}

/// Centered Gaussian on zero-mean coordinates with covariance `C`.
#[derive(Debug, Clone)]
pub struct LimitGaussian {
    cut: Arc<FrequencyCut>,
    cov: DMatrix<f64>,
    factor: DMatrix<f64>,
    clipped_mass: f64,
}

/// Tail-share diagnostic for `Σ_j λ_j^{−a} C_jj`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SummabilityTrend {
    pub order: f64,
    pub total: f64,
    /// Share of the sum contributed by the upper half of the modes.
    pub tail_share: f64,
}

/// `C = B̄ᵀ G B̄`, symmetrised and repaired to PSD.
pub fn limit_covariance(info: &InfoOperator) -> Result<LimitGaussian> {
    let b = info.inverse_directions()?;
    let c = b.transpose() * info.gram() * &b;
    LimitGaussian::new(info.cut.clone(), c)
}

impl LimitGaussian {
    /// Symmetrises `cov` and clips eigenvalues below zero.
    ///
    /// Fails when an eigenvalue lies below `−1e−12·‖C‖` by more than roundoff
    /// allows (taken as `−1e−8·‖C‖`).
    pub fn new(cut: Arc<FrequencyCut>, cov: DMatrix<f64>) -> Result<Self> {
        if cov.nrows() + 1 != cut.len() || cov.ncols() != cov.nrows() {
            return Err(Error::InvalidInput(
                "covariance size does not match the cut".into(),
            ));
        }
        let sym = (&cov + cov.transpose()) * 0.5;
        let (vals, vecs) = sorted_eigen(sym.clone())?;
        let scale = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let clip_tol = 1e-12 * scale;
        let mut clipped_mass = 0.0;
        let roots: Vec<f64> = vals
            .iter()
            .map(|&v| {
                if v < -clip_tol {
                    clipped_mass += -v;
                }
                v.max(0.0).sqrt()
            })
            .collect();
        if clipped_mass > 1e-8 * scale {
            return Err(Error::NotPsd {
                clipped: clipped_mass,
                tol: 1e-8 * scale,
            });
        }
        let factor = DMatrix::from_fn(vecs.nrows(), vecs.ncols(), |r, c| vecs[(r, c)] * roots[c]);
        let cov = &factor * factor.transpose();
        Ok(Self {
            cut,
            cov,
            factor,
            clipped_mass,
        })
    }

    pub fn cut(&self) -> &Arc<FrequencyCut> {
        &self.cut
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// `L` with `LLᵀ = C`.
    pub fn factor(&self) -> &DMatrix<f64> {
        &self.factor
    }

    pub fn clipped_mass(&self) -> f64 {
        self.clipped_mass
    }

    pub fn dim(&self) -> usize {
        self.cov.nrows()
    }

    /// The same law with covariance multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        Self {
            cut: self.cut.clone(),
            cov: &self.cov * s,
            factor: &self.factor * s.sqrt(),
            clipped_mass: self.clipped_mass * s,
        }
    }

    /// One draw in zero-mean coordinates.
    pub fn sample_with(&self, rng: &mut impl Rng) -> DVector<f64> {
        let g = DVector::from_fn(self.dim(), |_, _| {
            rng.sample::<f64, _>(rand_distr::StandardNormal)
        });
        &self.factor * g
    }

    /// `n` draws; draw `i` uses stream `i` of `seed`.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<DVector<f64>> {
        par::map_indexed(n, |i| {
            self.sample_with(&mut par::stream_rng(seed, i as u64))
        })
    }

    pub fn summability(&self, order: f64) -> SummabilityTrend {
        let terms: Vec<f64> = (0..self.dim())
            .map(|j| self.cut.eigenvalue(j + 1).powf(-order) * self.cov[(j, j)])
            .collect();
        let total: f64 = terms.iter().sum();
        let tail: f64 = terms[terms.len() / 2..].iter().sum();
        SummabilityTrend {
            order,
            total,
            tail_share: tail / total,
        }
    }

    /// Smallest order on a 0.25 grid in `[0, 6]` whose tail share is below 5%.
    pub fn sobolev_order_check(&self) -> Option<f64> {
        (0..=24)
            .map(|i| i as f64 * 0.25)
            .find(|&a| self.summability(a).tail_share <= 0.05)
    }

    /// Draws `ϑ ∼ N(0, C)` and propagates them through the linear flow.
    pub fn sample_process(
        &self,
        flow: &LinearFlowMatrix,
        n: usize,
        seed: u64,
    ) -> Result<Vec<Trajectory>> {
        if !flow.cut().same_shape(&self.cut) {
            return Err(Error::CutMismatch);
        }
        let draws = self.sample(n, seed);
        par::try_map_indexed(n, |i| {
            let states = (0..flow.times().len())
                .map(|k| {
                    let u = flow.grid_states(k) * &draws[i];
                    SpectralField::from_real_coords(self.cut.clone(), u.as_slice())
                })
                .collect::<Result<Vec<_>>>()?;
            Trajectory::from_states(flow.times().to_vec(), states)
        })
    }
}

/// `n` limit-process paths for `lim` under the flow `flow`.
pub fn sample_limit_process(
    lim: &LimitGaussian,
    flow: &LinearFlowMatrix,
    n: usize,
    seed: u64,
) -> Result<Vec<Trajectory>> {
    lim.sample_process(flow, n, seed)
}
