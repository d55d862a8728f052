mod common;

use std::f64::consts::PI;

use bvmlab_core::forward::{
    pde_residual, regularity_report, solve_rd, sup_l2_distance, sup_linf_distance,
    ReactionFunction, SolverConfig,
};
use bvmlab_core::spectral::{sobolev_norm, FrequencyCut, SobolevIndex, SpectralField};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sine_start(k: i32) -> SpectralField {
    let cut = FrequencyCut::shared(1, k).unwrap();
    SpectralField::from_fn(cut, 128, |x| 0.5 * (2.0 * PI * x[0]).sin()).unwrap()
}

fn random_theta(k: i32, seed: u64, scale: f64) -> SpectralField {
    let cut = FrequencyCut::shared(1, k).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coords: Vec<f64> = (0..cut.len())
        .map(|j| {
            if j == 0 {
                0.0
            } else {
                let g: f64 = rng.sample(rand_distr::StandardNormal);
                scale * g * cut.eigenvalue(j).powf(-1.0)
            }
        })
        .collect();
    SpectralField::from_real_coords(cut, &coords).unwrap()
}

#[test]
fn nonlinear_run_matches_finite_differences() {
    let theta = sine_start(32);
    let f = ReactionFunction::default();
    let traj = solve_rd(&theta, &f, 0.1, &SolverConfig::default()).unwrap();
    let outputs = [0.02, 0.05, 0.1];
    let oracle = common::fd_reaction_diffusion(
        |x| 0.5 * common::sin2pi(x),
        |u| f.value(u),
        512,
        1e-6,
        &outputs,
    );
    let (mut num, mut den) = (0.0, 0.0);
    for (t, vals) in outputs.iter().zip(&oracle) {
        for (i, v) in vals.iter().enumerate() {
            let x = i as f64 / 512.0;
            let u = traj.evaluate(*t, &[x]).unwrap();
            num += (u - v).powi(2);
            den += v * v;
        }
    }
    let rel = (num / den).sqrt();
    assert!(rel <= 1e-5, "relative L2 deviation {rel:.3e}");

    // H² sup norm from the oracle's grid values via a spectral fit
    let rep = regularity_report(&traj, &[2.0]).unwrap();
    let cut = theta.cut().clone();
    let fd_sup = oracle
        .iter()
        .map(|vals| {
            let g = bvmlab_core::spectral::Grid {
                dim: 1,
                size: 512,
                values: vals.clone(),
            };
            let field = bvmlab_core::spectral::analyze(&g, cut.clone()).unwrap();
            sobolev_norm(&field, SobolevIndex::new(2.0)).unwrap()
        })
        .fold(0.0, f64::max);
    // the oracle is sampled after t = 0, so compare against the solver's sup over the same times
    let solver_sup = outputs
        .iter()
        .map(|&t| sobolev_norm(&traj.state_at(t).unwrap(), SobolevIndex::new(2.0)).unwrap())
        .fold(0.0, f64::max);
    assert!(rep[0].sup_norm.is_finite() && rep[0].sup_norm >= solver_sup);
    assert!((solver_sup - fd_sup).abs() <= 0.05 * fd_sup);
}

#[test]
fn residual_is_second_order() {
    let theta = sine_start(16);
    let f = ReactionFunction::default();
    let t_probe = 0.05;
    let residual_at = |dt: f64| {
        let traj = solve_rd(
            &theta,
            &f,
            0.1,
            &SolverConfig {
                dt,
                ..SolverConfig::default()
            },
        )
        .unwrap();
        let n = (t_probe / dt).round() as usize;
        pde_residual(&traj, &f, n, None).unwrap()
    };
    let (r1, r2) = (residual_at(2e-3), residual_at(1e-3));
    let ratio = r1 / r2;
    assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
}

#[test]
fn lipschitz_constant_is_stable_under_refinement() {
    let f = ReactionFunction::default();
    let measure = |dt: f64| {
        let cfg = SolverConfig {
            dt,
            ..SolverConfig::default()
        };
        let mut worst: f64 = 0.0;
        for s in 0..5 {
            let a = random_theta(16, 2 * s, 5.0);
            let b = random_theta(16, 2 * s + 1, 5.0);
            let ua = solve_rd(&a, &f, 0.2, &cfg).unwrap();
            let ub = solve_rd(&b, &f, 0.2, &cfg).unwrap();
            worst = worst.max(sup_l2_distance(&ua, &ub).unwrap() / (&a - &b).l2_norm());
        }
        worst
    };
    let (c1, c2) = (measure(2e-3), measure(1e-3));
    assert!(c1.is_finite() && c1 <= (0.2 * f.lipschitz_bound()).exp() * (1.0 + 1e-9));
    assert!((c1 - c2).abs() <= 0.01 * c2);
}

#[test]
fn sup_norm_stability_in_h1() {
    let f = ReactionFunction::default();
    let cfg = SolverConfig::default();
    let mut worst: f64 = 0.0;
    for s in 0..5 {
        let a = random_theta(16, 100 + 2 * s, 5.0);
        let b = random_theta(16, 101 + 2 * s, 5.0);
        let ua = solve_rd(&a, &f, 0.2, &cfg).unwrap();
        let ub = solve_rd(&b, &f, 0.2, &cfg).unwrap();
        let d = sup_linf_distance(&ua, &ub, 128).unwrap();
        worst = worst.max(d / sobolev_norm(&(&a - &b), SobolevIndex::new(1.0)).unwrap());
    }
    // Sobolev embedding constant for H¹(𝕋) ↪ L∞ times the flow growth
    assert!(worst.is_finite() && worst < 2.0, "{worst}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]
    #[test]
    fn heat_flow_is_diagonal(seed in 0u64..10_000) {
        let theta = random_theta(8, seed, 1.0);
        let traj = solve_rd(&theta, &ReactionFunction::Zero, 0.05, &SolverConfig::default()).unwrap();
        let cut = theta.cut();
        for (t, s) in traj.times().iter().zip(traj.states()) {
            for j in 0..cut.len() {
                let expected = theta.coeff(j) * (-cut.eigenvalue(j) * t).exp();
                prop_assert!((s.coeff(j) - expected).norm() <= 1e-13);
            }
            prop_assert!((s.mean() - theta.mean()).norm() <= 1e-15);
        }
    }
}
