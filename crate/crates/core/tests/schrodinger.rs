mod common;

use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Instant;

use bvmlab_core::forward::{solve_rd, uniform_times, ReactionFunction, SolverConfig, Trajectory};
use bvmlab_core::schrodinger::{
    build_flow_matrix, elliptic_spectrum, kernel_dimension, rough_coords, smoothing_probe,
    solve_linear, stability_lower_probe, LinearPropagator, PotentialPath,
};
use bvmlab_core::spectral::{sobolev_norm, FrequencyCut, SobolevIndex, SpectralField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn base_run(k: i32, horizon: f64, dt: f64) -> (Arc<FrequencyCut>, Trajectory, PotentialPath) {
    let cut = FrequencyCut::shared(1, k).unwrap();
    let theta =
        SpectralField::from_fn(cut.clone(), 128, |x| 1.2 * (2.0 * PI * x[0]).sin()).unwrap();
    let f = ReactionFunction::default();
    let traj = solve_rd(
        &theta,
        &f,
        horizon,
        &SolverConfig {
            dt,
            ..SolverConfig::default()
        },
    )
    .unwrap();
    let path = PotentialPath::from_trajectory(&traj, &f).unwrap();
    (cut, traj, path)
}

fn space_time_l2(a: &Trajectory) -> f64 {
    let t = a.times();
    let sq: Vec<f64> = a.states().iter().map(|s| s.l2_norm_sq()).collect();
    t.windows(2)
        .zip(sq.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
        .sum::<f64>()
        .sqrt()
}

#[test]
fn time_varying_potential_matches_fine_steps() {
    let (cut, _, path) = base_run(16, 0.2, 1.6e-3);
    let h = SpectralField::from_fn(cut.clone(), 64, |x| {
        (4.0 * PI * x[0]).cos() + 0.3 * (2.0 * PI * x[0]).sin()
    })
    .unwrap();
    let coarse = solve_linear(&h, &path, None, 0.2, 1.6e-3).unwrap();
    let fine = solve_linear(&h, &path, None, 0.2, 1e-4).unwrap();
    let (mut num, mut den) = (0.0, 0.0);
    for (t, s) in coarse.times().iter().zip(coarse.states()) {
        let r = fine.state_at(*t).unwrap();
        num += (s - &r).l2_norm_sq();
        den += r.l2_norm_sq();
    }
    let rel = (num / den).sqrt();
    assert!(rel <= 1e-4, "relative deviation {rel:.3e}");
}

#[test]
fn kernel_count_stabilises() {
    let lam1 = 4.0 * PI * PI;
    let mut counts = Vec::new();
    for k in [8, 16, 32] {
        let cut = FrequencyCut::shared(1, k).unwrap();
        let spec = elliptic_spectrum(&SpectralField::constant(cut.clone(), -lam1), &cut).unwrap();
        counts.push(kernel_dimension(&spec, None));
    }
    assert_eq!(counts, vec![2, 2, 2]);
}

#[test]
fn rough_smoothing_ratio_is_stable_in_k() {
    let ratio = |k: i32| {
        let cut = FrequencyCut::shared(1, k).unwrap();
        let path = PotentialPath::constant(&cut, uniform_times(0.2, 0.01), 0.0).unwrap();
        let prop = LinearPropagator::on_path_grid(&path, &cut).unwrap();
        smoothing_probe(&prop, -2.0, 2.0, 0.05, 50, 3).unwrap()
    };
    let (r16, r32) = (ratio(16), ratio(32));
    assert!(r16 > 0.0 && (r32 / r16 - 1.0).abs() <= 0.2, "{r16} {r32}");
}

#[test]
fn stability_floor_for_reaction_potential() {
    let (cut, _, path) = base_run(16, 0.5, 2e-3);
    let flow = build_flow_matrix(&path, &cut).unwrap();
    let probe = stability_lower_probe(&flow, 200, 9).unwrap();
    assert!(probe.exact_min > 1e-3, "{probe:?}");
    assert!(probe.monte_carlo_min >= probe.exact_min * (1.0 - 1e-9));
}

#[test]
fn a_priori_and_forward_smoothing_bounds() {
    let (cut, _, path) = base_run(16, 0.2, 2e-3);
    let prop = LinearPropagator::on_path_grid(&path, &cut).unwrap();
    let c = smoothing_probe(&prop, 0.0, 1.0, 0.02, 40, 17).unwrap();
    assert!(c.is_finite() && c > 0.0);
    // a priori H^a bound with a = 0: sup_t ‖U_h(t)‖_{L²} ≤ e^{T W̄} ‖h‖
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let coords = rough_coords(&cut, 0.0, &mut rng);
    let h = SpectralField::from_zero_mean_coords(cut.clone(), &coords).unwrap();
    let traj = solve_linear(&h, &path, None, 0.2, 2e-3).unwrap();
    let sup = traj
        .states()
        .iter()
        .map(|s| s.l2_norm())
        .fold(0.0, f64::max);
    assert!(sup <= (0.2 * path.wbar()).exp() * h.l2_norm() * (1.0 + 1e-9));
}

#[test]
fn frozen_start_error_is_second_order_in_width() {
    let (cut, _, path) = base_run(16, 0.2, 2.5e-4);
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let coords: Vec<f64> = rough_coords(&cut, 0.0, &mut rng);
    let h = SpectralField::from_zero_mean_coords(cut.clone(), &coords).unwrap();
    let exact = solve_linear(&h, &path, None, 0.2, 2.5e-4).unwrap();
    let err = |eps: f64| {
        let frozen = solve_linear(&h, &path.mollified(eps).unwrap(), None, 0.2, 2.5e-4).unwrap();
        let t = exact.times();
        let sq: Vec<f64> = exact
            .states()
            .iter()
            .zip(frozen.states())
            .map(|(a, b)| {
                sobolev_norm(&(a - b), SobolevIndex::new(1.0))
                    .unwrap()
                    .powi(2)
            })
            .collect();
        t.windows(2)
            .zip(sq.windows(2))
            .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
            .sum::<f64>()
            / h.l2_norm_sq()
    };
    // The bound is c·ε²; the observed decay is faster (ε³ to ε⁴), so test the
    // bound itself: e(ε)/ε² must not grow as ε shrinks.
    let widths = [0.005, 0.0025, 0.00125];
    let errs: Vec<f64> = widths.iter().map(|&e| err(e)).collect();
    for w in errs.windows(2) {
        let factor = w[0] / w[1];
        assert!(factor >= 3.0, "halving factor {factor}");
    }
    let scaled: Vec<f64> = errs.iter().zip(&widths).map(|(e, w)| e / (w * w)).collect();
    assert!(scaled.windows(2).all(|s| s[1] <= s[0]), "{scaled:?}");
}

#[test]
fn linearization_remainder_is_quadratic() {
    let start = Instant::now();
    let (cut, base, path) = base_run(32, 0.5, 1e-3);
    let f = ReactionFunction::default();
    let cfg = SolverConfig::default();
    let theta0 = base.states()[0].clone();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut ratios = Vec::new();
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let coords: Vec<f64> = (1..cut.len())
            .map(|j| {
                rng.sample::<f64, _>(rand_distr::StandardNormal) * cut.eigenvalue(j).powf(-0.5)
            })
            .collect();
        let mut h = SpectralField::from_zero_mean_coords(cut.clone(), &coords).unwrap();
        h = h.scale(0.1 / h.l2_norm());
        let rem = |h: &SpectralField| {
            let pert = solve_rd(&theta0.axpy(1.0, h).unwrap(), &f, 0.5, &cfg).unwrap();
            let lin = solve_linear(h, &path, None, 0.5, 1e-3).unwrap();
            let diff: Vec<SpectralField> = pert
                .states()
                .iter()
                .zip(base.states())
                .zip(lin.states())
                .map(|((p, b), l)| &(p - b) - l)
                .collect();
            space_time_l2(&Trajectory::from_states(base.times().to_vec(), diff).unwrap())
        };
        let r1 = rem(&h);
        let r2 = rem(&h.scale(0.5));
        worst = worst.max(r1 / h.l2_norm_sq());
        ratios.push(r2 / r1);
    }
    eprintln!("remainder ratios {ratios:?}, worst constant {worst}");
    assert!(worst.is_finite());
    assert!(ratios.iter().all(|r| (0.15..=0.35).contains(r)));
    assert!(start.elapsed().as_secs() < 60);
}
