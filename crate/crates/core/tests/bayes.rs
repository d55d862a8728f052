use std::sync::Arc;

use bvmlab_core::bayes::*;
use bvmlab_core::forward::{solve_rd, ReactionFunction, SolverConfig, Trajectory};
use bvmlab_core::information::{assemble_info, InfoOperator};
use bvmlab_core::spectral::{FrequencyCut, SpectralField};
use bvmlab_core::Error;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn solver() -> SolverConfig {
    SolverConfig {
        dt: 1e-2,
        ..SolverConfig::default()
    }
}

fn truth(k: i32, coords: &[f64]) -> (Arc<FrequencyCut>, SpectralField) {
    let cut = FrequencyCut::shared(1, k).unwrap();
    let mut c = vec![0.0; cut.len() - 1];
    c[..coords.len()].copy_from_slice(coords);
    let theta = SpectralField::from_zero_mean_coords(cut.clone(), &c).unwrap();
    (cut, theta)
}

fn var(v: &[f64]) -> f64 {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
}

#[test]
fn prior_coefficients_on_the_two_torus() {
    let cut = FrequencyCut::shared(2, 3).unwrap();
    let prior = PriorSpec::new(3.0, 500, cut.clone()).unwrap();
    assert!(PriorSpec::new(2.0, 500, cut.clone()).is_err());
    let draws: Vec<Vec<f64>> = (0..10_000)
        .map(|s| sample_prior(&prior, s).zero_mean_coords())
        .collect();
    let vars = prior.coord_vars();
    for a in [0, 1, 5] {
        let col: Vec<f64> = draws.iter().map(|d| d[a]).collect();
        let mean = col.iter().sum::<f64>() / col.len() as f64;
        assert!(mean.abs() <= 4.0 * (vars[a] / 1e4).sqrt());
        assert!((var(&col) / vars[a] - 1.0).abs() <= 0.1, "coordinate {a}");
    }
}

#[test]
fn design_and_noise_moments() {
    let (_, theta) = truth(8, &[0.2, -0.1, 0.05]);
    let f = ReactionFunction::default();
    let n = 4000;
    let data = simulate_data(&theta, &f, n, 0.5, &solver(), 5).unwrap();
    let traj = solve_rd(&theta, &f, 0.5, &solver()).unwrap();
    let mean_t = data.records().iter().map(|r| r.t).sum::<f64>() / n as f64;
    assert!((mean_t - 0.25).abs() <= 4.0 * 0.5 / (12.0 * n as f64).sqrt());
    let res: Vec<f64> = data
        .records()
        .iter()
        .enumerate()
        .map(|(i, r)| r.y - traj.evaluate(r.t, data.point(i)).unwrap())
        .collect();
    let v = var(&res);
    let band = 5.0 / (n as f64).sqrt();
    assert!(
        (1.0 - band..=1.0 + band).contains(&v),
        "residual variance {v}"
    );
    assert!(data
        .records()
        .iter()
        .all(|r| (0.0..=0.5).contains(&r.t) && (0.0..1.0).contains(&r.x[0])));
}

fn naive_loglik(traj: &Trajectory, data: &Dataset) -> f64 {
    data.records()
        .iter()
        .enumerate()
        .map(|(i, r)| -0.5 * (r.y - traj.evaluate(r.t, data.point(i)).unwrap()).powi(2))
        .sum()
}

#[test]
fn likelihood_matches_naive_summation() {
    let (cut, theta) = truth(8, &[0.2, -0.1, 0.05, 0.02]);
    let f = ReactionFunction::default();
    let data = simulate_data(&theta, &f, 1000, 0.5, &solver(), 9).unwrap();
    let other =
        SpectralField::from_zero_mean_coords(cut.clone(), &vec![0.01; cut.len() - 1]).unwrap();
    for th in [&theta, &other] {
        let ll = log_likelihood(th, &data, &f, &solver()).unwrap();
        let naive = naive_loglik(&solve_rd(th, &f, 0.5, &solver()).unwrap(), &data);
        assert!(
            (ll - naive).abs() <= 1e-12 * naive.abs().max(1.0),
            "{ll} vs {naive}"
        );
    }
}

#[test]
fn noiseless_fit_and_additivity() {
    let (_, theta) = truth(8, &[0.2, -0.1]);
    let f = ReactionFunction::default();
    let traj = solve_rd(&theta, &f, 0.5, &solver()).unwrap();
    let clean = simulate_from_trajectory(&traj, &theta, 300, 0.0, 2).unwrap();
    assert!(log_likelihood(&theta, &clean, &f, &solver()).unwrap().abs() < 1e-24);

    let noisy = simulate_from_trajectory(&traj, &theta, 300, 1.0, 2).unwrap();
    let base = log_likelihood(&theta, &noisy.truncated(299), &f, &solver()).unwrap();
    let full = log_likelihood(&theta, &noisy, &f, &solver()).unwrap();
    let last = noisy.records()[299];
    let r = last.y - traj.evaluate(last.t, &last.x[..1]).unwrap();
    assert!((full - base + 0.5 * r * r).abs() < 1e-10);
}

#[test]
fn pcn_preserves_the_prior_without_data() {
    let cut = FrequencyCut::shared(1, 4).unwrap();
    let prior = PriorSpec::new(2.0, 100, cut.clone()).unwrap();
    let cfg = PcnConfig {
        steps: 100_000,
        burn_in: 1_000,
        beta: Some(0.3),
        thin: 1,
        seed: 4,
        ..PcnConfig::default()
    };
    let chain = run_pcn(&NoData::new(cut.clone()), &prior, &cfg).unwrap();
    assert_eq!(chain.acceptance, 1.0);
    for (a, v) in prior.coord_vars().iter().enumerate() {
        let s = var(&chain.coordinate(a));
        assert!((s / v - 1.0).abs() <= 0.1, "coordinate {a}: {s} vs {v}");
    }
    let again = run_pcn(&NoData::new(cut), &prior, &cfg).unwrap();
    assert_eq!(chain.states, again.states);
}

/// Linear Gaussian likelihood with a strong design, so the data dominate the prior.
struct StrongLinear {
    cut: Arc<FrequencyCut>,
    design: DMatrix<f64>,
    y: DVector<f64>,
}

impl LogLikelihood for StrongLinear {
    fn cut(&self) -> &Arc<FrequencyCut> {
        &self.cut
    }

    fn eval(&self, theta: &SpectralField) -> bvmlab_core::Result<f64> {
        let r = &self.y - &self.design * DVector::from_vec(theta.zero_mean_coords());
        Ok(-0.5 * r.norm_squared())
    }
}

#[test]
fn pcn_matches_conjugate_posterior_when_data_dominate() {
    let cut = FrequencyCut::shared(1, 2).unwrap();
    let prior = PriorSpec::new(2.0, 100, cut.clone()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let sds = prior.coord_sds();
    let design = DMatrix::from_fn(40, 4, |_, c| {
        rng.sample::<f64, _>(rand_distr::StandardNormal) / sds[c] * 0.5
    });
    let y = DVector::from_fn(40, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
    let exact = ConjugateGaussian::linear_model(&design, &y, &prior.coord_vars()).unwrap();
    let lik = StrongLinear {
        cut: cut.clone(),
        design,
        y,
    };
    let cfg = PcnConfig {
        steps: 200_000,
        burn_in: 10_000,
        thin: 1,
        seed: 8,
        ..PcnConfig::default()
    };
    let chain = run_pcn(&lik, &prior, &cfg).unwrap();
    assert!(
        (0.1..=0.5).contains(&chain.acceptance),
        "acceptance {}",
        chain.acceptance
    );
    let mean = posterior_mean(&chain, &cut).unwrap();
    let sd = exact.sd();
    for (a, sd_a) in sd.iter().enumerate() {
        assert!(
            (mean.coords[a] - exact.mean[a]).abs() <= 3.0 * mean.se[a],
            "coordinate {a}: {} vs {} (se {})",
            mean.coords[a],
            exact.mean[a],
            mean.se[a]
        );
        let sq: Vec<f64> = chain
            .coordinate(a)
            .iter()
            .map(|v| (v - mean.coords[a]).powi(2))
            .collect();
        let v = sq.iter().sum::<f64>() / sq.len() as f64;
        assert!(
            (v - sd_a * sd_a).abs() <= 3.0 * batch_means_se(&sq),
            "variance {a}"
        );
    }
}

fn constant_chain(coords: &[f64], n: usize) -> PosteriorChain {
    PosteriorChain {
        states: vec![coords.to_vec(); n],
        loglik: vec![0.0; n],
        acceptance: 0.25,
        beta: 0.5,
        burn_in: 0,
        thin: 1,
        seed: 0,
        failed_solves: 0,
        warnings: Vec::new(),
    }
}

#[test]
fn summaries_of_constant_and_linear_chains() {
    let cut = FrequencyCut::shared(1, 3).unwrap();
    let c = [0.1, -0.2, 0.3, 0.0, 0.05, 0.0];
    let mean = posterior_mean(&constant_chain(&c, 50), &cut).unwrap();
    for (m, v) in mean.coords.iter().zip(c) {
        assert!((m - v).abs() < 1e-14);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut chain = constant_chain(&c, 200);
    for s in chain.states.iter_mut() {
        s.iter_mut().for_each(|v| *v = rng.random::<f64>());
    }
    let p1 =
        SpectralField::from_zero_mean_coords(cut.clone(), &[1.0, 0.0, 0.5, 0.0, 0.0, 2.0]).unwrap();
    let p2 = SpectralField::from_zero_mean_coords(cut.clone(), &[0.0, 3.0, -1.0, 0.0, 1.0, 0.0])
        .unwrap();
    let sum = posterior_functional(&chain, &(&p1 + &p2)).unwrap();
    let a = posterior_functional(&chain, &p1).unwrap();
    let b = posterior_functional(&chain, &p2).unwrap();
    for i in 0..sum.len() {
        assert!((sum[i] - a[i] - b[i]).abs() < 1e-12);
    }
}

#[test]
fn band_edge_cases() {
    let (cut, theta) = truth(4, &[0.1, 0.05]);
    let f = ReactionFunction::default();
    let data = simulate_data(&theta, &f, 200, 0.5, &solver(), 3).unwrap();
    let lik = ForwardLikelihood::new(&data, cut.clone(), f, solver()).unwrap();
    let cfg = BandConfig {
        grid_size: 16,
        max_draws: 40,
        ..BandConfig::default()
    };

    let flat = constant_chain(&theta.zero_mean_coords(), 40);
    let band = credible_band(std::slice::from_ref(&flat), &lik, &cfg).unwrap();
    assert!(band.radius < 1e-14, "{}", band.radius);
    assert!(band.contains(&lik.solve(&theta).unwrap()).unwrap());

    let prior = PriorSpec::new(2.0, 200, cut.clone()).unwrap();
    let spread = run_pcn(
        &lik,
        &prior,
        &PcnConfig {
            steps: 400,
            burn_in: 100,
            thin: 10,
            seed: 1,
            ..PcnConfig::default()
        },
    )
    .unwrap();
    let mut radii = Vec::new();
    for alpha in [0.1, 0.5, 0.9, 0.99] {
        let band = credible_band(
            std::slice::from_ref(&spread),
            &lik,
            &BandConfig { alpha, ..cfg },
        )
        .unwrap();
        // the radius is the linearly interpolated (1 - alpha) order statistic anchored at 0
        let mut d = band.sup_draws.clone();
        d.sort_by(f64::total_cmp);
        assert_eq!(d.len(), spread.len());
        let pos = (1.0 - alpha) * d.len() as f64;
        let i = pos.floor() as usize;
        let lo = if i == 0 { 0.0 } else { d[i - 1] };
        assert!((band.radius - (lo + (pos - i as f64) * (d[i] - lo))).abs() < 1e-15);
        radii.push(band.radius);
    }
    assert!(radii.windows(2).all(|w| w[1] <= w[0]), "{radii:?}");
    let too_few = BandConfig { alpha: 0.01, ..cfg };
    assert!(matches!(
        credible_band(std::slice::from_ref(&spread), &lik, &too_few),
        Err(Error::TooFewDraws {
            needed: 100,
            got: 40
        })
    ));
}

fn heat_setup() -> (SpectralField, InfoOperator) {
    let (_, theta) = truth(8, &[0.3, 0.1, -0.2, 0.05]);
    let info = assemble_info(&theta, &ReactionFunction::Zero, 0.5, &solver()).unwrap();
    (theta, info)
}

#[test]
fn efficient_estimator_is_exact_without_noise() {
    let (theta, info) = heat_setup();
    let clean = simulate_from_trajectory(info.trajectory(), &theta, 200, 0.0, 1).unwrap();
    let est = efficient_estimator(&clean, &info, 3).unwrap();
    let mut expect = theta.zero_mean_coords();
    expect[3..].iter_mut().for_each(|v| *v = 0.0);
    assert_eq!(est.zero_mean_coords(), expect);

    let anon = Dataset::new(clean.records().to_vec(), 1, 0.5, 0.0, 1).unwrap();
    assert!(matches!(
        efficient_estimator(&anon, &info, 3),
        Err(Error::MissingTruth)
    ));
}

#[test]
fn efficient_estimator_mean_and_variance() {
    let (theta, info) = heat_setup();
    let n = 400;
    let reps = 500;
    let b = info.inverse_directions().unwrap();
    let jz = b.nrows();
    let mut z: [Vec<f64>; 2] = Default::default();
    for r in 0..reps {
        let data =
            simulate_from_trajectory(info.trajectory(), &theta, n, 1.0, 1000 + r as u64).unwrap();
        let est = efficient_estimator(&data, &info, jz)
            .unwrap()
            .zero_mean_coords();
        let base = theta.zero_mean_coords();
        for (a, za) in z.iter_mut().enumerate() {
            za.push((n as f64).sqrt() * (est[a] - base[a]));
        }
    }
    for (a, za) in z.iter().enumerate() {
        let col = b.column(a);
        let target = 0.5 * col.dot(&(info.gram() * col));
        let mean = za.iter().sum::<f64>() / reps as f64;
        assert!(
            mean.abs() <= 4.0 * (target / reps as f64).sqrt(),
            "mean {mean}"
        );
        let ratio = var(za) / target;
        assert!(
            (0.85..=1.15).contains(&ratio),
            "coordinate {a}: variance ratio {ratio}"
        );
    }
}

#[test]
fn contraction_schedule_exponent() {
    let s = ContractionSchedule::new(4.0, 3.0, 3.0, 1, &[250, 4000]).unwrap();
    assert!(s.values.iter().all(|v| (v - 1.0).abs() < 1e-15));
    assert!(ContractionSchedule::new(4.0, 3.0, 3.5, 1, &[250]).is_err());
}
