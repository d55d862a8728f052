//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

/// Method-of-lines finite differences for `u_t = u_xx + f(u)` on the unit circle.
///
/// Fourth-order central stencil in space, classical RK4 in time. Returns the
/// grid values at every requested output time (which must be multiples of `dt`).
pub fn fd_reaction_diffusion(
    init: impl Fn(f64) -> f64,
    reaction: impl Fn(f64) -> f64,
    points: usize,
    dt: f64,
    outputs: &[f64],
) -> Vec<Vec<f64>> {
    let h = 1.0 / points as f64;
    let mut u: Vec<f64> = (0..points).map(|i| init(i as f64 * h)).collect();
    let rhs = |u: &[f64], out: &mut [f64]| {
        let n = u.len();
        let c = 1.0 / (12.0 * h * h);
        for i in 0..n {
            let m2 = u[(i + n - 2) % n];
            let m1 = u[(i + n - 1) % n];
            let p1 = u[(i + 1) % n];
            let p2 = u[(i + 2) % n];
            out[i] = c * (-m2 + 16.0 * m1 - 30.0 * u[i] + 16.0 * p1 - p2) + reaction(u[i]);
        }
    };
    let (mut k1, mut k2, mut k3, mut k4) = (
        vec![0.0; points],
        vec![0.0; points],
        vec![0.0; points],
        vec![0.0; points],
    );
    let mut tmp = vec![0.0; points];
    let mut t_steps = 0usize;
    let mut out = Vec::new();
    for &target in outputs {
        let target_steps = (target / dt).round() as usize;
        while t_steps < target_steps {
            rhs(&u, &mut k1);
            for i in 0..points {
                tmp[i] = u[i] + 0.5 * dt * k1[i];
            }
            rhs(&tmp, &mut k2);
            for i in 0..points {
                tmp[i] = u[i] + 0.5 * dt * k2[i];
            }
            rhs(&tmp, &mut k3);
            for i in 0..points {
                tmp[i] = u[i] + dt * k3[i];
            }
            rhs(&tmp, &mut k4);
            for i in 0..points {
                u[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            t_steps += 1;
        }
        out.push(u.clone());
    }
    out
}

/// Exact earth-mover distance between two equal-size point sets on the line,
/// by enumerating every matching.
pub fn brute_force_w1(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = f64::INFINITY;
    permute(&mut perm, 0, &mut |p| {
        let cost: f64 = p
            .iter()
            .enumerate()
            .map(|(i, &j)| (a[i] - b[j]).abs())
            .sum();
        best = best.min(cost / n as f64);
    });
    best
}

fn permute(p: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
    if k == p.len() {
        visit(p);
        return;
    }
    for i in k..p.len() {
        p.swap(k, i);
        permute(p, k + 1, visit);
        p.swap(k, i);
    }
}

/// Transport LP for weighted discrete measures on the line, solved by the
/// north-west corner rule on sorted supports (optimal for convex costs in 1-d)
/// and cross-checked against the CDF integral.
pub fn weighted_w1(a: &[f64], b: &[f64]) -> f64 {
    let mut xa = a.to_vec();
    let mut xb = b.to_vec();
    xa.sort_by(f64::total_cmp);
    xb.sort_by(f64::total_cmp);
    let (wa, wb) = (1.0 / a.len() as f64, 1.0 / b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let (mut ra, mut rb) = (wa, wb);
    let mut cost = 0.0;
    while i < xa.len() && j < xb.len() {
        let m = ra.min(rb);
        cost += m * (xa[i] - xb[j]).abs();
        ra -= m;
        rb -= m;
        if ra <= 1e-15 {
            i += 1;
            ra = wa;
        }
        if rb <= 1e-15 {
            j += 1;
            rb = wb;
        }
    }
    cost
}

pub fn sin2pi(x: f64) -> f64 {
    (2.0 * PI * x).sin()
}

/// Linear least-squares slope of `ys` against `xs`.
pub fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    xs.iter()
        .zip(ys)
        .map(|(x, y)| (x - mx) * (y - my))
        .sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>()
}
