//! Shared fixtures and independent oracles for the integration tests.
//! Each test binary uses its own subset of these helpers.
#![allow(dead_code)]
//!
//! The oracles deliberately avoid the library's solver paths: the robust
//! synthesis oracle is an accelerated projected-gradient method with its
//! own projection bisection, the H-infinity oracle is a dense frequency
//! grid, and the scalar Riccati oracle is the closed-form root.

use kfid::Model;
use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn benchmark_model() -> Model {
    let a = DMatrix::from_row_slice(3, 3, &[0.8, 1.0, 0.0, 0.0, 0.9, 1.0, 0.0, 0.0, 0.9]);
    let c = DMatrix::from_row_slice(1, 3, &[1.0, 0.0, 0.0]);
    let k = DMatrix::from_row_slice(3, 1, &[1.5320, 0.9401, 0.1923]);
    let r = DMatrix::from_row_slice(1, 1, &[10.6414]);
    Model::new(a, c, k, r).unwrap()
}

pub fn scalar_model() -> Model {
    Model::new(
        DMatrix::from_row_slice(1, 1, &[0.6]),
        DMatrix::from_row_slice(1, 1, &[1.0]),
        DMatrix::from_row_slice(1, 1, &[0.2]),
        DMatrix::from_row_slice(1, 1, &[2.0]),
    )
    .unwrap()
}

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// Random matrix rescaled to a prescribed spectral radius.
pub fn random_stable(rng: &mut ChaCha8Rng, n: usize, target_rho: f64) -> DMatrix<f64> {
    loop {
        let m = gaussian_matrix(rng, n, n);
        let rho = kfid::lti::spectral_radius(&m);
        if rho > 1e-6 {
            return m * (target_rho / rho);
        }
    }
}

/// Random model with a stable closed loop `A - KC` of prescribed radius.
pub fn random_closed_loop_model(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Model {
    let rho = rng.gen_range(0.2..0.85);
    let f = random_stable(rng, n, rho);
    let c = gaussian_matrix(rng, m, n);
    let k = gaussian_matrix(rng, n, m) * 0.3;
    let a = &f + &k * &c;
    let half = gaussian_matrix(rng, m, m);
    let r = &half * half.transpose() + DMatrix::identity(m, m) * 0.5;
    Model::new(a, c, k, r).unwrap()
}

/// Closed-form stabilizing solution of the scalar Q-free Riccati equation
/// `p = f^2 p - f^2 p^2 c^2 / (c^2 p + r)` with `f = a - kc`, plus the gain
/// `L = (apc + kr) / (c^2 p + r)`.
pub fn scalar_riccati_oracle(a: f64, c: f64, k: f64, r: f64) -> (f64, f64) {
    let f = a - k * c;
    let p = r * (f * f - 1.0) / (c * c);
    let l = (a * p * c + k * r) / (c * c * p + r);
    (p, l)
}

/// Dense-grid H-infinity oracle: max singular value over `points` equally
/// spaced frequencies on `[0, pi]`.
pub fn hinf_grid_oracle(
    m: &DMatrix<f64>,
    b: &DMatrix<f64>,
    cout: &DMatrix<f64>,
    d: &DMatrix<f64>,
    points: usize,
) -> f64 {
    let mut best = 0.0f64;
    for i in 0..points {
        let theta = std::f64::consts::PI * i as f64 / (points - 1) as f64;
        best = best.max(kfid::lti::frequency_gain(m, b, cout, d, theta));
    }
    best
}

/// Affine maps of the finite-horizon response program in the stacked
/// variable `x = [vec(Phi_v,1); ...; vec(Phi_v,T)]`:
/// objective residual `E1 x + f1` stacks `Phi_w,t K + Phi_v,t` and
/// constraint residual `E2 x + f2` stacks `[Phi_w,t Phi_v,t]`, with
/// `Phi_w,1 = I` and `Phi_w,t+1 = Phi_w,t A + Phi_v,t C`.
pub struct ResponseMaps {
    pub e1: DMatrix<f64>,
    pub f1: DMatrix<f64>,
    pub e2: DMatrix<f64>,
    pub f2: DMatrix<f64>,
    pub dim: usize,
}

fn forward_residuals(model: &Model, x: &DMatrix<f64>, horizon: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let (n, m) = (model.n(), model.m());
    let mut phi_v = Vec::with_capacity(horizon);
    for t in 0..horizon {
        let mut v = DMatrix::<f64>::zeros(n, m);
        for j in 0..m {
            for i in 0..n {
                v[(i, j)] = x[(t * n * m + j * n + i, 0)];
            }
        }
        phi_v.push(v);
    }
    let mut phi_w = Vec::with_capacity(horizon);
    phi_w.push(DMatrix::<f64>::identity(n, n));
    for t in 0..horizon - 1 {
        let next = &phi_w[t] * model.a() + &phi_v[t] * model.c();
        phi_w.push(next);
    }
    let mut obj = DMatrix::<f64>::zeros(horizon * n * m, 1);
    let mut con = DMatrix::<f64>::zeros(horizon * n * (n + m), 1);
    for t in 0..horizon {
        let res = &phi_w[t] * model.k() + &phi_v[t];
        for j in 0..m {
            for i in 0..n {
                obj[(t * n * m + j * n + i, 0)] = res[(i, j)];
            }
        }
        let base = t * n * (n + m);
        for j in 0..n {
            for i in 0..n {
                con[(base + j * n + i, 0)] = phi_w[t][(i, j)];
            }
        }
        for j in 0..m {
            for i in 0..n {
                con[(base + n * n + j * n + i, 0)] = phi_v[t][(i, j)];
            }
        }
    }
    (obj, con)
}

pub fn response_maps(model: &Model, horizon: usize) -> ResponseMaps {
    let (n, m) = (model.n(), model.m());
    let dim = horizon * n * m;
    let zero = DMatrix::<f64>::zeros(dim, 1);
    let (f1, f2) = forward_residuals(model, &zero, horizon);
    let mut e1 = DMatrix::<f64>::zeros(f1.nrows(), dim);
    let mut e2 = DMatrix::<f64>::zeros(f2.nrows(), dim);
    for j in 0..dim {
        let mut probe = DMatrix::<f64>::zeros(dim, 1);
        probe[(j, 0)] = 1.0;
        let (o, c) = forward_residuals(model, &probe, horizon);
        e1.set_column(j, &(&o - &f1).column(0));
        e2.set_column(j, &(&c - &f2).column(0));
    }
    ResponseMaps { e1, f1, e2, f2, dim }
}

impl ResponseMaps {
    /// Smallest achievable constraint norm: the distance from `-f2` to the
    /// column space of `E2`.
    pub fn min_constraint_norm(&self) -> f64 {
        let qr = self.e2.clone().qr();
        let proj = qr.q() * (qr.q().transpose() * &self.f2);
        (&self.f2 - proj).norm()
    }
}

/// Accelerated projected-gradient solution of
/// `min |E1 x + f1|^2  s.t.  |E2 x + f2| <= c`.
///
/// Substituting `u = R x + Q^T f2` (thin QR `E2 = QR`) turns the constraint
/// into a Euclidean ball `|u|^2 <= c^2 - |P_perp f2|^2`, so the projection
/// step is a radial rescale rather than a linear solve.
/// Returns `(objective_norm, constraint_norm)` at the final iterate.
pub fn pg_oracle(model: &Model, c: f64, horizon: usize, iters: usize) -> (f64, f64) {
    let maps = response_maps(model, horizon);
    let qr = maps.e2.clone().qr();
    let q = qr.q();
    let r = qr.r();
    let qt_f2 = q.transpose() * &maps.f2;
    let perp_sq = (&maps.f2 - &q * &qt_f2).norm_squared();
    assert!(
        c * c > perp_sq,
        "oracle instance infeasible: c = {c}, floor = {}",
        perp_sq.sqrt()
    );
    let radius = (c * c - perp_sq).sqrt();

    // objective in u-coordinates: |E1 R^-1 (u - Q^T f2) + f1|^2
    let mut a_u = DMatrix::<f64>::zeros(maps.e1.nrows(), maps.dim);
    for j in 0..maps.dim {
        let mut e = DMatrix::<f64>::zeros(maps.dim, 1);
        e[(j, 0)] = 1.0;
        let col = r
            .solve_upper_triangular(&e)
            .expect("E2 has full column rank");
        a_u.set_column(j, &(&maps.e1 * col).column(0));
    }
    let b_u = {
        let shift = r
            .solve_upper_triangular(&qt_f2)
            .expect("E2 has full column rank");
        &maps.f1 - &maps.e1 * shift
    };
    let gram = a_u.transpose() * &a_u;
    let lin = a_u.transpose() * &b_u;
    let lipschitz = 2.0 * spectral_norm_local(&gram).max(1e-12);
    let step = 1.0 / lipschitz;
    let clamp = |u: &DMatrix<f64>| -> DMatrix<f64> {
        let nrm = u.norm();
        if nrm <= radius {
            u.clone()
        } else {
            u * (radius / nrm)
        }
    };

    let mut u = clamp(&DMatrix::<f64>::zeros(maps.dim, 1));
    let mut y = u.clone();
    let mut t_acc = 1.0f64;
    let mut last = f64::INFINITY;
    let mut stall = 0usize;
    for _ in 0..iters {
        let grad = (&gram * &y + &lin) * 2.0;
        let u_next = clamp(&(&y - &grad * step));
        // adaptive restart: drop momentum when it points uphill
        if grad.dot(&(&u_next - &u)) > 0.0 {
            t_acc = 1.0;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t_acc * t_acc).sqrt());
        y = &u_next + (&u_next - &u) * ((t_acc - 1.0) / t_next);
        u = u_next;
        t_acc = t_next;
        let obj = (&a_u * &u + &b_u).norm();
        if (last - obj).abs() <= 1e-16 * obj.max(1e-8) {
            stall += 1;
            if stall > 500 {
                break;
            }
        } else {
            stall = 0;
        }
        last = obj;
    }
    let obj = (&a_u * &u + &b_u).norm();
    let con = (u.norm_squared() + perp_sq).sqrt();
    (obj, con)
}

fn spectral_norm_local(sym: &DMatrix<f64>) -> f64 {
    sym.clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .cloned()
        .fold(0.0, f64::max)
}
