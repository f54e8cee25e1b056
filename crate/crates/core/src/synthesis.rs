//! Filter synthesis from estimated parameters.
//!
//! Two routes: the certainty-equivalent static gain via the Riccati equation
//! with correlation terms, and the robust filter via a finite-horizon convex
//! program over the closed-loop FIR responses with an H2 magnitude
//! constraint, solved by Lagrange-multiplier bisection over ridge-regularized
//! least squares.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::lti::{h2_norm, hinf_norm, spectral_norm, spectral_radius, tau_decay, Model};
use crate::sysid::observability_matrix;

/// Result of certainty-equivalent gain synthesis.
#[derive(Debug, Clone)]
pub struct CeResult {
    /// Stabilizing Riccati solution (zero on the trivial branch).
    pub p: DMatrix<f64>,
    pub l_ce: DMatrix<f64>,
    pub closed_loop_rho: f64,
    pub branch: CeBranch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CeBranch {
    /// `rho(A - KC) < 1`: `P = 0`, `L = K`.
    StableTrivial,
    /// Unstable `A - KC`: stabilizing solution found by iteration.
    UnstableSolved,
}

/// Finite-horizon closed-loop response pair `{Phi_w,t}, {Phi_v,t}`, t = 1..T.
///
/// Strictly proper by construction (no t = 0 coefficient is stored), with
/// `Phi_w,1 = I` and `Phi_w,t+1 = Phi_w,t A + Phi_v,t C` for t < T.
#[derive(Debug, Clone, PartialEq)]
pub struct FirResponse {
    pub phi_w: Vec<DMatrix<f64>>,
    pub phi_v: Vec<DMatrix<f64>>,
}

impl FirResponse {
    pub fn horizon(&self) -> usize {
        self.phi_w.len()
    }

    /// `sqrt(sum_t |[Phi_w,t Phi_v,t]|_F^2)`, exact for FIR responses.
    pub fn stacked_h2(&self) -> f64 {
        let sum: f64 = self
            .phi_w
            .iter()
            .zip(&self.phi_v)
            .map(|(w, v)| w.norm_squared() + v.norm_squared())
            .sum();
        sum.sqrt()
    }

    /// Frobenius norm of the dropped terminal recursion term
    /// `Phi_w,T A + Phi_v,T C`; reported as the truncation tail estimate.
    pub fn truncation_tail(&self, model_hat: &Model) -> f64 {
        let t = self.horizon();
        (&self.phi_w[t - 1] * model_hat.a() + &self.phi_v[t - 1] * model_hat.c()).norm()
    }
}

/// Robust FIR output-to-state predictor recovered from the responses.
#[derive(Debug, Clone)]
pub struct RobustFilter {
    /// Convolution coefficients `g_t = -Phi_v,t`, t = 1..T.
    pub coeffs: Vec<DMatrix<f64>>,
    /// Achieved `|Phi_w K + Phi_v|_H2`.
    pub objective_value: f64,
    /// `|[Phi_w Phi_v]|_H2` at the solution.
    pub constraint_norm: f64,
}

/// Certainty-equivalent gain via the Riccati equation with correlation terms
/// `Q = K R K^T`, `S = K R`.
///
/// When `rho(A - KC) < 1` the stabilizing solution is `P = 0` and `L = K`
/// directly. Otherwise the equivalent Q-free Riccati map is iterated to its
/// stabilizing fixed point. Unit-circle eigenvalues of `A - KC` admit no
/// stabilizing solution.
pub fn ce_synthesize(model_hat: &Model) -> Result<CeResult> {
    let n = model_hat.n();
    let obs = observability_matrix(model_hat.a(), model_hat.c(), n);
    let sv = obs.svd(false, false).singular_values;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    if sv.iter().cloned().fold(f64::INFINITY, f64::min) <= 1e-10 * smax.max(1.0) {
        return Err(Error::UnobservableEstimate);
    }

    let f_cl = model_hat.closed_loop();
    let unit_circle = f_cl
        .complex_eigenvalues()
        .iter()
        .any(|z| (z.norm() - 1.0).abs() < 1e-6);
    if unit_circle {
        return Err(Error::NoStabilizingSolution);
    }
    let rho_cl = spectral_radius(&f_cl);
    if rho_cl < 1.0 - 1e-9 {
        return Ok(CeResult {
            p: DMatrix::zeros(n, n),
            l_ce: model_hat.k().clone(),
            closed_loop_rho: rho_cl,
            branch: CeBranch::StableTrivial,
        });
    }

    // Q-free form: P = F P F^T - F P C^T (C P C^T + R)^{-1} C P F^T, F = A - KC.
    let q_hat = model_hat.k() * model_hat.r() * model_hat.k().transpose();
    let mut p = if spectral_radius(model_hat.a()) < 1.0 {
        crate::lti::lyapunov_solve(model_hat.a(), &q_hat)?
    } else {
        DMatrix::identity(n, n)
    };
    let max_iters = 100_000usize;
    let mut residual = f64::INFINITY;
    for _ in 0..max_iters {
        let cpc = model_hat.c() * &p * model_hat.c().transpose() + model_hat.r();
        let cpc_inv = cpc
            .clone()
            .cholesky()
            .ok_or(Error::NoStabilizingSolution)?
            .inverse();
        let fpc = &f_cl * &p * model_hat.c().transpose();
        let next = &f_cl * &p * f_cl.transpose() - &fpc * &cpc_inv * fpc.transpose();
        let next = (&next + next.transpose()) * 0.5;
        residual = (&next - &p).norm();
        let done = residual <= 1e-10 * (1.0 + p.norm());
        p = next;
        if done {
            let s_hat = model_hat.k() * model_hat.r();
            let denom = model_hat.c() * &p * model_hat.c().transpose() + model_hat.r();
            let denom_inv = denom
                .cholesky()
                .ok_or(Error::NoStabilizingSolution)?
                .inverse();
            let l_ce = (model_hat.a() * &p * model_hat.c().transpose() + s_hat) * denom_inv;
            let rho = spectral_radius(&(model_hat.a() - &l_ce * model_hat.c()));
            if rho >= 1.0 {
                return Err(Error::NoStabilizingSolution);
            }
            return Ok(CeResult {
                p,
                l_ce,
                closed_loop_rho: rho,
                branch: CeBranch::UnstableSolved,
            });
        }
    }
    Err(Error::RiccatiNonConvergence {
        iters: max_iters,
        residual,
    })
}

/// Truncated closed-loop responses induced by a static gain `L`:
/// `Phi_w,t = (A - LC)^{t-1}`, `Phi_v,t = -Phi_w,t L`.
pub fn fir_response_from_gain(model_hat: &Model, gain: &DMatrix<f64>, horizon: usize) -> FirResponse {
    let n = model_hat.n();
    let acl = model_hat.a() - gain * model_hat.c();
    let mut phi_w = Vec::with_capacity(horizon);
    let mut phi_v = Vec::with_capacity(horizon);
    let mut w = DMatrix::<f64>::identity(n, n);
    for _ in 0..horizon {
        phi_v.push(-(&w * gain));
        phi_w.push(w.clone());
        w = &w * &acl;
    }
    FirResponse { phi_w, phi_v }
}

/// Solves the finite-horizon robust synthesis problem
///
/// ```text
/// min  |Phi_w K + Phi_v|_H2   s.t.  |[Phi_w Phi_v]|_H2 <= C,
///      Phi_w,1 = I,  Phi_w,t+1 = Phi_w,t A + Phi_v,t C
/// ```
///
/// `Phi_w` is eliminated through the recursion so the free variables are the
/// `Phi_v,t` coefficients; the constrained least-squares problem is solved by
/// bisecting on the Lagrange multiplier of the squared constraint.
pub fn sls_synthesize(
    model_hat: &Model,
    c_reg: f64,
    horizon: usize,
) -> Result<(FirResponse, RobustFilter)> {
    if c_reg <= 0.0 {
        return Err(Error::InvalidArgument(
            "regularization parameter must be positive".into(),
        ));
    }
    if horizon < 2 {
        return Err(Error::InvalidArgument("horizon must be >= 2".into()));
    }
    let n = model_hat.n();
    let m = model_hat.m();
    let dim = horizon * n * m;

    // Affine maps phi -> objective residual and phi -> constraint residual,
    // built by probing the recursion with unit coefficients.
    let zero_phi = vec![DMatrix::<f64>::zeros(n, m); horizon];
    let c1 = objective_vector(model_hat, &zero_phi, horizon);
    let c2 = constraint_vector(model_hat, &zero_phi, horizon);
    let rows1 = c1.len();
    let rows2 = c2.len();
    let mut a1 = DMatrix::<f64>::zeros(rows1, dim);
    let mut a2 = DMatrix::<f64>::zeros(rows2, dim);
    let mut probe = vec![DMatrix::<f64>::zeros(n, m); horizon];
    for t in 0..horizon {
        for j in 0..m {
            for i in 0..n {
                probe[t][(i, j)] = 1.0;
                let o = objective_vector(model_hat, &probe, horizon) - &c1;
                let g = constraint_vector(model_hat, &probe, horizon) - &c2;
                let col = t * n * m + j * n + i;
                a1.set_column(col, &o);
                a2.set_column(col, &g);
                probe[t][(i, j)] = 0.0;
            }
        }
    }

    let a1t_a1 = a1.transpose() * &a1;
    let a2t_a2 = a2.transpose() * &a2;
    let a1t_c1 = a1.transpose() * &c1;
    let a2t_c2 = a2.transpose() * &c2;

    let solve = |lambda: f64| -> Result<DVector<f64>> {
        let lhs = &a1t_a1 + &a2t_a2 * lambda;
        let rhs = -(&a1t_c1 + &a2t_c2 * lambda);
        lhs.cholesky()
            .map(|ch| ch.solve(&rhs))
            .ok_or(Error::InvalidArgument("ill-conditioned SLS system".into()))
    };
    let constraint_at = |phi: &DVector<f64>| (&a2 * phi + &c2).norm();
    let objective_at = |phi: &DVector<f64>| (&a1 * phi + &c1).norm();

    // unconstrained minimizer first
    let phi0 = solve(0.0)?;
    let tol = 1e-10 * c_reg;
    let phi = if constraint_at(&phi0) <= c_reg * (1.0 + 1e-6) {
        phi0
    } else {
        // feasibility: minimum achievable constraint norm
        let phi_min = a2t_a2
            .clone()
            .cholesky()
            .map(|ch| ch.solve(&(-&a2t_c2)))
            .ok_or(Error::InvalidArgument("ill-conditioned SLS system".into()))?;
        let min_norm = constraint_at(&phi_min);
        if min_norm > c_reg {
            return Err(Error::RegularizationTooTight {
                min_norm,
                c_reg,
            });
        }
        // bracket lambda and bisect on the constraint norm
        let mut lambda_hi = 1.0f64;
        let mut iters = 0;
        while constraint_at(&solve(lambda_hi)?) > c_reg {
            lambda_hi *= 2.0;
            iters += 1;
            if iters > 200 {
                return Err(Error::RegularizationTooTight {
                    min_norm,
                    c_reg,
                });
            }
        }
        let mut lambda_lo = 0.0f64;
        let mut phi = solve(lambda_hi)?;
        loop {
            let mid = 0.5 * (lambda_lo + lambda_hi);
            let cand = solve(mid)?;
            let g = constraint_at(&cand);
            if g > c_reg {
                lambda_lo = mid;
            } else {
                lambda_hi = mid;
                phi = cand;
            }
            if (g - c_reg).abs() < tol || (lambda_hi - lambda_lo) < 1e-13 * lambda_hi {
                if g <= c_reg * (1.0 + 1e-6) {
                    phi = solve(mid)?;
                }
                break;
            }
        }
        phi
    };

    let phi_v = unstack_phi(&phi, n, m, horizon);
    let phi_w = phi_w_from_recursion(model_hat, &phi_v, horizon);
    let response = FirResponse {
        phi_w,
        phi_v: phi_v.clone(),
    };
    let filter = RobustFilter {
        coeffs: phi_v.iter().map(|v| -v).collect(),
        objective_value: objective_at(&phi),
        constraint_norm: constraint_at(&phi),
    };
    Ok((response, filter))
}

fn unstack_phi(phi: &DVector<f64>, n: usize, m: usize, horizon: usize) -> Vec<DMatrix<f64>> {
    (0..horizon)
        .map(|t| {
            DMatrix::from_fn(n, m, |i, j| phi[t * n * m + j * n + i])
        })
        .collect()
}

/// `Phi_w` induced by the recursion `Phi_w,1 = I`,
/// `Phi_w,t+1 = Phi_w,t A + Phi_v,t C`.
fn phi_w_from_recursion(
    model_hat: &Model,
    phi_v: &[DMatrix<f64>],
    horizon: usize,
) -> Vec<DMatrix<f64>> {
    let n = model_hat.n();
    let mut out = Vec::with_capacity(horizon);
    let mut w = DMatrix::<f64>::identity(n, n);
    for t in 0..horizon {
        out.push(w.clone());
        if t + 1 < horizon {
            w = &w * model_hat.a() + &phi_v[t] * model_hat.c();
        }
    }
    out
}

/// Stacked objective residual `vec(Phi_w,t K + Phi_v,t)`, t = 1..T.
fn objective_vector(model_hat: &Model, phi_v: &[DMatrix<f64>], horizon: usize) -> DVector<f64> {
    let phi_w = phi_w_from_recursion(model_hat, phi_v, horizon);
    let n = model_hat.n();
    let m = model_hat.m();
    let mut out = DVector::<f64>::zeros(horizon * n * m);
    for t in 0..horizon {
        let block = &phi_w[t] * model_hat.k() + &phi_v[t];
        for j in 0..m {
            for i in 0..n {
                out[t * n * m + j * n + i] = block[(i, j)];
            }
        }
    }
    out
}

/// Stacked constraint residual `vec([Phi_w,t Phi_v,t])`, t = 1..T.
fn constraint_vector(model_hat: &Model, phi_v: &[DMatrix<f64>], horizon: usize) -> DVector<f64> {
    let phi_w = phi_w_from_recursion(model_hat, phi_v, horizon);
    let n = model_hat.n();
    let m = model_hat.m();
    let per_t = n * n + n * m;
    let mut out = DVector::<f64>::zeros(horizon * per_t);
    for t in 0..horizon {
        let mut idx = t * per_t;
        for j in 0..n {
            for i in 0..n {
                out[idx] = phi_w[t][(i, j)];
                idx += 1;
            }
        }
        for j in 0..m {
            for i in 0..n {
                out[idx] = phi_v[t][(i, j)];
                idx += 1;
            }
        }
    }
    out
}

/// Default regularization level `2 (1 + |K|_2) |truncated CE response|_H2`,
/// mirroring the robust synthesis prescription with estimates substituted.
pub fn default_c_reg(model_hat: &Model, horizon: usize) -> Result<f64> {
    let ce = ce_synthesize(model_hat)?;
    let resp = fir_response_from_gain(model_hat, &ce.l_ce, horizon);
    Ok(2.0 * (1.0 + spectral_norm(model_hat.k())) * resp.stacked_h2())
}

/// Evaluates the CE robustness condition
/// `2 tau(A-KC, rho) (eps_A + eps_C (|K| + eps_K) + eps_K |C|) <= 1 - rho`.
/// Returns whether it holds and the slack `(1 - rho) - lhs`.
pub fn check_thm1_condition(
    true_model: &Model,
    eps: (f64, f64, f64),
    rho: f64,
) -> Result<(bool, f64)> {
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::InvalidArgument(format!(
            "rho must lie in [0, 1), got {rho}"
        )));
    }
    let (eps_a, eps_c, eps_k) = eps;
    let tau = tau_decay(&true_model.closed_loop(), rho)?;
    let k_norm = spectral_norm(true_model.k());
    let c_norm = spectral_norm(true_model.c());
    let lhs = 2.0 * tau * (eps_a + eps_c * (k_norm + eps_k) + eps_k * c_norm);
    let margin = (1.0 - rho) - lhs;
    Ok((margin >= 0.0, margin))
}

/// Evaluates the robust-synthesis conditions
/// `(eps_A + eps_C |K|) |R_{A-KC}|_Hinf <= 1/2` and
/// `C >= 2 (1 + |K|) |R_{A-KC}|_H2`.
/// Returns whether both hold and the smaller of the two margins.
pub fn check_thm3_condition(
    true_model: &Model,
    eps: (f64, f64),
    c_reg: f64,
) -> Result<(bool, f64)> {
    let (eps_a, eps_c) = eps;
    let n = true_model.n();
    let acl = true_model.closed_loop();
    let eye = DMatrix::<f64>::identity(n, n);
    let zero = DMatrix::<f64>::zeros(n, n);
    let hinf = hinf_norm(&acl, &eye, &eye, &zero)?;
    let h2 = h2_norm(&acl, &eye, &eye)?;
    let k_norm = spectral_norm(true_model.k());
    let margin1 = 0.5 - (eps_a + eps_c * k_norm) * hinf;
    let margin2 = c_reg - 2.0 * (1.0 + k_norm) * h2;
    Ok((margin1 >= 0.0 && margin2 >= 0.0, margin1.min(margin2)))
}
