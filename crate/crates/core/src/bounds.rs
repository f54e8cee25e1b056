//! Closed-form error bounds and constants for the identification and
//! synthesis pipeline.
//!
//! Everything here is a theory-side diagnostic: the true model is assumed
//! known and the bounds are evaluated so that Monte Carlo errors can be
//! compared against them.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::lti::{
    h2_norm, hinf_norm, lyapunov_solve, spectral_norm, spectral_radius, tau_decay, Model,
};
use crate::sysid::{innovation_toeplitz, observability_matrix, true_hankel, HankelConfig};

/// Parameter error radii fed into the bounds. `r` is carried through reports
/// but does not enter any bound value: the stable-branch gain synthesis does
/// not depend on the noise covariance estimate.
#[derive(Debug, Clone, Copy, Default)]
pub struct Eps {
    pub a: f64,
    pub c: f64,
    pub k: f64,
    pub r: f64,
}

impl Eps {
    pub fn uniform(e: f64) -> Self {
        Eps { a: e, c: e, k: e, r: e }
    }

    /// `max{eps_A, eps_C, eps_K}`, the epsilon entering the bound values.
    pub fn max_ack(&self) -> f64 {
        self.a.max(self.c).max(self.k)
    }
}

/// One evaluated bound, with the scalars that went into it echoed back.
#[derive(Debug, Clone)]
pub struct BoundReport {
    pub name: &'static str,
    pub value: f64,
    /// Whether the theorem's applicability condition holds; when false the
    /// value is reported but non-binding.
    pub condition_satisfied: bool,
    pub inputs: Vec<(&'static str, f64)>,
}

/// `|[R_A K; I] R^{1/2}|_H2`: stacked transfer with impulse response
/// `[A^{t-1} K; 0] R^{1/2}` for t >= 1 plus the feedthrough `[0; R^{1/2}]`.
pub fn stacked_gain_h2(model: &Model) -> Result<f64> {
    let r_sqrt = model.r_sqrt()?;
    let strictly_proper = h2_norm(
        model.a(),
        &(model.k() * &r_sqrt),
        &DMatrix::identity(model.n(), model.n()),
    )?;
    Ok((strictly_proper * strictly_proper + r_sqrt.norm_squared()).sqrt())
}

/// `|[R_A K; I] R^{1/2}|_Hinf` (weighted) or `|[R_A K; I]|_Hinf`.
pub fn stacked_gain_hinf(model: &Model, weighted: bool) -> Result<f64> {
    let n = model.n();
    let m = model.m();
    let mut cout = DMatrix::<f64>::zeros(n + m, n);
    cout.view_mut((0, 0), (n, n)).copy_from(&DMatrix::identity(n, n));
    let mut d = DMatrix::<f64>::zeros(n + m, m);
    let (b, dlow) = if weighted {
        let r_sqrt = model.r_sqrt()?;
        (model.k() * &r_sqrt, r_sqrt)
    } else {
        (model.k().clone(), DMatrix::identity(m, m))
    };
    d.view_mut((n, 0), (m, m)).copy_from(&dlow);
    hinf_norm(model.a(), &b, &cout, &d)
}

/// `|R_{A-KC}|_H2`, the H2 norm of the closed-loop resolvent.
pub fn closed_loop_h2(model: &Model) -> Result<f64> {
    let n = model.n();
    let eye = DMatrix::<f64>::identity(n, n);
    h2_norm(&model.closed_loop(), &eye, &eye)
}

/// `|R_{A-KC}|_Hinf`.
pub fn closed_loop_hinf(model: &Model) -> Result<f64> {
    let n = model.n();
    let eye = DMatrix::<f64>::identity(n, n);
    hinf_norm(&model.closed_loop(), &eye, &eye, &DMatrix::zeros(n, n))
}

/// Certainty-equivalence suboptimality bound
/// `J <= sqrt(3) Cbar eps |[R_A K; I] R^{1/2}|_H2`,
/// `Cbar = 2 tau(A-KC, rho)/(1-rho) (1 + |K|_2 + eps_K)`.
pub fn thm1_bound(true_model: &Model, eps: Eps, rho: f64) -> Result<BoundReport> {
    let (ok, _) =
        crate::synthesis::check_thm1_condition(true_model, (eps.a, eps.c, eps.k), rho)?;
    let tau = tau_decay(&true_model.closed_loop(), rho)?;
    let k_norm = spectral_norm(true_model.k());
    let c_bar = 2.0 * tau / (1.0 - rho) * (1.0 + k_norm + eps.k);
    let h2 = stacked_gain_h2(true_model)?;
    let epsilon = eps.max_ack();
    Ok(BoundReport {
        name: "thm1_ce_suboptimality",
        value: 3f64.sqrt() * c_bar * epsilon * h2,
        condition_satisfied: ok,
        inputs: vec![
            ("eps_a", eps.a),
            ("eps_c", eps.c),
            ("eps_k", eps.k),
            ("eps_r", eps.r),
            ("eps", epsilon),
            ("rho", rho),
            ("tau", tau),
            ("c_bar", c_bar),
            ("stacked_h2", h2),
        ],
    })
}

/// Robust synthesis performance bound
/// `J <= sqrt(3) C eps |[R_A K; I]|_Hinf |R^{1/2}|_2
///       + 2 eps |R_{A-KC}|_H2 |R^{1/2}|_2`.
pub fn thm3_bound(true_model: &Model, eps: Eps, c_reg: f64) -> Result<BoundReport> {
    let (ok, _) = crate::synthesis::check_thm3_condition(true_model, (eps.a, eps.c), c_reg)?;
    let hinf = stacked_gain_hinf(true_model, false)?;
    let cl_h2 = closed_loop_h2(true_model)?;
    let r_half = spectral_norm(&true_model.r_sqrt()?);
    let epsilon = eps.max_ack();
    let first = 3f64.sqrt() * c_reg * epsilon * hinf * r_half;
    let second = 2.0 * epsilon * cl_h2 * r_half;
    Ok(BoundReport {
        name: "thm3_robust_performance",
        value: first + second,
        condition_satisfied: ok,
        inputs: vec![
            ("eps_a", eps.a),
            ("eps_c", eps.c),
            ("eps_k", eps.k),
            ("eps_r", eps.r),
            ("eps", epsilon),
            ("c_reg", c_reg),
            ("stacked_hinf", hinf),
            ("closed_loop_h2", cl_h2),
            ("r_half_norm", r_half),
            ("uncertainty_term", first),
            ("suboptimality_term", second),
        ],
    })
}

/// Innovation covariance of a stacked window, `Sigma_{E,s} = T_s (I (x) R) T_s^*`.
fn stacked_innovation_covariance(model: &Model, s: usize) -> DMatrix<f64> {
    let m = model.m();
    let toep = innovation_toeplitz(model, s);
    let mut i_kron_r = DMatrix::<f64>::zeros(s * m, s * m);
    for b in 0..s {
        i_kron_r
            .view_mut((b * m, b * m), (m, m))
            .copy_from(model.r());
    }
    &toep * i_kron_r * toep.transpose()
}

fn sym_eig_extremes(mat: &DMatrix<f64>) -> (f64, f64) {
    let sym = (mat + mat.transpose()) * 0.5;
    let eig = sym.symmetric_eigen().eigenvalues;
    let max = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    (min, max)
}

/// Hankel regression error bound
/// `|G - Ghat|_2 <= 8 C1 sqrt((fmp/N) log(5 f kappa / delta)) + C2 |(A-KC)^p|_2`.
pub fn regression_bound(
    true_model: &Model,
    cfg: &HankelConfig,
    n_samples: usize,
    delta: f64,
) -> Result<BoundReport> {
    if !(0.0..1.0).contains(&delta) || delta <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "delta must lie in (0, 1), got {delta}"
        )));
    }
    let m = true_model.m();
    let (p, f) = (cfg.past, cfg.future);
    if p * m > 2048 || f * m > 2048 {
        return Err(Error::InvalidArgument(
            "stacked window dimension mp exceeds 2048".into(),
        ));
    }
    let sigma_ep = stacked_innovation_covariance(true_model, p);
    let sigma_ef = stacked_innovation_covariance(true_model, f);
    let (ep_min, _) = sym_eig_extremes(&sigma_ep);
    let (_, ef_max) = sym_eig_extremes(&sigma_ef);
    if ep_min <= 0.0 {
        return Err(Error::CovarianceNotPd);
    }
    let o_p = observability_matrix(true_model.a(), true_model.c(), p);
    let o_f = observability_matrix(true_model.a(), true_model.c(), f);
    let op_sv = o_p.clone().svd(false, false).singular_values;
    let op_norm = op_sv.iter().cloned().fold(0.0, f64::max);
    let op_min = op_sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if op_min <= 0.0 {
        return Err(Error::UnobservableEstimate);
    }
    let gamma = lyapunov_solve(
        true_model.a(),
        &(true_model.k() * true_model.r() * true_model.k().transpose()),
    )?;
    let kappa = 4.0 / ep_min * (op_norm * op_norm * gamma.trace() + sigma_ep.trace()) + delta;
    let c1 = (ef_max / ep_min).sqrt();
    let c2 = 4.0 * spectral_norm(&o_f) / op_min;
    let mut acl_pow = DMatrix::<f64>::identity(true_model.n(), true_model.n());
    let acl = true_model.closed_loop();
    for _ in 0..p {
        acl_pow = &acl_pow * &acl;
    }
    let tail = spectral_norm(&acl_pow);
    let first = 8.0
        * c1
        * ((f * m * p) as f64 / n_samples as f64 * (5.0 * f as f64 * kappa / delta).ln()).sqrt();
    Ok(BoundReport {
        name: "hankel_regression",
        value: first + c2 * tail,
        condition_satisfied: true,
        inputs: vec![
            ("n_samples", n_samples as f64),
            ("delta", delta),
            ("p", p as f64),
            ("f", f as f64),
            ("kappa", kappa),
            ("c1", c1),
            ("c2", c2),
            ("statistical_term", first),
            ("truncation_term", c2 * tail),
        ],
    })
}

/// `delta_N = (2(N+p-1)m)^(-log^2(2pm) log(2(N+p-1)m))`, natural logs,
/// evaluated in log-space. Returns `(delta_N, log10 delta_N)`; the first
/// component underflows to zero for large `N` while the second stays finite.
pub fn delta_n(n_samples: usize, p: usize, m: usize) -> Result<(f64, f64)> {
    if n_samples < 1 || p < 1 || m < 1 {
        return Err(Error::InvalidArgument(
            "delta_N needs N, p, m >= 1".into(),
        ));
    }
    let base = (2 * (n_samples + p - 1) * m) as f64;
    let inner = (2 * p * m) as f64;
    let ln_delta = -inner.ln().powi(2) * base.ln().powi(2);
    Ok((ln_delta.exp(), ln_delta / std::f64::consts::LN_10))
}

/// Which synthesis route an end-to-end constant refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthesisMode {
    Ce,
    Robust,
}

/// End-to-end constants `C_KF` and `C_ID` whose product scales the
/// `sqrt(log(1/delta)/N)` rate.
///
/// CE mode takes the infimum of `tau(A-KC, rho)/(1-rho)` over the spectral
/// gap by golden-section search, cross-checked against a 512-point grid.
/// `C_ID` is evaluated in the true basis (`S = I`).
pub fn end_to_end_constants(
    true_model: &Model,
    cfg: &HankelConfig,
    mode: SynthesisMode,
) -> Result<BoundReport> {
    let acl = true_model.closed_loop();
    let rho_cl = spectral_radius(&acl);
    if rho_cl >= 1.0 - 1e-4 {
        return Err(Error::NoSpectralGap);
    }
    let k_norm = spectral_norm(true_model.k());
    let c_kf = match mode {
        SynthesisMode::Ce => {
            let lo = rho_cl + 1e-4;
            let hi = 1.0 - 1e-4;
            let phi = |rho: f64| -> Result<f64> {
                Ok(tau_decay(&acl, rho)? / (1.0 - rho))
            };
            let gr = (5.0f64.sqrt() - 1.0) / 2.0;
            let (mut a, mut b) = (lo, hi);
            let mut c = b - gr * (b - a);
            let mut d = a + gr * (b - a);
            let mut fc = phi(c)?;
            let mut fd = phi(d)?;
            for _ in 0..120 {
                if fc < fd {
                    b = d;
                    d = c;
                    fd = fc;
                    c = b - gr * (b - a);
                    fc = phi(c)?;
                } else {
                    a = c;
                    c = d;
                    fc = fd;
                    d = a + gr * (b - a);
                    fd = phi(d)?;
                }
            }
            let mut best = fc.min(fd);
            // dense-grid fallback in case the profile is not unimodal
            let mut grid_best = f64::INFINITY;
            for i in 0..512 {
                let rho = lo + (hi - lo) * (i as f64 + 0.5) / 512.0;
                grid_best = grid_best.min(phi(rho)?);
            }
            if grid_best < best * 0.99 {
                best = grid_best;
            }
            best * (1.0 + k_norm) * stacked_gain_h2(true_model)?
        }
        SynthesisMode::Robust => {
            closed_loop_h2(true_model)?
                * (1.0 + k_norm)
                * stacked_gain_hinf(true_model, true)?
        }
    };

    let m = true_model.m();
    let n = true_model.n();
    let (p, f) = (cfg.past, cfg.future);
    let sigma_ep = stacked_innovation_covariance(true_model, p);
    let sigma_ef = stacked_innovation_covariance(true_model, f);
    let (ep_min, _) = sym_eig_extremes(&sigma_ep);
    let (_, ef_max) = sym_eig_extremes(&sigma_ef);
    if ep_min <= 0.0 {
        return Err(Error::CovarianceNotPd);
    }
    let hank = true_hankel(true_model, cfg);
    let g_sv = hank.g.clone().svd(false, false).singular_values;
    let mut g_vals: Vec<f64> = g_sv.iter().cloned().collect();
    g_vals.sort_by(|x, y| y.partial_cmp(x).unwrap());
    let sigma_n_g = g_vals.get(n - 1).cloned().unwrap_or(0.0);
    if sigma_n_g <= 0.0 {
        return Err(Error::RankCollapse { sigma_n: sigma_n_g });
    }
    let o_fm1 = observability_matrix(true_model.a(), true_model.c(), f - 1);
    let o_sv = o_fm1.svd(false, false).singular_values;
    let mut o_vals: Vec<f64> = o_sv.iter().cloned().collect();
    o_vals.sort_by(|x, y| y.partial_cmp(x).unwrap());
    let sigma_n_o = o_vals.get(n - 1).cloned().unwrap_or(0.0);
    if sigma_n_o <= 0.0 {
        return Err(Error::UnobservableEstimate);
    }
    let c_id = (ef_max / ep_min).sqrt() / (sigma_n_o * sigma_n_g.sqrt())
        * ((f * m * p * n) as f64).sqrt();
    Ok(BoundReport {
        name: match mode {
            SynthesisMode::Ce => "end_to_end_ce",
            SynthesisMode::Robust => "end_to_end_robust",
        },
        value: c_id * c_kf,
        condition_satisfied: true,
        inputs: vec![
            ("c_kf", c_kf),
            ("c_id", c_id),
            ("sigma_n_g", sigma_n_g),
            ("sigma_n_obs", sigma_n_o),
            ("rho_closed_loop", rho_cl),
        ],
    })
}
