//! Running filters and measuring their steady-state prediction error.
//!
//! The certainty-equivalent filter is a one-step-ahead recursion driven by
//! the estimated model; the robust filter is a pure FIR convolution of past
//! outputs. Both produce state predictions that can be scored empirically
//! against a simulated state sequence or analytically through the
//! closed-loop error system.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::lti::{fir_impulse, spectral_radius, Model, Trajectory};
use crate::sysid::BasisAlignment;

/// A synthesized predictor ready to run on data.
#[derive(Debug, Clone)]
pub enum FilterSpec {
    /// Static-gain recursion `xh_{k} = A xh_{k-1} + L (y_{k-1} - C xh_{k-1})`
    /// in the estimated model's basis.
    CeStatic { model_hat: Model, gain: DMatrix<f64> },
    /// FIR convolution `xh_k = sum_{t=1..T} g_t y_{k-t}`.
    RobustFir { coeffs: Vec<DMatrix<f64>> },
}

impl FilterSpec {
    pub fn state_dim(&self) -> usize {
        match self {
            FilterSpec::CeStatic { model_hat, .. } => model_hat.n(),
            FilterSpec::RobustFir { coeffs } => coeffs[0].nrows(),
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            FilterSpec::CeStatic { model_hat, .. } => model_hat.m(),
            FilterSpec::RobustFir { coeffs } => coeffs[0].ncols(),
        }
    }

    /// Convolution coefficients of the predictor, `xh_k = sum g_t y_{k-t}`.
    /// For the recursion this is the truncated impulse response
    /// `g_t = (A - LC)^{t-1} L`.
    pub fn impulse(&self, horizon: usize) -> Vec<DMatrix<f64>> {
        match self {
            FilterSpec::CeStatic { model_hat, gain } => {
                let acl = model_hat.a() - gain * model_hat.c();
                fir_impulse(&acl, gain, horizon)
            }
            FilterSpec::RobustFir { coeffs } => {
                let n = coeffs[0].nrows();
                let m = coeffs[0].ncols();
                let mut out = coeffs.clone();
                out.resize(horizon.max(coeffs.len()), DMatrix::zeros(n, m));
                out.truncate(horizon);
                out
            }
        }
    }
}

/// Which coordinate frame an empirical score is computed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Basis {
    /// Compare `xh_k` to `S^{-1} x_k`: the identified basis.
    Identified,
    /// Compare `S xh_k` to `x_k`: the original (simulation) basis.
    AlignedOriginal,
}

/// Evaluation outcome.
#[derive(Debug, Clone)]
pub struct MseReport {
    /// Root-mean-square prediction error (empirical) or the steady-state
    /// error norm from the closed-loop error system (analytic).
    pub j_tilde: f64,
    pub horizon_used: usize,
    pub burn_in: usize,
    pub basis: Basis,
}

/// Runs a filter over an output record and returns the one-step-ahead state
/// predictions `xh_0, ..., xh_{len-1}` with `xh_0 = 0`.
pub fn run_filter(spec: &FilterSpec, y: &[nalgebra::DVector<f64>]) -> Vec<nalgebra::DVector<f64>> {
    let n = spec.state_dim();
    match spec {
        FilterSpec::CeStatic { model_hat, gain } => {
            let acl = model_hat.a() - gain * model_hat.c();
            let mut xh = nalgebra::DVector::<f64>::zeros(n);
            let mut out = Vec::with_capacity(y.len());
            for yk in y {
                out.push(xh.clone());
                xh = &acl * &xh + gain * yk;
            }
            out
        }
        FilterSpec::RobustFir { coeffs } => {
            let mut out = Vec::with_capacity(y.len());
            for k in 0..y.len() {
                let mut xh = nalgebra::DVector::<f64>::zeros(n);
                for (t, g) in coeffs.iter().enumerate() {
                    if t + 1 > k {
                        break;
                    }
                    xh += g * &y[k - t - 1];
                }
                out.push(xh);
            }
            out
        }
    }
}

/// Default burn-in `ceil(10 / (1 - rho))` capped at a tenth of the record,
/// where `rho` is the filter's own closed-loop decay rate (CE) or the FIR
/// length (robust).
pub fn default_burn_in(spec: &FilterSpec, len: usize) -> usize {
    let raw = match spec {
        FilterSpec::CeStatic { model_hat, gain } => {
            let rho = spectral_radius(&(model_hat.a() - gain * model_hat.c()));
            if rho >= 1.0 {
                len / 10
            } else {
                (10.0 / (1.0 - rho)).ceil() as usize
            }
        }
        FilterSpec::RobustFir { coeffs } => coeffs.len(),
    };
    raw.min(len / 10)
}

/// Empirical root-mean-square state prediction error over one trajectory.
///
/// The trajectory must carry simulated states. With [`Basis::Identified`]
/// the true states are mapped into the filter's basis through the provided
/// alignment; with [`Basis::AlignedOriginal`] the predictions are mapped
/// back instead. Pass `None` for the alignment when the filter already lives
/// in the simulation basis.
pub fn empirical_mse(
    spec: &FilterSpec,
    traj: &Trajectory,
    alignment: Option<&BasisAlignment>,
    basis: Basis,
    burn_in: Option<usize>,
) -> Result<MseReport> {
    let x = traj.x.as_ref().ok_or(Error::MissingStates)?;
    if traj.y.is_empty() {
        return Err(Error::InsufficientSamples {
            required: 1,
            actual: 0,
        });
    }
    let burn_in = burn_in.unwrap_or_else(|| default_burn_in(spec, traj.y.len()));
    if burn_in >= traj.y.len() {
        return Err(Error::InvalidArgument(format!(
            "burn-in {} leaves no samples in a record of length {}",
            burn_in,
            traj.y.len()
        )));
    }
    let preds = run_filter(spec, &traj.y);
    let mut acc = 0.0;
    let mut count = 0usize;
    for k in burn_in..traj.y.len() {
        let err = match (basis, alignment) {
            (Basis::Identified, Some(al)) => &preds[k] - al.s_inv() * &x[k],
            (Basis::AlignedOriginal, Some(al)) => al.s() * &preds[k] - &x[k],
            (_, None) => &preds[k] - &x[k],
        };
        acc += err.norm_squared();
        count += 1;
    }
    Ok(MseReport {
        j_tilde: (acc / count as f64).sqrt(),
        horizon_used: traj.y.len(),
        burn_in,
        basis,
    })
}

/// Analytic steady-state error norm of a convolution predictor against the
/// true system.
///
/// With filter coefficients `g_t` (mapped to the true basis beforehand if
/// needed), the prediction error is driven by the innovations through
///
/// ```text
/// x_k - xh_k = sum_{t>=1} (A^{t-1} K - h_t) e_{k-t},
/// h_t = sum_{s=1..min(t,T)} g_s M_{t-s},   M_0 = I, M_j = C A^{j-1} K,
/// ```
///
/// and the reported value is `sqrt(sum_t |(A^{t-1} K - h_t) R^{1/2}|_F^2)`,
/// the stationary root-mean-square error. The tail is truncated once terms
/// fall below `1e-10` of the running maximum, with a hard cap of `1e4`
/// terms; requires `rho(A) < 1`.
pub fn analytic_mse(coeffs: &[DMatrix<f64>], true_model: &Model) -> Result<f64> {
    let rho_a = spectral_radius(true_model.a());
    if rho_a >= 1.0 {
        return Err(Error::UnstableLyapunov { rho: rho_a });
    }
    let n = true_model.n();
    let m = true_model.m();
    if coeffs.is_empty() || coeffs[0].nrows() != n || coeffs[0].ncols() != m {
        return Err(Error::DimensionMismatch(format!(
            "filter coefficients must be {n}x{m}"
        )));
    }
    let t_fir = coeffs.len();
    let r_sqrt = true_model.r_sqrt()?;
    let max_terms = 10_000usize;

    // markov parameters of the true output map: M_0 = I, M_j = C A^{j-1} K
    let mut markov: Vec<DMatrix<f64>> = vec![DMatrix::identity(m, m)];
    let mut markov_apk = true_model.k().clone();
    // powers A^{t-1} K on the fly
    let mut apow_k = true_model.k().clone();
    let mut acc = 0.0f64;
    let mut running_max = 0.0f64;
    // one tiny term does not mean the tail is gone (coefficients can cancel
    // at isolated lags), so require a run of negligible terms before stopping
    let mut small_run = 0usize;
    for t in 1..=max_terms {
        // extend markov params up to index t-1
        while markov.len() < t {
            markov.push(true_model.c() * &markov_apk);
            markov_apk = true_model.a() * &markov_apk;
        }
        let mut h = DMatrix::<f64>::zeros(n, m);
        for s in 1..=t.min(t_fir) {
            h += &coeffs[s - 1] * &markov[t - s];
        }
        let term = ((&apow_k - h) * &r_sqrt).norm_squared();
        acc += term;
        running_max = running_max.max(term);
        if t >= t_fir && term <= 1e-10 * running_max.max(1e-300) {
            small_run += 1;
            if small_run >= 50 {
                break;
            }
        } else {
            small_run = 0;
        }
        apow_k = true_model.a() * &apow_k;
    }
    Ok(acc.sqrt())
}

/// Analytic error of a synthesized filter against the true system, with the
/// coefficients mapped from the identified basis into the true basis through
/// the alignment (`g -> S g`).
pub fn analytic_mse_aligned(
    coeffs: &[DMatrix<f64>],
    alignment: &BasisAlignment,
    true_model: &Model,
) -> Result<f64> {
    let mapped: Vec<DMatrix<f64>> = coeffs.iter().map(|g| alignment.s() * g).collect();
    analytic_mse(&mapped, true_model)
}
