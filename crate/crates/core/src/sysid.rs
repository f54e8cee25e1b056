//! Stochastic subspace identification.
//!
//! Regresses stacked future outputs on stacked past outputs to estimate the
//! Hankel-like matrix `G = O_f K_p`, realizes `(O_f, K_p)` by a rank-n
//! truncated SVD (optionally MOESP-weighted), extracts `(A, C, K)` from the
//! shift structure of the observability matrix, estimates the innovation
//! covariance from regression residuals, and aligns the identified basis to
//! a reference model for evaluation.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::lti::{Model, Trajectory};

/// Weighting applied to `G` before the realization SVD.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Weighting {
    Identity,
    /// `W = (sum_k Y-_k Y-_k^T)^{1/2}`, the MOESP-style data weighting.
    Moesp,
}

/// Past/future horizon configuration for the Hankel data matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HankelConfig {
    pub past: usize,
    pub future: usize,
    pub weighting: Weighting,
}

impl HankelConfig {
    pub fn new(past: usize, future: usize, weighting: Weighting) -> Result<Self> {
        if past < 1 || future < 1 {
            return Err(Error::InvalidArgument(
                "past and future horizons must be >= 1".into(),
            ));
        }
        Ok(Self {
            past,
            future,
            weighting,
        })
    }

    /// Default horizons `p = f = max(n+1, ceil(beta log N))` with
    /// `beta = -1/(2 log rho_guess)` from the consistency requirement.
    pub fn default_horizons(n: usize, n_samples: usize, rho_guess: f64) -> Self {
        let beta = -1.0 / (2.0 * rho_guess.ln());
        let h = (beta * (n_samples as f64).ln()).ceil() as usize;
        let p = h.max(n + 1);
        Self {
            past: p,
            future: p,
            weighting: Weighting::Moesp,
        }
    }
}

/// Output of the full identification chain.
#[derive(Debug, Clone)]
pub struct IdentResult {
    pub g_hat: DMatrix<f64>,
    /// Singular values of the (weighted) Hankel estimate, descending.
    pub singular_values: DVector<f64>,
    pub o_hat: DMatrix<f64>,
    pub k_hat_ctrb: DMatrix<f64>,
    pub a_hat: DMatrix<f64>,
    pub c_hat: DMatrix<f64>,
    pub k_hat: DMatrix<f64>,
    pub r_hat: DMatrix<f64>,
    pub n_used: usize,
}

impl IdentResult {
    /// Packs the estimated parameters into a `Model`.
    pub fn model(&self) -> Result<Model> {
        Model::new(
            self.a_hat.clone(),
            self.c_hat.clone(),
            self.k_hat.clone(),
            self.r_hat.clone(),
        )
    }
}

/// Invertible map from the identified state basis to a reference basis,
/// `S = O_f^+ O_hat`.
#[derive(Debug, Clone)]
pub struct BasisAlignment {
    s: DMatrix<f64>,
    s_inv: DMatrix<f64>,
}

impl BasisAlignment {
    /// Maps identified-basis coordinates into the reference basis.
    pub fn s(&self) -> &DMatrix<f64> {
        &self.s
    }

    pub fn s_inv(&self) -> &DMatrix<f64> {
        &self.s_inv
    }
}

/// True extended observability / reversed controllability factors and their
/// Hankel product, built from known parameters.
#[derive(Debug, Clone)]
pub struct TrueHankel {
    pub g: DMatrix<f64>,
    pub o_f: DMatrix<f64>,
    pub k_p: DMatrix<f64>,
}

/// Intermediate realization: factors of the rank-n SVD of `G W`.
#[derive(Debug, Clone)]
pub struct Realization {
    pub o_hat: DMatrix<f64>,
    pub k_hat_ctrb: DMatrix<f64>,
    pub singular_values: DVector<f64>,
}

/// Stacks outputs into future (`mf x N`) and past (`mp x N`) block-Hankel
/// data matrices. Column `k - p` of the future matrix holds
/// `y_k .. y_{k+f-1}`; the past matrix holds `y_{k-p} .. y_{k-1}`, oldest
/// first, for `k = p .. N+p-1`.
pub fn build_hankel_data(
    traj: &Trajectory,
    cfg: &HankelConfig,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let (p, f) = (cfg.past, cfg.future);
    let len = traj.len();
    if len < p + f {
        return Err(Error::InsufficientSamples {
            required: p + f,
            actual: len,
        });
    }
    let n_cols = len - p - f + 1;
    let m = traj.y[0].len();
    let mut yplus = DMatrix::<f64>::zeros(m * f, n_cols);
    let mut yminus = DMatrix::<f64>::zeros(m * p, n_cols);
    for col in 0..n_cols {
        let k = col + p;
        for i in 0..f {
            yplus
                .view_mut((i * m, col), (m, 1))
                .copy_from(&traj.y[k + i]);
        }
        for i in 0..p {
            yminus
                .view_mut((i * m, col), (m, 1))
                .copy_from(&traj.y[k - p + i]);
        }
    }
    Ok((yplus, yminus))
}

/// Least-squares estimate `G_hat = (Y+ Y-^T)(Y- Y-^T)^{-1}`, solved against
/// the Gram matrix rather than by explicit inversion.
pub fn regress_hankel(yplus: &DMatrix<f64>, yminus: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if yplus.ncols() != yminus.ncols() {
        return Err(Error::DimensionMismatch(
            "future/past data must have the same number of columns".into(),
        ));
    }
    let gram = yminus * yminus.transpose();
    let min_eig = crate::lti::min_sym_eigenvalue(&gram);
    if min_eig <= 1e-10 * gram.trace() {
        return Err(Error::InsufficientExcitation);
    }
    let cross = yminus * yplus.transpose(); // mp x mf
    let chol = gram.clone().cholesky().ok_or(Error::InsufficientExcitation)?;
    let solved = chol.solve(&cross); // gram^{-1} (Y- Y+^T)
    Ok(solved.transpose())
}

/// Builds the true `O_f`, `K_p` and `G = O_f K_p` from known parameters.
pub fn true_hankel(model: &Model, cfg: &HankelConfig) -> TrueHankel {
    let o_f = observability_matrix(model.a(), model.c(), cfg.future);
    let k_p = controllability_matrix(model, cfg.past);
    let g = &o_f * &k_p;
    TrueHankel { g, o_f, k_p }
}

/// Extended observability matrix `[C; CA; ...; CA^{k-1}]`.
pub fn observability_matrix(a: &DMatrix<f64>, c: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let (m, n) = (c.nrows(), c.ncols());
    let mut out = DMatrix::<f64>::zeros(m * k, n);
    let mut block = c.clone();
    for i in 0..k {
        out.view_mut((i * m, 0), (m, n)).copy_from(&block);
        block = &block * a;
    }
    out
}

/// Reversed extended controllability matrix
/// `[(A-KC)^{p-1} K, ..., (A-KC) K, K]`.
pub fn controllability_matrix(model: &Model, p: usize) -> DMatrix<f64> {
    let (n, m) = (model.n(), model.m());
    let acl = model.closed_loop();
    let mut out = DMatrix::<f64>::zeros(n, m * p);
    let mut block = model.k().clone();
    for i in (0..p).rev() {
        out.view_mut((0, i * m), (n, m)).copy_from(&block);
        block = &acl * block;
    }
    out
}

/// Block-Toeplitz matrix of innovation feedthrough terms: unit diagonal
/// blocks with `CA^{j-1}K` below the diagonal.
pub fn innovation_toeplitz(model: &Model, s: usize) -> DMatrix<f64> {
    let (m, _n) = (model.m(), model.n());
    let mut out = DMatrix::<f64>::zeros(m * s, m * s);
    // first block column: I, CK, CAK, ..., CA^{s-2}K, shifted down the diagonals
    let mut blocks = Vec::with_capacity(s);
    blocks.push(DMatrix::<f64>::identity(m, m));
    let mut apow = DMatrix::<f64>::identity(model.n(), model.n());
    for _ in 1..s {
        blocks.push(model.c() * &apow * model.k());
        apow = model.a() * apow;
    }
    for i in 0..s {
        for j in 0..=i {
            out.view_mut((i * m, j * m), (m, m)).copy_from(&blocks[i - j]);
        }
    }
    out
}

/// Rank-n truncated SVD of `G_hat W` with a deterministic sign convention:
/// the first entry of each left singular vector with magnitude above
/// `1e-12 x max` is made positive.
///
/// `O_hat = U1 S1^{1/2}`, `K_hat = S1^{1/2} V1^T W^{-1}`.
pub fn realize(
    g_hat: &DMatrix<f64>,
    order: usize,
    weighting: Weighting,
    yminus: Option<&DMatrix<f64>>,
) -> Result<Realization> {
    if order > g_hat.nrows().min(g_hat.ncols()) {
        return Err(Error::InvalidArgument(format!(
            "order {order} exceeds min dimension of G ({}x{})",
            g_hat.nrows(),
            g_hat.ncols()
        )));
    }
    let (weighted, w_inv) = match weighting {
        Weighting::Identity => (g_hat.clone(), None),
        Weighting::Moesp => {
            let ym = yminus.ok_or_else(|| {
                Error::InvalidArgument("Moesp weighting requires the past data matrix".into())
            })?;
            let gram = ym * ym.transpose();
            let gram_rows = gram.nrows();
            let eig = gram.symmetric_eigen();
            let max = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
            if max <= 0.0 {
                return Err(Error::SingularWeighting);
            }
            let cutoff = 1e-12 * max;
            let retained = eig.eigenvalues.iter().filter(|&&v| v > cutoff).count();
            if retained < gram_rows {
                return Err(Error::SingularWeighting);
            }
            let sqrt = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| v.max(cutoff).sqrt()));
            let inv_sqrt =
                DMatrix::from_diagonal(&eig.eigenvalues.map(|v| 1.0 / v.max(cutoff).sqrt()));
            let w = &eig.eigenvectors * sqrt * eig.eigenvectors.transpose();
            let w_inv = &eig.eigenvectors * inv_sqrt * eig.eigenvectors.transpose();
            (g_hat * w, Some(w_inv))
        }
    };
    let svd = weighted.clone().svd(true, true);
    let mut u = svd.u.ok_or(Error::InsufficientExcitation)?;
    let mut vt = svd.v_t.ok_or(Error::InsufficientExcitation)?;
    let sv = svd.singular_values;
    // descending order (nalgebra sorts, but make it explicit and stable)
    let mut idx: Vec<usize> = (0..sv.len()).collect();
    idx.sort_by(|&i, &j| sv[j].partial_cmp(&sv[i]).unwrap());
    let sorted = DVector::from_iterator(sv.len(), idx.iter().map(|&i| sv[i]));
    let u_cols: Vec<DVector<f64>> = idx.iter().map(|&i| u.column(i).into_owned()).collect();
    let u_sorted = DMatrix::from_columns(&u_cols);
    let vt_rows: Vec<nalgebra::RowDVector<f64>> =
        idx.iter().map(|&i| vt.row(i).into_owned()).collect();
    let vt_sorted = DMatrix::from_rows(&vt_rows);
    u = u_sorted;
    vt = vt_sorted;

    let sigma_n = sorted[order - 1];
    if sigma_n < 1e-12 {
        return Err(Error::RankCollapse { sigma_n });
    }
    // sign convention: first non-negligible entry of each left vector positive
    for j in 0..order {
        let col = u.column(j);
        let max_abs = col.iter().cloned().map(f64::abs).fold(0.0, f64::max);
        let pivot = col.iter().position(|&v| v.abs() > 1e-12 * max_abs);
        if let Some(i) = pivot {
            if u[(i, j)] < 0.0 {
                for r in 0..u.nrows() {
                    u[(r, j)] = -u[(r, j)];
                }
                for cidx in 0..vt.ncols() {
                    vt[(j, cidx)] = -vt[(j, cidx)];
                }
            }
        }
    }
    let u1 = u.columns(0, order).into_owned();
    let v1t = vt.rows(0, order).into_owned();
    let s_sqrt = DVector::from_iterator(order, (0..order).map(|i| sorted[i].sqrt()));
    let o_hat = &u1 * DMatrix::from_diagonal(&s_sqrt);
    let mut k_hat = DMatrix::from_diagonal(&s_sqrt) * v1t;
    if let Some(w_inv) = w_inv {
        k_hat *= w_inv;
    }
    Ok(Realization {
        o_hat,
        k_hat_ctrb: k_hat,
        singular_values: sorted,
    })
}

/// Recovers `(A, C, K)` from the realized factors.
///
/// `C` is the first block row of `O_hat`; `K` is the last block column of the
/// controllability factor; `A` solves the shift-invariance least squares
/// `min |O^u A - O^l|_F` where `O^u` drops the last block row and `O^l`
/// drops the first.
pub fn extract_params(
    o_hat: &DMatrix<f64>,
    k_hat_ctrb: &DMatrix<f64>,
    m: usize,
    f: usize,
    p: usize,
) -> Result<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> {
    if f < 2 {
        return Err(Error::InvalidArgument(
            "future horizon must be >= 2 to extract A".into(),
        ));
    }
    let n = o_hat.ncols();
    if o_hat.nrows() != m * f {
        return Err(Error::DimensionMismatch(format!(
            "O_hat must have {} rows, got {}",
            m * f,
            o_hat.nrows()
        )));
    }
    if k_hat_ctrb.ncols() != m * p {
        return Err(Error::DimensionMismatch(format!(
            "controllability factor must have {} columns, got {}",
            m * p,
            k_hat_ctrb.ncols()
        )));
    }
    let upper = o_hat.rows(0, m * (f - 1)).into_owned();
    let lower = o_hat.rows(m, m * (f - 1)).into_owned();
    let svd = upper.clone().svd(true, true);
    let sigma_min = svd
        .singular_values
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    if svd.singular_values.len() < n || sigma_min <= 1e-10 {
        return Err(Error::UnobservableEstimate);
    }
    let a_hat = svd
        .solve(&lower, 0.0)
        .map_err(|_| Error::UnobservableEstimate)?;
    let c_hat = o_hat.rows(0, m).into_owned();
    let k_hat = k_hat_ctrb.columns(m * (p - 1), m).into_owned();
    Ok((a_hat, c_hat, k_hat))
}

/// Innovation covariance estimate: sample covariance of the first block row
/// of the regression residual `Y+ - G_hat Y-`, symmetrized with eigenvalues
/// clipped at zero.
pub fn estimate_r(
    yplus: &DMatrix<f64>,
    yminus: &DMatrix<f64>,
    g_hat: &DMatrix<f64>,
    m: usize,
) -> Result<DMatrix<f64>> {
    let n_cols = yplus.ncols();
    if n_cols < m + 1 {
        return Err(Error::InsufficientSamples {
            required: m + 1,
            actual: n_cols,
        });
    }
    let resid = yplus - g_hat * yminus;
    let first = resid.rows(0, m);
    let mut cov = &first * first.transpose() / n_cols as f64;
    cov = (&cov + cov.transpose()) * 0.5;
    let eig = cov.symmetric_eigen();
    let clipped = eig.eigenvalues.map(|v| v.max(0.0));
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&clipped) * eig.eigenvectors.transpose())
}

/// Least-squares basis alignment `S = O_f^+ O_hat` mapping the identified
/// basis onto the reference model's basis.
pub fn align_basis(reference: &Model, o_hat: &DMatrix<f64>, f: usize) -> Result<BasisAlignment> {
    let o_f = observability_matrix(reference.a(), reference.c(), f);
    if o_f.nrows() != o_hat.nrows() || o_f.ncols() != o_hat.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "observability factors disagree: {}x{} vs {}x{}",
            o_f.nrows(),
            o_f.ncols(),
            o_hat.nrows(),
            o_hat.ncols()
        )));
    }
    let svd = o_f.clone().svd(true, true);
    let s = svd
        .solve(o_hat, 1e-12)
        .map_err(|e| Error::Parse(e.to_string()))?;
    let s_svd = s.clone().svd(false, false);
    let smax = s_svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let smin = s_svd
        .singular_values
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !cond.is_finite() || cond > 1e8 {
        return Err(Error::AlignmentIllConditioned { cond });
    }
    let s_inv = s
        .clone()
        .try_inverse()
        .ok_or(Error::AlignmentIllConditioned { cond })?;
    Ok(BasisAlignment { s, s_inv })
}

/// Full identification chain: Hankel data, regression, realization,
/// parameter extraction and residual covariance.
pub fn identify(traj: &Trajectory, order: usize, cfg: &HankelConfig) -> Result<IdentResult> {
    let m = traj.y[0].len();
    let (yplus, yminus) = build_hankel_data(traj, cfg)?;
    let g_hat = regress_hankel(&yplus, &yminus)?;
    let real = realize(&g_hat, order, cfg.weighting, Some(&yminus))?;
    let (a_hat, c_hat, k_hat) =
        extract_params(&real.o_hat, &real.k_hat_ctrb, m, cfg.future, cfg.past)?;
    let r_hat = estimate_r(&yplus, &yminus, &g_hat, m)?;
    Ok(IdentResult {
        g_hat,
        singular_values: real.singular_values,
        o_hat: real.o_hat,
        k_hat_ctrb: real.k_hat_ctrb,
        a_hat,
        c_hat,
        k_hat,
        r_hat,
        n_used: yplus.ncols(),
    })
}

/// Diagnostic heuristic: index of the largest gap in log singular values.
/// Order selection itself always uses the user-supplied `n`.
pub fn singular_value_gap(singular_values: &DVector<f64>) -> Option<usize> {
    let vals: Vec<f64> = singular_values
        .iter()
        .cloned()
        .filter(|&v| v > 0.0)
        .collect();
    if vals.len() < 2 {
        return None;
    }
    let mut best = (0usize, f64::MIN);
    for i in 0..vals.len() - 1 {
        let gap = vals[i].ln() - vals[i + 1].ln();
        if gap > best.1 {
            best = (i + 1, gap);
        }
    }
    Some(best.0)
}
