//! Identify the benchmark system from a single output trajectory.
//!
//! Simulates N = 8000 samples, runs the subspace pipeline (Hankel
//! regression, truncated SVD realization, parameter extraction), and
//! compares the recovered eigenvalues and Markov parameters with the truth.

use kfid::lti::spectral_radius;
use kfid::{identify, simulate, HankelConfig, Model, Weighting};
use nalgebra::DMatrix;

fn benchmark_model() -> Model {
    let a = DMatrix::from_row_slice(3, 3, &[0.8, 1.0, 0.0, 0.0, 0.9, 1.0, 0.0, 0.0, 0.9]);
    let c = DMatrix::from_row_slice(1, 3, &[1.0, 0.0, 0.0]);
    let k = DMatrix::from_row_slice(3, 1, &[1.5320, 0.9401, 0.1923]);
    let r = DMatrix::from_row_slice(1, 1, &[10.6414]);
    Model::new(a, c, k, r).unwrap()
}

fn sorted_eigs(m: &DMatrix<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = m
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .collect();
    v.sort_by(|a, b| b.partial_cmp(a).unwrap());
    v
}

fn main() -> kfid::Result<()> {
    let truth = benchmark_model();
    let traj = simulate(&truth, 8000, 7)?;
    let cfg = HankelConfig::new(6, 6, Weighting::Moesp)?;
    let ident = identify(&traj, 3, &cfg)?;

    println!("Hankel singular values (descending):");
    for (i, s) in ident.singular_values.iter().enumerate() {
        println!("  sigma_{} = {s:.6}", i + 1);
    }

    let true_eigs = sorted_eigs(truth.a());
    let est_eigs = sorted_eigs(&ident.a_hat);
    println!("eigenvalue moduli (true vs estimated):");
    for (t, e) in true_eigs.iter().zip(&est_eigs) {
        println!("  {t:.6}  {e:.6}  (abs err {:.2e})", (t - e).abs());
    }

    // Markov parameters C A^{t-1} K are basis free; compare the first few.
    let model_hat = ident.model()?;
    let mut pt = DMatrix::<f64>::identity(3, 3);
    let mut ph = DMatrix::<f64>::identity(3, 3);
    println!("Markov parameters C A^(t-1) K (true vs estimated):");
    for t in 1..=5 {
        let mt = (truth.c() * &pt * truth.k())[(0, 0)];
        let mh = (model_hat.c() * &ph * model_hat.k())[(0, 0)];
        println!("  t={t}: {mt:+.5}  {mh:+.5}  (abs err {:.2e})", (mt - mh).abs());
        pt = &pt * truth.a();
        ph = &ph * model_hat.a();
    }

    println!(
        "R = {:.4}, R_hat = {:.4}",
        truth.r()[(0, 0)],
        ident.r_hat[(0, 0)]
    );
    println!(
        "rho(A_hat - K_hat C_hat) = {:.6}",
        spectral_radius(&model_hat.closed_loop())
    );
    println!("samples used in the regression: {}", ident.n_used);
    Ok(())
}
