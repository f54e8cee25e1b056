//! Synthesize certainty-equivalent and robust filters from estimates.
//!
//! Identifies the benchmark system from data, then builds both filters:
//! the CE gain from the Riccati machinery and the robust FIR filter from
//! the regularized closed-loop response program.

use kfid::synthesis::{default_c_reg, CeBranch};
use kfid::{ce_synthesize, identify, simulate, sls_synthesize, HankelConfig, Model, Weighting};
use nalgebra::DMatrix;

fn benchmark_model() -> Model {
    let a = DMatrix::from_row_slice(3, 3, &[0.8, 1.0, 0.0, 0.0, 0.9, 1.0, 0.0, 0.0, 0.9]);
    let c = DMatrix::from_row_slice(1, 3, &[1.0, 0.0, 0.0]);
    let k = DMatrix::from_row_slice(3, 1, &[1.5320, 0.9401, 0.1923]);
    let r = DMatrix::from_row_slice(1, 1, &[10.6414]);
    Model::new(a, c, k, r).unwrap()
}

fn main() -> kfid::Result<()> {
    let truth = benchmark_model();
    let traj = simulate(&truth, 2000, 11)?;
    let cfg = HankelConfig::new(6, 6, Weighting::Moesp)?;
    let model_hat = identify(&traj, 3, &cfg)?.model()?;

    let ce = ce_synthesize(&model_hat)?;
    let branch = match ce.branch {
        CeBranch::StableTrivial => "stable estimate, L = K_hat",
        CeBranch::UnstableSolved => "unstable estimate, Riccati iteration",
    };
    println!("CE synthesis: {branch}");
    println!("  L_CE^T = {:?}", ce.l_ce.transpose().as_slice());
    println!("  rho(A_hat - L_CE C_hat) = {:.6}", ce.closed_loop_rho);

    let creg = 10.0;
    let horizon = 30;
    let (response, robust) = sls_synthesize(&model_hat, creg, horizon)?;
    println!("robust synthesis (C = {creg}, T = {horizon}):");
    println!("  objective |Phi_w K + Phi_v|_H2   = {:.6}", robust.objective_value);
    println!("  response norm |[Phi_w Phi_v]|_H2 = {:.6}", robust.constraint_norm);
    println!(
        "  truncation tail |Phi_w,T A + Phi_v,T C|_F = {:.3e}",
        response.truncation_tail(&model_hat)
    );
    println!("  first FIR taps g_t^T:");
    for (t, g) in robust.coeffs.iter().take(4).enumerate() {
        println!("    t={}: {:?}", t + 1, g.transpose().as_slice());
    }

    // A loose default level always admits the CE responses.
    let loose = default_c_reg(&model_hat, horizon)?;
    println!("default regularization level for this estimate: {loose:.4}");
    Ok(())
}
