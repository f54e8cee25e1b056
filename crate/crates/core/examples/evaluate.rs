//! Score identified filters against the optimal Kalman predictor.
//!
//! Runs the full pipeline (simulate, identify, synthesize both filters),
//! then evaluates each filter on a fresh trajectory, reporting the
//! empirical prediction error alongside its analytic steady-state value.

use kfid::filtering::{analytic_mse_aligned, empirical_mse, Basis, FilterSpec};
use kfid::sysid::align_basis;
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
    let traj = simulate(&truth, 8000, 23)?;
    let cfg = HankelConfig::new(6, 6, Weighting::Moesp)?;
    let ident = identify(&traj, 3, &cfg)?;
    let model_hat = ident.model()?;
    let alignment = align_basis(&truth, &ident.o_hat, 6)?;

    let eval = simulate(&truth, 100_000, 24)?;

    let ce = ce_synthesize(&model_hat)?;
    let ce_spec = FilterSpec::CeStatic {
        model_hat: model_hat.clone(),
        gain: ce.l_ce,
    };
    let ce_emp = empirical_mse(&ce_spec, &eval, Some(&alignment), Basis::AlignedOriginal, None)?;
    let ce_ana = analytic_mse_aligned(&ce_spec.impulse(4000), &alignment, &truth)?;
    println!("CE filter:     empirical J = {:.4}, analytic J = {:.4}", ce_emp.j_tilde, ce_ana);

    let (_, robust) = sls_synthesize(&model_hat, 10.0, 30)?;
    let rob_spec = FilterSpec::RobustFir {
        coeffs: robust.coeffs,
    };
    let rob_emp = empirical_mse(&rob_spec, &eval, Some(&alignment), Basis::AlignedOriginal, None)?;
    let rob_ana = analytic_mse_aligned(&rob_spec.impulse(30), &alignment, &truth)?;
    println!("robust filter: empirical J = {:.4}, analytic J = {:.4}", rob_emp.j_tilde, rob_ana);

    println!(
        "evaluation used {} samples after a burn-in of {}",
        ce_emp.horizon_used, ce_emp.burn_in
    );
    Ok(())
}
