//! Evaluate the finite-sample error bounds for the benchmark system.
//!
//! Computes the perturbation bounds on the excess prediction error, the
//! Hankel regression bound, the end-to-end constants for both synthesis
//! modes, and the implied failure probability at the benchmark horizon.

use kfid::bounds::{
    delta_n, end_to_end_constants, regression_bound, thm1_bound, thm3_bound, Eps, SynthesisMode,
};
use kfid::lti::spectral_radius;
use kfid::{HankelConfig, Model, Weighting};
use nalgebra::DMatrix;

fn benchmark_model() -> Model {
    let a = DMatrix::from_row_slice(3, 3, &[0.8, 1.0, 0.0, 0.0, 0.9, 1.0, 0.0, 0.0, 0.9]);
    let c = DMatrix::from_row_slice(1, 3, &[1.0, 0.0, 0.0]);
    let k = DMatrix::from_row_slice(3, 1, &[1.5320, 0.9401, 0.1923]);
    let r = DMatrix::from_row_slice(1, 1, &[10.6414]);
    Model::new(a, c, k, r).unwrap()
}

fn show(rep: &kfid::bounds::BoundReport) {
    let cond = if rep.condition_satisfied { "holds" } else { "VIOLATED" };
    println!("{:<22} value = {:.6e}  (condition {cond})", rep.name, rep.value);
    for (k, v) in &rep.inputs {
        println!("    {k:<28} = {v:.6e}");
    }
}

fn main() -> kfid::Result<()> {
    let model = benchmark_model();
    let rho_cl = spectral_radius(&model.closed_loop());
    let rho = 0.5 * (1.0 + rho_cl);
    let eps = Eps::uniform(1e-3);
    let cfg = HankelConfig::new(6, 6, Weighting::Identity)?;

    show(&thm1_bound(&model, eps, rho)?);
    show(&thm3_bound(&model, eps, 10.0)?);
    show(&regression_bound(&model, &cfg, 8000, 0.05)?);
    show(&end_to_end_constants(&model, &cfg, SynthesisMode::Ce)?);
    show(&end_to_end_constants(&model, &cfg, SynthesisMode::Robust)?);

    let (value, log10) = delta_n(8000, 6, 1)?;
    println!("delta_N at N = 8000: {value:.3e} (log10 = {log10:.2})");
    Ok(())
}
