//! Command line front end for the identification / synthesis / evaluation
//! pipeline. Exit codes: 0 success, 2 configuration or input error, 3 batch
//! completed with failure-rate warnings.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use kfid::bounds::{self, Eps, SynthesisMode};
use kfid::error::Error;
use kfid::experiment::{self, tail_analysis};
use kfid::filtering::{self, Basis, FilterSpec};
use kfid::io;
use kfid::lti::simulate;
use kfid::synthesis::{ce_synthesize, sls_synthesize};
use kfid::sysid::{
    align_basis, build_hankel_data, identify, observability_matrix, HankelConfig, Weighting,
};

#[derive(Parser)]
#[command(name = "kfid", version, about = "Learn a Kalman filter from one output trajectory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum WeightingArg {
    Identity,
    Moesp,
}

impl From<WeightingArg> for Weighting {
    fn from(w: WeightingArg) -> Self {
        match w {
            WeightingArg::Identity => Weighting::Identity,
            WeightingArg::Moesp => Weighting::Moesp,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum BasisArg {
    Identified,
    Original,
}

impl From<BasisArg> for Basis {
    fn from(b: BasisArg) -> Self {
        match b {
            BasisArg::Identified => Basis::Identified,
            BasisArg::Original => Basis::AlignedOriginal,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Ce,
    Robust,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate an output trajectory of a model.
    Simulate(SimulateArgs),
    /// Identify a model from a trajectory.
    Identify(IdentifyArgs),
    /// Synthesize a filter from an estimated model.
    Synthesize(SynthesizeArgs),
    /// Evaluate a filter's prediction error on a trajectory.
    Evaluate(EvaluateArgs),
    /// Evaluate the theoretical bounds for a known model.
    Bounds(BoundsArgs),
    /// Run the Monte Carlo grid experiment.
    Montecarlo(MontecarloArgs),
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    n_samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Omit the state and innovation columns from the output.
    #[arg(long)]
    outputs_only: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct IdentifyArgs {
    #[arg(long)]
    trajectory: PathBuf,
    #[arg(long)]
    order: usize,
    #[arg(long)]
    past: usize,
    #[arg(long)]
    future: usize,
    #[arg(long, value_enum, default_value_t = WeightingArg::Moesp)]
    weighting: WeightingArg,
    /// Estimated model output path.
    #[arg(long)]
    out: PathBuf,
    /// Diagnostics CSV (singular values, sigma_n, residual norms).
    #[arg(long)]
    diagnostics: Option<PathBuf>,
}

#[derive(Args)]
struct SynthesizeArgs {
    /// Estimated model file.
    #[arg(long)]
    model: PathBuf,
    #[arg(long, value_enum)]
    mode: ModeArg,
    /// Robust regularization level; defaults to 2(1+|K|) x CE response norm.
    #[arg(long)]
    creg: Option<f64>,
    /// Robust FIR horizon.
    #[arg(long, default_value_t = 30)]
    horizon: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    filter: PathBuf,
    #[arg(long)]
    trajectory: PathBuf,
    /// True model; enables basis alignment of the score.
    #[arg(long)]
    true_model: Option<PathBuf>,
    /// Estimated model used during identification; required for aligning a
    /// robust filter (CE filters carry their model).
    #[arg(long)]
    estimated_model: Option<PathBuf>,
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long, value_enum, default_value_t = BasisArg::Identified)]
    basis: BasisArg,
    /// Append the report row here; header written if the file is new.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BoundsArgs {
    /// True model file.
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    eps_a: f64,
    #[arg(long, default_value_t = 0.0)]
    eps_c: f64,
    #[arg(long, default_value_t = 0.0)]
    eps_k: f64,
    #[arg(long, default_value_t = 0.0)]
    eps_r: f64,
    #[arg(long, default_value_t = 0.99)]
    rho: f64,
    #[arg(long, default_value_t = 10.0)]
    creg: f64,
    #[arg(long, default_value_t = 8000)]
    n_samples: usize,
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    #[arg(long, default_value_t = 6)]
    past: usize,
    #[arg(long, default_value_t = 6)]
    future: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MontecarloArgs {
    #[arg(long)]
    config: PathBuf,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker thread count (0 = all cores); output is identical either way.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    #[arg(long)]
    out_dir: PathBuf,
    /// Threshold for the marginal-stability tail report.
    #[arg(long, default_value_t = 0.97)]
    tail_threshold: f64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Identify(a) => cmd_identify(a),
        Command::Synthesize(a) => cmd_synthesize(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Bounds(a) => cmd_bounds(a),
        Command::Montecarlo(a) => cmd_montecarlo(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Parse(_) | Error::InvalidArgument(_) | Error::Io(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn cmd_simulate(a: SimulateArgs) -> kfid::Result<ExitCode> {
    let model = io::load_model(&a.model)?;
    let mut traj = simulate(&model, a.n_samples, a.seed)?;
    if a.outputs_only {
        traj.x = None;
        traj.e = None;
    }
    io::save_trajectory(&a.out, &traj)?;
    println!("wrote {} samples to {}", a.n_samples, a.out.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_identify(a: IdentifyArgs) -> kfid::Result<ExitCode> {
    let traj = io::load_trajectory(&a.trajectory)?;
    let cfg = HankelConfig::new(a.past, a.future, a.weighting.into())?;
    let ident = identify(&traj, a.order, &cfg)?;
    let model_hat = ident.model()?;
    io::save_model(&a.out, &model_hat)?;
    if let Some(diag_path) = &a.diagnostics {
        let (yplus, yminus) = build_hankel_data(&traj, &cfg)?;
        let residual = (&ident.g_hat * &yminus - &yplus).norm();
        let mut rows: Vec<Vec<String>> = ident
            .singular_values
            .iter()
            .enumerate()
            .map(|(i, s)| vec![format!("sigma_{}", i + 1), format!("{s:.10e}")])
            .collect();
        rows.push(vec![
            "sigma_n".into(),
            format!("{:.10e}", ident.singular_values[a.order - 1]),
        ]);
        rows.push(vec!["residual_norm".into(), format!("{residual:.10e}")]);
        rows.push(vec!["n_used".into(), ident.n_used.to_string()]);
        io::write_csv(diag_path, &["quantity", "value"], &rows)?;
    }
    println!(
        "identified order-{} model from {} samples, sigma_n = {:.4e}",
        a.order,
        traj.len(),
        ident.singular_values[a.order - 1]
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_synthesize(a: SynthesizeArgs) -> kfid::Result<ExitCode> {
    let model_hat = io::load_model(&a.model)?;
    match a.mode {
        ModeArg::Ce => {
            let ce = ce_synthesize(&model_hat)?;
            let spec = FilterSpec::CeStatic {
                model_hat: model_hat.clone(),
                gain: ce.l_ce,
            };
            io::save_filter(&a.out, &spec, &[("closed_loop_rho", ce.closed_loop_rho)])?;
            println!(
                "ce filter written, closed-loop spectral radius {:.4}",
                ce.closed_loop_rho
            );
        }
        ModeArg::Robust => {
            let creg = match a.creg {
                Some(c) => c,
                None => kfid::synthesis::default_c_reg(&model_hat, a.horizon)?,
            };
            let (resp, robust) = sls_synthesize(&model_hat, creg, a.horizon)?;
            let tail = resp.truncation_tail(&model_hat);
            let spec = FilterSpec::RobustFir {
                coeffs: robust.coeffs,
            };
            io::save_filter(
                &a.out,
                &spec,
                &[
                    ("objective", robust.objective_value),
                    ("constraint_norm", robust.constraint_norm),
                    ("creg", creg),
                    ("truncation_tail", tail),
                ],
            )?;
            println!(
                "robust filter written, objective {:.4e}, constraint {:.4} <= C = {:.4}",
                robust.objective_value, robust.constraint_norm, creg
            );
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_evaluate(a: EvaluateArgs) -> kfid::Result<ExitCode> {
    let (spec, _) = io::load_filter(&a.filter)?;
    let traj = io::load_trajectory(&a.trajectory)?;
    let alignment = match &a.true_model {
        Some(path) => {
            let truth = io::load_model(path)?;
            let f = truth.n() + 1;
            let model_hat = match (&spec, &a.estimated_model) {
                (_, Some(p)) => io::load_model(p)?,
                (FilterSpec::CeStatic { model_hat, .. }, None) => model_hat.clone(),
                (FilterSpec::RobustFir { .. }, None) => {
                    return Err(Error::InvalidArgument(
                        "aligning a robust filter needs --estimated-model".into(),
                    ))
                }
            };
            let o_hat = observability_matrix(model_hat.a(), model_hat.c(), f);
            Some(align_basis(&truth, &o_hat, f)?)
        }
        None => None,
    };
    let basis: Basis = a.basis.into();
    let report = filtering::empirical_mse(&spec, &traj, alignment.as_ref(), basis, a.burn_in)?;
    let header = ["j_tilde", "horizon_used", "burn_in", "basis", "filter", "trajectory"];
    let row = vec![
        format!("{:.10e}", report.j_tilde),
        report.horizon_used.to_string(),
        report.burn_in.to_string(),
        match report.basis {
            Basis::Identified => "identified".to_string(),
            Basis::AlignedOriginal => "original".to_string(),
        },
        a.filter.display().to_string(),
        a.trajectory.display().to_string(),
    ];
    append_csv_row(&a.out, &header, row)?;
    println!("j_tilde = {:.6e} (burn-in {})", report.j_tilde, report.burn_in);
    Ok(ExitCode::SUCCESS)
}

fn append_csv_row(path: &PathBuf, header: &[&str], row: Vec<String>) -> kfid::Result<()> {
    use std::io::Write as _;
    let exists = path.exists();
    let mut file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)?;
    if !exists {
        writeln!(file, "{}", header.join(","))?;
    }
    writeln!(file, "{}", row.join(","))?;
    Ok(())
}

fn cmd_bounds(a: BoundsArgs) -> kfid::Result<ExitCode> {
    let model = io::load_model(&a.model)?;
    let eps = Eps {
        a: a.eps_a,
        c: a.eps_c,
        k: a.eps_k,
        r: a.eps_r,
    };
    let cfg = HankelConfig::new(a.past, a.future, Weighting::Identity)?;
    let mut reports = vec![
        bounds::thm1_bound(&model, eps, a.rho)?,
        bounds::thm3_bound(&model, eps, a.creg)?,
        bounds::regression_bound(&model, &cfg, a.n_samples, a.delta)?,
        bounds::end_to_end_constants(&model, &cfg, SynthesisMode::Ce)?,
        bounds::end_to_end_constants(&model, &cfg, SynthesisMode::Robust)?,
    ];
    let (dn, dn_log10) = bounds::delta_n(a.n_samples, a.past, model.m())?;
    let mut rows: Vec<Vec<String>> = Vec::new();
    for rep in reports.drain(..) {
        let inputs = rep
            .inputs
            .iter()
            .map(|(k, v)| format!("{k}={v:.6e}"))
            .collect::<Vec<_>>()
            .join(";");
        rows.push(vec![
            rep.name.to_string(),
            format!("{:.10e}", rep.value),
            rep.condition_satisfied.to_string(),
            inputs,
        ]);
    }
    rows.push(vec![
        "delta_n".into(),
        format!("{dn:.10e}"),
        "true".into(),
        format!("log10={dn_log10:.6}"),
    ]);
    io::write_csv(&a.out, &["bound", "value", "condition_satisfied", "inputs"], &rows)?;
    println!("wrote {} bound rows to {}", rows.len(), a.out.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_montecarlo(a: MontecarloArgs) -> kfid::Result<ExitCode> {
    let mut cfg = experiment::load_config(&a.config)?;
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    if a.workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(a.workers)
            .build_global()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    }
    std::fs::create_dir_all(&a.out_dir)?;
    std::fs::create_dir_all(a.out_dir.join("plots"))?;
    let grid = experiment::run_grid(&cfg)?;
    experiment::write_trials_csv(&a.out_dir.join("trials.csv"), &grid.records)?;
    experiment::write_summary_csv(&a.out_dir.join("summary.csv"), &grid.summary)?;
    if cfg.n_grid.len() >= 2 {
        experiment::write_summary_svg(&a.out_dir.join("plots/summary.svg"), &grid.summary)?;
    }
    let tail = tail_analysis(&grid.records, a.tail_threshold);
    println!("trials: {}", grid.records.len());
    for s in &grid.summary {
        println!(
            "N = {:>7} {:>7}: ok {}/{} median {} p95 {}",
            s.n,
            s.filter,
            s.count_ok,
            s.count_total,
            s.median.map(|v| format!("{v:.4e}")).unwrap_or_else(|| "-".into()),
            s.p95.map(|v| format!("{v:.4e}")).unwrap_or_else(|| "-".into()),
        );
    }
    match tail.note {
        Some(note) => println!("tail (rho > {}): {note}", tail.threshold),
        None => println!(
            "tail (rho > {}): {} trials, worst ce {} worst robust {} ratio {}",
            tail.threshold,
            tail.count,
            tail.worst_ce.map(|v| format!("{v:.4e}")).unwrap_or_else(|| "-".into()),
            tail.worst_robust.map(|v| format!("{v:.4e}")).unwrap_or_else(|| "-".into()),
            tail.worst_case_ratio.map(|v| format!("{v:.2}")).unwrap_or_else(|| "-".into()),
        ),
    }
    if !grid.warnings.is_empty() {
        for w in &grid.warnings {
            eprintln!("warning: {w}");
        }
        return Ok(ExitCode::from(3));
    }
    Ok(ExitCode::SUCCESS)
}
