//! Run a small Monte Carlo sweep over sample sizes.
//!
//! A desk-scale version of the benchmark experiment: identify and
//! synthesize both filters over a grid of trajectory lengths, summarize
//! the error percentiles, estimate the empirical decay rate, and report
//! tail behavior on the nearly-marginally-stable trials.

use kfid::experiment::{loglog_slope, run_grid, tail_analysis, ExperimentConfig};
use kfid::Model;
use nalgebra::DMatrix;

fn benchmark_model() -> Model {
    let a = DMatrix::from_row_slice(3, 3, &[0.8, 1.0, 0.0, 0.0, 0.9, 1.0, 0.0, 0.0, 0.9]);
    let c = DMatrix::from_row_slice(1, 3, &[1.0, 0.0, 0.0]);
    let k = DMatrix::from_row_slice(3, 1, &[1.5320, 0.9401, 0.1923]);
    let r = DMatrix::from_row_slice(1, 1, &[10.6414]);
    Model::new(a, c, k, r).unwrap()
}

fn main() -> kfid::Result<()> {
    let mut cfg = ExperimentConfig::reference(benchmark_model(), 20, 1);
    cfg.n_grid = vec![500, 2000, 8000];
    cfg.eval_horizon = 20_000;
    cfg.validate()?;

    let result = run_grid(&cfg)?;
    println!("{:>6} {:>7} {:>10} {:>10} {:>10}", "N", "filter", "median", "p95", "ok/total");
    let mut ce_pts = Vec::new();
    let mut rob_pts = Vec::new();
    for row in &result.summary {
        let median = row.median.unwrap_or(f64::NAN);
        println!(
            "{:>6} {:>7} {:>10.4} {:>10.4} {:>7}/{}",
            row.n,
            row.filter,
            median,
            row.p95.unwrap_or(f64::NAN),
            row.count_ok,
            row.count_total
        );
        if let Some(med) = row.median {
            let pt = (row.n as f64, med);
            if row.filter == "ce" {
                ce_pts.push(pt);
            } else {
                rob_pts.push(pt);
            }
        }
    }

    if let (Some(s_ce), Some(s_rob)) = (loglog_slope(&ce_pts), loglog_slope(&rob_pts)) {
        println!("log-log decay slopes: ce {s_ce:.3}, robust {s_rob:.3} (expect about -0.5)");
    }

    let tail = tail_analysis(&result.records, 0.97);
    println!(
        "trials with rho(A_hat - L_CE C_hat) > {}: {}",
        tail.threshold, tail.count
    );
    match (tail.worst_ce, tail.worst_robust) {
        (Some(wc), Some(wr)) => {
            println!("  worst ce {wc:.4}, worst robust {wr:.4}");
        }
        _ => {
            if let Some(note) = &tail.note {
                println!("  {note}");
            }
        }
    }
    for w in &result.warnings {
        println!("warning: {w}");
    }
    Ok(())
}
