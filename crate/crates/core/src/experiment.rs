//! Seeded Monte Carlo studies over the full pipeline: simulate, identify,
//! synthesize both filters, evaluate them on fresh data, and aggregate.

use std::path::Path;

use rayon::prelude::*;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::filtering::{empirical_mse, Basis, FilterSpec};
use crate::io;
use crate::lti::{simulate, spectral_radius, Model};
use crate::synthesis::{ce_synthesize, sls_synthesize};
use crate::sysid::{align_basis, identify, HankelConfig, Weighting};

/// Full configuration of a Monte Carlo grid run.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub model: Model,
    /// Sample counts, strictly increasing.
    pub n_grid: Vec<usize>,
    /// Trials per sample count.
    pub trials: usize,
    pub past: usize,
    pub future: usize,
    pub order: usize,
    pub weighting: Weighting,
    /// Robust synthesis regularization level.
    pub creg: f64,
    /// Robust synthesis FIR horizon.
    pub horizon: usize,
    pub seed: u64,
    pub basis: Basis,
    /// Length of the fresh evaluation trajectory.
    pub eval_horizon: usize,
}

impl ExperimentConfig {
    /// The reference experiment: third-order system, C = 10, T = 30,
    /// N in {500, 2000, 8000, 32000}, p = f = 6, MOESP weighting.
    pub fn reference(model: Model, trials: usize, seed: u64) -> Self {
        ExperimentConfig {
            model,
            n_grid: vec![500, 2000, 8000, 32000],
            trials,
            past: 6,
            future: 6,
            order: 3,
            weighting: Weighting::Moesp,
            creg: 10.0,
            horizon: 30,
            seed,
            basis: Basis::AlignedOriginal,
            eval_horizon: 100_000,
        }
    }

    pub fn hankel(&self) -> Result<HankelConfig> {
        HankelConfig::new(self.past, self.future, self.weighting)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials < 1 {
            return Err(Error::InvalidArgument("trials must be >= 1".into()));
        }
        if self.n_grid.is_empty() || self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(
                "sample grid must be non-empty and strictly increasing".into(),
            ));
        }
        if self.order < 1 || self.creg <= 0.0 || self.horizon < 2 || self.eval_horizon < 10 {
            return Err(Error::InvalidArgument(
                "order >= 1, creg > 0, horizon >= 2, eval_horizon >= 10 required".into(),
            ));
        }
        self.hankel().map(|_| ())
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic per-trial seed from `(master, N, trial_index)`, independent
/// of scheduling order.
pub fn trial_seed(master: u64, n: usize, trial_index: usize) -> u64 {
    let mut z = splitmix64(master ^ 0xA076_1D64_78BD_642F);
    z = splitmix64(z ^ (n as u64).wrapping_mul(0xE703_7ED1_A0B4_28DB));
    splitmix64(z ^ (trial_index as u64))
}

/// One trial's outcome. Failed stages carry the error message instead of a
/// value; rows are never dropped.
#[derive(Debug, Clone)]
pub struct TrialRecord {
    pub n: usize,
    pub trial_index: usize,
    pub seed: u64,
    pub j_ce: Option<f64>,
    pub j_robust: Option<f64>,
    /// `rho(A_hat - L_CE C_hat)`.
    pub rho_ce: Option<f64>,
    /// Smallest retained singular value of the Hankel estimate.
    pub sigma_n_g: Option<f64>,
    pub ident_error: Option<String>,
    pub ce_error: Option<String>,
    pub robust_error: Option<String>,
}

impl TrialRecord {
    pub fn failed(&self) -> bool {
        self.j_ce.is_none() && self.j_robust.is_none()
    }
}

/// Runs one trial: simulate N samples, identify, synthesize the CE and
/// robust filters, then score both on a fresh evaluation trajectory drawn
/// from the trial's seed stream.
pub fn run_trial(cfg: &ExperimentConfig, n: usize, trial_index: usize) -> TrialRecord {
    run_trial_injected(cfg, n, trial_index, None)
}

/// As [`run_trial`], but with the identification stage optionally bypassed
/// by injecting a known model (the perfect-knowledge shortcut).
pub fn run_trial_injected(
    cfg: &ExperimentConfig,
    n: usize,
    trial_index: usize,
    injected: Option<&Model>,
) -> TrialRecord {
    let seed = trial_seed(cfg.seed, n, trial_index);
    let mut rec = TrialRecord {
        n,
        trial_index,
        seed,
        j_ce: None,
        j_robust: None,
        rho_ce: None,
        sigma_n_g: None,
        ident_error: None,
        ce_error: None,
        robust_error: None,
    };

    let (model_hat, alignment) = if let Some(truth) = injected {
        (truth.clone(), None)
    } else {
        let hankel = match cfg.hankel() {
            Ok(h) => h,
            Err(e) => {
                rec.ident_error = Some(e.to_string());
                return rec;
            }
        };
        let traj = match simulate(&cfg.model, n, seed) {
            Ok(t) => t,
            Err(e) => {
                rec.ident_error = Some(e.to_string());
                return rec;
            }
        };
        let ident = match identify(&traj, cfg.order, &hankel) {
            Ok(i) => i,
            Err(e) => {
                rec.ident_error = Some(e.to_string());
                return rec;
            }
        };
        rec.sigma_n_g = Some(ident.singular_values[cfg.order - 1]);
        let model_hat = match ident.model() {
            Ok(m) => m,
            Err(e) => {
                rec.ident_error = Some(e.to_string());
                return rec;
            }
        };
        let alignment = match align_basis(&cfg.model, &ident.o_hat, cfg.future) {
            Ok(a) => Some(a),
            Err(e) => {
                rec.ident_error = Some(e.to_string());
                return rec;
            }
        };
        (model_hat, alignment)
    };

    let eval_seed = splitmix64(seed ^ 0x5851_F42D_4C95_7F2D);
    let eval_traj = match simulate(&cfg.model, cfg.eval_horizon, eval_seed) {
        Ok(t) => t,
        Err(e) => {
            rec.ident_error = Some(e.to_string());
            return rec;
        }
    };

    match ce_synthesize(&model_hat) {
        Ok(ce) => {
            rec.rho_ce = Some(ce.closed_loop_rho);
            let spec = FilterSpec::CeStatic {
                model_hat: model_hat.clone(),
                gain: ce.l_ce,
            };
            match empirical_mse(&spec, &eval_traj, alignment.as_ref(), cfg.basis, None) {
                Ok(rep) => rec.j_ce = Some(rep.j_tilde),
                Err(e) => rec.ce_error = Some(e.to_string()),
            }
        }
        Err(e) => {
            rec.rho_ce = Some(spectral_radius(&model_hat.closed_loop()));
            rec.ce_error = Some(e.to_string());
        }
    }

    match sls_synthesize(&model_hat, cfg.creg, cfg.horizon) {
        Ok((_, robust)) => {
            let spec = FilterSpec::RobustFir {
                coeffs: robust.coeffs,
            };
            match empirical_mse(&spec, &eval_traj, alignment.as_ref(), cfg.basis, None) {
                Ok(rep) => rec.j_robust = Some(rep.j_tilde),
                Err(e) => rec.robust_error = Some(e.to_string()),
            }
        }
        Err(e) => rec.robust_error = Some(e.to_string()),
    }

    rec
}

/// Nearest-rank percentile of an unsorted slice: the `ceil(q/100 * len)`-th
/// smallest value, 1-indexed.
pub fn percentile_nearest_rank(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let rank = ((q / 100.0 * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    Some(sorted[rank - 1])
}

/// Per-(N, filter) aggregate.
#[derive(Debug, Clone)]
pub struct SummaryRow {
    pub n: usize,
    pub filter: &'static str,
    pub count_ok: usize,
    pub count_total: usize,
    pub mean: Option<f64>,
    pub median: Option<f64>,
    pub p95: Option<f64>,
    pub p97_5: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct GridResult {
    pub records: Vec<TrialRecord>,
    pub summary: Vec<SummaryRow>,
    pub warnings: Vec<String>,
}

fn summarize_filter(
    records: &[TrialRecord],
    n: usize,
    filter: &'static str,
    pick: impl Fn(&TrialRecord) -> Option<f64>,
) -> SummaryRow {
    let of_n: Vec<&TrialRecord> = records.iter().filter(|r| r.n == n).collect();
    let values: Vec<f64> = of_n.iter().filter_map(|r| pick(r)).collect();
    let mean = if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    };
    SummaryRow {
        n,
        filter,
        count_ok: values.len(),
        count_total: of_n.len(),
        mean,
        median: percentile_nearest_rank(&values, 50.0),
        p95: percentile_nearest_rank(&values, 95.0),
        p97_5: percentile_nearest_rank(&values, 97.5),
    }
}

/// Runs the whole grid in parallel. Output is a pure function of the
/// configuration: per-trial seeds are fixed up front and results are
/// collected in grid order regardless of scheduling.
pub fn run_grid(cfg: &ExperimentConfig) -> Result<GridResult> {
    cfg.validate()?;
    let jobs: Vec<(usize, usize)> = cfg
        .n_grid
        .iter()
        .flat_map(|&n| (0..cfg.trials).map(move |t| (n, t)))
        .collect();
    let records: Vec<TrialRecord> = jobs
        .par_iter()
        .map(|&(n, t)| run_trial(cfg, n, t))
        .collect();

    let mut summary = Vec::new();
    let mut warnings = Vec::new();
    for &n in &cfg.n_grid {
        let ce = summarize_filter(&records, n, "ce", |r| r.j_ce);
        let robust = summarize_filter(&records, n, "robust", |r| r.j_robust);
        for row in [&ce, &robust] {
            if row.count_ok * 2 < row.count_total {
                warnings.push(format!(
                    "N = {}: {} filter failed in {} of {} trials",
                    n,
                    row.filter,
                    row.count_total - row.count_ok,
                    row.count_total
                ));
            }
        }
        summary.push(ce);
        summary.push(robust);
    }
    Ok(GridResult {
        records,
        summary,
        warnings,
    })
}

/// Conditional summary of trials whose CE closed loop is nearly marginally
/// stable, `rho(A_hat - L_CE C_hat) > threshold`.
#[derive(Debug, Clone)]
pub struct TailSummary {
    pub threshold: f64,
    pub count: usize,
    pub worst_ce: Option<f64>,
    pub worst_robust: Option<f64>,
    /// `worst_ce / worst_robust`.
    pub worst_case_ratio: Option<f64>,
    /// Largest per-trial `j_robust / j_ce`.
    pub max_robust_over_ce: Option<f64>,
    pub note: Option<String>,
}

pub fn tail_analysis(records: &[TrialRecord], threshold: f64) -> TailSummary {
    let hits: Vec<&TrialRecord> = records
        .iter()
        .filter(|r| r.rho_ce.map(|rho| rho > threshold).unwrap_or(false))
        .collect();
    if hits.is_empty() {
        return TailSummary {
            threshold,
            count: 0,
            worst_ce: None,
            worst_robust: None,
            worst_case_ratio: None,
            max_robust_over_ce: None,
            note: Some("no marginally-stable trials".into()),
        };
    }
    let worst = |pick: fn(&TrialRecord) -> Option<f64>| {
        hits.iter()
            .filter_map(|r| pick(r))
            .fold(None, |acc: Option<f64>, v| {
                Some(acc.map_or(v, |a| a.max(v)))
            })
    };
    let worst_ce = worst(|r| r.j_ce);
    let worst_robust = worst(|r| r.j_robust);
    let max_ratio = hits
        .iter()
        .filter_map(|r| match (r.j_ce, r.j_robust) {
            (Some(ce), Some(rob)) if ce > 0.0 => Some(rob / ce),
            _ => None,
        })
        .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))));
    TailSummary {
        threshold,
        count: hits.len(),
        worst_ce,
        worst_robust,
        worst_case_ratio: match (worst_ce, worst_robust) {
            (Some(ce), Some(rob)) if rob > 0.0 => Some(ce / rob),
            _ => None,
        },
        max_robust_over_ce: max_ratio,
        note: None,
    }
}

/// Least-squares slope of `log10(value)` against `log10(n)`.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let logs: Vec<(f64, f64)> = points
        .iter()
        .filter(|&&(n, v)| n > 0.0 && v > 0.0)
        .map(|&(n, v)| (n.log10(), v.log10()))
        .collect();
    if logs.len() < 2 {
        return None;
    }
    let len = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / len;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / len;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx <= 0.0 {
        return None;
    }
    Some(sxy / sxx)
}

/// Writes trials.csv: one row per trial, failures carried with their reason.
pub fn write_trials_csv(path: &Path, records: &[TrialRecord]) -> Result<()> {
    let fmt_opt = |v: Option<f64>| v.map(|x| format!("{x:.10e}")).unwrap_or_default();
    let fmt_err = |e: &Option<String>| {
        e.as_deref().unwrap_or("").replace(',', ";").replace('\n', " ")
    };
    let rows: Vec<Vec<String>> = records
        .iter()
        .map(|r| {
            vec![
                r.n.to_string(),
                r.trial_index.to_string(),
                r.seed.to_string(),
                fmt_opt(r.j_ce),
                fmt_opt(r.j_robust),
                fmt_opt(r.rho_ce),
                fmt_opt(r.sigma_n_g),
                fmt_err(&r.ident_error),
                fmt_err(&r.ce_error),
                fmt_err(&r.robust_error),
            ]
        })
        .collect();
    io::write_csv(
        path,
        &[
            "n",
            "trial_index",
            "seed",
            "j_ce",
            "j_robust",
            "rho_ce",
            "sigma_n_g",
            "ident_error",
            "ce_error",
            "robust_error",
        ],
        &rows,
    )
}

/// Writes summary.csv: one row per (N, filter).
pub fn write_summary_csv(path: &Path, summary: &[SummaryRow]) -> Result<()> {
    let fmt_opt = |v: Option<f64>| v.map(|x| format!("{x:.10e}")).unwrap_or_default();
    let rows: Vec<Vec<String>> = summary
        .iter()
        .map(|s| {
            vec![
                s.n.to_string(),
                s.filter.to_string(),
                s.count_ok.to_string(),
                s.count_total.to_string(),
                fmt_opt(s.mean),
                fmt_opt(s.median),
                fmt_opt(s.p95),
                fmt_opt(s.p97_5),
            ]
        })
        .collect();
    io::write_csv(
        path,
        &["n", "filter", "count_ok", "count_total", "mean", "median", "p95", "p97_5"],
        &rows,
    )
}

/// Renders the summary as a log-log SVG line plot: median lines with 95th
/// and 97.5th percentile bands, one color per filter.
pub fn write_summary_svg(path: &Path, summary: &[SummaryRow]) -> Result<()> {
    let (w, h) = (640.0f64, 440.0f64);
    let (ml, mr, mt, mb) = (70.0, 20.0, 20.0, 50.0);
    let mut pts: Vec<(f64, f64)> = Vec::new();
    for s in summary {
        for v in [s.median, s.p95, s.p97_5].into_iter().flatten() {
            if v > 0.0 {
                pts.push((s.n as f64, v));
            }
        }
    }
    if pts.is_empty() {
        return Err(Error::InvalidArgument("nothing to plot".into()));
    }
    let xs: Vec<f64> = pts.iter().map(|p| p.0.log10()).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1.log10()).collect();
    let (x0, x1) = (
        xs.iter().cloned().fold(f64::INFINITY, f64::min),
        xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
    );
    let (y0, y1) = (
        ys.iter().cloned().fold(f64::INFINITY, f64::min) - 0.1,
        ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 0.1,
    );
    let sx = |n: f64| ml + (n.log10() - x0) / (x1 - x0).max(1e-12) * (w - ml - mr);
    let sy = |v: f64| h - mb - (v.log10() - y0) / (y1 - y0).max(1e-12) * (h - mt - mb);

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" \
         viewBox=\"0 0 {w} {h}\">\n<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n"
    ));
    svg.push_str(&format!(
        "<line x1=\"{ml}\" y1=\"{0}\" x2=\"{1}\" y2=\"{0}\" stroke=\"black\"/>\n\
         <line x1=\"{ml}\" y1=\"{mt}\" x2=\"{ml}\" y2=\"{0}\" stroke=\"black\"/>\n",
        h - mb,
        w - mr
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"13\">N (log scale)</text>\n\
         <text x=\"16\" y=\"{}\" font-size=\"13\" transform=\"rotate(-90 16 {})\" \
         text-anchor=\"middle\">error (log scale)</text>\n",
        (ml + w - mr) / 2.0,
        h - 12.0,
        (mt + h - mb) / 2.0,
        (mt + h - mb) / 2.0
    ));
    let series = [
        ("ce", "median", "#1f5fbf", "none"),
        ("ce", "p95", "#1f5fbf", "4 3"),
        ("ce", "p97_5", "#1f5fbf", "1 3"),
        ("robust", "median", "#bf3f1f", "none"),
        ("robust", "p95", "#bf3f1f", "4 3"),
        ("robust", "p97_5", "#bf3f1f", "1 3"),
    ];
    for (filter, stat, color, dash) in series {
        let mut line: Vec<(f64, f64)> = summary
            .iter()
            .filter(|s| s.filter == filter)
            .filter_map(|s| {
                let v = match stat {
                    "median" => s.median,
                    "p95" => s.p95,
                    _ => s.p97_5,
                };
                v.filter(|&v| v > 0.0).map(|v| (s.n as f64, v))
            })
            .collect();
        line.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        if line.len() < 2 {
            continue;
        }
        let path_d: Vec<String> = line
            .iter()
            .enumerate()
            .map(|(i, &(n, v))| {
                format!("{}{:.2} {:.2}", if i == 0 { "M" } else { "L" }, sx(n), sy(v))
            })
            .collect();
        let dash_attr = if dash == "none" {
            String::new()
        } else {
            format!(" stroke-dasharray=\"{dash}\"")
        };
        svg.push_str(&format!(
            "<path d=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.6\"{dash_attr}/>\n",
            path_d.join(" ")
        ));
    }
    svg.push_str(
        "<text x=\"80\" y=\"36\" font-size=\"13\" fill=\"#1f5fbf\">ce</text>\n\
         <text x=\"110\" y=\"36\" font-size=\"13\" fill=\"#bf3f1f\">robust</text>\n",
    );
    svg.push_str("</svg>\n");
    std::fs::write(path, svg)?;
    Ok(())
}

#[derive(Debug, Deserialize)]
struct ConfigFileModel {
    n: usize,
    m: usize,
    a: Vec<Vec<f64>>,
    c: Vec<Vec<f64>>,
    k: Vec<Vec<f64>>,
    r: Vec<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
struct ConfigFile {
    model_path: Option<String>,
    model: Option<ConfigFileModel>,
    n_grid: Option<Vec<usize>>,
    trials: Option<usize>,
    past: Option<usize>,
    future: Option<usize>,
    order: Option<usize>,
    weighting: Option<String>,
    creg: Option<f64>,
    horizon: Option<usize>,
    seed: Option<u64>,
    basis: Option<String>,
    eval_horizon: Option<usize>,
}

/// Loads an experiment configuration from a TOML file. The model comes from
/// either an inline `[model]` table or a `model_path` reference; all other
/// fields fall back to the reference experiment's values.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    let file: ConfigFile = toml::from_str(&text).map_err(|e| Error::Parse(e.to_string()))?;
    let model = match (&file.model, &file.model_path) {
        (Some(inline), _) => {
            if inline.n == 0 || inline.m == 0 {
                return Err(Error::Parse("inline model needs n, m >= 1".into()));
            }
            let a = rows(&inline.a)?;
            let c = rows(&inline.c)?;
            let k = rows(&inline.k)?;
            let r = rows(&inline.r)?;
            Model::new(a, c, k, r)?
        }
        (None, Some(p)) => {
            let base = path.parent().unwrap_or_else(|| Path::new("."));
            io::load_model(&base.join(p))?
        }
        (None, None) => {
            return Err(Error::Parse(
                "config needs either [model] or model_path".into(),
            ))
        }
    };
    let order = file.order.unwrap_or(model.n());
    let mut cfg = ExperimentConfig::reference(model, file.trials.unwrap_or(100), 0);
    cfg.order = order;
    if let Some(g) = file.n_grid {
        cfg.n_grid = g;
    }
    if let Some(p) = file.past {
        cfg.past = p;
    }
    if let Some(f) = file.future {
        cfg.future = f;
    }
    if let Some(w) = file.weighting {
        cfg.weighting = match w.as_str() {
            "identity" => Weighting::Identity,
            "moesp" => Weighting::Moesp,
            other => return Err(Error::Parse(format!("unknown weighting {other}"))),
        };
    }
    if let Some(c) = file.creg {
        cfg.creg = c;
    }
    if let Some(h) = file.horizon {
        cfg.horizon = h;
    }
    if let Some(s) = file.seed {
        cfg.seed = s;
    }
    if let Some(b) = file.basis {
        cfg.basis = match b.as_str() {
            "identified" => Basis::Identified,
            "original" => Basis::AlignedOriginal,
            other => return Err(Error::Parse(format!("unknown basis {other}"))),
        };
    }
    if let Some(e) = file.eval_horizon {
        cfg.eval_horizon = e;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn rows(rows: &[Vec<f64>]) -> Result<nalgebra::DMatrix<f64>> {
    if rows.is_empty() || rows[0].is_empty() {
        return Err(Error::Parse("empty matrix in config".into()));
    }
    let ncols = rows[0].len();
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Parse("ragged matrix in config".into()));
    }
    let flat: Vec<f64> = rows.iter().flatten().cloned().collect();
    Ok(nalgebra::DMatrix::from_row_slice(rows.len(), ncols, &flat))
}
