//! Plain-text file formats: TOML for models, filters and experiment
//! configuration, CSV for trajectories and tabular reports.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filtering::FilterSpec;
use crate::lti::{Model, Trajectory};

fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn rows_to_matrix(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    if rows.is_empty() || rows[0].is_empty() {
        return Err(Error::Parse(format!("matrix {what} is empty")));
    }
    let ncols = rows[0].len();
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Parse(format!("matrix {what} has ragged rows")));
    }
    let flat: Vec<f64> = rows.iter().flatten().cloned().collect();
    Ok(DMatrix::from_row_slice(rows.len(), ncols, &flat))
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    n: usize,
    m: usize,
    a: Vec<Vec<f64>>,
    c: Vec<Vec<f64>>,
    k: Vec<Vec<f64>>,
    r: Vec<Vec<f64>>,
}

impl ModelFile {
    fn from_model(model: &Model) -> Self {
        ModelFile {
            n: model.n(),
            m: model.m(),
            a: matrix_to_rows(model.a()),
            c: matrix_to_rows(model.c()),
            k: matrix_to_rows(model.k()),
            r: matrix_to_rows(model.r()),
        }
    }

    fn into_model(self) -> Result<Model> {
        let a = rows_to_matrix(&self.a, "A")?;
        let c = rows_to_matrix(&self.c, "C")?;
        let k = rows_to_matrix(&self.k, "K")?;
        let r = rows_to_matrix(&self.r, "R")?;
        if a.nrows() != self.n || c.nrows() != self.m {
            return Err(Error::Parse(
                "declared n/m do not match matrix shapes".into(),
            ));
        }
        Model::new(a, c, k, r)
    }
}

pub fn save_model(path: &Path, model: &Model) -> Result<()> {
    let text = toml::to_string_pretty(&ModelFile::from_model(model))
        .map_err(|e| Error::Parse(e.to_string()))?;
    fs::write(path, text)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<Model> {
    let text = fs::read_to_string(path)?;
    let file: ModelFile = toml::from_str(&text).map_err(|e| Error::Parse(e.to_string()))?;
    file.into_model()
}

/// Writes a trajectory as CSV: a `# seed = <u64>` comment line, a header
/// `t,y_1..y_m[,x_1..x_n][,e_1..e_m]`, then one row per step.
pub fn save_trajectory(path: &Path, traj: &Trajectory) -> Result<()> {
    let mut out = String::new();
    out.push_str(&format!("# seed = {}\n", traj.seed));
    let m = traj.y.first().map(|v| v.len()).unwrap_or(0);
    let n = traj.x.as_ref().and_then(|x| x.first()).map(|v| v.len());
    let mut header = vec!["t".to_string()];
    for j in 1..=m {
        header.push(format!("y_{j}"));
    }
    if let Some(n) = n {
        for j in 1..=n {
            header.push(format!("x_{j}"));
        }
    }
    if traj.e.is_some() {
        for j in 1..=m {
            header.push(format!("e_{j}"));
        }
    }
    out.push_str(&header.join(","));
    out.push('\n');
    for t in 0..traj.y.len() {
        let mut row = vec![t.to_string()];
        row.extend(traj.y[t].iter().map(|v| format!("{v:.17e}")));
        if let Some(x) = &traj.x {
            row.extend(x[t].iter().map(|v| format!("{v:.17e}")));
        }
        if let Some(e) = &traj.e {
            row.extend(e[t].iter().map(|v| format!("{v:.17e}")));
        }
        out.push_str(&row.join(","));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn load_trajectory(path: &Path) -> Result<Trajectory> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let mut seed = 0u64;
    let mut header: Option<&str> = None;
    for line in lines.by_ref() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            if let Some(eq) = rest.split_once('=') {
                if eq.0.trim() == "seed" {
                    seed = eq
                        .1
                        .trim()
                        .parse()
                        .map_err(|_| Error::Parse("bad seed comment".into()))?;
                }
            }
            continue;
        }
        header = Some(line);
        break;
    }
    let header = header.ok_or_else(|| Error::Parse("trajectory file has no header".into()))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let m = cols.iter().filter(|c| c.starts_with("y_")).count();
    let n = cols.iter().filter(|c| c.starts_with("x_")).count();
    let me = cols.iter().filter(|c| c.starts_with("e_")).count();
    if m == 0 || cols.first() != Some(&"t") {
        return Err(Error::Parse("trajectory header must be t,y_1,...".into()));
    }
    let mut y = Vec::new();
    let mut x = Vec::new();
    let mut e = Vec::new();
    for line in lines {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let vals: Vec<f64> = line
            .split(',')
            .skip(1)
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Parse(format!("bad trajectory row: {line}")))?;
        if vals.len() != m + n + me {
            return Err(Error::Parse(format!("row width mismatch: {line}")));
        }
        y.push(DVector::from_row_slice(&vals[..m]));
        if n > 0 {
            x.push(DVector::from_row_slice(&vals[m..m + n]));
        }
        if me > 0 {
            e.push(DVector::from_row_slice(&vals[m + n..]));
        }
    }
    Ok(Trajectory {
        y,
        x: if n > 0 { Some(x) } else { None },
        e: if me > 0 { Some(e) } else { None },
        seed,
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct FilterFile {
    mode: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    gain: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    model: Option<ModelFile>,
    #[serde(skip_serializing_if = "Option::is_none")]
    coeffs: Option<Vec<Vec<Vec<f64>>>>,
    #[serde(default)]
    diagnostics: std::collections::BTreeMap<String, f64>,
}

/// Writes a filter file: mode, gain matrix (CE, with the model it acts on)
/// or FIR coefficient list (robust), plus a scalar diagnostics table.
pub fn save_filter(path: &Path, spec: &FilterSpec, diagnostics: &[(&str, f64)]) -> Result<()> {
    let diag = diagnostics
        .iter()
        .map(|(k, v)| (k.to_string(), *v))
        .collect();
    let file = match spec {
        FilterSpec::CeStatic { model_hat, gain } => FilterFile {
            mode: "ce".into(),
            gain: Some(matrix_to_rows(gain)),
            model: Some(ModelFile::from_model(model_hat)),
            coeffs: None,
            diagnostics: diag,
        },
        FilterSpec::RobustFir { coeffs } => FilterFile {
            mode: "robust".into(),
            gain: None,
            model: None,
            coeffs: Some(coeffs.iter().map(matrix_to_rows).collect()),
            diagnostics: diag,
        },
    };
    let text = toml::to_string_pretty(&file).map_err(|e| Error::Parse(e.to_string()))?;
    fs::write(path, text)?;
    Ok(())
}

pub fn load_filter(path: &Path) -> Result<(FilterSpec, Vec<(String, f64)>)> {
    let text = fs::read_to_string(path)?;
    let file: FilterFile = toml::from_str(&text).map_err(|e| Error::Parse(e.to_string()))?;
    let diag: Vec<(String, f64)> = file.diagnostics.into_iter().collect();
    let spec = match file.mode.as_str() {
        "ce" => {
            let gain = rows_to_matrix(
                &file.gain.ok_or_else(|| Error::Parse("ce filter needs a gain".into()))?,
                "gain",
            )?;
            let model = file
                .model
                .ok_or_else(|| Error::Parse("ce filter needs its model".into()))?
                .into_model()?;
            if gain.nrows() != model.n() || gain.ncols() != model.m() {
                return Err(Error::Parse("gain shape does not match model".into()));
            }
            FilterSpec::CeStatic {
                model_hat: model,
                gain,
            }
        }
        "robust" => {
            let coeffs = file
                .coeffs
                .ok_or_else(|| Error::Parse("robust filter needs coefficients".into()))?;
            if coeffs.is_empty() {
                return Err(Error::Parse("robust filter has no coefficients".into()));
            }
            let mats: Vec<DMatrix<f64>> = coeffs
                .iter()
                .enumerate()
                .map(|(i, rows)| rows_to_matrix(rows, &format!("coeff {i}")))
                .collect::<Result<_>>()?;
            let (n, m) = (mats[0].nrows(), mats[0].ncols());
            if mats.iter().any(|g| g.nrows() != n || g.ncols() != m) {
                return Err(Error::Parse("coefficient shapes disagree".into()));
            }
            FilterSpec::RobustFir { coeffs: mats }
        }
        other => return Err(Error::Parse(format!("unknown filter mode {other}"))),
    };
    Ok((spec, diag))
}

/// Writes a header plus formatted rows as CSV.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut out = fs::File::create(path)?;
    writeln!(out, "{}", header.join(","))?;
    for row in rows {
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}
