//! File formats shared with the command-line interface.
//!
//! - Curve-matrix CSV: first row holds the grid points, each following row
//!   one curve. Responses travel in a separate single-column CSV aligned
//!   row-for-row with the curves.
//! - Models persist as JSON; floats round-trip bit-exactly through
//!   serde_json's shortest representation.
//! - Study reports are emitted as long-format CSV
//!   (`method,replicate,metric,t,value`).
//!
//! All writers go through an atomic temp-file-and-rename step.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baselines::{BaselineKind, BaselineModel};
use crate::continuum::{ComponentFit, DeltaValue, FCRModel};
use crate::error::{FcrError, Result};
use crate::fgrid::{Curve, FunctionalDataset, Grid};
use crate::simulate::{GenerativeModel, StudyReport};
use crate::tuning::TuningReport;

// ---------------------------------------------------------------------------
// Atomic writes
// ---------------------------------------------------------------------------

fn temp_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".tmp");
    path.with_file_name(name)
}

/// Write bytes to `path` atomically (temp file in the same directory, then
/// rename).
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = temp_path(path);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Curve-matrix CSV
// ---------------------------------------------------------------------------

fn csv_error(path: &Path, e: csv::Error) -> FcrError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => FcrError::Io(io),
        other => FcrError::DataFormat(format!("{}: {other:?}", path.display())),
    }
}

fn parse_cell(raw: &str, row: usize, col: usize) -> Result<f64> {
    raw.trim().parse::<f64>().map_err(|_| {
        FcrError::DataFormat(format!(
            "row {}, column {}: cannot parse '{raw}' as a number",
            row + 1,
            col + 1
        ))
    })
}

/// Read a curve matrix: first row = grid points, following rows = curves.
pub fn read_curves_csv(path: &Path) -> Result<FunctionalDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| FcrError::DataFormat(format!("row {}: {e}", i + 1)))?;
        if record.iter().all(|c| c.trim().is_empty()) {
            continue;
        }
        let mut row = Vec::with_capacity(record.len());
        for (j, cell) in record.iter().enumerate() {
            row.push(parse_cell(cell, i, j)?);
        }
        rows.push(row);
    }
    if rows.len() < 2 {
        return Err(FcrError::DataFormat(
            "curve CSV needs a grid row plus at least one curve row".into(),
        ));
    }
    let grid = Grid::new(rows[0].clone())?;
    let m = grid.len();
    for (i, row) in rows[1..].iter().enumerate() {
        if row.len() != m {
            return Err(FcrError::DataFormat(format!(
                "curve row {} has {} values, expected {m}",
                i + 1,
                row.len()
            )));
        }
    }
    FunctionalDataset::from_rows(grid, &rows[1..], None)
}

/// Read a single-column CSV of responses.
pub fn read_responses_csv(path: &Path) -> Result<Vec<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| FcrError::DataFormat(format!("row {}: {e}", i + 1)))?;
        let cells: Vec<&str> = record.iter().filter(|c| !c.trim().is_empty()).collect();
        if cells.is_empty() {
            continue;
        }
        if cells.len() != 1 {
            return Err(FcrError::DataFormat(format!(
                "response row {} has {} values, expected 1",
                i + 1,
                cells.len()
            )));
        }
        out.push(parse_cell(cells[0], i, 0)?);
    }
    if out.is_empty() {
        return Err(FcrError::DataFormat("empty response file".into()));
    }
    Ok(out)
}

/// Serialize a curve matrix in the same layout `read_curves_csv` accepts.
pub fn curves_to_csv(ds: &FunctionalDataset) -> String {
    let mut out = String::new();
    let points: Vec<String> = ds.grid().points().iter().map(|v| format!("{v}")).collect();
    out.push_str(&points.join(","));
    out.push('\n');
    for i in 0..ds.n() {
        let row: Vec<String> = ds
            .curve(i)
            .values()
            .iter()
            .map(|v| format!("{v}"))
            .collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn predictions_to_csv(values: &[f64]) -> String {
    let mut out = String::new();
    for v in values {
        out.push_str(&format!("{v}\n"));
    }
    out
}

// ---------------------------------------------------------------------------
// Model JSON
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DeltaFile {
    Value(f64),
    Tag(String),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ComponentFile {
    pub weight: Vec<f64>,
    pub delta: DeltaFile,
    pub coef: f64,
    pub score_sd: f64,
    pub objective: f64,
}

/// On-disk model schema shared by the continuum fit and the baselines; the
/// `kind` field tells them apart.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelFile {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    pub p: usize,
    pub grid_points: Vec<f64>,
    pub x_mean: Vec<f64>,
    pub y_mean: f64,
    pub beta_hat: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncated: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub components: Option<Vec<ComponentFile>>,
}

fn delta_to_file(delta: DeltaValue) -> DeltaFile {
    match delta {
        DeltaValue::Interior(v) => DeltaFile::Value(v),
        DeltaValue::ToZero => DeltaFile::Tag("to_zero".into()),
        DeltaValue::ToMinusOne => DeltaFile::Tag("to_minus_one".into()),
        DeltaValue::ToInfinity => DeltaFile::Tag("to_infinity".into()),
    }
}

fn delta_from_file(delta: &DeltaFile) -> Result<DeltaValue> {
    match delta {
        DeltaFile::Value(v) => Ok(DeltaValue::Interior(*v)),
        DeltaFile::Tag(tag) => match tag.as_str() {
            "to_zero" => Ok(DeltaValue::ToZero),
            "to_minus_one" => Ok(DeltaValue::ToMinusOne),
            "to_infinity" => Ok(DeltaValue::ToInfinity),
            other => Err(FcrError::DataFormat(format!("unknown delta tag '{other}'"))),
        },
    }
}

/// Either flavor of fitted model, as read back from disk.
#[derive(Clone, Debug)]
pub enum AnyModel {
    Fcr(FCRModel),
    Baseline(BaselineModel),
}

impl AnyModel {
    pub fn predict(&self, ds: &FunctionalDataset) -> Result<Vec<f64>> {
        match self {
            AnyModel::Fcr(m) => m.predict(ds),
            AnyModel::Baseline(m) => m.predict(ds),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            AnyModel::Fcr(_) => "fcr",
            AnyModel::Baseline(b) => b.kind.as_str(),
        }
    }
}

pub fn fcr_model_to_file(model: &FCRModel) -> ModelFile {
    ModelFile {
        kind: "fcr".into(),
        alpha: Some(model.alpha()),
        p: model.p(),
        grid_points: model.grid().points().to_vec(),
        x_mean: model.x_mean().values().to_vec(),
        y_mean: model.y_mean(),
        beta_hat: model.beta_hat().values().to_vec(),
        truncated: Some(model.truncated()),
        components: Some(
            model
                .components()
                .iter()
                .map(|c| ComponentFile {
                    weight: c.weight.values().to_vec(),
                    delta: delta_to_file(c.delta),
                    coef: c.coef,
                    score_sd: c.score_sd,
                    objective: c.objective,
                })
                .collect(),
        ),
    }
}

pub fn baseline_model_to_file(model: &BaselineModel) -> ModelFile {
    ModelFile {
        kind: model.kind.as_str().into(),
        alpha: None,
        p: model.p,
        grid_points: model.grid.points().to_vec(),
        x_mean: model.x_mean.values().to_vec(),
        y_mean: model.y_mean,
        beta_hat: model.beta_hat.values().to_vec(),
        truncated: None,
        components: None,
    }
}

pub fn model_from_file(file: &ModelFile) -> Result<AnyModel> {
    let grid = Grid::new(file.grid_points.clone())?;
    match file.kind.as_str() {
        "fcr" => {
            let alpha = file
                .alpha
                .ok_or_else(|| FcrError::DataFormat("fcr model missing alpha".into()))?;
            let components = file
                .components
                .as_ref()
                .map(|cs| -> Result<Vec<ComponentFit>> {
                    cs.iter()
                        .map(|c| {
                            Ok(ComponentFit {
                                weight: Curve::new(c.weight.clone()),
                                delta: delta_from_file(&c.delta)?,
                                coef: c.coef,
                                score_sd: c.score_sd,
                                objective: c.objective,
                            })
                        })
                        .collect()
                })
                .transpose()?
                .unwrap_or_default();
            if components.len() != file.p {
                return Err(FcrError::DataFormat(format!(
                    "model lists p = {} but carries {} components",
                    file.p,
                    components.len()
                )));
            }
            let model = FCRModel::from_parts(
                alpha,
                components,
                Curve::new(file.beta_hat.clone()),
                Curve::new(file.x_mean.clone()),
                file.y_mean,
                grid,
                file.truncated.unwrap_or(false),
            )?;
            Ok(AnyModel::Fcr(model))
        }
        "fpcr" | "fpls" => {
            let kind = if file.kind == "fpcr" {
                BaselineKind::Fpcr
            } else {
                BaselineKind::Fpls
            };
            if file.beta_hat.len() != grid.len() || file.x_mean.len() != grid.len() {
                return Err(FcrError::DataFormat("curve length mismatch".into()));
            }
            Ok(AnyModel::Baseline(BaselineModel {
                kind,
                p: file.p,
                beta_hat: Curve::new(file.beta_hat.clone()),
                x_mean: Curve::new(file.x_mean.clone()),
                y_mean: file.y_mean,
                grid,
                weights: Vec::new(),
                coefs: Vec::new(),
            }))
        }
        other => Err(FcrError::DataFormat(format!(
            "unknown model kind '{other}'"
        ))),
    }
}

pub fn model_to_json(file: &ModelFile) -> Result<String> {
    serde_json::to_string_pretty(file)
        .map_err(|e| FcrError::DataFormat(format!("model serialization: {e}")))
}

pub fn model_from_json(text: &str) -> Result<AnyModel> {
    let file: ModelFile =
        serde_json::from_str(text).map_err(|e| FcrError::DataFormat(format!("model JSON: {e}")))?;
    model_from_file(&file)
}

// ---------------------------------------------------------------------------
// Generative-model JSON
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EigenPairFile {
    pub lambda: f64,
    pub curve: Vec<f64>,
}

/// On-disk generator schema; exactly one of `sigma` (a standard deviation)
/// or `snr` should normally be set. With both absent the generator is
/// noiseless.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GenerativeModelFile {
    pub grid_points: Vec<f64>,
    pub mean: Vec<f64>,
    pub eigen: Vec<EigenPairFile>,
    pub beta_true: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snr: Option<f64>,
}

pub fn generative_to_file(gm: &GenerativeModel, snr: Option<f64>) -> GenerativeModelFile {
    GenerativeModelFile {
        grid_points: gm.grid().points().to_vec(),
        mean: gm.mean().values().to_vec(),
        eigen: gm
            .eigenpairs()
            .iter()
            .map(|(lambda, curve)| EigenPairFile {
                lambda: *lambda,
                curve: curve.values().to_vec(),
            })
            .collect(),
        beta_true: gm.beta_true().values().to_vec(),
        sigma: if snr.is_none() {
            Some(gm.sigma())
        } else {
            None
        },
        snr,
    }
}

pub fn generative_from_file(file: &GenerativeModelFile) -> Result<GenerativeModel> {
    let grid = Grid::new(file.grid_points.clone())?;
    let eigenpairs = file
        .eigen
        .iter()
        .map(|e| (e.lambda, Curve::new(e.curve.clone())))
        .collect();
    let gm = GenerativeModel::new(
        grid,
        Curve::new(file.mean.clone()),
        eigenpairs,
        Curve::new(file.beta_true.clone()),
        file.sigma.unwrap_or(0.0),
    )?;
    match (file.sigma, file.snr) {
        (Some(_), _) => Ok(gm),
        (None, Some(snr)) => {
            let sigma = crate::simulate::snr_to_sigma(&gm, snr)?;
            gm.with_sigma(sigma)
        }
        (None, None) => Ok(gm),
    }
}

pub fn generative_to_json(file: &GenerativeModelFile) -> Result<String> {
    serde_json::to_string_pretty(file)
        .map_err(|e| FcrError::DataFormat(format!("generative serialization: {e}")))
}

pub fn generative_from_json(text: &str) -> Result<GenerativeModel> {
    let file: GenerativeModelFile = serde_json::from_str(text)
        .map_err(|e| FcrError::DataFormat(format!("generative JSON: {e}")))?;
    generative_from_file(&file)
}

// ---------------------------------------------------------------------------
// Report CSV
// ---------------------------------------------------------------------------

/// GCV table as CSV: rows = p, columns = α. Infeasible cells print as `inf`.
pub fn gcv_table_to_csv(report: &TuningReport) -> String {
    let mut out = String::from("p");
    for a in &report.alphas {
        out.push_str(&format!(",alpha={a}"));
    }
    out.push('\n');
    for (p_idx, row) in report.gcv_table.iter().enumerate() {
        out.push_str(&format!("{}", p_idx + 1));
        for v in row {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    out
}

/// Long-format study CSV: `method,replicate,metric,t,value`. Scalar metrics
/// (`ise`, `remspe`, `failures`) leave `t` empty; the `rmse` curve leaves
/// `replicate` empty and fills `t` with grid points.
pub fn study_report_to_csv(report: &StudyReport) -> String {
    let mut out = String::from("method,replicate,metric,t,value\n");
    for method in &report.methods {
        for (r, v) in method.ise.iter().enumerate() {
            if let Some(v) = v {
                out.push_str(&format!("{},{r},ise,,{v}\n", method.method));
            }
        }
        for (r, v) in method.remspe.iter().enumerate() {
            if let Some(v) = v {
                out.push_str(&format!("{},{r},remspe,,{v}\n", method.method));
            }
        }
        if let Some(rmse) = &method.rmse_curve {
            for (t, v) in report.grid.points().iter().zip(rmse.values()) {
                out.push_str(&format!("{},,rmse,{t},{v}\n", method.method));
            }
        }
        out.push_str(&format!(
            "{},,failures,,{}\n",
            method.method, method.failures
        ));
    }
    out
}
