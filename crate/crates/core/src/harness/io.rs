//! Checkpoints, result CSVs and external payoff matrices.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::games::{GameInstance, GamePayload, MatrixPayload};
use crate::solvers::{Arch, MetaSolverParams};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Checkpoint {
    format_version: u32,
    arch: Arch,
    layer_sizes: Vec<usize>,
    flat_params: Vec<f64>,
}

/// JSON with shortest round-trip float formatting, so restoring is exact.
pub fn checkpoint_json(params: &MetaSolverParams) -> String {
    let ck = Checkpoint {
        format_version: CHECKPOINT_VERSION,
        arch: params.arch,
        layer_sizes: params.layer_sizes.clone(),
        flat_params: params.flat.clone(),
    };
    serde_json::to_string_pretty(&ck).expect("checkpoint serialisation cannot fail") + "\n"
}

pub fn parse_checkpoint(text: &str) -> Result<MetaSolverParams> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| Error::Checkpoint(e.to_string()))?;
    let found = value
        .get("format_version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| Error::Checkpoint("missing format_version".into()))?;
    if found != u64::from(CHECKPOINT_VERSION) {
        return Err(Error::Version {
            found: u32::try_from(found).unwrap_or(u32::MAX),
            expected: CHECKPOINT_VERSION,
        });
    }
    let ck: Checkpoint = serde_json::from_value(value).map_err(|e| Error::Checkpoint(e.to_string()))?;
    MetaSolverParams::new(ck.arch, ck.layer_sizes, ck.flat_params)
        .map_err(|e| Error::Checkpoint(e.to_string()))
}

pub fn save_checkpoint(path: &Path, params: &MetaSolverParams) -> Result<()> {
    fs::write(path, checkpoint_json(params)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<MetaSolverParams> {
    parse_checkpoint(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
}

/// One row per (run, game, iteration).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsRow {
    pub run_id: String,
    pub seed: u64,
    pub game_kind: String,
    pub game_seed: u64,
    pub solver: String,
    pub iteration: usize,
    pub exploitability: f64,
}

pub const RESULTS_HEADER: &str = "run_id,seed,game_kind,game_seed,solver,iteration,exploitability";

/// Serialises rows (with header) to CSV text; a header is written even
/// when there are no rows.
pub fn csv_string<T: Serialize>(rows: &[T], header: &str) -> Result<String> {
    if rows.is_empty() {
        return Ok(format!("{header}\n"));
    }
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::Config(format!("cannot encode CSV row: {e}")))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Config(format!("cannot encode CSV: {e}")))?;
    Ok(String::from_utf8(bytes).expect("CSV output is UTF-8"))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_results(path: &Path) -> Result<Vec<ResultsRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    r.deserialize()
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// Square numeric CSV without header. The matrix is replaced by its
/// antisymmetric part `(A − Aᵀ)/2`.
pub fn load_payoff_csv(path: &Path) -> Result<GameInstance> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_payoff_csv(&text)
}

pub fn parse_payoff_csv(text: &str) -> Result<GameInstance> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Matrix(e.to_string()))?;
        let row = record
            .iter()
            .enumerate()
            .map(|(j, cell)| {
                cell.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Matrix(format!("row {}, column {}: `{cell}` is not a finite number", i + 1, j + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::Matrix(format!(
                    "ragged rows: row 1 has {} cells, row {} has {}",
                    first.len(),
                    i + 1,
                    row.len()
                )));
            }
        }
        rows.push(row);
    }
    let n = rows.len();
    if n == 0 {
        return Err(Error::Matrix("file contains no rows".into()));
    }
    if rows[0].len() != n {
        return Err(Error::Matrix(format!("matrix is {n}x{}, expected square", rows[0].len())));
    }
    let payload = MatrixPayload::antisymmetrize(n, &rows.concat())?;
    Ok(GameInstance::new(GamePayload::ExternalMatrix(payload), 0))
}
