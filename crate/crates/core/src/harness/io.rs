//! File formats: dataset CSV, model JSON, trajectory-log CSV and the
//! stiffness report.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::collect::{CollectionInfo, RecordedDataset, Recording};
use super::probe::StiffnessReport;
use super::tracking::{LogRow, TrajectoryLog};
use crate::error::{Error, Result};
use crate::gp::{Dataset, Hyperparameters, TrainedGP};

pub const DATASET_FORMAT_VERSION: u32 = 1;
pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Recorded in every dataset file.
pub const FORCE_CONVENTION: &str = "signed-net-left-minus-right";

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>, path: &Path) -> Result<Vec<u8>> {
    w.into_inner()
        .map_err(|e| Error::io(path, std::io::Error::other(e.to_string())))
}

fn numbered(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (1..=n).map(move |i| format!("{prefix}_{i}"))
}

fn parse_f64(path: &Path, field: &str, line: usize) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|_| Error::malformed(path, format!("line {line}: cannot parse {field:?} as a number")))
}

fn to_csv_err(path: &Path, e: csv::Error) -> Error {
    Error::malformed(path, e.to_string())
}

/// Splits leading `# key=value` lines from the CSV body.
fn split_metadata(text: &str) -> (Vec<(String, String)>, &str) {
    let mut meta = Vec::new();
    let mut rest = text;
    while let Some(line) = rest.strip_prefix('#') {
        let (line, tail) = match line.find('\n') {
            Some(i) => (&line[..i], &line[i + 1..]),
            None => (line, ""),
        };
        if let Some((k, v)) = line.trim().split_once('=') {
            meta.push((k.trim().to_string(), v.trim().to_string()));
        }
        rest = tail;
    }
    (meta, rest)
}

fn meta_value<'a>(meta: &'a [(String, String)], key: &str, path: &Path) -> Result<&'a str> {
    meta.iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| v.as_str())
        .ok_or_else(|| Error::malformed(path, format!("missing `{key}` metadata")))
}

fn check_version(found: &str, expected: u32, path: &Path) -> Result<()> {
    let found: u32 = found
        .parse()
        .map_err(|_| Error::malformed(path, format!("bad format_version {found:?}")))?;
    if found != expected {
        return Err(Error::VersionMismatch { found, expected });
    }
    Ok(())
}

fn check_fingerprint(found: &str, expected: &str) -> Result<()> {
    if found != expected {
        return Err(Error::FingerprintMismatch {
            found: found.to_string(),
            expected: expected.to_string(),
        });
    }
    Ok(())
}

/// Dataset CSV: `#`-prefixed metadata (format version, fingerprint, row
/// count, force convention, collection settings) followed by
/// `time,ydd,yd,y,p_1…p_n,target_1…target_n`.
pub fn save_dataset(data: &RecordedDataset, path: &Path) -> Result<()> {
    let rec = &data.recording;
    let n = rec.dataset.outputs();
    let mut out = format!(
        "# format_version={DATASET_FORMAT_VERSION}\n# fingerprint={}\n# rows={}\n# force_convention={FORCE_CONVENTION}\n# collection={}\n",
        data.fingerprint,
        rec.dataset.len(),
        serde_json::to_string(&data.info).expect("collection info serializes"),
    )
    .into_bytes();
    let mut w = csv_writer();
    let header: Vec<String> = ["time", "ydd", "yd", "y"]
        .into_iter()
        .map(String::from)
        .chain(numbered("p", n))
        .chain(numbered("target", n))
        .collect();
    w.write_record(&header).map_err(|e| to_csv_err(path, e))?;
    let x = rec.dataset.inputs();
    let t = rec.dataset.targets();
    for j in 0..rec.dataset.len() {
        let row: Vec<String> = std::iter::once(rec.time[j])
            .chain(x.column(j).iter().copied())
            .chain(rec.forces.row(j).iter().copied())
            .chain(t.row(j).iter().copied())
            .map(|v| v.to_string())
            .collect();
        w.write_record(&row).map_err(|e| to_csv_err(path, e))?;
    }
    out.extend(finish(w, path)?);
    write_file(path, &out)
}

/// Loads a dataset file. With `expected_fingerprint`, a file recorded under
/// a different configuration is rejected.
pub fn load_dataset(path: &Path, expected_fingerprint: Option<&str>) -> Result<RecordedDataset> {
    let text = read_file(path)?;
    let (meta, body) = split_metadata(&text);
    check_version(meta_value(&meta, "format_version", path)?, DATASET_FORMAT_VERSION, path)?;
    let fingerprint = meta_value(&meta, "fingerprint", path)?.to_string();
    let rows: usize = meta_value(&meta, "rows", path)?
        .parse()
        .map_err(|_| Error::malformed(path, "bad row count"))?;
    let info: CollectionInfo = serde_json::from_str(meta_value(&meta, "collection", path)?)
        .map_err(|e| Error::malformed(path, format!("collection metadata: {e}")))?;
    check_fingerprint(&fingerprint, &info.fingerprint())?;
    if let Some(expected) = expected_fingerprint {
        check_fingerprint(&fingerprint, expected)?;
    }

    let mut reader = csv::ReaderBuilder::new().from_reader(body.as_bytes());
    let header = reader.headers().map_err(|e| to_csv_err(path, e))?.clone();
    if header.len() < 6 || (header.len() - 4) % 2 != 0 || &header[0] != "time" {
        return Err(Error::malformed(path, "unexpected dataset header"));
    }
    let n = (header.len() - 4) / 2;
    let mut time = Vec::with_capacity(rows);
    let mut inputs = Vec::with_capacity(rows);
    let mut forces = Vec::with_capacity(rows);
    let mut targets = Vec::with_capacity(rows);
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| to_csv_err(path, e))?;
        let vals: Vec<f64> = record
            .iter()
            .map(|f| parse_f64(path, f, i + 2))
            .collect::<Result<_>>()?;
        time.push(vals[0]);
        inputs.push(vals[1..4].to_vec());
        forces.push(vals[4..4 + n].to_vec());
        targets.push(vals[4 + n..].to_vec());
    }
    if time.len() != rows {
        return Err(Error::malformed(path, format!("expected {rows} rows, found {}", time.len())));
    }
    let dataset = Dataset::from_rows(&inputs, &targets).map_err(|e| Error::malformed(path, e.to_string()))?;
    Ok(RecordedDataset {
        info,
        fingerprint,
        recording: Recording {
            time,
            forces: DMatrix::from_fn(rows, n, |j, i| forces[j][i]),
            dataset,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    fingerprint: String,
    collection: CollectionInfo,
    hyperparameters: Hyperparameters,
    log_likelihood: f64,
    /// One row per training point, `[ÿ, ẏ, y]`.
    inputs: Vec<Vec<f64>>,
    targets: Vec<Vec<f64>>,
}

/// A trained GP together with the collection that produced its data.
#[derive(Debug, Clone)]
pub struct SavedModel {
    pub gp: TrainedGP,
    pub collection: CollectionInfo,
    pub fingerprint: String,
    pub log_likelihood: f64,
}

pub fn save_model(model: &SavedModel, path: &Path) -> Result<()> {
    let d = model.gp.dataset();
    let file = ModelFile {
        format_version: MODEL_FORMAT_VERSION,
        fingerprint: model.fingerprint.clone(),
        collection: model.collection.clone(),
        hyperparameters: model.gp.hyperparameters().clone(),
        log_likelihood: model.log_likelihood,
        inputs: d.inputs().column_iter().map(|c| c.iter().copied().collect()).collect(),
        targets: d.targets().row_iter().map(|r| r.iter().copied().collect()).collect(),
    };
    let mut text = serde_json::to_string_pretty(&file).expect("model serializes");
    text.push('\n');
    write_file(path, text.as_bytes())
}

pub fn load_model(path: &Path, expected_fingerprint: Option<&str>) -> Result<SavedModel> {
    let text = read_file(path)?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::malformed(path, e.to_string()))?;
    let version = value
        .get("format_version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| Error::malformed(path, "missing format_version"))?;
    if version != u64::from(MODEL_FORMAT_VERSION) {
        return Err(Error::VersionMismatch {
            found: version as u32,
            expected: MODEL_FORMAT_VERSION,
        });
    }
    let file: ModelFile = serde_json::from_value(value).map_err(|e| Error::malformed(path, e.to_string()))?;
    check_fingerprint(&file.fingerprint, &file.collection.fingerprint())?;
    if let Some(expected) = expected_fingerprint {
        check_fingerprint(&file.fingerprint, expected)?;
    }
    let dataset = Dataset::from_rows(&file.inputs, &file.targets).map_err(|e| Error::malformed(path, e.to_string()))?;
    let gp = TrainedGP::fit(dataset, file.hyperparameters)?;
    Ok(SavedModel {
        gp,
        collection: file.collection,
        fingerprint: file.fingerprint,
        log_likelihood: file.log_likelihood,
    })
}

/// `time,y_desired,y_actual,alpha,var_1…,p_1…,pff_1…,u_1…`
pub fn save_log(log: &TrajectoryLog, path: &Path) -> Result<()> {
    let n = log.dof();
    let mut w = csv_writer();
    let header: Vec<String> = ["time", "y_desired", "y_actual", "alpha"]
        .into_iter()
        .map(String::from)
        .chain(numbered("var", n))
        .chain(numbered("p", n))
        .chain(numbered("pff", n))
        .chain(numbered("u", n))
        .collect();
    w.write_record(&header).map_err(|e| to_csv_err(path, e))?;
    for r in &log.rows {
        let vals = [r.time, r.y_desired, r.y_actual, r.alpha]
            .into_iter()
            .chain(r.variance.iter().copied())
            .chain(r.p_applied.iter().copied())
            .chain(r.p_ff.iter().copied())
            .chain(r.u.iter().copied())
            .map(|v| v.to_string());
        w.write_record(vals).map_err(|e| to_csv_err(path, e))?;
    }
    let bytes = finish(w, path)?;
    write_file(path, &bytes)
}

pub fn load_log(path: &Path) -> Result<TrajectoryLog> {
    let text = read_file(path)?;
    let mut reader = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| to_csv_err(path, e))?.clone();
    if header.len() < 8 || (header.len() - 4) % 4 != 0 || &header[0] != "time" || &header[3] != "alpha" {
        return Err(Error::malformed(path, "unexpected log header"));
    }
    let n = (header.len() - 4) / 4;
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| to_csv_err(path, e))?;
        let v: Vec<f64> = record
            .iter()
            .map(|f| parse_f64(path, f, i + 2))
            .collect::<Result<_>>()?;
        let block = |b: usize| v[4 + b * n..4 + (b + 1) * n].to_vec();
        rows.push(LogRow {
            time: v[0],
            y_desired: v[1],
            y_actual: v[2],
            alpha: v[3],
            variance: block(0),
            p_applied: block(1),
            p_ff: block(2),
            u: block(3),
        });
    }
    if rows.windows(2).any(|w| !(w[1].time > w[0].time)) {
        return Err(Error::malformed(path, "log times are not strictly increasing"));
    }
    Ok(TrajectoryLog { rows })
}

pub fn save_report(report: &StiffnessReport, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(report).expect("report serializes");
    text.push('\n');
    write_file(path, text.as_bytes())
}

pub fn load_report(path: &Path) -> Result<StiffnessReport> {
    let text = read_file(path)?;
    serde_json::from_str(&text).map_err(|e| Error::malformed(path, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metadata_split() {
        let (meta, rest) = split_metadata("# a=1\n# b = x=y\ntime,y\n1,2\n");
        assert_eq!(meta, vec![("a".into(), "1".into()), ("b".into(), "x=y".into())]);
        assert_eq!(rest, "time,y\n1,2\n");
    }
}
