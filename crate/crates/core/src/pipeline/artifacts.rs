use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{PipelineError, PreprocessOutput, Result};
use crate::data::{Column, Dataset, LoadReport, NormalizationStats, TargetGranularity};

fn io_err(path: &Path, e: impl std::fmt::Display) -> PipelineError {
    PipelineError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(|e| io_err(path, e))?))
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| io_err(path, e))?;
    w.write_all(b"\n").map_err(|e| io_err(path, e))?;
    w.flush().map_err(|e| io_err(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    if !path.exists() {
        return Err(PipelineError::Config(format!("file not found: {}", path.display())));
    }
    let f = File::open(path).map_err(|e| io_err(path, e))?;
    serde_json::from_reader(BufReader::new(f)).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))
}

#[derive(Serialize, Deserialize)]
struct DatasetMeta {
    role: crate::data::Role,
    granularity: Option<TargetGranularity>,
    columns: Vec<Column>,
}

fn meta_path(path: &Path) -> std::path::PathBuf {
    path.with_extension("columns.json")
}

/// Writes `<name>.csv` and its column metadata next to it as `<name>.columns.json`.
pub fn write_dataset(path: &Path, ds: &Dataset) -> Result<()> {
    let mut w = create(path)?;
    ds.write_csv(&mut w)?;
    w.flush().map_err(|e| io_err(path, e))?;
    write_json(
        &meta_path(path),
        &DatasetMeta {
            role: ds.role,
            granularity: ds.granularity,
            columns: ds.columns.clone(),
        },
    )
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    if !path.exists() {
        return Err(PipelineError::Config(format!("file not found: {}", path.display())));
    }
    let meta: Option<DatasetMeta> = if meta_path(path).exists() { Some(read_json(&meta_path(path))?) } else { None };
    let f = File::open(path).map_err(|e| io_err(path, e))?;
    let mut ds = Dataset::read_csv(BufReader::new(f), meta.as_ref().map(|m| m.columns.clone()))?;
    if let Some(m) = meta {
        ds.role = m.role;
        ds.granularity = m.granularity;
    }
    Ok(ds)
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    variants: BTreeMap<String, TargetGranularity>,
    granularities: Vec<TargetGranularity>,
}

/// Layout: `manifest.json`, `load_report.json`, `variants/<key>.csv`,
/// `validation/<granularity>.csv`, `normalization/<granularity>.json`.
pub fn write_preprocessed(dir: &Path, out: &PreprocessOutput) -> Result<()> {
    write_json(&dir.join("load_report.json"), &out.load_report)?;
    for (key, ds) in &out.variants {
        write_dataset(&dir.join("variants").join(format!("{key}.csv")), ds)?;
    }
    for (g, ds) in &out.validation {
        write_dataset(&dir.join("validation").join(format!("{}.csv", g.as_str())), ds)?;
    }
    for (g, stats) in &out.stats {
        write_json(&dir.join("normalization").join(format!("{}.json", g.as_str())), stats)?;
    }
    write_json(
        &dir.join("manifest.json"),
        &Manifest {
            variants: out.variant_granularity.clone(),
            granularities: out.stats.keys().copied().collect(),
        },
    )
}

pub fn read_preprocessed(dir: &Path) -> Result<PreprocessOutput> {
    let manifest_path = dir.join("manifest.json");
    if !manifest_path.exists() {
        return Err(PipelineError::Config(format!(
            "{} is not a preprocessing output directory (no manifest.json)",
            dir.display()
        )));
    }
    let manifest: Manifest = read_json(&manifest_path)?;
    if manifest.variants.is_empty() {
        return Err(PipelineError::Config(format!("{} holds no variants", dir.display())));
    }
    let load_report: LoadReport = read_json(&dir.join("load_report.json"))?;
    let mut variants = BTreeMap::new();
    for key in manifest.variants.keys() {
        variants.insert(key.clone(), read_dataset(&dir.join("variants").join(format!("{key}.csv")))?);
    }
    let mut validation = BTreeMap::new();
    let mut stats = BTreeMap::new();
    for g in &manifest.granularities {
        validation.insert(*g, read_dataset(&dir.join("validation").join(format!("{}.csv", g.as_str())))?);
        let s: NormalizationStats = read_json(&dir.join("normalization").join(format!("{}.json", g.as_str())))?;
        stats.insert(*g, s);
    }
    Ok(PreprocessOutput {
        load_report,
        variants,
        variant_granularity: manifest.variants,
        validation,
        stats,
    })
}
