//! On-disk formats: signal CSVs with JSON sidecars, dataset manifests,
//! run metadata and line-delimited metric records.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use beatres::signals::{BeatAnnotations, DatasetConfig, SampleKind, Signal};
use serde::{Deserialize, Serialize};

use crate::config::{tool_version, ExperimentConfig};
use crate::error::{CliError, CliResult};

pub const MANIFEST: &str = "manifest.json";
pub const RESOLVED_CONFIG: &str = "config.toml";
pub const RUN_INFO: &str = "run.json";

/// Everything about a signal except its samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sidecar {
    pub dt: f64,
    pub len: usize,
    pub kind: Option<SampleKind>,
    pub annotations: Option<BeatAnnotations>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub index: usize,
    pub csv: String,
    pub sidecar: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub tool_version: String,
    pub config_hash: String,
    /// Present when the signals came from the dataset generator.
    pub dataset: Option<DatasetConfig>,
    pub samples: Vec<ManifestEntry>,
}

/// Identifies the configuration and build behind an output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub command: String,
    pub tool_version: String,
    pub config_hash: String,
    pub seeds: std::collections::BTreeMap<String, u64>,
}

pub fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

/// Writes the resolved config and run info into `dir`.
pub fn write_run_info(dir: &Path, command: &str, cfg: &ExperimentConfig) -> CliResult<()> {
    create_dir(dir)?;
    write_text(&dir.join(RESOLVED_CONFIG), &cfg.to_toml())?;
    let info = RunInfo {
        command: command.to_string(),
        tool_version: tool_version(),
        config_hash: cfg.hash(),
        seeds: crate::commands::seed_map(cfg),
    };
    write_text(
        &dir.join(RUN_INFO),
        &(serde_json::to_string_pretty(&info)? + "\n"),
    )
}

pub fn write_signal_csv(path: &Path, signal: &Signal) -> CliResult<()> {
    write_series_csv(path, signal.dt, &signal.samples)
}

/// `time_s,value` rows, one per sample.
pub fn write_series_csv(path: &Path, dt: f64, values: &[f64]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::io(path, e))?;
    w.write_record(["time_s", "value"])?;
    for (i, v) in values.iter().enumerate() {
        w.serialize((i as f64 * dt, v))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn read_series_csv(path: &Path) -> CliResult<Vec<f64>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::io(path, e))?;
    let headers = r.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["time_s", "value"] {
        return Err(CliError::io(path, "expected header `time_s,value`"));
    }
    r.deserialize::<(f64, f64)>()
        .map(|row| row.map(|(_, v)| v).map_err(|e| CliError::io(path, e)))
        .collect()
}

/// Writes signals plus sidecars and a manifest into `dir`.
pub fn write_signal_dir(
    dir: &Path,
    signals: &[(Option<SampleKind>, &Signal)],
    dataset: Option<&DatasetConfig>,
    cfg: &ExperimentConfig,
) -> CliResult<Manifest> {
    create_dir(dir)?;
    let mut entries = Vec::with_capacity(signals.len());
    for (index, (kind, signal)) in signals.iter().enumerate() {
        let csv = format!("sample_{index:04}.csv");
        let sidecar = format!("sample_{index:04}.json");
        write_signal_csv(&dir.join(&csv), signal)?;
        let meta = Sidecar {
            dt: signal.dt,
            len: signal.len(),
            kind: kind.clone(),
            annotations: signal.annotations.clone(),
        };
        write_text(
            &dir.join(&sidecar),
            &(serde_json::to_string_pretty(&meta)? + "\n"),
        )?;
        entries.push(ManifestEntry {
            index,
            csv,
            sidecar,
        });
    }
    let manifest = Manifest {
        tool_version: tool_version(),
        config_hash: cfg.hash(),
        dataset: dataset.cloned(),
        samples: entries,
    };
    write_text(
        &dir.join(MANIFEST),
        &(serde_json::to_string_pretty(&manifest)? + "\n"),
    )?;
    Ok(manifest)
}

/// Loads every signal listed in `dir/manifest.json`.
pub fn read_signal_dir(dir: &Path) -> CliResult<Vec<Signal>> {
    let path = dir.join(MANIFEST);
    if !path.exists() {
        return Err(CliError::io(
            dir,
            "no manifest.json; generate signals with `beatres gen`",
        ));
    }
    let manifest: Manifest =
        serde_json::from_str(&read_text(&path)?).map_err(|e| CliError::io(&path, e))?;
    if manifest.samples.is_empty() {
        return Err(CliError::io(dir, "the signal directory lists no samples"));
    }
    manifest
        .samples
        .iter()
        .map(|entry| {
            let side_path = dir.join(&entry.sidecar);
            let meta: Sidecar = serde_json::from_str(&read_text(&side_path)?)
                .map_err(|e| CliError::io(&side_path, e))?;
            let samples = read_series_csv(&dir.join(&entry.csv))?;
            if samples.len() != meta.len {
                return Err(CliError::io(
                    &side_path,
                    format!("{} rows, sidecar says {}", samples.len(), meta.len),
                ));
            }
            let signal = Signal {
                samples,
                dt: meta.dt,
                annotations: meta.annotations,
            };
            signal.validate()?;
            Ok(signal)
        })
        .collect()
}

/// Appends JSON records, one per line.
pub struct JsonlWriter {
    path: PathBuf,
    out: BufWriter<File>,
}

impl JsonlWriter {
    pub fn create(path: &Path) -> CliResult<Self> {
        let file = File::create(path).map_err(|e| CliError::io(path, e))?;
        Ok(Self {
            path: path.to_path_buf(),
            out: BufWriter::new(file),
        })
    }

    pub fn write<T: Serialize>(&mut self, record: &T) -> CliResult<()> {
        serde_json::to_writer(&mut self.out, record)?;
        self.out
            .write_all(b"\n")
            .map_err(|e| CliError::io(&self.path, e))
    }

    pub fn finish(mut self) -> CliResult<()> {
        self.out.flush().map_err(|e| CliError::io(&self.path, e))
    }
}
