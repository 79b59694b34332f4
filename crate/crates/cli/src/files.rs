//! On-disk layout of an experiment directory.
//!
//! ```text
//! manifest.json
//! data/n{n}_r{r}.csv
//! traces/n{n}_r{r}.{csv,json}
//! order/n{n}_r{r}.json, order/summary.csv
//! distance/n{n}_r{r}.csv, distance/summary.csv, distance/quantiles.csv
//! twostate/n{n}_r{r}.json, twostate/summary.csv
//! ```
//!
//! Every CSV starts with a `# config_hash: <hex>` line; every JSON file has a
//! `config_hash` field.

use std::fs;
use std::io::{BufRead, BufReader, Read};
use std::path::{Path, PathBuf};

use hmmob::hmm::HmmParams;
use hmmob::sampler::{fmt_f64, HASH_PREFIX};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, Task};
use crate::error::{CliError, CliResult};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetEntry {
    pub n: usize,
    pub replicate: usize,
    pub data_seed: u64,
    pub chain_seed: u64,
    pub file: String,
}

/// Written by `simulate`; every later stage checks its hash. The echoed
/// config has an empty `output_dir`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub config: ExperimentConfig,
    #[serde(default)]
    pub theta_true: Option<HmmParams>,
    pub datasets: Vec<DatasetEntry>,
}

pub fn subdir(cfg: &ExperimentConfig, name: &str) -> PathBuf {
    cfg.output_dir.join(name)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let bytes = fs::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_slice(&bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn create_dir(path: &Path) -> CliResult<()> {
    fs::create_dir_all(path).map_err(|e| CliError::Io(format!("cannot create {}: {e}", path.display())))
}

/// Writes a CSV preceded by the hash line.
pub fn write_csv(path: &Path, hash: &str, header: &[&str], rows: &[Vec<String>]) -> CliResult<()> {
    let mut buf = format!("{HASH_PREFIX}{hash}\n").into_bytes();
    {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(&mut buf);
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush()?;
    }
    fs::write(path, buf).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Reads a CSV written by [`write_csv`], returning its hash and records.
pub fn read_csv(path: &Path) -> CliResult<(Option<String>, Vec<String>, Vec<csv::StringRecord>)> {
    let file = fs::File::open(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut reader = BufReader::new(file);
    let mut first = String::new();
    reader.read_line(&mut first)?;
    let (hash, rest) = match first.strip_prefix(HASH_PREFIX) {
        Some(h) => (Some(h.trim_end().to_string()), String::new()),
        None => (None, first),
    };
    let mut r = csv::Reader::from_reader(std::io::Cursor::new(rest.into_bytes()).chain(reader));
    let header = r.headers()?.iter().map(str::to_string).collect();
    let records = r.records().collect::<Result<Vec<_>, _>>()?;
    Ok((hash, header, records))
}

pub fn check_hash(found: Option<&str>, expected: &str, what: &Path) -> CliResult<()> {
    match found {
        Some(h) if h == expected => Ok(()),
        Some(h) => Err(CliError::config(format!(
            "{} carries config hash {h}, expected {expected}",
            what.display()
        ))),
        None => Err(CliError::config(format!("{} has no config hash", what.display()))),
    }
}

/// Loads the manifest and rejects it unless it was written by this config.
pub fn load_manifest(cfg: &ExperimentConfig) -> CliResult<Manifest> {
    let path = cfg.output_dir.join(MANIFEST);
    let m: Manifest = read_json(&path)?;
    check_hash(Some(&m.config_hash), &cfg.hash(), &path)?;
    Ok(m)
}

pub fn data_path(cfg: &ExperimentConfig, task: &Task) -> PathBuf {
    subdir(cfg, "data").join(format!("{}.csv", task.stem()))
}

pub fn write_dataset(path: &Path, hash: &str, y: &[f64], x: &[usize]) -> CliResult<()> {
    let rows: Vec<Vec<String>> = y
        .iter()
        .zip(x)
        .enumerate()
        .map(|(t, (&v, &s))| vec![(t + 1).to_string(), fmt_f64(v), (s + 1).to_string()])
        .collect();
    write_csv(path, hash, &["t", "y", "x_true"], &rows)
}

/// Observations and 0-based true states of a data file.
pub fn read_dataset(path: &Path, hash: &str) -> CliResult<(Vec<f64>, Vec<usize>)> {
    let (found, header, records) = read_csv(path)?;
    check_hash(found.as_deref(), hash, path)?;
    if header != ["t", "y", "x_true"] {
        return Err(CliError::Io(format!("{}: unexpected header {header:?}", path.display())));
    }
    let bad = |e: &dyn std::fmt::Display| CliError::Io(format!("{}: {e}", path.display()));
    let mut y = Vec::with_capacity(records.len());
    let mut x = Vec::with_capacity(records.len());
    for rec in &records {
        y.push(rec[1].parse::<f64>().map_err(|e| bad(&e))?);
        let s: usize = rec[2].parse().map_err(|e| bad(&e))?;
        if s == 0 {
            return Err(bad(&"states are numbered from 1"));
        }
        x.push(s - 1);
    }
    Ok((y, x))
}

/// Formats an optional float, empty when absent.
pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}
