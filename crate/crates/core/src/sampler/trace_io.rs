//! Trace CSV plus JSON sidecar.
//!
//! Floats are written with 17 significant digits so reading a trace back
//! reproduces every value bit for bit.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::chain::{AcceptRates, PosteriorModel, PosteriorTrace, SamplerConfig};
use crate::error::{Error, Result};
use crate::hmm::HmmParams;

pub const HASH_PREFIX: &str = "# config_hash: ";

/// Formats a float with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_f64(s: &str, what: &str) -> Result<f64> {
    s.trim().parse().map_err(|e| Error::format(what, format!("{s:?}: {e}")))
}

/// Metadata written next to a trace CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSidecar {
    pub config_hash: Option<String>,
    pub seed: u64,
    pub k: usize,
    pub model: PosteriorModel,
    pub sampler: SamplerConfig,
    pub accept_rates: AcceptRates,
    pub warnings: Vec<String>,
    pub n_samples: usize,
}

pub fn csv_header(k: usize) -> Vec<String> {
    let mut h = vec!["iter".to_string(), "logpost".to_string()];
    for i in 1..=k {
        for j in 1..=k {
            h.push(format!("q_{i}_{j}"));
        }
    }
    h.extend((1..=k).map(|i| format!("gamma_{i}")));
    h.push("accept_rows".into());
    h.push("accept_em".into());
    h
}

/// Writes the trace as CSV, with an optional leading config-hash line.
pub fn write_trace_csv<W: Write>(trace: &PosteriorTrace, config_hash: Option<&str>, mut out: W) -> Result<()> {
    trace.validate()?;
    let k = trace.samples[0].k();
    if let Some(h) = config_hash {
        writeln!(out, "{HASH_PREFIX}{h}")?;
    }
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(csv_header(k))?;
    for (idx, s) in trace.samples.iter().enumerate() {
        let mut rec = vec![trace.iterations[idx].to_string(), fmt_f64(trace.log_post[idx])];
        rec.extend(s.transition().iter().map(|&v| fmt_f64(v)));
        rec.extend(s.gammas().iter().map(|&v| fmt_f64(v)));
        rec.push(fmt_f64(trace.sweep_accept[idx].rows));
        rec.push(fmt_f64(trace.sweep_accept[idx].emissions));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads the CSV written by [`write_trace_csv`] and restores the full trace
/// from the sidecar.
pub fn read_trace_csv<R: Read>(input: R, sidecar: &TraceSidecar) -> Result<(PosteriorTrace, Option<String>)> {
    let mut reader = BufReader::new(input);
    let mut first = String::new();
    reader.read_line(&mut first)?;
    let (hash, rest): (Option<String>, String) = match first.strip_prefix(HASH_PREFIX) {
        Some(h) => (Some(h.trim_end().to_string()), String::new()),
        None => (None, first),
    };
    let chained = std::io::Cursor::new(rest.into_bytes()).chain(reader);
    let mut r = csv::ReaderBuilder::new().from_reader(chained);
    let k = sidecar.k;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != csv_header(k) {
        return Err(Error::format("trace csv", format!("unexpected header for k = {k}: {header:?}")));
    }
    let mut trace = PosteriorTrace {
        samples: Vec::new(),
        log_post: Vec::new(),
        iterations: Vec::new(),
        sweep_accept: Vec::new(),
        accept_rates: sidecar.accept_rates,
        config: sidecar.sampler.clone(),
        warnings: sidecar.warnings.clone(),
    };
    for rec in r.records() {
        let rec = rec?;
        let iter = rec[0]
            .parse()
            .map_err(|e| Error::format("trace csv", format!("iter {:?}: {e}", &rec[0])))?;
        let vals: Vec<f64> = rec.iter().skip(1).map(|s| parse_f64(s, "trace csv")).collect::<Result<_>>()?;
        let q = vals[1..1 + k * k].to_vec();
        let gammas = vals[1 + k * k..1 + k * k + k].to_vec();
        trace.iterations.push(iter);
        trace.log_post.push(vals[0]);
        trace.samples.push(HmmParams::from_flat(sidecar.model.emission, k, q, gammas)?);
        trace.sweep_accept.push(AcceptRates {
            rows: vals[1 + k * k + k],
            emissions: vals[2 + k * k + k],
        });
    }
    trace.validate()?;
    Ok((trace, hash))
}

pub fn sidecar_for(trace: &PosteriorTrace, model: &PosteriorModel, config_hash: Option<&str>) -> TraceSidecar {
    TraceSidecar {
        config_hash: config_hash.map(str::to_string),
        seed: trace.config.seed,
        k: model.k,
        model: model.clone(),
        sampler: trace.config.clone(),
        accept_rates: trace.accept_rates,
        warnings: trace.warnings.clone(),
        n_samples: trace.len(),
    }
}

/// Writes `<stem>.csv` and `<stem>.json` into `dir`.
pub fn save_trace(dir: &Path, stem: &str, trace: &PosteriorTrace, model: &PosteriorModel, config_hash: Option<&str>) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut buf = Vec::new();
    write_trace_csv(trace, config_hash, &mut buf)?;
    fs::write(dir.join(format!("{stem}.csv")), buf)?;
    let side = sidecar_for(trace, model, config_hash);
    fs::write(dir.join(format!("{stem}.json")), serde_json::to_string_pretty(&side)? + "\n")?;
    Ok(())
}

/// Inverse of [`save_trace`].
pub fn load_trace(dir: &Path, stem: &str) -> Result<(PosteriorTrace, TraceSidecar)> {
    let side: TraceSidecar = serde_json::from_slice(&fs::read(dir.join(format!("{stem}.json")))?)?;
    let file = fs::File::open(dir.join(format!("{stem}.csv")))?;
    let (trace, hash) = read_trace_csv(file, &side)?;
    if hash != side.config_hash {
        return Err(Error::format(
            "trace",
            format!("config hash {hash:?} in csv does not match sidecar {:?}", side.config_hash),
        ));
    }
    Ok((trace, side))
}
