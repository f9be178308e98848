//! CSV traces and JSON summaries. Floats are written with 17 significant
//! digits so that every value reads back exactly.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::harness::{ClassicRep, ClassicSummary, MultiRep, MultiSummary, ENVELOPE_LABEL};

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

#[must_use]
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn write_rows(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(header).map_err(csv_err(path))?;
    for row in rows {
        w.write_record(row).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

#[derive(Serialize)]
struct SummaryFile<'a, S: Serialize> {
    config: &'a ExperimentConfig,
    seeds: Vec<u64>,
    envelope: EnvelopeInfo,
    summary: &'a S,
}

#[derive(Serialize)]
struct EnvelopeInfo {
    label: &'static str,
    kappa_bar: f64,
    eps: f64,
    constant: f64,
}

fn write_summary<S: Serialize>(
    out: &Path,
    cfg: &ExperimentConfig,
    seeds: Vec<u64>,
    summary: &S,
) -> Result<PathBuf> {
    let path = out.join("summary.json");
    let file = SummaryFile {
        config: cfg,
        seeds,
        envelope: EnvelopeInfo {
            label: ENVELOPE_LABEL,
            kappa_bar: cfg.experiment.kappa_bar,
            eps: cfg.experiment.eps,
            constant: 1.0,
        },
        summary,
    };
    let text = serde_json::to_string_pretty(&file)?;
    fs::write(&path, text + "\n").map_err(io_err(&path))?;
    Ok(path)
}

#[must_use]
pub fn rep_file_name(rep: usize) -> String {
    format!("rep_{rep:05}.csv")
}

/// Per-replication traces plus `summary.json`. Returns the files written.
pub fn emit_multi(
    out: &Path,
    cfg: &ExperimentConfig,
    reps: &[MultiRep],
    summary: &MultiSummary,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out).map_err(io_err(out))?;
    let mut written = Vec::with_capacity(reps.len() + 1);
    for rep in reps {
        let path = out.join(rep_file_name(rep.rep));
        let (header, rows) = multi_table(rep);
        write_rows(&path, &header, &rows)?;
        written.push(path);
    }
    let seeds = reps.iter().map(|r| r.seed).collect();
    written.push(write_summary(out, cfg, seeds, summary)?);
    Ok(written)
}

/// Header and rows of one network trace; one row per `n = 0..=horizon`.
#[must_use]
pub fn multi_table(rep: &MultiRep) -> (Vec<String>, Vec<Vec<String>>) {
    let d = rep.changes.lambdas().len();
    let mut header = vec!["n".to_string()];
    header.extend((1..=d).map(|j| format!("exact_gamma_{j}")));
    header.extend((1..=d).map(|j| format!("approx_gamma_{j}")));
    header.extend(["exact_dist", "approx_dist", "gap", "envelope"].map(String::from));
    header.extend((1..=d).map(|j| format!("changed_{j}")));
    let rows = (0..rep.approx_gamma.len())
        .map(|n| {
            let mut row = vec![n.to_string()];
            let full = rep.full.as_ref();
            for j in 0..d {
                row.push(fmt_opt(full.map(|f| f.exact_gamma[n][j])));
            }
            row.extend(rep.approx_gamma[n].iter().map(|g| fmt_f64(*g)));
            row.push(fmt_opt(full.map(|f| f.exact_dist[n])));
            row.push(fmt_opt(full.map(|f| f.approx_dist[n])));
            row.push(fmt_opt(full.map(|f| f.gap[n])));
            row.push(fmt_opt(full.and_then(|f| f.envelope[n])));
            row.extend(
                rep.changes
                    .lambdas()
                    .iter()
                    .map(|l| u8::from(n as u64 >= *l).to_string()),
            );
            row
        })
        .collect();
    (header, rows)
}

pub fn emit_classic(
    out: &Path,
    cfg: &ExperimentConfig,
    reps: &[ClassicRep],
    summary: &ClassicSummary,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out).map_err(io_err(out))?;
    let mut written = Vec::with_capacity(reps.len() + 1);
    let header: Vec<String> = [
        "n",
        "gamma",
        "one_minus_gamma",
        "dist",
        "envelope",
        "changed",
    ]
    .map(String::from)
    .to_vec();
    for rep in reps {
        let path = out.join(rep_file_name(rep.rep));
        let t = &rep.trace;
        let rows: Vec<Vec<String>> = (0..t.gamma.len())
            .map(|n| {
                vec![
                    n.to_string(),
                    fmt_f64(t.gamma[n]),
                    fmt_f64(t.complement[n]),
                    fmt_f64(2.0 * t.complement[n]),
                    fmt_opt(rep.envelope[n]),
                    u8::from(n as u64 >= t.lambda).to_string(),
                ]
            })
            .collect();
        write_rows(&path, &header, &rows)?;
        written.push(path);
    }
    let seeds = reps.iter().map(|r| r.seed).collect();
    written.push(write_summary(out, cfg, seeds, summary)?);
    Ok(written)
}

/// Read one numeric column of an emitted trace; empty cells are skipped.
pub fn read_column(path: &Path, name: &str) -> Result<Vec<f64>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let headers = r.headers().map_err(csv_err(path))?.clone();
    let idx = headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::Config(format!("{} has no column {name:?}", path.display())))?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err(path))?;
        let cell = rec.get(idx).unwrap_or("");
        if cell.is_empty() {
            continue;
        }
        out.push(
            cell.parse().map_err(|_| {
                Error::Config(format!("{}: {cell:?} is not a number", path.display()))
            })?,
        );
    }
    Ok(out)
}
