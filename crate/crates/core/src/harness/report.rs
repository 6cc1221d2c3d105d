use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde_json::json;

use super::config::DeltaSpec;
use super::run::{write_records_csv, CellSummary, ExperimentResults};
use crate::error::{Error, Result};
use crate::geometry::PNorm;

pub const SCHEMA_VERSION: u32 = 1;

/// Files written by [`emit_report`].
#[derive(Debug, Clone, PartialEq)]
pub struct ReportFiles {
    pub records: PathBuf,
    pub fits: PathBuf,
    pub verdicts: PathBuf,
    pub plots: Vec<PathBuf>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(io_err(path))
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut f = create(path)?;
    serde_json::to_writer_pretty(&mut f, value).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    f.write_all(b"\n").and_then(|_| f.flush()).map_err(io_err(path))
}

/// File-name stem of one group, e.g. `plot_1_2_d0.5` or `plot_inf_2_npow-0.5`.
pub fn plot_stem(p: PNorm, q: PNorm, rule: DeltaSpec) -> String {
    let d = match rule {
        DeltaSpec::Fixed(d) => format!("d{d}"),
        DeltaSpec::Power(a) => format!("npow{a}"),
    };
    format!("plot_{p}_{q}_{d}")
}

/// Writes `records.csv`, `fits.json`, `verdicts.json` and one
/// `plot_*.csv` (`log_n,log_mean,stderr`, with the standard error on the log
/// scale) per group into `dir`, creating it if needed.
pub fn emit_report(dir: &Path, results: &ExperimentResults) -> Result<ReportFiles> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let records = dir.join("records.csv");
    {
        let mut f = create(&records)?;
        write_records_csv(&results.records, &mut f)?;
        f.flush().map_err(io_err(&records))?;
    }

    let fits = dir.join("fits.json");
    write_json(
        &fits,
        &json!({
            "schema_version": SCHEMA_VERSION,
            "fits": results.fits,
            "cells": results.cells,
        }),
    )?;

    let verdicts = dir.join("verdicts.json");
    let passed = results.verdicts.iter().filter(|v| v.pass).count();
    write_json(
        &verdicts,
        &json!({
            "schema_version": SCHEMA_VERSION,
            "summary": {
                "pass": passed,
                "fail": results.verdicts.len() - passed,
                "skipped": results.skipped.len(),
            },
            "verdicts": results.verdicts,
            "skipped": results.skipped,
        }),
    )?;

    let mut groups: Vec<(PNorm, PNorm, DeltaSpec, Vec<&CellSummary>)> = Vec::new();
    for c in &results.cells {
        match groups
            .iter_mut()
            .find(|g| g.0 == c.p && g.1 == c.q && g.2 == c.delta_spec)
        {
            Some(g) => g.3.push(c),
            None => groups.push((c.p, c.q, c.delta_spec, vec![c])),
        }
    }
    let mut plots = Vec::new();
    for (p, q, rule, mut cells) in groups {
        cells.sort_by_key(|c| c.n);
        let path = dir.join(format!("{}.csv", plot_stem(p, q, rule)));
        let mut f = create(&path)?;
        let mut text = String::from("log_n,log_mean,stderr\n");
        for c in cells {
            text.push_str(&format!("{},{},{}\n", (c.n as f64).ln(), c.mean.ln(), c.stderr / c.mean));
        }
        f.write_all(text.as_bytes()).and_then(|_| f.flush()).map_err(io_err(&path))?;
        plots.push(path);
    }
    Ok(ReportFiles {
        records,
        fits,
        verdicts,
        plots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_run_gives_empty_schema_files() {
        let dir = tempfile::tempdir().unwrap();
        let files = emit_report(dir.path(), &ExperimentResults::default()).unwrap();
        let csv = std::fs::read_to_string(&files.records).unwrap();
        assert_eq!(csv, "p,q,delta,n,replicate,seed_digest,m_n,wall_time_s\n");
        let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&files.verdicts).unwrap()).unwrap();
        assert_eq!(v["schema_version"], 1);
        assert_eq!(v["verdicts"].as_array().unwrap().len(), 0);
        let f: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&files.fits).unwrap()).unwrap();
        assert_eq!(f["fits"].as_array().unwrap().len(), 0);
        assert!(files.plots.is_empty());
    }

    #[test]
    fn io_errors_carry_paths() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        std::fs::write(&blocker, "x").unwrap();
        match emit_report(&blocker.join("sub"), &ExperimentResults::default()) {
            Err(Error::Io { path, .. }) => assert!(path.starts_with(&blocker)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn stems() {
        assert_eq!(plot_stem(PNorm::INF, PNorm::TWO, DeltaSpec::Power(-0.5)), "plot_inf_2_npow-0.5");
        assert_eq!(plot_stem(PNorm::ONE, PNorm::ONE, DeltaSpec::Fixed(1.0)), "plot_1_1_d1");
    }
}
