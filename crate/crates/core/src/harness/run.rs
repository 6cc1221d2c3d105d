use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{DeltaSpec, ExperimentConfig};
use crate::error::{Error, Result};
use crate::geometry::{PNorm, Point};
use crate::maxima::count_maxima;
use crate::sampling::{cell_index, Sampler, SeedSpec, SmoothedDist};

/// Largest `n × replicates` a single cell may request.
pub const RESOURCE_LIMIT: u128 = 1_000_000_000;

pub const RECORDS_HEADER: [&str; 8] = ["p", "q", "delta", "n", "replicate", "seed_digest", "m_n", "wall_time_s"];

/// One replicate of one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRecord {
    pub p: PNorm,
    pub q: PNorm,
    pub delta: f64,
    pub n: u64,
    pub replicate: u64,
    pub seed_digest: String,
    pub m_n: u64,
    pub wall_time_s: f64,
}

/// Flat CSV row; norms are written as `1`, `2`, `inf`.
#[derive(Debug, Serialize, Deserialize)]
struct Row {
    p: String,
    q: String,
    delta: f64,
    n: u64,
    replicate: u64,
    seed_digest: String,
    m_n: u64,
    wall_time_s: f64,
}

impl From<&ExperimentRecord> for Row {
    fn from(r: &ExperimentRecord) -> Self {
        Row {
            p: r.p.to_string(),
            q: r.q.to_string(),
            delta: r.delta,
            n: r.n,
            replicate: r.replicate,
            seed_digest: r.seed_digest.clone(),
            m_n: r.m_n,
            wall_time_s: r.wall_time_s,
        }
    }
}

impl TryFrom<Row> for ExperimentRecord {
    type Error = Error;
    fn try_from(r: Row) -> Result<Self> {
        Ok(ExperimentRecord {
            p: r.p.parse()?,
            q: r.q.parse()?,
            delta: r.delta,
            n: r.n,
            replicate: r.replicate,
            seed_digest: r.seed_digest,
            m_n: r.m_n,
            wall_time_s: r.wall_time_s,
        })
    }
}

pub fn write_records_csv<W: Write>(records: &[ExperimentRecord], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    let csv_err = |e: csv::Error| Error::Parse(format!("csv: {e}"));
    w.write_record(RECORDS_HEADER).map_err(csv_err)?;
    for r in records {
        w.serialize(Row::from(r)).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Parse(format!("csv: {e}")))?;
    Ok(())
}

pub fn read_records_csv<R: Read>(input: R) -> Result<Vec<ExperimentRecord>> {
    let mut rd = csv::Reader::from_reader(input);
    let header = rd.headers().map_err(|e| Error::Parse(format!("csv: {e}")))?;
    if header.iter().ne(RECORDS_HEADER) {
        return Err(Error::Parse(format!("unexpected records header {header:?}")));
    }
    rd.deserialize::<Row>()
        .map(|row| row.map_err(|e| Error::Parse(format!("csv: {e}")))?.try_into())
        .collect()
}

/// Runs `replicates` independent samples of size `n` and records each
/// maxima count. Replicate `r` always uses the stream
/// `(master_seed, cell_index(dist, n), r)`, so the output does not depend on
/// scheduling.
pub fn run_cell(dist: &SmoothedDist, n: u64, replicates: u64, master_seed: u64) -> Result<Vec<ExperimentRecord>> {
    run_cell_timed(dist, n, replicates, master_seed, false)
}

/// [`run_cell`], optionally filling `wall_time_s`.
pub fn run_cell_timed(
    dist: &SmoothedDist,
    n: u64,
    replicates: u64,
    master_seed: u64,
    timing: bool,
) -> Result<Vec<ExperimentRecord>> {
    if n == 0 || replicates == 0 {
        return Err(Error::param("n", "n and replicates must be at least 1"));
    }
    let points = n as u128 * replicates as u128;
    if points > RESOURCE_LIMIT {
        return Err(Error::ResourceGuard {
            points,
            limit: RESOURCE_LIMIT,
        });
    }
    let cell = cell_index(dist, n);
    let sampler = Sampler::new(dist);
    let records = (0..replicates)
        .into_par_iter()
        .map_init(
            || Vec::<Point>::with_capacity(n as usize),
            |buf, r| {
                let start = timing.then(Instant::now);
                let seed = SeedSpec::new(master_seed, cell, r);
                let mut rng = seed.rng();
                buf.clear();
                buf.extend((0..n).map(|_| sampler.draw(&mut rng)));
                let m = count_maxima(buf).expect("non-empty finite sample") as u64;
                debug_assert!((1..=n).contains(&m));
                ExperimentRecord {
                    p: dist.p,
                    q: dist.q,
                    delta: dist.delta,
                    n,
                    replicate: r,
                    seed_digest: seed.digest(),
                    m_n: m,
                    wall_time_s: start.map_or(0.0, |s| s.elapsed().as_secs_f64()),
                }
            },
        )
        .collect();
    Ok(records)
}

/// Aggregate of one `(p, q, δ-rule, n)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub p: PNorm,
    pub q: PNorm,
    pub delta_spec: DeltaSpec,
    pub delta: f64,
    pub n: u64,
    pub replicates: u64,
    pub mean: f64,
    pub stderr: f64,
    pub min: u64,
    pub max: u64,
}

impl CellSummary {
    /// Summary of records that all belong to one cell. Sums are exact
    /// integers, so the result does not depend on record order.
    pub fn from_records(delta_spec: DeltaSpec, records: &[&ExperimentRecord]) -> Result<Self> {
        let first = records.first().ok_or(Error::EmptyInput)?;
        if records
            .iter()
            .any(|r| r.p != first.p || r.q != first.q || r.n != first.n || r.delta != first.delta)
        {
            return Err(Error::param("records", "records span more than one cell"));
        }
        let k = records.len() as u128;
        let sum: u128 = records.iter().map(|r| r.m_n as u128).sum();
        let sum_sq: u128 = records.iter().map(|r| (r.m_n as u128).pow(2)).sum();
        let mean = sum as f64 / k as f64;
        let stderr = if k > 1 {
            // k Σx² - (Σx)² is exact in integers.
            let num = (k * sum_sq - sum * sum) as f64;
            (num / (k as f64 * (k - 1) as f64) / k as f64).sqrt()
        } else {
            0.0
        };
        Ok(CellSummary {
            p: first.p,
            q: first.q,
            delta_spec,
            delta: first.delta,
            n: first.n,
            replicates: k as u64,
            mean,
            stderr,
            min: records.iter().map(|r| r.m_n).min().unwrap_or(0),
            max: records.iter().map(|r| r.m_n).max().unwrap_or(0),
        })
    }
}

/// Cells of the group `(p, q, rule)`: records whose `δ` equals the rule's
/// value at their `n`, summarised per `n` in increasing order.
pub fn group_cells(records: &[ExperimentRecord], p: PNorm, q: PNorm, rule: DeltaSpec) -> Result<Vec<CellSummary>> {
    let mut by_n: BTreeMap<u64, Vec<&ExperimentRecord>> = BTreeMap::new();
    for r in records {
        let want = rule.at(r.n);
        if r.p == p && r.q == q && (r.delta - want).abs() <= 1e-12 * want.abs().max(1.0) {
            by_n.entry(r.n).or_default().push(r);
        }
    }
    by_n.values().map(|rs| CellSummary::from_records(rule, rs)).collect()
}

/// Everything produced by one configured run.
#[derive(Debug, Clone, Default)]
pub struct ExperimentResults {
    pub records: Vec<ExperimentRecord>,
    pub cells: Vec<CellSummary>,
    pub fits: Vec<super::fit::FitResult>,
    pub verdicts: Vec<super::fit::Verdict>,
    /// Groups that could not be fitted or judged, with the reason.
    pub skipped: Vec<super::fit::SkippedGroup>,
}

/// Runs every `(pair, δ-rule, n)` cell of `cfg`, then fits and judges each
/// `(pair, δ-rule)` group.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResults> {
    use super::fit::{compare_to_theory, fit_exponent, predict_group, SkippedGroup};
    cfg.validate()?;
    let mut out = ExperimentResults::default();
    for &(p, q) in &cfg.pairs {
        for &rule in &cfg.delta_spec {
            let mut group = Vec::new();
            for &n in &cfg.n_grid {
                let dist = SmoothedDist::new(p, q, rule.at(n))?;
                let recs = run_cell_timed(&dist, n, cfg.replicates, cfg.master_seed, cfg.record_wall_time)?;
                let refs: Vec<&ExperimentRecord> = recs.iter().collect();
                group.push(CellSummary::from_records(rule, &refs)?);
                out.records.extend(recs);
            }
            let skip = |reason: String| SkippedGroup {
                p,
                q,
                delta_spec: rule,
                reason,
            };
            match fit_exponent(&group) {
                Ok(fit) => {
                    match predict_group(p, q, rule, &cfg.n_grid).and_then(|pred| compare_to_theory(&fit, &pred)) {
                        Ok(v) => out.verdicts.push(v),
                        Err(e) => out.skipped.push(skip(e.to_string())),
                    }
                    out.fits.push(fit);
                }
                Err(e) => out.skipped.push(skip(e.to_string())),
            }
            out.cells.extend(group);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn guard_and_determinism() {
        let d = SmoothedDist::new(PNorm::TWO, PNorm::ONE, 0.3).unwrap();
        assert!(matches!(run_cell(&d, 1 << 20, 1001, 1), Err(Error::ResourceGuard { .. })));
        let a = run_cell(&d, 64, 40, 5).unwrap();
        let b = run_cell(&d, 64, 40, 5).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|r| (1..=64).contains(&r.m_n) && r.wall_time_s == 0.0));
        assert_ne!(a, run_cell(&d, 64, 40, 6).unwrap());
    }

    #[test]
    fn csv_round_trip() {
        let d = SmoothedDist::new(PNorm::INF, PNorm::Finite(1.5), 0.25).unwrap();
        let recs = run_cell(&d, 16, 5, 2).unwrap();
        let mut buf = Vec::new();
        write_records_csv(&recs, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("p,q,delta,n,replicate,seed_digest,m_n,wall_time_s\ninf,1.5,0.25,16,0,"));
        assert_eq!(read_records_csv(&buf[..]).unwrap(), recs);

        let mut empty = Vec::new();
        write_records_csv(&[], &mut empty).unwrap();
        assert!(read_records_csv(&empty[..]).unwrap().is_empty());
    }

    #[test]
    fn summary_is_order_independent() {
        let d = SmoothedDist::new(PNorm::ONE, PNorm::ONE, 1.0).unwrap();
        let recs = run_cell(&d, 100, 50, 3).unwrap();
        let fwd: Vec<&ExperimentRecord> = recs.iter().collect();
        let rev: Vec<&ExperimentRecord> = recs.iter().rev().collect();
        let a = CellSummary::from_records(DeltaSpec::Fixed(1.0), &fwd).unwrap();
        let b = CellSummary::from_records(DeltaSpec::Fixed(1.0), &rev).unwrap();
        assert_eq!(a, b);
        let xs: Vec<f64> = recs.iter().map(|r| r.m_n as f64).collect();
        assert!((a.mean - crate::stats::mean(&xs)).abs() < 1e-12);
        assert!((a.stderr - (crate::stats::variance(&xs) / 50.0).sqrt()).abs() < 1e-12);
    }
}
