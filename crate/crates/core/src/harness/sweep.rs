use serde::{Deserialize, Serialize};

use super::config::DeltaSpec;
use super::run::{run_cell, CellSummary, ExperimentRecord};
use crate::density::MCEstimate;
use crate::error::{Error, Result};
use crate::geometry::{PNorm, Point};
use crate::maxima::maximal_points;
use crate::sampling::{cell_index, sample_set, SeedSpec, SmoothedDist};
use crate::stats::{linear_fit, LineFit};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub delta: f64,
    pub mean: f64,
    pub stderr: f64,
}

/// `|m(δ) - m(1/δ)|` in pooled standard errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetryDefect {
    pub delta: f64,
    pub defect: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaSweep {
    pub p: PNorm,
    pub q: PNorm,
    pub n: u64,
    pub points: Vec<SweepPoint>,
    pub argmin_delta: f64,
    /// One entry per grid point whose reciprocal is also on the grid (δ <= 1 side).
    pub symmetry: Vec<SymmetryDefect>,
    pub max_over_min: f64,
}

/// `k` log-spaced values from `lo` to `hi` inclusive; `1` and reciprocal
/// pairs land exactly when the range is symmetric about 1 and `k` is odd.
pub fn log_grid(lo: f64, hi: f64, k: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo && k >= 2) {
        return Err(Error::param("grid", format!("need 0 < lo < hi and k >= 2, got {lo}, {hi}, {k}")));
    }
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..k)
        .map(|i| (a + (b - a) * i as f64 / (k - 1) as f64).exp())
        .collect())
}

/// Mean maxima count at fixed `n` across a grid of `δ`.
pub fn delta_sweep(p: PNorm, q: PNorm, n: u64, deltas: &[f64], replicates: u64, master_seed: u64) -> Result<DeltaSweep> {
    if deltas.is_empty() {
        return Err(Error::EmptyInput);
    }
    if deltas.windows(2).any(|w| !(w[0] < w[1])) || deltas[0] <= 0.0 {
        return Err(Error::param("deltas", "must be positive and strictly increasing"));
    }
    let mut points = Vec::with_capacity(deltas.len());
    for &d in deltas {
        let dist = SmoothedDist::new(p, q, d)?;
        let recs = run_cell(&dist, n, replicates, master_seed)?;
        let refs: Vec<&ExperimentRecord> = recs.iter().collect();
        let s = CellSummary::from_records(DeltaSpec::Fixed(d), &refs)?;
        points.push(SweepPoint {
            delta: d,
            mean: s.mean,
            stderr: s.stderr,
        });
    }
    let min = points.iter().min_by(|a, b| a.mean.total_cmp(&b.mean)).expect("non-empty");
    let max = points.iter().map(|s| s.mean).fold(f64::NEG_INFINITY, f64::max);
    let mut symmetry = Vec::new();
    for a in points.iter().filter(|s| s.delta <= 1.0) {
        if let Some(b) = points.iter().find(|b| (a.delta * b.delta - 1.0).abs() < 1e-9) {
            let pooled = (a.stderr.powi(2) + b.stderr.powi(2)).sqrt();
            symmetry.push(SymmetryDefect {
                delta: a.delta,
                defect: (a.mean - b.mean).abs() / pooled.max(f64::MIN_POSITIVE),
            });
        }
    }
    Ok(DeltaSweep {
        p,
        q,
        n,
        argmin_delta: min.delta,
        max_over_min: max / min.mean,
        points,
        symmetry,
    })
}

impl DeltaSweep {
    /// Log-log slope of `mean - baseline` against `δ` over `[lo, hi]`,
    /// weighted by inverse variance of the log.
    ///
    /// `baseline` removes an additive `δ`-independent term before taking
    /// logs; pass 0 for a plain power fit.
    pub fn branch_slope(&self, lo: f64, hi: f64, baseline: f64) -> Result<LineFit> {
        let sel: Vec<&SweepPoint> = self
            .points
            .iter()
            .filter(|s| s.delta >= lo * (1.0 - 1e-12) && s.delta <= hi * (1.0 + 1e-12))
            .collect();
        if sel.len() < 3 {
            return Err(Error::param("branch", format!("only {} grid points in [{lo}, {hi}]", sel.len())));
        }
        if let Some(s) = sel.iter().find(|s| s.mean <= baseline) {
            return Err(Error::param("baseline", format!("mean {} at δ = {} is not above it", s.mean, s.delta)));
        }
        let xs: Vec<f64> = sel.iter().map(|s| s.delta.ln()).collect();
        let ys: Vec<f64> = sel.iter().map(|s| (s.mean - baseline).ln()).collect();
        let ws: Vec<f64> = sel
            .iter()
            .map(|s| ((s.mean - baseline) / s.stderr.max(1e-12)).powi(2))
            .collect();
        Ok(linear_fit(&xs, &ys, Some(&ws)))
    }

    /// Mean of the sweep means over `[lo, hi]` and its standard error.
    pub fn level(&self, lo: f64, hi: f64) -> Option<MCEstimate> {
        let sel: Vec<&SweepPoint> = self.points.iter().filter(|s| s.delta >= lo && s.delta <= hi).collect();
        if sel.is_empty() {
            return None;
        }
        let k = sel.len() as f64;
        Some(MCEstimate {
            mean: sel.iter().map(|s| s.mean).sum::<f64>() / k,
            stderr: sel.iter().map(|s| s.stderr.powi(2)).sum::<f64>().sqrt() / k,
            samples: sel.len(),
        })
    }
}

/// Mean number of maximal points with a negative coordinate, i.e. outside
/// the closed upper-right quadrant of the support's bounding frame.
pub fn quadrant_outliers(dist: &SmoothedDist, n: u64, replicates: u64, master_seed: u64) -> Result<MCEstimate> {
    if replicates < 2 || n == 0 {
        return Err(Error::param("replicates", "need n >= 1 and at least two replicates"));
    }
    let cell = cell_index(dist, n) ^ 0x5155_4144; // separate from the main count streams
    let counts: Vec<f64> = (0..replicates)
        .map(|r| {
            let mut rng = SeedSpec::new(master_seed, cell, r).rng();
            let pts = sample_set(dist, n as usize, &mut rng)?;
            let max = maximal_points(&pts)?;
            Ok(max.maxima.iter().filter(|v: &&Point| v.x < 0.0 || v.y < 0.0).count() as f64)
        })
        .collect::<Result<_>>()?;
    let k = counts.len();
    Ok(MCEstimate {
        mean: crate::stats::mean(&counts),
        stderr: (crate::stats::variance(&counts) / k as f64).sqrt(),
        samples: k,
    })
}
