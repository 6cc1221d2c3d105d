//! Lower-bound witnesses: families of pairwise disjoint dominant regions,
//! each hit with probability of order `1/n`.
//!
//! If `A_1, .., A_m` are such regions then every `A_i` that receives exactly
//! one of the `n` points contributes a maximum, so `E[M_n] = Ω(m)`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::density::{measure_mc_conditional, MCEstimate, Region};
use crate::error::{Error, Result};
use crate::geometry::{support_contains, support_x_extent, unit_ball_area, PNorm, Point};
use crate::sampling::{SeedSpec, Sampler, SmoothedDist};

/// Per-region `n·μ` must land in this band.
pub const MEASURE_BAND: (f64, f64) = (0.02, 50.0);

/// `n·μ` targeted by the default spacing of [`witness_binfq`].
const BINFQ_TARGET: f64 = 0.04;

/// Extra in-region points drawn uniformly from each region's bounding box
/// for the dominance check; small regions rarely catch support samples.
const INTERIOR_PROBES: usize = 2048;

#[derive(Debug, Clone)]
pub struct WitnessSet {
    pub dist: SmoothedDist,
    pub n: u64,
    pub regions: Vec<Region>,
    pub sigma: f64,
    pub m: usize,
    /// The order of `m` the construction is meant to reach.
    pub predicted_count: f64,
}

impl WitnessSet {
    /// A hand-made family, e.g. for negative controls.
    pub fn custom(dist: SmoothedDist, n: u64, regions: Vec<Region>, sigma: f64) -> Self {
        let m = regions.len();
        WitnessSet {
            dist,
            n,
            regions,
            sigma,
            m,
            predicted_count: f64::NAN,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "p": self.dist.p,
            "q": self.dist.q,
            "delta": self.dist.delta,
            "n": self.n,
            "sigma": self.sigma,
            "m": self.m,
            "predicted_count": self.predicted_count,
            "regions": self.regions.iter().map(Region::describe).collect::<Vec<_>>(),
        })
    }
}

fn in_regime(delta: f64, n: u64, hi_exp: f64) -> Result<f64> {
    if n < 2 {
        return Err(Error::param("n", "need n >= 2"));
    }
    let nf = n as f64;
    let lo = nf.powf(-0.5);
    let hi = nf.powf(hi_exp);
    if !(delta >= lo * (1.0 - 1e-12) && delta <= hi * (1.0 + 1e-12)) {
        return Err(Error::RegimeMismatch(format!(
            "witness needs {lo} <= δ <= {hi} at n = {n}, got δ = {delta}"
        )));
    }
    Ok(nf)
}

fn positive(name: &'static str, c: f64) -> Result<()> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::param(name, format!("{c} must be positive")));
    }
    Ok(())
}

/// Corner triangles along the outer edge of `B_1 + δB_1`.
pub fn witness_b1b1(delta: f64, n: u64) -> Result<WitnessSet> {
    witness_b1b1_with(delta, n, 1.0)
}

/// [`witness_b1b1`] with `σ = c·(δ/n)^{1/3}`.
pub fn witness_b1b1_with(delta: f64, n: u64, c: f64) -> Result<WitnessSet> {
    let nf = in_regime(delta, n, 0.0)?;
    positive("c", c)?;
    let sigma = c * (delta / nf).cbrt();
    let last = ((1.0 + delta) / sigma).floor() as usize;
    let (lo, hi) = (last.div_ceil(3), 2 * last / 3);
    let regions: Vec<Region> = (lo..=hi)
        .map(|i| {
            let x = i as f64 * sigma;
            Region::CornerTriangle {
                v: Point::new(x, 1.0 + delta - x - sigma),
                delta,
            }
        })
        .collect();
    Ok(WitnessSet {
        dist: SmoothedDist::new(PNorm::ONE, PNorm::ONE, delta)?,
        n,
        m: regions.len(),
        regions,
        sigma,
        predicted_count: (nf / delta).cbrt(),
    })
}

/// Corner regions hanging off the circle of radius `1 + δ - σ` in
/// `B_2 + δB_2`.
pub fn witness_b2b2(delta: f64, n: u64) -> Result<WitnessSet> {
    witness_b2b2_with(delta, n, 1.0)
}

/// [`witness_b2b2`] with `σ = c·δ^{3/7}/n^{2/7}`.
///
/// Apexes run over angles in `[π/12, 5π/12]`. Each next apex sits exactly one
/// region width `β(v)` to the right, so neighbours share only a boundary point.
pub fn witness_b2b2_with(delta: f64, n: u64, c: f64) -> Result<WitnessSet> {
    use std::f64::consts::PI;
    let nf = in_regime(delta, n, 0.0)?;
    positive("c", c)?;
    let sigma = c * delta.powf(3.0 / 7.0) / nf.powf(2.0 / 7.0);
    let outer = 1.0 + delta;
    let r = outer - sigma;
    let x_end = r * (PI / 12.0).cos();
    let dist = SmoothedDist::new(PNorm::TWO, PNorm::TWO, delta)?;
    let mut x = r * (5.0 * PI / 12.0).cos();
    let mut regions = Vec::new();
    while x <= x_end {
        let y = (r * r - x * x).sqrt();
        regions.push(Region::CornerRegion {
            v: Point::new(x, y),
            dist,
        });
        x = (outer * outer - y * y).sqrt();
    }
    Ok(WitnessSet {
        dist,
        n,
        m: regions.len(),
        regions,
        sigma,
        predicted_count: nf.powf(2.0 / 7.0) / delta.powf(3.0 / 7.0),
    })
}

/// Default `c′` for [`witness_binfq`]: chosen so each region has
/// `n·μ ≈ 0.04` to first order.
///
/// Near the cap, a point `α` from the right border and `β` from the top has
/// density `αβ / (8 a_q δ²)`; integrating over a corner region with legs
/// `α, β` gives `μ ≈ (αβ)² / (96 a_q δ²)`.
pub fn default_binfq_c(q: PNorm) -> f64 {
    (BINFQ_TARGET * 96.0 * unit_ball_area(q)).powf(0.25)
}

/// Corner regions along the upper-right cap of `B_∞ + δB_q`.
pub fn witness_binfq(q: PNorm, delta: f64, n: u64) -> Result<WitnessSet> {
    witness_binfq_with(q, delta, n, default_binfq_c(q))
}

/// [`witness_binfq`] with `σ = c′·√δ/n^{1/4}`.
///
/// The cap is `g(x) = 1 + h(x - 1)` with `h(t) = (δ^q - t^q)^{1/q}`. Knots
/// `t_0 = 0 < t_1 < ..` are placed so every region's legs satisfy
/// `α_i β_i = σ²`, where `α_i = t_{i+1} - t_i`, `β_i = h(t_i) - h(t_{i+1})`,
/// and the apex is `(1 + t_i, 1 + h(t_{i+1}))`. Where `|g′| = 1` this is the
/// uniform spacing `α = β = σ`.
pub fn witness_binfq_with(q: PNorm, delta: f64, n: u64, c_prime: f64) -> Result<WitnessSet> {
    let qv = match q {
        PNorm::Finite(v) => v,
        PNorm::Infinity => {
            return Err(Error::UnsupportedPair {
                p: "inf".into(),
                q: "inf".into(),
            })
        }
    };
    let nf = in_regime(delta, n, 0.5)?;
    positive("c_prime", c_prime)?;
    let sigma = c_prime * delta.sqrt() / nf.powf(0.25);
    let target = sigma * sigma;
    let h = |t: f64| (delta.powf(qv) - t.min(delta).powf(qv)).max(0.0).powf(1.0 / qv);
    let product = |a: f64, b: f64| (b - a) * (h(a) - h(b));
    let dist = SmoothedDist::new(PNorm::INF, q, delta)?;
    let mut t = 0.0;
    let mut regions = Vec::new();
    while product(t, delta) >= target {
        let (mut lo, mut hi) = (t, delta);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if product(t, mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        regions.push(Region::CornerRegion {
            v: Point::new(1.0 + t, 1.0 + h(hi)),
            dist,
        });
        t = hi;
    }
    Ok(WitnessSet {
        dist,
        n,
        m: regions.len(),
        regions,
        sigma,
        predicted_count: delta.sqrt() * nf.powf(0.25),
    })
}

/// Outcome of [`verify_witness`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessReport {
    pub pass: bool,
    pub disjoint: bool,
    pub overlapping_pairs: Vec<(usize, usize)>,
    pub dominant: bool,
    pub dominance_violations: Vec<usize>,
    /// Regions whose shape the geometric checks do not cover.
    pub unsupported_regions: Vec<usize>,
    pub n_mu: Vec<f64>,
    pub n_mu_stderr: Vec<f64>,
    pub band_violations: Vec<usize>,
    pub m: usize,
    pub predicted_count: f64,
    /// `m / predicted_count`.
    pub count_ratio: f64,
}

impl WitnessReport {
    /// The count is within a factor `k` of its prediction.
    pub fn count_within(&self, k: f64) -> bool {
        self.count_ratio >= 1.0 / k && self.count_ratio <= k
    }
}

/// Lower-left corner and the upper-right limit (`+∞` when the region is
/// bounded only by the support).
fn as_box(region: &Region) -> Option<(Point, Point, bool)> {
    let far = Point::new(f64::INFINITY, f64::INFINITY);
    match region {
        Region::AxisRectangle { lo, hi } => Some((*lo, *hi, false)),
        Region::CornerRegion { v, .. } | Region::CornerTriangle { v, .. } => Some((*v, far, true)),
        Region::Quadrant { corner } => Some((*corner, far, false)),
        _ => None,
    }
}

fn strictly_inside(dist: &SmoothedDist, v: Point) -> bool {
    support_contains(dist, v * (1.0 + 1e-9))
}

/// Whether two box-like regions share interior points.
///
/// Their intersection is a box (clipped by the support when either is a
/// support region). The support is symmetric in each coordinate and convex,
/// so the box meets its interior iff the box point closest to the origin in
/// every coordinate does.
fn interiors_meet(dist: &SmoothedDist, a: (Point, Point, bool), b: (Point, Point, bool)) -> bool {
    let lo = a.0.max(b.0);
    let hi = Point::new(a.1.x.min(b.1.x), a.1.y.min(b.1.y));
    if !(lo.x < hi.x && lo.y < hi.y) {
        return false;
    }
    if !(a.2 || b.2) {
        return true;
    }
    let c = Point::new(0f64.clamp(lo.x, hi.x), 0f64.clamp(lo.y, hi.y));
    strictly_inside(dist, c)
}

fn bounding_box(dist: &SmoothedDist, region: &Region) -> Option<(Point, Point)> {
    match region {
        Region::AxisRectangle { lo, hi } => Some((*lo, *hi)),
        Region::CornerTriangle { v, delta } => Some((*v, Point::new(1.0 + delta - v.y, 1.0 + delta - v.x))),
        Region::CornerRegion { v, .. } => {
            // The support is symmetric under swapping coordinates.
            let x = support_x_extent(dist, v.y)?;
            let y = support_x_extent(dist, v.x)?;
            Some((*v, Point::new(x, y)))
        }
        _ => None,
    }
}

/// Lower-left staircase of `pts`: minimal points by increasing x, with
/// strictly decreasing y.
fn lower_staircase(mut pts: Vec<Point>) -> Vec<Point> {
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    let mut out: Vec<Point> = Vec::new();
    for p in pts {
        if out.last().is_none_or(|l| p.y < l.y) {
            out.push(p);
        }
    }
    out
}

/// Whether some staircase point is weakly dominated by `u`.
fn dominates_any(stair: &[Point], u: Point) -> bool {
    let k = stair.partition_point(|s| s.x <= u.x);
    k > 0 && stair[k - 1].y <= u.y
}

/// Looks for a support point outside `region` dominating a point inside it.
fn dominance_ok(dist: &SmoothedDist, region: &Region, samples: usize, seed: SeedSpec) -> Option<bool> {
    let (corner, top) = bounding_box(dist, region)?;
    let sampler = Sampler::new(dist);
    let mut rng = seed.rng();
    let mut inside = Vec::new();
    let mut outside = Vec::new();
    for _ in 0..samples {
        let u = sampler.draw(&mut rng);
        if region.contains(u) {
            inside.push(u);
        } else if u.dominates_weakly(corner) {
            outside.push(u);
        }
    }
    for _ in 0..INTERIOR_PROBES {
        let u = Point::new(
            rng.random_range(corner.x..=top.x.max(corner.x)),
            rng.random_range(corner.y..=top.y.max(corner.y)),
        );
        if region.contains(u) && support_contains(dist, u) {
            inside.push(u);
        }
    }
    let stair = lower_staircase(inside);
    Some(!outside.iter().any(|&u| dominates_any(&stair, u)))
}

/// Checks pairwise disjointness geometrically, dominance closure and the
/// per-region measure band by Monte Carlo (`mc_samples` per region for each).
pub fn verify_witness(dist: &SmoothedDist, w: &WitnessSet, mc_samples: usize, seed: u64) -> WitnessReport {
    let boxes: Vec<_> = w.regions.iter().map(as_box).collect();
    let mut unsupported: Vec<usize> = boxes
        .iter()
        .enumerate()
        .filter(|(_, b)| b.is_none())
        .map(|(i, _)| i)
        .collect();

    let mut overlapping = Vec::new();
    for i in 0..boxes.len() {
        for j in i + 1..boxes.len() {
            if let (Some(a), Some(b)) = (boxes[i], boxes[j]) {
                if interiors_meet(dist, a, b) {
                    overlapping.push((i, j));
                }
            }
        }
    }

    let nf = w.n as f64;
    let per_region: Vec<(Option<bool>, Option<MCEstimate>)> = w
        .regions
        .par_iter()
        .enumerate()
        .map(|(i, r)| {
            let dom = dominance_ok(dist, r, mc_samples, SeedSpec::new(seed, i as u64, 0));
            let mu = measure_mc_conditional(dist, r, mc_samples, SeedSpec::new(seed, i as u64, 1)).ok();
            (dom, mu)
        })
        .collect();

    let mut dominance_violations = Vec::new();
    let mut band_violations = Vec::new();
    let mut n_mu = Vec::with_capacity(w.regions.len());
    let mut n_mu_stderr = Vec::with_capacity(w.regions.len());
    for (i, (dom, mu)) in per_region.into_iter().enumerate() {
        match dom {
            Some(false) => dominance_violations.push(i),
            None => unsupported.push(i),
            Some(true) => {}
        }
        match mu {
            Some(e) => {
                let v = e.mean * nf;
                if !(MEASURE_BAND.0..=MEASURE_BAND.1).contains(&v) {
                    band_violations.push(i);
                }
                n_mu.push(v);
                n_mu_stderr.push(e.stderr * nf);
            }
            None => {
                band_violations.push(i);
                n_mu.push(f64::NAN);
                n_mu_stderr.push(f64::NAN);
            }
        }
    }
    unsupported.sort_unstable();
    unsupported.dedup();

    let disjoint = overlapping.is_empty();
    let dominant = dominance_violations.is_empty();
    WitnessReport {
        pass: disjoint && dominant && band_violations.is_empty() && unsupported.is_empty() && w.m > 0,
        disjoint,
        overlapping_pairs: overlapping,
        dominant,
        dominance_violations,
        unsupported_regions: unsupported,
        n_mu,
        n_mu_stderr,
        band_violations,
        m: w.m,
        predicted_count: w.predicted_count,
        count_ratio: w.m as f64 / w.predicted_count,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regime_guards() {
        assert!(witness_b1b1(2.0, 1 << 12).is_err());
        assert!(witness_b1b1(1e-3, 1 << 12).is_err());
        assert!(witness_b2b2(0.0, 1 << 12).is_err());
        assert!(witness_binfq(PNorm::INF, 1.0, 1 << 12).is_err());
        assert!(witness_binfq(PNorm::TWO, 100.0, 1 << 12).is_err());
        assert!(witness_binfq(PNorm::TWO, 64.0, 1 << 12).is_ok());
    }

    #[test]
    fn b1b1_apexes_on_the_shifted_edge() {
        let w = witness_b1b1(0.5, 1 << 12).unwrap();
        for r in &w.regions {
            let v = r.apex().unwrap();
            assert!((v.x + v.y - (1.5 - w.sigma)).abs() < 1e-12);
        }
    }

    #[test]
    fn binfq_middle_legs_match_sigma() {
        let (delta, n) = (1.0, 1 << 16);
        let w = witness_binfq_with(PNorm::TWO, delta, n, 1.0).unwrap();
        let apexes: Vec<Point> = w.regions.iter().map(|r| r.apex().unwrap()).collect();
        let mid = apexes.len() / 2;
        let (a, b) = (apexes[mid], apexes[mid + 1]);
        // α: distance to the right border at the apex height, which is the next knot.
        let alpha = b.x - a.x;
        let beta = (1.0 + (delta - (a.x - 1.0).powi(2)).sqrt()) - a.y;
        assert!((alpha * beta / (w.sigma * w.sigma) - 1.0).abs() < 1e-6);
        assert!(alpha / w.sigma > 0.5 && alpha / w.sigma < 2.0);

        let w1 = witness_binfq_with(PNorm::ONE, delta, n, 1.0).unwrap();
        let a = w1.regions[3].apex().unwrap();
        let b = w1.regions[4].apex().unwrap();
        assert!(((b.x - a.x) / w1.sigma - 1.0).abs() < 1e-9);
    }

    #[test]
    fn overlap_test_examples() {
        let dist = SmoothedDist::new(PNorm::TWO, PNorm::TWO, 0.5).unwrap();
        let corner = |x: f64, y: f64| as_box(&Region::CornerRegion { v: Point::new(x, y), dist }).unwrap();
        // Neighbours sharing a boundary point are disjoint.
        let y: f64 = 1.0;
        let xb = (1.5f64 * 1.5 - y * y).sqrt();
        assert!(!interiors_meet(&dist, corner(0.9, y), corner(xb, 0.8)));
        assert!(interiors_meet(&dist, corner(0.9, y), corner(xb - 0.01, 0.8)));
        // Upper-left meeting point outside the support, far box corner inside.
        assert!(interiors_meet(&dist, corner(-1.2, 0.0), corner(0.0, -1.2)));
        let rect = as_box(&Region::AxisRectangle {
            lo: Point::new(0.0, 0.0),
            hi: Point::new(0.1, 0.1),
        })
        .unwrap();
        assert!(interiors_meet(&dist, rect, corner(0.05, 0.05)));
        assert!(!interiors_meet(&dist, rect, corner(0.1, 0.0)));
    }

    #[test]
    fn staircase_lookup() {
        let stair = lower_staircase(vec![
            Point::new(0.0, 1.0),
            Point::new(0.5, 0.5),
            Point::new(0.6, 0.9),
            Point::new(1.0, 0.0),
        ]);
        assert_eq!(stair.len(), 3);
        assert!(dominates_any(&stair, Point::new(0.5, 0.5)));
        assert!(!dominates_any(&stair, Point::new(0.9, 0.4)));
        assert!(!dominates_any(&stair, Point::new(-0.1, 5.0)));
    }

    #[test]
    fn negative_controls() {
        let dist = SmoothedDist::new(PNorm::TWO, PNorm::TWO, 0.5).unwrap();
        let n = 1 << 12;
        let good = witness_b2b2(0.5, n).unwrap();

        let mut regions = good.regions.clone();
        let v = regions[2].apex().unwrap();
        regions.push(Region::CornerRegion {
            v: v + Point::new(1e-3, -1e-3),
            dist,
        });
        let rep = verify_witness(&dist, &WitnessSet::custom(dist, n, regions, good.sigma), 2000, 7);
        assert!(!rep.disjoint && !rep.pass);
        assert!(rep.overlapping_pairs.iter().any(|&(i, j)| i == 2 || j == 2));

        let rect = Region::AxisRectangle {
            lo: Point::new(-0.2, -0.2),
            hi: Point::new(0.2, 0.2),
        };
        let rep = verify_witness(&dist, &WitnessSet::custom(dist, n, vec![rect], 0.0), 2000, 7);
        assert!(!rep.dominant && !rep.pass);
        assert_eq!(rep.dominance_violations, vec![0]);
    }
}
