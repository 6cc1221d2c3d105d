//! Densities and region measures of `B_p + δ B_q`.
//!
//! The density at `v` is `Area(B_q(v, δ) ∩ B_p) / (a_p a_q δ²)`, evaluated on
//! inscribed polygons. Measures are estimated three ways: plain hit counting,
//! a conditional estimator that integrates out the `B_p` component exactly,
//! and tensor Gauss–Legendre quadrature of the numeric density.

mod families;

use std::f64::consts::{FRAC_PI_4, PI};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::geometry::{
    has_exact_quadrant_area, lp_norm, overlap_area, quadrant_area, support_contains, unit_ball_area, Chains, PNorm,
    Point, DENSITY_RESOLUTION,
};
use crate::sampling::{SeedSpec, Sampler, SmoothedDist};
use crate::stats;

pub use families::{
    b1b1_regions, b1b2_regions, binfq_regions, density_b1b2, density_b2b2, density_binfq, disk_overlap_area,
    measure_sector_b2b2, measure_t_b1b1, sector_measure_b2b2_exact, sector_measure_mc_b2b2, B1B1Measure, B1B1Region,
    B1B2Density, B1B2Region, B1B2Value, B2B2Density, BinfqDensity, BinfqRegion, SectorMeasure,
};

/// Smallest sample count accepted by the Monte Carlo estimators.
pub const MIN_MC_SAMPLES: usize = 1000;

/// Membership test for [`Region::Predicate`].
pub type Indicator = Arc<dyn Fn(Point) -> bool + Send + Sync>;

/// A measurable subset of the plane.
#[derive(Clone)]
pub enum Region {
    /// Closed box `[lo.x, hi.x] × [lo.y, hi.y]`.
    AxisRectangle { lo: Point, hi: Point },
    /// `P(v)`: support points dominating `v` (weakly).
    CornerRegion { v: Point, dist: SmoothedDist },
    /// `T(v)` for `B_1 + δB_1`: the right triangle `u >= v`, `u.x + u.y <= 1 + δ`.
    CornerTriangle { v: Point, delta: f64 },
    /// Points of a `B_2 + δB_2` support with polar angle in `[theta_lo, theta_hi)`
    /// and Euclidean norm in `[1 + δ - sigma, 1 + δ]`.
    AnnularSector {
        theta_lo: f64,
        theta_hi: f64,
        sigma: f64,
        delta: f64,
    },
    /// For `B_1 + δB_2`: points right of the corner disk centre `(1, 0)` with
    /// `u.x - u.y >= 1`, `|u - (1,0)| <= δ`, and angle
    /// `atan2(u.y, u.x - 1)` in `(theta_lo, theta_hi]`.
    Wedge { theta_lo: f64, theta_hi: f64, delta: f64 },
    /// Closed upper-right quadrant with apex `corner`.
    Quadrant { corner: Point },
    Predicate(Indicator),
}

impl fmt::Debug for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Region::Predicate(_) => f.write_str("Predicate(..)"),
            other => write!(f, "{}", other.describe()),
        }
    }
}

fn normalized_angle(y: f64, x: f64) -> f64 {
    let t = y.atan2(x);
    if t < 0.0 {
        t + 2.0 * PI
    } else {
        t
    }
}

impl Region {
    pub fn contains(&self, u: Point) -> bool {
        match self {
            Region::AxisRectangle { lo, hi } => u.dominates_weakly(*lo) && hi.dominates_weakly(u),
            Region::CornerRegion { v, dist } => u.dominates_weakly(*v) && support_contains(dist, u),
            Region::CornerTriangle { v, delta } => u.dominates_weakly(*v) && u.x + u.y <= 1.0 + delta,
            Region::AnnularSector {
                theta_lo,
                theta_hi,
                sigma,
                delta,
            } => {
                let r = u.x.hypot(u.y);
                if r > 1.0 + delta || r < 1.0 + delta - sigma {
                    return false;
                }
                let t = normalized_angle(u.y, u.x);
                t >= *theta_lo && t < *theta_hi
            }
            Region::Wedge {
                theta_lo,
                theta_hi,
                delta,
            } => {
                let d = Point::new(u.x - 1.0, u.y);
                if u.y < 0.0 || u.x - u.y < 1.0 || d.x.hypot(d.y) > *delta {
                    return false;
                }
                let t = d.y.atan2(d.x);
                t > *theta_lo && t <= *theta_hi
            }
            Region::Quadrant { corner } => u.dominates_weakly(*corner),
            Region::Predicate(f) => f(u),
        }
    }

    /// The lower-left apex for regions that are upward closed within the support.
    pub fn apex(&self) -> Option<Point> {
        match self {
            Region::CornerRegion { v, .. } | Region::CornerTriangle { v, .. } => Some(*v),
            Region::Quadrant { corner } => Some(*corner),
            _ => None,
        }
    }

    /// JSON description (predicates are opaque).
    pub fn describe(&self) -> serde_json::Value {
        let pt = |p: &Point| json!([p.x, p.y]);
        match self {
            Region::AxisRectangle { lo, hi } => json!({"kind": "axis_rectangle", "lo": pt(lo), "hi": pt(hi)}),
            Region::CornerRegion { v, dist } => json!({
                "kind": "corner_region", "v": pt(v),
                "p": dist.p, "q": dist.q, "delta": dist.delta,
            }),
            Region::CornerTriangle { v, delta } => json!({"kind": "corner_triangle", "v": pt(v), "delta": delta}),
            Region::AnnularSector {
                theta_lo,
                theta_hi,
                sigma,
                delta,
            } => json!({
                "kind": "annular_sector", "theta_lo": theta_lo, "theta_hi": theta_hi,
                "sigma": sigma, "delta": delta,
            }),
            Region::Wedge {
                theta_lo,
                theta_hi,
                delta,
            } => json!({"kind": "wedge", "theta_lo": theta_lo, "theta_hi": theta_hi, "delta": delta}),
            Region::Quadrant { corner } => json!({"kind": "quadrant", "corner": pt(corner)}),
            Region::Predicate(_) => json!({"kind": "predicate"}),
        }
    }
}

/// A Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MCEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: usize,
}

impl MCEstimate {
    fn from_hits(hits: u64, samples: usize) -> Self {
        let n = samples as f64;
        let p = hits as f64 / n;
        MCEstimate {
            mean: p,
            stderr: (p * (1.0 - p) / n).sqrt(),
            samples,
        }
    }

    fn from_moments(sum: f64, sum_sq: f64, samples: usize) -> Self {
        let n = samples as f64;
        let mean = sum / n;
        let var = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
        MCEstimate {
            mean,
            stderr: (var / n).sqrt(),
            samples,
        }
    }

    /// Distance to `value` in standard errors.
    pub fn z_score(&self, value: f64) -> f64 {
        (self.mean - value) / self.stderr.max(f64::MIN_POSITIVE)
    }
}

fn check_samples(samples: usize) -> Result<()> {
    if samples < MIN_MC_SAMPLES {
        return Err(Error::param("samples", format!("{samples} < {MIN_MC_SAMPLES}")));
    }
    Ok(())
}

/// Numeric density evaluator with the unit-ball chains built once.
#[derive(Debug, Clone)]
pub struct DensityField {
    dist: SmoothedDist,
    outer: Chains,
    inner: Chains,
    norm: f64,
}

impl DensityField {
    /// Polygons with `m` vertices; `δ` must be positive.
    pub fn new(dist: SmoothedDist, m: usize) -> Result<Self> {
        if dist.delta <= 0.0 {
            return Err(Error::param(
                "delta",
                "density of B_p + 0·B_q is the uniform 1/a_p on B_p; delta must be > 0",
            ));
        }
        let outer = Chains::ball(dist.p, 1.0, Point::ORIGIN, m)?;
        let inner = Chains::ball(dist.q, 1.0, Point::ORIGIN, m)?;
        let norm = 1.0 / (unit_ball_area(dist.p) * unit_ball_area(dist.q) * dist.delta * dist.delta);
        Ok(DensityField {
            dist,
            outer,
            inner,
            norm,
        })
    }

    pub fn dist(&self) -> &SmoothedDist {
        &self.dist
    }

    /// `Area((v + δB_q) ∩ B_p)`.
    pub fn preimage_area(&self, v: Point) -> f64 {
        overlap_area(&self.outer, &self.inner.transformed(self.dist.delta, v))
    }

    pub fn density(&self, v: Point) -> f64 {
        self.preimage_area(v) * self.norm
    }
}

/// Density of `B_p + δB_q` at `v` at the default polygon resolution.
pub fn density_numeric(dist: &SmoothedDist, v: Point) -> Result<f64> {
    Ok(DensityField::new(*dist, DENSITY_RESOLUTION)?.density(v))
}

/// Hit-count estimate of `μ(region)`.
pub fn measure_mc(dist: &SmoothedDist, region: &Region, samples: usize, seed: SeedSpec) -> Result<MCEstimate> {
    Ok(measure_mc_many(dist, std::slice::from_ref(region), samples, seed)?[0])
}

/// Hit-count estimates for several regions from one shared sample stream.
pub fn measure_mc_many(
    dist: &SmoothedDist,
    regions: &[Region],
    samples: usize,
    seed: SeedSpec,
) -> Result<Vec<MCEstimate>> {
    check_samples(samples)?;
    let sampler = Sampler::new(dist);
    let mut rng = seed.rng();
    let mut hits = vec![0u64; regions.len()];
    for _ in 0..samples {
        let v = sampler.draw(&mut rng);
        for (h, r) in hits.iter_mut().zip(regions) {
            if r.contains(v) {
                *h += 1;
            }
        }
    }
    Ok(hits.into_iter().map(|h| MCEstimate::from_hits(h, samples)).collect())
}

/// Exact `Area(B_p ∩ Q(corner))` or `Area(B_p ∩ box)`; the shapes the
/// conditional estimator can integrate.
#[derive(Debug, Clone, Copy)]
enum Integrable {
    Quadrant(Point),
    Box(Point, Point),
}

impl Integrable {
    fn of(region: &Region) -> Option<Self> {
        match region {
            Region::CornerRegion { v, .. } | Region::CornerTriangle { v, .. } => Some(Integrable::Quadrant(*v)),
            Region::Quadrant { corner } => Some(Integrable::Quadrant(*corner)),
            Region::AxisRectangle { lo, hi } => Some(Integrable::Box(*lo, *hi)),
            _ => None,
        }
    }

    /// Area of `ball ∩ (self - shift) / scale`, times `scale²`.
    fn area(self, ball: PNorm, shift: Point, scale: f64) -> f64 {
        let q = |c: Point| quadrant_area(ball, (c - shift) * (1.0 / scale));
        let raw = match self {
            Integrable::Quadrant(c) => q(c),
            Integrable::Box(lo, hi) => {
                if hi.x <= lo.x || hi.y <= lo.y {
                    0.0
                } else {
                    q(lo) - q(Point::new(hi.x, lo.y)) - q(Point::new(lo.x, hi.y)) + q(hi)
                }
            }
        };
        raw.max(0.0) * scale * scale
    }
}

/// Conditional Monte Carlo estimate of `μ(region)`.
///
/// With `u ~ B_p` and `w ~ B_q`, `μ(A) = E_w[Area(B_p ∩ (A - δw))] / a_p`; the
/// inner area has a closed form when `A` is a box or an upper-right quadrant
/// (corner regions and `T(v)` are quadrants intersected with the support,
/// and `B_p - δw` lies inside the support). When `B_p` has no closed-form
/// quadrant area the roles are swapped and `u` is sampled instead.
pub fn measure_mc_conditional(
    dist: &SmoothedDist,
    region: &Region,
    samples: usize,
    seed: SeedSpec,
) -> Result<MCEstimate> {
    check_samples(samples)?;
    let shape = Integrable::of(region).ok_or_else(|| {
        Error::param(
            "region",
            format!("conditional estimator needs a box or corner region, got {region:?}"),
        )
    })?;
    if let Region::CornerRegion { dist: d, .. } = region {
        if d != dist {
            return Err(Error::param("region", "corner region built for a different distribution"));
        }
    }
    if let Region::CornerTriangle { v, delta } = region {
        if !(dist.p.is(1.0) && dist.q.is(1.0) && *delta == dist.delta && v.x >= 0.0 && v.y >= 0.0) {
            return Err(Error::param(
                "region",
                "corner triangles are first-quadrant regions of B_1 + δB_1",
            ));
        }
    }
    let sampler = Sampler::new(dist);
    let mut rng = seed.rng();
    let swap = !has_exact_quadrant_area(dist.p) && has_exact_quadrant_area(dist.q) && dist.delta > 0.0;
    let (norm, mut sum, mut sum_sq) = if swap {
        (1.0 / (unit_ball_area(dist.q) * dist.delta * dist.delta), 0.0, 0.0)
    } else {
        (1.0 / unit_ball_area(dist.p), 0.0, 0.0)
    };
    for _ in 0..samples {
        let (u, w) = sampler.draw_parts(&mut rng);
        let a = if swap {
            shape.area(dist.q, u, dist.delta)
        } else {
            shape.area(dist.p, w * dist.delta, 1.0)
        } * norm;
        sum += a;
        sum_sq += a * a;
    }
    Ok(MCEstimate::from_moments(sum, sum_sq, samples))
}

/// Tensor Gauss–Legendre quadrature of the numeric density over a region
/// with a natural parameterisation: boxes in Cartesian coordinates, annular
/// sectors and wedges in polar coordinates about their centre.
/// `panels × order` nodes per axis.
pub fn measure_quadrature(dist: &SmoothedDist, region: &Region, panels: usize, order: usize) -> Result<f64> {
    let field = DensityField::new(*dist, DENSITY_RESOLUTION)?;
    let nodes = |a: f64, b: f64| -> Vec<(f64, f64)> {
        let rule = stats::gauss_legendre(order);
        let h = (b - a) / panels as f64;
        let mut out = Vec::with_capacity(panels * order);
        for k in 0..panels {
            let mid = a + h * (k as f64 + 0.5);
            out.extend(rule.iter().map(|&(x, w)| (mid + 0.5 * h * x, 0.5 * h * w)));
        }
        out
    };
    let polar = |c: Point, r0: f64, r1: f64, t0: f64, t1: f64| -> f64 {
        let (rs, ts) = (nodes(r0, r1), nodes(t0, t1));
        let mut total = 0.0;
        for &(r, wr) in &rs {
            for &(t, wt) in &ts {
                let (s, co) = t.sin_cos();
                total += wr * wt * r * field.density(c + Point::new(r * co, r * s));
            }
        }
        total
    };
    match region {
        Region::AxisRectangle { lo, hi } => {
            let (xs, ys) = (nodes(lo.x, hi.x), nodes(lo.y, hi.y));
            let mut total = 0.0;
            for &(x, wx) in &xs {
                for &(y, wy) in &ys {
                    total += wx * wy * field.density(Point::new(x, y));
                }
            }
            Ok(total)
        }
        Region::AnnularSector {
            theta_lo,
            theta_hi,
            sigma,
            delta,
        } => {
            let outer = 1.0 + delta;
            Ok(polar(Point::ORIGIN, (outer - sigma).max(0.0), outer, *theta_lo, *theta_hi))
        }
        Region::Wedge {
            theta_lo,
            theta_hi,
            delta,
        } => {
            let (t0, t1) = (theta_lo.max(0.0), theta_hi.min(FRAC_PI_4));
            if t1 <= t0 {
                return Ok(0.0);
            }
            Ok(polar(Point::new(1.0, 0.0), 0.0, *delta, t0, t1))
        }
        other => Err(Error::param(
            "region",
            format!("no quadrature parameterisation for {other:?}"),
        )),
    }
}

/// `1 / a_p`, the density of the unsmoothed ball, for `lp_norm(p, v) <= 1`.
pub fn uniform_density(p: PNorm, v: Point) -> f64 {
    if lp_norm(p, v) <= 1.0 {
        1.0 / unit_ball_area(p)
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(p: PNorm, q: PNorm, d: f64) -> SmoothedDist {
        SmoothedDist::new(p, q, d).unwrap()
    }

    #[test]
    fn nested_squares_density() {
        let d = dist(PNorm::INF, PNorm::INF, 0.1);
        assert!((density_numeric(&d, Point::ORIGIN).unwrap() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn density_vanishes_outside_support() {
        let d = dist(PNorm::TWO, PNorm::ONE, 0.3);
        assert_eq!(density_numeric(&d, Point::new(1.31, 0.0)).unwrap(), 0.0);
        assert_eq!(density_numeric(&d, Point::new(1.0, 1.0)).unwrap(), 0.0);
    }

    #[test]
    fn interior_density_is_uniform() {
        let d = dist(PNorm::TWO, PNorm::TWO, 0.3);
        for v in [Point::ORIGIN, Point::new(0.3, -0.2), Point::new(0.0, 0.5)] {
            let f = density_numeric(&d, v).unwrap();
            assert!((f - 1.0 / PI).abs() < 1e-3, "{v:?}: {f}");
        }
    }

    #[test]
    fn zero_delta_rejected() {
        let d = dist(PNorm::TWO, PNorm::TWO, 0.0);
        assert!(density_numeric(&d, Point::ORIGIN).is_err());
    }

    #[test]
    fn full_support_has_measure_one() {
        let d = dist(PNorm::ONE, PNorm::TWO, 0.4);
        let region = Region::Predicate(Arc::new(move |u| support_contains(&d, u)));
        let est = measure_mc(&d, &region, 20_000, SeedSpec::new(1, 0, 0)).unwrap();
        assert_eq!(est.mean, 1.0);
        assert_eq!(est.stderr, 0.0);
    }

    #[test]
    fn small_delta_ball_carries_most_mass() {
        let d = dist(PNorm::TWO, PNorm::TWO, 0.01);
        let ball = Region::Predicate(Arc::new(|u: Point| u.x.hypot(u.y) <= 1.0));
        let est = measure_mc(&d, &ball, 100_000, SeedSpec::new(2, 0, 0)).unwrap();
        assert!(est.mean >= 0.95);
    }

    #[test]
    fn too_few_samples_rejected() {
        let d = dist(PNorm::ONE, PNorm::ONE, 0.1);
        let r = Region::Quadrant { corner: Point::ORIGIN };
        assert!(measure_mc(&d, &r, 999, SeedSpec::new(0, 0, 0)).is_err());
    }

    #[test]
    fn estimators_agree_on_rectangles() {
        let cases = [
            (dist(PNorm::ONE, PNorm::TWO, 0.5), Point::new(0.2, -0.3), Point::new(0.9, 0.4)),
            (dist(PNorm::TWO, PNorm::INF, 0.2), Point::new(-0.5, 0.5), Point::new(0.4, 1.1)),
            (dist(PNorm::Finite(3.0), PNorm::ONE, 1.0), Point::new(0.0, 0.0), Point::new(1.5, 0.7)),
        ];
        for (i, (d, lo, hi)) in cases.into_iter().enumerate() {
            let r = Region::AxisRectangle { lo, hi };
            let hit = measure_mc(&d, &r, 200_000, SeedSpec::new(3, i as u64, 0)).unwrap();
            let cond = measure_mc_conditional(&d, &r, 20_000, SeedSpec::new(4, i as u64, 0)).unwrap();
            let quad = measure_quadrature(&d, &r, 4, 8).unwrap();
            let se = hit.stderr.hypot(cond.stderr);
            assert!((hit.mean - cond.mean).abs() < 4.0 * se, "{i}: {hit:?} {cond:?}");
            assert!((hit.mean - quad).abs() < 4.0 * hit.stderr, "{i}: {hit:?} {quad}");
        }
    }

    #[test]
    fn conditional_corner_region_matches_hit_count() {
        let d = dist(PNorm::INF, PNorm::TWO, 0.5);
        let r = Region::CornerRegion {
            v: Point::new(0.9, 0.8),
            dist: d,
        };
        let hit = measure_mc(&d, &r, 200_000, SeedSpec::new(5, 0, 0)).unwrap();
        let cond = measure_mc_conditional(&d, &r, 20_000, SeedSpec::new(6, 0, 0)).unwrap();
        assert!((hit.mean - cond.mean).abs() < 4.0 * hit.stderr.hypot(cond.stderr));
        assert!(cond.stderr < hit.stderr);
    }

    #[test]
    fn region_membership() {
        let s = Region::AnnularSector {
            theta_lo: 0.0,
            theta_hi: PI / 4.0,
            sigma: 0.1,
            delta: 0.2,
        };
        assert!(s.contains(Point::new(1.15, 0.1)));
        assert!(!s.contains(Point::new(1.0, 0.1)));
        assert!(!s.contains(Point::new(0.1, 1.15)));
        let w = Region::Wedge {
            theta_lo: 0.0,
            theta_hi: 0.5,
            delta: 0.3,
        };
        assert!(w.contains(Point::new(1.2, 0.05)));
        assert!(!w.contains(Point::new(1.2, 0.2)));
        assert!(!w.contains(Point::new(1.2, 0.0)));
    }
}
