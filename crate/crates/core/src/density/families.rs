//! Closed-form density and measure scales for specific `(p, q)` pairs.
//!
//! Each family evaluates an order-of-magnitude expression and multiplies it
//! by constants fitted once, at construction, against a numeric reference at
//! a fixed calibration point. Free functions use a shared default instance.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4, PI, SQRT_2};
use std::sync::{Mutex, OnceLock};

use rand::Rng;
use serde::Serialize;

use super::{density_numeric, measure_mc_conditional, MCEstimate, Region};
use crate::error::{Error, Result};
use crate::geometry::{PNorm, Point};
use crate::sampling::{SeedSpec, SmoothedDist};
use crate::stats;

const CALIBRATION_SEED: u64 = 0x5EED_CA1B;

fn outside(v: Point, reason: &'static str) -> Error {
    Error::OutsideDomain { x: v.x, y: v.y, reason }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta.is_finite() {
        Ok(())
    } else {
        Err(Error::param("delta", format!("{delta} must be positive")))
    }
}

// ---------------------------------------------------------------- B1 + δB1

/// Parts of the first-quadrant support of `B_1 + δB_1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum B1B1Region {
    /// Inside `B_1`.
    I,
    /// `y >= 1`.
    U,
    /// `x >= 1`.
    B,
    /// The rest of the outer band.
    M,
}

/// Classifies a first-quadrant support point of `B_1 + δB_1`.
pub fn b1b1_regions(delta: f64, v: Point) -> Result<B1B1Region> {
    check_delta(delta)?;
    if v.x < 0.0 || v.y < 0.0 {
        return Err(outside(v, "B1+δB1 regions cover the first quadrant"));
    }
    let s = v.x + v.y;
    if s > 1.0 + delta {
        return Err(outside(v, "outside the support of B1+δB1"));
    }
    Ok(if s <= 1.0 {
        B1B1Region::I
    } else if v.y >= 1.0 {
        B1B1Region::U
    } else if v.x >= 1.0 {
        B1B1Region::B
    } else {
        B1B1Region::M
    })
}

/// Scale of `μ(T(v))` for `B_1 + δB_1`.
#[derive(Debug, Clone, Copy)]
pub struct B1B1Measure {
    /// Constant of the outer band `U ∪ B ∪ M`.
    pub k_band: f64,
    /// Constant of the interior `I`.
    pub k_inner: f64,
}

impl B1B1Measure {
    /// Fits both constants with the conditional estimator: the band at
    /// `δ = 0.5, σ = 0.05` on the diagonal, the interior at `δ = 0.1, v = (0.2, 0.2)`.
    pub fn new() -> Self {
        let fit = |delta: f64, v: Point, stream: u64| {
            let dist = SmoothedDist::new(PNorm::ONE, PNorm::ONE, delta).expect("valid");
            let est = measure_mc_conditional(
                &dist,
                &Region::CornerTriangle { v, delta },
                200_000,
                SeedSpec::new(CALIBRATION_SEED, 11, stream),
            )
            .expect("valid region");
            est.mean / Self::raw(delta, v).expect("calibration point in domain").1
        };
        let d = 0.5;
        let s = 0.05;
        let c = 0.5 * (1.0 + d - s);
        B1B1Measure {
            k_band: fit(d, Point::new(c, c), 0),
            k_inner: fit(0.1, Point::new(0.2, 0.2), 1),
        }
    }

    /// Region and order-of-magnitude expression without the constant.
    pub fn raw(delta: f64, v: Point) -> Result<(B1B1Region, f64)> {
        let region = b1b1_regions(delta, v)?;
        let sigma = 1.0 + delta - v.x - v.y;
        let s3 = sigma.powi(3);
        let value = match region {
            B1B1Region::U => (1.0 + delta - v.y) * s3 / (delta * delta),
            B1B1Region::B => (1.0 + delta - v.x) * s3 / (delta * delta),
            B1B1Region::M => s3 / delta,
            B1B1Region::I => sigma * sigma,
        };
        Ok((region, value))
    }

    pub fn eval(&self, delta: f64, v: Point) -> Result<f64> {
        let (region, raw) = Self::raw(delta, v)?;
        Ok(raw
            * match region {
                B1B1Region::I => self.k_inner,
                _ => self.k_band,
            })
    }
}

impl Default for B1B1Measure {
    fn default() -> Self {
        Self::new()
    }
}

/// Calibrated scale of `μ(T(v))` for `B_1 + δB_1`, `v` in the first-quadrant support.
pub fn measure_t_b1b1(delta: f64, v: Point) -> Result<f64> {
    static FAMILY: OnceLock<B1B1Measure> = OnceLock::new();
    FAMILY.get_or_init(B1B1Measure::new).eval(delta, v)
}

// ---------------------------------------------------------------- B2 + δB2

/// Radial density scale of `B_2 + δB_2`: `K min(σ/δ, 1)^{3/2}` with `σ`
/// the distance to the outer boundary.
#[derive(Debug, Clone, Copy)]
pub struct B2B2Density {
    pub k: f64,
}

impl B2B2Density {
    /// Fits `K` against the numeric density at `δ = 0.25, σ = δ/10`.
    pub fn new() -> Self {
        let delta = 0.25;
        let sigma = delta / 10.0;
        let dist = SmoothedDist::new(PNorm::TWO, PNorm::TWO, delta).expect("valid");
        let f = density_numeric(&dist, Point::new(1.0 + delta - sigma, 0.0)).expect("delta > 0");
        B2B2Density {
            k: f / Self::raw(delta, sigma).expect("in range"),
        }
    }

    pub fn raw(delta: f64, sigma: f64) -> Result<f64> {
        check_delta(delta)?;
        if !(0.0..=1.0 + delta).contains(&sigma) {
            return Err(Error::param("sigma", format!("{sigma} outside [0, 1 + δ]")));
        }
        Ok((sigma / delta).min(1.0).powf(1.5))
    }

    pub fn eval(&self, delta: f64, sigma: f64) -> Result<f64> {
        Ok(self.k * Self::raw(delta, sigma)?)
    }
}

impl Default for B2B2Density {
    fn default() -> Self {
        Self::new()
    }
}

/// Calibrated density scale of `B_2 + δB_2` at distance `sigma` from the outer boundary.
pub fn density_b2b2(delta: f64, sigma: f64) -> Result<f64> {
    static FAMILY: OnceLock<B2B2Density> = OnceLock::new();
    FAMILY.get_or_init(B2B2Density::new).eval(delta, sigma)
}

/// Area of the intersection of disks of radii `r1`, `r2` with centres `d` apart.
pub fn disk_overlap_area(r1: f64, r2: f64, d: f64) -> f64 {
    if d >= r1 + r2 {
        return 0.0;
    }
    if d <= (r1 - r2).abs() {
        let r = r1.min(r2);
        return PI * r * r;
    }
    let a1 = ((d * d + r1 * r1 - r2 * r2) / (2.0 * d * r1)).clamp(-1.0, 1.0).acos();
    let a2 = ((d * d + r2 * r2 - r1 * r1) / (2.0 * d * r2)).clamp(-1.0, 1.0).acos();
    let k = (-d + r1 + r2) * (d + r1 - r2) * (d - r1 + r2) * (d + r1 + r2);
    r1 * r1 * a1 + r2 * r2 * a2 - 0.5 * k.max(0.0).sqrt()
}

/// `μ(R_i(σ))` for `B_2 + δB_2` split into `t` sectors, by one-dimensional
/// quadrature: with `u = ρe`, `P(|u + δw| >= R) = 1 - Area(B_2 ∩ B_2(-ρe/δ, R/δ))/π`
/// and `|u|` has density `2ρ`.
pub fn sector_measure_b2b2_exact(delta: f64, t: u32, sigma: f64) -> Result<f64> {
    check_sector(delta, t, sigma)?;
    let big_r = 1.0 + delta - sigma;
    let rho_min = (big_r - delta).max(0.0);
    // ρ = ρ_min + (1 - ρ_min) s² smooths the (ρ - ρ_min)^{3/2} onset.
    let span = 1.0 - rho_min;
    let integrand = |s: f64| {
        let rho = rho_min + span * s * s;
        let miss = 1.0 - disk_overlap_area(1.0, big_r / delta, rho / delta) / PI;
        2.0 * rho * miss.max(0.0) * 2.0 * span * s
    };
    Ok(stats::integrate(integrand, 0.0, 1.0, 64, 16) / t as f64)
}

fn check_sector(delta: f64, t: u32, sigma: f64) -> Result<()> {
    check_delta(delta)?;
    if t < 8 {
        return Err(Error::param("t", format!("{t} sectors; at least 8 required")));
    }
    if !(0.0..=1.0 + delta).contains(&sigma) {
        return Err(Error::param("sigma", format!("{sigma} outside [0, 1 + δ]")));
    }
    Ok(())
}

/// Hit-count estimates of `μ(R_i(σ))` for several `σ` from one sample stream.
///
/// Every sector of the annulus has the same measure, so hits anywhere in the
/// annulus count with weight `1/t`. Only the ring `|u| >= 1 + δ - σ_max - δ`
/// of `B_2` can reach the annulus; `u` is drawn from that ring and the result
/// reweighted by its probability.
pub fn sector_measure_mc_b2b2(
    delta: f64,
    t: u32,
    sigmas: &[f64],
    samples: usize,
    seed: SeedSpec,
) -> Result<Vec<MCEstimate>> {
    for &s in sigmas {
        check_sector(delta, t, s)?;
    }
    if samples < super::MIN_MC_SAMPLES {
        return Err(Error::param("samples", format!("{samples} too few")));
    }
    let sigma_max = sigmas.iter().cloned().fold(0.0, f64::max);
    let r_in = (1.0 - sigma_max).max(0.0);
    let ring_prob = 1.0 - r_in * r_in;
    let radii: Vec<f64> = sigmas.iter().map(|s| 1.0 + delta - s).collect();
    let mut hits = vec![0u64; sigmas.len()];
    let mut rng = seed.rng();
    for _ in 0..samples {
        // |u|² uniform on [r_in², 1] gives u uniform on the ring.
        let rho = (r_in * r_in + ring_prob * rng.random::<f64>()).sqrt();
        let phi = 2.0 * PI * rng.random::<f64>();
        let w = crate::sampling::sample_ball(PNorm::TWO, &mut rng);
        let v = Point::new(rho * phi.cos(), rho * phi.sin()) + w * delta;
        let r = v.x.hypot(v.y);
        for (h, &radius) in hits.iter_mut().zip(&radii) {
            if r >= radius {
                *h += 1;
            }
        }
    }
    let n = samples as f64;
    Ok(hits
        .into_iter()
        .map(|h| {
            let p = h as f64 / n;
            let scale = ring_prob / t as f64;
            MCEstimate {
                mean: p * scale,
                stderr: (p * (1.0 - p) / n).sqrt() * scale,
                samples,
            }
        })
        .collect())
}

/// Scale of `μ(R_i(σ))`: `σ^{5/2} / (t δ^{3/2})` up to `σ = δ`, `σ / t` beyond.
#[derive(Debug, Clone, Copy)]
pub struct SectorMeasure {
    pub k: f64,
}

impl SectorMeasure {
    /// Fits `K` against the radial quadrature at `δ = 0.25, t = 8, σ = δ/10`.
    pub fn new() -> Self {
        let (delta, t, sigma) = (0.25, 8, 0.025);
        let exact = sector_measure_b2b2_exact(delta, t, sigma).expect("valid");
        SectorMeasure {
            k: exact / Self::raw(delta, t, sigma).expect("valid"),
        }
    }

    pub fn raw(delta: f64, t: u32, sigma: f64) -> Result<f64> {
        check_sector(delta, t, sigma)?;
        let t = t as f64;
        Ok(if sigma <= delta {
            sigma.powf(2.5) / (t * delta.powf(1.5))
        } else {
            sigma / t
        })
    }

    pub fn eval(&self, delta: f64, t: u32, sigma: f64) -> Result<f64> {
        Ok(self.k * Self::raw(delta, t, sigma)?)
    }
}

impl Default for SectorMeasure {
    fn default() -> Self {
        Self::new()
    }
}

/// Calibrated scale of `μ(R_i(σ))` for `B_2 + δB_2` cut into `t >= 8` sectors.
pub fn measure_sector_b2b2(delta: f64, t: u32, sigma: f64) -> Result<f64> {
    static FAMILY: OnceLock<SectorMeasure> = OnceLock::new();
    FAMILY.get_or_init(SectorMeasure::new).eval(delta, t, sigma)
}

// ---------------------------------------------------------------- B1 + δB2

/// Parts of the first-octant support of `B_1 + δB_2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum B1B2Region {
    /// Inside `B_1`.
    A,
    /// Beside the flat edge; `sigma` is the distance to the outer edge.
    B { sigma: f64 },
    /// Around the corner `(1, 0)`: `r` is the distance to it, `sigma = δ - r`,
    /// `theta` the angle of `v - (1,0)` with the x axis, `gamma = π/4 - theta`.
    C { sigma: f64, r: f64, theta: f64, gamma: f64 },
}

/// Folds `v` into the first octant `0 <= y <= x` by the symmetries of the support.
fn fold_octant(v: Point) -> Point {
    let a = v.abs();
    if a.y > a.x {
        Point::new(a.y, a.x)
    } else {
        a
    }
}

/// Classifies `v` (folded into the first octant) for `B_1 + δB_2`.
pub fn b1b2_regions(delta: f64, v: Point) -> Result<B1B2Region> {
    check_delta(delta)?;
    let u = fold_octant(v);
    if u.x + u.y <= 1.0 {
        return Ok(B1B2Region::A);
    }
    if u.x - u.y <= 1.0 {
        let sigma = FRAC_1_SQRT_2 * (1.0 + SQRT_2 * delta - u.x - u.y);
        if sigma < 0.0 {
            return Err(outside(v, "outside the support of B1+δB2"));
        }
        return Ok(B1B2Region::B { sigma });
    }
    let r = (u.x - 1.0).hypot(u.y);
    if r > delta {
        return Err(outside(v, "outside the support of B1+δB2"));
    }
    let theta = u.y.atan2(u.x - 1.0);
    Ok(B1B2Region::C {
        sigma: delta - r,
        r,
        theta,
        gamma: FRAC_PI_4 - theta,
    })
}

/// Density scales of `B_1 + δB_2`.
#[derive(Debug, Clone, Copy)]
pub struct B1B2Density {
    /// Interior constant for `δ <= 1`.
    pub k_a_small: f64,
    /// Interior constant for `δ > 1`.
    pub k_a_large: f64,
    /// Shared constant of the outer regions `B` and `C`.
    pub k_outer: f64,
}

/// How a [`B1B2Density`] value was produced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum B1B2Value {
    Scale(f64),
    /// Region `C` with `σ > δ/2`, where the numeric density is returned.
    Numeric(f64),
}

impl B1B2Value {
    pub fn value(self) -> f64 {
        match self {
            B1B2Value::Scale(v) | B1B2Value::Numeric(v) => v,
        }
    }
}

impl B1B2Density {
    /// Interior constants from deep points at `δ = 0.5` and `δ = 4`; the
    /// outer constant at `δ = 0.25`, `σ = δ/10` on the flat edge.
    pub fn new() -> Self {
        let f = |delta: f64, v: Point| {
            let dist = SmoothedDist::new(PNorm::ONE, PNorm::TWO, delta).expect("valid");
            density_numeric(&dist, v).expect("delta > 0")
        };
        let deep = Point::new(0.2, 0.1);
        let delta = 0.25;
        let sigma = delta / 10.0;
        // Middle of the flat edge: x - y = 1/2, distance σ inside.
        let s = 1.0 + SQRT_2 * delta - SQRT_2 * sigma;
        let edge = Point::new(0.5 * (s + 0.5), 0.5 * (s - 0.5));
        let outer_raw = Self::raw(delta, edge).expect("in B").1;
        B1B2Density {
            k_a_small: f(0.5, deep),
            k_a_large: f(4.0, deep) * 16.0,
            k_outer: f(delta, edge) / outer_raw,
        }
    }

    /// Region and order-of-magnitude expression without constants.
    pub fn raw(delta: f64, v: Point) -> Result<(B1B2Region, f64)> {
        let region = b1b2_regions(delta, v)?;
        let d2 = delta * delta;
        let value = match region {
            B1B2Region::A => {
                if delta <= 1.0 {
                    1.0
                } else {
                    1.0 / d2
                }
            }
            B1B2Region::B { sigma } => {
                if sigma >= 1.0 {
                    1.0 / d2
                } else if delta * sigma >= 1.0 {
                    sigma / d2
                } else {
                    (sigma / delta).powf(1.5)
                }
            }
            B1B2Region::C { sigma, gamma, .. } => {
                let second = if sigma >= delta * gamma * gamma {
                    (delta * sigma).sqrt().min(1.0)
                } else {
                    (sigma / gamma).min(1.0)
                };
                sigma.min(1.0) * second / d2
            }
        };
        Ok((region, value))
    }

    pub fn eval(&self, delta: f64, v: Point) -> Result<B1B2Value> {
        let (region, raw) = Self::raw(delta, v)?;
        Ok(match region {
            B1B2Region::A if delta <= 1.0 => B1B2Value::Scale(self.k_a_small * raw),
            B1B2Region::A => B1B2Value::Scale(self.k_a_large * raw),
            B1B2Region::C { sigma, .. } if sigma > 0.5 * delta => {
                let dist = SmoothedDist::new(PNorm::ONE, PNorm::TWO, delta)?;
                B1B2Value::Numeric(density_numeric(&dist, v)?)
            }
            _ => B1B2Value::Scale(self.k_outer * raw),
        })
    }
}

impl Default for B1B2Density {
    fn default() -> Self {
        Self::new()
    }
}

/// Calibrated density of `B_1 + δB_2` at `v`.
pub fn density_b1b2(delta: f64, v: Point) -> Result<f64> {
    static FAMILY: OnceLock<B1B2Density> = OnceLock::new();
    Ok(FAMILY.get_or_init(B1B2Density::new).eval(delta, v)?.value())
}

// ---------------------------------------------------------------- B∞ + δBq

/// Parts of the first-quadrant support of `B_∞ + δB_q`, with the horizontal
/// and vertical distances `alpha`, `beta` to the outer boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum BinfqRegion {
    /// Inside the square.
    A,
    /// Beyond the corner `(1, 1)`.
    B { alpha: f64, beta: f64 },
    /// Right of the square (`x >= 1, y <= 1`).
    C { alpha: f64, beta: f64 },
    /// Above the square (`x <= 1, y >= 1`).
    D { alpha: f64, beta: f64 },
}

/// `(δ^q - t^q)^{1/q}` for `0 <= t <= δ`.
fn cap(q: f64, delta: f64, t: f64) -> f64 {
    let r = t / delta;
    delta * (1.0 - r.powf(q)).max(0.0).powf(1.0 / q)
}

fn finite_q(q: PNorm) -> Result<f64> {
    match q {
        PNorm::Finite(v) => Ok(v),
        PNorm::Infinity => Err(Error::UnsupportedPair {
            p: "inf".into(),
            q: "inf".into(),
        }),
    }
}

/// Classifies a first-quadrant support point of `B_∞ + δB_q`.
pub fn binfq_regions(q: PNorm, delta: f64, v: Point) -> Result<BinfqRegion> {
    check_delta(delta)?;
    let qv = finite_q(q)?;
    if v.x < 0.0 || v.y < 0.0 {
        return Err(outside(v, "B∞+δBq regions cover the first quadrant"));
    }
    let oob = || outside(v, "outside the support of B∞+δBq");
    let (ex, ey) = (v.x - 1.0, v.y - 1.0);
    match (ex >= 0.0, ey >= 0.0) {
        (false, false) => Ok(BinfqRegion::A),
        (true, true) => {
            if ex > delta || ey > delta {
                return Err(oob());
            }
            let alpha = cap(qv, delta, ey) - ex;
            let beta = cap(qv, delta, ex) - ey;
            if alpha < 0.0 || beta < 0.0 {
                return Err(oob());
            }
            Ok(BinfqRegion::B { alpha, beta })
        }
        (true, false) => {
            let alpha = 1.0 + delta - v.x;
            if alpha < 0.0 {
                return Err(oob());
            }
            Ok(BinfqRegion::C {
                alpha,
                beta: cap(qv, delta, delta - alpha),
            })
        }
        (false, true) => {
            let alpha = 1.0 + delta - v.y;
            if alpha < 0.0 {
                return Err(oob());
            }
            Ok(BinfqRegion::D {
                alpha,
                beta: cap(qv, delta, delta - alpha),
            })
        }
    }
}

/// Density scales of `B_∞ + δB_q` for one finite `q`.
#[derive(Debug, Clone, Copy)]
pub struct BinfqDensity {
    pub q: PNorm,
    pub k_a_small: f64,
    pub k_a_large: f64,
    /// Shared constant of `B`, `C`, `D`.
    pub k_outer: f64,
}

impl BinfqDensity {
    /// Interior constants from `v = (0.2, 0.1)` at `δ = 0.5` and `δ = 4`;
    /// the outer constant at `δ = 0.5` on the diagonal with `α = β = δ/10`.
    pub fn new(q: PNorm) -> Result<Self> {
        let qv = finite_q(q)?;
        let f = |delta: f64, v: Point| -> Result<f64> {
            density_numeric(&SmoothedDist::new(PNorm::INF, q, delta)?, v)
        };
        let deep = Point::new(0.2, 0.1);
        let delta = 0.5;
        // Diagonal point e = 1 + t with cap(t) - t = δ/10.
        let target = delta / 10.0;
        let (mut lo, mut hi) = (0.0, delta);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if cap(qv, delta, mid) - mid > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let corner = Point::new(1.0 + lo, 1.0 + lo);
        let raw = Self::raw(q, delta, corner)?.1;
        Ok(BinfqDensity {
            q,
            k_a_small: f(0.5, deep)?,
            k_a_large: f(4.0, deep)? * 16.0,
            k_outer: f(delta, corner)? / raw,
        })
    }

    pub fn raw(q: PNorm, delta: f64, v: Point) -> Result<(BinfqRegion, f64)> {
        let region = binfq_regions(q, delta, v)?;
        let d2 = delta * delta;
        let value = match region {
            BinfqRegion::A => {
                if delta <= 1.0 {
                    1.0
                } else {
                    1.0 / d2
                }
            }
            BinfqRegion::B { alpha, beta } | BinfqRegion::C { alpha, beta } | BinfqRegion::D { alpha, beta } => {
                alpha.min(1.0) * beta.min(1.0) / d2
            }
        };
        Ok((region, value))
    }

    pub fn eval(&self, delta: f64, v: Point) -> Result<f64> {
        let (region, raw) = Self::raw(self.q, delta, v)?;
        Ok(raw
            * match region {
                BinfqRegion::A if delta <= 1.0 => self.k_a_small,
                BinfqRegion::A => self.k_a_large,
                _ => self.k_outer,
            })
    }
}

/// Calibrated density of `B_∞ + δB_q` at a first-quadrant support point.
pub fn density_binfq(q: PNorm, delta: f64, v: Point) -> Result<f64> {
    static CACHE: Mutex<Vec<BinfqDensity>> = Mutex::new(Vec::new());
    let family = {
        let cached = CACHE
            .lock()
            .map_err(|_| Error::param("cache", "poisoned"))?
            .iter()
            .find(|f| f.q == q)
            .copied();
        match cached {
            Some(f) => f,
            None => {
                let f = BinfqDensity::new(q)?;
                CACHE.lock().map_err(|_| Error::param("cache", "poisoned"))?.push(f);
                f
            }
        }
    };
    family.eval(delta, v)
}
