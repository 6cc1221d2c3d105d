//! Planar L_p-ball geometry.
//!
//! Exact norms, ball areas and Minkowski-support membership, plus convex
//! polygon machinery used wherever an area of a ball intersection is needed:
//! inscribed ball polygons, Sutherland–Hodgman clipping, an O(n + m)
//! intersection-area sweep over x-monotone boundary chains, and Minkowski
//! sums of convex polygons.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{CircleDomain, Error, Result};
use crate::sampling::SmoothedDist;

/// Absolute tolerance for comparing areas.
pub const EPS_AREA: f64 = 1e-9;
/// Absolute tolerance for comparing coordinates and boundary distances.
pub const EPS_POINT: f64 = 1e-12;
/// Polygon resolution used for densities and measures.
pub const DENSITY_RESOLUTION: usize = 4096;
/// Polygon resolution used for cheap membership pre-checks.
pub const MEMBERSHIP_RESOLUTION: usize = 256;
/// Smallest polygon resolution accepted by [`ball_polygon`].
pub const MIN_RESOLUTION: usize = 16;

/// Norm index `p`: a finite real `>= 1` or infinity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PNorm {
    Finite(f64),
    Infinity,
}

impl PNorm {
    pub const ONE: PNorm = PNorm::Finite(1.0);
    pub const TWO: PNorm = PNorm::Finite(2.0);
    pub const INF: PNorm = PNorm::Infinity;

    pub fn finite(p: f64) -> Result<Self> {
        if p.is_finite() && p >= 1.0 {
            Ok(PNorm::Finite(p))
        } else if p == f64::INFINITY {
            Ok(PNorm::Infinity)
        } else {
            Err(Error::InvalidNorm(p))
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, PNorm::Infinity)
    }

    /// `p` as an `f64`; infinity maps to `f64::INFINITY`.
    pub fn value(self) -> f64 {
        match self {
            PNorm::Finite(p) => p,
            PNorm::Infinity => f64::INFINITY,
        }
    }

    /// True when `self` is exactly the finite index `p`.
    pub fn is(self, p: f64) -> bool {
        matches!(self, PNorm::Finite(v) if v == p)
    }
}

impl fmt::Display for PNorm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PNorm::Finite(p) => write!(f, "{p}"),
            PNorm::Infinity => f.write_str("inf"),
        }
    }
}

impl FromStr for PNorm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "∞" => Ok(PNorm::Infinity),
            other => {
                let p: f64 = other
                    .parse()
                    .map_err(|_| Error::Parse(format!("not a norm index: {s:?}")))?;
                PNorm::finite(p)
            }
        }
    }
}

impl Serialize for PNorm {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            PNorm::Finite(p) => s.serialize_f64(*p),
            PNorm::Infinity => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for PNorm {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        let parsed = match Raw::deserialize(d)? {
            Raw::Num(p) => PNorm::finite(p),
            Raw::Str(s) => s.parse(),
        };
        parsed.map_err(serde::de::Error::custom)
    }
}

/// A point (or vector) of the plane.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    #[inline]
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn try_new(x: f64, y: f64) -> Result<Self> {
        if x.is_finite() && y.is_finite() {
            Ok(Point { x, y })
        } else {
            Err(Error::param("point", format!("non-finite coordinate ({x}, {y})")))
        }
    }

    #[inline]
    pub fn cross(self, other: Point) -> f64 {
        self.x * other.y - self.y * other.x
    }

    #[inline]
    pub fn dot(self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// Coordinate-wise absolute value (reflection into the first quadrant).
    #[inline]
    pub fn abs(self) -> Point {
        Point::new(self.x.abs(), self.y.abs())
    }

    /// True when `self` dominates `other` in the sense of weak coordinate order.
    #[inline]
    pub fn dominates_weakly(self, other: Point) -> bool {
        self.x >= other.x && self.y >= other.y
    }

    /// Coordinate-wise maximum.
    #[inline]
    pub fn max(self, other: Point) -> Point {
        Point::new(self.x.max(other.x), self.y.max(other.y))
    }
}

impl Add for Point {
    type Output = Point;
    #[inline]
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point {
    type Output = Point;
    #[inline]
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    #[inline]
    fn mul(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s)
    }
}

impl Neg for Point {
    type Output = Point;
    #[inline]
    fn neg(self) -> Point {
        Point::new(-self.x, -self.y)
    }
}

/// `(|x|^p + |y|^p)^(1/p)`, or `max(|x|, |y|)` for `p = ∞`.
///
/// Coordinates are scaled by their maximum before exponentiation so that
/// large `p` cannot overflow.
pub fn lp_norm(p: PNorm, v: Point) -> f64 {
    let (ax, ay) = (v.x.abs(), v.y.abs());
    match p {
        PNorm::Infinity => ax.max(ay),
        PNorm::Finite(p) if p == 1.0 => ax + ay,
        PNorm::Finite(p) if p == 2.0 => ax.hypot(ay),
        PNorm::Finite(p) => {
            let m = ax.max(ay);
            if m == 0.0 {
                return 0.0;
            }
            let (a, b) = (ax / m, ay / m);
            m * (a.powf(p) + b.powf(p)).powf(1.0 / p)
        }
    }
}

/// Area `a_p` of the unit ball `B_p`: `4 Γ(1+1/p)² / Γ(1+2/p)`, and 4 for `p = ∞`.
pub fn unit_ball_area(p: PNorm) -> f64 {
    use statrs::function::gamma::ln_gamma;
    match p {
        PNorm::Infinity => 4.0,
        PNorm::Finite(p) if p == 1.0 => 2.0,
        PNorm::Finite(p) if p == 2.0 => PI,
        PNorm::Finite(p) => 4.0 * (2.0 * ln_gamma(1.0 + 1.0 / p) - ln_gamma(1.0 + 2.0 / p)).exp(),
    }
}

/// Point of the unit-ball boundary at angular parameter `t`.
///
/// Finite `p` uses the signed-power map `(cos t |cos t|^(2/p-1), sin t |sin t|^(2/p-1))`;
/// for `p = ∞` the direction `(cos t, sin t)` is projected radially onto the square.
pub fn ball_boundary_point(p: PNorm, t: f64) -> Point {
    let (s, c) = t.sin_cos();
    match p {
        PNorm::Infinity => {
            let m = c.abs().max(s.abs());
            Point::new(c / m, s / m)
        }
        PNorm::Finite(p) => {
            let e = 2.0 / p;
            Point::new(c.signum() * c.abs().powf(e), s.signum() * s.abs().powf(e))
        }
    }
}

/// Convex polygon with counter-clockwise vertices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexPolygon {
    vertices: Vec<Point>,
}

impl ConvexPolygon {
    /// Validates vertex count, distinctness, orientation and convexity.
    pub fn new(vertices: Vec<Point>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::param("polygon", "fewer than 3 vertices"));
        }
        let n = vertices.len();
        let scale = vertices
            .iter()
            .fold(1.0_f64, |acc, v| acc.max(v.x.abs()).max(v.y.abs()));
        for i in 0..n {
            let (a, b, c) = (vertices[i], vertices[(i + 1) % n], vertices[(i + 2) % n]);
            if !a.x.is_finite() || !a.y.is_finite() {
                return Err(Error::param("polygon", "non-finite vertex"));
            }
            if (b - a).abs().x.max((b - a).abs().y) <= EPS_POINT * scale {
                return Err(Error::param("polygon", format!("repeated vertex at index {i}")));
            }
            if (b - a).cross(c - b) < -1e-12 * scale * scale {
                return Err(Error::param("polygon", format!("reflex turn at vertex {}", (i + 1) % n)));
            }
        }
        let poly = ConvexPolygon { vertices };
        if poly.signed_area() <= 0.0 {
            return Err(Error::param("polygon", "vertices are not counter-clockwise"));
        }
        Ok(poly)
    }

    pub(crate) fn from_raw(vertices: Vec<Point>) -> Self {
        ConvexPolygon { vertices }
    }

    /// Axis-aligned rectangle `[lo.x, hi.x] × [lo.y, hi.y]`.
    pub fn rectangle(lo: Point, hi: Point) -> Result<Self> {
        ConvexPolygon::new(vec![lo, Point::new(hi.x, lo.y), hi, Point::new(lo.x, hi.y)])
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Shoelace area; positive for counter-clockwise order.
    pub fn signed_area(&self) -> f64 {
        shoelace(&self.vertices)
    }

    pub fn area(&self) -> f64 {
        self.signed_area().abs()
    }

    /// Inclusive point-in-polygon test with absolute tolerance `tol`.
    pub fn contains(&self, v: Point, tol: f64) -> bool {
        let n = self.vertices.len();
        (0..n).all(|i| {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            let e = b - a;
            e.cross(v - a) >= -tol * e.dot(e).sqrt()
        })
    }

    pub fn translate(&self, by: Point) -> ConvexPolygon {
        ConvexPolygon::from_raw(self.vertices.iter().map(|&v| v + by).collect())
    }

    pub fn scale(&self, s: f64) -> ConvexPolygon {
        ConvexPolygon::from_raw(self.vertices.iter().map(|&v| v * s).collect())
    }

    /// Axis-aligned bounding box as `(lo, hi)`.
    pub fn bounds(&self) -> (Point, Point) {
        let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for v in &self.vertices {
            lo = Point::new(lo.x.min(v.x), lo.y.min(v.y));
            hi = hi.max(*v);
        }
        (lo, hi)
    }
}

fn shoelace(v: &[Point]) -> f64 {
    let n = v.len();
    if n < 3 {
        return 0.0;
    }
    let mut s = 0.0;
    for i in 0..n {
        s += v[i].cross(v[(i + 1) % n]);
    }
    0.5 * s
}

/// Inscribed `m`-gon of `B_p(center, radius)`.
///
/// Vertices sit on the ball boundary at equally spaced angular parameters.
/// For `p = ∞` the parameters are offset by π/4 so that every `m` divisible by
/// four includes the four corners and recovers the square exactly.
pub fn ball_polygon(p: PNorm, radius: f64, center: Point, m: usize) -> Result<ConvexPolygon> {
    if m < MIN_RESOLUTION {
        return Err(Error::param("m", format!("{m} < {MIN_RESOLUTION} vertices")));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::param("radius", format!("{radius} is not positive")));
    }
    let offset = if p.is_infinite() { FRAC_PI_4 } else { 0.0 };
    let step = 2.0 * PI / m as f64;
    let mut vertices: Vec<Point> = Vec::with_capacity(m);
    for k in 0..m {
        let v = center + ball_boundary_point(p, offset + step * k as f64) * radius;
        if vertices.last().is_none_or(|&last| last != v) {
            vertices.push(v);
        }
    }
    while vertices.len() > 1 && vertices.first() == vertices.last() {
        vertices.pop();
    }
    Ok(ConvexPolygon::from_raw(vertices))
}

/// Convex intersection of `a` and `b` by Sutherland–Hodgman clipping.
///
/// Returns `None` when the intersection has no interior.
pub fn clip_convex(a: &ConvexPolygon, b: &ConvexPolygon) -> Option<ConvexPolygon> {
    let mut output: Vec<Point> = a.vertices.clone();
    let clip = &b.vertices;
    let n = clip.len();
    let mut input = Vec::with_capacity(output.len() + n);
    for i in 0..n {
        if output.is_empty() {
            break;
        }
        let (c0, c1) = (clip[i], clip[(i + 1) % n]);
        let edge = c1 - c0;
        std::mem::swap(&mut input, &mut output);
        output.clear();
        let side = |v: Point| edge.cross(v - c0);
        let mut prev = *input.last().unwrap();
        let mut prev_side = side(prev);
        for &cur in input.iter() {
            let cur_side = side(cur);
            if cur_side >= 0.0 {
                if prev_side < 0.0 {
                    output.push(segment_cut(prev, cur, prev_side, cur_side));
                }
                output.push(cur);
            } else if prev_side >= 0.0 {
                output.push(segment_cut(prev, cur, prev_side, cur_side));
            }
            prev = cur;
            prev_side = cur_side;
        }
    }
    output.dedup_by(|a, b| (a.x - b.x).abs() <= EPS_POINT && (a.y - b.y).abs() <= EPS_POINT);
    while output.len() > 1 {
        let (f, l) = (output[0], output[output.len() - 1]);
        if (f.x - l.x).abs() <= EPS_POINT && (f.y - l.y).abs() <= EPS_POINT {
            output.pop();
        } else {
            break;
        }
    }
    if output.len() < 3 || shoelace(&output) <= 0.0 {
        return None;
    }
    Some(ConvexPolygon::from_raw(output))
}

#[inline]
fn segment_cut(a: Point, b: Point, sa: f64, sb: f64) -> Point {
    let t = sa / (sa - sb);
    a + (b - a) * t
}

/// Minkowski sum of two convex polygons by merging edge sequences in angle order.
pub fn minkowski_sum(a: &ConvexPolygon, b: &ConvexPolygon) -> ConvexPolygon {
    fn bottom_left(v: &[Point]) -> usize {
        (0..v.len())
            .min_by(|&i, &j| v[i].y.total_cmp(&v[j].y).then(v[i].x.total_cmp(&v[j].x)))
            .unwrap()
    }
    let (va, vb) = (&a.vertices, &b.vertices);
    let (na, nb) = (va.len(), vb.len());
    let (sa, sb) = (bottom_left(va), bottom_left(vb));
    let mut out = Vec::with_capacity(na + nb);
    let (mut i, mut j) = (0usize, 0usize);
    while i < na || j < nb {
        let pa = va[(sa + i) % na];
        let pb = vb[(sb + j) % nb];
        out.push(pa + pb);
        let ea = va[(sa + i + 1) % na] - pa;
        let eb = vb[(sb + j + 1) % nb] - pb;
        let turn = ea.cross(eb);
        if j >= nb || (i < na && turn > 0.0) {
            i += 1;
        } else if i >= na || turn < 0.0 {
            j += 1;
        } else {
            i += 1;
            j += 1;
        }
    }
    out.dedup();
    ConvexPolygon::from_raw(out)
}

/// Lower and upper boundary chains of a convex polygon, both sorted by x.
///
/// Supports O(n + m) intersection areas and O(log n) membership.
#[derive(Debug, Clone)]
pub struct Chains {
    lower: Vec<Point>,
    upper: Vec<Point>,
}

impl Chains {
    pub fn from_polygon(poly: &ConvexPolygon) -> Self {
        let v = &poly.vertices;
        let n = v.len();
        let key_min = |i: usize, j: usize| v[i].x.total_cmp(&v[j].x).then(v[i].y.total_cmp(&v[j].y));
        let left_low = (0..n).min_by(|&i, &j| key_min(i, j)).unwrap();
        let left_high = (0..n)
            .min_by(|&i, &j| v[i].x.total_cmp(&v[j].x).then(v[j].y.total_cmp(&v[i].y)))
            .unwrap();
        let right_low = (0..n)
            .max_by(|&i, &j| v[i].x.total_cmp(&v[j].x).then(v[j].y.total_cmp(&v[i].y)))
            .unwrap();
        let right_high = (0..n).max_by(|&i, &j| key_min(i, j)).unwrap();

        let walk = |from: usize, to: usize| {
            let mut out = vec![v[from]];
            let mut k = from;
            while k != to {
                k = (k + 1) % n;
                out.push(v[k]);
            }
            out
        };
        let lower = walk(left_low, right_low);
        let mut upper = walk(right_high, left_high);
        upper.reverse();
        Chains { lower, upper }
    }

    /// Chains of `B_p(center, radius)` at resolution `m`.
    pub fn ball(p: PNorm, radius: f64, center: Point, m: usize) -> Result<Self> {
        Ok(Chains::from_polygon(&ball_polygon(p, radius, center, m)?))
    }

    /// Image under `v -> center + scale * v` with `scale > 0`.
    pub fn transformed(&self, scale: f64, center: Point) -> Chains {
        let map = |c: &[Point]| c.iter().map(|&v| center + v * scale).collect();
        Chains {
            lower: map(&self.lower),
            upper: map(&self.upper),
        }
    }

    pub fn x_range(&self) -> (f64, f64) {
        (
            self.lower[0].x.min(self.upper[0].x),
            self.lower[self.lower.len() - 1].x.max(self.upper[self.upper.len() - 1].x),
        )
    }

    /// Inclusive membership with absolute tolerance `tol`.
    pub fn contains(&self, v: Point, tol: f64) -> bool {
        let (x0, x1) = self.x_range();
        if v.x < x0 - tol || v.x > x1 + tol {
            return false;
        }
        let x = v.x.clamp(x0, x1);
        let lo = chain_eval(&self.lower, x);
        let hi = chain_eval(&self.upper, x);
        v.y >= lo - tol && v.y <= hi + tol
    }

    pub fn area(&self) -> f64 {
        overlap_area(self, self)
    }
}

/// Chain value at `x` (binary search), clamping to the end segments.
fn chain_eval(c: &[Point], x: f64) -> f64 {
    if c.len() == 1 {
        return c[0].y;
    }
    let k = c.partition_point(|p| p.x <= x).clamp(1, c.len() - 1);
    let (a, b) = (c[k - 1], c[k]);
    if b.x == a.x {
        return a.y.max(b.y);
    }
    a.y + (b.y - a.y) * (x - a.x) / (b.x - a.x)
}

struct Cursor<'a> {
    chain: &'a [Point],
    k: usize,
}

impl<'a> Cursor<'a> {
    fn new(chain: &'a [Point], x: f64) -> Self {
        let mut c = Cursor { chain, k: 0 };
        c.advance(x);
        c
    }

    /// Moves to the segment whose right end lies strictly beyond `x`.
    fn advance(&mut self, x: f64) {
        while self.k + 2 < self.chain.len() && self.chain[self.k + 1].x <= x {
            self.k += 1;
        }
    }

    fn end_x(&self) -> f64 {
        self.chain[(self.k + 1).min(self.chain.len() - 1)].x
    }

    fn eval(&self, x: f64) -> f64 {
        let a = self.chain[self.k];
        if self.k + 1 >= self.chain.len() {
            return a.y;
        }
        let b = self.chain[self.k + 1];
        if b.x <= a.x {
            return b.y;
        }
        a.y + (b.y - a.y) * (x - a.x) / (b.x - a.x)
    }
}

/// Exact area of the intersection of two convex polygons given by their chains.
///
/// Integrates `min(upper) - max(lower)` over x; between consecutive vertex
/// abscissae every chain is linear, so each slab is integrated in closed form.
pub fn overlap_area(a: &Chains, b: &Chains) -> f64 {
    let (a0, a1) = a.x_range();
    let (b0, b1) = b.x_range();
    let lo = a0.max(b0);
    let hi = a1.min(b1);
    if hi <= lo {
        return 0.0;
    }
    let mut cur = [
        Cursor::new(&a.lower, lo),
        Cursor::new(&a.upper, lo),
        Cursor::new(&b.lower, lo),
        Cursor::new(&b.upper, lo),
    ];
    let mut x = lo;
    let mut total = 0.0;
    while x < hi {
        let mut next = hi;
        for c in &cur {
            let e = c.end_x();
            if e > x && e < next {
                next = e;
            }
        }
        let vals0 = [cur[0].eval(x), cur[1].eval(x), cur[2].eval(x), cur[3].eval(x)];
        let vals1 = [cur[0].eval(next), cur[1].eval(next), cur[2].eval(next), cur[3].eval(next)];
        total += slab_area(vals0, vals1, next - x);
        x = next;
        for c in cur.iter_mut() {
            c.advance(x);
        }
    }
    total
}

/// Integral over a slab of width `w` of `(min(ua, ub) - max(la, lb))_+`, all
/// four functions linear across the slab (values given at both ends as
/// `[la, ua, lb, ub]`).
fn slab_area(v0: [f64; 4], v1: [f64; 4], w: f64) -> f64 {
    let h = |t: f64| {
        let f = |i: usize| v0[i] + (v1[i] - v0[i]) * t;
        f(1).min(f(3)) - f(0).max(f(2))
    };
    let mut knots = [0.0, 1.0, 1.0, 1.0];
    let mut nk = 1;
    for (i, j) in [(1usize, 3usize), (0, 2)] {
        let d0 = v0[i] - v0[j];
        let d1 = v1[i] - v1[j];
        if d0 * d1 < 0.0 {
            knots[nk] = d0 / (d0 - d1);
            nk += 1;
        }
    }
    knots[nk] = 1.0;
    nk += 1;
    knots[..nk].sort_by(f64::total_cmp);
    let mut area = 0.0;
    for pair in knots[..nk].windows(2) {
        let (t0, t1) = (pair[0], pair[1]);
        if t1 <= t0 {
            continue;
        }
        let (h0, h1) = (h(t0), h(t1));
        let width = (t1 - t0) * w;
        area += if h0 >= 0.0 && h1 >= 0.0 {
            0.5 * (h0 + h1) * width
        } else if h0 <= 0.0 && h1 <= 0.0 {
            0.0
        } else {
            let (pos, neg) = if h0 > 0.0 { (h0, h1) } else { (h1, h0) };
            0.5 * pos * pos / (pos - neg) * width
        };
    }
    area
}

/// Area of `B_p ∩ {x >= corner.x, y >= corner.y}` for the unit ball.
///
/// Closed form for `p ∈ {1, 2, ∞}` from the column primitive
/// `F(x) = ∫_0^x (1 - |t|^p)^(1/p) dt`; other `p` fall back to an inscribed
/// polygon at [`DENSITY_RESOLUTION`].
pub fn quadrant_area(p: PNorm, corner: Point) -> f64 {
    match p {
        PNorm::Infinity => exact_quadrant_area(Column::Square, corner),
        PNorm::Finite(v) if v == 1.0 => exact_quadrant_area(Column::Diamond, corner),
        PNorm::Finite(v) if v == 2.0 => exact_quadrant_area(Column::Disk, corner),
        _ => {
            let ball = ball_polygon(p, 1.0, Point::ORIGIN, DENSITY_RESOLUTION).expect("valid resolution");
            let (a, b) = (corner.x.max(-2.0), corner.y.max(-2.0));
            if a >= 1.0 || b >= 1.0 {
                return 0.0;
            }
            let rect = ConvexPolygon::from_raw(vec![
                Point::new(a, b),
                Point::new(2.0, b),
                Point::new(2.0, 2.0),
                Point::new(a, 2.0),
            ]);
            overlap_area(&Chains::from_polygon(&ball), &Chains::from_polygon(&rect))
        }
    }
}

/// True when [`quadrant_area`] has a closed form for `p`.
pub fn has_exact_quadrant_area(p: PNorm) -> bool {
    p.is_infinite() || p.is(1.0) || p.is(2.0)
}

#[derive(Clone, Copy)]
enum Column {
    Diamond,
    Disk,
    Square,
}

impl Column {
    /// `F(x)` on `[-1, 1]`.
    fn primitive(self, x: f64) -> f64 {
        match self {
            Column::Diamond => x - 0.5 * x * x.abs(),
            Column::Disk => 0.5 * (x * (1.0 - x * x).max(0.0).sqrt() + x.asin()),
            Column::Square => x,
        }
    }

    /// Half-width of the ball at height `h ∈ [0, 1)`.
    fn half_width(self, h: f64) -> f64 {
        match self {
            Column::Diamond => 1.0 - h,
            Column::Disk => (1.0 - h * h).sqrt(),
            Column::Square => 1.0,
        }
    }

    fn integral(self, lo: f64, hi: f64) -> f64 {
        if hi > lo {
            self.primitive(hi) - self.primitive(lo)
        } else {
            0.0
        }
    }
}

fn exact_quadrant_area(col: Column, corner: Point) -> f64 {
    let lo = corner.x.max(-1.0);
    let b = corner.y;
    if lo >= 1.0 || b >= 1.0 {
        return 0.0;
    }
    if b >= 0.0 {
        // Column length (u(x) - b)_+, positive on |x| < c.
        let c = col.half_width(b);
        let l = lo.max(-c);
        if c <= l {
            return 0.0;
        }
        return col.integral(l, c) - b * (c - l);
    }
    // Column length u(x) + min(u(x), -b).
    let h = -b;
    let full = col.integral(lo, 1.0);
    if h >= 1.0 {
        return 2.0 * full;
    }
    let c = col.half_width(h);
    let flat = (1.0f64.min(c) - lo.max(-c)).max(0.0) * h;
    let tails = col.integral(lo, -c) + col.integral(lo.max(c), 1.0);
    full + flat + tails
}

/// Full height of the lens where a circle of radius `big_r` centred at the
/// origin meets a circle of radius `small_r` centred at `(d, 0)`.
pub fn lens_height(big_r: f64, small_r: f64, d: f64) -> Result<f64> {
    if !(big_r > 0.0 && small_r > 0.0) {
        return Err(Error::param("radius", "both radii must be positive"));
    }
    if !(d > 0.0) {
        return Err(Error::param("d", "centre distance must be positive"));
    }
    if d > big_r + small_r {
        return Err(Error::CircleDomain {
            domain: CircleDomain::Disjoint,
            big_r,
            small_r,
            d,
        });
    }
    if d < (big_r - small_r).abs() {
        return Err(Error::CircleDomain {
            domain: CircleDomain::Nested,
            big_r,
            small_r,
            d,
        });
    }
    let prod = (-d + small_r - big_r) * (-d - small_r + big_r) * (-d + small_r + big_r) * (d + small_r + big_r);
    Ok(prod.max(0.0).sqrt() / d)
}

/// L_q distance from `v` to the unit ball `B_p` (zero inside).
pub fn distance_to_unit_ball(p: PNorm, q: PNorm, v: Point) -> f64 {
    let a = v.abs();
    if lp_norm(p, a) <= 1.0 {
        return 0.0;
    }
    let pos = |t: f64| t.max(0.0);
    match (p, q) {
        (PNorm::Infinity, _) => lp_norm(q, Point::new(pos(a.x - 1.0), pos(a.y - 1.0))),
        (_, PNorm::Infinity) => {
            // Smallest r such that the square a + [-r, r]^2 meets B_p.
            bisect_monotone(0.0, a.x.max(a.y), |r| {
                lp_norm(p, Point::new(pos(a.x - r), pos(a.y - r))) <= 1.0
            })
        }
        (PNorm::Finite(pp), PNorm::Finite(qq)) if pp == 1.0 && qq == 2.0 => {
            // Euclidean distance to the segment from (1,0) to (0,1).
            let t = ((a.x - a.y + 1.0) * 0.5).clamp(0.0, 1.0);
            (a - Point::new(t, 1.0 - t)).dot(a - Point::new(t, 1.0 - t)).sqrt()
        }
        _ => boundary_search(p, q, a),
    }
}

/// Largest-to-smallest bisection for a monotone predicate that holds at `hi`.
fn bisect_monotone(mut lo: f64, mut hi: f64, ok: impl Fn(f64) -> bool) -> f64 {
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Minimises the L_q distance from a first-quadrant point to the boundary arc
/// of `B_p` in that quadrant: coarse scan, then golden-section refinement.
fn boundary_search(p: PNorm, q: PNorm, a: Point) -> f64 {
    const SCAN: usize = 64;
    let dist = |t: f64| lp_norm(q, a - ball_boundary_point(p, t));
    let step = FRAC_PI_2 / SCAN as f64;
    let (mut best_k, mut best) = (0usize, f64::INFINITY);
    for k in 0..=SCAN {
        let d = dist(step * k as f64);
        if d < best {
            best = d;
            best_k = k;
        }
    }
    let mut lo = step * best_k.saturating_sub(1) as f64;
    let mut hi = (step * (best_k + 1) as f64).min(FRAC_PI_2);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (dist(x1), dist(x2));
    for _ in 0..90 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = dist(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = dist(x2);
        }
    }
    best.min(f1).min(f2)
}

/// Membership in the support `B_p + δ B_q` of a smoothed distribution.
///
/// Decided by the L_q distance from `v` to `B_p`: closed forms when `p = q`,
/// `p = ∞`, `q = ∞` or `(p, q) = (1, 2)`; the `(2, 1)` case reduces to
/// `(1, 2)` by rescaling; everything else uses a boundary search.
pub fn support_contains(dist: &SmoothedDist, v: Point) -> bool {
    let (p, q, delta) = (dist.p, dist.q, dist.delta);
    if lp_norm(p, v) <= 1.0 + EPS_POINT {
        return true;
    }
    if delta == 0.0 {
        return false;
    }
    if p == q {
        return lp_norm(p, v) <= 1.0 + delta + EPS_POINT;
    }
    if p.is(2.0) && q.is(1.0) {
        // v ∈ B_2 + δB_1  ⇔  v/δ ∈ B_1 + (1/δ)B_2.
        return distance_to_unit_ball(q, p, v * (1.0 / delta)) <= 1.0 / delta + EPS_POINT;
    }
    distance_to_unit_ball(p, q, v) <= delta + EPS_POINT
}

/// Largest `x >= 0` with `(x, y)` in the support, or `None` if the row misses it.
pub fn support_x_extent(dist: &SmoothedDist, y: f64) -> Option<f64> {
    if !support_contains(dist, Point::new(0.0, y)) {
        return None;
    }
    let (mut inside, mut outside) = (0.0, 2.0 + 2.0 * dist.delta);
    for _ in 0..80 {
        let mid = 0.5 * (inside + outside);
        if support_contains(dist, Point::new(mid, y)) {
            inside = mid;
        } else {
            outside = mid;
        }
    }
    Some(inside)
}
