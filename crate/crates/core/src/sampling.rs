//! Sampling from smoothed distributions `B_p + δ B_q`.
//!
//! A draw is `u + δ w` with `u` uniform on `B_p` and `w` uniform on `B_q`,
//! both by rejection from the square `[-1, 1]²`. Every stream is a ChaCha8
//! generator keyed by a SHA-256 digest of `(master seed, cell, replicate)`,
//! so runs reproduce bit for bit regardless of thread scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::{PNorm, Point};

/// The distribution `B_p + δ B_q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothedDist {
    pub p: PNorm,
    pub q: PNorm,
    pub delta: f64,
}

impl SmoothedDist {
    pub fn new(p: PNorm, q: PNorm, delta: f64) -> Result<Self> {
        if !(delta >= 0.0 && delta.is_finite()) {
            return Err(Error::param("delta", format!("{delta} must be finite and >= 0")));
        }
        if let PNorm::Finite(v) = p {
            PNorm::finite(v)?;
        }
        if let PNorm::Finite(v) = q {
            PNorm::finite(v)?;
        }
        Ok(SmoothedDist { p, q, delta })
    }

    /// The same support written the other way round: `B_q + (1/δ) B_p`,
    /// scaled by `δ`. Requires `δ > 0`.
    pub fn dual(&self) -> Result<SmoothedDist> {
        if self.delta == 0.0 {
            return Err(Error::param("delta", "the dual needs delta > 0"));
        }
        SmoothedDist::new(self.q, self.p, 1.0 / self.delta)
    }
}

/// Identifies one random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub cell_index: u64,
    pub replicate_index: u64,
}

const STREAM_TAG: &[u8] = b"smoothmax/stream/v1";
const CELL_TAG: &[u8] = b"smoothmax/cell/v1";

impl SeedSpec {
    pub fn new(master_seed: u64, cell_index: u64, replicate_index: u64) -> Self {
        SeedSpec {
            master_seed,
            cell_index,
            replicate_index,
        }
    }

    fn key(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(STREAM_TAG);
        h.update(self.master_seed.to_le_bytes());
        h.update(self.cell_index.to_le_bytes());
        h.update(self.replicate_index.to_le_bytes());
        h.finalize().into()
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::from_seed(self.key())
    }

    /// First eight bytes of the stream key, hex encoded.
    pub fn digest(&self) -> String {
        self.key()[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Stable index of an experiment cell `(p, q, δ, n)`.
pub fn cell_index(dist: &SmoothedDist, n: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(CELL_TAG);
    h.update(dist.p.to_string().as_bytes());
    h.update(b"|");
    h.update(dist.q.to_string().as_bytes());
    h.update(b"|");
    h.update(dist.delta.to_bits().to_le_bytes());
    h.update(n.to_le_bytes());
    let d: [u8; 32] = h.finalize().into();
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

#[derive(Debug, Clone, Copy)]
enum BallKind {
    One,
    Two,
    Inf,
    General(f64),
}

impl BallKind {
    fn of(p: PNorm) -> Self {
        match p {
            PNorm::Infinity => BallKind::Inf,
            PNorm::Finite(v) if v == 1.0 => BallKind::One,
            PNorm::Finite(v) if v == 2.0 => BallKind::Two,
            PNorm::Finite(v) => BallKind::General(v),
        }
    }

    #[inline]
    fn accepts(self, x: f64, y: f64) -> bool {
        match self {
            BallKind::Inf => true,
            BallKind::One => x.abs() + y.abs() <= 1.0,
            BallKind::Two => x * x + y * y <= 1.0,
            BallKind::General(p) => x.abs().powf(p) + y.abs().powf(p) <= 1.0,
        }
    }
}

#[inline]
fn draw_ball<R: Rng + ?Sized>(kind: BallKind, rng: &mut R) -> Point {
    if let BallKind::One = kind {
        // The linear map (a, b) -> ((a+b)/2, (a-b)/2) takes the square onto the diamond.
        let a = 2.0 * rng.random::<f64>() - 1.0;
        let b = 2.0 * rng.random::<f64>() - 1.0;
        return Point::new(0.5 * (a + b), 0.5 * (a - b));
    }
    loop {
        let x = 2.0 * rng.random::<f64>() - 1.0;
        let y = 2.0 * rng.random::<f64>() - 1.0;
        if kind.accepts(x, y) {
            return Point::new(x, y);
        }
    }
}

/// Uniform point of the unit ball `B_p`.
pub fn sample_ball<R: Rng + ?Sized>(p: PNorm, rng: &mut R) -> Point {
    draw_ball(BallKind::of(p), rng)
}

/// Reusable sampler with the ball tests resolved once.
#[derive(Debug, Clone, Copy)]
pub struct Sampler {
    outer: BallKind,
    inner: BallKind,
    delta: f64,
}

impl Sampler {
    pub fn new(dist: &SmoothedDist) -> Self {
        Sampler {
            outer: BallKind::of(dist.p),
            inner: BallKind::of(dist.q),
            delta: dist.delta,
        }
    }

    #[inline]
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        let u = draw_ball(self.outer, rng);
        if self.delta == 0.0 {
            return u;
        }
        u + draw_ball(self.inner, rng) * self.delta
    }

    /// Draws the two components `(u, w)` separately.
    #[inline]
    pub fn draw_parts<R: Rng + ?Sized>(&self, rng: &mut R) -> (Point, Point) {
        (draw_ball(self.outer, rng), draw_ball(self.inner, rng))
    }
}

/// One draw from `B_p + δ B_q`.
pub fn sample_smoothed<R: Rng + ?Sized>(dist: &SmoothedDist, rng: &mut R) -> Point {
    Sampler::new(dist).draw(rng)
}

/// `n` independent draws.
pub fn sample_set<R: Rng + ?Sized>(dist: &SmoothedDist, n: usize, rng: &mut R) -> Result<Vec<Point>> {
    if n == 0 {
        return Err(Error::param("n", "sample size must be at least 1"));
    }
    let s = Sampler::new(dist);
    Ok((0..n).map(|_| s.draw(rng)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{lp_norm, support_contains};

    #[test]
    fn same_seed_same_points() {
        let d = SmoothedDist::new(PNorm::ONE, PNorm::TWO, 0.3).unwrap();
        let spec = SeedSpec::new(7, 3, 1);
        let a = sample_set(&d, 500, &mut spec.rng()).unwrap();
        let b = sample_set(&d, 500, &mut spec.rng()).unwrap();
        assert_eq!(a, b);
        let c = sample_set(&d, 500, &mut SeedSpec::new(7, 3, 2).rng()).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn digest_is_stable_hex() {
        let s = SeedSpec::new(1, 2, 3);
        assert_eq!(s.digest().len(), 16);
        assert_eq!(s.digest(), SeedSpec::new(1, 2, 3).digest());
        assert_ne!(s.digest(), SeedSpec::new(1, 2, 4).digest());
    }

    #[test]
    fn zero_delta_stays_in_outer_ball() {
        let d = SmoothedDist::new(PNorm::TWO, PNorm::ONE, 0.0).unwrap();
        let pts = sample_set(&d, 10_000, &mut SeedSpec::new(0, 0, 0).rng()).unwrap();
        assert!(pts.iter().all(|&v| lp_norm(PNorm::TWO, v) <= 1.0));
    }

    #[test]
    fn draws_lie_in_support() {
        for (p, q) in [(PNorm::ONE, PNorm::TWO), (PNorm::INF, PNorm::Finite(3.0)), (PNorm::TWO, PNorm::ONE)] {
            let d = SmoothedDist::new(p, q, 0.4).unwrap();
            let pts = sample_set(&d, 5_000, &mut SeedSpec::new(9, 0, 0).rng()).unwrap();
            assert!(pts.iter().all(|&v| support_contains(&d, v)), "{p} {q}");
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(SmoothedDist::new(PNorm::ONE, PNorm::ONE, -0.1).is_err());
        assert!(SmoothedDist::new(PNorm::ONE, PNorm::ONE, f64::NAN).is_err());
        assert!(SmoothedDist::new(PNorm::Finite(0.5), PNorm::ONE, 0.1).is_err());
        let d = SmoothedDist::new(PNorm::ONE, PNorm::ONE, 0.1).unwrap();
        assert!(sample_set(&d, 0, &mut SeedSpec::new(0, 0, 0).rng()).is_err());
    }

    #[test]
    fn cell_index_separates_cells() {
        let a = SmoothedDist::new(PNorm::ONE, PNorm::ONE, 0.1).unwrap();
        let b = SmoothedDist::new(PNorm::ONE, PNorm::INF, 0.1).unwrap();
        assert_ne!(cell_index(&a, 100), cell_index(&a, 200));
        assert_ne!(cell_index(&a, 100), cell_index(&b, 100));
        assert_eq!(cell_index(&a, 100), cell_index(&a, 100));
    }
}
