//! Growth laws of `E[M_n]` by norm pair and perturbation size.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::PNorm;

/// A growth law `g(n, δ)` up to constant factors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GrowthLaw {
    /// `ln n`.
    Log,
    /// `n^a δ^b`.
    Power { a: f64, b: f64 },
    /// `ln n + n^a δ^b`.
    LogPlusPower { a: f64, b: f64 },
}

impl GrowthLaw {
    pub fn eval(&self, n: f64, delta: f64) -> f64 {
        match *self {
            GrowthLaw::Log => n.ln(),
            GrowthLaw::Power { a, b } => n.powf(a) * delta.powf(b),
            GrowthLaw::LogPlusPower { a, b } => n.ln() + n.powf(a) * delta.powf(b),
        }
    }

    /// `d log g / d log n` as `n → ∞` with `δ` fixed. `ln n` counts as 0.
    pub fn exponent(&self) -> f64 {
        match *self {
            GrowthLaw::Log => 0.0,
            GrowthLaw::Power { a, .. } | GrowthLaw::LogPlusPower { a, .. } => a,
        }
    }

    /// Asymptotic exponent in `n` along the path `δ = n^e`.
    pub fn exponent_along(&self, e: f64) -> f64 {
        match *self {
            GrowthLaw::Log => 0.0,
            GrowthLaw::Power { a, b } => a + b * e,
            GrowthLaw::LogPlusPower { a, b } => (a + b * e).max(0.0),
        }
    }

    /// True when the law is logarithmic along `δ = n^e`.
    pub fn is_log_along(&self, e: f64) -> bool {
        match *self {
            GrowthLaw::Log => true,
            GrowthLaw::Power { .. } => false,
            GrowthLaw::LogPlusPower { a, b } => a + b * e <= 0.0,
        }
    }

    /// The same law after `δ → 1/δ`.
    fn inverted(self) -> GrowthLaw {
        match self {
            GrowthLaw::Log => GrowthLaw::Log,
            GrowthLaw::Power { a, b } => GrowthLaw::Power { a, b: -b },
            GrowthLaw::LogPlusPower { a, b } => GrowthLaw::LogPlusPower { a, b: -b },
        }
    }
}

fn frac(x: f64) -> String {
    const KNOWN: [(f64, &str); 10] = [
        (0.5, "1/2"),
        (1.0 / 3.0, "1/3"),
        (2.0 / 7.0, "2/7"),
        (3.0 / 7.0, "3/7"),
        (0.25, "1/4"),
        (1.0, "1"),
        (-0.5, "-1/2"),
        (-1.0 / 3.0, "-1/3"),
        (-3.0 / 7.0, "-3/7"),
        (-0.25, "-1/4"),
    ];
    KNOWN
        .iter()
        .find(|(v, _)| (v - x).abs() < 1e-12)
        .map(|(_, s)| s.to_string())
        .unwrap_or_else(|| format!("{x}"))
}

impl fmt::Display for GrowthLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let power = |a: f64, b: f64| {
            let mut s = format!("n^{}", frac(a));
            if b != 0.0 {
                s.push_str(&format!(" δ^{}", frac(b)));
            }
            s
        };
        match *self {
            GrowthLaw::Log => f.write_str("ln n"),
            GrowthLaw::Power { a, b } => f.write_str(&power(a, b)),
            GrowthLaw::LogPlusPower { a, b } => write!(f, "ln n + {}", power(a, b)),
        }
    }
}

/// Range of `δ` written as `n^lo <= δ <= n^hi`; infinite ends are open.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaRegime {
    pub lo_exp: f64,
    pub hi_exp: f64,
}

impl DeltaRegime {
    pub fn contains(&self, delta: f64, n: f64) -> bool {
        let e = if delta == 0.0 {
            f64::NEG_INFINITY
        } else {
            delta.ln() / n.ln()
        };
        e >= self.lo_exp - 1e-12 && e <= self.hi_exp + 1e-12
    }
}

impl fmt::Display for DeltaRegime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let end = |e: f64| {
            if e.is_infinite() {
                if e < 0.0 { "0".to_string() } else { "∞".to_string() }
            } else if e == 0.0 {
                "1".to_string()
            } else {
                format!("n^{}", frac(e))
            }
        };
        write!(f, "[{}, {}]", end(self.lo_exp), end(self.hi_exp))
    }
}

/// The table entry governing one `(p, q, δ, n)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimePrediction {
    pub p: PNorm,
    pub q: PNorm,
    pub delta_regime: DeltaRegime,
    pub growth: GrowthLaw,
    /// Exponent of `n` at fixed `δ`.
    pub expected_exponent: f64,
}

const NEG: f64 = f64::NEG_INFINITY;
const POS: f64 = f64::INFINITY;

/// Table rows in canonical orientation: `(lo, hi, law)` triples.
fn rows(p: PNorm, q: PNorm) -> Option<Vec<(f64, f64, GrowthLaw)>> {
    use GrowthLaw::*;
    let sqrt_n = Power { a: 0.5, b: 0.0 };
    match (p, q) {
        (PNorm::Infinity, PNorm::Infinity) => Some(vec![(NEG, POS, Log)]),
        (PNorm::Infinity, PNorm::Finite(_)) => Some(vec![
            (NEG, -0.5, Log),
            (-0.5, 0.5, LogPlusPower { a: 0.25, b: 0.5 }),
            (0.5, POS, sqrt_n),
        ]),
        (a, b) if a.is(1.0) && b.is(1.0) => Some(vec![
            (NEG, -0.5, sqrt_n),
            (-0.5, 0.0, Power { a: 1.0 / 3.0, b: -1.0 / 3.0 }),
            (0.0, 0.5, Power { a: 1.0 / 3.0, b: 1.0 / 3.0 }),
            (0.5, POS, sqrt_n),
        ]),
        (a, b) if a.is(2.0) && b.is(2.0) => Some(vec![
            (NEG, -0.5, sqrt_n),
            (-0.5, 0.0, Power { a: 2.0 / 7.0, b: -3.0 / 7.0 }),
            (0.0, 0.5, Power { a: 2.0 / 7.0, b: 3.0 / 7.0 }),
            (0.5, POS, sqrt_n),
        ]),
        (a, b) if a.is(1.0) && b.is(2.0) => Some(vec![
            (NEG, -0.5, sqrt_n),
            (-0.5, 1.0 / 26.0, Power { a: 2.0 / 7.0, b: -3.0 / 7.0 }),
            (1.0 / 26.0, 0.5, Power { a: 0.25, b: 0.5 }),
            (0.5, POS, sqrt_n),
        ]),
        _ => None,
    }
}

/// Every regime of a supported pair, in increasing `δ`.
///
/// `(q, ∞)` and `(2, 1)` are read off the swapped rows with `δ → 1/δ`, which
/// leaves the maxima count distribution unchanged.
pub fn regimes(p: PNorm, q: PNorm) -> Result<Vec<RegimePrediction>> {
    let make = |lo: f64, hi: f64, growth: GrowthLaw| RegimePrediction {
        p,
        q,
        delta_regime: DeltaRegime { lo_exp: lo, hi_exp: hi },
        growth,
        expected_exponent: growth.exponent(),
    };
    if let Some(rs) = rows(p, q) {
        return Ok(rs.into_iter().map(|(lo, hi, g)| make(lo, hi, g)).collect());
    }
    if let Some(rs) = rows(q, p) {
        let mut out: Vec<_> = rs
            .into_iter()
            .map(|(lo, hi, g)| make(-hi, -lo, g.inverted()))
            .collect();
        out.reverse();
        return Ok(out);
    }
    Err(Error::UnsupportedPair {
        p: p.to_string(),
        q: q.to_string(),
    })
}

/// The regime containing `δ` at sample size `n`.
///
/// At a shared boundary the lower regime is returned.
pub fn regime(p: PNorm, q: PNorm, delta: f64, n: u64) -> Result<RegimePrediction> {
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(Error::param("delta", format!("{delta} must be finite and >= 0")));
    }
    if n < 2 {
        return Err(Error::param("n", "need n >= 2"));
    }
    let all = regimes(p, q)?;
    let nf = n as f64;
    all.iter()
        .find(|r| r.delta_regime.contains(delta, nf))
        .copied()
        .ok_or_else(|| Error::RegimeMismatch(format!("no regime for δ={delta}, n={n}")))
}

/// `(g(n, δ), exponent)` for the governing regime.
pub fn predicted_growth(p: PNorm, q: PNorm, delta: f64, n: u64) -> Result<(f64, f64)> {
    let r = regime(p, q, delta, n)?;
    Ok((r.growth.eval(n as f64, delta), r.expected_exponent))
}

/// `H_n = Σ_{k<=n} 1/k`, the exact `E[M_n]` for independent coordinates.
pub fn harmonic_number(n: u64) -> Result<f64> {
    if n < 1 {
        return Err(Error::param("n", "harmonic numbers start at n = 1"));
    }
    // Summing from the small terms up keeps the rounding error at O(ε log n).
    Ok((1..=n).rev().map(|k| 1.0 / k as f64).sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    const ONE: PNorm = PNorm::ONE;
    const TWO: PNorm = PNorm::TWO;
    const INF: PNorm = PNorm::INF;

    #[test]
    fn column_f_exponents() {
        let n = 1 << 16;
        assert!((predicted_growth(ONE, ONE, 1.0, n).unwrap().1 - 1.0 / 3.0).abs() < 1e-15);
        assert!((predicted_growth(TWO, TWO, 1.0, n).unwrap().1 - 2.0 / 7.0).abs() < 1e-15);
        assert_eq!(predicted_growth(INF, TWO, 1.0, n).unwrap().1, 0.25);
        assert!((predicted_growth(ONE, TWO, 1.0, n).unwrap().1 - 2.0 / 7.0).abs() < 1e-15);
        for d in [0.0, 0.01, 1.0, 1e6] {
            let (g, e) = predicted_growth(INF, INF, d, n).unwrap();
            assert_eq!(e, 0.0);
            assert!((g - (n as f64).ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn b1b2_branches_meet_at_n_to_1_26() {
        let n: u64 = 1 << 26;
        let nf = n as f64;
        let delta = nf.powf(1.0 / 26.0);
        let rs = regimes(ONE, TWO).unwrap();
        let left = rs[1].growth.eval(nf, delta);
        let right = rs[2].growth.eval(nf, delta);
        let target = nf.powf(7.0 / 26.0);
        assert!((left / target - 1.0).abs() < 1e-9);
        assert!((right / target - 1.0).abs() < 1e-9);
    }

    #[test]
    fn swapped_pairs() {
        let n = 1 << 14;
        for (p, q) in [(TWO, ONE), (TWO, INF), (ONE, INF), (PNorm::Finite(3.0), INF)] {
            for d in [0.001, 0.1, 1.0, 7.0, 500.0] {
                let a = regime(p, q, d, n).unwrap();
                let b = regime(q, p, 1.0 / d, n).unwrap();
                assert_eq!(a.expected_exponent, b.expected_exponent, "{p} {q} {d}");
            }
        }
        assert!(regime(ONE, PNorm::Finite(3.0), 1.0, n).is_err());
    }

    #[test]
    fn unperturbed_limit() {
        let n: u64 = 1 << 12;
        let small = (n as f64).powf(-0.6);
        for (p, q) in [(ONE, ONE), (TWO, TWO), (ONE, TWO)] {
            assert_eq!(regime(p, q, small, n).unwrap().expected_exponent, 0.5);
        }
        assert_eq!(regime(INF, TWO, small, n).unwrap().growth, GrowthLaw::Log);
        assert_eq!(regime(INF, ONE, 0.0, n).unwrap().growth, GrowthLaw::Log);
        assert_eq!(regime(TWO, ONE, 0.0, n).unwrap().expected_exponent, 0.5);
    }

    #[test]
    fn harmonic_examples() {
        assert_eq!(harmonic_number(1).unwrap(), 1.0);
        assert!((harmonic_number(4).unwrap() - 25.0 / 12.0).abs() < 1e-15);
        assert!((harmonic_number(1024).unwrap() - 7.5092).abs() < 1e-4);
        assert!(harmonic_number(0).is_err());
    }

    #[test]
    fn display() {
        assert_eq!(GrowthLaw::Power { a: 2.0 / 7.0, b: -3.0 / 7.0 }.to_string(), "n^2/7 δ^-3/7");
        assert_eq!(GrowthLaw::LogPlusPower { a: 0.25, b: 0.5 }.to_string(), "ln n + n^1/4 δ^1/2");
        let r = regime(ONE, ONE, 0.5, 1 << 10).unwrap();
        assert_eq!(r.delta_regime.to_string(), "[n^-1/2, 1]");
    }
}
