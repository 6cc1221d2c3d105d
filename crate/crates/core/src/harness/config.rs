use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::PNorm;

/// Minimum replicates per cell for any cell entering a fit.
pub const MIN_FIT_REPLICATES: u64 = 30;
/// Minimum number of sample sizes in a fit.
pub const MIN_FIT_POINTS: usize = 4;

/// How `δ` is chosen for a sample size `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaSpec {
    /// The same `δ` for every `n`.
    Fixed(f64),
    /// `δ = n^a`.
    Power(f64),
}

impl DeltaSpec {
    pub fn at(&self, n: u64) -> f64 {
        match *self {
            DeltaSpec::Fixed(d) => d,
            DeltaSpec::Power(a) => (n as f64).powf(a),
        }
    }

    /// The `e` in `δ = n^e` as `n` grows; a fixed `δ > 0` has `e = 0`.
    pub fn path_exponent(&self) -> f64 {
        match *self {
            DeltaSpec::Fixed(d) if d == 0.0 => f64::NEG_INFINITY,
            DeltaSpec::Fixed(_) => 0.0,
            DeltaSpec::Power(a) => a,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            DeltaSpec::Fixed(d) => d >= 0.0 && d.is_finite(),
            DeltaSpec::Power(a) => a.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::param("delta_spec", format!("invalid rule {self}")))
        }
    }
}

impl fmt::Display for DeltaSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DeltaSpec::Fixed(d) => write!(f, "{d}"),
            DeltaSpec::Power(a) => write!(f, "n^{a}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub pairs: Vec<(PNorm, PNorm)>,
    pub delta_spec: Vec<DeltaSpec>,
    pub n_grid: Vec<u64>,
    pub replicates: u64,
    pub master_seed: u64,
    /// Directory receiving the report files.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Record per-replicate wall time. Off by default: timings are the one
    /// output that differs between reruns.
    #[serde(default)]
    pub record_wall_time: bool,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.pairs.is_empty() {
            return Err(Error::param("pairs", "at least one norm pair is required"));
        }
        if self.delta_spec.is_empty() {
            return Err(Error::param("delta_spec", "at least one δ rule is required"));
        }
        for d in &self.delta_spec {
            d.validate()?;
        }
        if self.n_grid.len() < MIN_FIT_POINTS {
            return Err(Error::param(
                "n_grid",
                format!("need at least {MIN_FIT_POINTS} sample sizes, got {}", self.n_grid.len()),
            ));
        }
        if self.n_grid[0] < 1 || self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::param("n_grid", "must be positive and strictly increasing"));
        }
        if self.replicates < MIN_FIT_REPLICATES {
            return Err(Error::param(
                "replicates",
                format!("need at least {MIN_FIT_REPLICATES}, got {}", self.replicates),
            ));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let cfg: ExperimentConfig = serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> ExperimentConfig {
        ExperimentConfig {
            pairs: vec![(PNorm::ONE, PNorm::TWO)],
            delta_spec: vec![DeltaSpec::Fixed(1.0), DeltaSpec::Power(-0.5)],
            n_grid: vec![16, 32, 64, 128],
            replicates: 30,
            master_seed: 9,
            output_dir: None,
            record_wall_time: false,
        }
    }

    #[test]
    fn json_round_trip() {
        let cfg = base();
        let text = serde_json::to_string(&cfg).unwrap();
        assert!(text.contains("\"delta_spec\":[{\"fixed\":1.0},{\"power\":-0.5}]"));
        assert_eq!(ExperimentConfig::from_json(&text).unwrap(), cfg);
        let text = r#"{"pairs":[[1,"inf"]],"delta_spec":[{"fixed":0.5}],"n_grid":[8,16,32,64],
                       "replicates":40,"master_seed":1}"#;
        let cfg = ExperimentConfig::from_json(text).unwrap();
        assert_eq!(cfg.pairs, vec![(PNorm::ONE, PNorm::INF)]);
    }

    #[test]
    fn invariants_enforced() {
        let mut c = base();
        c.n_grid = vec![16, 32, 32, 64];
        assert!(c.validate().is_err());
        let mut c = base();
        c.n_grid.truncate(3);
        assert!(c.validate().is_err());
        let mut c = base();
        c.replicates = 29;
        assert!(c.validate().is_err());
        let mut c = base();
        c.delta_spec = vec![DeltaSpec::Fixed(-1.0)];
        assert!(c.validate().is_err());
        assert!(ExperimentConfig::from_json(r#"{"pairs":[]}"#).is_err());
    }

    #[test]
    fn delta_rules() {
        assert_eq!(DeltaSpec::Power(-0.5).at(1 << 16), 1.0 / 256.0);
        assert_eq!(DeltaSpec::Fixed(0.3).at(1 << 16), 0.3);
        assert_eq!(DeltaSpec::Power(0.25).to_string(), "n^0.25");
    }
}
