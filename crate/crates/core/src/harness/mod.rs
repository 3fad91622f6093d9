//! Perturbed-lattice convergence study: particle families with
//! `h = 2.6 * 2^(5/m - 5) * dx^(1/m)`, relative max errors of the three
//! operators for `sin(2 pi (x + y))`, observed and theoretical rates.

mod output;
mod study;

pub use output::{write_gnuplot, write_study_csv};
pub use study::{
    relative_error, run_study, run_study_matrix, spot_check_deviation, LevelCache, LevelGeometry, LevelResult,
    SpotCheck, StudyResult,
};

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::RectDomain;
use crate::operators::{AnalyticField, OperatorKind, SineField};

/// Box domain as it appears in a configuration file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainConfig {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub extension: f64,
}

impl Default for DomainConfig {
    fn default() -> Self {
        Self {
            lower: vec![0.0, 0.0],
            upper: vec![1.0, 1.0],
            extension: 0.1,
        }
    }
}

impl DomainConfig {
    pub fn build(&self) -> Result<RectDomain> {
        RectDomain::new(self.lower.clone(), self.upper.clone(), self.extension)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestFunction {
    /// `sin(2 pi (x + y))`.
    #[default]
    Sin2pi,
}

impl TestFunction {
    pub fn field(self) -> Arc<dyn AnalyticField> {
        match self {
            TestFunction::Sin2pi => Arc::new(SineField),
        }
    }
}

impl std::str::FromStr for TestFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sin2pi" => Ok(TestFunction::Sin2pi),
            other => Err(Error::InvalidArgument(format!("unknown test function `{other}`"))),
        }
    }
}

/// One convergence study.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StudyConfig {
    /// Strictly decreasing lattice spacings.
    pub dx_levels: Vec<f64>,
    pub m: f64,
    pub weight: String,
    pub operator: OperatorKind,
    pub seed: u64,
    pub test_function: TestFunction,
    pub domain: DomainConfig,
    pub noise: f64,
    /// Exact `d_N` is computed on the full instance only up to this size, and
    /// on the spot-check window.
    pub exact_lp_cap: usize,
    /// Grid size per axis for the denominator sample of the closed domain.
    pub denominator_samples: usize,
    pub spot_check: bool,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            dx_levels: dx_range(5, 9),
            m: 5.0,
            weight: "I1".to_string(),
            operator: OperatorKind::Interp,
            seed: 7,
            test_function: TestFunction::Sin2pi,
            domain: DomainConfig::default(),
            noise: 0.25,
            exact_lp_cap: crate::indicators::DEFAULT_LP_CAP,
            denominator_samples: 512,
            spot_check: true,
        }
    }
}

impl StudyConfig {
    pub fn validate(&self) -> Result<RectDomain> {
        let domain = self.domain.build()?;
        if self.dx_levels.is_empty() {
            return Err(Error::InvalidArgument("no refinement levels".into()));
        }
        if self.dx_levels.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::InvalidArgument("dx levels must be strictly decreasing".into()));
        }
        if !(self.m >= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "regular order must be >= 1, got {}",
                self.m
            )));
        }
        for &dx in &self.dx_levels {
            influence_radius_checked(dx, self.m, domain.extension())?;
        }
        if self.denominator_samples < 2 {
            return Err(Error::InvalidArgument(
                "need at least 2 denominator samples per axis".into(),
            ));
        }
        Ok(domain)
    }
}

/// `2^-lo, ..., 2^-hi`.
pub fn dx_range(lo: i32, hi: i32) -> Vec<f64> {
    (lo..=hi).map(|k| 2f64.powi(-k)).collect()
}

/// Parses `2^-5..2^-9`, a comma list like `0.03125,2^-6`, or a single value.
pub fn parse_dx_levels(text: &str) -> Result<Vec<f64>> {
    let bad = || Error::InvalidArgument(format!("cannot parse dx levels `{text}`"));
    let exponent = |s: &str| -> Option<i32> { s.trim().strip_prefix("2^").and_then(|e| e.parse().ok()) };
    if let Some((a, b)) = text.split_once("..") {
        let (a, b) = (exponent(a).ok_or_else(bad)?, exponent(b).ok_or_else(bad)?);
        if a <= b {
            return Err(bad());
        }
        return Ok(dx_range(-a, -b));
    }
    text.split(',')
        .map(|s| match exponent(s) {
            Some(e) => Ok(2f64.powi(e)),
            None => s.trim().parse::<f64>().map_err(|_| bad()),
        })
        .collect()
}

/// `h = 2.6 * 2^(5/m - 5) * dx^(1/m)`.
pub fn influence_radius(dx: f64, m: f64) -> f64 {
    2.6 * 2f64.powf(5.0 / m - 5.0) * dx.powf(1.0 / m)
}

/// [`influence_radius`] with the requirement `h < H`.
pub fn influence_radius_checked(dx: f64, m: f64, extension: f64) -> Result<f64> {
    if !(dx > 0.0 && m > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need dx > 0 and m > 0 (dx = {dx}, m = {m})"
        )));
    }
    let h = influence_radius(dx, m);
    if h >= extension {
        return Err(Error::InvalidArgument(format!(
            "influence radius {h} at dx = {dx}, m = {m} is not below the extension H = {extension}"
        )));
    }
    Ok(h)
}

/// `ln(e1 / e2) / ln(h1 / h2)`.
pub fn observed_rate(e1: f64, h1: f64, e2: f64, h2: f64) -> Result<f64> {
    if !(e1 > 0.0 && e2 > 0.0 && h1 > 0.0 && h2 > 0.0) || h1 == h2 {
        return Err(Error::InvalidArgument(format!(
            "rates need positive errors and distinct positive h (e = {e1}, {e2}; h = {h1}, {h2})"
        )));
    }
    Ok((e1 / e2).ln() / (h1 / h2).ln())
}

/// `min(m - 1, n + 1)` for the interpolant and gradient, `min(m - 2, n + 1)`
/// for the Laplacian; `None` when no convergence is guaranteed.
pub fn theoretical_rate(op: OperatorKind, m: f64, n: u32) -> Option<f64> {
    let cap = n as f64 + 1.0;
    let r = match op {
        OperatorKind::Interp | OperatorKind::Grad => (m - 1.0).min(cap),
        OperatorKind::Lap => (m - 2.0).min(cap),
    };
    (r > 0.0).then_some(r)
}

/// Weight paired with each operator in the reference table.
pub fn table_weights(op: OperatorKind) -> [&'static str; 3] {
    match op {
        OperatorKind::Interp => ["I1", "I2", "I3"],
        OperatorKind::Grad => ["G1", "G2", "G3"],
        OperatorKind::Lap => ["L1", "L2", "L3"],
    }
}
