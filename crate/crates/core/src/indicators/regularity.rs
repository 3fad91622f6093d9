use std::io::Write;

use serde::{Deserialize, Serialize};

use super::deviation::DeviationKind;
use crate::error::{Error, Result};

/// Default width of the band `max c0 / min c0` within which a sequence is
/// judged regular.
pub const DEFAULT_BAND_FACTOR: f64 = 4.0;

/// Achievable constant `c0 = h^m / (r_N + d_N)` for one family member.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularityReport {
    pub h: f64,
    pub m: f64,
    pub r_n: f64,
    pub d_n: f64,
    /// Infinite when `r_N + d_N = 0`.
    pub c0: f64,
}

pub fn regularity_report(r_n: f64, d_n: f64, h: f64, m: f64) -> Result<RegularityReport> {
    if !(r_n >= 0.0 && d_n >= 0.0 && h > 0.0 && m >= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "need r_N, d_N >= 0, h > 0 and m >= 1 (got r_N = {r_n}, d_N = {d_n}, h = {h}, m = {m})"
        )));
    }
    let denom = r_n + d_n;
    let c0 = if denom == 0.0 { f64::INFINITY } else { h.powf(m) / denom };
    Ok(RegularityReport { h, m, r_n, d_n, c0 })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceReport {
    pub levels: Vec<RegularityReport>,
    pub c0_min: f64,
    pub c0_max: f64,
    pub band_factor: f64,
    /// `c0_min > 0` and `c0_max <= band_factor * c0_min`.
    pub regular: bool,
}

/// Judges a refinement sequence: regular when the observed `c0` stays inside
/// a band of relative width `band_factor`.
pub fn sequence_report(levels: Vec<RegularityReport>, band_factor: f64) -> SequenceReport {
    let c0_min = levels.iter().map(|l| l.c0).fold(f64::INFINITY, f64::min);
    let c0_max = levels.iter().map(|l| l.c0).fold(0.0, f64::max);
    let regular = !levels.is_empty() && c0_min > 0.0 && c0_max <= band_factor * c0_min;
    SequenceReport {
        levels,
        c0_min,
        c0_max,
        band_factor,
        regular,
    }
}

/// One line of an indicator table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndicatorRow {
    pub level: usize,
    pub dx: f64,
    pub h: f64,
    pub n: usize,
    pub r_n: f64,
    pub d_n_kind: DeviationKind,
    pub d_n: f64,
    pub c0: f64,
}

/// Writes `level,dx,h,N,r_N,d_N_kind,d_N_value,c0_m{m}`.
pub fn write_indicator_csv<W: Write>(out: W, rows: &[IndicatorRow], m: f64) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "level",
        "dx",
        "h",
        "N",
        "r_N",
        "d_N_kind",
        "d_N_value",
        &format!("c0_m{m}"),
    ])?;
    for r in rows {
        w.write_record([
            r.level.to_string(),
            r.dx.to_string(),
            r.h.to_string(),
            r.n.to_string(),
            r.r_n.to_string(),
            r.d_n_kind.to_string(),
            r.d_n.to_string(),
            r.c0.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
