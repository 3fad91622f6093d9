use std::io::Write;

use super::StudyResult;
use crate::error::Result;

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "N/A".to_string(), |v| format!("{v:e}"))
}

/// One row per level: `dx,h,N,r_N,dN_kind,dN,rel_error,rate_observed,rate_theoretical`.
/// Missing values are written as `N/A`.
pub fn write_study_csv<W: Write>(out: W, study: &StudyResult) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "dx",
        "h",
        "N",
        "r_N",
        "dN_kind",
        "dN",
        "rel_error",
        "rate_observed",
        "rate_theoretical",
    ])?;
    for (level, rate) in study.levels.iter().zip(&study.rates) {
        w.write_record([
            format!("{:e}", level.dx),
            format!("{:e}", level.h),
            level.n_particles.to_string(),
            format!("{:e}", level.r_n),
            level.d_n_kind.to_string(),
            format!("{:e}", level.d_n),
            opt(level.rel_error),
            opt(*rate),
            opt(study.rate_theoretical),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `h rel_error` pairs for a log-log plot; failed levels are skipped.
pub fn write_gnuplot<W: Write>(mut out: W, study: &StudyResult) -> Result<()> {
    writeln!(
        out,
        "# {} {} m={}",
        study.config.weight, study.config.operator, study.config.m
    )?;
    writeln!(out, "# h rel_error")?;
    for level in &study.levels {
        if let Some(e) = level.rel_error {
            writeln!(out, "{:e} {:e}", level.h, e)?;
        }
    }
    Ok(())
}
