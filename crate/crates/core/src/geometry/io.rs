use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{Cell, VoronoiDiagram};
use crate::error::{Error, Result};

/// One row of a point-set CSV: `id,x,y,volume`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointRecord {
    pub id: usize,
    pub x: f64,
    pub y: f64,
    pub volume: f64,
}

/// Writes 2D points and volumes as `id,x,y,volume`.
pub fn write_points_csv<W: Write>(out: W, coords: &[f64], volumes: &[f64]) -> Result<()> {
    if coords.len() != 2 * volumes.len() {
        return Err(Error::UnsupportedDimension(coords.len() / volumes.len().max(1)));
    }
    let mut w = csv::Writer::from_writer(out);
    for (id, (p, &volume)) in coords.chunks_exact(2).zip(volumes).enumerate() {
        w.serialize(PointRecord {
            id,
            x: p[0],
            y: p[1],
            volume,
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Reads `id,x,y,volume` rows back into flat coordinates and volumes, ordered
/// by `id`.
pub fn read_points_csv<R: Read>(input: R) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut rows: Vec<PointRecord> = csv::Reader::from_reader(input)
        .deserialize()
        .collect::<std::result::Result<_, _>>()?;
    rows.sort_by_key(|r| r.id);
    if rows.iter().enumerate().any(|(k, r)| r.id != k) {
        return Err(Error::InvalidParticles("point ids must be 0..N-1 without gaps".into()));
    }
    let coords = rows.iter().flat_map(|r| [r.x, r.y]).collect();
    let volumes = rows.iter().map(|r| r.volume).collect();
    Ok((coords, volumes))
}

/// Writes cell vertices as `id,vertex_index,vx,vy` for plotting.
pub fn write_diagram_csv<W: Write>(out: W, diagram: &VoronoiDiagram) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["id", "vertex_index", "vx", "vy"])?;
    for (id, cell) in diagram.cells.iter().enumerate() {
        match cell {
            Cell::Polygon(v) => {
                for (k, p) in v.iter().enumerate() {
                    w.write_record(&[id.to_string(), k.to_string(), p[0].to_string(), p[1].to_string()])?;
                }
            }
            Cell::Interval { lo, hi } => {
                for (k, x) in [lo, hi].into_iter().enumerate() {
                    w.write_record(&[id.to_string(), k.to_string(), x.to_string(), "0".to_string()])?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}
