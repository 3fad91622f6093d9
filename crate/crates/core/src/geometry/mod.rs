//! Domains, particle distributions and the geometric indicators built on them.

mod cells;
mod io;
mod lattice;
mod voronoi;

pub use cells::CellList;
pub use io::{read_points_csv, write_diagram_csv, write_points_csv, PointRecord};
pub use lattice::{perturbed_lattice, uniform_volumes};
pub use voronoi::{covering_radius, voronoi_decompose, Cell, VoronoiDiagram};

use crate::error::{Error, Result};

/// Relative tolerance on `sum(volumes) == |box|`.
pub const VOLUME_SUM_RTOL: f64 = 1e-12;

/// Axis-aligned box, used for the extended domain.
#[derive(Clone, Debug, PartialEq)]
pub struct Aabb {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Aabb {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::InvalidDomain(format!(
                "corner dimensions {} and {} do not match",
                lower.len(),
                upper.len()
            )));
        }
        for (k, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidDomain(format!(
                    "axis {k}: need lower < upper, got [{lo}, {hi}]"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn volume(&self) -> f64 {
        self.lower.iter().zip(&self.upper).map(|(lo, hi)| hi - lo).product()
    }

    pub fn diameter(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| (hi - lo) * (hi - lo))
            .sum::<f64>()
            .sqrt()
    }

    /// Open-box membership.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (lo, hi))| lo < v && v < hi)
    }

    pub fn contains_closed(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (lo, hi))| lo <= v && v <= hi)
    }
}

/// A box domain `Omega = (lower, upper)` together with the extension width
/// `H` that defines the extended box `Omega_H = (lower - H, upper + H)`.
#[derive(Clone, Debug, PartialEq)]
pub struct RectDomain {
    lower: Vec<f64>,
    upper: Vec<f64>,
    extension: f64,
}

impl RectDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, extension: f64) -> Result<Self> {
        Aabb::new(lower.clone(), upper.clone())?;
        if !(extension.is_finite() && extension > 0.0) {
            return Err(Error::InvalidDomain(format!(
                "extension H must be positive, got {extension}"
            )));
        }
        Ok(Self {
            lower,
            upper,
            extension,
        })
    }

    /// `Omega = (0,1)^d` with extension `H`.
    pub fn unit_cube(dim: usize, extension: f64) -> Result<Self> {
        Self::new(vec![0.0; dim], vec![1.0; dim], extension)
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn extension(&self) -> f64 {
        self.extension
    }

    pub fn interior(&self) -> Aabb {
        Aabb {
            lower: self.lower.clone(),
            upper: self.upper.clone(),
        }
    }

    /// The H-inflated box `Omega_H`.
    pub fn extended(&self) -> Aabb {
        let h = self.extension;
        Aabb {
            lower: self.lower.iter().map(|v| v - h).collect(),
            upper: self.upper.iter().map(|v| v + h).collect(),
        }
    }

    pub fn extended_volume(&self) -> f64 {
        self.extended().volume()
    }
}

/// Free-function form of [`RectDomain::extended`].
pub fn extend_domain(domain: &RectDomain) -> Aabb {
    domain.extended()
}

/// Particle positions, particle volumes and the influence radius `h`.
///
/// Coordinates are stored flat, `dim` values per particle.
#[derive(Clone, Debug, PartialEq)]
pub struct ParticleSystem {
    dim: usize,
    coords: Vec<f64>,
    volumes: Vec<f64>,
    h: f64,
}

impl ParticleSystem {
    /// Builds a particle system inside `domain` and checks every invariant:
    /// points in the closed extended box and pairwise distinct, volumes
    /// positive and summing to `|Omega_H|`, and `0 < h < H`.
    pub fn new(domain: &RectDomain, coords: Vec<f64>, volumes: Vec<f64>, h: f64) -> Result<Self> {
        let ps = Self::from_parts(domain.dim(), coords, volumes, h)?;
        let ext = domain.extended();
        if let Some(i) = (0..ps.len()).find(|&i| !ext.contains_closed(ps.point(i))) {
            return Err(Error::InvalidParticles(format!(
                "particle {i} lies outside the extended domain"
            )));
        }
        let total = compensated_sum(&ps.volumes);
        let target = ext.volume();
        if ((total - target) / target).abs() > VOLUME_SUM_RTOL {
            return Err(Error::InvalidParticles(format!(
                "volumes sum to {total}, extended domain measure is {target}"
            )));
        }
        if h >= domain.extension() {
            return Err(Error::InvalidParticles(format!(
                "influence radius h = {h} must be smaller than H = {}",
                domain.extension()
            )));
        }
        Ok(ps)
    }

    /// Builds a particle system without reference to a domain. Only the local
    /// invariants are checked (lengths, positive volumes, `h > 0`, distinct
    /// points).
    pub fn from_parts(dim: usize, coords: Vec<f64>, volumes: Vec<f64>, h: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::UnsupportedDimension(0));
        }
        if coords.len() % dim != 0 || coords.len() / dim != volumes.len() {
            return Err(Error::InvalidParticles(format!(
                "{} coordinates do not match {} volumes in dimension {dim}",
                coords.len(),
                volumes.len()
            )));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParticles("non-finite coordinate".into()));
        }
        if let Some(i) = volumes.iter().position(|&v| !(v.is_finite() && v > 0.0)) {
            return Err(Error::InvalidParticles(format!(
                "volume {i} is not positive: {}",
                volumes[i]
            )));
        }
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::InvalidParticles(format!(
                "influence radius must be positive, got {h}"
            )));
        }
        check_distinct(dim, &coords)?;
        Ok(Self {
            dim,
            coords,
            volumes,
            h,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.volumes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.volumes.is_empty()
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn volumes(&self) -> &[f64] {
        &self.volumes
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    /// Same points and volumes with a different influence radius.
    pub fn with_h(&self, h: f64) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::InvalidParticles(format!(
                "influence radius must be positive, got {h}"
            )));
        }
        Ok(Self { h, ..self.clone() })
    }

    /// Same points with replaced volumes.
    pub fn with_volumes(&self, volumes: Vec<f64>) -> Result<Self> {
        if volumes.len() != self.len() {
            return Err(Error::InvalidParticles("volume count mismatch".into()));
        }
        if let Some(i) = volumes.iter().position(|&v| !(v.is_finite() && v > 0.0)) {
            return Err(Error::InvalidParticles(format!(
                "volume {i} is not positive: {}",
                volumes[i]
            )));
        }
        Ok(Self {
            volumes,
            ..self.clone()
        })
    }

    /// Index set `Lambda(x, r)`, or `Lambda*(x, r)` when `exclude_center` is
    /// set. Builds a throwaway cell list; use [`CellList`] directly for
    /// repeated queries.
    pub fn neighbors(&self, x: &[f64], r: f64, exclude_center: bool) -> Vec<usize> {
        CellList::new(&self.coords, self.dim, r).neighbors(&self.coords, x, r, exclude_center)
    }
}

/// Neumaier summation; the volume check must not fail on rounding alone for
/// large `N`.
pub(crate) fn compensated_sum(values: &[f64]) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for &v in values {
        let t = sum + v;
        comp += if sum.abs() >= v.abs() {
            (sum - t) + v
        } else {
            (v - t) + sum
        };
        sum = t;
    }
    sum + comp
}

fn check_distinct(dim: usize, coords: &[f64]) -> Result<()> {
    let n = coords.len() / dim;
    let mut order: Vec<usize> = (0..n).collect();
    let key = |i: usize| &coords[i * dim..(i + 1) * dim];
    order.sort_unstable_by(|&a, &b| {
        key(a)
            .iter()
            .zip(key(b))
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    for w in order.windows(2) {
        if key(w[0]) == key(w[1]) {
            let (a, b) = (w[0].min(w[1]), w[0].max(w[1]));
            return Err(Error::CoincidentParticles(a, b));
        }
    }
    Ok(())
}
