//! Interpolant `Pi_h`, approximate gradient `grad_h` and approximate
//! Laplacian `lap_h` over a particle system.
//!
//! Every per-point sum runs over neighbors in ascending particle index, so
//! results do not depend on threading.

use std::cell::RefCell;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CellList, ParticleSystem};
use crate::par;
use crate::weights::{RadialWeight, ScaledKernel};

/// A field known in closed form, used for center values away from particles
/// and for error evaluation.
pub trait AnalyticField: Send + Sync {
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> Vec<f64>;
    fn laplacian(&self, x: &[f64]) -> f64;
}

/// Values `f(x_i)` at the particles, optionally backed by the exact field.
#[derive(Clone, Default)]
pub struct FieldSamples {
    pub values: Vec<f64>,
    pub analytic: Option<Arc<dyn AnalyticField>>,
}

impl FieldSamples {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values, analytic: None }
    }

    /// Samples `field` at every particle and keeps it for center values.
    pub fn sample(ps: &ParticleSystem, field: Arc<dyn AnalyticField>) -> Self {
        let values = ps.points().map(|p| field.value(p)).collect();
        Self {
            values,
            analytic: Some(field),
        }
    }

    pub fn from_fn<F: Fn(&[f64]) -> f64>(ps: &ParticleSystem, f: F) -> Self {
        Self::new(ps.points().map(f).collect())
    }
}

impl fmt::Debug for FieldSamples {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FieldSamples")
            .field("values", &self.values.len())
            .field("analytic", &self.analytic.is_some())
            .finish()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OperatorKind {
    Interp,
    Grad,
    Lap,
}

impl OperatorKind {
    /// Components per evaluation point.
    pub fn width(self, dim: usize) -> usize {
        match self {
            OperatorKind::Grad => dim,
            _ => 1,
        }
    }
}

impl std::str::FromStr for OperatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "interp" | "interpolant" => Ok(OperatorKind::Interp),
            "grad" | "gradient" => Ok(OperatorKind::Grad),
            "lap" | "laplacian" => Ok(OperatorKind::Lap),
            other => Err(Error::InvalidArgument(format!("unknown operator `{other}`"))),
        }
    }
}

impl fmt::Display for OperatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OperatorKind::Interp => "interp",
            OperatorKind::Grad => "grad",
            OperatorKind::Lap => "lap",
        })
    }
}

thread_local! {
    static SCRATCH: RefCell<Vec<(u32, f64)>> = const { RefCell::new(Vec::new()) };
}

/// The three operators for one particle system and one weight, with the
/// bucket grid and the `h`-scaled kernel prepared once.
#[derive(Clone, Debug)]
pub struct Operators<'a> {
    ps: &'a ParticleSystem,
    kernel: ScaledKernel,
    cells: CellList,
}

impl<'a> Operators<'a> {
    pub fn new(ps: &'a ParticleSystem, w: &RadialWeight) -> Result<Self> {
        if w.dim != ps.dim() {
            return Err(Error::InvalidArgument(format!(
                "weight `{}` is defined in dimension {}, particles live in dimension {}",
                w.name,
                w.dim,
                ps.dim()
            )));
        }
        let h = ps.h();
        Ok(Self {
            ps,
            kernel: w.scaled_kernel(h),
            cells: CellList::new(ps.coords(), ps.dim(), h),
        })
    }

    pub fn particles(&self) -> &ParticleSystem {
        self.ps
    }

    fn check_len(&self, f: &FieldSamples) -> Result<()> {
        if f.values.len() != self.ps.len() {
            return Err(Error::InvalidArgument(format!(
                "{} field samples for {} particles",
                f.values.len(),
                self.ps.len()
            )));
        }
        Ok(())
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.ps.dim() {
            return Err(Error::InvalidArgument(format!(
                "point has {} coordinates, expected {}",
                x.len(),
                self.ps.dim()
            )));
        }
        Ok(())
    }

    /// Runs `body` on `Lambda(x, h)` sorted by index, with squared distances.
    fn with_neighbors<T>(&self, x: &[f64], body: impl FnOnce(&[(u32, f64)]) -> T) -> T {
        SCRATCH.with(|cell| {
            let mut buf = cell.borrow_mut();
            self.cells
                .neighbors_with_dist2(self.ps.coords(), x, self.ps.h(), &mut buf);
            body(&buf)
        })
    }

    fn center_value(&self, f: &FieldSamples, x: &[f64], neigh: &[(u32, f64)]) -> Result<f64> {
        if let Some(&(j, _)) = neigh.iter().find(|e| e.1 == 0.0) {
            return Ok(f.values[j as usize]);
        }
        f.analytic.as_ref().map(|a| a.value(x)).ok_or(Error::MissingCenterValue)
    }

    fn interp_sum(&self, f: &FieldSamples, neigh: &[(u32, f64)]) -> f64 {
        let vols = self.ps.volumes();
        neigh
            .iter()
            .map(|&(j, d2)| {
                let j = j as usize;
                vols[j] * f.values[j] * self.kernel.eval(d2.sqrt())
            })
            .fold(0.0, |a, b| a + b)
    }

    fn grad_sum(&self, f: &FieldSamples, x: &[f64], fx: f64, neigh: &[(u32, f64)], out: &mut [f64]) {
        let dim = self.ps.dim();
        let coords = self.ps.coords();
        let vols = self.ps.volumes();
        out.fill(0.0);
        for &(j, d2) in neigh {
            if d2 == 0.0 {
                continue;
            }
            let j = j as usize;
            let s = vols[j] * (f.values[j] - fx) * self.kernel.eval(d2.sqrt()) / d2;
            for k in 0..dim {
                out[k] += s * (coords[j * dim + k] - x[k]);
            }
        }
        for v in out.iter_mut() {
            *v *= dim as f64;
        }
    }

    fn lap_sum(&self, f: &FieldSamples, fx: f64, neigh: &[(u32, f64)]) -> f64 {
        let vols = self.ps.volumes();
        let mut acc = 0.0;
        for &(j, d2) in neigh {
            if d2 == 0.0 {
                continue;
            }
            let j = j as usize;
            acc += vols[j] * (f.values[j] - fx) / d2 * self.kernel.eval(d2.sqrt());
        }
        2.0 * self.ps.dim() as f64 * acc
    }

    /// `Pi_h f(x) = sum_{Lambda(x,h)} V_i f(x_i) w_h(|x_i - x|)`.
    pub fn interpolate(&self, f: &FieldSamples, x: &[f64]) -> Result<f64> {
        self.check_len(f)?;
        self.check_point(x)?;
        Ok(self.with_neighbors(x, |n| self.interp_sum(f, n)))
    }

    /// `grad_h f(x) = d sum_{Lambda*(x,h)} V_i (f(x_i) - f(x)) (x_i - x) / |x_i - x|^2 w_h`.
    pub fn gradient(&self, f: &FieldSamples, x: &[f64]) -> Result<Vec<f64>> {
        self.check_len(f)?;
        self.check_point(x)?;
        self.with_neighbors(x, |n| {
            let fx = self.center_value(f, x, n)?;
            let mut out = vec![0.0; self.ps.dim()];
            self.grad_sum(f, x, fx, n, &mut out);
            Ok(out)
        })
    }

    /// `lap_h f(x) = 2d sum_{Lambda*(x,h)} V_i (f(x_i) - f(x)) / |x_i - x|^2 w_h`.
    pub fn laplacian(&self, f: &FieldSamples, x: &[f64]) -> Result<f64> {
        self.check_len(f)?;
        self.check_point(x)?;
        self.with_neighbors(x, |n| {
            let fx = self.center_value(f, x, n)?;
            Ok(self.lap_sum(f, fx, n))
        })
    }

    /// One operator at one point, as a vector of `kind.width(d)` components.
    pub fn apply(&self, kind: OperatorKind, f: &FieldSamples, x: &[f64]) -> Result<Vec<f64>> {
        match kind {
            OperatorKind::Interp => self.interpolate(f, x).map(|v| vec![v]),
            OperatorKind::Grad => self.gradient(f, x),
            OperatorKind::Lap => self.laplacian(f, x).map(|v| vec![v]),
        }
    }

    /// One operator at particle `i`, using `f(x_i)` as the center value.
    pub fn apply_at_particle(&self, kind: OperatorKind, f: &FieldSamples, i: usize) -> Result<Vec<f64>> {
        self.check_len(f)?;
        if i >= self.ps.len() {
            return Err(Error::InvalidArgument(format!("particle index {i} out of range")));
        }
        let x = self.ps.point(i);
        Ok(self.with_neighbors(x, |n| self.apply_with_neighbors(kind, f, x, f.values[i], n)))
    }

    /// One operator at `x` with center value `fx` over a precomputed
    /// neighbor list: `Lambda(x, h)` as `(index, |x_i - x|^2)` in ascending
    /// index. Lets several weights share one neighbor search.
    pub fn apply_with_neighbors(
        &self,
        kind: OperatorKind,
        f: &FieldSamples,
        x: &[f64],
        fx: f64,
        neighbors: &[(u32, f64)],
    ) -> Vec<f64> {
        match kind {
            OperatorKind::Interp => vec![self.interp_sum(f, neighbors)],
            OperatorKind::Grad => {
                let mut out = vec![0.0; self.ps.dim()];
                self.grad_sum(f, x, fx, neighbors, &mut out);
                out
            }
            OperatorKind::Lap => vec![self.lap_sum(f, fx, neighbors)],
        }
    }

    /// Batch evaluation at flat `points` (`d` values each), parallel across
    /// points when the `parallel` feature is on.
    pub fn evaluate_field(&self, f: &FieldSamples, points: &[f64], kind: OperatorKind) -> Result<Vec<Vec<f64>>> {
        let dim = self.ps.dim();
        if points.len() % dim != 0 {
            return Err(Error::InvalidArgument(
                "point coordinates are not a multiple of the dimension".into(),
            ));
        }
        self.check_len(f)?;
        par::map_indices(points.len() / dim, |i| {
            self.apply(kind, f, &points[i * dim..(i + 1) * dim])
        })
        .into_iter()
        .collect()
    }

    /// Serial reference for [`Operators::evaluate_field`].
    pub fn evaluate_field_serial(&self, f: &FieldSamples, points: &[f64], kind: OperatorKind) -> Result<Vec<Vec<f64>>> {
        let dim = self.ps.dim();
        if points.len() % dim != 0 {
            return Err(Error::InvalidArgument(
                "point coordinates are not a multiple of the dimension".into(),
            ));
        }
        par::map_indices_serial(points.len() / dim, |i| {
            self.apply(kind, f, &points[i * dim..(i + 1) * dim])
        })
        .into_iter()
        .collect()
    }

    /// Batch evaluation at the listed particles.
    pub fn evaluate_at_particles(
        &self,
        f: &FieldSamples,
        indices: &[usize],
        kind: OperatorKind,
    ) -> Result<Vec<Vec<f64>>> {
        par::map_indices(indices.len(), |k| self.apply_at_particle(kind, f, indices[k]))
            .into_iter()
            .collect()
    }
}

pub fn interpolate(ps: &ParticleSystem, w: &RadialWeight, f: &FieldSamples, x: &[f64]) -> Result<f64> {
    Operators::new(ps, w)?.interpolate(f, x)
}

pub fn gradient(ps: &ParticleSystem, w: &RadialWeight, f: &FieldSamples, x: &[f64]) -> Result<Vec<f64>> {
    Operators::new(ps, w)?.gradient(f, x)
}

pub fn laplacian(ps: &ParticleSystem, w: &RadialWeight, f: &FieldSamples, x: &[f64]) -> Result<f64> {
    Operators::new(ps, w)?.laplacian(f, x)
}

pub fn evaluate_field(
    ps: &ParticleSystem,
    w: &RadialWeight,
    f: &FieldSamples,
    points: &[f64],
    kind: OperatorKind,
) -> Result<Vec<Vec<f64>>> {
    Operators::new(ps, w)?.evaluate_field(f, points, kind)
}

/// `sin(2 pi (x_1 + ... + x_d))`.
#[derive(Clone, Copy, Debug, Default)]
pub struct SineField;

impl AnalyticField for SineField {
    fn value(&self, x: &[f64]) -> f64 {
        (2.0 * std::f64::consts::PI * x.iter().sum::<f64>()).sin()
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let tau = 2.0 * std::f64::consts::PI;
        vec![tau * (tau * x.iter().sum::<f64>()).cos(); x.len()]
    }

    fn laplacian(&self, x: &[f64]) -> f64 {
        let tau = 2.0 * std::f64::consts::PI;
        -(x.len() as f64) * tau * tau * self.value(x)
    }
}
