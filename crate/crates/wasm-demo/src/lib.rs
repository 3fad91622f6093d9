//! Browser bindings: a perturbed lattice with its Voronoi cells, weight
//! profiles, and the pointwise error field of one operator.

use std::sync::Arc;

use gpm_core::geometry::{
    covering_radius, perturbed_lattice, uniform_volumes, voronoi_decompose, Cell, ParticleSystem, RectDomain,
};
use gpm_core::harness::influence_radius_checked;
use gpm_core::indicators::voronoi_deviation_bound;
use gpm_core::operators::{AnalyticField, FieldSamples, OperatorKind, Operators, SineField};
use gpm_core::weights::{catalog_weight, check_admissible, check_moment_order, check_smoothness_order};
use wasm_bindgen::prelude::*;

const EXTENSION: f64 = 0.1;

fn domain() -> RectDomain {
    RectDomain::unit_cube(2, EXTENSION).expect("unit square")
}

/// Lattice points, flattened cell polygons and indicators.
#[wasm_bindgen]
pub struct LatticeView {
    coords: Vec<f64>,
    vertices: Vec<f64>,
    offsets: Vec<u32>,
    r_n: f64,
    d_n: f64,
}

#[wasm_bindgen]
impl LatticeView {
    /// `x0, y0, x1, y1, ...`
    pub fn coords(&self) -> Vec<f64> {
        self.coords.clone()
    }

    /// Polygon vertices of all cells, cell `i` spanning
    /// `offsets[i]..offsets[i+1]` vertex pairs.
    pub fn vertices(&self) -> Vec<f64> {
        self.vertices.clone()
    }

    pub fn offsets(&self) -> Vec<u32> {
        self.offsets.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn r_n(&self) -> f64 {
        self.r_n
    }

    /// Greedy upper bound for uniform volumes.
    #[wasm_bindgen(getter)]
    pub fn d_n(&self) -> f64 {
        self.d_n
    }
}

pub fn build_lattice(dx: f64, noise: f64, seed: u64) -> Result<LatticeView, String> {
    if !(dx >= 1.0 / 64.0) {
        return Err("dx below 1/64 is too many particles for the demo".into());
    }
    let domain = domain();
    let coords = perturbed_lattice(dx, noise, seed, &domain).map_err(|e| e.to_string())?;
    let volumes = uniform_volumes(coords.len() / 2, &domain);
    let ps = ParticleSystem::new(&domain, coords, volumes, EXTENSION / 2.0).map_err(|e| e.to_string())?;
    let diagram = voronoi_decompose(&ps, &domain).map_err(|e| e.to_string())?;
    let r_n = covering_radius(&diagram, ps.coords());
    let d_n = voronoi_deviation_bound(&ps, &diagram).map_err(|e| e.to_string())?.value;
    let mut vertices = Vec::new();
    let mut offsets = vec![0u32];
    for cell in &diagram.cells {
        if let Cell::Polygon(v) = cell {
            vertices.extend(v.iter().flat_map(|p| [p[0], p[1]]));
        }
        offsets.push((vertices.len() / 2) as u32);
    }
    Ok(LatticeView {
        coords: ps.coords().to_vec(),
        vertices,
        offsets,
        r_n,
        d_n,
    })
}

#[wasm_bindgen]
pub fn lattice(dx: f64, noise: f64, seed: u32) -> Result<LatticeView, JsError> {
    build_lattice(dx, noise, seed as u64).map_err(|e| JsError::new(&e))
}

/// Samples of `w` on `[0, 1.1]` and a one-line report of its checks.
#[wasm_bindgen]
pub struct WeightView {
    r: Vec<f64>,
    w: Vec<f64>,
    summary: String,
}

#[wasm_bindgen]
impl WeightView {
    pub fn r(&self) -> Vec<f64> {
        self.r.clone()
    }

    pub fn w(&self) -> Vec<f64> {
        self.w.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn summary(&self) -> String {
        self.summary.clone()
    }
}

pub fn build_weight_view(name: &str, samples: usize) -> Result<WeightView, String> {
    let w = catalog_weight(name).map_err(|e| e.to_string())?;
    let samples = samples.clamp(2, 4096);
    // the classic MPS profile is unbounded at 0; start just off the origin
    let r: Vec<f64> = (0..samples)
        .map(|k| 1e-3 + 1.1 * k as f64 / (samples - 1) as f64)
        .collect();
    let values = r.iter().map(|&r| w.evaluate(r)).collect();
    let adm = check_admissible(&w);
    let mom = check_moment_order(&w, w.moment_order);
    let mut summary = format!(
        "mass {:.12}, admissible {}, moment order {} {}",
        adm.mass,
        adm.admissible(),
        w.moment_order,
        if mom.passed { "holds" } else { "fails" }
    );
    if let Some(k) = w.smooth_order {
        let s = check_smoothness_order(&w, k);
        summary.push_str(&format!(
            ", smoothness {k} {}",
            if s.passed { "holds" } else { "fails" }
        ));
    }
    Ok(WeightView { r, w: values, summary })
}

#[wasm_bindgen]
pub fn weight_profile(name: &str, samples: u32) -> Result<WeightView, JsError> {
    build_weight_view(name, samples as usize).map_err(|e| JsError::new(&e))
}

/// `|exact - approx|` on a `grid x grid` raster of the unit square (row
/// major, `y` outer) for `sin(2 pi (x + y))`; the last entry is the relative
/// max error.
pub fn build_error_field(weight: &str, op: &str, dx: f64, m: f64, seed: u64, grid: usize) -> Result<Vec<f64>, String> {
    if !(dx >= 1.0 / 64.0) {
        return Err("dx below 1/64 is too many particles for the demo".into());
    }
    let kind: OperatorKind = op.parse().map_err(|e: gpm_core::Error| e.to_string())?;
    let w = catalog_weight(weight).map_err(|e| e.to_string())?;
    let domain = domain();
    let h = influence_radius_checked(dx, m, EXTENSION).map_err(|e| e.to_string())?;
    let coords = perturbed_lattice(dx, 0.25, seed, &domain).map_err(|e| e.to_string())?;
    let volumes = uniform_volumes(coords.len() / 2, &domain);
    let ps = ParticleSystem::new(&domain, coords, volumes, h).map_err(|e| e.to_string())?;
    let ops = Operators::new(&ps, &w).map_err(|e| e.to_string())?;
    let field = Arc::new(SineField);
    let samples = FieldSamples::sample(&ps, field.clone());
    let grid = grid.clamp(2, 256);
    let points: Vec<f64> = (0..grid * grid)
        .flat_map(|k| {
            let (i, j) = (k % grid, k / grid);
            [(i as f64 + 0.5) / grid as f64, (j as f64 + 0.5) / grid as f64]
        })
        .collect();
    let approx = ops.evaluate_field(&samples, &points, kind).map_err(|e| e.to_string())?;
    let mut out = Vec::with_capacity(grid * grid + 1);
    let (mut num, mut den) = (0.0f64, 0.0f64);
    for (p, a) in points.chunks_exact(2).zip(&approx) {
        let exact = match kind {
            OperatorKind::Interp => vec![field.value(p)],
            OperatorKind::Grad => field.gradient(p),
            OperatorKind::Lap => vec![field.laplacian(p)],
        };
        let err = exact.iter().zip(a).map(|(e, a)| (e - a).powi(2)).sum::<f64>().sqrt();
        num = num.max(err);
        den = den.max(exact.iter().map(|e| e * e).sum::<f64>().sqrt());
        out.push(err);
    }
    out.push(num / den);
    Ok(out)
}

#[wasm_bindgen]
pub fn error_field(weight: &str, op: &str, dx: f64, m: f64, seed: u32, grid: u32) -> Result<Vec<f64>, JsError> {
    build_error_field(weight, op, dx, m, seed as u64, grid as usize).map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lattice_cells_cover_the_box() {
        let v = build_lattice(1.0 / 16.0, 0.25, 1).unwrap();
        let n = v.coords.len() / 2;
        assert_eq!(v.offsets.len(), n + 1);
        assert_eq!(*v.offsets.last().unwrap() as usize, v.vertices.len() / 2);
        let area: f64 = (0..n)
            .map(|i| {
                let poly = &v.vertices[2 * v.offsets[i] as usize..2 * v.offsets[i + 1] as usize];
                let k = poly.len() / 2;
                0.5 * (0..k)
                    .map(|a| {
                        let b = (a + 1) % k;
                        poly[2 * a] * poly[2 * b + 1] - poly[2 * b] * poly[2 * a + 1]
                    })
                    .sum::<f64>()
                    .abs()
            })
            .sum();
        assert!((area - 1.44).abs() < 1e-12);
        assert!(v.r_n > 0.0 && v.d_n >= 0.0);
        assert!(build_lattice(1e-3, 0.25, 1).is_err());
    }

    #[test]
    fn weight_view_samples() {
        let v = build_weight_view("I1", 12).unwrap();
        assert_eq!(v.r.len(), 12);
        assert!((v.w[0] - 3.0 / std::f64::consts::PI * (1.0 - 1e-3)).abs() < 1e-14);
        assert_eq!(*v.w.last().unwrap(), 0.0);
        assert!(v.summary.contains("admissible true"));
        assert!(build_weight_view("nope", 10).is_err());
    }

    #[test]
    fn error_field_shape() {
        let f = build_error_field("I3", "interp", 1.0 / 16.0, 5.0, 3, 8).unwrap();
        assert_eq!(f.len(), 65);
        let rel = *f.last().unwrap();
        assert!(rel > 0.0 && rel < 1.0);
        assert!(build_error_field("I3", "curl", 1.0 / 16.0, 5.0, 3, 8).is_err());
    }
}
