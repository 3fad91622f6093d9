//! Bounded Voronoi decomposition of a box, built cell by cell by clipping the
//! box with perpendicular-bisector half-planes.

use super::{Aabb, CellList, ParticleSystem, RectDomain};
use crate::error::{Error, Result};
use crate::par;

/// One Voronoi cell, clipped to the bounding box.
#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Interval {
        lo: f64,
        hi: f64,
    },
    /// Counter-clockwise convex polygon.
    Polygon(Vec<[f64; 2]>),
}

impl Cell {
    pub fn measure(&self) -> f64 {
        match self {
            Cell::Interval { lo, hi } => hi - lo,
            Cell::Polygon(v) => polygon_area(v),
        }
    }

    /// Vertices as flat coordinate slices (interval endpoints in 1D).
    pub fn vertices(&self) -> Vec<Vec<f64>> {
        match self {
            Cell::Interval { lo, hi } => vec![vec![*lo], vec![*hi]],
            Cell::Polygon(v) => v.iter().map(|p| p.to_vec()).collect(),
        }
    }

    /// Largest distance from `x` to a point of the cell (attained at a vertex).
    pub fn max_distance(&self, x: &[f64]) -> f64 {
        match self {
            Cell::Interval { lo, hi } => (x[0] - lo).abs().max((hi - x[0]).abs()),
            Cell::Polygon(v) => v.iter().map(|p| dist2(p, x)).fold(0.0, f64::max).sqrt(),
        }
    }

    /// Closed-cell membership with an absolute slack.
    pub fn contains(&self, x: &[f64], slack: f64) -> bool {
        match self {
            Cell::Interval { lo, hi } => lo - slack <= x[0] && x[0] <= hi + slack,
            Cell::Polygon(v) => (0..v.len()).all(|k| {
                let a = v[k];
                let b = v[(k + 1) % v.len()];
                let cross = (b[0] - a[0]) * (x[1] - a[1]) - (b[1] - a[1]) * (x[0] - a[0]);
                let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
                cross >= -slack * len
            }),
        }
    }
}

#[derive(Clone, Debug)]
pub struct VoronoiDiagram {
    pub dim: usize,
    pub bounds: Aabb,
    pub cells: Vec<Cell>,
    pub volumes: Vec<f64>,
    /// Sorted indices of the cells sharing a facet of positive measure.
    pub adjacency: Vec<Vec<usize>>,
}

impl VoronoiDiagram {
    /// Decomposes `bounds` among the sites in `coords` (flat, `dim` per site).
    /// Sites must be pairwise distinct and lie in the closed box.
    pub fn build(dim: usize, coords: &[f64], bounds: &Aabb) -> Result<Self> {
        if dim != bounds.dim() {
            return Err(Error::InvalidArgument(format!(
                "site dimension {dim} does not match box dimension {}",
                bounds.dim()
            )));
        }
        let n = coords.len() / dim;
        if n == 0 {
            return Err(Error::InvalidParticles(
                "Voronoi decomposition needs at least one site".into(),
            ));
        }
        super::check_distinct(dim, coords)?;
        if let Some(i) = (0..n).find(|&i| !bounds.contains_closed(&coords[i * dim..(i + 1) * dim])) {
            return Err(Error::InvalidParticles(format!("site {i} lies outside the box")));
        }
        match dim {
            1 => Ok(build_1d(coords, bounds)),
            2 => Ok(build_2d(coords, bounds)),
            d => Err(Error::UnsupportedDimension(d)),
        }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn total_volume(&self) -> f64 {
        self.volumes.iter().sum()
    }
}

/// Voronoi decomposition of the extended domain for the particles of `ps`.
pub fn voronoi_decompose(ps: &ParticleSystem, domain: &RectDomain) -> Result<VoronoiDiagram> {
    VoronoiDiagram::build(ps.dim(), ps.coords(), &domain.extended())
}

/// `r_N = max_i max_{y in cell i} |x_i - y|`.
pub fn covering_radius(diagram: &VoronoiDiagram, coords: &[f64]) -> f64 {
    let dim = diagram.dim;
    diagram
        .cells
        .iter()
        .enumerate()
        .map(|(i, c)| c.max_distance(&coords[i * dim..(i + 1) * dim]))
        .fold(0.0, f64::max)
}

fn build_1d(coords: &[f64], bounds: &Aabb) -> VoronoiDiagram {
    let n = coords.len();
    let (lo, hi) = (bounds.lower[0], bounds.upper[0]);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_unstable_by(|&a, &b| coords[a].total_cmp(&coords[b]));

    let mut cells = vec![Cell::Interval { lo, hi }; n];
    let mut adjacency = vec![Vec::new(); n];
    for (k, &i) in order.iter().enumerate() {
        let left = if k == 0 {
            lo
        } else {
            0.5 * (coords[order[k - 1]] + coords[i])
        };
        let right = if k + 1 == n {
            hi
        } else {
            0.5 * (coords[i] + coords[order[k + 1]])
        };
        cells[i] = Cell::Interval { lo: left, hi: right };
        if k > 0 {
            adjacency[i].push(order[k - 1]);
        }
        if k + 1 < n {
            adjacency[i].push(order[k + 1]);
        }
        adjacency[i].sort_unstable();
    }
    let volumes = cells.iter().map(Cell::measure).collect();
    VoronoiDiagram {
        dim: 1,
        bounds: bounds.clone(),
        cells,
        volumes,
        adjacency,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Edge {
    Boundary,
    Site(usize),
}

fn build_2d(coords: &[f64], bounds: &Aabb) -> VoronoiDiagram {
    let n = coords.len() / 2;
    let spacing = (bounds.volume() / n as f64).sqrt();
    let grid = CellList::new(coords, 2, 2.0 * spacing);
    let diameter = bounds.diameter();

    let built: Vec<(Vec<[f64; 2]>, Vec<usize>)> =
        par::map_indices(n, |i| clip_cell(i, coords, &grid, bounds, spacing, diameter));

    let mut cells = Vec::with_capacity(n);
    let mut adjacency = Vec::with_capacity(n);
    for (poly, adj) in built {
        cells.push(Cell::Polygon(poly));
        adjacency.push(adj);
    }
    let volumes = cells.iter().map(Cell::measure).collect();
    VoronoiDiagram {
        dim: 2,
        bounds: bounds.clone(),
        cells,
        volumes,
        adjacency,
    }
}

fn clip_cell(
    i: usize,
    coords: &[f64],
    grid: &CellList,
    bounds: &Aabb,
    spacing: f64,
    diameter: f64,
) -> (Vec<[f64; 2]>, Vec<usize>) {
    let x = [coords[2 * i], coords[2 * i + 1]];
    let box_poly = vec![
        ([bounds.lower[0], bounds.lower[1]], Edge::Boundary),
        ([bounds.upper[0], bounds.lower[1]], Edge::Boundary),
        ([bounds.upper[0], bounds.upper[1]], Edge::Boundary),
        ([bounds.lower[0], bounds.upper[1]], Edge::Boundary),
    ];
    let eps = 1e-13 * diameter;

    let mut radius = 3.0 * spacing;
    let mut candidates: Vec<(f64, usize)> = Vec::new();
    loop {
        candidates.clear();
        grid.for_each_within(coords, &x, radius, |j, d2| {
            if j != i {
                candidates.push((d2, j));
            }
        });
        candidates.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

        let mut poly = box_poly.clone();
        let mut reach2 = max_dist2(&poly, &x);
        for &(d2, j) in &candidates {
            // a site at distance >= 2 * reach cannot cut the current cell
            if d2 >= 4.0 * reach2 {
                break;
            }
            let site = [coords[2 * j], coords[2 * j + 1]];
            poly = clip(&poly, &x, &site, j, eps);
            reach2 = max_dist2(&poly, &x);
        }

        if 4.0 * reach2 <= radius * radius || radius > diameter {
            let mut adj: Vec<usize> = poly
                .iter()
                .filter_map(|(_, e)| match e {
                    Edge::Site(j) => Some(*j),
                    Edge::Boundary => None,
                })
                .collect();
            adj.sort_unstable();
            adj.dedup();
            return (poly.into_iter().map(|(p, _)| p).collect(), adj);
        }
        radius *= 2.0;
    }
}

/// Clips a convex polygon (each vertex carries the label of the edge that
/// starts at it) by the half-plane of points closer to `x` than to `site`.
fn clip(poly: &[([f64; 2], Edge)], x: &[f64; 2], site: &[f64; 2], j: usize, eps: f64) -> Vec<([f64; 2], Edge)> {
    let e = [site[0] - x[0], site[1] - x[1]];
    let half = 0.5 * (e[0] * e[0] + e[1] * e[1]);
    let side = |p: &[f64; 2]| (p[0] - x[0]) * e[0] + (p[1] - x[1]) * e[1] - half;

    let m = poly.len();
    let mut out: Vec<([f64; 2], Edge)> = Vec::with_capacity(m + 1);
    for k in 0..m {
        let (p, label) = poly[k];
        let (q, _) = poly[(k + 1) % m];
        let (sp, sq) = (side(&p), side(&q));
        let p_in = sp <= 0.0;
        let q_in = sq <= 0.0;
        match (p_in, q_in) {
            (true, true) => out.push((p, label)),
            (true, false) => {
                if sp == 0.0 {
                    out.push((p, Edge::Site(j)));
                } else {
                    out.push((p, label));
                    out.push((lerp(&p, &q, sp / (sp - sq)), Edge::Site(j)));
                }
            }
            (false, true) => out.push((lerp(&p, &q, sp / (sp - sq)), label)),
            (false, false) => {}
        }
    }
    dedup_ring(out, eps)
}

fn dedup_ring(mut ring: Vec<([f64; 2], Edge)>, eps: f64) -> Vec<([f64; 2], Edge)> {
    let eps2 = eps * eps;
    let mut k = 0;
    while ring.len() > 1 && k < ring.len() {
        let next = (k + 1) % ring.len();
        if dist2(&ring[k].0, &ring[next].0) <= eps2 {
            // drop the zero-length edge starting at k
            ring.remove(k);
        } else {
            k += 1;
        }
    }
    ring
}

fn lerp(p: &[f64; 2], q: &[f64; 2], t: f64) -> [f64; 2] {
    [p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]
}

fn dist2(p: &[f64; 2], x: &[f64]) -> f64 {
    (p[0] - x[0]).powi(2) + (p[1] - x[1]).powi(2)
}

fn max_dist2(poly: &[([f64; 2], Edge)], x: &[f64; 2]) -> f64 {
    poly.iter().map(|(p, _)| dist2(p, x)).fold(0.0, f64::max)
}

/// Shoelace formula.
pub(crate) fn polygon_area(v: &[[f64; 2]]) -> f64 {
    let n = v.len();
    if n < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for k in 0..n {
        let a = v[k];
        let b = v[(k + 1) % n];
        acc += a[0] * b[1] - a[1] * b[0];
    }
    0.5 * acc.abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_box(w: f64, h: f64) -> Aabb {
        Aabb::new(vec![0.0, 0.0], vec![w, h]).unwrap()
    }

    #[test]
    fn single_site_owns_box() {
        let b = unit_box(2.0, 2.0);
        let d = VoronoiDiagram::build(2, &[1.0, 1.0], &b).unwrap();
        assert_eq!(d.volumes, vec![4.0]);
        assert!((covering_radius(&d, &[1.0, 1.0]) - 2f64.sqrt()).abs() < 1e-15);
        assert!(d.adjacency[0].is_empty());
    }

    #[test]
    fn two_unit_squares() {
        let b = unit_box(2.0, 1.0);
        let pts = [0.5, 0.5, 1.5, 0.5];
        let d = VoronoiDiagram::build(2, &pts, &b).unwrap();
        assert!((d.volumes[0] - 1.0).abs() < 1e-15);
        assert!((d.volumes[1] - 1.0).abs() < 1e-15);
        assert_eq!(d.adjacency, vec![vec![1], vec![0]]);
        assert!((covering_radius(&d, &pts) - 0.5f64.sqrt()).abs() < 1e-15);
    }

    /// Nearest-site rasterization on a fine grid.
    fn raster_volumes(pts: &[f64], b: &Aabb, res: usize) -> Vec<f64> {
        let n = pts.len() / 2;
        let mut vols = vec![0.0; n];
        let (w, h) = (b.upper[0] - b.lower[0], b.upper[1] - b.lower[1]);
        let cell = w * h / (res * res) as f64;
        for a in 0..res {
            for c in 0..res {
                let y = [
                    b.lower[0] + (a as f64 + 0.5) * w / res as f64,
                    b.lower[1] + (c as f64 + 0.5) * h / res as f64,
                ];
                let best = (0..n)
                    .min_by(|&i, &j| {
                        dist2(&[pts[2 * i], pts[2 * i + 1]], &y).total_cmp(&dist2(&[pts[2 * j], pts[2 * j + 1]], &y))
                    })
                    .unwrap();
                vols[best] += cell;
            }
        }
        vols
    }

    #[test]
    fn square_tiling_matches_raster() {
        let k = 6;
        let dx = 1.0 / k as f64;
        let pts: Vec<f64> = (0..k)
            .flat_map(|i| (0..k).flat_map(move |j| [(i as f64 + 0.5) * dx, (j as f64 + 0.5) * dx]))
            .collect();
        let b = unit_box(1.0, 1.0);
        let d = VoronoiDiagram::build(2, &pts, &b).unwrap();
        for v in &d.volumes {
            assert!((v - dx * dx).abs() < 1e-15);
        }
        assert!((d.total_volume() - 1.0).abs() < 1e-14);
        // raster resolution chosen so grid lines never hit a cell boundary
        let raster = raster_volumes(&pts, &b, 600);
        for (v, r) in d.volumes.iter().zip(&raster) {
            assert!(((v - r) / v).abs() < 1e-4, "{v} vs {r}");
        }
        assert!((covering_radius(&d, &pts) - 2f64.sqrt() * dx / 2.0).abs() < 1e-15);
        // interior cells have exactly four facet neighbors
        let interior = 2 * k + 2;
        assert_eq!(d.adjacency[interior].len(), 4);
    }

    #[test]
    fn random_sites_partition_box_and_agree_with_raster() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let b = Aabb::new(vec![-0.1, -0.1], vec![1.1, 1.1]).unwrap();
        for trial in 0..10 {
            let n = 5 + trial * 7;
            let pts: Vec<f64> = (0..2 * n).map(|_| rng.gen_range(-0.1..1.1)).collect();
            let d = VoronoiDiagram::build(2, &pts, &b).unwrap();
            assert!(((d.total_volume() - 1.44) / 1.44).abs() < 1e-10);
            for i in 0..n {
                assert!(d.cells[i].contains(&pts[2 * i..2 * i + 2], 1e-12));
            }
            for (a, nbrs) in d.adjacency.iter().enumerate() {
                for &c in nbrs {
                    assert!(d.adjacency[c].contains(&a));
                }
            }
            if trial < 3 {
                let raster = raster_volumes(&pts, &b, 400);
                for (v, r) in d.volumes.iter().zip(&raster) {
                    assert!((v - r).abs() < 2e-3, "{v} vs {r}");
                }
            }
        }
    }

    #[test]
    fn one_dimensional_cells() {
        let b = Aabb::new(vec![0.0], vec![1.0]).unwrap();
        let d = VoronoiDiagram::build(1, &[0.9, 0.1, 0.5], &b).unwrap();
        let expect = [0.3, 0.3, 0.4];
        for (v, e) in d.volumes.iter().zip(expect) {
            assert!((v - e).abs() < 1e-15);
        }
        assert_eq!(d.adjacency[2], vec![0, 1]);
        assert!((covering_radius(&d, &[0.9, 0.1, 0.5]) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn coincident_sites_fail() {
        let b = unit_box(1.0, 1.0);
        assert!(matches!(
            VoronoiDiagram::build(2, &[0.2, 0.2, 0.7, 0.7, 0.2, 0.2], &b),
            Err(Error::CoincidentParticles(0, 2))
        ));
    }

    #[test]
    fn sites_on_the_boundary() {
        let b = unit_box(1.0, 1.0);
        let pts = [0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 1.0, 0.0];
        let d = VoronoiDiagram::build(2, &pts, &b).unwrap();
        for v in &d.volumes {
            assert!((v - 0.25).abs() < 1e-15);
        }
    }
}
