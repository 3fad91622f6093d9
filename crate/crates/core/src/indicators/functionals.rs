use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CellList, ParticleSystem};
use crate::par;
use crate::weights::{quadrature::sphere_monomial, RadialWeight, ScaledKernel};

/// Consistency functionals at one point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorFunctionals {
    pub n: u32,
    /// `(alpha, J_alpha)` for `|alpha| <= n`.
    pub j: Vec<(Vec<u32>, f64)>,
    /// `(alpha, J~_{alpha,2})` for `|alpha| <= n + 2`, leaving out multi-indices
    /// whose continuum integral diverges.
    pub j_tilde: Vec<(Vec<u32>, f64)>,
    /// `K_{n+1}`.
    pub k: f64,
}

impl ErrorFunctionals {
    pub fn j0(&self) -> f64 {
        self.j[0].1
    }

    /// `max |J_alpha|` over `1 <= |alpha| <= n`.
    pub fn max_j(&self) -> f64 {
        self.j.iter().skip(1).fold(0.0, |m, e| m.max(e.1.abs()))
    }

    pub fn max_j_tilde(&self) -> f64 {
        self.j_tilde.iter().fold(0.0, |m, e| m.max(e.1.abs()))
    }
}

/// Multi-indices in `N^dim` with `lo <= |alpha| <= hi`, graded, then
/// lexicographically descending in the first component.
pub fn multi_indices(dim: usize, lo: u32, hi: u32) -> Vec<Vec<u32>> {
    fn fill(dim: usize, total: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if prefix.len() == dim - 1 {
            prefix.push(total);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for a in (0..=total).rev() {
            prefix.push(a);
            fill(dim, total - a, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    for total in lo..=hi {
        fill(dim, total, &mut Vec::new(), &mut out);
    }
    out
}

/// `int_{R^d} y^alpha / |y|^ell w_h(|y|) dy` by radial reduction.
pub fn continuum_moment(w: &RadialWeight, h: f64, alpha: &[u32], ell: i32) -> f64 {
    let s = sphere_monomial(alpha);
    if s == 0.0 {
        return 0.0;
    }
    let order: u32 = alpha.iter().sum();
    let p = w.dim as i32 - 1 + order as i32 - ell;
    h.powi(order as i32 - ell) * s * w.radial_moment(p)
}

/// Evaluates the consistency functionals for one particle system and weight.
#[derive(Clone, Debug)]
pub struct FunctionalEvaluator<'a> {
    ps: &'a ParticleSystem,
    w: &'a RadialWeight,
    kernel: ScaledKernel,
    cells: CellList,
}

impl<'a> FunctionalEvaluator<'a> {
    pub fn new(ps: &'a ParticleSystem, w: &'a RadialWeight) -> Result<Self> {
        if w.dim != ps.dim() {
            return Err(Error::InvalidArgument("weight and particle dimensions differ".into()));
        }
        let h = ps.h();
        Ok(Self {
            ps,
            w,
            kernel: w.scaled_kernel(h),
            cells: CellList::new(ps.coords(), ps.dim(), h),
        })
    }

    fn neighbors(&self, x: &[f64]) -> Vec<(u32, f64)> {
        let mut out = Vec::new();
        self.cells
            .neighbors_with_dist2(self.ps.coords(), x, self.ps.h(), &mut out);
        out
    }

    /// `J_0(x) = sum_{Lambda(x,h)} V_i w_h(|x_i - x|) - 1`.
    pub fn j0(&self, x: &[f64]) -> f64 {
        let vols = self.ps.volumes();
        let s = self.neighbors(x).iter().fold(0.0, |acc, &(j, d2)| {
            acc + vols[j as usize] * self.kernel.eval(d2.sqrt())
        });
        s - continuum_moment(self.w, self.ps.h(), &vec![0; self.ps.dim()], 0)
    }

    pub fn evaluate(&self, x: &[f64], n: u32) -> ErrorFunctionals {
        let dim = self.ps.dim();
        let h = self.ps.h();
        let (coords, vols) = (self.ps.coords(), self.ps.volumes());
        let neigh = self.neighbors(x);
        // per neighbor: offset, distance, V w_h
        let terms: Vec<(Vec<f64>, f64, f64)> = neigh
            .iter()
            .map(|&(j, d2)| {
                let j = j as usize;
                let off: Vec<f64> = (0..dim).map(|k| coords[j * dim + k] - x[k]).collect();
                let r = d2.sqrt();
                (off, r, vols[j] * self.kernel.eval(r))
            })
            .collect();
        let mono = |off: &[f64], alpha: &[u32]| off.iter().zip(alpha).map(|(o, &a)| o.powi(a as i32)).product::<f64>();

        let j = multi_indices(dim, 0, n)
            .into_iter()
            .map(|alpha| {
                let sum = terms.iter().fold(0.0, |acc, (off, _, vw)| acc + vw * mono(off, &alpha));
                let v = sum - continuum_moment(self.w, h, &alpha, 0);
                (alpha, v)
            })
            .collect();
        let j_tilde = multi_indices(dim, 0, n + 2)
            .into_iter()
            .filter_map(|alpha| {
                let integral = continuum_moment(self.w, h, &alpha, 2);
                if !integral.is_finite() {
                    return None;
                }
                let sum = terms
                    .iter()
                    .filter(|t| t.1 > 0.0)
                    .fold(0.0, |acc, (off, r, vw)| acc + vw * mono(off, &alpha) / (r * r));
                Some((alpha, sum - integral))
            })
            .collect();
        let k = terms
            .iter()
            .fold(0.0, |acc, (_, r, vw)| acc + vw.abs() * r.powi(n as i32 + 1));
        ErrorFunctionals { n, j, j_tilde, k }
    }

    /// `max |J_0|` over flat sample points, parallel across points.
    pub fn sup_abs_j0(&self, points: &[f64]) -> f64 {
        let dim = self.ps.dim();
        par::map_indices(points.len() / dim, |i| self.j0(&points[i * dim..(i + 1) * dim]).abs())
            .into_iter()
            .fold(0.0, f64::max)
    }
}

pub fn error_functionals(ps: &ParticleSystem, w: &RadialWeight, x: &[f64], n: u32) -> Result<ErrorFunctionals> {
    Ok(FunctionalEvaluator::new(ps, w)?.evaluate(x, n))
}

/// `d int y^beta / |y|^2 w_h dy` for even `beta` with `|beta| = 2`; equals 1
/// for every `h` and unit-mass `w`.
pub fn second_moment_identity(w: &RadialWeight, h: f64, beta: &[u32]) -> f64 {
    w.dim as f64 * continuum_moment(w, h, beta, 2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{perturbed_lattice, uniform_volumes, RectDomain};
    use crate::weights::catalog_weight;

    #[test]
    fn multi_index_enumeration() {
        assert_eq!(
            multi_indices(2, 0, 2),
            vec![vec![0, 0], vec![1, 0], vec![0, 1], vec![2, 0], vec![1, 1], vec![0, 2]]
        );
        assert_eq!(multi_indices(3, 3, 3).len(), 10);
        assert_eq!(multi_indices(1, 1, 4).len(), 4);
    }

    #[test]
    fn continuum_identities() {
        for name in ["I1", "I2", "I3", "G1", "G2", "G3", "L1", "L2", "L3"] {
            let w = catalog_weight(name).unwrap();
            for h in [0.3, 0.05] {
                assert!((second_moment_identity(&w, h, &[2, 0]) - 1.0).abs() < 1e-10, "{name}");
                assert!((second_moment_identity(&w, h, &[0, 2]) - 1.0).abs() < 1e-10);
                assert_eq!(continuum_moment(&w, h, &[1, 1], 2), 0.0);
                assert!((continuum_moment(&w, h, &[0, 0], 0) - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn polar_quadrature_cross_check() {
        // int y1^2 y2^2 w_h over the disc by a tensor polar rule
        let w = catalog_weight("I2").unwrap();
        let h = 0.4;
        let (xs, ws) = crate::weights::quadrature::gauss_legendre(40);
        let mut acc = 0.0;
        let nt = 64;
        for (x, wr) in xs.iter().zip(&ws) {
            // split at the spline break r = h/2
            for (a, b) in [(0.0, 0.5 * h), (0.5 * h, h)] {
                let r = 0.5 * (a + b) + 0.5 * (b - a) * x;
                for t in 0..nt {
                    let th = 2.0 * std::f64::consts::PI * t as f64 / nt as f64;
                    let (y1, y2) = (r * th.cos(), r * th.sin());
                    acc += wr
                        * 0.5
                        * (b - a)
                        * r
                        * y1
                        * y1
                        * y2
                        * y2
                        * w.evaluate_scaled(h, r)
                        * 2.0
                        * std::f64::consts::PI
                        / nt as f64;
                }
            }
        }
        assert!((continuum_moment(&w, h, &[2, 2], 0) - acc).abs() < 1e-12);
    }

    #[test]
    fn empty_neighborhood() {
        let ps = ParticleSystem::from_parts(2, vec![5.0, 5.0], vec![1.0], 0.1).unwrap();
        let f = error_functionals(&ps, &catalog_weight("I1").unwrap(), &[0.0, 0.0], 1).unwrap();
        assert!((f.j0() + 1.0).abs() < 1e-14);
        assert_eq!(f.k, 0.0);
    }

    #[test]
    fn odd_functionals_vanish_on_symmetric_lattice() {
        let dom = RectDomain::unit_cube(2, 0.1).unwrap();
        let c = perturbed_lattice(2f64.powi(-6), 0.0, 0, &dom).unwrap();
        let v = uniform_volumes(c.len() / 2, &dom);
        let ps = ParticleSystem::new(&dom, c, v, 0.08).unwrap();
        for name in ["I3", "G2", "L3"] {
            let w = catalog_weight(name).unwrap();
            let ev = FunctionalEvaluator::new(&ps, &w).unwrap();
            for x in [[0.5, 0.5], [0.25, 0.75], [0.125, 0.0]] {
                let f = ev.evaluate(&x, 3);
                for (alpha, v) in f.j.iter().chain(&f.j_tilde) {
                    if alpha.iter().sum::<u32>() % 2 == 1 {
                        assert!(v.abs() < 1e-12, "{name} {alpha:?} {v}");
                    }
                }
                assert!(f.k > 0.0);
            }
        }
    }

    #[test]
    fn j0_matches_interpolant_of_one() {
        let dom = RectDomain::unit_cube(2, 0.1).unwrap();
        let c = perturbed_lattice(2f64.powi(-5), 0.25, 4, &dom).unwrap();
        let v = uniform_volumes(c.len() / 2, &dom);
        let ps = ParticleSystem::new(&dom, c, v, 0.09).unwrap();
        let w = catalog_weight("G3").unwrap();
        let ones = crate::FieldSamples::new(vec![1.0; ps.len()]);
        let ops = crate::Operators::new(&ps, &w).unwrap();
        let ev = FunctionalEvaluator::new(&ps, &w).unwrap();
        for x in [[0.3, 0.6], [1.0, 1.0]] {
            let a = ev.j0(&x);
            let b = ops.interpolate(&ones, &x).unwrap() - 1.0;
            assert!((a - b).abs() < 1e-14);
            assert_eq!(ev.evaluate(&x, 2).j0(), a);
        }
    }
}
