use super::quadrature::sphere_measure;
use super::RadialWeight;

/// Absolute tolerance for value continuity at breaks and at `r = 1`.
pub const CONTINUITY_TOL: f64 = 1e-12;
/// Tolerance on `|mass - 1|`.
pub const MASS_TOL: f64 = 1e-10;
/// Tolerance on each even-moment residual.
pub const MOMENT_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct AdmissibilityReport {
    /// Finite at the origin and continuous across piece breaks.
    pub continuous: bool,
    /// `w(1) = 0` and no piece vanishes identically, so `supp w = [0, 1]`.
    pub support: bool,
    pub unit_mass: bool,
    pub mass: f64,
}

impl AdmissibilityReport {
    pub fn admissible(&self) -> bool {
        self.continuous && self.support && self.unit_mass
    }
}

/// Checks membership in the admissible set: continuity, support `[0, 1]`
/// and unit mass in `R^d`. Absolute continuity follows from continuity for
/// piecewise polynomials.
pub fn check_admissible(w: &RadialWeight) -> AdmissibilityReport {
    let tol = |v: f64| CONTINUITY_TOL * v.abs().max(1.0);
    let bounded_at_origin = w.pieces[0].eval(0.0).is_finite();
    let continuous = bounded_at_origin
        && w.interior_jumps()
            .iter()
            .all(|&(r, jump)| jump.abs() <= tol(w.evaluate(r)));
    let support = w.edge_value().abs() <= CONTINUITY_TOL
        && w.scale != 0.0
        && w.pieces.iter().all(|p| p.lowest_degree().is_some());
    let mass = w.mass();
    AdmissibilityReport {
        continuous,
        support,
        unit_mass: (mass - 1.0).abs() <= MASS_TOL,
        mass,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MomentReport {
    pub passed: bool,
    /// `int_{R^d} |x|^(2j) w(|x|) dx` for `j = 1..=floor(n/2)`.
    pub residuals: Vec<f64>,
}

/// Vanishing of all moments of order `1..=n`. Odd moments vanish by radial
/// symmetry, so only the `floor(n/2)` even radial moments are checked.
pub fn check_moment_order(w: &RadialWeight, n: u32) -> MomentReport {
    let s = sphere_measure(w.dim);
    let residuals: Vec<f64> = (1..=n / 2)
        .map(|j| s * w.radial_moment(w.dim as i32 + 2 * j as i32 - 1))
        .collect();
    MomentReport {
        passed: residuals.iter().all(|r| r.abs() < MOMENT_TOL),
        residuals,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SmoothnessReport {
    pub passed: bool,
    /// Lowest power with a nonzero coefficient on the piece at the origin.
    pub lowest_degree: Option<i32>,
    /// `w'` continuous across interior breaks.
    pub c1_interior: bool,
}

/// Sufficient condition for boundedness of `w / r^(k+1)` and `(w / r^k)'`
/// near the origin: the lowest monomial degree at 0 is at least `k + 1` and
/// the derivative is continuous across interior breaks.
pub fn check_smoothness_order(w: &RadialWeight, k: u32) -> SmoothnessReport {
    let lowest_degree = w.pieces[0].lowest_degree();
    let c1_interior = w
        .interior_derivative_jumps()
        .iter()
        .all(|&(r, jump)| jump.abs() <= 1e-9 * w.derivative(r).abs().max(1.0));
    // an identically zero first piece has no lowest degree and trivially passes
    let degree_ok = lowest_degree.map_or(true, |p| p >= k as i32 + 1);
    SmoothnessReport {
        passed: degree_ok && c1_interior,
        lowest_degree,
        c1_interior,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::{catalog_weight, Piece};
    use std::f64::consts::PI;

    #[test]
    fn i1_is_admissible_with_unit_mass() {
        let r = check_admissible(&catalog_weight("I1").unwrap());
        assert!(r.admissible());
        assert!((r.mass - 1.0).abs() < 1e-12);
    }

    /// `int x^a y^b w(|(x, y)|)` over the unit disk in Cartesian form: a
    /// 200-point rule in `x`, and one in `y` along each chord, both split at
    /// the circles where the pieces break.
    fn tensor_moment(w: &RadialWeight, a: i32, b: i32) -> f64 {
        let (nodes, weights) = crate::weights::quadrature::gauss_legendre(200);
        let rule = |lo: f64, hi: f64, f: &dyn Fn(f64) -> f64| {
            let (c, h) = (0.5 * (lo + hi), 0.5 * (hi - lo));
            nodes.iter().zip(&weights).map(|(t, wt)| wt * f(c + h * t)).sum::<f64>() * h
        };
        let breaks: Vec<f64> = w.pieces.iter().skip(1).map(|p| p.start).collect();
        let split = |limit: f64, x: f64| {
            let mut pts = vec![-limit, 0.0, limit];
            for &rho in &breaks {
                if rho > x.abs() {
                    let y = (rho * rho - x * x).sqrt();
                    pts.extend([-y, y]);
                }
            }
            pts.sort_by(f64::total_cmp);
            pts
        };
        let inner = |x: f64| {
            let pts = split((1.0 - x * x).max(0.0).sqrt(), x);
            pts.windows(2)
                .map(|s| rule(s[0], s[1], &|y| y.powi(b) * w.evaluate((x * x + y * y).sqrt())))
                .sum::<f64>()
                * x.powi(a)
        };
        let mut outer = vec![-1.0, 0.0, 1.0];
        outer.extend(breaks.iter().flat_map(|&r| [-r, r]));
        outer.sort_by(f64::total_cmp);
        outer.windows(2).map(|s| rule(s[0], s[1], &inner)).sum()
    }

    #[test]
    fn radial_reduction_matches_tensor_quadrature() {
        for name in ["I1", "I2", "I3", "G1", "G2", "G3", "L1", "L2", "L3"] {
            let w = catalog_weight(name).unwrap();
            let n = w.moment_order as i32;
            assert!((tensor_moment(&w, 0, 0) - 1.0).abs() < 1e-6, "{name} mass");
            for order in 1..=n + 1 {
                for a in 0..=order {
                    let b = order - a;
                    let m = tensor_moment(&w, a, b);
                    if a % 2 == 1 || b % 2 == 1 {
                        assert!(m.abs() < 1e-6, "{name} x^{a} y^{b}: {m}");
                    }
                }
                if order % 2 == 0 {
                    // |x|^(2j) = sum_k C(j, k) x^(2k) y^(2j - 2k)
                    let j = order / 2;
                    let mut binom = 1.0;
                    let mut sum = 0.0;
                    for k in 0..=j {
                        sum += binom * tensor_moment(&w, 2 * k, 2 * (j - k));
                        binom = binom * (j - k) as f64 / (k + 1) as f64;
                    }
                    let radial = check_moment_order(&w, order as u32).residuals[j as usize - 1];
                    assert!((sum - radial).abs() < 1e-6, "{name} |x|^{order}: {sum} vs {radial}");
                }
            }
        }
    }

    #[test]
    fn classic_mps_is_not_admissible() {
        let r = check_admissible(&catalog_weight("mps-classic").unwrap());
        assert!(!r.continuous);
        assert!(!r.admissible());
    }

    #[test]
    fn zero_function_fails() {
        let zero = RadialWeight::polynomial("zero", 2, 1.0, vec![0.0]).unwrap();
        let r = check_admissible(&zero);
        assert!(!r.unit_mass);
        assert!(!r.support);
        assert!(!r.admissible());
    }

    #[test]
    fn discontinuous_or_nonvanishing_edge_fails() {
        // constant on [0, 1): jumps to 0 at r = 1
        let flat = RadialWeight::polynomial("flat", 2, 1.0 / PI, vec![1.0]).unwrap();
        let r = check_admissible(&flat);
        assert!(r.unit_mass && !r.support);
        let jump = RadialWeight::new(
            "jump",
            2,
            1.0,
            vec![
                Piece::polynomial(0.0, 0.5, vec![1.0]),
                Piece::polynomial(0.5, 1.0, vec![1.5, -1.5]),
            ],
            1,
            None,
        )
        .unwrap()
        .normalized();
        assert!(!check_admissible(&jump).continuous);
    }

    #[test]
    fn moment_order_examples() {
        let i3 = catalog_weight("I3").unwrap();
        let rep = check_moment_order(&i3, 3);
        assert!(rep.passed);
        assert_eq!(rep.residuals.len(), 1);
        assert!(rep.residuals[0].abs() < 1e-12);

        let i1 = catalog_weight("I1").unwrap();
        let rep = check_moment_order(&i1, 3);
        assert!(!rep.passed);
        // 2 pi * (3 / pi) * int r^3 (1 - r) = 6 / 20
        assert!((rep.residuals[0] - 2.0 * PI * (3.0 / PI) / 20.0).abs() < 1e-14);

        for name in ["I1", "I2", "G1", "L2"] {
            let rep = check_moment_order(&catalog_weight(name).unwrap(), 1);
            assert!(rep.passed && rep.residuals.is_empty());
        }
    }

    #[test]
    fn smoothness_examples() {
        let g1 = catalog_weight("G1").unwrap();
        assert!(check_smoothness_order(&g1, 0).passed);
        assert!(!check_smoothness_order(&g1, 1).passed);
        assert_eq!(check_smoothness_order(&g1, 0).lowest_degree, Some(1));
        let l1 = catalog_weight("L1").unwrap();
        assert!(check_smoothness_order(&l1, 1).passed);
        let i1 = catalog_weight("I1").unwrap();
        let rep = check_smoothness_order(&i1, 0);
        assert!(!rep.passed);
        assert_eq!(rep.lowest_degree, Some(0));
    }

    #[test]
    fn kinked_interior_break_fails_smoothness() {
        // r^2 on [0, 1/2), continuous but with a derivative jump at 1/2
        let w = RadialWeight::new(
            "kink",
            2,
            1.0,
            vec![
                Piece::polynomial(0.0, 0.5, vec![0.0, 0.0, 1.0]),
                Piece::polynomial(0.5, 1.0, vec![0.5, -0.5]),
            ],
            1,
            None,
        )
        .unwrap();
        let rep = check_smoothness_order(&w, 1);
        assert!(!rep.c1_interior && !rep.passed);
    }
}
