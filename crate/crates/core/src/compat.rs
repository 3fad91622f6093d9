//! SPH and MPS operators in their native parameterization, and checks that
//! they coincide with the generalized operators under the weight/volume
//! mapping.
//!
//! SPH: `V_i = m_i / rho_i`, generalized weight `w = -(r / d) w_sph'`.
//! MPS: `V_i = 1 / n`, gradient weight `w_mps`, Laplacian weight
//! `r^2 w_mps / lambda`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::ParticleSystem;
use crate::operators::{FieldSamples, Operators};
use crate::weights::{
    catalog_weight, check_admissible, check_smoothness_order, mps_laplacian_transform, sph_transform, Piece,
    RadialWeight,
};

pub use crate::weights::mps_lambda;

/// Masses and densities of an SPH particle set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SphParams {
    pub masses: Vec<f64>,
    pub densities: Vec<f64>,
}

impl SphParams {
    /// Checks positivity and `sum m_i / rho_i = domain_volume` to `1e-12`.
    pub fn new(masses: Vec<f64>, densities: Vec<f64>, domain_volume: f64) -> Result<Self> {
        if masses.len() != densities.len() {
            return Err(Error::InvalidArgument("masses and densities differ in length".into()));
        }
        if masses.iter().chain(&densities).any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidArgument("masses and densities must be positive".into()));
        }
        let p = Self { masses, densities };
        let total: f64 = p.volumes().iter().sum();
        if ((total - domain_volume) / domain_volume).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "sum of m/rho is {total}, domain measure is {domain_volume}"
            )));
        }
        Ok(p)
    }

    /// `V_i = m_i / rho_i`.
    pub fn volumes(&self) -> Vec<f64> {
        self.masses.iter().zip(&self.densities).map(|(m, r)| m / r).collect()
    }
}

/// Reference number density `n` and second moment `lambda` of an MPS weight.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MpsParams {
    pub n_hat: f64,
    /// `int |x|^2 w_mps(|x|) dx` for the unscaled profile; the operators use
    /// `h^2 lambda`, the same moment of `w_mps,h`.
    pub lambda_hat: f64,
}

impl MpsParams {
    pub fn new(n_hat: f64, lambda_hat: f64) -> Result<Self> {
        if !(n_hat > 0.0 && lambda_hat > 0.0 && n_hat.is_finite() && lambda_hat.is_finite()) {
            return Err(Error::InvalidArgument("MPS parameters must be positive".into()));
        }
        Ok(Self { n_hat, lambda_hat })
    }

    /// `n = N / |Omega_H|`, `lambda = int |x|^2 w_mps`.
    pub fn canonical(n: usize, domain_volume: f64, w_mps: &RadialWeight) -> Result<Self> {
        Self::new(n as f64 / domain_volume, mps_lambda(w_mps, w_mps.dim))
    }
}

fn offset(coords: &[f64], dim: usize, i: usize, x: &[f64]) -> (Vec<f64>, f64) {
    let d: Vec<f64> = (0..dim).map(|k| x[k] - coords[i * dim + k]).collect();
    let r = d.iter().map(|v| v * v).sum::<f64>().sqrt();
    (d, r)
}

/// `sum_i (m_i / rho_i) f(x_i) w_h(|x - x_i|)`.
pub fn sph_interpolant(coords: &[f64], p: &SphParams, w_sph: &RadialWeight, h: f64, f: &[f64], x: &[f64]) -> f64 {
    let dim = w_sph.dim;
    let k = w_sph.scaled_kernel(h);
    let mut acc = 0.0;
    for i in 0..f.len() {
        let (_, r) = offset(coords, dim, i, x);
        if r < h {
            acc += p.masses[i] / p.densities[i] * f[i] * k.eval(r);
        }
    }
    acc
}

/// `sum_i (m_i / rho_i) (f(x_i) - f(x)) grad w_h(|x - x_i|)` with
/// `grad w_h = w_h'(r) (x - x_i) / r`, over `0 < r < h`.
pub fn sph_gradient(
    coords: &[f64],
    p: &SphParams,
    w_sph: &RadialWeight,
    h: f64,
    f: &[f64],
    fx: f64,
    x: &[f64],
) -> Vec<f64> {
    let dim = w_sph.dim;
    let dk = w_sph.scaled_derivative_kernel(h);
    let mut acc = vec![0.0; dim];
    for i in 0..f.len() {
        let (d, r) = offset(coords, dim, i, x);
        if r > 0.0 && r < h {
            let s = p.masses[i] / p.densities[i] * (f[i] - fx) * dk.eval(r) / r;
            for k in 0..dim {
                acc[k] += s * d[k];
            }
        }
    }
    acc
}

/// `2 sum_i (m_i / rho_i) (f(x) - f(x_i)) / r (x - x_i) / r . grad w_h`, over
/// `0 < r < h`.
pub fn sph_laplacian(
    coords: &[f64],
    p: &SphParams,
    w_sph: &RadialWeight,
    h: f64,
    f: &[f64],
    fx: f64,
    x: &[f64],
) -> f64 {
    let dim = w_sph.dim;
    let dk = w_sph.scaled_derivative_kernel(h);
    let mut acc = 0.0;
    for i in 0..f.len() {
        let (_, r) = offset(coords, dim, i, x);
        if r > 0.0 && r < h {
            // (x - x_i)/r . (x - x_i)/r w_h'(r) = w_h'(r)
            acc += p.masses[i] / p.densities[i] * (fx - f[i]) / r * dk.eval(r);
        }
    }
    2.0 * acc
}

/// `(d / n) sum_{j} (f_j - f(x)) / r (x_j - x) / r w_mps,h(r)`, over `0 < r < h`.
pub fn mps_gradient(
    coords: &[f64],
    p: &MpsParams,
    w_mps: &RadialWeight,
    h: f64,
    f: &[f64],
    fx: f64,
    x: &[f64],
) -> Vec<f64> {
    let dim = w_mps.dim;
    let k = w_mps.scaled_kernel(h);
    let mut acc = vec![0.0; dim];
    for j in 0..f.len() {
        let (d, r) = offset(coords, dim, j, x);
        if r > 0.0 && r < h {
            let s = (f[j] - fx) / (r * r) * k.eval(r);
            for c in 0..dim {
                acc[c] -= s * d[c];
            }
        }
    }
    let pre = dim as f64 / p.n_hat;
    acc.iter().map(|v| pre * v).collect()
}

/// `2d / (n h^2 lambda) sum_j (f_j - f(x)) w_mps,h(r)`, over `0 < r < h`.
pub fn mps_laplacian(
    coords: &[f64],
    p: &MpsParams,
    w_mps: &RadialWeight,
    h: f64,
    f: &[f64],
    fx: f64,
    x: &[f64],
) -> f64 {
    let dim = w_mps.dim;
    let k = w_mps.scaled_kernel(h);
    let mut acc = 0.0;
    for j in 0..f.len() {
        let (_, r) = offset(coords, dim, j, x);
        if r > 0.0 && r < h {
            acc += (f[j] - fx) * k.eval(r);
        }
    }
    2.0 * dim as f64 / (p.n_hat * p.lambda_hat * h * h) * acc
}

/// Whether the MPS gradient with `w_mps` falls under the convergence theory
/// (admissible and smoothness order 0).
pub fn mps_gradient_covered(w_mps: &RadialWeight) -> bool {
    check_admissible(w_mps).admissible() && check_smoothness_order(w_mps, 0).passed
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SphConditionReport {
    /// Twice continuously differentiable on `[0, inf)`, including `r = 1`.
    pub c2: bool,
    /// `w' < 0` on `(0, 1)`, checked on a dense sample.
    pub decreasing: bool,
    /// `w'(s) / s` bounded as `s -> 0`.
    pub finite_ratio_at_origin: bool,
}

impl SphConditionReport {
    pub fn passed(&self) -> bool {
        self.c2 && self.decreasing && self.finite_ratio_at_origin
    }
}

/// Conditions on an SPH kernel under which its operators are covered.
pub fn check_sph_conditions(w: &RadialWeight) -> SphConditionReport {
    let first = &w.pieces[0];
    let regular_at_origin = first.lowest_power >= 0;
    let d1: Vec<Piece> = w.pieces.iter().map(Piece::derivative).collect();
    let d2: Vec<Piece> = d1.iter().map(Piece::derivative).collect();
    let tol = 1e-9;
    let mut c2 = regular_at_origin;
    for k in 0..w.pieces.len() {
        let end = w.pieces[k].end;
        let (v, a, b) = (w.pieces[k].eval(end), d1[k].eval(end), d2[k].eval(end));
        let (nv, na, nb) = match w.pieces.get(k + 1) {
            Some(next) => (next.eval(end), d1[k + 1].eval(end), d2[k + 1].eval(end)),
            None => (0.0, 0.0, 0.0),
        };
        let scale = v.abs().max(a.abs()).max(b.abs()).max(1.0);
        if (v - nv).abs() > tol * scale || (a - na).abs() > tol * scale || (b - nb).abs() > tol * scale {
            c2 = false;
        }
    }
    let samples = 4096;
    let decreasing = (1..samples).all(|i| w.derivative(i as f64 / samples as f64) < 0.0);
    // w'(s)/s bounded iff the linear coefficient vanishes (and no negative powers)
    let linear = if regular_at_origin {
        let idx = 1 - first.lowest_power;
        if idx >= 0 {
            first.coefficients.get(idx as usize).copied().unwrap_or(0.0)
        } else {
            0.0
        }
    } else {
        f64::INFINITY
    };
    SphConditionReport {
        c2,
        decreasing,
        finite_ratio_at_origin: regular_at_origin && linear == 0.0,
    }
}

/// Outcome of one native-versus-generalized comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceCheck {
    pub name: String,
    pub max_abs_diff: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Absolute tolerance of the equivalence checks.
pub const EQUIVALENCE_TOL: f64 = 1e-13;

/// Random quadratic `c0 + c1 x + c2 y + c3 x^2 + c4 xy + c5 y^2`.
fn random_quadratic(rng: &mut ChaCha8Rng) -> [f64; 6] {
    let mut c = [0.0; 6];
    for v in &mut c {
        *v = rng.gen_range(-1.0..1.0);
    }
    c
}

fn eval_quadratic(c: &[f64; 6], x: &[f64]) -> f64 {
    c[0] + c[1] * x[0] + c[2] * x[1] + c[3] * x[0] * x[0] + c[4] * x[0] * x[1] + c[5] * x[1] * x[1]
}

/// Runs the five SPH/MPS equivalences on `configs` random 2D configurations
/// of `n` particles in the unit square, using the cubic B-spline for SPH and
/// the classic `1/r - 1` profile for MPS.
pub fn equivalence_report(seed: u64, configs: usize, n: usize) -> Result<Vec<EquivalenceCheck>> {
    let spline = catalog_weight("spline2d")?;
    let sph_general = sph_transform(&spline)?;
    let mps = catalog_weight("mps-classic")?;
    let (mps_lap_general, _) = mps_laplacian_transform(&mps, 2)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = [0.0f64; 5];
    let domain_volume = 1.0;

    for _ in 0..configs {
        let coords: Vec<f64> = (0..2 * n).map(|_| rng.gen_range(0.0..1.0)).collect();
        let h = rng.gen_range(0.25..0.5);
        let coeffs = random_quadratic(&mut rng);
        let f: Vec<f64> = coords.chunks_exact(2).map(|p| eval_quadratic(&coeffs, p)).collect();

        let masses: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..1.5)).collect();
        let raw_rho: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..1.5)).collect();
        let total: f64 = masses.iter().zip(&raw_rho).map(|(m, r)| m / r).sum();
        let densities: Vec<f64> = raw_rho.iter().map(|r| r * total / domain_volume).collect();
        let sph = SphParams::new(masses, densities, domain_volume)?;
        let mps_params = MpsParams::canonical(n, domain_volume, &mps)?;

        let ps_sph = ParticleSystem::from_parts(2, coords.clone(), sph.volumes(), h)?;
        let ps_mps = ParticleSystem::from_parts(2, coords.clone(), vec![1.0 / mps_params.n_hat; n], h)?;
        let samples = FieldSamples::new(f.clone());
        let op_interp = Operators::new(&ps_sph, &spline)?;
        let op_sph = Operators::new(&ps_sph, &sph_general)?;
        let op_mps_grad = Operators::new(&ps_mps, &mps)?;
        let op_mps_lap = Operators::new(&ps_mps, &mps_lap_general)?;

        // evaluation points: random points and a few particles
        let mut points: Vec<Vec<f64>> = (0..4)
            .map(|_| vec![rng.gen_range(0.1..0.9), rng.gen_range(0.1..0.9)])
            .collect();
        points.extend((0..2).map(|k| coords[2 * k..2 * k + 2].to_vec()));
        for x in &points {
            let fx = eval_quadratic(&coeffs, x);
            let with_center = FieldSamples {
                values: f.clone(),
                analytic: None,
            };
            let center = |ops: &Operators, kind| -> Result<Vec<f64>> {
                match ops.apply(kind, &with_center, x) {
                    Err(Error::MissingCenterValue) => {
                        let field = std::sync::Arc::new(Quadratic(coeffs));
                        ops.apply(
                            kind,
                            &FieldSamples {
                                values: f.clone(),
                                analytic: Some(field),
                            },
                            x,
                        )
                    }
                    other => other,
                }
            };
            use crate::operators::OperatorKind::*;

            let a = sph_interpolant(&coords, &sph, &spline, h, &f, x);
            let b = op_interp.interpolate(&samples, x)?;
            worst[0] = worst[0].max((a - b).abs());

            let a = sph_gradient(&coords, &sph, &spline, h, &f, fx, x);
            let b = center(&op_sph, Grad)?;
            worst[1] = worst[1].max((a[0] - b[0]).abs()).max((a[1] - b[1]).abs());

            let a = sph_laplacian(&coords, &sph, &spline, h, &f, fx, x);
            let b = center(&op_sph, Lap)?;
            worst[2] = worst[2].max((a - b[0]).abs());

            let a = mps_gradient(&coords, &mps_params, &mps, h, &f, fx, x);
            let b = center(&op_mps_grad, Grad)?;
            worst[3] = worst[3].max((a[0] - b[0]).abs()).max((a[1] - b[1]).abs());

            let a = mps_laplacian(&coords, &mps_params, &mps, h, &f, fx, x);
            let b = center(&op_mps_lap, Lap)?;
            worst[4] = worst[4].max((a - b[0]).abs());
        }
    }

    let names = [
        "sph interpolant",
        "sph gradient",
        "sph laplacian",
        "mps gradient",
        "mps laplacian",
    ];
    Ok(names
        .iter()
        .zip(worst)
        .map(|(name, d)| EquivalenceCheck {
            name: name.to_string(),
            max_abs_diff: d,
            tolerance: EQUIVALENCE_TOL,
            passed: d <= EQUIVALENCE_TOL,
        })
        .collect())
}

struct Quadratic([f64; 6]);

impl crate::operators::AnalyticField for Quadratic {
    fn value(&self, x: &[f64]) -> f64 {
        eval_quadratic(&self.0, x)
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let c = &self.0;
        vec![
            c[1] + 2.0 * c[3] * x[0] + c[4] * x[1],
            c[2] + c[4] * x[0] + 2.0 * c[5] * x[1],
        ]
    }

    fn laplacian(&self, _: &[f64]) -> f64 {
        2.0 * (self.0[3] + self.0[5])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Ratio;
    use std::f64::consts::PI;

    #[test]
    fn five_equivalences() {
        let report = equivalence_report(11, 100, 50).unwrap();
        assert_eq!(report.len(), 5);
        for c in &report {
            assert!(c.passed, "{}: {:e}", c.name, c.max_abs_diff);
        }
    }

    #[test]
    fn transform_of_spline_is_g2_in_rationals() {
        let t = sph_transform(&catalog_weight("spline2d").unwrap()).unwrap();
        let g2 = catalog_weight("G2").unwrap();
        for (a, b) in t.pieces.iter().zip(&g2.pieces) {
            let ra: Vec<Ratio<i64>> = a
                .coefficients
                .iter()
                .map(|&c| Ratio::approximate_float(c).unwrap())
                .collect();
            let rb: Vec<Ratio<i64>> = b
                .coefficients
                .iter()
                .map(|&c| Ratio::approximate_float(c).unwrap())
                .collect();
            assert_eq!(ra, rb);
            assert_eq!((a.start, a.end), (b.start, b.end));
        }
        // the transformed linear-order coefficients on [0, 1/2): 6 r^2 - 9 r^3
        let first: Vec<Ratio<i64>> = t.pieces[0]
            .coefficients
            .iter()
            .map(|&c| Ratio::approximate_float(c).unwrap())
            .collect();
        assert_eq!(
            first,
            vec![
                Ratio::from_integer(0),
                Ratio::from_integer(0),
                Ratio::from_integer(6),
                Ratio::from_integer(-9)
            ]
        );
        assert_eq!(t.scale, g2.scale);
    }

    #[test]
    fn constant_field_gives_zero() {
        let coords = vec![0.1, 0.2, 0.3, 0.25, 0.2, 0.1];
        let f = vec![2.0; 3];
        let sph = SphParams::new(vec![1.0; 3], vec![3.0; 3], 1.0).unwrap();
        let spline = catalog_weight("spline2d").unwrap();
        let x = [0.2, 0.2];
        assert_eq!(sph_gradient(&coords, &sph, &spline, 0.4, &f, 2.0, &x), vec![0.0, 0.0]);
        assert_eq!(sph_laplacian(&coords, &sph, &spline, 0.4, &f, 2.0, &x), 0.0);
        let mps = catalog_weight("mps-classic").unwrap();
        let p = MpsParams::canonical(3, 1.0, &mps).unwrap();
        assert_eq!(mps_gradient(&coords, &p, &mps, 0.4, &f, 2.0, &x), vec![0.0, 0.0]);
        assert_eq!(mps_laplacian(&coords, &p, &mps, 0.4, &f, 2.0, &x), 0.0);
    }

    #[test]
    fn params_are_validated() {
        assert!(SphParams::new(vec![1.0, 1.0], vec![2.0, 2.0], 1.0).is_ok());
        assert!(SphParams::new(vec![1.0, 1.0], vec![2.0, 1.0], 1.0).is_err());
        assert!(SphParams::new(vec![1.0], vec![-1.0], -1.0).is_err());
        assert!(MpsParams::new(0.0, 1.0).is_err());
        let p = MpsParams::canonical(1521, 1.44, &catalog_weight("mps-classic").unwrap()).unwrap();
        assert!((p.n_hat - 1521.0 / 1.44).abs() < 1e-9);
        assert!((p.lambda_hat - PI / 6.0).abs() < 1e-14);
    }

    #[test]
    fn lambda_of_spline_by_tensor_quadrature() {
        let s = catalog_weight("spline2d").unwrap();
        // product Gauss rule on [-1, 1]^2, split at |x| = 1/2 is not aligned with the
        // square, so use many cells
        let (xs, ws) = crate::weights::quadrature::gauss_legendre(12);
        let cells = 64;
        let hcell = 2.0 / cells as f64;
        let mut acc = 0.0;
        for a in 0..cells {
            for b in 0..cells {
                let (x0, y0) = (-1.0 + a as f64 * hcell, -1.0 + b as f64 * hcell);
                for (xi, wi) in xs.iter().zip(&ws) {
                    for (yj, wj) in xs.iter().zip(&ws) {
                        let x = x0 + 0.5 * hcell * (xi + 1.0);
                        let y = y0 + 0.5 * hcell * (yj + 1.0);
                        let r2 = x * x + y * y;
                        acc += wi * wj * 0.25 * hcell * hcell * r2 * s.evaluate(r2.sqrt());
                    }
                }
            }
        }
        assert!((mps_lambda(&s, 2) - acc).abs() < 1e-8, "{} vs {acc}", mps_lambda(&s, 2));
    }

    #[test]
    fn sph_condition_checker() {
        assert!(check_sph_conditions(&catalog_weight("spline2d").unwrap()).passed());
        let i3 = check_sph_conditions(&catalog_weight("I3").unwrap());
        assert!(!i3.decreasing && !i3.passed());
        // the hat 1 - r has w'(s)/s unbounded and is not C^1 at 1
        let hat = check_sph_conditions(&catalog_weight("I1").unwrap());
        assert!(!hat.finite_ratio_at_origin && !hat.c2);
        let g1 = check_sph_conditions(&catalog_weight("G1").unwrap());
        assert!(!g1.passed());
    }

    #[test]
    fn mps_coverage_flags() {
        assert!(!mps_gradient_covered(&catalog_weight("mps-classic").unwrap()));
        assert!(mps_gradient_covered(&catalog_weight("G1").unwrap()));
        assert!(!mps_gradient_covered(&catalog_weight("I1").unwrap()));
    }
}
