use super::quadrature::sphere_measure;
use super::{Piece, RadialWeight};
use crate::error::{Error, Result};

/// `w(r) = -(r / d) w_sph'(r)`: the weight for which the generalized
/// gradient and Laplacian reproduce the SPH kernel-gradient forms. Mass is
/// preserved by integration by parts.
pub fn sph_transform(w_sph: &RadialWeight) -> Result<RadialWeight> {
    for (r, jump) in w_sph.interior_derivative_jumps() {
        if jump.abs() > 1e-9 * w_sph.derivative(r).abs().max(1.0) {
            return Err(Error::InvalidWeight(format!(
                "{} is not differentiable at r = {r} (derivative jump {jump})",
                w_sph.name
            )));
        }
    }
    let d = w_sph.dim as f64;
    let pieces = w_sph
        .pieces
        .iter()
        .map(|p| {
            let coefficients = p
                .coefficients
                .iter()
                .enumerate()
                .map(|(m, c)| -((p.lowest_power + m as i32) as f64) / d * c)
                .collect();
            Piece {
                coefficients,
                ..p.clone()
            }
        })
        .collect();
    RadialWeight::new(format!("sph({})", w_sph.name), w_sph.dim, w_sph.scale, pieces, 1, None)
}

/// `lambda = int_{R^d} |x|^2 w_mps(|x|) dx`.
pub fn mps_lambda(w_mps: &RadialWeight, dim: usize) -> f64 {
    sphere_measure(dim) * w_mps.radial_moment(dim as i32 + 1)
}

/// `w(r) = r^2 w_mps(r) / lambda` together with `lambda`. The result has
/// unit mass by construction and is bounded even for the singular
/// `1/r - 1` profile.
pub fn mps_laplacian_transform(w_mps: &RadialWeight, dim: usize) -> Result<(RadialWeight, f64)> {
    let lambda = mps_lambda(w_mps, dim);
    if !(lambda.is_finite() && lambda != 0.0) {
        return Err(Error::InvalidWeight(format!(
            "second moment of {} is {lambda}",
            w_mps.name
        )));
    }
    let pieces = w_mps.pieces.iter().map(|p| p.shifted(2)).collect();
    let w = RadialWeight::new(
        format!("mps-lap({})", w_mps.name),
        dim,
        w_mps.scale / lambda,
        pieces,
        1,
        None,
    )?;
    Ok((w, lambda))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::{catalog_weight, check_admissible, construct_polynomial_weight};
    use std::f64::consts::PI;

    #[test]
    fn cubic_spline_maps_to_g2() {
        let t = sph_transform(&catalog_weight("spline2d").unwrap()).unwrap();
        let g2 = catalog_weight("G2").unwrap();
        assert_eq!(t.scale, g2.scale);
        assert_eq!(t.pieces, g2.pieces);
    }

    #[test]
    fn transform_preserves_mass_and_admissibility() {
        for w in [
            catalog_weight("I2").unwrap(),
            construct_polynomial_weight(2, 1, 3).unwrap(),
        ] {
            let t = sph_transform(&w).unwrap();
            assert!((t.mass() - 1.0).abs() < 1e-10);
            assert!(check_admissible(&t).admissible(), "{}", t.name);
            assert_eq!(t.evaluate(1.2), 0.0);
        }
    }

    #[test]
    fn kinked_input_rejected() {
        // the linear hat is C^0 only at... nothing interior; build a kinked one
        let kinked = RadialWeight::new(
            "kinked",
            2,
            1.0,
            vec![
                Piece::polynomial(0.0, 0.5, vec![1.0, -1.0]),
                Piece::polynomial(0.5, 1.0, vec![1.0, -1.0]),
            ],
            1,
            None,
        )
        .unwrap();
        assert!(sph_transform(&kinked).is_ok());
        let kinked = RadialWeight::new(
            "kinked",
            2,
            1.0,
            vec![
                Piece::polynomial(0.0, 0.5, vec![1.0, -0.5]),
                Piece::polynomial(0.5, 1.0, vec![1.5, -1.5]),
            ],
            1,
            None,
        )
        .unwrap();
        assert!(sph_transform(&kinked).is_err());
    }

    #[test]
    fn classic_mps_laplacian_weight() {
        let mps = catalog_weight("mps-classic").unwrap();
        let (w, lambda) = mps_laplacian_transform(&mps, 2).unwrap();
        assert!((lambda - PI / 6.0).abs() < 1e-14);
        assert!((lambda - 0.5235988).abs() < 1e-7);
        // (6 / pi)(r - r^2)
        for r in [0.0, 0.2, 0.7] {
            assert!((w.evaluate(r) - 6.0 / PI * (r - r * r)).abs() < 1e-14);
        }
        assert!(check_admissible(&w).admissible());
    }

    #[test]
    fn lambda_scales_linearly_and_is_positive() {
        let s = catalog_weight("spline2d").unwrap();
        let l = mps_lambda(&s, 2);
        assert!(l > 0.0);
        let doubled = RadialWeight {
            scale: 2.5 * s.scale,
            ..s.clone()
        };
        assert!((mps_lambda(&doubled, 2) - 2.5 * l).abs() < 1e-14);
        let (w, _) = mps_laplacian_transform(&s, 2).unwrap();
        assert!(check_admissible(&w).admissible());
    }
}
