use nalgebra::{DMatrix, DVector};

use super::{Piece, RadialWeight};
use crate::error::{Error, Result};

/// Builds `w(r) = gamma (1 + sum_{l=1}^p a_l r^l)` on `[0, 1)` with
/// `w(1) = 0`, `w'(1) = 0` and vanishing moments up to order `n` in `R^d`.
///
/// The coefficient system has `2 + floor(n/2)` rows; when `p` exceeds that the
/// minimum-norm solution is taken. `gamma` is then fixed by quadrature so the
/// weight has unit mass.
pub fn construct_polynomial_weight(dim: usize, n: u32, p: usize) -> Result<RadialWeight> {
    if dim == 0 || n == 0 {
        return Err(Error::InvalidArgument(
            "dimension and moment order must be positive".into(),
        ));
    }
    let moments = (n / 2) as usize;
    let rows = 2 + moments;
    if p < rows {
        return Err(Error::InvalidArgument(format!(
            "degree p = {p} is too small for moment order {n}; need p >= {rows}"
        )));
    }

    let d = dim as f64;
    let mut a = DMatrix::<f64>::zeros(rows, p);
    let mut b = DVector::<f64>::zeros(rows);
    // w(1) = 0
    for l in 1..=p {
        a[(0, l - 1)] = 1.0;
    }
    b[0] = -1.0;
    // w'(1) = 0
    for l in 1..=p {
        a[(1, l - 1)] = l as f64;
    }
    // int_0^1 r^(d+2j-1) w(r) dr = 0, scaled by (d + 2j)
    for j in 1..=moments {
        let m = d + 2.0 * j as f64;
        for l in 1..=p {
            a[(1 + j, l - 1)] = m / (m + l as f64);
        }
        b[1 + j] = -1.0;
    }

    let svd = a.clone().svd(true, true);
    let sol = svd.solve(&b, 1e-12).map_err(|_| Error::WeightSystem("singular"))?;
    let residual = (&a * &sol - &b).amax();
    if !(residual <= 1e-9) {
        return Err(Error::WeightSystem("inconsistent"));
    }

    let mut coefficients = Vec::with_capacity(p + 1);
    coefficients.push(1.0);
    coefficients.extend(sol.iter().copied());
    let shape = RadialWeight::new(
        format!("poly-d{dim}-n{n}-p{p}"),
        dim,
        1.0,
        vec![Piece::polynomial(0.0, 1.0, coefficients)],
        n,
        None,
    )?;
    let mass = shape.mass();
    if !(mass.is_finite() && mass != 0.0) {
        return Err(Error::WeightSystem("degenerate (zero mass)"));
    }
    Ok(RadialWeight {
        scale: 1.0 / mass,
        ..shape
    })
}
