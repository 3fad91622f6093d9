use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::RectDomain;
use crate::error::{Error, Result};

/// Randomly perturbed lattice `((i + eta_1) dx, (j + eta_2) dx)` over the
/// lattice sites `(i dx, j dx)` that lie in the open extended box, with every
/// `eta` drawn uniformly from `[-noise, noise)`. A coordinate pushed out of
/// the box is redrawn, so the count equals the number of sites and `eta` is
/// uniform conditioned on staying inside.
///
/// Sites are visited in lexicographic lattice order (first axis outermost),
/// so the output is a pure function of `(dx, noise, seed, domain)`.
pub fn perturbed_lattice(dx: f64, noise: f64, seed: u64, domain: &RectDomain) -> Result<Vec<f64>> {
    if !(dx.is_finite() && dx > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "lattice spacing must be positive, got {dx}"
        )));
    }
    if !(0.0..0.5).contains(&noise) {
        return Err(Error::InvalidArgument(format!(
            "noise bound must lie in [0, 1/2), got {noise}"
        )));
    }
    let dim = domain.dim();
    let ext = domain.extended();
    let ranges: Vec<(i64, i64)> = (0..dim)
        .map(|k| {
            let mut lo = (ext.lower[k] / dx).floor() as i64;
            while lo as f64 * dx <= ext.lower[k] {
                lo += 1;
            }
            let mut hi = (ext.upper[k] / dx).ceil() as i64;
            while hi as f64 * dx >= ext.upper[k] {
                hi -= 1;
            }
            (lo, hi)
        })
        .collect();
    if ranges.iter().any(|r| r.0 > r.1) {
        return Ok(Vec::new());
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx: Vec<i64> = ranges.iter().map(|r| r.0).collect();
    let mut point = vec![0.0; dim];
    let mut out = Vec::new();
    'sites: loop {
        for k in 0..dim {
            point[k] = idx[k] as f64 * dx;
            if noise > 0.0 {
                loop {
                    let c = (idx[k] as f64 + rng.gen_range(-noise..noise)) * dx;
                    if c > ext.lower[k] && c < ext.upper[k] {
                        point[k] = c;
                        break;
                    }
                }
            }
        }
        out.extend_from_slice(&point);
        let mut k = dim;
        loop {
            if k == 0 {
                break 'sites;
            }
            k -= 1;
            if idx[k] < ranges[k].1 {
                idx[k] += 1;
                break;
            }
            idx[k] = ranges[k].0;
        }
    }
    Ok(out)
}

/// `n` equal volumes `|Omega_H| / n`.
pub fn uniform_volumes(n: usize, domain: &RectDomain) -> Vec<f64> {
    assert!(n > 0, "need at least one particle");
    vec![domain.extended_volume() / n as f64; n]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> RectDomain {
        RectDomain::unit_cube(2, 0.1).unwrap()
    }

    #[test]
    fn coarsest_level_count() {
        let pts = perturbed_lattice(2f64.powi(-5), 0.25, 7, &square()).unwrap();
        assert_eq!(pts.len() / 2, 1521);
        for seed in 0..20 {
            let pts = perturbed_lattice(2f64.powi(-5), 0.25, seed, &square()).unwrap();
            assert_eq!(pts.len() / 2, 1521);
            assert!(pts.iter().all(|&c| c > -0.1 && c < 1.1));
        }
    }

    #[test]
    fn noise_free_lattice_is_exact() {
        let dx = 2f64.powi(-4);
        let pts = perturbed_lattice(dx, 0.0, 0, &square()).unwrap();
        for c in &pts {
            let k = c / dx;
            assert_eq!(k, k.round());
        }
        // i = -1 ..= 17 covers (-0.1, 1.1) at dx = 1/16
        let n_axis = 19;
        assert_eq!(pts[0], -dx);
        assert_eq!(pts.len() / 2, n_axis * n_axis);
        assert_eq!(pts[2 * n_axis] - pts[0], dx);
    }

    #[test]
    fn deterministic_per_seed() {
        let a = perturbed_lattice(0.05, 0.25, 99, &square()).unwrap();
        let b = perturbed_lattice(0.05, 0.25, 99, &square()).unwrap();
        let c = perturbed_lattice(0.05, 0.25, 100, &square()).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn minimum_gap_bound() {
        let dx = 0.04;
        let b = 0.25;
        let pts = perturbed_lattice(dx, b, 5, &square()).unwrap();
        let n = pts.len() / 2;
        let mut min_gap = f64::INFINITY;
        for i in 0..n {
            for j in i + 1..n {
                let d = ((pts[2 * i] - pts[2 * j]).powi(2) + (pts[2 * i + 1] - pts[2 * j + 1]).powi(2)).sqrt();
                min_gap = min_gap.min(d);
            }
        }
        assert!(min_gap >= (1.0 - 2.0 * b) * dx);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(perturbed_lattice(0.0, 0.1, 0, &square()).is_err());
        assert!(perturbed_lattice(0.1, 0.5, 0, &square()).is_err());
    }

    #[test]
    fn uniform_volume_values() {
        let v = uniform_volumes(1521, &square());
        assert!((v[0] - 1.44 / 1521.0).abs() < 1e-17);
        assert!((v[0] - 9.4675e-4).abs() < 1e-8);
        let total: f64 = v.iter().sum();
        assert!((total - 1.44).abs() <= 1521.0 * f64::EPSILON * 1.44);
        assert_eq!(uniform_volumes(1, &square()), vec![square().extended_volume()]);
        assert!((square().extended_volume() - 1.44).abs() < 1e-15);
    }
}
