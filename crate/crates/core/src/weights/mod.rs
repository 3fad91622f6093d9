//! Radial reference weight functions.
//!
//! A weight is `w(r) = scale * p_k(r)` on consecutive pieces `[r_k, r_{k+1})`
//! covering `[0, 1)`, and zero for `r >= 1`. Each piece is a Laurent
//! polynomial `sum_m c_m r^(lowest_power + m)` so that the singular classic
//! MPS profile `1/r - 1` fits the same representation.

mod catalog;
mod checks;
mod construct;
pub mod quadrature;
mod transform;

pub use catalog::{catalog, catalog_weight, Catalog, NormalizationCorrection, CATALOG_NAMES};
pub use checks::{
    check_admissible, check_moment_order, check_smoothness_order, AdmissibilityReport, MomentReport, SmoothnessReport,
    CONTINUITY_TOL, MASS_TOL, MOMENT_TOL,
};
pub use construct::construct_polynomial_weight;
pub use transform::{mps_lambda, mps_laplacian_transform, sph_transform};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use quadrature::{integrate, sphere_measure};

/// One polynomial piece on `[start, end)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    pub start: f64,
    pub end: f64,
    #[serde(default)]
    pub lowest_power: i32,
    pub coefficients: Vec<f64>,
}

impl Piece {
    pub fn polynomial(start: f64, end: f64, coefficients: Vec<f64>) -> Self {
        Self {
            start,
            end,
            lowest_power: 0,
            coefficients,
        }
    }

    pub fn eval(&self, r: f64) -> f64 {
        let horner = self.coefficients.iter().rev().fold(0.0, |acc, c| acc * r + c);
        if self.lowest_power == 0 {
            horner
        } else {
            r.powi(self.lowest_power) * horner
        }
    }

    pub fn derivative(&self) -> Piece {
        let coefficients: Vec<f64> = self
            .coefficients
            .iter()
            .enumerate()
            .map(|(m, c)| (self.lowest_power + m as i32) as f64 * c)
            .collect();
        Piece {
            start: self.start,
            end: self.end,
            lowest_power: self.lowest_power - 1,
            coefficients,
        }
        .trimmed()
    }

    /// Multiplies by `r^shift`.
    pub fn shifted(&self, shift: i32) -> Piece {
        Piece {
            lowest_power: self.lowest_power + shift,
            ..self.clone()
        }
    }

    /// Lowest power with a nonzero coefficient, `None` for the zero piece.
    pub fn lowest_degree(&self) -> Option<i32> {
        self.coefficients
            .iter()
            .position(|&c| c != 0.0)
            .map(|m| self.lowest_power + m as i32)
    }

    /// Drops leading zero coefficients into `lowest_power` and trailing zeros.
    fn trimmed(mut self) -> Piece {
        let lead = self.coefficients.iter().take_while(|&&c| c == 0.0).count();
        if lead == self.coefficients.len() {
            self.coefficients.clear();
            self.lowest_power = 0;
            return self;
        }
        self.coefficients.drain(..lead);
        self.lowest_power += lead as i32;
        while self.coefficients.last() == Some(&0.0) {
            self.coefficients.pop();
        }
        self
    }

    /// `int_start^end r^power p(r) dr`; infinite when the integrand is not
    /// integrable at 0.
    pub fn moment(&self, power: i32) -> f64 {
        let lowest = self.lowest_power + power;
        let singular = self
            .coefficients
            .iter()
            .enumerate()
            .any(|(m, &c)| c != 0.0 && lowest + m as i32 <= -1);
        if singular && self.start == 0.0 {
            return f64::INFINITY;
        }
        if lowest >= 0 {
            // exact for the polynomial degree
            let degree = lowest as usize + self.coefficients.len();
            let n = degree / 2 + 2;
            integrate(|r| r.powi(power) * self.eval(r), self.start, self.end, n)
        } else {
            integrate(|r| r.powi(power) * self.eval(r), self.start, self.end, 48)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialWeight {
    pub name: String,
    pub dim: usize,
    /// Claimed order of vanishing moments.
    pub moment_order: u32,
    /// Claimed smoothness order at the origin, if any.
    pub smooth_order: Option<u32>,
    pub scale: f64,
    pub pieces: Vec<Piece>,
}

impl RadialWeight {
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        scale: f64,
        pieces: Vec<Piece>,
        moment_order: u32,
        smooth_order: Option<u32>,
    ) -> Result<Self> {
        let w = Self {
            name: name.into(),
            dim,
            moment_order,
            smooth_order,
            scale,
            pieces,
        };
        w.validate()?;
        Ok(w)
    }

    /// Single polynomial piece on `[0, 1)`.
    pub fn polynomial(name: impl Into<String>, dim: usize, scale: f64, coefficients: Vec<f64>) -> Result<Self> {
        Self::new(
            name,
            dim,
            scale,
            vec![Piece::polynomial(0.0, 1.0, coefficients)],
            1,
            None,
        )
    }

    /// Structural checks: pieces tile `[0, 1)` in order.
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::InvalidWeight("dimension must be positive".into()));
        }
        if self.pieces.is_empty() {
            return Err(Error::InvalidWeight("no pieces".into()));
        }
        if !self.scale.is_finite() {
            return Err(Error::InvalidWeight("non-finite scale".into()));
        }
        let mut at = 0.0;
        for (k, p) in self.pieces.iter().enumerate() {
            if p.start != at || !(p.end > p.start) {
                return Err(Error::InvalidWeight(format!(
                    "piece {k} spans [{}, {}), expected to start at {at}",
                    p.start, p.end
                )));
            }
            if p.coefficients.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidWeight(format!("piece {k} has a non-finite coefficient")));
            }
            at = p.end;
        }
        if at != 1.0 {
            return Err(Error::InvalidWeight(format!("pieces end at {at}, not 1")));
        }
        Ok(())
    }

    fn piece_at(&self, r: f64) -> Option<&Piece> {
        if r >= 1.0 {
            return None;
        }
        self.pieces.iter().find(|p| r < p.end)
    }

    /// `w(r)` for `r >= 0`; zero on `[1, inf)`.
    pub fn evaluate(&self, r: f64) -> f64 {
        debug_assert!(r >= 0.0);
        self.piece_at(r).map_or(0.0, |p| self.scale * p.eval(r))
    }

    /// `w'(r)` (right derivative at piece breaks); zero on `[1, inf)`.
    pub fn derivative(&self, r: f64) -> f64 {
        self.piece_at(r).map_or(0.0, |p| self.scale * p.derivative().eval(r))
    }

    /// `w_h(r) = h^-d w(r / h)`.
    pub fn evaluate_scaled(&self, h: f64, r: f64) -> f64 {
        h.powi(-(self.dim as i32)) * self.evaluate(r / h)
    }

    /// `int_0^1 r^power w(r) dr` by Gauss–Legendre on each piece.
    pub fn radial_moment(&self, power: i32) -> f64 {
        self.scale * self.pieces.iter().map(|p| p.moment(power)).sum::<f64>()
    }

    /// `int_{R^d} w(|x|) dx`.
    pub fn mass(&self) -> f64 {
        sphere_measure(self.dim) * self.radial_moment(self.dim as i32 - 1)
    }

    /// `int_{R^d} |x|^2 w(|x|) dx`.
    pub fn second_moment(&self) -> f64 {
        sphere_measure(self.dim) * self.radial_moment(self.dim as i32 + 1)
    }

    /// Same shape, scaled to unit mass.
    pub fn normalized(&self) -> Self {
        Self {
            scale: self.scale / self.mass(),
            ..self.clone()
        }
    }

    /// Value jumps at interior breaks, `(break, w(break-) - w(break+))`.
    pub fn interior_jumps(&self) -> Vec<(f64, f64)> {
        self.pieces
            .windows(2)
            .map(|w| (w[0].end, self.scale * (w[0].eval(w[0].end) - w[1].eval(w[1].start))))
            .collect()
    }

    /// Derivative jumps at interior breaks.
    pub fn interior_derivative_jumps(&self) -> Vec<(f64, f64)> {
        self.pieces
            .windows(2)
            .map(|w| {
                let (a, b) = (w[0].derivative(), w[1].derivative());
                (w[0].end, self.scale * (a.eval(w[0].end) - b.eval(w[1].start)))
            })
            .collect()
    }

    /// `w(1-)`, the left limit at the support edge.
    pub fn edge_value(&self) -> f64 {
        let last = self.pieces.last().expect("validated weight has pieces");
        self.scale * last.eval(1.0)
    }

    /// Kernel `w_h` with all scalings folded into the coefficients.
    pub fn scaled_kernel(&self, h: f64) -> ScaledKernel {
        ScaledKernel::new(&self.pieces, self.scale, self.dim, h, 0)
    }

    /// Kernel `w_h'(r) = h^-(d+1) w'(r / h)`.
    pub fn scaled_derivative_kernel(&self, h: f64) -> ScaledKernel {
        let pieces: Vec<Piece> = self.pieces.iter().map(Piece::derivative).collect();
        ScaledKernel::new(&pieces, self.scale, self.dim, h, 1)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let w: Self = serde_json::from_str(text)?;
        w.validate()?;
        Ok(w)
    }
}

/// `h`-scaled radial kernel evaluated directly in the physical distance:
/// each piece stores `scale * c_m * h^-(d + extra + e_m)` for the power `e_m`.
#[derive(Clone, Debug)]
pub struct ScaledKernel {
    support: f64,
    pieces: Vec<(f64, i32, Vec<f64>)>,
}

impl ScaledKernel {
    fn new(pieces: &[Piece], scale: f64, dim: usize, h: f64, extra: i32) -> Self {
        let base = -(dim as i32) - extra;
        let pieces = pieces
            .iter()
            .map(|p| {
                let coeffs = p
                    .coefficients
                    .iter()
                    .enumerate()
                    .map(|(m, c)| scale * c * h.powi(base - (p.lowest_power + m as i32)))
                    .collect();
                (p.end * h, p.lowest_power, coeffs)
            })
            .collect();
        Self { support: h, pieces }
    }

    pub fn support(&self) -> f64 {
        self.support
    }

    #[inline]
    pub fn eval(&self, r: f64) -> f64 {
        for (end, low, coeffs) in &self.pieces {
            if r < *end {
                let horner = coeffs.iter().rev().fold(0.0, |acc, c| acc * r + c);
                return if *low == 0 { horner } else { r.powi(*low) * horner };
            }
        }
        0.0
    }
}
