use std::f64::consts::PI;
use std::sync::OnceLock;

use super::{Piece, RadialWeight};
use crate::error::{Error, Result};

/// Stable identifiers of the shipped weights.
pub const CATALOG_NAMES: [&str; 11] = [
    "I1",
    "I2",
    "I3",
    "G1",
    "G2",
    "G3",
    "L1",
    "L2",
    "L3",
    "spline2d",
    "mps-classic",
];

/// Normalization constants that failed the unit-mass check and were replaced.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalizationCorrection {
    pub name: String,
    pub printed: f64,
    pub measured_mass: f64,
    pub corrected: f64,
}

#[derive(Clone, Debug)]
pub struct Catalog {
    pub entries: Vec<RadialWeight>,
    pub corrections: Vec<NormalizationCorrection>,
}

impl Catalog {
    pub fn get(&self, name: &str) -> Result<&RadialWeight> {
        self.entries
            .iter()
            .find(|w| w.name.eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::UnknownWeight(name.to_string()))
    }
}

/// Mass deviation above which a printed constant is replaced.
const CORRECTION_THRESHOLD: f64 = 1e-8;

fn cubic_spline_pieces() -> Vec<Piece> {
    vec![
        Piece::polynomial(0.0, 0.5, vec![1.0, 0.0, -6.0, 6.0]),
        // 2 (1 - r)^3
        Piece::polynomial(0.5, 1.0, vec![2.0, -6.0, 6.0, -2.0]),
    ]
}

fn spline_gradient_pieces() -> Vec<Piece> {
    vec![
        Piece::polynomial(0.0, 0.5, vec![0.0, 0.0, 6.0, -9.0]),
        // 3 r (1 - r)^2
        Piece::polynomial(0.5, 1.0, vec![0.0, 3.0, -6.0, 3.0]),
    ]
}

fn single(coefficients: Vec<f64>) -> Vec<Piece> {
    vec![Piece::polynomial(0.0, 1.0, coefficients)]
}

/// Printed definitions, before the mass check.
fn printed_entries() -> Vec<RadialWeight> {
    let spline = 40.0 / (7.0 * PI);
    let raw = |name: &str, scale: f64, pieces: Vec<Piece>, n: u32, k: Option<u32>| RadialWeight {
        name: name.to_string(),
        dim: 2,
        moment_order: n,
        smooth_order: k,
        scale,
        pieces,
    };
    vec![
        // (1 - r)
        raw("I1", 3.0 / PI, single(vec![1.0, -1.0]), 1, None),
        raw("I2", spline, cubic_spline_pieces(), 1, None),
        // (1 - r)(2 - 3r)
        raw("I3", 5.0 / PI, single(vec![2.0, -5.0, 3.0]), 3, None),
        // r (1 - r)
        raw("G1", 6.0 / PI, single(vec![0.0, 1.0, -1.0]), 1, Some(0)),
        raw("G2", spline, spline_gradient_pieces(), 1, Some(0)),
        // r (1 - r)(5 - 7r)
        raw("G3", 15.0 / (2.0 * PI), single(vec![0.0, 5.0, -12.0, 7.0]), 3, Some(0)),
        // r^2 (1 - r)
        raw("L1", 10.0 / PI, single(vec![0.0, 0.0, 1.0, -1.0]), 1, Some(1)),
        raw("L2", spline, spline_gradient_pieces(), 1, Some(1)),
        // r^2 (1 - r)(3 - 4r)
        raw("L3", 30.0 / PI, single(vec![0.0, 0.0, 3.0, -7.0, 4.0]), 3, Some(1)),
        raw("spline2d", spline, cubic_spline_pieces(), 1, None),
    ]
}

fn classic_mps() -> RadialWeight {
    // 1/r - 1: unbounded at the origin and therefore not admissible; kept
    // unnormalized as the native MPS profile
    RadialWeight {
        name: "mps-classic".to_string(),
        dim: 2,
        moment_order: 1,
        smooth_order: None,
        scale: 1.0,
        pieces: vec![Piece {
            start: 0.0,
            end: 1.0,
            lowest_power: -1,
            coefficients: vec![1.0, -1.0],
        }],
    }
}

fn build() -> Catalog {
    let mut entries = Vec::new();
    let mut corrections = Vec::new();
    for mut w in printed_entries() {
        let mass = w.mass();
        if (mass - 1.0).abs() > CORRECTION_THRESHOLD {
            let corrected = w.scale / mass;
            log::info!(
                "weight {}: printed constant {} gives mass {}; using {} instead",
                w.name,
                w.scale,
                mass,
                corrected
            );
            corrections.push(NormalizationCorrection {
                name: w.name.clone(),
                printed: w.scale,
                measured_mass: mass,
                corrected,
            });
            w.scale = corrected;
        }
        entries.push(w);
    }
    entries.push(classic_mps());
    Catalog { entries, corrections }
}

/// The shipped weights with normalization verified by quadrature.
pub fn catalog() -> &'static Catalog {
    static CATALOG: OnceLock<Catalog> = OnceLock::new();
    CATALOG.get_or_init(build)
}

pub fn catalog_weight(name: &str) -> Result<RadialWeight> {
    catalog().get(name).cloned()
}
