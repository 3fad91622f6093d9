//! Generalized particle method: interpolant, approximate gradient and
//! approximate Laplacian over scattered particles, together with the
//! regularity indicators (covering radius, Voronoi deviation) that control
//! their truncation error and the reference weight functions they are
//! built from.
//!
//! The crate is organised bottom-up:
//!
//! - [`geometry`]: box domains, particle systems, bounded Voronoi cells,
//!   covering radius and fixed-radius neighbor search.
//! - [`weights`]: piecewise-polynomial radial reference weights, their
//!   moment/smoothness checks, a catalog and a polynomial constructor.
//! - [`operators`]: the three approximate operators, single-point and batch.
//! - [`indicators`]: Voronoi deviation (exact LP and greedy bound),
//!   regularity reports and consistency functionals.
//! - [`compat`]: SPH and MPS operators in their native form.
//! - [`harness`]: the perturbed-lattice convergence study.

pub mod compat;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod indicators;
pub mod operators;
pub mod weights;

mod par;

pub use error::{Error, Result};
pub use geometry::{ParticleSystem, RectDomain, VoronoiDiagram};
pub use operators::{AnalyticField, FieldSamples, OperatorKind, Operators};
pub use weights::RadialWeight;
