//! Certification of c-convex transport potentials on model manifolds.
//!
//! The library evaluates curvature-based sufficient conditions for a scalar
//! potential to be c-convex when the transport cost is the minimal action of
//! a natural mechanical Lagrangian, builds the induced map by Hamiltonian
//! flow, and verifies optimality against brute-force oracles (discrete
//! double transform and an exact assignment solver).

pub mod certifier;
pub mod config;
pub mod curvature;
pub mod error;
pub mod field;
pub mod geometry;
pub mod mechanics;
pub mod riccati;
pub mod runner;
pub mod transport;

pub use error::{Error, Result};
pub use field::{FieldExpression, ScalarField};
pub use geometry::{ChartPoint, CovectorComponents, GridSpec, ManifoldModel, TangentVector};
pub use mechanics::{CotangentState, FlowResult, MechanicalSystem, SampledCurve};
