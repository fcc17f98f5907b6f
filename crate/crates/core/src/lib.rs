//! Construction and numerical verification of resonance-channel drift in
//! near-integrable Hamiltonians with two degrees of freedom.
//!
//! The pipeline, bottom to top:
//!
//! * [`path`] — an analytic (polynomial) frequency path `v : J → R²` and the
//!   non-degeneracy conditions it must satisfy.
//! * [`integrable`] — the integrable Hamiltonian `h` whose gradient equals
//!   `v(t)` along the vertical axis and which is constant on a family of
//!   rational-slope lines `Λ_t`, built through a near-identity chart.
//! * [`resonances`] — the sequence of resonance channels `(y_n, k_n, ε_n)`
//!   where `v(y_n)` is collinear with an integer vector `k_n`, plus the
//!   lattice-direction gap bound that drives the search.
//! * [`jet`], [`gevrey`] — truncated Taylor-jet arithmetic and the
//!   compactly supported Gevrey bump profiles with finite-order
//!   derivative-bound certification.
//! * [`perturbation`] — the assembled perturbed Hamiltonian in action-angle
//!   or Cartesian coordinates, with analytic vector fields.
//! * [`flow`] — high-order adaptive integration, the exact toy flow, drift-law
//!   verification, instability sweeps and Poincaré sections.

pub mod error;
pub mod flow;
pub mod gevrey;
pub mod integrable;
pub mod jet;
pub mod path;
pub mod perturbation;
pub mod poly;
pub mod resonances;

mod dop853;

pub use error::{Error, Result};
pub use flow::{DriftReport, IntegratorConfig, Scheme, StopReason, SweepSummary, TrajectoryRecord};
pub use gevrey::GevreyFit;
pub use integrable::IntegrableModel;
pub use path::{FrequencyPath, PathConditionReport};
pub use perturbation::{Chart, PerturbedSystem};
pub use poly::Poly;
pub use resonances::ResonanceChannel;

/// Euclidean norm of a 2-vector.
pub(crate) fn norm2(v: [f64; 2]) -> f64 {
    v[0].hypot(v[1])
}

/// Dot product of 2-vectors.
pub(crate) fn dot2(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Rotation by +90 degrees: `(v1, v2) -> (-v2, v1)`.
pub(crate) fn perp(v: [f64; 2]) -> [f64; 2] {
    [-v[1], v[0]]
}
