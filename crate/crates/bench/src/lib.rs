//! Shared fixtures for the criterion benchmarks.

use resodrift_core::perturbation::{AssemblyOptions, Chart, PerturbedSystem};
use resodrift_core::FrequencyPath;

pub fn torus_path() -> FrequencyPath {
    FrequencyPath::on_unit_interval(vec![0.0, -1.0], vec![1.0]).unwrap()
}

pub fn elliptic_path() -> FrequencyPath {
    FrequencyPath::new(vec![-1.0], vec![1.0, 1.0], -0.5, 0.5).unwrap()
}

pub fn torus_system() -> PerturbedSystem {
    PerturbedSystem::assemble(
        &torus_path(),
        AssemblyOptions::new(Chart::ActionAngle, 3, 1.0, 1.0),
    )
    .unwrap()
}

pub fn elliptic_system() -> PerturbedSystem {
    PerturbedSystem::assemble(
        &elliptic_path(),
        AssemblyOptions::new(Chart::Cartesian, 3, 1.0, 1.0e34),
    )
    .unwrap()
}
