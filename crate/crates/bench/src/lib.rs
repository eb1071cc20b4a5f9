//! Shared fixtures for the ionrot benchmarks.

use ionrot_core::units::angular_from_mhz;
use ionrot_core::verifier::{frame_grid, ground_state, GridConfig, GroundState, GroundStateOptions, PotentialModel};
use ionrot_core::{IonPair, RigidHarmonicTrap};

pub fn omega0() -> f64 {
    angular_from_mhz(1.41)
}

pub fn rigid_model(ions: IonPair) -> PotentialModel {
    let trap = RigidHarmonicTrap::from_frequency(ions.m1, omega0()).expect("positive frequency");
    PotentialModel::rigid_harmonic(ions, trap, None).expect("valid trap")
}

/// Ground state on an `n × n` co-moving grid of ±16 widths.
pub fn ground(model: &PotentialModel, n: usize) -> GroundState {
    let grid = frame_grid(model, &GridConfig { n: [n, n], half_width_sigmas: 16.0 }).expect("grid");
    ground_state(model, &grid, &GroundStateOptions::default()).expect("ground state")
}
