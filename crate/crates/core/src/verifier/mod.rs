//! Full two-particle quantum dynamics on a 2D grid.
//!
//! The wavefunction is carried on a grid that follows the classical
//! trajectory of the ions, so only the quantum spread has to be resolved.

mod frame;
mod grid;
mod potential;
mod propagate;
mod snapshot;
mod wavefunction;

pub use frame::{classical_excess, classical_frame, gaussian_excess, initial_equilibrium, ClassicalFrame};
pub use grid::Grid2D;
pub use potential::{PotentialModel, TrapKind, TrapState};
pub use propagate::{
    default_time_step, excess_energy, frame_grid, ground_state, ground_widths, propagate, EnergyParts,
    FramedState, GridConfig, GroundState, GroundStateOptions, Observation, PropagationOptions, Trajectory,
};
pub use snapshot::{read_snapshot, write_snapshot, SnapshotMeta};
pub use wavefunction::{MomentumMoments, Wavefunction2D};
