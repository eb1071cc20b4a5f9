//! Inverse-engineered rotation protocols for a two-ion chain in a linear trap.
//!
//! Internal units are atomic mass units, micrometres and microseconds.

pub mod ansatz;
pub mod chain;
pub mod doublewell;
pub mod error;
pub mod nelder_mead;
pub mod ode;
pub mod sta;
pub mod units;
pub mod verifier;

pub use ansatz::{AngleDerivatives, RotationAnsatz};
pub use doublewell::{DoubleWellConfig, SeparableGeometry};
pub use chain::{ChainGeometry, EffectiveSprings, IonPair, ModeDecomposition, RigidHarmonicTrap};
pub use error::{Error, Result};
pub use sta::{DesignOptions, DesignResult, ModeDrive, ModeState};
pub use units::{Dimension, PhysicalConstants, UnitSystem};
