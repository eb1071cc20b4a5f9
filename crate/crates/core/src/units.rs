//! Physical constants and the internal unit system.
//!
//! Everything inside the crate computes in atomic mass units, micrometres and
//! microseconds. In those units a 1.4 MHz trap frequency is ~8.9 rad/μs,
//! ħ ≈ 0.0635 and the Coulomb coupling of two unit charges is ≈ 1.39e5, so all
//! quantities stay comfortably inside double-precision range.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// CODATA 2018 values, SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    pub elementary_charge: f64,
    pub vacuum_permittivity: f64,
    pub vacuum_permeability: f64,
    pub speed_of_light: f64,
    pub reduced_planck: f64,
    pub atomic_mass_unit: f64,
    /// e²/(4πε₀) in N·m².
    pub coulomb_coupling: f64,
}

impl PhysicalConstants {
    pub const fn codata2018() -> Self {
        const E: f64 = 1.602_176_634e-19;
        const EPS0: f64 = 8.854_187_812_8e-12;
        Self {
            elementary_charge: E,
            vacuum_permittivity: EPS0,
            vacuum_permeability: 1.256_637_062_12e-6,
            speed_of_light: 299_792_458.0,
            reduced_planck: 1.054_571_817e-34,
            atomic_mass_unit: 1.660_539_066_60e-27,
            coulomb_coupling: E * E / (4.0 * PI * EPS0),
        }
    }
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self::codata2018()
    }
}

pub const CONSTANTS: PhysicalConstants = PhysicalConstants::codata2018();

/// Physical dimensions that cross the SI boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Dimension {
    Mass,
    Length,
    Time,
    Velocity,
    Energy,
    Force,
    SpringConstant,
    /// Coefficient of a quartic potential term (energy/length⁴).
    QuarticCoefficient,
    AngularFrequency,
    Action,
    /// Energy·length, the dimension of the Coulomb coupling.
    EnergyLength,
}

impl Dimension {
    pub const ALL: [Dimension; 11] = [
        Dimension::Mass,
        Dimension::Length,
        Dimension::Time,
        Dimension::Velocity,
        Dimension::Energy,
        Dimension::Force,
        Dimension::SpringConstant,
        Dimension::QuarticCoefficient,
        Dimension::AngularFrequency,
        Dimension::Action,
        Dimension::EnergyLength,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Dimension::Mass => "mass",
            Dimension::Length => "length",
            Dimension::Time => "time",
            Dimension::Velocity => "velocity",
            Dimension::Energy => "energy",
            Dimension::Force => "force",
            Dimension::SpringConstant => "spring-constant",
            Dimension::QuarticCoefficient => "quartic-coefficient",
            Dimension::AngularFrequency => "angular-frequency",
            Dimension::Action => "action",
            Dimension::EnergyLength => "energy-length",
        }
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Dimension {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Dimension::ALL
            .into_iter()
            .find(|d| d.name() == s)
            .ok_or_else(|| Error::UnknownDimension(s.to_string()))
    }
}

/// Scale factors from internal units (u, μm, μs) to SI.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitSystem {
    pub mass_unit: f64,
    pub length_unit: f64,
    pub time_unit: f64,
}

impl UnitSystem {
    pub const fn ion_trap() -> Self {
        Self {
            mass_unit: CONSTANTS.atomic_mass_unit,
            length_unit: 1e-6,
            time_unit: 1e-6,
        }
    }

    /// SI value of one internal unit of `dim`.
    pub fn si_per_internal(&self, dim: Dimension) -> f64 {
        let (m, l, t) = (self.mass_unit, self.length_unit, self.time_unit);
        let energy = m * l * l / (t * t);
        match dim {
            Dimension::Mass => m,
            Dimension::Length => l,
            Dimension::Time => t,
            Dimension::Velocity => l / t,
            Dimension::Energy => energy,
            Dimension::Force => energy / l,
            Dimension::SpringConstant => energy / (l * l),
            Dimension::QuarticCoefficient => energy / (l * l * l * l),
            Dimension::AngularFrequency => 1.0 / t,
            Dimension::Action => energy * t,
            Dimension::EnergyLength => energy * l,
        }
    }

    pub fn to_internal(&self, value: f64, dim: Dimension) -> f64 {
        value / self.si_per_internal(dim)
    }

    pub fn to_si(&self, value: f64, dim: Dimension) -> f64 {
        value * self.si_per_internal(dim)
    }

    /// ħ in internal units (u·μm²/μs).
    pub fn hbar(&self) -> f64 {
        self.to_internal(CONSTANTS.reduced_planck, Dimension::Action)
    }

    /// Coulomb coupling e²/(4πε₀) in internal units (u·μm³/μs²).
    pub fn coulomb_coupling(&self) -> f64 {
        self.to_internal(CONSTANTS.coulomb_coupling, Dimension::EnergyLength)
    }
}

impl Default for UnitSystem {
    fn default() -> Self {
        Self::ion_trap()
    }
}

pub const UNITS: UnitSystem = UnitSystem::ion_trap();

/// Coulomb coupling of two singly charged ions in internal units.
pub fn coulomb_coupling() -> f64 {
    UNITS.coulomb_coupling()
}

/// ħ in internal units.
pub fn hbar() -> f64 {
    UNITS.hbar()
}

/// Converts an SI value to internal units.
pub fn to_internal(value: f64, dim: Dimension) -> f64 {
    UNITS.to_internal(value, dim)
}

/// Converts an internal value back to SI.
pub fn to_si(value: f64, dim: Dimension) -> f64 {
    UNITS.to_si(value, dim)
}

/// Angular frequency in rad/μs for a frequency given in MHz.
pub fn angular_from_mhz(freq_mhz: f64) -> f64 {
    2.0 * PI * freq_mhz
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn coulomb_coupling_si_and_internal() {
        let c = CONSTANTS;
        // independent evaluation of e²/(4πε₀)
        let direct = 1.602_176_634e-19_f64.powi(2) / (4.0 * PI * 8.854_187_812_8e-12);
        assert_relative_eq!(c.coulomb_coupling, direct, max_relative = 1e-15);
        assert_relative_eq!(c.coulomb_coupling, 2.3071e-28, max_relative = 1e-4);
        let ratio = c.coulomb_coupling / (c.elementary_charge.powi(2) / (4.0 * PI * c.vacuum_permittivity));
        assert_relative_eq!(ratio, 1.0, max_relative = 1e-15);
        // 2.307077e-28 / (1.66053906660e-27 · 1e-12 · 1e-6 / 1e-12)
        assert_relative_eq!(coulomb_coupling(), 1.389354e5, max_relative = 1e-5);
    }

    #[test]
    fn codata_consistency() {
        let c = CONSTANTS;
        let prod = c.vacuum_permeability * c.vacuum_permittivity * c.speed_of_light.powi(2);
        assert!((prod - 1.0).abs() < 1e-9, "μ₀ε₀c² = {prod}");
    }

    #[test]
    fn example_conversions() {
        assert_eq!(to_internal(40.0 * CONSTANTS.atomic_mass_unit, Dimension::Mass), 40.0);
        let w = to_internal(2.0 * PI * 1.41e6, Dimension::AngularFrequency);
        assert_relative_eq!(w, 8.859_291_283, max_relative = 1e-9);
        assert_relative_eq!(to_internal(1.0546e-34, Dimension::Action), 6.351e-2, max_relative = 1e-3);
        assert_relative_eq!(hbar(), 0.063_507_799, max_relative = 1e-7);
    }

    #[test]
    fn unknown_dimension_is_rejected() {
        assert!(matches!("charge".parse::<Dimension>(), Err(Error::UnknownDimension(_))));
        for d in Dimension::ALL {
            assert_eq!(d.name().parse::<Dimension>().unwrap(), d);
        }
    }

    #[test]
    fn internal_magnitudes_are_well_conditioned() {
        for v in [hbar(), coulomb_coupling(), 9.0, 40.0] {
            assert!((1e-8..=1e8).contains(&v));
        }
    }

    proptest::proptest! {
        #[test]
        fn round_trip(v in -1e6f64..1e6, idx in 0usize..11) {
            let d = Dimension::ALL[idx];
            let back = to_si(to_internal(v, d), d);
            proptest::prop_assert!((back - v).abs() <= 1e-12 * v.abs().max(f64::MIN_POSITIVE));
        }
    }
}
