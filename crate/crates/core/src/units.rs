//! Physical constants and the recoil unit system.
//!
//! Everything downstream of this module works in dimensionless lattice
//! units: lengths in `1/k_L`, energies in `E_R`, times in `ħ/E_R`,
//! temperatures in `T_R = 2 E_R / k_B` and velocities in `v_R = ħ k_L / m`.
//!
//! Note that the natural velocity of the length and time units,
//! `(1/k_L) / (ħ/E_R) = v_R / 2`, is *not* the velocity unit. A particle with
//! velocity `v` (in `v_R`) moves `2 v t` (in `1/k_L`) during a time `t`
//! (in `ħ/E_R`); see [`displacement`].

use core::f64::consts::PI;
use core::fmt;
use core::str::FromStr;

use num_traits::Float;

/// Reduced Planck constant [J s] (CODATA 2018, exact by SI definition of h).
pub const HBAR: f64 = 1.054_571_817e-34;
/// Planck constant [J s].
pub const PLANCK: f64 = 2.0 * PI * HBAR;
/// Boltzmann constant [J/K] (exact).
pub const BOLTZMANN: f64 = 1.380_649e-23;
/// Unified atomic mass unit [kg] (CODATA 2018).
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;
/// Mass of ²³Na [kg].
pub const SODIUM_MASS: f64 = 22.989_769_28 * ATOMIC_MASS_UNIT;
/// Lattice wavelength used throughout the default scenarios [m].
pub const DEFAULT_WAVELENGTH: f64 = 532e-9;

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum UnitsError {
    #[error("lattice wavelength must be positive, got {0}")]
    Wavelength(f64),
    #[error("atomic mass must be positive, got {0}")]
    Mass(f64),
    #[error("lattice depth must be non-negative, got {0}")]
    Depth(f64),
}

/// Depth, wavelength and atomic species of a 1D lattice `V(z) = s E_R sin²(k_L z)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeParams {
    /// Well depth `s = V₀/E_R`.
    pub depth: f64,
    /// Lattice light wavelength [m].
    pub wavelength: f64,
    /// Atomic mass [kg].
    pub mass: f64,
}

impl LatticeParams {
    pub fn new(depth: f64, wavelength: f64, mass: f64) -> Result<Self, UnitsError> {
        let p = Self {
            depth,
            wavelength,
            mass,
        };
        p.validate()?;
        Ok(p)
    }

    /// Sodium in a 532 nm lattice.
    pub fn sodium(depth: f64) -> Result<Self, UnitsError> {
        Self::new(depth, DEFAULT_WAVELENGTH, SODIUM_MASS)
    }

    pub fn validate(&self) -> Result<(), UnitsError> {
        // written as negations so that NaN is rejected too
        if !(self.wavelength > 0.0) {
            return Err(UnitsError::Wavelength(self.wavelength));
        }
        if !(self.mass > 0.0) {
            return Err(UnitsError::Mass(self.mass));
        }
        if !(self.depth >= 0.0) {
            return Err(UnitsError::Depth(self.depth));
        }
        Ok(())
    }

    pub fn units(&self) -> Result<RecoilUnits, UnitsError> {
        derive_units(self)
    }
}

/// Scales of the recoil unit system, all in SI.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecoilUnits {
    /// Lattice wavenumber `k_L = 2π/λ` [1/m].
    pub wavenumber: f64,
    /// Recoil energy `E_R = ħ²k_L²/2m` [J].
    pub energy: f64,
    /// Recoil temperature `T_R = 2E_R/k_B` [K].
    pub temperature: f64,
    /// Recoil velocity `v_R = ħk_L/m` [m/s].
    pub velocity: f64,
    /// Time unit `ħ/E_R` [s].
    pub time: f64,
    /// Atomic mass the scales were derived for [kg].
    pub mass: f64,
}

/// Recoil scales for the wavelength and mass of `p`. The depth is not used.
pub fn derive_units(p: &LatticeParams) -> Result<RecoilUnits, UnitsError> {
    RecoilUnits::new(p.wavelength, p.mass)
}

impl RecoilUnits {
    pub fn new(wavelength: f64, mass: f64) -> Result<Self, UnitsError> {
        if !(wavelength > 0.0) {
            return Err(UnitsError::Wavelength(wavelength));
        }
        if !(mass > 0.0) {
            return Err(UnitsError::Mass(mass));
        }
        let wavenumber = 2.0 * PI / wavelength;
        let energy = HBAR * HBAR * wavenumber * wavenumber / (2.0 * mass);
        Ok(Self {
            wavenumber,
            energy,
            temperature: 2.0 * energy / BOLTZMANN,
            velocity: HBAR * wavenumber / mass,
            time: HBAR / energy,
            mass,
        })
    }

    pub fn sodium_532() -> Self {
        // constants are valid, cannot fail
        Self::new(DEFAULT_WAVELENGTH, SODIUM_MASS).unwrap()
    }

    fn scale(&self, kind: Quantity) -> f64 {
        match kind {
            Quantity::Energy => self.energy,
            Quantity::Temperature => self.temperature,
            Quantity::Velocity => self.velocity,
            Quantity::Length => 1.0 / self.wavenumber,
            Quantity::Time => self.time,
        }
    }

    /// SI value → dimensionless value.
    pub fn to_recoil(&self, value: f64, kind: Quantity) -> f64 {
        value / self.scale(kind)
    }

    /// Dimensionless value → SI value.
    pub fn from_recoil(&self, value: f64, kind: Quantity) -> f64 {
        value * self.scale(kind)
    }

    /// Angular frequency [rad/s] expressed as the energy `ħω` in `E_R`.
    pub fn frequency_to_recoil(&self, omega: f64) -> f64 {
        omega * self.time
    }

    pub fn frequency_from_recoil(&self, omega: f64) -> f64 {
        omega / self.time
    }

    /// Energy in `E_R` → frequency `E/h` in kHz.
    pub fn energy_to_khz(&self, energy: f64) -> f64 {
        energy * self.energy / PLANCK * 1e-3
    }

    pub fn khz_to_energy(&self, khz: f64) -> f64 {
        khz * 1e3 * PLANCK / self.energy
    }

    /// Thermal rms velocity `sqrt(k_B T/m)` [m/s] for a temperature in kelvin.
    pub fn thermal_velocity(&self, temperature: f64) -> f64 {
        (BOLTZMANN * temperature / self.mass).sqrt()
    }
}

/// Distance travelled in `1/k_L` by a velocity in `v_R` over a time in `ħ/E_R`.
#[inline]
pub fn displacement(velocity: f64, time: f64) -> f64 {
    2.0 * velocity * time
}

/// The kinds of quantity the unit system converts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Quantity {
    Energy,
    Temperature,
    Velocity,
    Length,
    Time,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown quantity kind `{0}`")]
pub struct UnknownQuantity(pub alloc::string::String);

impl FromStr for Quantity {
    type Err = UnknownQuantity;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "energy" => Ok(Self::Energy),
            "temperature" => Ok(Self::Temperature),
            "velocity" => Ok(Self::Velocity),
            "length" => Ok(Self::Length),
            "time" => Ok(Self::Time),
            other => Err(UnknownQuantity(other.into())),
        }
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Energy => "energy",
            Self::Temperature => "temperature",
            Self::Velocity => "velocity",
            Self::Length => "length",
            Self::Time => "time",
        })
    }
}
