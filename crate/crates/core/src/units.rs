//! Internal unit system.
//!
//! The engine works in a consistent atomic unit system in which both the
//! Boltzmann constant and the Coulomb constant are exactly one. Three base
//! quantities are fixed (length = one Bohr radius, charge = one elementary
//! charge, mass = 1 kg/mol); every other unit follows algebraically.
//! Conversion happens only when reading configuration input and when writing
//! output; kernels never see SI values.
//!
//! A pure reduced Lennard-Jones mode (`sigma = epsilon = m = 1`) is also
//! available, in which every factor is one and inputs are taken verbatim.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

pub const AVOGADRO: f64 = 6.022_140_76e23;
pub const BOLTZMANN_J_PER_K: f64 = 1.380_649e-23;
pub const ELEMENTARY_CHARGE_C: f64 = 1.602_176_634e-19;
pub const COULOMB_CONSTANT: f64 = 8.987_551_792_3e9;
pub const DEBYE_C_M: f64 = 3.335_640_952e-30;
pub const BOHR_RADIUS_M: f64 = 5.291_77e-11;

/// Physical dimension of a quantity crossing the SI boundary.
///
/// SI-facing units per tag: length m, mass kg/mol, charge e, energy J (per
/// particle), temperature K, pressure Pa, time s, velocity m/s, acceleration
/// m/s², density mol/l, dipole D, quadrupole D·Å.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Dimension {
    Length,
    Mass,
    Charge,
    Energy,
    Temperature,
    Pressure,
    Time,
    Velocity,
    Acceleration,
    Density,
    Dipole,
    Quadrupole,
}

impl Dimension {
    pub const ALL: [Dimension; 12] = [
        Dimension::Length,
        Dimension::Mass,
        Dimension::Charge,
        Dimension::Energy,
        Dimension::Temperature,
        Dimension::Pressure,
        Dimension::Time,
        Dimension::Velocity,
        Dimension::Acceleration,
        Dimension::Density,
        Dimension::Dipole,
        Dimension::Quadrupole,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Dimension::Length => "length",
            Dimension::Mass => "mass",
            Dimension::Charge => "charge",
            Dimension::Energy => "energy",
            Dimension::Temperature => "temperature",
            Dimension::Pressure => "pressure",
            Dimension::Time => "time",
            Dimension::Velocity => "velocity",
            Dimension::Acceleration => "acceleration",
            Dimension::Density => "density",
            Dimension::Dipole => "dipole",
            Dimension::Quadrupole => "quadrupole",
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
        Dimension::ALL.iter().copied().find(|d| d.name() == s).ok_or_else(|| Error::UnknownDimension(s.to_string()))
    }
}

/// Scale factors of the internal unit system, each expressed in the SI-facing
/// unit of its [`Dimension`].
#[derive(Clone, Debug, PartialEq)]
pub struct UnitSystem {
    pub length_unit_m: f64,
    pub charge_unit: f64,
    pub mass_unit_kg_per_mol: f64,
    pub density: f64,
    pub energy: f64,
    pub temperature: f64,
    pub pressure: f64,
    pub time: f64,
    pub velocity: f64,
    pub acceleration: f64,
    pub dipole: f64,
    pub quadrupole: f64,
}

impl UnitSystem {
    /// The atomic unit system with k_B = k_C = 1.
    pub fn atomic() -> Self {
        Self::from_base(BOHR_RADIUS_M, 1.0, 1.0)
    }

    /// Reduced Lennard-Jones units: every factor is one.
    pub fn reduced() -> Self {
        UnitSystem {
            length_unit_m: 1.0,
            charge_unit: 1.0,
            mass_unit_kg_per_mol: 1.0,
            density: 1.0,
            energy: 1.0,
            temperature: 1.0,
            pressure: 1.0,
            time: 1.0,
            velocity: 1.0,
            acceleration: 1.0,
            dipole: 1.0,
            quadrupole: 1.0,
        }
    }

    /// Derive all units from length (m), charge (e) and molar mass (kg/mol).
    pub fn from_base(length_m: f64, charge_e: f64, mass_kg_per_mol: f64) -> Self {
        let q_c = charge_e * ELEMENTARY_CHARGE_C;
        let mass_kg = mass_kg_per_mol / AVOGADRO;
        // E0 = k_C q0^2 / l0, per particle.
        let energy = COULOMB_CONSTANT * q_c * q_c / length_m;
        // T0 = E0 / k_B
        let temperature = energy / BOLTZMANN_J_PER_K;
        // rho0 = 1 / l0^3, reported per mole and litre.
        let number_density_m3 = 1.0 / length_m.powi(3);
        let density = number_density_m3 / AVOGADRO / 1000.0;
        // p0 = rho0 E0
        let pressure = number_density_m3 * energy;
        // t0 = l0 sqrt(m0 / E0)
        let time = length_m * (mass_kg / energy).sqrt();
        let velocity = length_m / time;
        let acceleration = length_m / (time * time);
        // D0 = l0 q0, Q0 = l0^2 q0
        let dipole = length_m * q_c / DEBYE_C_M;
        let quadrupole = length_m * length_m * q_c / (DEBYE_C_M * 1e-10);
        UnitSystem {
            length_unit_m: length_m,
            charge_unit: charge_e,
            mass_unit_kg_per_mol: mass_kg_per_mol,
            density,
            energy,
            temperature,
            pressure,
            time,
            velocity,
            acceleration,
            dipole,
            quadrupole,
        }
    }

    pub fn factor(&self, dim: Dimension) -> f64 {
        match dim {
            Dimension::Length => self.length_unit_m,
            Dimension::Mass => self.mass_unit_kg_per_mol,
            Dimension::Charge => self.charge_unit,
            Dimension::Energy => self.energy,
            Dimension::Temperature => self.temperature,
            Dimension::Pressure => self.pressure,
            Dimension::Time => self.time,
            Dimension::Velocity => self.velocity,
            Dimension::Acceleration => self.acceleration,
            Dimension::Density => self.density,
            Dimension::Dipole => self.dipole,
            Dimension::Quadrupole => self.quadrupole,
        }
    }

    pub fn to_internal(&self, value: f64, dim: Dimension) -> f64 {
        value / self.factor(dim)
    }

    pub fn from_internal(&self, value: f64, dim: Dimension) -> f64 {
        value * self.factor(dim)
    }

    /// String-tagged variant used by the config reader.
    pub fn to_internal_tagged(&self, value: f64, tag: &str) -> Result<f64> {
        Ok(self.to_internal(value, tag.parse()?))
    }

    pub fn from_internal_tagged(&self, value: f64, tag: &str) -> Result<f64> {
        Ok(self.from_internal(value, tag.parse()?))
    }
}
