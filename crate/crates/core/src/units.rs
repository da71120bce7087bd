//! Natural units: ħ = 1, energies and rates in eV, times in ħ/eV.
//!
//! SI constants are the exact or recommended CODATA 2022 values.

use std::f64::consts::PI;
use std::fmt;

use crate::error::{Error, Result};

pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
pub const PLANCK: f64 = 6.626_070_15e-34;
pub const HBAR_SI: f64 = PLANCK / (2.0 * PI);
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_818_8e-12;
/// 1 D = 10⁻²¹ / c  C·m.
pub const DEBYE: f64 = 1e-21 / SPEED_OF_LIGHT;

/// Angular frequency (rad/s) of 1 eV.
pub const EV_TO_RAD_PER_S: f64 = ELEMENTARY_CHARGE / HBAR_SI;
/// ħ in eV·fs; one femtosecond is 1/HBAR_EV_FS units of ħ/eV.
pub const HBAR_EV_FS: f64 = HBAR_SI / ELEMENTARY_CHARGE * 1e15;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unit {
    ElectronVolt,
    MilliElectronVolt,
    RadPerSecond,
    Femtosecond,
    Picosecond,
    /// The natural time unit ħ/eV.
    HbarPerEv,
    Debye,
    CoulombMeter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Dimension {
    Energy,
    Time,
    DipoleMoment,
}

impl Unit {
    fn dimension(self) -> Dimension {
        match self {
            Unit::ElectronVolt | Unit::MilliElectronVolt | Unit::RadPerSecond => Dimension::Energy,
            Unit::Femtosecond | Unit::Picosecond | Unit::HbarPerEv => Dimension::Time,
            Unit::Debye | Unit::CoulombMeter => Dimension::DipoleMoment,
        }
    }

    // factor taking a value in this unit to the dimension's base unit (eV, ħ/eV, C·m)
    fn to_base(self) -> f64 {
        match self {
            Unit::ElectronVolt => 1.0,
            Unit::MilliElectronVolt => 1e-3,
            Unit::RadPerSecond => 1.0 / EV_TO_RAD_PER_S,
            Unit::HbarPerEv => 1.0,
            Unit::Femtosecond => 1.0 / HBAR_EV_FS,
            Unit::Picosecond => 1e3 / HBAR_EV_FS,
            Unit::CoulombMeter => 1.0,
            Unit::Debye => DEBYE,
        }
    }
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Unit::ElectronVolt => "eV",
            Unit::MilliElectronVolt => "meV",
            Unit::RadPerSecond => "rad/s",
            Unit::Femtosecond => "fs",
            Unit::Picosecond => "ps",
            Unit::HbarPerEv => "hbar/eV",
            Unit::Debye => "D",
            Unit::CoulombMeter => "C m",
        };
        f.write_str(s)
    }
}

pub fn convert(value: f64, from: Unit, to: Unit) -> Result<f64> {
    if from.dimension() != to.dimension() {
        return Err(Error::UnsupportedUnit { from: from.to_string(), to: to.to_string() });
    }
    if from == to {
        return Ok(value);
    }
    Ok(value * from.to_base() / to.to_base())
}

pub fn fs_to_natural(t_fs: f64) -> f64 {
    t_fs / HBAR_EV_FS
}

pub fn natural_to_fs(t: f64) -> f64 {
    t * HBAR_EV_FS
}

/// Free-space spectral density J₀(ω) = ω³μ²/(6π²ħε₀c³), returned in eV.
/// `omega` in eV, `mu_debye` in debye.
pub fn free_space_density(omega: f64, mu_debye: f64) -> f64 {
    let w = omega * EV_TO_RAD_PER_S;
    let mu = mu_debye * DEBYE;
    let rate = w.powi(3) * mu * mu / (6.0 * PI * PI * HBAR_SI * VACUUM_PERMITTIVITY * SPEED_OF_LIGHT.powi(3));
    rate / EV_TO_RAD_PER_S
}
