//! Physical constants, species data and the dimensionless rescaling.

use crate::error::{Error, Result};

/// Reduced Planck constant in J s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Bohr magneton in J/T.
pub const BOHR_MAGNETON: f64 = 9.274_010_078_3e-24;
/// Unified atomic mass unit in kg.
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;
/// One gauss in tesla.
pub const GAUSS: f64 = 1e-4;
/// Mass of argon-40 in atomic mass units.
pub const ARGON40_MASS_U: f64 = 39.962_383_123_7;

#[derive(Debug, Clone, PartialEq)]
pub struct AtomSpecies {
    pub label: String,
    /// Mass in the active unit system.
    pub mass: f64,
    pub lande_g: f64,
    pub magnetic_m: i32,
    pub spin_j: i32,
}

impl AtomSpecies {
    /// Metastable argon in the 4s[3/2]_2 level, magnetic sublevel M = 2.
    pub fn argon_metastable() -> Self {
        Self {
            label: "Ar* 4s[3/2]_2 M=2".into(),
            mass: ARGON40_MASS_U * ATOMIC_MASS_UNIT,
            lande_g: 1.5,
            magnetic_m: 2,
            spin_j: 2,
        }
    }

    pub fn check(&self) -> std::result::Result<(), String> {
        if !(self.mass.is_finite() && self.mass > 0.0) {
            return Err(format!("species mass must be positive, got {}", self.mass));
        }
        if !self.lande_g.is_finite() {
            return Err("lande_g must be finite".into());
        }
        if self.spin_j < 0 || self.magnetic_m.abs() > self.spin_j {
            return Err(format!(
                "magnetic_m = {} is outside -J..J for J = {}",
                self.magnetic_m, self.spin_j
            ));
        }
        Ok(())
    }
}

/// Energy scale C = g M mu_B B_max of the comoving potential, in joules.
pub fn pulse_amplitude(species: &AtomSpecies, b_max_tesla: f64) -> Result<f64> {
    if !(b_max_tesla.is_finite() && b_max_tesla >= 0.0) {
        return Err(Error::invalid(format!("b_max must be non-negative, got {b_max_tesla}")));
    }
    Ok(species.lande_g * f64::from(species.magnetic_m) * BOHR_MAGNETON * b_max_tesla)
}

/// hbar and m in whichever unit system a computation runs in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantumUnits {
    pub hbar: f64,
    pub mass: f64,
}

impl QuantumUnits {
    pub fn si(mass: f64) -> Self {
        Self { hbar: HBAR, mass }
    }

    pub fn natural() -> Self {
        Self { hbar: 1.0, mass: 1.0 }
    }

    /// Group velocity hbar k / m.
    pub fn velocity(&self, k: f64) -> f64 {
        self.hbar * k / self.mass
    }

    /// Angular frequency hbar k^2 / 2m.
    pub fn omega(&self, k: f64) -> f64 {
        0.5 * self.hbar * k * k / self.mass
    }

    /// Kinetic-energy scale hbar^2 k^2 / 2m.
    pub fn energy(&self, k: f64) -> f64 {
        self.hbar * self.omega(k)
    }
}

/// Characteristic scales used to pass between SI and dimensionless form.
///
/// Lengths are measured in 1/k0, times in m/(hbar k0^2) and energies in
/// hbar^2 k0^2/m, so that hbar = m = k0 = 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scales {
    pub wavenumber: f64,
    pub length: f64,
    pub time: f64,
    pub energy: f64,
    pub mass: f64,
    pub hbar: f64,
}

impl Scales {
    pub fn new(k0: f64, mass: f64, hbar: f64) -> Result<Self> {
        if !(k0 > 0.0 && mass > 0.0 && hbar > 0.0) {
            return Err(Error::invalid("scales need positive k0, mass and hbar"));
        }
        Ok(Self {
            wavenumber: k0,
            length: 1.0 / k0,
            time: mass / (hbar * k0 * k0),
            energy: hbar * hbar * k0 * k0 / mass,
            mass,
            hbar,
        })
    }
}

/// Which unit system a scenario's numbers are expressed in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UnitsMode {
    Si,
    Dimensionless(Scales),
}

impl UnitsMode {
    pub fn is_dimensionless(&self) -> bool {
        matches!(self, UnitsMode::Dimensionless(_))
    }
}
