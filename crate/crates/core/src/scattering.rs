//! Stationary scattering off a potential step of height hbar^2 a^2 / 2m.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Decay constant inside the barrier.
///
/// Real and non-negative for k <= a; for k > a it is -i sqrt(k^2 - a^2), so
/// that exp(-kappa x) is an outgoing transmitted wave.
pub fn kappa(k: f64, a: f64) -> Result<Complex64> {
    check(k, a)?;
    let d = a * a - k * k;
    Ok(if d >= 0.0 {
        Complex64::new(d.sqrt(), 0.0)
    } else {
        Complex64::new(0.0, -(-d).sqrt())
    })
}

fn check(k: f64, a: f64) -> Result<()> {
    if !(k.is_finite() && k >= 0.0) {
        return Err(Error::invalid(format!("wavenumber must be finite and non-negative, got {k}")));
    }
    if !(a.is_finite() && a > 0.0) {
        return Err(Error::invalid(format!("barrier wavenumber must be positive, got {a}")));
    }
    Ok(())
}

/// Transmission amplitude T = 2k / (k + i kappa).
pub fn transmission(k: f64, a: f64) -> Result<Complex64> {
    let kap = kappa(k, a)?;
    Ok(2.0 * k / (k + Complex64::i() * kap))
}

/// Reflection amplitude R = T - 1.
pub fn reflection(k: f64, a: f64) -> Result<Complex64> {
    Ok(transmission(k, a)? - 1.0)
}

/// Refractive index n = i kappa / k, which satisfies n^2 = 1 - a^2/k^2.
///
/// Purely imaginary for evanescent waves and real for propagating ones.
pub fn refractive_index(k: f64, a: f64) -> Result<Complex64> {
    let kap = kappa(k, a)?;
    if k == 0.0 {
        return Ok(Complex64::new(0.0, f64::INFINITY));
    }
    Ok(Complex64::i() * kap / k)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatteringAmplitudes {
    pub k: f64,
    pub kappa: Complex64,
    pub t_amp: Complex64,
    pub r_amp: Complex64,
    pub index_n: Complex64,
}

impl ScatteringAmplitudes {
    pub fn new(k: f64, a: f64) -> Result<Self> {
        Ok(Self {
            k,
            kappa: kappa(k, a)?,
            t_amp: transmission(k, a)?,
            r_amp: reflection(k, a)?,
            index_n: refractive_index(k, a)?,
        })
    }

    pub fn is_evanescent(&self) -> bool {
        self.kappa.im == 0.0
    }

    /// Transmitted probability flux per unit incident flux.
    pub fn transmitted_flux(&self) -> f64 {
        if self.is_evanescent() || self.k == 0.0 {
            0.0
        } else {
            -self.kappa.im / self.k * self.t_amp.norm_sqr()
        }
    }

    pub fn reflected_flux(&self) -> f64 {
        self.r_amp.norm_sqr()
    }
}
