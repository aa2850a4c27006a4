//! Time-dependent comoving potential pulses and the phase they imprint on
//! each spectral component of the evanescent packet.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::quadrature::{integrate_adaptive, Pair};
use crate::scattering::kappa;
use crate::units::QuantumUnits;

/// Largest real exponent admitted before a computation is declared to overflow.
pub const EXPONENT_LIMIT: f64 = 700.0;

/// Phase accuracy targeted for each spectral kernel, in radians.
pub const PHASE_TOLERANCE: f64 = 1e-10;

const MAX_PANELS: usize = 256;

/// A single pulse V(x, t) = s(t - t_start) cos(2 pi x / Lambda - delta), with
/// s(t') = C eps^2 (t' + eps)^-2 exp(-t'/tau) on [0, tau1] and zero elsewhere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComovingPulse {
    pub amplitude_c: f64,
    pub epsilon: f64,
    pub tau: f64,
    pub tau1: f64,
    pub lambda_spatial: f64,
    pub delta_offset: f64,
    pub t_start: f64,
}

impl ComovingPulse {
    pub fn check(&self) -> std::result::Result<(), String> {
        let positive = [
            ("epsilon", self.epsilon),
            ("tau", self.tau),
            ("tau1", self.tau1),
            ("lambda", self.lambda_spatial),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(format!("pulse {name} must be positive, got {v}"));
            }
        }
        if !(self.amplitude_c.is_finite() && self.amplitude_c >= 0.0) {
            return Err(format!("pulse amplitude must be non-negative, got {}", self.amplitude_c));
        }
        if !(0.0..2.0 * PI).contains(&self.delta_offset) {
            return Err(format!("pulse delta must lie in [0, 2 pi), got {}", self.delta_offset));
        }
        if !self.t_start.is_finite() {
            return Err("pulse t_start must be finite".into());
        }
        Ok(())
    }

    /// Spatial wavenumber 2 pi / Lambda.
    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.lambda_spatial
    }

    pub fn t_end(&self) -> f64 {
        self.t_start + self.tau1
    }

    /// Envelope s at absolute time t.
    pub fn signal(&self, t: f64) -> f64 {
        let tp = t - self.t_start;
        if !(0.0..=self.tau1).contains(&tp) {
            return 0.0;
        }
        let r = self.epsilon / (tp + self.epsilon);
        self.amplitude_c * r * r * (-tp / self.tau).exp()
    }

    /// Spatial phase alpha = 2 pi x / Lambda - delta.
    pub fn alpha(&self, x: f64) -> f64 {
        self.wavenumber() * x - self.delta_offset
    }

    pub fn potential(&self, t: f64, x: f64) -> f64 {
        self.signal(t) * self.alpha(x).cos()
    }
}

/// Sum of all pulse potentials at (t, x).
pub fn potential_at(pulses: &[ComovingPulse], t: f64, x: f64) -> f64 {
    pulses.iter().map(|p| p.potential(t, x)).sum()
}

/// Checks ordering and non-overlap of a pulse train.
pub fn check_train(pulses: &[ComovingPulse]) -> std::result::Result<(), String> {
    for w in pulses.windows(2) {
        if w[1].t_start < w[0].t_end() {
            return Err(format!(
                "pulses overlap or are out of order: one starts at {} before the previous ends at {}",
                w[1].t_start,
                w[0].t_end()
            ));
        }
    }
    Ok(())
}

/// Phase imprinted by one pulse on one spectral component at one time,
/// factored as phi(x) = plus e^{i alpha(x)} + minus e^{-i alpha(x)}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseKernel {
    pub plus: Complex64,
    pub minus: Complex64,
}

impl PhaseKernel {
    pub const ZERO: PhaseKernel = PhaseKernel {
        plus: Complex64 { re: 0.0, im: 0.0 },
        minus: Complex64 { re: 0.0, im: 0.0 },
    };

    /// Phase at a point, given e^{i alpha} there.
    #[inline]
    pub fn phase(&self, e_alpha: Complex64) -> Complex64 {
        self.plus * e_alpha + self.minus * e_alpha.conj()
    }
}

/// Kernel for decay constant `kap` at time `t`.
///
/// The phase is -(1/hbar) times the integral of s(t'') cos(alpha - i B (t - t''))
/// over the part of the pulse before t, with B = (2 pi / Lambda) hbar kappa / m.
pub fn phase_kernel(pulse: &ComovingPulse, kap: Complex64, t: f64, units: QuantumUnits) -> Result<PhaseKernel> {
    let t_hi = t.min(pulse.t_end());
    if t_hi <= pulse.t_start || pulse.amplitude_c == 0.0 {
        return Ok(PhaseKernel::ZERO);
    }
    let b = kap * (pulse.wavenumber() * units.hbar / units.mass);
    if b.re.abs() * (t - pulse.t_start) > EXPONENT_LIMIT {
        return Err(Error::Overflow(format!(
            "kernel exponent {:.3e} at t = {t:.6e}",
            b.re.abs() * (t - pulse.t_start)
        )));
    }
    let integrand = |tt: f64| {
        let s = pulse.signal(tt);
        let e = (b * (t - tt)).exp();
        Pair(e * s, e.inv() * s)
    };
    let tol = PHASE_TOLERANCE * units.hbar;
    let r = integrate_adaptive(integrand, pulse.t_start, t_hi, tol, MAX_PANELS)?;
    let scale = -0.5 / units.hbar;
    Ok(PhaseKernel { plus: r.value.0 * scale, minus: r.value.1 * scale })
}

/// Complex comoving phase phi(k, t, x) for one pulse.
pub fn comoving_phase(k: f64, a: f64, t: f64, x: f64, pulse: &ComovingPulse, units: QuantumUnits) -> Result<Complex64> {
    let kern = phase_kernel(pulse, kappa(k, a)?, t, units)?;
    Ok(kern.phase(Complex64::from_polar(1.0, pulse.alpha(x))))
}

/// Phase acquired by a propagating component of wavenumber `k_prop` riding the
/// classical trajectory x = hbar k_prop t / m.
pub fn phi_pro(k_prop: f64, t: f64, pulse: &ComovingPulse, units: QuantumUnits) -> Result<f64> {
    if !(k_prop.is_finite() && k_prop >= 0.0) {
        return Err(Error::invalid(format!("propagating wavenumber must be non-negative, got {k_prop}")));
    }
    let t_hi = t.min(pulse.t_end());
    if t_hi <= pulse.t_start {
        return Ok(0.0);
    }
    let q = pulse.wavenumber() * units.velocity(k_prop);
    let f = |tt: f64| pulse.signal(tt) * (q * tt - pulse.delta_offset).cos();
    let r = integrate_adaptive(f, pulse.t_start, t_hi, PHASE_TOLERANCE * units.hbar, MAX_PANELS)?;
    Ok(-r.value / units.hbar)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::{pulse_amplitude, AtomSpecies, GAUSS};
    use approx::assert_relative_eq;

    fn reference_pulse() -> (ComovingPulse, QuantumUnits) {
        let sp = AtomSpecies::argon_metastable();
        let p = ComovingPulse {
            amplitude_c: pulse_amplitude(&sp, 50.0 * GAUSS).unwrap(),
            epsilon: 7.4e-6,
            tau: 0.37e-6,
            tau1: 0.6e-6,
            lambda_spatial: 2e-6,
            delta_offset: 0.0,
            t_start: 0.0,
        };
        (p, QuantumUnits::si(sp.mass))
    }

    #[test]
    fn signal_at_tau() {
        let (p, _) = reference_pulse();
        assert_relative_eq!(p.signal(p.tau) / p.amplitude_c, 0.333_677_497_661_172_2, max_relative = 1e-14);
        assert_eq!(p.signal(-1e-9), 0.0);
        assert_eq!(p.signal(p.tau1 + 1e-12), 0.0);
        assert_eq!(p.signal(0.0), p.amplitude_c);
    }

    #[test]
    fn phi_pro_regression() {
        let (p, u) = reference_pulse();
        let v = phi_pro(2.244e9, 1e-6, &p, u).unwrap();
        assert_relative_eq!(v, -32.636_190_146_784_49, max_relative = 1e-10);
    }

    #[test]
    fn kernel_vanishes_before_pulse() {
        let (p, u) = reference_pulse();
        let k = phase_kernel(&p, Complex64::new(1e8, 0.0), -1e-7, u).unwrap();
        assert_eq!(k, PhaseKernel::ZERO);
    }

    #[test]
    fn zero_kappa_phase_is_real_and_local() {
        // With kappa = 0 the phase is -(1/hbar) cos(alpha) times the pulse area.
        let (p, u) = reference_pulse();
        let x = 0.3e-6;
        let phi = comoving_phase(2.244e9, 2.244e9, 1e-6, x, &p, u).unwrap();
        let area = integrate_adaptive(|t| p.signal(t), 0.0, p.tau1, 1e-60, 64).unwrap().value;
        assert_relative_eq!(phi.re, -area * p.alpha(x).cos() / u.hbar, max_relative = 1e-12);
        assert!(phi.im.abs() < 1e-9);
    }

    #[test]
    fn pulse_train_overlap_detected() {
        let (p, _) = reference_pulse();
        let mut q = p;
        q.t_start = 0.5e-6;
        assert!(check_train(&[p, q]).is_err());
        q.t_start = 0.6e-6;
        assert!(check_train(&[p, q]).is_ok());
    }
}
