//! Observables computed from fields and boundary traces.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{BoundaryTrace, ComplexField};
use crate::pulse::{comoving_phase, ComovingPulse};
use crate::scattering::kappa;
use crate::units::QuantumUnits;

/// Finite-difference estimate of |kappa df/dx| / |d2f/dx2| for f = exp(i phi).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioEstimate {
    pub ratio: f64,
    /// Same ratio from Richardson-extrapolated derivatives.
    pub extrapolated: f64,
    /// True when the two estimates agree to 1%.
    pub confident: bool,
}

/// Validity measure of the slowly-varying approximation behind the
/// comoving phase; zero at kappa = 0.
///
/// Derivatives of phi are taken by centred differences with step Lambda/200
/// and checked against a Richardson extrapolation from step Lambda/400.
pub fn approximation_ratio(
    k: f64,
    a: f64,
    t: f64,
    x: f64,
    pulse: &ComovingPulse,
    units: QuantumUnits,
) -> Result<RatioEstimate> {
    if !(x >= 0.0) {
        return Err(Error::invalid(format!("approximation ratio needs x >= 0, got {x}")));
    }
    let kap = kappa(k, a)?;
    let phi = |xx: f64| comoving_phase(k, a, t, xx, pulse, units);
    let h = pulse.lambda_spatial / 200.0;
    let centre = phi(x)?;
    let derivs = |h: f64| -> Result<(Complex64, Complex64)> {
        let (p, m) = (phi(x + h)?, phi(x - h)?);
        Ok(((p - m) / (2.0 * h), (p - 2.0 * centre + m) / (h * h)))
    };
    let (d1, d2) = derivs(h)?;
    let (e1, e2) = derivs(0.5 * h)?;
    let r1 = e1 + (e1 - d1) / 3.0;
    let r2 = e2 + (e2 - d2) / 3.0;
    let ratio_of = |p: Complex64, pp: Complex64| -> f64 {
        let num = (kap * p).norm();
        let den = (Complex64::i() * pp - p * p).norm();
        if den < 1e-300 {
            if num == 0.0 { 0.0 } else { f64::INFINITY }
        } else {
            num / den
        }
    };
    let ratio = ratio_of(d1, d2);
    let extrapolated = ratio_of(r1, r2);
    let confident = if extrapolated.is_finite() {
        (ratio - extrapolated).abs() <= 0.01 * extrapolated.abs().max(f64::MIN_POSITIVE) || ratio == extrapolated
    } else {
        ratio == extrapolated
    };
    Ok(RatioEstimate { ratio, extrapolated, confident })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub time: f64,
    pub intensity: f64,
    /// Full width at half maximum; NaN when a half-maximum crossing lies
    /// outside the trace.
    pub width_fwhm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RevivalReport {
    pub peaks: Vec<Peak>,
    /// Absolute intensity threshold.
    pub threshold: f64,
    /// Smallest intensity in the search window.
    pub baseline: f64,
    /// Largest intensity before the search window.
    pub reference: f64,
}

/// Local maxima of the boundary intensity after `t_after` that exceed
/// `threshold_frac` times the largest intensity at or before `t_after`.
pub fn detect_revivals(trace: &BoundaryTrace, t_after: f64, threshold_frac: f64) -> Result<RevivalReport> {
    if !(threshold_frac > 0.0 && threshold_frac < 1.0) {
        return Err(Error::invalid(format!("threshold fraction must lie in (0, 1), got {threshold_frac}")));
    }
    let it = &trace.intensity;
    let ts = &trace.times;
    let first = ts.iter().position(|&t| t > t_after);
    let Some(first) = first.filter(|&f| f > 0 && f + 1 < ts.len()) else {
        return Err(Error::invalid(format!("trace has no samples on both sides of t_after = {t_after:e}")));
    };
    let reference = it[..first].iter().fold(0.0_f64, |m, &v| m.max(v));
    let threshold = threshold_frac * reference;
    let baseline = it[first..].iter().fold(f64::INFINITY, |m, &v| m.min(v));
    let mut peaks = Vec::new();
    let mut j = first.max(1);
    while j + 1 < it.len() {
        if it[j] > it[j - 1] && it[j] >= it[j + 1] {
            // Skip to the end of a flat top so a plateau counts once.
            let mut e = j;
            while e + 1 < it.len() && it[e + 1] == it[j] {
                e += 1;
            }
            let falls = e + 1 < it.len() && it[e + 1] < it[j];
            if falls && it[j] > threshold {
                peaks.push(Peak { time: ts[j], intensity: it[j], width_fwhm: fwhm(ts, it, j) });
            }
            j = e + 1;
        } else {
            j += 1;
        }
    }
    Ok(RevivalReport { peaks, threshold, baseline, reference })
}

fn fwhm(ts: &[f64], it: &[f64], j: usize) -> f64 {
    let half = 0.5 * it[j];
    let cross = |i0: usize, i1: usize| ts[i0] + (half - it[i0]) / (it[i1] - it[i0]) * (ts[i1] - ts[i0]);
    let mut l = j;
    while l > 0 && it[l - 1] >= half {
        l -= 1;
    }
    let mut r = j;
    while r + 1 < it.len() && it[r + 1] >= half {
        r += 1;
    }
    if l == 0 || r + 1 == it.len() {
        return f64::NAN;
    }
    cross(r, r + 1) - cross(l - 1, l)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub centroid: f64,
    pub rms_width: f64,
    /// Integral of |psi|^2 over the row.
    pub total_intensity: f64,
}

/// Discrete moments of |psi(t, .)|^2 at the row nearest to `t`.
pub fn packet_moments(field: &ComplexField, t: f64) -> Result<Moments> {
    let j = field.time_index(t)?;
    row_moments(field, j)
}

pub fn row_moments(field: &ComplexField, j: usize) -> Result<Moments> {
    let g = &field.grid;
    let row = field.row(j);
    let (mut s0, mut s1) = (0.0, 0.0);
    for (i, v) in row.iter().enumerate() {
        let w = v.norm_sqr();
        s0 += w;
        s1 += w * g.x(i);
    }
    if s0 == 0.0 {
        return Err(Error::invalid(format!("zero total intensity at t = {:e}", g.t(j))));
    }
    let c = s1 / s0;
    let s2: f64 = row.iter().enumerate().map(|(i, v)| v.norm_sqr() * (g.x(i) - c).powi(2)).sum();
    let dx = if g.nx > 1 { g.dx() } else { 1.0 };
    Ok(Moments { centroid: c, rms_width: (s2 / s0).sqrt(), total_intensity: s0 * dx })
}

/// Moments for every row of a field; rows with zero intensity are skipped.
pub fn moments_series(field: &ComplexField) -> Vec<(f64, Moments)> {
    (0..field.grid.nt)
        .filter_map(|j| row_moments(field, j).ok().map(|m| (field.grid.t(j), m)))
        .collect()
}

/// Probability current (hbar/m) Im(psi* dpsi/dx) at the grid point nearest
/// to (t, x), by centred differences.
pub fn probability_current(field: &ComplexField, t: f64, x: f64, units: QuantumUnits) -> Result<f64> {
    let g = &field.grid;
    if g.nx < 3 {
        return Err(Error::invalid("current needs at least three columns"));
    }
    let j = field.time_index(t)?;
    let s = (x - g.x_min) / g.dx();
    let i = s.round();
    if i < 1.0 || i > (g.nx - 2) as f64 {
        return Err(Error::invalid(format!("x = {x:e} is not an interior grid point")));
    }
    let i = i as usize;
    let v = &field.values;
    let d = (v[[j, i + 1]] - v[[j, i - 1]]) / (2.0 * g.dx());
    Ok(units.hbar / units.mass * (v[[j, i]].conj() * d).im)
}
