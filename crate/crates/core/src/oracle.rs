//! Direct Crank-Nicolson integration of the one-dimensional Schrodinger
//! equation, used as an independent reference for the analytic fields.

use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{ComplexField, WavepacketEngine};
use crate::pulse::{potential_at, ComovingPulse};
use crate::quadrature::gauss_legendre_on;
use crate::scenario::{Barrier, MomentumSpectrum, SpaceTimeGrid};
use crate::units::QuantumUnits;

/// Per-step relative norm drift tolerated without absorbing layers.
pub const NORM_DRIFT_LIMIT: f64 = 1e-10;

/// Solver settings. The grid spans the full line; its time axis lists the
/// instants at which the state is recorded, starting with the initial state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleConfig {
    pub grid: SpaceTimeGrid,
    pub dt: f64,
    /// Fraction of the domain at each end covered by the absorbing layer.
    pub absorbing_margin: f64,
    /// Peak of the imaginary absorbing potential, in energy units.
    pub absorber_strength: f64,
    pub restrict_pulse_to_positive_x: bool,
    /// dt may not exceed dt_safety * m dx^2 / hbar.
    pub dt_safety: f64,
}

impl OracleConfig {
    fn check(&self, units: QuantumUnits) -> Result<()> {
        self.grid.check().map_err(Error::InvalidArgument)?;
        if self.grid.nx < 3 {
            return Err(Error::invalid("oracle grid needs at least three points"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid(format!("dt must be positive, got {}", self.dt)));
        }
        if !(0.0..0.25).contains(&self.absorbing_margin) {
            return Err(Error::invalid(format!("absorbing margin must lie in [0, 0.25), got {}", self.absorbing_margin)));
        }
        if !(self.absorber_strength >= 0.0 && self.absorber_strength.is_finite()) {
            return Err(Error::invalid("absorber strength must be non-negative"));
        }
        let dx = self.grid.dx();
        let limit = self.dt_safety * units.mass * dx * dx / units.hbar;
        if self.dt > limit {
            return Err(Error::invalid(format!(
                "dt = {:e} exceeds the accuracy guard {limit:e} (dt_safety * m dx^2 / hbar)",
                self.dt
            )));
        }
        Ok(())
    }

    fn absorbing(&self) -> bool {
        self.absorbing_margin > 0.0 && self.absorber_strength > 0.0
    }

    /// Cosine-ramp absorbing potential W(x) >= 0 (enters H as -i W).
    pub fn absorber(&self, x: f64) -> f64 {
        if !self.absorbing() {
            return 0.0;
        }
        let g = &self.grid;
        let width = self.absorbing_margin * (g.x_max - g.x_min);
        let depth = if x < g.x_min + width {
            (g.x_min + width - x) / width
        } else if x > g.x_max - width {
            (x - (g.x_max - width)) / width
        } else {
            return 0.0;
        };
        0.5 * self.absorber_strength * (1.0 - (std::f64::consts::PI * depth.min(1.0)).cos())
    }
}

fn discrete_norm(psi: &[Complex64], dx: f64) -> f64 {
    psi.iter().map(|v| v.norm_sqr()).sum::<f64>() * dx
}

/// Gaussian packet sum_j w_j rho(k_j) exp(i k_j (x - x_center)), normalised to
/// unit discrete L2 norm.
pub fn initial_packet(spectrum: &MomentumSpectrum, x_center: f64, xs: &[f64]) -> Result<Vec<Complex64>> {
    if xs.len() < 2 {
        return Err(Error::invalid("packet grid needs at least two points"));
    }
    let clearance = 5.0 / spectrum.delta_k;
    if x_center >= 0.0 || -x_center < clearance {
        return Err(Error::invalid(format!(
            "packet centre {x_center:e} must be at least 5/delta_k = {clearance:e} left of the barrier"
        )));
    }
    if x_center - xs[0] < clearance {
        return Err(Error::invalid("packet centre is within 5/delta_k of the left grid edge"));
    }
    let (lo, hi) = spectrum.window();
    let (k, w) = gauss_legendre_on(spectrum.n_quad, lo, hi)?;
    let mut psi: Vec<Complex64> = xs
        .par_iter()
        .map(|&x| {
            k.iter()
                .zip(&w)
                .map(|(&kk, &ww)| Complex64::from_polar(ww * spectrum.amplitude(kk), kk * (x - x_center)))
                .sum()
        })
        .collect();
    let dx = (xs[xs.len() - 1] - xs[0]) / (xs.len() - 1) as f64;
    let n = discrete_norm(&psi, dx).sqrt();
    psi.iter_mut().for_each(|v| *v /= n);
    Ok(psi)
}

/// Potential of the step barrier plus the pulse train.
///
/// The step takes half its height at x = 0 exactly. With `restrict_pulse`
/// the pulses act only where x > 0.
pub fn step_potential(
    barrier: Barrier,
    pulses: &[ComovingPulse],
    units: QuantumUnits,
    restrict_pulse: bool,
) -> impl Fn(f64, f64) -> f64 + Sync + '_ {
    let v0 = barrier.height(units);
    move |t, x| {
        let step = if x > 0.0 {
            v0
        } else if x == 0.0 {
            0.5 * v0
        } else {
            0.0
        };
        let pulse = if restrict_pulse && x <= 0.0 { 0.0 } else { potential_at(pulses, t, x) };
        step + pulse
    }
}

/// Output of a direct solve.
#[derive(Debug, Clone)]
pub struct OracleRun {
    pub field: ComplexField,
    /// Discrete L2 norm after every step, starting with the initial state.
    pub norms: Vec<f64>,
    /// Largest per-step relative norm change.
    pub max_step_drift: f64,
}

/// Solves the tridiagonal system with constant off-diagonal `off` in place.
fn thomas(diag: &[Complex64], off: Complex64, rhs: &mut [Complex64], scratch: &mut [Complex64]) -> Result<()> {
    let n = diag.len();
    let mut beta = diag[0];
    if beta.norm() == 0.0 {
        return Err(Error::Solver { step: 0, message: "singular tridiagonal system".into() });
    }
    rhs[0] /= beta;
    for i in 1..n {
        scratch[i] = off / beta;
        beta = diag[i] - off * scratch[i];
        if beta.norm() == 0.0 {
            return Err(Error::Solver { step: 0, message: "singular tridiagonal system".into() });
        }
        rhs[i] = (rhs[i] - off * rhs[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        let next = rhs[i + 1];
        rhs[i] -= scratch[i + 1] * next;
    }
    Ok(())
}

/// Crank-Nicolson evolution (1 + i dt H / 2 hbar) psi' = (1 - i dt H / 2 hbar) psi
/// with the potential sampled at mid-step and Dirichlet ends.
pub fn cn_evolve<V>(initial: &[Complex64], potential: &V, config: &OracleConfig, units: QuantumUnits) -> Result<OracleRun>
where
    V: Fn(f64, f64) -> f64 + Sync + ?Sized,
{
    config.check(units)?;
    let g = config.grid;
    if initial.len() != g.nx {
        return Err(Error::GridMismatch(format!("initial state has {} points, grid {}", initial.len(), g.nx)));
    }
    if initial.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
        return Err(Error::Solver { step: 0, message: "non-finite initial state".into() });
    }
    let xs = g.xs();
    let dx = g.dx();
    let peak = initial.iter().fold(0.0_f64, |m, v| m.max(v.norm()));
    if config.absorbing_margin == 0.0 && initial[0].norm().max(initial[g.nx - 1].norm()) > 1e-6 * peak {
        return Err(Error::invalid("initial state is not negligible at the grid edges; widen the grid"));
    }
    // Output rows must fall on the step lattice.
    let mut record_steps = Vec::with_capacity(g.nt);
    for j in 0..g.nt {
        let s = (g.t(j) - g.t_min) / config.dt;
        let r = s.round();
        if (s - r).abs() > 1e-6 {
            return Err(Error::invalid(format!(
                "output time {:e} is not a whole number of steps from {:e}",
                g.t(j),
                g.t_min
            )));
        }
        record_steps.push(r as usize);
    }
    let n_steps = *record_steps.last().unwrap_or(&0);

    let kin = units.hbar * units.hbar / (units.mass * dx * dx);
    let c = Complex64::new(0.0, 0.5 * config.dt / units.hbar);
    let off_a = c * (-0.5 * kin);
    let off_b = -off_a;
    let absorb: Vec<f64> = xs.iter().map(|&x| config.absorber(x)).collect();

    let mut psi = initial.to_vec();
    let mut values = Array2::<Complex64>::zeros((g.nt, g.nx));
    let mut norms = Vec::with_capacity(n_steps + 1);
    let mut norm = discrete_norm(&psi, dx);
    norms.push(norm);
    let mut next_row = 0;
    while next_row < g.nt && record_steps[next_row] == 0 {
        values.row_mut(next_row).assign(&ndarray::ArrayView1::from(&psi));
        next_row += 1;
    }
    let mut h_diag = vec![Complex64::new(0.0, 0.0); g.nx];
    let mut a_diag = vec![Complex64::new(0.0, 0.0); g.nx];
    let mut rhs = vec![Complex64::new(0.0, 0.0); g.nx];
    let mut scratch = vec![Complex64::new(0.0, 0.0); g.nx];
    let mut max_drift = 0.0_f64;
    for step in 1..=n_steps {
        let t_mid = g.t_min + (step as f64 - 0.5) * config.dt;
        h_diag
            .par_iter_mut()
            .zip(xs.par_iter().zip(absorb.par_iter()))
            .for_each(|(h, (&x, &w))| *h = Complex64::new(kin + potential(t_mid, x), -w));
        for i in 0..g.nx {
            a_diag[i] = 1.0 + c * h_diag[i];
            let left = if i > 0 { psi[i - 1] } else { Complex64::new(0.0, 0.0) };
            let right = if i + 1 < g.nx { psi[i + 1] } else { Complex64::new(0.0, 0.0) };
            rhs[i] = (1.0 - c * h_diag[i]) * psi[i] + off_b * (left + right);
        }
        thomas(&a_diag, off_a, &mut rhs, &mut scratch).map_err(|e| match e {
            Error::Solver { message, .. } => Error::Solver { step, message },
            other => other,
        })?;
        std::mem::swap(&mut psi, &mut rhs);
        if psi.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::Solver { step, message: "non-finite amplitude".into() });
        }
        let new_norm = discrete_norm(&psi, dx);
        let drift = (new_norm - norm) / norm;
        max_drift = max_drift.max(drift.abs());
        if config.absorbing() {
            if drift > NORM_DRIFT_LIMIT {
                return Err(Error::Solver { step, message: format!("norm grew by {drift:.3e} with absorbers on") });
            }
        } else if drift.abs() > NORM_DRIFT_LIMIT {
            return Err(Error::Solver { step, message: format!("norm drift {drift:.3e} exceeds {NORM_DRIFT_LIMIT:e}") });
        }
        norm = new_norm;
        norms.push(norm);
        while next_row < g.nt && record_steps[next_row] == step {
            values.row_mut(next_row).assign(&ndarray::ArrayView1::from(&psi));
            next_row += 1;
        }
    }
    Ok(OracleRun { field: ComplexField::new(g, values, "oracle")?, norms, max_step_drift: max_drift })
}

/// Rectangle of the lattice over which two fields are compared.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    pub x_min: f64,
    pub x_max: f64,
    pub t_min: f64,
    pub t_max: f64,
}

impl Region {
    pub fn whole(g: &SpaceTimeGrid) -> Self {
        Self { x_min: g.x_min, x_max: g.x_max, t_min: g.t_min, t_max: g.t_max }
    }
}

fn same_grid(a: &SpaceTimeGrid, b: &SpaceTimeGrid) -> bool {
    let close = |p: f64, q: f64, s: f64| (p - q).abs() <= 1e-12 * s.max(f64::MIN_POSITIVE);
    let sx = (a.x_max - a.x_min).abs().max(a.x_max.abs());
    let st = (a.t_max - a.t_min).abs().max(a.t_max.abs());
    a.nx == b.nx
        && a.nt == b.nt
        && close(a.x_min, b.x_min, sx)
        && close(a.x_max, b.x_max, sx)
        && close(a.t_min, b.t_min, st)
        && close(a.t_max, b.t_max, st)
}

/// Relative L2 distance ||A - e^{i theta} B|| / ||A|| over a region, with the
/// global phase theta chosen to minimise it.
pub fn l2_error(a: &ComplexField, b: &ComplexField, region: Region) -> Result<f64> {
    if !same_grid(&a.grid, &b.grid) {
        return Err(Error::GridMismatch("fields are sampled on different grids".into()));
    }
    let g = a.grid;
    let cells = || {
        (0..g.nt)
            .filter(move |&j| (region.t_min..=region.t_max).contains(&g.t(j)))
            .flat_map(move |j| {
                (0..g.nx).filter(move |&i| (region.x_min..=region.x_max).contains(&g.x(i))).map(move |i| (j, i))
            })
    };
    let mut overlap = Complex64::new(0.0, 0.0);
    let mut na = 0.0;
    for (j, i) in cells() {
        let p = a.values[[j, i]];
        overlap += p * b.values[[j, i]].conj();
        na += p.norm_sqr();
    }
    if na == 0.0 {
        return Err(Error::invalid("reference field vanishes on the comparison region"));
    }
    let phase = Complex64::from_polar(1.0, overlap.arg());
    let d2: f64 = cells().map(|(j, i)| (a.values[[j, i]] - phase * b.values[[j, i]]).norm_sqr()).sum();
    Ok((d2 / na).sqrt())
}

/// Resamples `field` onto `target`: rows must coincide in time, columns are
/// interpolated linearly in x.
pub fn resample(field: &ComplexField, target: &SpaceTimeGrid) -> Result<ComplexField> {
    let g = field.grid;
    if target.x_min < g.x_min || target.x_max > g.x_max {
        return Err(Error::GridMismatch("target x range exceeds the source grid".into()));
    }
    let mut rows = Vec::with_capacity(target.nt);
    for j in 0..target.nt {
        let t = target.t(j);
        let s = (t - g.t_min) / g.dt();
        if (s - s.round()).abs() > 1e-6 || s.round() < 0.0 || s.round() as usize >= g.nt {
            return Err(Error::GridMismatch(format!("time {t:e} is not a row of the source grid")));
        }
        rows.push(s.round() as usize);
    }
    let dx = g.dx();
    let mut out = Array2::<Complex64>::zeros((target.nt, target.nx));
    for (jo, &js) in rows.iter().enumerate() {
        for io in 0..target.nx {
            let s = ((target.x(io) - g.x_min) / dx).clamp(0.0, (g.nx - 1) as f64);
            let i = (s.floor() as usize).min(g.nx - 2);
            let f = s - i as f64;
            out[[jo, io]] = field.values[[js, i]] * (1.0 - f) + field.values[[js, i + 1]] * f;
        }
    }
    ComplexField::new(*target, out, field.provenance.clone())
}

/// Direct solve of a scenario's own setup, with its `[oracle]` settings.
///
/// The incident packet of the analytic expansion is loaded at the oracle
/// start time, so both descriptions share time origin and normalisation.
/// Recorded rows fall on the time lattice of the scenario's positive grid,
/// extended backwards to the start time.
pub fn run_scenario_oracle(engine: &WavepacketEngine, restrict_pulse: Option<bool>) -> Result<OracleRun> {
    let s = engine.scenario();
    let o = s.oracle.ok_or_else(|| Error::invalid("scenario has no [oracle] section"))?;
    let units = s.quantum_units();
    let g = s.grid_positive;
    let dt_out = g.dt();
    if !(dt_out > 0.0) {
        return Err(Error::invalid("positive grid needs at least two time rows"));
    }
    let lead = ((g.t_min - o.t_start) / dt_out).ceil().max(0.0) as usize;
    let t0 = g.t_min - lead as f64 * dt_out;
    let substeps = (dt_out / o.dt).ceil().max(1.0);
    let grid = SpaceTimeGrid::new(o.x_min, o.x_max, o.nx, t0, g.t_max, g.nt + lead)?;
    let config = OracleConfig {
        grid,
        dt: dt_out / substeps,
        absorbing_margin: o.absorbing_margin,
        absorber_strength: o.absorber_strength * units.hbar * units.hbar * s.spectrum.k0 * s.spectrum.k0 / units.mass,
        restrict_pulse_to_positive_x: restrict_pulse.unwrap_or(o.restrict_pulse),
        dt_safety: o.dt_safety,
    };
    let xs = grid.xs();
    let initial = engine.incident(t0, &xs)?;
    let peak = initial.iter().fold(0.0_f64, |m, v| m.max(v.norm()));
    let inside = xs.iter().zip(&initial).filter(|(x, _)| **x >= 0.0).fold(0.0_f64, |m, (_, v)| m.max(v.norm()));
    if inside > 1e-6 * peak {
        return Err(Error::invalid(format!(
            "incident packet at the oracle start time reaches the barrier ({:.1e} of its peak at x >= 0); start earlier",
            inside / peak
        )));
    }
    let v = step_potential(s.barrier, &s.pulses, units, config.restrict_pulse_to_positive_x);
    cn_evolve(&initial, &v, &config, units)
}

/// Analytic field and oracle field on the scenario's positive grid.
#[derive(Debug, Clone)]
pub struct Comparison {
    pub analytic: ComplexField,
    pub oracle: ComplexField,
    pub l2_error: f64,
    pub max_step_drift: f64,
}

pub fn compare_with_oracle(engine: &WavepacketEngine) -> Result<Comparison> {
    let run = run_scenario_oracle(engine, None)?;
    let analytic = engine.psi_field()?;
    let oracle = resample(&run.field, &engine.scenario().grid_positive)?;
    let l2_error = l2_error(&analytic, &oracle, Region::whole(&analytic.grid))?;
    Ok(Comparison { analytic, oracle, l2_error, max_step_drift: run.max_step_drift })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thomas_solves_small_system() {
        let diag = vec![Complex64::new(4.0, 1.0); 5];
        let off = Complex64::new(1.0, -0.5);
        let x: Vec<Complex64> = (0..5).map(|i| Complex64::new(i as f64, 1.0 - i as f64)).collect();
        let mut rhs: Vec<Complex64> = (0..5)
            .map(|i| {
                let l = if i > 0 { x[i - 1] } else { 0.0.into() };
                let r = if i < 4 { x[i + 1] } else { 0.0.into() };
                diag[i] * x[i] + off * (l + r)
            })
            .collect();
        let mut s = vec![Complex64::new(0.0, 0.0); 5];
        thomas(&diag, off, &mut rhs, &mut s).unwrap();
        for (a, b) in rhs.iter().zip(&x) {
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn absorber_ramps_from_zero() {
        let cfg = OracleConfig {
            grid: SpaceTimeGrid::new(-10.0, 10.0, 201, 0.0, 1.0, 2).unwrap(),
            dt: 0.01,
            absorbing_margin: 0.1,
            absorber_strength: 2.0,
            restrict_pulse_to_positive_x: true,
            dt_safety: 50.0,
        };
        assert_eq!(cfg.absorber(0.0), 0.0);
        assert_eq!(cfg.absorber(-8.0), 0.0);
        assert!((cfg.absorber(-10.0) - 2.0).abs() < 1e-12);
        assert!((cfg.absorber(9.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn l2_error_gauge_and_identity() {
        let g = SpaceTimeGrid::new(0.0, 1.0, 4, 0.0, 1.0, 3).unwrap();
        let v = Array2::from_shape_fn((3, 4), |(j, i)| Complex64::new(i as f64 + 1.0, j as f64));
        let a = ComplexField::new(g, v.clone(), "a").unwrap();
        let b = ComplexField::new(g, v.mapv(|z| z * Complex64::from_polar(1.0, 0.7)), "b").unwrap();
        assert!(l2_error(&a, &a, Region::whole(&g)).unwrap() < 1e-15);
        assert!(l2_error(&a, &b, Region::whole(&g)).unwrap() < 1e-15);
    }
}
