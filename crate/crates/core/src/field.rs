//! Space-time assembly of the evanescent field, its pulsed counterpart, the
//! free-space field on x < 0 and the echo regenerated from the boundary trace.

use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use ndarray::{Array2, ArrayView1, Axis};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::pulse::{phase_kernel, PhaseKernel, EXPONENT_LIMIT};
use crate::quadrature::spectral_nodes;
use crate::scattering::ScatteringAmplitudes;
use crate::scenario::{Scenario, SpaceTimeGrid};
use crate::units::QuantumUnits;

/// Relative field change on node doubling above which a run is rejected.
pub const CONVERGENCE_TOLERANCE: f64 = 1e-6;

/// Complex amplitude sampled on a space-time lattice; rows are times.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    pub grid: SpaceTimeGrid,
    pub values: Array2<Complex64>,
    pub provenance: String,
}

impl ComplexField {
    pub fn new(grid: SpaceTimeGrid, values: Array2<Complex64>, provenance: impl Into<String>) -> Result<Self> {
        if values.dim() != (grid.nt, grid.nx) {
            return Err(Error::GridMismatch(format!(
                "array shape {:?} does not match grid ({}, {})",
                values.dim(),
                grid.nt,
                grid.nx
            )));
        }
        if let Some(((j, i), _)) = values.indexed_iter().find(|(_, v)| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::Overflow(format!("non-finite value at t = {:e}, x = {:e}", grid.t(j), grid.x(i))));
        }
        Ok(Self { grid, values, provenance: provenance.into() })
    }

    pub fn intensity(&self) -> Array2<f64> {
        self.values.mapv(|v| v.norm_sqr())
    }

    pub fn row(&self, j: usize) -> ArrayView1<'_, Complex64> {
        self.values.row(j)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    /// Index of the time row nearest to `t`.
    pub fn time_index(&self, t: f64) -> Result<usize> {
        let g = &self.grid;
        let tol = 1e-9 * (g.t_max - g.t_min).abs().max(f64::MIN_POSITIVE);
        if t < g.t_min - tol || t > g.t_max + tol {
            return Err(Error::invalid(format!("time {t:e} outside grid [{:e}, {:e}]", g.t_min, g.t_max)));
        }
        if g.nt == 1 {
            return Ok(0);
        }
        Ok((((t - g.t_min) / g.dt()).round() as usize).min(g.nt - 1))
    }
}

/// Field at the barrier edge x = 0+ as a function of time.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryTrace {
    pub times: Vec<f64>,
    pub intensity: Vec<f64>,
    pub amplitude: Vec<Complex64>,
}

impl BoundaryTrace {
    pub fn from_amplitude(times: Vec<f64>, amplitude: Vec<Complex64>) -> Result<Self> {
        if times.len() != amplitude.len() {
            return Err(Error::GridMismatch("trace times and amplitudes differ in length".into()));
        }
        let intensity = amplitude.iter().map(|a| a.norm_sqr()).collect();
        Ok(Self { times, intensity, amplitude })
    }

    /// Pointwise difference, used to isolate the pulse-induced part.
    pub fn difference(&self, other: &BoundaryTrace) -> Result<BoundaryTrace> {
        if self.times != other.times {
            return Err(Error::GridMismatch("traces sampled at different times".into()));
        }
        let amp = self.amplitude.iter().zip(&other.amplitude).map(|(a, b)| a - b).collect();
        Self::from_amplitude(self.times.clone(), amp)
    }
}

#[derive(Debug, Clone, Copy)]
struct Node {
    k: f64,
    kappa: Complex64,
    /// Quadrature weight times rho(k).
    weight: f64,
    t_amp: Complex64,
    r_amp: Complex64,
    omega: f64,
}

fn build_nodes(s: &Scenario, n: usize, units: QuantumUnits) -> Result<Vec<Node>> {
    let (lo, hi) = s.spectrum.window();
    let q = spectral_nodes(lo, hi, s.barrier.a, n)?;
    q.k.iter()
        .zip(&q.weight)
        .map(|(&k, &w)| {
            let amp = ScatteringAmplitudes::new(k, s.barrier.a)?;
            Ok(Node {
                k,
                kappa: amp.kappa,
                weight: w * s.spectrum.amplitude(k),
                t_amp: amp.t_amp,
                r_amp: amp.r_amp,
                omega: units.omega(k),
            })
        })
        .collect()
}

/// Spectral expansion of the packet for one scenario.
///
/// All fields share a single normalisation: the peak of |psi0| over the
/// positive grid is one.
pub struct WavepacketEngine {
    scenario: Scenario,
    units: QuantumUnits,
    nodes: Vec<Node>,
    raw_psi0: OnceLock<Arc<Array2<Complex64>>>,
}

impl WavepacketEngine {
    pub fn new(scenario: &Scenario) -> Result<Self> {
        Self::with_nodes(scenario, scenario.spectrum.n_quad)
    }

    pub fn with_nodes(scenario: &Scenario, n_quad: usize) -> Result<Self> {
        scenario.validate()?;
        let units = scenario.quantum_units();
        let nodes = build_nodes(scenario, n_quad, units)?;
        Ok(Self { scenario: scenario.clone(), units, nodes, raw_psi0: OnceLock::new() })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    fn psi0_raw(&self) -> Result<Arc<Array2<Complex64>>> {
        if let Some(v) = self.raw_psi0.get() {
            return Ok(v.clone());
        }
        let g = self.scenario.grid_positive;
        let v = Arc::new(self.assemble(&g.ts(), &g.xs(), false)?);
        Ok(self.raw_psi0.get_or_init(|| v).clone())
    }

    /// Factor mapping the raw expansion onto the normalised field.
    pub fn normalization(&self) -> Result<f64> {
        let raw = self.psi0_raw()?;
        let peak = raw.iter().fold(0.0_f64, |m, v| m.max(v.norm()));
        if peak <= 0.0 || !peak.is_finite() {
            return Err(Error::Overflow(format!("cannot normalise: peak |psi0| = {peak:e}")));
        }
        Ok(1.0 / peak)
    }

    /// Raw (unnormalised) expansion on x >= 0 at arbitrary sample points.
    fn assemble(&self, ts: &[f64], xs: &[f64], with_pulses: bool) -> Result<Array2<Complex64>> {
        let pulses = if with_pulses { self.scenario.pulses.as_slice() } else { &[] };
        let e_alpha: Vec<Vec<Complex64>> = pulses
            .iter()
            .map(|p| xs.iter().map(|&x| Complex64::from_polar(1.0, p.alpha(x))).collect())
            .collect();
        let mut out = Array2::<Complex64>::zeros((ts.len(), xs.len()));
        out.axis_iter_mut(Axis(0))
            .into_par_iter()
            .zip(ts.par_iter())
            .try_for_each(|(mut row, &t)| -> Result<()> {
                let mut kern = vec![PhaseKernel::ZERO; pulses.len()];
                for n in &self.nodes {
                    for (kp, p) in kern.iter_mut().zip(pulses) {
                        *kp = phase_kernel(p, n.kappa, t, self.units)?;
                    }
                    let c = n.t_amp * n.weight;
                    for (i, (&x, v)) in xs.iter().zip(row.iter_mut()).enumerate() {
                        let mut z = Complex64::new(-n.omega * t, 0.0) * Complex64::i() - n.kappa * x;
                        for (kp, ea) in kern.iter().zip(&e_alpha) {
                            z += Complex64::i() * kp.phase(ea[i]);
                        }
                        if z.re > EXPONENT_LIMIT {
                            return Err(Error::Overflow(format!(
                                "exponent {:.3e} for k = {:e} at t = {t:e}, x = {x:e}",
                                z.re, n.k
                            )));
                        }
                        *v += c * z.exp();
                    }
                }
                Ok(())
            })?;
        Ok(out)
    }

    /// Unperturbed field on the positive grid.
    pub fn psi0_field(&self) -> Result<ComplexField> {
        let norm = self.normalization()?;
        let raw = self.psi0_raw()?;
        ComplexField::new(self.scenario.grid_positive, raw.mapv(|v| v * norm), "psi0")
    }

    /// Field with the comoving phase of every pulse applied.
    pub fn psi_field(&self) -> Result<ComplexField> {
        if self.scenario.pulses.is_empty() {
            let mut f = self.psi0_field()?;
            f.provenance = "psi".into();
            return Ok(f);
        }
        let norm = self.normalization()?;
        let g = self.scenario.grid_positive;
        let raw = self.assemble(&g.ts(), &g.xs(), true)?;
        ComplexField::new(g, raw.mapv(|v| v * norm), "psi")
    }

    /// Incident plus reflected field on the negative grid.
    pub fn freespace_field(&self) -> Result<ComplexField> {
        let g = self
            .scenario
            .grid_negative
            .ok_or_else(|| Error::invalid("scenario has no negative grid"))?;
        if g.x_max > 0.0 {
            return Err(Error::invalid("free-space grid must lie in x <= 0"));
        }
        let norm = self.normalization()?;
        let xs = g.xs();
        let ts = g.ts();
        let mut out = Array2::<Complex64>::zeros((g.nt, g.nx));
        out.axis_iter_mut(Axis(0)).into_par_iter().zip(ts.par_iter()).for_each(|(mut row, &t)| {
            for n in &self.nodes {
                let c = n.weight * norm;
                let time = Complex64::from_polar(1.0, -n.omega * t);
                for (&x, v) in xs.iter().zip(row.iter_mut()) {
                    let e = Complex64::from_polar(1.0, n.k * x);
                    *v += c * time * (e + n.r_amp * e.conj());
                }
            }
        });
        ComplexField::new(g, out, "freespace")
    }

    /// Normalised field at arbitrary points, with or without pulses.
    pub fn sample(&self, ts: &[f64], xs: &[f64], with_pulses: bool) -> Result<Array2<Complex64>> {
        let norm = self.normalization()?;
        Ok(self.assemble(ts, xs, with_pulses)?.mapv(|v| v * norm))
    }

    /// Incident packet sum_j w_j rho(k_j) exp(i k_j x - i omega_j t) at one
    /// time, with the normalisation of the other fields.
    pub fn incident(&self, t: f64, xs: &[f64]) -> Result<Vec<Complex64>> {
        let norm = self.normalization()?;
        Ok(xs
            .par_iter()
            .map(|&x| {
                self.nodes
                    .iter()
                    .map(|n| Complex64::from_polar(n.weight * norm, n.k * x - n.omega * t))
                    .sum()
            })
            .collect())
    }

    /// Field change when the node count is doubled.
    ///
    /// Compared on a sub-lattice of at most `max_rows` x `max_cols` points,
    /// relative to the largest amplitude there.
    pub fn convergence(&self, max_rows: usize, max_cols: usize) -> Result<f64> {
        let g = self.scenario.grid_positive;
        let pick = |n: usize, m: usize| -> Vec<usize> {
            let stride = n.div_ceil(m.max(1)).max(1);
            let mut v: Vec<usize> = (0..n).step_by(stride).collect();
            if v.last() != Some(&(n - 1)) {
                v.push(n - 1);
            }
            v
        };
        let ts: Vec<f64> = pick(g.nt, max_rows).into_iter().map(|j| g.t(j)).collect();
        let xs: Vec<f64> = pick(g.nx, max_cols).into_iter().map(|i| g.x(i)).collect();
        let pulsed = !self.scenario.pulses.is_empty();
        let fine = WavepacketEngine::with_nodes(&self.scenario, 2 * self.nodes.len())?;
        let a = self.assemble(&ts, &xs, pulsed)?;
        let b = fine.assemble(&ts, &xs, pulsed)?;
        let scale = a.iter().fold(0.0_f64, |m, v| m.max(v.norm()));
        let diff = a.iter().zip(b.iter()).fold(0.0_f64, |m, (x, y)| m.max((x - y).norm()));
        Ok(if scale > 0.0 { diff / scale } else { diff })
    }

    /// Boundary trace of the pulsed field minus that of the unperturbed one.
    pub fn pulse_induced_trace(&self) -> Result<BoundaryTrace> {
        let g = self.scenario.grid_positive;
        let ts = g.ts();
        let x0 = [0.0];
        let a = self.sample(&ts, &x0, true)?;
        let b = self.sample(&ts, &x0, false)?;
        BoundaryTrace::from_amplitude(ts, a.iter().zip(b.iter()).map(|(p, q)| p - q).collect())
    }
}

pub fn psi0_field(scenario: &Scenario) -> Result<ComplexField> {
    WavepacketEngine::new(scenario)?.psi0_field()
}

pub fn psi_field(scenario: &Scenario) -> Result<ComplexField> {
    WavepacketEngine::new(scenario)?.psi_field()
}

pub fn freespace_field(scenario: &Scenario) -> Result<ComplexField> {
    WavepacketEngine::new(scenario)?.freespace_field()
}

/// Field at x = 0, interpolating linearly between the two nearest columns.
pub fn boundary_trace(field: &ComplexField) -> Result<BoundaryTrace> {
    let g = &field.grid;
    let span = (g.x_max - g.x_min).abs().max(f64::MIN_POSITIVE);
    if g.x_min > 1e-12 * span || g.x_max < -1e-12 * span {
        return Err(Error::GridMismatch(format!(
            "grid [{:e}, {:e}] does not cover x = 0",
            g.x_min, g.x_max
        )));
    }
    let amplitude: Vec<Complex64> = if g.nx == 1 {
        field.values.column(0).to_vec()
    } else {
        let s = ((0.0 - g.x_min) / g.dx()).clamp(0.0, (g.nx - 1) as f64);
        let i = (s.floor() as usize).min(g.nx - 2);
        let f = s - i as f64;
        if f == 0.0 {
            field.values.column(i).to_vec()
        } else {
            field
                .values
                .column(i)
                .iter()
                .zip(field.values.column(i + 1))
                .map(|(a, b)| a * (1.0 - f) + b * f)
                .collect()
        }
    };
    BoundaryTrace::from_amplitude(g.ts(), amplitude)
}

/// Echo field together with the spectral weight dropped at omega <= 0.
#[derive(Debug, Clone)]
pub struct EchoField {
    pub field: ComplexField,
    pub discarded_weight: f64,
}

/// Amplitude at each window end, relative to the peak, above which the
/// frequency decomposition is considered to leak.
pub const ECHO_EDGE_LIMIT: f64 = 1e-3;

/// Regenerates the outgoing wave on x < 0 from a boundary amplitude.
///
/// The trace is demodulated by the carrier hbar k0^2 / 2m before the discrete
/// transform so that coarse time sampling does not alias the fast phase. Each
/// frequency omega > 0 is sent out as exp(-i k(omega) x - i omega t).
pub fn echo_field(trace: &BoundaryTrace, scenario: &Scenario) -> Result<EchoField> {
    let g = scenario
        .grid_negative
        .ok_or_else(|| Error::invalid("echo field needs a negative grid"))?;
    let n = trace.times.len();
    if n < 2 {
        return Err(Error::invalid("echo reconstruction needs at least two trace samples"));
    }
    let dt = (trace.times[n - 1] - trace.times[0]) / (n - 1) as f64;
    let uniform = trace
        .times
        .iter()
        .enumerate()
        .all(|(j, &t)| (t - (trace.times[0] + j as f64 * dt)).abs() <= 1e-9 * dt.abs());
    if !(dt > 0.0) || !uniform {
        return Err(Error::invalid("trace must be sampled uniformly in time"));
    }
    let peak = trace.amplitude.iter().fold(0.0_f64, |m, a| m.max(a.norm()));
    let zero = ComplexField::new(g, Array2::zeros((g.nt, g.nx)), "echo")?;
    if peak == 0.0 {
        return Ok(EchoField { field: zero, discarded_weight: 0.0 });
    }
    let edge = trace.amplitude[0].norm().max(trace.amplitude[n - 1].norm());
    if edge > ECHO_EDGE_LIMIT * peak {
        return Err(Error::SpectralLeakage(format!(
            "trace amplitude at the window edge is {:.3e} of its peak; extend the time window",
            edge / peak
        )));
    }
    let units = scenario.quantum_units();
    let carrier = units.omega(scenario.spectrum.k0);
    let t0 = trace.times[0];
    let mut buf: Vec<Complex64> = trace
        .times
        .iter()
        .zip(&trace.amplitude)
        .map(|(&t, &a)| a * Complex64::from_polar(1.0, carrier * t))
        .collect();
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    let period = n as f64 * dt;
    let mut comps = Vec::with_capacity(n);
    let (mut kept, mut dropped) = (0.0, 0.0);
    for (m, b) in buf.iter().enumerate() {
        let signed = if m <= n / 2 { m as f64 } else { m as f64 - n as f64 };
        let big_omega = 2.0 * PI * signed / period;
        let amp = b * Complex64::from_polar(1.0 / n as f64, big_omega * t0);
        let omega = carrier + big_omega;
        if omega <= 0.0 {
            dropped += amp.norm_sqr();
            continue;
        }
        kept += amp.norm_sqr();
        comps.push((amp, omega, (2.0 * units.mass * omega / units.hbar).sqrt()));
    }
    let xs = g.xs();
    let ts = g.ts();
    let mut out = Array2::<Complex64>::zeros((g.nt, g.nx));
    out.axis_iter_mut(Axis(0)).into_par_iter().zip(ts.par_iter()).for_each(|(mut row, &t)| {
        for &(amp, omega, k) in &comps {
            let time = amp * Complex64::from_polar(1.0, -omega * t);
            for (&x, v) in xs.iter().zip(row.iter_mut()) {
                *v += time * Complex64::from_polar(1.0, -k * x);
            }
        }
    });
    let total = kept + dropped;
    Ok(EchoField {
        field: ComplexField::new(g, out, "echo")?,
        discarded_weight: if total > 0.0 { dropped / total } else { 0.0 },
    })
}
