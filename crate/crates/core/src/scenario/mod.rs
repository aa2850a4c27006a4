//! Scenario description: species, spectrum, barrier, pulses, grids and
//! output options, plus the SI/dimensionless conversion.

mod parse;

use std::path::PathBuf;

pub use parse::{canonical_text, load_scenario, parse_scenario, validate_scenario, validate_text};

use crate::error::{Diagnostic, Error, Result};
use crate::pulse::{check_train, ComovingPulse};
use crate::units::{AtomSpecies, QuantumUnits, Scales, UnitsMode, HBAR};

/// Gaussian momentum distribution rho(k) = exp(-(k - k0)^2 / (2 delta_k^2)).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentumSpectrum {
    pub k0: f64,
    pub delta_k: f64,
    /// Half-width of the integration window in units of delta_k.
    pub n_sigma: f64,
    pub n_quad: usize,
}

impl MomentumSpectrum {
    pub const DEFAULT_N_SIGMA: f64 = 5.0;
    pub const DEFAULT_N_QUAD: usize = 801;

    pub fn amplitude(&self, k: f64) -> f64 {
        let d = (k - self.k0) / self.delta_k;
        (-0.5 * d * d).exp()
    }

    /// Integration window, clipped at k = 0.
    pub fn window(&self) -> (f64, f64) {
        let h = self.n_sigma * self.delta_k;
        ((self.k0 - h).max(0.0), self.k0 + h)
    }

    pub fn check(&self) -> std::result::Result<(), String> {
        if !(self.k0.is_finite() && self.k0 > 0.0) {
            return Err(format!("k0 must be positive, got {}", self.k0));
        }
        if !(self.delta_k > 0.0 && self.delta_k < self.k0) {
            return Err(format!("delta_k must satisfy 0 < delta_k < k0, got {}", self.delta_k));
        }
        if !(self.n_sigma >= 3.0 && self.n_sigma.is_finite()) {
            return Err(format!("n_sigma must be at least 3, got {}", self.n_sigma));
        }
        if self.n_quad < 2 {
            return Err(format!("n_quad must be at least 2, got {}", self.n_quad));
        }
        Ok(())
    }
}

/// Potential step of height hbar^2 a^2 / 2m occupying x > 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Barrier {
    pub a: f64,
}

impl Barrier {
    pub fn height(&self, units: QuantumUnits) -> f64 {
        units.energy(self.a)
    }
}

/// Uniform tensor-product lattice; both ends are included.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpaceTimeGrid {
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
    pub t_min: f64,
    pub t_max: f64,
    pub nt: usize,
}

impl SpaceTimeGrid {
    pub fn new(x_min: f64, x_max: f64, nx: usize, t_min: f64, t_max: f64, nt: usize) -> Result<Self> {
        let g = Self { x_min, x_max, nx, t_min, t_max, nt };
        g.check().map_err(Error::InvalidArgument)?;
        Ok(g)
    }

    pub fn check(&self) -> std::result::Result<(), String> {
        let finite = [self.x_min, self.x_max, self.t_min, self.t_max].iter().all(|v| v.is_finite());
        if !finite {
            return Err("grid bounds must be finite".into());
        }
        if self.nx == 0 || self.nt == 0 {
            return Err("grid needs at least one point per axis".into());
        }
        if self.x_max < self.x_min || (self.nx > 1 && self.x_max == self.x_min) {
            return Err(format!("grid x range [{}, {}] is empty", self.x_min, self.x_max));
        }
        if self.t_max < self.t_min || (self.nt > 1 && self.t_max == self.t_min) {
            return Err(format!("grid t range [{}, {}] is empty", self.t_min, self.t_max));
        }
        Ok(())
    }

    pub fn dx(&self) -> f64 {
        if self.nx > 1 {
            (self.x_max - self.x_min) / (self.nx - 1) as f64
        } else {
            0.0
        }
    }

    pub fn dt(&self) -> f64 {
        if self.nt > 1 {
            (self.t_max - self.t_min) / (self.nt - 1) as f64
        } else {
            0.0
        }
    }

    pub fn x(&self, i: usize) -> f64 {
        if i + 1 == self.nx { self.x_max } else { self.x_min + i as f64 * self.dx() }
    }

    pub fn t(&self, j: usize) -> f64 {
        if j + 1 == self.nt { self.t_max } else { self.t_min + j as f64 * self.dt() }
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.nx).map(|i| self.x(i)).collect()
    }

    pub fn ts(&self) -> Vec<f64> {
        (0..self.nt).map(|j| self.t(j)).collect()
    }

    fn scaled(&self, length: f64, time: f64) -> Self {
        Self {
            x_min: self.x_min * length,
            x_max: self.x_max * length,
            nx: self.nx,
            t_min: self.t_min * time,
            t_max: self.t_max * time,
            nt: self.nt,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FieldKind {
    /// Unperturbed evanescent field on x >= 0.
    Psi0,
    /// Evanescent field with the comoving phase applied.
    Psi,
    /// Incident plus reflected field on x < 0.
    FreeSpace,
    /// Reflected field regenerated from the boundary trace.
    Echo,
}

impl FieldKind {
    pub fn name(&self) -> &'static str {
        match self {
            FieldKind::Psi0 => "psi0",
            FieldKind::Psi => "psi",
            FieldKind::FreeSpace => "freespace",
            FieldKind::Echo => "echo",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "psi0" => Some(FieldKind::Psi0),
            "psi" => Some(FieldKind::Psi),
            "freespace" => Some(FieldKind::FreeSpace),
            "echo" => Some(FieldKind::Echo),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub name: String,
    pub fields: Vec<FieldKind>,
    pub directory: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisConfig {
    /// Peaks below this fraction of the reference intensity are ignored.
    pub revival_threshold: f64,
    /// Only peaks after this time count; defaults to six packet transit times.
    pub revival_after: Option<f64>,
    /// Position at which the echo field is regenerated (x < 0).
    pub echo_x: Option<f64>,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self { revival_threshold: 0.01, revival_after: None, echo_x: None }
    }
}

/// Settings of the Crank-Nicolson reference solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleSettings {
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
    pub dt: f64,
    /// Time at which the incident packet is loaded onto the grid.
    pub t_start: f64,
    /// Fraction of the domain covered by the absorbing layer at each end.
    pub absorbing_margin: f64,
    /// Peak absorber strength in units of hbar^2 k0^2 / m.
    pub absorber_strength: f64,
    /// Apply pulse potentials only where x > 0.
    pub restrict_pulse: bool,
    /// Accuracy guard: dt may not exceed dt_safety * m dx^2 / hbar.
    pub dt_safety: f64,
}

impl OracleSettings {
    pub const DEFAULT_ABSORBING_MARGIN: f64 = 0.15;
    pub const DEFAULT_ABSORBER_STRENGTH: f64 = 0.5;
    pub const DEFAULT_DT_SAFETY: f64 = 50.0;

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.nx - 1) as f64
    }
}

impl OracleSettings {
    pub fn check(&self) -> std::result::Result<(), String> {
        if !(self.x_min < 0.0 && self.x_max > 0.0) {
            return Err("oracle domain must straddle x = 0".into());
        }
        if self.nx < 3 {
            return Err("oracle needs at least three grid points".into());
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(format!("oracle dt must be positive, got {}", self.dt));
        }
        if !(0.0..0.25).contains(&self.absorbing_margin) {
            return Err(format!("absorbing margin must lie in [0, 0.25), got {}", self.absorbing_margin));
        }
        if !(self.dt_safety > 0.0 && self.dt_safety.is_finite()) {
            return Err("oracle dt_safety must be positive".into());
        }
        if !(self.absorber_strength >= 0.0 && self.absorber_strength.is_finite()) {
            return Err("absorber strength must be non-negative".into());
        }
        Ok(())
    }
}

/// A complete simulation description.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub species: AtomSpecies,
    pub spectrum: MomentumSpectrum,
    pub barrier: Barrier,
    pub pulses: Vec<ComovingPulse>,
    /// Lattice on x >= 0 for the evanescent fields.
    pub grid_positive: SpaceTimeGrid,
    /// Lattice on x < 0 for free-space and echo fields.
    pub grid_negative: Option<SpaceTimeGrid>,
    pub units_mode: UnitsMode,
    pub output: OutputConfig,
    pub analysis: AnalysisConfig,
    pub oracle: Option<OracleSettings>,
}

impl Scenario {
    pub fn quantum_units(&self) -> QuantumUnits {
        match self.units_mode {
            UnitsMode::Si => QuantumUnits::si(self.species.mass),
            UnitsMode::Dimensionless(_) => QuantumUnits { hbar: 1.0, mass: self.species.mass },
        }
    }

    pub fn name(&self) -> &str {
        &self.output.name
    }

    /// Group velocity at the spectrum centre.
    pub fn v0(&self) -> f64 {
        self.quantum_units().velocity(self.spectrum.k0)
    }

    /// Default start of the revival search: six passage times 1/(delta_k v0).
    pub fn revival_after(&self) -> f64 {
        self.analysis
            .revival_after
            .unwrap_or(6.0 / (self.spectrum.delta_k * self.v0()))
    }

    /// Every invariant violation, without running anything.
    pub fn diagnostics(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        let mut push = |r: std::result::Result<(), String>| {
            if let Err(m) = r {
                out.push(Diagnostic::new(m));
            }
        };
        push(self.species.check());
        push(self.spectrum.check());
        push(if self.barrier.a > 0.0 && self.barrier.a.is_finite() {
            Ok(())
        } else {
            Err(format!("barrier a must be positive, got {}", self.barrier.a))
        });
        for p in &self.pulses {
            push(p.check());
        }
        push(check_train(&self.pulses));
        push(self.grid_positive.check());
        push(if self.grid_positive.x_min >= 0.0 {
            Ok(())
        } else {
            Err("main grid must lie in x >= 0; use the negative grid for x < 0".into())
        });
        if let Some(g) = &self.grid_negative {
            push(g.check());
            push(if g.x_max <= 0.0 { Ok(()) } else { Err("negative grid must lie in x <= 0".into()) });
        }
        push(if self.analysis.revival_threshold > 0.0 && self.analysis.revival_threshold < 1.0 {
            Ok(())
        } else {
            Err("revival threshold must lie in (0, 1)".into())
        });
        if let Some(x) = self.analysis.echo_x {
            push(if x < 0.0 { Ok(()) } else { Err("echo_x must be negative".into()) });
        }
        if let Some(o) = &self.oracle {
            push(o.check());
        }
        push(check_name(&self.output.name));
        if self.output.fields.is_empty() {
            out.push(Diagnostic::new("output must request at least one field"));
        }
        let needs_negative = self.output.fields.iter().any(|f| matches!(f, FieldKind::FreeSpace | FieldKind::Echo));
        if needs_negative && self.grid_negative.is_none() {
            out.push(Diagnostic::new("freespace and echo fields need a negative grid (neg_x_min, neg_x_max, neg_nx)"));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.diagnostics();
        if d.is_empty() { Ok(()) } else { Err(Error::Scenario(d)) }
    }
}

fn check_name(name: &str) -> std::result::Result<(), String> {
    let ok = !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'));
    if ok { Ok(()) } else { Err(format!("output name '{name}' must be non-empty and filename-safe")) }
}

struct Factors {
    wavenumber: f64,
    length: f64,
    time: f64,
    energy: f64,
    mass: f64,
}

fn rescale(s: &Scenario, f: &Factors, units: UnitsMode) -> Scenario {
    let mut out = s.clone();
    out.units_mode = units;
    out.species.mass *= f.mass;
    out.spectrum.k0 *= f.wavenumber;
    out.spectrum.delta_k *= f.wavenumber;
    out.barrier.a *= f.wavenumber;
    for p in &mut out.pulses {
        p.amplitude_c *= f.energy;
        p.epsilon *= f.time;
        p.tau *= f.time;
        p.tau1 *= f.time;
        p.t_start *= f.time;
        p.lambda_spatial *= f.length;
    }
    out.grid_positive = s.grid_positive.scaled(f.length, f.time);
    out.grid_negative = s.grid_negative.map(|g| g.scaled(f.length, f.time));
    out.analysis.revival_after = s.analysis.revival_after.map(|t| t * f.time);
    out.analysis.echo_x = s.analysis.echo_x.map(|x| x * f.length);
    out.oracle = s.oracle.map(|o| OracleSettings {
        x_min: o.x_min * f.length,
        x_max: o.x_max * f.length,
        dt: o.dt * f.time,
        t_start: o.t_start * f.time,
        ..o
    });
    out
}

/// Rewrites an SI scenario with hbar = m = k0 = 1.
pub fn nondimensionalize(s: &Scenario) -> Result<Scenario> {
    if s.units_mode.is_dimensionless() {
        return Err(Error::invalid("scenario is already dimensionless"));
    }
    let sc = Scales::new(s.spectrum.k0, s.species.mass, HBAR)?;
    let f = Factors {
        wavenumber: sc.length,
        length: sc.wavenumber,
        time: 1.0 / sc.time,
        energy: 1.0 / sc.energy,
        mass: 1.0 / sc.mass,
    };
    Ok(rescale(s, &f, UnitsMode::Dimensionless(sc)))
}

/// Inverse of [`nondimensionalize`].
pub fn dimensionalize(s: &Scenario) -> Result<Scenario> {
    let UnitsMode::Dimensionless(sc) = s.units_mode else {
        return Err(Error::invalid("scenario is already in SI units"));
    };
    let f = Factors {
        wavenumber: sc.wavenumber,
        length: sc.length,
        time: sc.time,
        energy: sc.energy,
        mass: sc.mass,
    };
    Ok(rescale(s, &f, UnitsMode::Si))
}
