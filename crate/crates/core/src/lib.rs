//! Atom meta-optics: evanescent matter-wave packets at a step barrier,
//! pulsed comoving potentials acting through an analytic phase factor, and a
//! direct Schrodinger solver to check them against.

pub mod analysis;
pub mod error;
pub mod export;
pub mod field;
pub mod oracle;
pub mod pulse;
pub mod quadrature;
pub mod scattering;
pub mod scenario;
pub mod units;

pub use analysis::{
    approximation_ratio, detect_revivals, moments_series, packet_moments, probability_current, Moments, Peak,
    RatioEstimate, RevivalReport,
};
pub use error::{Diagnostic, Error, Result};
pub use field::{
    boundary_trace, echo_field, freespace_field, psi0_field, psi_field, BoundaryTrace, ComplexField, EchoField,
    WavepacketEngine,
};
pub use num_complex::Complex64;
pub use oracle::{cn_evolve, initial_packet, l2_error, step_potential, OracleConfig, OracleRun, Region};
pub use pulse::{comoving_phase, phi_pro, potential_at, ComovingPulse};
pub use scattering::{kappa, reflection, refractive_index, transmission, ScatteringAmplitudes};
pub use scenario::{
    canonical_text, dimensionalize, load_scenario, nondimensionalize, parse_scenario, validate_scenario,
    AnalysisConfig, Barrier, FieldKind, MomentumSpectrum, OracleSettings, OutputConfig, Scenario, SpaceTimeGrid,
};
pub use units::{pulse_amplitude, AtomSpecies, QuantumUnits, Scales, UnitsMode};
