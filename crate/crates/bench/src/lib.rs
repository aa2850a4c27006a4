//! Shared fixtures for the benchmarks.

use metaoptics::units::{pulse_amplitude, AtomSpecies, GAUSS};
use metaoptics::{
    AnalysisConfig, Barrier, ComovingPulse, FieldKind, MomentumSpectrum, OutputConfig, Scenario, SpaceTimeGrid,
    UnitsMode,
};

/// Semi-evanescent packet with one 50 G pulse on a small lattice.
pub fn pulsed_scenario(n_quad: usize, nx: usize, nt: usize) -> Scenario {
    let species = AtomSpecies::argon_metastable();
    let k0 = 2.244e9;
    Scenario {
        pulses: vec![ComovingPulse {
            amplitude_c: pulse_amplitude(&species, 50.0 * GAUSS).expect("valid field"),
            epsilon: 7.4e-6,
            tau: 0.37e-6,
            tau1: 0.5e-6,
            lambda_spatial: 2e-6,
            delta_offset: std::f64::consts::PI / 10.0,
            t_start: 0.0,
        }],
        species,
        spectrum: MomentumSpectrum { k0, delta_k: 0.005 * k0, n_sigma: 5.0, n_quad },
        barrier: Barrier { a: k0 },
        grid_positive: SpaceTimeGrid { x_min: 0.0, x_max: 1e-7, nx, t_min: -0.5e-6, t_max: 2.5e-6, nt },
        grid_negative: None,
        units_mode: UnitsMode::Si,
        output: OutputConfig { name: "bench".into(), fields: vec![FieldKind::Psi], directory: None },
        analysis: AnalysisConfig::default(),
        oracle: None,
    }
}
