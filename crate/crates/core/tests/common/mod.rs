//! Fixtures shared by the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;

use metaoptics::units::Scales;
use metaoptics::{
    load_scenario, AnalysisConfig, AtomSpecies, Barrier, ComovingPulse, FieldKind, MomentumSpectrum, OutputConfig,
    Scenario, SpaceTimeGrid, UnitsMode,
};

pub const BUNDLED: [&str; 8] = ["fig2a", "fig2b", "fig3a", "fig3b", "fig3c", "fig4a", "fig4b", "fig4c"];

pub fn scenario_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

pub fn bundled(name: &str) -> Scenario {
    load_scenario(&scenario_dir().join(format!("{name}.scn"))).expect("bundled scenario parses")
}

/// Scenario in units hbar = m = k0 = 1 with no pulses.
pub fn unit_scenario(delta_k: f64, a: f64, n_quad: usize, positive: SpaceTimeGrid) -> Scenario {
    let mut species = AtomSpecies::argon_metastable();
    species.mass = 1.0;
    Scenario {
        species,
        spectrum: MomentumSpectrum { k0: 1.0, delta_k, n_sigma: 5.0, n_quad },
        barrier: Barrier { a },
        pulses: Vec::new(),
        grid_positive: positive,
        grid_negative: None,
        units_mode: UnitsMode::Dimensionless(Scales::new(1.0, 1.0, 1.0).expect("unit scales")),
        output: OutputConfig { name: "unit".into(), fields: vec![FieldKind::Psi0], directory: None },
        analysis: AnalysisConfig::default(),
        oracle: None,
    }
}

/// Pulse in the same units, spanning [t_start, t_start + tau1].
pub fn unit_pulse(amplitude: f64, t_start: f64, tau1: f64, delta: f64) -> ComovingPulse {
    ComovingPulse {
        amplitude_c: amplitude,
        epsilon: 20.0 * tau1,
        tau: 0.75 * tau1,
        tau1,
        lambda_spatial: 200.0,
        delta_offset: delta,
        t_start,
    }
}
