//! Built-in model configurations used by the test suites, benchmarks and
//! as the starting point for user configs.

use crate::model::{
    DamperConfig, DampingConfig, ExcitationConfig, ModelConfig, SectorConfig,
};

/// Nominal desk-scale assembly: eight sectors, engine-order-2 traveling
/// excitation, wedge dampers preloaded at the reference speed. The damper
/// mass equals the deterministic-optimum value for otherwise nominal
/// parameters.
pub fn nominal_config() -> ModelConfig {
    ModelConfig {
        sectors: 8,
        engine_order: 2,
        sector: SectorConfig {
            mass_tip: 0.08,
            mass_root: 0.3,
            mass_platform: 0.15,
            k_blade: 3.0e5,
            k_ground: 6.0e5,
            k_platform: 2.0e6,
            k_coupling: 4.0e5,
        },
        damper: Some(DamperConfig {
            mass: 0.0105,
            mass_ref: 0.0105,
            cg_radius: 0.04,
            ref_speed: 870.0,
            kn: 5.0e10,
            kt: 2.5e10,
            mu: 0.3,
            contact_area: 2.0e-4,
            wedge_angle_deg: 30.0,
            split_factor: None,
            k_retention: 1.0e3,
        }),
        damping: DampingConfig { eta: 0.0015 },
        excitation: ExcitationConfig {
            force_tip: 30.0,
            level: 1.0,
        },
    }
}

/// The nominal assembly without dampers; defines the amplitude
/// normalization (`a* = 1` at its resonance for nominal excitation).
pub fn no_damper_config() -> ModelConfig {
    let mut config = nominal_config();
    config.damper = None;
    config
}
