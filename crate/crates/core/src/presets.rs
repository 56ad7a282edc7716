//! Reference operating points of the levitated-particle experiment.
//!
//! All presets share κ/2π = 57 kHz, Ω/2π = (131, 120) kHz, gas damping at
//! the 1 mHz floor and detection efficiency [`DEFAULT_ETA`].

use crate::error::Result;
use crate::model::{angle_from_couplings, hz, ParamsBuilder, SystemParams, GAMMA_FLOOR};

pub const DEFAULT_ETA: f64 = 0.25;
pub const DEFAULT_GAMMA: f64 = GAMMA_FLOOR;

/// Detunings −Δ/2π (kHz) of the detuning series.
pub const SERIES_DETUNING_KHZ: [f64; 6] = [100.0, 110.0, 120.0, 130.0, 140.0, 150.0];
/// Polarization angles (degrees) fitted at each detuning of the series.
pub const SERIES_THETA_DEG: [f64; 6] = [71.0, 81.0, 84.0, 67.0, 84.0, 71.0];

/// Polarization sweep (degrees) for the dark-mode hole.
pub const HOLE_SWEEP_DEG: [f64; 8] = [85.0, 80.0, 75.0, 70.0, 65.0, 60.0, 55.0, 50.0];

fn khz(f: f64) -> f64 {
    hz(f * 1e3)
}

/// Trap and cavity without coupling or decoherence.
pub fn base() -> ParamsBuilder {
    ParamsBuilder {
        kappa: khz(57.0),
        delta: -khz(130.0),
        omega_x: khz(131.0),
        omega_y: khz(120.0),
        gamma_x: DEFAULT_GAMMA,
        gamma_y: DEFAULT_GAMMA,
        decoherence_x: 0.0,
        decoherence_y: 0.0,
        g_max: 0.0,
        theta: std::f64::consts::FRAC_PI_2,
        eta: DEFAULT_ETA,
    }
}

/// Mean fitted coupling and decoherence of the detuning series at the given
/// detuning (kHz, negative for red) and angle (degrees).
pub fn series_point(delta_khz: f64, theta_deg: f64) -> Result<SystemParams> {
    ParamsBuilder {
        delta: khz(delta_khz),
        g_max: khz(23.5),
        theta: theta_deg.to_radians(),
        decoherence_x: khz(6.2),
        decoherence_y: khz(5.6),
        ..base()
    }
    .build()
}

/// The six members of the detuning series, −100 to −150 kHz.
pub fn detuning_series() -> Result<Vec<SystemParams>> {
    SERIES_DETUNING_KHZ
        .iter()
        .zip(SERIES_THETA_DEG)
        .map(|(&d, t)| series_point(-d, t))
        .collect()
}

/// Series member at Δ/2π = −130 kHz, θ = 67°.
pub fn reference() -> SystemParams {
    series_point(-130.0, 67.0).expect("valid preset")
}

/// Three-peak heterodyne configuration: Δ/2π = −130 kHz, θ = 81°.
pub fn three_peak() -> SystemParams {
    series_point(-130.0, 81.0).expect("valid preset")
}

/// Balanced couplings g_x/2π = 14 kHz, g_y/2π = 11 kHz at Δ/2π = −130 kHz,
/// where back-action cancels at the dark-mode frequency.
pub fn balanced() -> SystemParams {
    let b = base();
    let (g_max, theta) =
        angle_from_couplings(khz(14.0), khz(11.0), b.omega_x, b.omega_y).expect("valid couplings");
    ParamsBuilder {
        g_max,
        theta,
        decoherence_x: khz(5.8),
        decoherence_y: khz(5.6),
        ..b
    }
    .build()
    .expect("valid preset")
}

/// Member of the polarization sweep at angle `theta_deg`, Δ/2π = −130 kHz.
pub fn hole_sweep_point(theta_deg: f64) -> Result<SystemParams> {
    ParamsBuilder {
        g_max: khz(22.4),
        theta: theta_deg.to_radians(),
        decoherence_x: khz(5.8),
        decoherence_y: khz(5.6),
        ..base()
    }
    .build()
}
