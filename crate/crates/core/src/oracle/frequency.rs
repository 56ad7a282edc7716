//! Fourier-space solution of the linearized Langevin equations.
//!
//! The state (ã, ã†, b̃_x, b̃_x†, b̃_y, b̃_y†) obeys −iω v = L v + B ξ, with
//! Õ†(ω) = FT[Ô†(t)] and B = diag(√κ, √κ, √Γ_x, √Γ_x, √Γ_y, √Γ_y). For every
//! frequency the 6×6 complex system is solved for the transfer row
//! T = c (−iω − L)⁻¹ B from the inputs ξ to the bright coordinate
//! x_b = w_x(b_x + b_x†) + w_y(b_y + b_y†), and the spectrum is contracted
//! against the diagonal noise matrix: S(ω) = Σ_k |T_k(ω)|² n_k.

use nalgebra::{Matrix6, Vector6};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::model::{FrequencyGrid, SystemParams};
use crate::spectra::{Spectrum, SpectrumKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ordering {
    /// Vacuum optical input: the ã_in channel carries ⟨ã_in† ã_in⟩ = 0, the
    /// ã_in† channel ⟨ã_in ã_in†⟩ = 1.
    Nonsymmetrized,
    /// Both optical channels carry 1/2; the classical equivalent.
    Symmetrized,
}

/// Spectral densities of the six input channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub ordering: Ordering,
}

impl NoiseModel {
    pub const NONSYMMETRIZED: NoiseModel = NoiseModel {
        ordering: Ordering::Nonsymmetrized,
    };
    pub const SYMMETRIZED: NoiseModel = NoiseModel {
        ordering: Ordering::Symmetrized,
    };

    /// Densities for (ã_in, ã_in†, b̃_x, b̃_x†, b̃_y, b̃_y†). The mechanical
    /// baths are classical: both orderings give 1.
    pub fn densities(&self) -> [f64; 6] {
        match self.ordering {
            Ordering::Nonsymmetrized => [0.0, 1.0, 1.0, 1.0, 1.0, 1.0],
            Ordering::Symmetrized => [0.5, 0.5, 1.0, 1.0, 1.0, 1.0],
        }
    }
}

/// Ladder-basis drift L.
fn ladder_drift(p: &SystemParams) -> Matrix6<Complex64> {
    let c = p.couplings();
    let i = Complex64::i();
    let (gx, gy) = (c.g_x, c.g_y);
    let cav = Complex64::new(-0.5 * p.kappa(), p.delta());
    let mx = Complex64::new(-0.5 * p.gamma_x(), -p.omega_x());
    let my = Complex64::new(-0.5 * p.gamma_y(), -p.omega_y());
    let z = Complex64::new(0.0, 0.0);
    #[rustfmt::skip]
    let l = Matrix6::new(
        cav,        z,          i * gx,  i * gx,   i * gy,  i * gy,
        z,          cav.conj(), -i * gx, -i * gx,  -i * gy, -i * gy,
        i * gx,     i * gx,     mx,      z,        z,       z,
        -i * gx,    -i * gx,    z,       mx.conj(), z,      z,
        i * gy,     i * gy,     z,       z,        my,      z,
        -i * gy,    -i * gy,    z,       z,        z,       my.conj(),
    );
    l
}

/// Transfer coefficients from each input channel to x_b at one frequency.
pub fn transfer_row(p: &SystemParams, omega: f64) -> Result<[Complex64; 6]> {
    let c = p.couplings();
    let l = ladder_drift(p);
    let m = Matrix6::<Complex64>::identity() * Complex64::new(0.0, -omega) - l;
    let obs = Vector6::new(
        Complex64::new(0.0, 0.0),
        Complex64::new(0.0, 0.0),
        Complex64::new(c.bright_weight_x, 0.0),
        Complex64::new(c.bright_weight_x, 0.0),
        Complex64::new(c.bright_weight_y, 0.0),
        Complex64::new(c.bright_weight_y, 0.0),
    );
    // row vector c·M⁻¹ solves Mᵀ z = cᵀ
    let z = m
        .transpose()
        .lu()
        .solve(&obs)
        .ok_or(Error::Singular { omega })?;
    let gains = [
        p.kappa().sqrt(),
        p.kappa().sqrt(),
        p.decoherence_x().sqrt(),
        p.decoherence_x().sqrt(),
        p.decoherence_y().sqrt(),
        p.decoherence_y().sqrt(),
    ];
    let mut t = [Complex64::new(0.0, 0.0); 6];
    for k in 0..6 {
        t[k] = z[k] * gains[k];
    }
    Ok(t)
}

pub fn psd_point(p: &SystemParams, omega: f64, noise: &NoiseModel) -> Result<f64> {
    let t = transfer_row(p, omega)?;
    let n = noise.densities();
    let s: f64 = t.iter().zip(n).map(|(tk, nk)| tk.norm_sqr() * nk).sum();
    if s.is_finite() {
        Ok(s)
    } else {
        Err(Error::Singular { omega })
    }
}

pub fn frequency_domain_psd(
    p: &SystemParams,
    grid: &FrequencyGrid,
    noise: &NoiseModel,
) -> Result<Spectrum> {
    frequency_domain_psd_with(p, grid, noise, Execution::default())
}

pub fn frequency_domain_psd_with(
    p: &SystemParams,
    grid: &FrequencyGrid,
    noise: &NoiseModel,
    exec: Execution,
) -> Result<Spectrum> {
    let values = exec
        .map(grid.points(), |&w| psd_point(p, w, noise))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Spectrum::new(grid.clone(), values, SpectrumKind::BrightModePsd)
}
