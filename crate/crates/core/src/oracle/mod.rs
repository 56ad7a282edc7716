//! Independent checks of the closed-form spectrum.
//!
//! [`frequency`] solves the Fourier-space Langevin equations as a linear
//! system in the doubled ladder basis, with explicit operator ordering of the
//! input noise. [`simulate`] integrates the same equations in time as a
//! classical SDE (symmetrized noise only) and [`welch`] estimates the PSD of
//! the result.

pub mod frequency;
pub mod simulate;
pub mod welch;

pub use frequency::{frequency_domain_psd, frequency_domain_psd_with, NoiseModel, Ordering};
pub use simulate::{simulate_bright_mode, simulate_bright_psd, simulate_trajectory, SimConfig, Simulator, Trajectory};
pub use welch::{welch_psd, WelchAccumulator, Window};
