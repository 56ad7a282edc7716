//! Analytical model of a levitated nanoparticle coupled by coherent
//! scattering to an optical cavity, with two mechanical axes in the plane
//! orthogonal to the tweezer.
//!
//! * [`model`]: parameters, coupling geometry, susceptibilities
//! * [`spectra`]: bright-mode, heterodyne, asymmetry, interference and
//!   back-action spectra in closed form
//! * [`dynamics`]: drift matrix, normal modes, stability
//! * [`oracle`]: independent validators (frequency-domain operator solver,
//!   exact-discretization Langevin simulator, Welch estimator)
//! * [`fitting`]: damped least squares on heterodyne spectra
//!
//! Internally every rate and frequency is angular (rad/s).

pub mod dynamics;
pub mod eigen;
pub mod error;
pub mod exec;
pub mod fitting;
pub mod model;
pub mod oracle;
pub mod presets;
pub mod spectra;

pub use error::{Error, Result};
pub use exec::Execution;
pub use model::{derive_couplings, hz, to_hz, Axis, DerivedCouplings, FrequencyGrid, ParamsBuilder, SystemParams};
pub use spectra::{Branch, Spectrum, SpectrumKind};
