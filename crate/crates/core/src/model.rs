//! Physical parameters, derived couplings and the bare susceptibilities.
//!
//! All quantities are angular frequencies in rad/s. Conversion from the Hz /
//! degree values used in configuration files happens once, at the boundary,
//! through [`hz`] and `f64::to_radians`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, TAU};

use crate::error::{Error, Result};

/// Converts an ordinary frequency (Hz) into an angular frequency (rad/s).
#[inline]
pub fn hz(f: f64) -> f64 {
    TAU * f
}

/// Converts an angular frequency (rad/s) back into Hz.
#[inline]
pub fn to_hz(omega: f64) -> f64 {
    omega / TAU
}

/// Smallest gas damping rate accepted, 2π·1 mHz. Smaller (including zero)
/// requests are raised to this value with a warning so that the bare
/// mechanical susceptibilities never have a pole on the real axis.
pub const GAMMA_FLOOR: f64 = TAU * 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
}

/// One experimental configuration. Fields are private so that every value in
/// circulation has passed validation; use [`ParamsBuilder`] to construct or
/// modify.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    kappa: f64,
    delta: f64,
    omega_x: f64,
    omega_y: f64,
    gamma_x: f64,
    gamma_y: f64,
    decoherence_x: f64,
    decoherence_y: f64,
    g_max: f64,
    theta: f64,
    eta: f64,
}

/// Unvalidated parameter record (rad/s and radians).
///
/// `decoherence_*` are the total decoherence rates Γ_j, `gamma_*` the gas
/// damping rates γ_j.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamsBuilder {
    pub kappa: f64,
    pub delta: f64,
    pub omega_x: f64,
    pub omega_y: f64,
    pub gamma_x: f64,
    pub gamma_y: f64,
    pub decoherence_x: f64,
    pub decoherence_y: f64,
    pub g_max: f64,
    pub theta: f64,
    pub eta: f64,
}

impl Default for ParamsBuilder {
    /// An uncoupled trap: κ/2π = 57 kHz, Ω/2π = (131, 120) kHz, resonant
    /// red detuning on x, no decoherence, unit efficiency.
    fn default() -> Self {
        ParamsBuilder {
            kappa: hz(57e3),
            delta: -hz(131e3),
            omega_x: hz(131e3),
            omega_y: hz(120e3),
            gamma_x: GAMMA_FLOOR,
            gamma_y: GAMMA_FLOOR,
            decoherence_x: 0.0,
            decoherence_y: 0.0,
            g_max: 0.0,
            theta: FRAC_PI_2,
            eta: 1.0,
        }
    }
}

fn check(field: &'static str, ok: bool, reason: impl Into<String>) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            field,
            reason: reason.into(),
        })
    }
}

fn floored_damping(field: &'static str, gamma: f64) -> Result<f64> {
    check(field, gamma.is_finite(), "must be finite")?;
    check(field, gamma >= 0.0, format!("must be non-negative, got {gamma}"))?;
    if gamma < GAMMA_FLOOR {
        log::warn!(
            "{field} = {gamma:e} rad/s is below the floor; using {GAMMA_FLOOR:e} rad/s instead"
        );
        Ok(GAMMA_FLOOR)
    } else {
        Ok(gamma)
    }
}

impl ParamsBuilder {
    pub fn build(self) -> Result<SystemParams> {
        let finite = |field, v: f64| check(field, v.is_finite(), "must be finite");
        finite("kappa", self.kappa)?;
        check("kappa", self.kappa > 0.0, "must be positive")?;
        finite("delta", self.delta)?;
        finite("omega_x", self.omega_x)?;
        check("omega_x", self.omega_x > 0.0, "must be positive")?;
        finite("omega_y", self.omega_y)?;
        check("omega_y", self.omega_y > 0.0, "must be positive")?;
        let gamma_x = floored_damping("gamma_x", self.gamma_x)?;
        let gamma_y = floored_damping("gamma_y", self.gamma_y)?;
        finite("Gamma_x", self.decoherence_x)?;
        check("Gamma_x", self.decoherence_x >= 0.0, "must be non-negative")?;
        finite("Gamma_y", self.decoherence_y)?;
        check("Gamma_y", self.decoherence_y >= 0.0, "must be non-negative")?;
        finite("g_max", self.g_max)?;
        check("g_max", self.g_max >= 0.0, "must be non-negative")?;
        finite("theta", self.theta)?;
        check(
            "theta",
            (0.0..=FRAC_PI_2).contains(&self.theta),
            format!("must lie in [0, pi/2], got {}", self.theta),
        )?;
        finite("eta", self.eta)?;
        check(
            "eta",
            self.eta > 0.0 && self.eta <= 1.0,
            format!("must lie in (0, 1], got {}", self.eta),
        )?;
        Ok(SystemParams {
            kappa: self.kappa,
            delta: self.delta,
            omega_x: self.omega_x,
            omega_y: self.omega_y,
            gamma_x,
            gamma_y,
            decoherence_x: self.decoherence_x,
            decoherence_y: self.decoherence_y,
            g_max: self.g_max,
            theta: self.theta,
            eta: self.eta,
        })
    }
}

impl SystemParams {
    pub fn builder() -> ParamsBuilder {
        ParamsBuilder::default()
    }

    pub fn to_builder(&self) -> ParamsBuilder {
        ParamsBuilder {
            kappa: self.kappa,
            delta: self.delta,
            omega_x: self.omega_x,
            omega_y: self.omega_y,
            gamma_x: self.gamma_x,
            gamma_y: self.gamma_y,
            decoherence_x: self.decoherence_x,
            decoherence_y: self.decoherence_y,
            g_max: self.g_max,
            theta: self.theta,
            eta: self.eta,
        }
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }
    pub fn delta(&self) -> f64 {
        self.delta
    }
    pub fn omega_x(&self) -> f64 {
        self.omega_x
    }
    pub fn omega_y(&self) -> f64 {
        self.omega_y
    }
    pub fn gamma_x(&self) -> f64 {
        self.gamma_x
    }
    pub fn gamma_y(&self) -> f64 {
        self.gamma_y
    }
    /// Total decoherence rate Γ_x.
    pub fn decoherence_x(&self) -> f64 {
        self.decoherence_x
    }
    /// Total decoherence rate Γ_y.
    pub fn decoherence_y(&self) -> f64 {
        self.decoherence_y
    }
    pub fn g_max(&self) -> f64 {
        self.g_max
    }
    pub fn theta(&self) -> f64 {
        self.theta
    }
    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn omega(&self, axis: Axis) -> f64 {
        match axis {
            Axis::X => self.omega_x,
            Axis::Y => self.omega_y,
        }
    }

    pub fn gamma(&self, axis: Axis) -> f64 {
        match axis {
            Axis::X => self.gamma_x,
            Axis::Y => self.gamma_y,
        }
    }

    pub fn decoherence(&self, axis: Axis) -> f64 {
        match axis {
            Axis::X => self.decoherence_x,
            Axis::Y => self.decoherence_y,
        }
    }

    pub fn couplings(&self) -> DerivedCouplings {
        derive_couplings(self)
    }
}

/// Quantities that follow from the polarization geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivedCouplings {
    pub g_x: f64,
    pub g_y: f64,
    pub g_b: f64,
    pub omega_b: f64,
    pub omega_d: f64,
    /// Coupling-weighted decoherence (g_x²Γ_x + g_y²Γ_y)/g_b². Zero when
    /// the bright mode is uncoupled.
    pub gamma_eff: f64,
    /// Quantum cooperativity 4g_b²/(κΓ_eff); infinite for Γ_eff = 0 with
    /// nonzero coupling, zero without coupling.
    pub cooperativity: f64,
    /// Projection of the bright coordinate on x: x_b = w_x·x + w_y·y with
    /// w_j = g_j/g_b. Depends on θ only, so it stays defined at g_max = 0.
    pub bright_weight_x: f64,
    pub bright_weight_y: f64,
}

pub fn derive_couplings(p: &SystemParams) -> DerivedCouplings {
    let (s, c) = p.theta.sin_cos();
    let (ox, oy) = (p.omega_x, p.omega_y);
    let g_x = p.g_max * s * s;
    let g_y = p.g_max * (ox / oy).sqrt() * s * c;
    let omega_b = (s * s * ox * ox + c * c * oy * oy).sqrt();
    let omega_d = (c * c * ox * ox + s * s * oy * oy).sqrt();
    let g_b = ((g_x * g_x * ox + g_y * g_y * oy) / omega_b).sqrt();
    let bright_weight_x = s * (omega_b / ox).sqrt();
    let bright_weight_y = c * (omega_b / oy).sqrt();

    let (gamma_eff, cooperativity) = if g_b > 0.0 {
        let ge = (g_x * g_x * p.decoherence_x + g_y * g_y * p.decoherence_y) / (g_b * g_b);
        let cq = if ge > 0.0 {
            4.0 * g_b * g_b / (p.kappa * ge)
        } else {
            f64::INFINITY
        };
        (ge, cq)
    } else {
        (0.0, 0.0)
    };

    DerivedCouplings {
        g_x,
        g_y,
        g_b,
        omega_b,
        omega_d,
        gamma_eff,
        cooperativity,
        bright_weight_x,
        bright_weight_y,
    }
}

/// Inverts the coupling geometry: returns `(g_max, theta)` reproducing the
/// requested `(g_x, g_y)` for the given mechanical frequencies.
pub fn angle_from_couplings(g_x: f64, g_y: f64, omega_x: f64, omega_y: f64) -> Result<(f64, f64)> {
    check("g_x", g_x.is_finite() && g_x >= 0.0, "must be finite and non-negative")?;
    check("g_y", g_y.is_finite() && g_y >= 0.0, "must be finite and non-negative")?;
    if g_x == 0.0 {
        check("g_y", g_y == 0.0, "g_y > 0 requires g_x > 0 in this geometry")?;
        return Ok((0.0, FRAC_PI_2));
    }
    // g_y/g_x = sqrt(Ωx/Ωy)·cotθ
    let theta = (g_x * (omega_x / omega_y).sqrt()).atan2(g_y);
    let s = theta.sin();
    Ok((g_x / (s * s), theta))
}

/// Optical susceptibility χ_c(ω) = [−i(Δ+ω) + κ/2]⁻¹.
#[inline]
pub fn chi_cavity(p: &SystemParams, omega: f64) -> Complex64 {
    Complex64::new(0.5 * p.kappa, -(p.delta + omega)).inv()
}

/// Bare mechanical susceptibility χ_j(ω) = [i(Ω_j − ω) + γ_j/2]⁻¹.
#[inline]
pub fn chi_mech(p: &SystemParams, axis: Axis, omega: f64) -> Complex64 {
    Complex64::new(0.5 * p.gamma(axis), p.omega(axis) - omega).inv()
}

/// χ⁻(ω) = χ(ω) − χ*(−ω), from the two evaluations of one susceptibility.
#[inline]
pub fn chi_minus(chi_at_omega: Complex64, chi_at_minus_omega: Complex64) -> Complex64 {
    chi_at_omega - chi_at_minus_omega.conj()
}

#[inline]
pub fn chi_cavity_minus(p: &SystemParams, omega: f64) -> Complex64 {
    chi_minus(chi_cavity(p, omega), chi_cavity(p, -omega))
}

#[inline]
pub fn chi_mech_minus(p: &SystemParams, axis: Axis, omega: f64) -> Complex64 {
    chi_minus(chi_mech(p, axis, omega), chi_mech(p, axis, -omega))
}

/// Ordered set of angular frequencies at which spectra are evaluated.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyGrid {
    points: Vec<f64>,
}

impl FrequencyGrid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidGrid("grid is empty".into()));
        }
        if let Some(i) = points.iter().position(|w| !w.is_finite()) {
            return Err(Error::InvalidGrid(format!("point {i} is not finite")));
        }
        if let Some(i) = points.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid(format!(
                "points must be strictly increasing (index {})",
                i + 1
            )));
        }
        Ok(FrequencyGrid { points })
    }

    /// `n` evenly spaced angular frequencies from `lo` to `hi` inclusive.
    pub fn linspace(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidGrid(format!("need at least 2 points, got {n}")));
        }
        if !(lo.is_finite() && hi.is_finite() && hi > lo) {
            return Err(Error::InvalidGrid(format!("bad range [{lo}, {hi}]")));
        }
        let step = (hi - lo) / (n - 1) as f64;
        let mut points: Vec<f64> = (0..n).map(|i| lo + step * i as f64).collect();
        points[n - 1] = hi;
        Self::new(points)
    }

    /// Same as [`linspace`](Self::linspace) with the bounds given in Hz.
    pub fn linspace_hz(lo_hz: f64, hi_hz: f64, n: usize) -> Result<Self> {
        Self::linspace(hz(lo_hz), hz(hi_hz), n)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn hz(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|&w| to_hz(w))
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.points[0] > 0.0
    }

    /// Mirror image {−ω}, reordered to stay increasing.
    pub fn negated(&self) -> Self {
        FrequencyGrid {
            points: self.points.iter().rev().map(|w| -w).collect(),
        }
    }

    /// Mean spacing; exact for grids built by `linspace`.
    pub fn step(&self) -> f64 {
        if self.points.len() < 2 {
            return 0.0;
        }
        (self.points[self.points.len() - 1] - self.points[0]) / (self.points.len() - 1) as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn khz(f: f64) -> f64 {
        hz(f * 1e3)
    }

    fn params(theta_deg: f64) -> SystemParams {
        ParamsBuilder {
            g_max: khz(23.5),
            theta: theta_deg.to_radians(),
            decoherence_x: khz(6.2),
            decoherence_y: khz(5.6),
            ..ParamsBuilder::default()
        }
        .build()
        .unwrap()
    }

    #[test]
    fn quarter_turn_reduces_to_single_axis() {
        let c = params(90.0).couplings();
        assert_eq!(c.g_x, khz(23.5));
        assert!(c.g_y.abs() < 1e-12 * c.g_x);
        assert_relative_eq!(c.omega_b, khz(131.0), max_relative = 1e-15);
        assert_relative_eq!(c.omega_d, khz(120.0), max_relative = 1e-15);
        assert_relative_eq!(c.g_b, c.g_x, max_relative = 1e-15);
        assert_relative_eq!(c.gamma_eff, khz(6.2), max_relative = 1e-15);
    }

    #[test]
    fn couplings_at_81_degrees() {
        // Hand-evaluated closed forms: g_x = 22.925, g_y = 3.794,
        // Ω_d = 120.3, Ω_b = 130.7 (kHz).
        let c = params(81.0).couplings();
        assert!((to_hz(c.g_x) / 1e3 - 22.925).abs() < 0.001);
        assert!((to_hz(c.g_y) / 1e3 - 3.794).abs() < 0.001);
        assert!((to_hz(c.omega_d) / 1e3 - 120.3).abs() < 0.05);
        assert!((to_hz(c.omega_b) / 1e3 - 130.7).abs() < 0.05);
    }

    #[test]
    fn degenerate_trap_has_degenerate_geometric_modes() {
        for deg in [0.0, 17.0, 45.0, 71.0, 90.0] {
            let p = ParamsBuilder {
                omega_y: khz(131.0),
                theta: f64::to_radians(deg),
                g_max: khz(10.0),
                ..ParamsBuilder::default()
            }
            .build()
            .unwrap();
            let c = p.couplings();
            assert_relative_eq!(c.omega_b, p.omega_x(), max_relative = 1e-15);
            assert_relative_eq!(c.omega_d, p.omega_x(), max_relative = 1e-15);
        }
    }

    #[test]
    fn one_dimensional_cooperativity() {
        // 4·22.9²/(57·6.2) ≈ 5.94
        let p = ParamsBuilder {
            g_max: khz(22.9),
            decoherence_x: khz(6.2),
            ..ParamsBuilder::default()
        }
        .build()
        .unwrap();
        let cq = p.couplings().cooperativity;
        assert!((cq - 5.936).abs() < 0.01, "{cq}");
    }

    #[test]
    fn bright_coupling_matches_compact_form() {
        let p = params(67.0);
        let c = p.couplings();
        let compact = p.g_max() * p.theta().sin() * (p.omega_x() / c.omega_b).sqrt();
        assert_relative_eq!(c.g_b, compact, max_relative = 1e-14);
    }

    #[test]
    fn angle_inversion_round_trips() {
        let p = params(53.0);
        let c = p.couplings();
        let (g, th) = angle_from_couplings(c.g_x, c.g_y, p.omega_x(), p.omega_y()).unwrap();
        assert_relative_eq!(g, p.g_max(), max_relative = 1e-13);
        assert_relative_eq!(th, p.theta(), max_relative = 1e-13);
    }

    #[test]
    fn cavity_susceptibility_examples() {
        let p = ParamsBuilder {
            delta: -khz(130.0),
            ..ParamsBuilder::default()
        }
        .build()
        .unwrap();
        let peak = chi_cavity(&p, -p.delta()).norm_sqr();
        assert_relative_eq!(peak, (2.0 / p.kappa()).powi(2), max_relative = 1e-15);
        assert!((peak - 3.12e-11).abs() < 0.01e-11);

        let ratio = chi_cavity(&p, p.delta()).norm_sqr() / peak;
        let k2 = 0.5 * p.kappa();
        let by_hand = k2 * k2 / ((2.0 * p.delta()).powi(2) + k2 * k2);
        assert_relative_eq!(ratio, by_hand, max_relative = 1e-13);
        assert!((ratio - 0.0119).abs() < 5e-5);
    }

    #[test]
    fn mechanical_susceptibility_examples() {
        let p = ParamsBuilder {
            gamma_x: hz(10.0),
            gamma_y: hz(1.0),
            ..ParamsBuilder::default()
        }
        .build()
        .unwrap();
        let on_res = chi_mech(&p, Axis::X, p.omega_x());
        assert_eq!(on_res.im, 0.0);
        assert_relative_eq!(on_res.re, 2.0 / p.gamma_x(), max_relative = 1e-15);

        let off = chi_mech(&p, Axis::Y, khz(119.0)).norm();
        assert_relative_eq!(off, 1.0 / khz(1.0), max_relative = 1e-6);

        let p0 = ParamsBuilder::default().build().unwrap();
        let stat = chi_mech(&p0, Axis::X, 0.0);
        let expect = Complex64::new(0.0, -1.0 / p0.omega_x());
        // relative offset is γ/(2Ω)
        assert!((stat - expect).norm() < 1e-8 * expect.norm());
    }

    #[test]
    fn chi_minus_examples() {
        let p = ParamsBuilder {
            delta: 0.0,
            ..ParamsBuilder::default()
        }
        .build()
        .unwrap();
        let c0 = chi_cavity(&p, 0.0);
        let m0 = chi_minus(c0, c0);
        assert_eq!(m0, Complex64::new(0.0, 2.0 * c0.im));
        for w in [-3e5, -1e4, 0.0, 2.2e5, 9e5] {
            assert_eq!(chi_cavity_minus(&p, w).re, 0.0);
        }

        // Resonant term 2/γ dominates the counter-rotating one by ~ 2Ω/γ.
        let p = params(90.0);
        let w = p.omega_x();
        let resonant = chi_mech(&p, Axis::X, w).norm();
        let counter = chi_mech(&p, Axis::X, -w).norm();
        assert!(resonant / counter > 1e6);
        let m = chi_mech_minus(&p, Axis::X, w);
        assert_relative_eq!(m.re, 2.0 / p.gamma_x(), max_relative = 1e-9);
    }

    #[test]
    fn damping_floor_applies() {
        let p = ParamsBuilder {
            gamma_x: 0.0,
            gamma_y: 1e-9,
            ..ParamsBuilder::default()
        }
        .build()
        .unwrap();
        assert_eq!(p.gamma_x(), GAMMA_FLOOR);
        assert_eq!(p.gamma_y(), GAMMA_FLOOR);
    }

    #[test]
    fn validation_names_the_field() {
        let cases: [(&str, ParamsBuilder); 5] = [
            ("kappa", ParamsBuilder { kappa: 0.0, ..Default::default() }),
            ("eta", ParamsBuilder { eta: 1.5, ..Default::default() }),
            ("theta", ParamsBuilder { theta: 2.0, ..Default::default() }),
            ("gamma_y", ParamsBuilder { gamma_y: -1.0, ..Default::default() }),
            ("Gamma_x", ParamsBuilder { decoherence_x: f64::NAN, ..Default::default() }),
        ];
        for (field, b) in cases {
            match b.build() {
                Err(Error::InvalidParameter { field: f, .. }) => assert_eq!(f, field),
                other => panic!("{field}: {other:?}"),
            }
        }
    }

    #[test]
    fn grid_validation() {
        assert!(FrequencyGrid::new(vec![]).is_err());
        assert!(FrequencyGrid::new(vec![1.0, 1.0]).is_err());
        assert!(FrequencyGrid::new(vec![0.0, f64::NAN]).is_err());
        let g = FrequencyGrid::linspace_hz(-10.0, 10.0, 5).unwrap();
        for (a, b) in g.negated().points().iter().zip(g.points()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(!g.is_strictly_positive());
    }

    proptest! {
        #[test]
        fn geometric_frequency_sum_rule(
            theta in 0.0..FRAC_PI_2,
            fx in 1e3..1e6f64,
            fy in 1e3..1e6f64,
        ) {
            let p = ParamsBuilder {
                omega_x: hz(fx),
                omega_y: hz(fy),
                theta,
                g_max: hz(2e4),
                ..ParamsBuilder::default()
            }
            .build()
            .unwrap();
            let c = p.couplings();
            let lhs = c.omega_b.powi(2) + c.omega_d.powi(2);
            let rhs = p.omega_x().powi(2) + p.omega_y().powi(2);
            prop_assert!((lhs - rhs).abs() <= 4.0 * f64::EPSILON * rhs);
            let (lo, hi) = (p.omega_x().min(p.omega_y()), p.omega_x().max(p.omega_y()));
            let slack = 4.0 * f64::EPSILON * hi;
            prop_assert!(c.omega_b >= lo - slack && c.omega_b <= hi + slack);
            prop_assert!(c.omega_d >= lo - slack && c.omega_d <= hi + slack);
        }

        #[test]
        fn dark_direction_is_uncoupled(theta in 0.0..FRAC_PI_2, fx in 1e3..1e6f64, fy in 1e3..1e6f64) {
            let p = ParamsBuilder {
                omega_x: hz(fx),
                omega_y: hz(fy),
                theta,
                g_max: hz(2e4),
                ..ParamsBuilder::default()
            }
            .build()
            .unwrap();
            let c = p.couplings();
            // couplings per unit displacement scale as g_j·sqrt(Ω_j)
            let a = theta.sin() * c.g_y * p.omega_y().sqrt();
            let b = theta.cos() * c.g_x * p.omega_x().sqrt();
            prop_assert!((a - b).abs() <= 8.0 * f64::EPSILON * (a.abs() + b.abs() + 1e-300));
        }

        #[test]
        fn cavity_conjugate_consistency(w in -2e6..2e6f64, d in -2e6..2e6f64, k in 1e3..1e6f64) {
            let p = ParamsBuilder { kappa: k, delta: d, ..ParamsBuilder::default() }.build().unwrap();
            let c = chi_cavity(&p, w);
            let lhs = (c + c.conj()).re;
            let rhs = p.kappa() * c.norm_sqr();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs());
        }

        #[test]
        fn chi_minus_antisymmetry(w in -2e6..2e6f64, d in -2e6..2e6f64) {
            let p = ParamsBuilder { delta: d, gamma_x: hz(3.0), ..ParamsBuilder::default() }.build().unwrap();
            let pairs = [
                (chi_cavity_minus(&p, -w), chi_cavity_minus(&p, w)),
                (chi_mech_minus(&p, Axis::X, -w), chi_mech_minus(&p, Axis::X, w)),
                (chi_mech_minus(&p, Axis::Y, -w), chi_mech_minus(&p, Axis::Y, w)),
            ];
            for (neg, pos) in pairs {
                prop_assert!((neg + pos.conj()).norm() <= 1e-12 * pos.norm());
            }
        }
    }
}
