//! Closed-form spectra of the bright mode and of the heterodyne output.
//!
//! Sign convention: on a positive offset grid the lower heterodyne branch
//! S_out(Ω_LO − ω) carries the negative-frequency (Stokes) displacement
//! spectrum S(−ω) and the upper branch S_out(Ω_LO + ω) the anti-Stokes
//! spectrum S(+ω). With red detuning the Stokes side is the one enhanced by
//! the vacuum back-action.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::model::{
    chi_cavity, chi_cavity_minus, chi_mech, chi_mech_minus, Axis, DerivedCouplings, FrequencyGrid,
    SystemParams,
};

/// Default threshold below which S_out − 1 is treated as indistinguishable
/// from shot noise when forming ratios.
pub const DEFAULT_NOISE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumKind {
    BrightModePsd,
    Heterodyne,
    Asymmetry,
    Interference,
    Backaction,
}

/// Heterodyne sideband around the local oscillator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    /// Ω_LO + ω: anti-Stokes, displacement spectrum at +ω.
    Upper,
    /// Ω_LO − ω: Stokes, displacement spectrum at −ω.
    Lower,
}

impl Branch {
    /// Sign applied to the grid offset to obtain the displacement frequency.
    pub fn sign(self) -> f64 {
        match self {
            Branch::Upper => 1.0,
            Branch::Lower => -1.0,
        }
    }
}

/// Values on a frequency grid. Points that could not be formed (e.g. a
/// ratio with a vanishing denominator) stay in place, hold `NaN`, and are
/// marked invalid so the grid alignment survives.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    grid: FrequencyGrid,
    values: Vec<f64>,
    valid: Vec<bool>,
    kind: SpectrumKind,
    branch: Option<Branch>,
}

impl Spectrum {
    pub fn new(grid: FrequencyGrid, values: Vec<f64>, kind: SpectrumKind) -> Result<Self> {
        if grid.len() != values.len() {
            return Err(Error::GridMismatch(format!(
                "{} grid points but {} values",
                grid.len(),
                values.len()
            )));
        }
        let valid = values.iter().map(|v| v.is_finite()).collect();
        Ok(Spectrum {
            grid,
            values,
            valid,
            kind,
            branch: None,
        })
    }

    pub fn with_branch(mut self, branch: Branch) -> Self {
        self.branch = Some(branch);
        self
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn valid(&self) -> &[bool] {
        &self.valid
    }

    pub fn is_valid(&self, i: usize) -> bool {
        self.valid[i]
    }

    pub fn kind(&self) -> SpectrumKind {
        self.kind
    }

    pub fn branch(&self) -> Option<Branch> {
        self.branch
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `(omega, value)` pairs of the valid points.
    pub fn iter_valid(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.grid
            .points()
            .iter()
            .zip(&self.values)
            .zip(&self.valid)
            .filter(|(_, &ok)| ok)
            .map(|((&w, &v), _)| (w, v))
    }

    fn invalidate(&mut self, i: usize) {
        self.values[i] = f64::NAN;
        self.valid[i] = false;
    }
}

/// Thermal and back-action contributions to S_{x_b x_b}(ω); the spectrum is
/// their sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BrightTerms {
    pub thermal: f64,
    pub backaction: f64,
}

impl BrightTerms {
    pub fn total(&self) -> f64 {
        self.thermal + self.backaction
    }
}

fn mech_minus_pair(p: &SystemParams, omega: f64) -> (Complex64, Complex64) {
    (chi_mech_minus(p, Axis::X, omega), chi_mech_minus(p, Axis::Y, omega))
}

/// Evaluates the bright-mode displacement spectrum at one frequency.
///
/// The 1/g_b² prefactor is folded into the bright-coordinate weights
/// w_j = g_j/g_b, which depend only on θ, so the expression remains defined
/// at g_max = 0.
pub fn bright_terms(p: &SystemParams, c: &DerivedCouplings, omega: f64) -> BrightTerms {
    let (mx, my) = mech_minus_pair(p, omega);
    let response = mx * (c.g_x * c.g_x) + my * (c.g_y * c.g_y);
    let denom = (Complex64::new(1.0, 0.0) + chi_cavity_minus(p, omega) * response).norm_sqr();

    let lor = |axis| chi_mech(p, axis, omega).norm_sqr() + chi_mech(p, axis, -omega).norm_sqr();
    let (wx, wy) = (c.bright_weight_x, c.bright_weight_y);
    let thermal =
        wx * wx * p.decoherence_x() * lor(Axis::X) + wy * wy * p.decoherence_y() * lor(Axis::Y);

    let projected = mx * (wx * c.g_x) + my * (wy * c.g_y);
    let backaction = projected.norm_sqr() * p.kappa() * chi_cavity(p, -omega).norm_sqr();

    BrightTerms {
        thermal: thermal / denom,
        backaction: backaction / denom,
    }
}

fn collect(
    grid: &FrequencyGrid,
    values: Vec<f64>,
    kind: SpectrumKind,
) -> Result<Spectrum> {
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            omega: grid.points()[i],
        });
    }
    Spectrum::new(grid.clone(), values, kind)
}

/// Stationary displacement spectrum of the bright mode on an arbitrary grid
/// (negative frequencies allowed).
pub fn bright_mode_psd(p: &SystemParams, grid: &FrequencyGrid) -> Result<Spectrum> {
    bright_mode_psd_with(p, grid, Execution::default())
}

pub fn bright_mode_psd_with(
    p: &SystemParams,
    grid: &FrequencyGrid,
    exec: Execution,
) -> Result<Spectrum> {
    let c = p.couplings();
    let values = exec.map(grid.points(), |&w| bright_terms(p, &c, w).total());
    collect(grid, values, SpectrumKind::BrightModePsd)
}

/// Only the Γ-driven part of the bright-mode spectrum. Even in ω.
pub fn thermal_psd(p: &SystemParams, grid: &FrequencyGrid) -> Result<Spectrum> {
    let c = p.couplings();
    let values = Execution::default().map(grid.points(), |&w| bright_terms(p, &c, w).thermal);
    collect(grid, values, SpectrumKind::BrightModePsd)
}

/// Displacement spectrum seen by one heterodyne branch: S(+ω) for the upper
/// and S(−ω) for the lower branch, on a grid of positive offsets.
pub fn branch_psd(p: &SystemParams, grid: &FrequencyGrid, branch: Branch) -> Result<Spectrum> {
    require_positive(grid)?;
    let c = p.couplings();
    let s = branch.sign();
    let values = Execution::default().map(grid.points(), |&w| bright_terms(p, &c, s * w).total());
    Ok(collect(grid, values, SpectrumKind::BrightModePsd)?.with_branch(branch))
}

/// Single-axis spectrum: the x mode alone, coupled with g = g_x.
pub fn one_d_psd(p: &SystemParams, grid: &FrequencyGrid) -> Result<Spectrum> {
    let g2 = p.couplings().g_x.powi(2);
    let big_gamma = p.decoherence_x();
    let values = Execution::default().map(grid.points(), |&w| {
        let mx = chi_mech_minus(p, Axis::X, w);
        let d = (Complex64::new(1.0, 0.0) + chi_cavity_minus(p, w) * mx * g2).norm_sqr();
        let thermal = big_gamma
            * (chi_mech(p, Axis::X, w).norm_sqr() + chi_mech(p, Axis::X, -w).norm_sqr());
        let vacuum = g2 * mx.norm_sqr() * p.kappa() * chi_cavity(p, -w).norm_sqr();
        (thermal + vacuum) / d
    });
    collect(grid, values, SpectrumKind::BrightModePsd)
}

fn require_positive(grid: &FrequencyGrid) -> Result<()> {
    if grid.is_strictly_positive() {
        Ok(())
    } else {
        Err(Error::InvalidGrid(
            "this spectrum is defined on positive offsets only".into(),
        ))
    }
}

/// Model asymmetry A(ω) = S(−ω)/S(ω) for ω > 0.
pub fn asymmetry_model(p: &SystemParams, grid: &FrequencyGrid) -> Result<Spectrum> {
    require_positive(grid)?;
    let c = p.couplings();
    let pairs = Execution::default().map(grid.points(), |&w| {
        (bright_terms(p, &c, -w).total(), bright_terms(p, &c, w).total())
    });
    let mut values = Vec::with_capacity(pairs.len());
    let mut underflow = Vec::new();
    for (i, &(neg, pos)) in pairs.iter().enumerate() {
        if !(neg.is_finite() && pos.is_finite()) {
            return Err(Error::NonFinite {
                omega: grid.points()[i],
            });
        }
        if pos < f64::MIN_POSITIVE {
            underflow.push(i);
            values.push(0.0);
        } else {
            values.push(neg / pos);
        }
    }
    let mut out = Spectrum::new(grid.clone(), values, SpectrumKind::Asymmetry)?;
    for i in underflow {
        out.invalidate(i);
    }
    Ok(out)
}

/// Shot-noise-normalized heterodyne spectrum on one branch.
pub fn heterodyne_psd(p: &SystemParams, grid: &FrequencyGrid, branch: Branch) -> Result<Spectrum> {
    heterodyne_psd_with(p, grid, branch, Execution::default())
}

pub fn heterodyne_psd_with(
    p: &SystemParams,
    grid: &FrequencyGrid,
    branch: Branch,
    exec: Execution,
) -> Result<Spectrum> {
    require_positive(grid)?;
    let c = p.couplings();
    let s = branch.sign();
    let gain = p.eta() * c.g_b * c.g_b * p.kappa();
    let values = exec.map(grid.points(), |&w| {
        let w = s * w;
        1.0 + gain * chi_cavity(p, w).norm_sqr() * bright_terms(p, &c, w).total()
    });
    Ok(collect(grid, values, SpectrumKind::Heterodyne)?.with_branch(branch))
}

/// Cavity-filter correction ((ω−Δ)² + (κ/2)²)/((ω+Δ)² + (κ/2)²) applied to
/// the ratio of heterodyne excesses.
pub fn cavity_filter_correction(p: &SystemParams, omega: f64) -> f64 {
    let k2 = (0.5 * p.kappa()).powi(2);
    ((omega - p.delta()).powi(2) + k2) / ((omega + p.delta()).powi(2) + k2)
}

fn check_same_grid(a: &Spectrum, b: &Spectrum) -> Result<()> {
    if a.grid() != b.grid() {
        return Err(Error::GridMismatch(format!(
            "spectra on different grids ({} vs {} points)",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

fn expect_branch(s: &Spectrum, want: Branch, role: &str) -> Result<()> {
    match s.branch() {
        Some(b) if b != want => Err(Error::GridMismatch(format!(
            "{role} spectrum is labelled {b:?}, expected {want:?}"
        ))),
        _ => Ok(()),
    }
}

/// Corrected asymmetry from measured (or synthetic) heterodyne branches.
pub fn asymmetry_from_data(
    stokes: &Spectrum,
    antistokes: &Spectrum,
    p: &SystemParams,
) -> Result<Spectrum> {
    asymmetry_from_data_with_floor(stokes, antistokes, p, DEFAULT_NOISE_FLOOR)
}

pub fn asymmetry_from_data_with_floor(
    stokes: &Spectrum,
    antistokes: &Spectrum,
    p: &SystemParams,
    noise_floor: f64,
) -> Result<Spectrum> {
    check_same_grid(stokes, antistokes)?;
    require_positive(stokes.grid())?;
    expect_branch(stokes, Branch::Lower, "Stokes")?;
    expect_branch(antistokes, Branch::Upper, "anti-Stokes")?;

    let grid = stokes.grid().clone();
    let mut values = vec![0.0; grid.len()];
    let mut bad = Vec::new();
    for (i, &w) in grid.points().iter().enumerate() {
        let den = antistokes.values()[i] - 1.0;
        if !stokes.is_valid(i) || !antistokes.is_valid(i) || den <= noise_floor {
            bad.push(i);
            continue;
        }
        values[i] = (stokes.values()[i] - 1.0) / den * cavity_filter_correction(p, w);
    }
    let mut out = Spectrum::new(grid, values, SpectrumKind::Asymmetry)?;
    for i in bad {
        out.invalidate(i);
    }
    Ok(out)
}

/// Converts a heterodyne branch back into the displacement spectrum it
/// carries, (S_out − 1)/(η g_b² κ |χ_c(±ω)|²).
pub fn displacement_from_heterodyne(het: &Spectrum, p: &SystemParams) -> Result<Spectrum> {
    let branch = het.branch().ok_or_else(|| {
        Error::GridMismatch("heterodyne spectrum carries no branch label".into())
    })?;
    let c = p.couplings();
    if c.g_b <= 0.0 {
        return Err(Error::InvalidParameter {
            field: "g_max",
            reason: "bright mode is uncoupled; the heterodyne signal carries no displacement".into(),
        });
    }
    let gain = p.eta() * c.g_b * c.g_b * p.kappa();
    let s = branch.sign();
    let values = het
        .grid()
        .points()
        .iter()
        .zip(het.values())
        .map(|(&w, &v)| (v - 1.0) / (gain * chi_cavity(p, s * w).norm_sqr()))
        .collect();
    let mut out = Spectrum::new(het.grid().clone(), values, SpectrumKind::BrightModePsd)?
        .with_branch(branch);
    for i in 0..het.len() {
        if !het.is_valid(i) {
            out.invalidate(i);
        }
    }
    Ok(out)
}

/// Back-action contribution: corrected Stokes minus corrected anti-Stokes.
/// Emitted as-is, including negative values.
pub fn backaction_spectrum(
    stokes_corrected: &Spectrum,
    antistokes_corrected: &Spectrum,
) -> Result<Spectrum> {
    check_same_grid(stokes_corrected, antistokes_corrected)?;
    expect_branch(stokes_corrected, Branch::Lower, "Stokes")?;
    expect_branch(antistokes_corrected, Branch::Upper, "anti-Stokes")?;
    let values = stokes_corrected
        .values()
        .iter()
        .zip(antistokes_corrected.values())
        .map(|(s, a)| s - a)
        .collect();
    let mut out = Spectrum::new(
        stokes_corrected.grid().clone(),
        values,
        SpectrumKind::Backaction,
    )?;
    for i in 0..out.len() {
        if !(stokes_corrected.is_valid(i) && antistokes_corrected.is_valid(i)) {
            out.invalidate(i);
        }
    }
    Ok(out)
}

/// Interference term |g_x²χ_x⁻ + g_y²χ_y⁻|²: the combined response of the
/// two bare oscillators to the common optical force.
pub fn interference_term(p: &SystemParams, grid: &FrequencyGrid) -> Result<Spectrum> {
    let c = p.couplings();
    let values = Execution::default().map(grid.points(), |&w| {
        let (mx, my) = mech_minus_pair(p, w);
        (mx * (c.g_x * c.g_x) + my * (c.g_y * c.g_y)).norm_sqr()
    });
    collect(grid, values, SpectrumKind::Interference)
}

/// Band between the two bare mechanical frequencies, where the two responses
/// are in antiphase and the interference minimum lives.
pub fn antiresonance_band(p: &SystemParams) -> (f64, f64) {
    (p.omega_x().min(p.omega_y()), p.omega_x().max(p.omega_y()))
}

/// Location and value of a sampled extremum, refined by a parabola through
/// the extreme sample and its two neighbours.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extremum {
    pub omega: f64,
    pub value: f64,
    pub index: usize,
}

/// Vertex of the parabola through three points. Returns the middle point if
/// they are collinear.
pub fn parabolic_vertex(x: [f64; 3], y: [f64; 3]) -> (f64, f64) {
    let (a, b) = (x[1] - x[0], x[1] - x[2]);
    let (fa, fb) = (y[1] - y[0], y[1] - y[2]);
    let den = a * fb - b * fa;
    if den == 0.0 || !den.is_finite() {
        return (x[1], y[1]);
    }
    let xv = x[1] - 0.5 * (a * a * fb - b * b * fa) / den;
    // Lagrange form evaluated at the vertex.
    let l0 = (xv - x[1]) * (xv - x[2]) / ((x[0] - x[1]) * (x[0] - x[2]));
    let l1 = (xv - x[0]) * (xv - x[2]) / ((x[1] - x[0]) * (x[1] - x[2]));
    let l2 = (xv - x[0]) * (xv - x[1]) / ((x[2] - x[0]) * (x[2] - x[1]));
    (xv, y[0] * l0 + y[1] * l1 + y[2] * l2)
}

fn find_extremum(
    s: &Spectrum,
    band: Option<(f64, f64)>,
    better: impl Fn(f64, f64) -> bool,
) -> Option<Extremum> {
    let w = s.grid().points();
    let v = s.values();
    let inside = |i: usize| {
        s.is_valid(i) && band.is_none_or(|(lo, hi)| w[i] >= lo && w[i] <= hi)
    };
    let mut best: Option<usize> = None;
    for i in (0..s.len()).filter(|&i| inside(i)) {
        if best.is_none_or(|b| better(v[i], v[b])) {
            best = Some(i);
        }
    }
    let i = best?;
    if i == 0 || i + 1 >= s.len() || !inside(i - 1) || !inside(i + 1) {
        return Some(Extremum {
            omega: w[i],
            value: v[i],
            index: i,
        });
    }
    let (omega, value) = parabolic_vertex([w[i - 1], w[i], w[i + 1]], [v[i - 1], v[i], v[i + 1]]);
    Some(Extremum {
        omega,
        value,
        index: i,
    })
}

/// Minimum over the valid points inside `band` (all points if `None`).
pub fn find_minimum(s: &Spectrum, band: Option<(f64, f64)>) -> Option<Extremum> {
    find_extremum(s, band, |a, b| a < b)
}

pub fn find_maximum(s: &Spectrum, band: Option<(f64, f64)>) -> Option<Extremum> {
    find_extremum(s, band, |a, b| a > b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{hz, ParamsBuilder};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn khz(f: f64) -> f64 {
        hz(f * 1e3)
    }

    fn reference() -> SystemParams {
        ParamsBuilder {
            delta: -khz(130.0),
            g_max: khz(23.5),
            theta: 67f64.to_radians(),
            decoherence_x: khz(6.2),
            decoherence_y: khz(5.6),
            eta: 0.25,
            ..ParamsBuilder::default()
        }
        .build()
        .unwrap()
    }

    fn positive_grid() -> FrequencyGrid {
        FrequencyGrid::linspace_hz(60e3, 200e3, 2801).unwrap()
    }

    #[test]
    fn uncoupled_spectrum_is_thermal_and_even() {
        let p = reference().to_builder();
        let p = ParamsBuilder { g_max: 0.0, ..p }.build().unwrap();
        let grid = FrequencyGrid::linspace_hz(-200e3, 200e3, 801).unwrap();
        let s = bright_mode_psd(&p, &grid).unwrap();
        let n = s.len();
        for i in 0..n {
            assert_relative_eq!(s.values()[i], s.values()[n - 1 - i], max_relative = 1e-13);
        }
        let c = p.couplings();
        let w = khz(125.0);
        let lor = |axis| chi_mech(&p, axis, w).norm_sqr() + chi_mech(&p, axis, -w).norm_sqr();
        let expect = c.bright_weight_x.powi(2) * p.decoherence_x() * lor(Axis::X)
            + c.bright_weight_y.powi(2) * p.decoherence_y() * lor(Axis::Y);
        assert_relative_eq!(bright_terms(&p, &c, w).total(), expect, max_relative = 1e-15);
    }

    #[test]
    fn quarter_turn_matches_single_axis_path() {
        let p = ParamsBuilder {
            theta: std::f64::consts::FRAC_PI_2,
            ..reference().to_builder()
        }
        .build()
        .unwrap();
        let grid = FrequencyGrid::linspace_hz(-300e3, 300e3, 1201).unwrap();
        let full = bright_mode_psd(&p, &grid).unwrap();
        let one = one_d_psd(&p, &grid).unwrap();
        for (a, b) in full.values().iter().zip(one.values()) {
            assert_relative_eq!(a, b, max_relative = 1e-12);
        }
    }

    #[test]
    fn one_d_uncoupled_is_symmetric() {
        let p = ParamsBuilder {
            decoherence_x: khz(6.2),
            ..ParamsBuilder::default()
        }
        .build()
        .unwrap();
        let grid = FrequencyGrid::linspace_hz(-200e3, 200e3, 401).unwrap();
        let s = one_d_psd(&p, &grid).unwrap();
        let n = s.len();
        for i in 0..n {
            assert_relative_eq!(s.values()[i], s.values()[n - 1 - i], max_relative = 1e-13);
        }
    }

    #[test]
    fn uncoupled_asymmetry_is_unity() {
        let p = ParamsBuilder {
            g_max: 0.0,
            ..reference().to_builder()
        }
        .build()
        .unwrap();
        let a = asymmetry_model(&p, &positive_grid()).unwrap();
        assert!(a.values().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn asymmetry_rejects_non_positive_grid() {
        let grid = FrequencyGrid::linspace_hz(-1e3, 1e3, 3).unwrap();
        assert!(matches!(
            asymmetry_model(&reference(), &grid),
            Err(Error::InvalidGrid(_))
        ));
    }

    #[test]
    fn heterodyne_is_shot_noise_without_signal() {
        let grid = positive_grid();
        let dark = ParamsBuilder {
            g_max: 0.0,
            ..reference().to_builder()
        }
        .build()
        .unwrap();
        let blind = ParamsBuilder {
            eta: 1e-300,
            ..reference().to_builder()
        }
        .build()
        .unwrap();
        for p in [dark, blind] {
            for b in [Branch::Upper, Branch::Lower] {
                let s = heterodyne_psd(&p, &grid, b).unwrap();
                assert!(s.values().iter().all(|&v| v == 1.0));
            }
        }
        let s = heterodyne_psd(&reference(), &grid, Branch::Upper).unwrap();
        assert!(s.values().iter().all(|&v| v >= 1.0));
    }

    #[test]
    fn identical_branches_without_detuning_give_unity() {
        let p = ParamsBuilder {
            delta: 0.0,
            ..reference().to_builder()
        }
        .build()
        .unwrap();
        let grid = positive_grid();
        let upper = heterodyne_psd(&p, &grid, Branch::Upper).unwrap();
        let lower = Spectrum::new(grid.clone(), upper.values().to_vec(), SpectrumKind::Heterodyne)
            .unwrap()
            .with_branch(Branch::Lower);
        let a = asymmetry_from_data(&lower, &upper, &p).unwrap();
        assert!(a.values().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn heterodyne_round_trip_recovers_model_asymmetry() {
        let p = reference();
        let grid = positive_grid();
        let lower = heterodyne_psd(&p, &grid, Branch::Lower).unwrap();
        let upper = heterodyne_psd(&p, &grid, Branch::Upper).unwrap();
        let from_data = asymmetry_from_data(&lower, &upper, &p).unwrap();
        let model = asymmetry_model(&p, &grid).unwrap();
        for (a, b) in from_data.values().iter().zip(model.values()) {
            assert_relative_eq!(a, b, max_relative = 1e-9);
        }

        let s_lo = displacement_from_heterodyne(&lower, &p).unwrap();
        let s_up = displacement_from_heterodyne(&upper, &p).unwrap();
        let exact_lo = branch_psd(&p, &grid, Branch::Lower).unwrap();
        let exact_up = branch_psd(&p, &grid, Branch::Upper).unwrap();
        for i in 0..grid.len() {
            assert_relative_eq!(s_lo.values()[i], exact_lo.values()[i], max_relative = 1e-9);
            assert_relative_eq!(s_up.values()[i], exact_up.values()[i], max_relative = 1e-9);
        }
    }

    #[test]
    fn correction_factor_at_cavity_resonance() {
        let p = reference();
        // ((2Δ)² + (κ/2)²)/(κ/2)² with Δ = −130 kHz, κ = 57 kHz
        let f = cavity_filter_correction(&p, -p.delta());
        assert!((f - 84.2).abs() < 0.05, "{f}");
    }

    #[test]
    fn flagged_points_stay_aligned() {
        let p = reference();
        let grid = FrequencyGrid::linspace_hz(100e3, 110e3, 5).unwrap();
        let lower = Spectrum::new(grid.clone(), vec![2.0; 5], SpectrumKind::Heterodyne)
            .unwrap()
            .with_branch(Branch::Lower);
        let upper = Spectrum::new(grid, vec![2.0, 1.0, 0.5, 2.0, 2.0], SpectrumKind::Heterodyne)
            .unwrap()
            .with_branch(Branch::Upper);
        let a = asymmetry_from_data(&lower, &upper, &p).unwrap();
        assert_eq!(a.len(), 5);
        assert_eq!(a.valid(), &[true, false, false, true, true]);
        assert!(a.values()[1].is_nan());
        assert_eq!(a.iter_valid().count(), 3);
    }

    #[test]
    fn swapped_branches_are_rejected() {
        let p = reference();
        let grid = positive_grid();
        let lower = heterodyne_psd(&p, &grid, Branch::Lower).unwrap();
        let upper = heterodyne_psd(&p, &grid, Branch::Upper).unwrap();
        assert!(asymmetry_from_data(&upper, &lower, &p).is_err());
    }

    #[test]
    fn interference_single_axis_limit() {
        let p = ParamsBuilder {
            theta: std::f64::consts::FRAC_PI_2,
            ..reference().to_builder()
        }
        .build()
        .unwrap();
        let grid = positive_grid();
        let s = interference_term(&p, &grid).unwrap();
        let g4 = p.couplings().g_x.powi(4);
        for (i, &w) in grid.points().iter().enumerate() {
            let expect = g4 * chi_mech_minus(&p, Axis::X, w).norm_sqr();
            assert_relative_eq!(s.values()[i], expect, max_relative = 1e-12);
        }
    }

    #[test]
    fn interference_dip_sits_at_dark_frequency() {
        let (g_max, theta) =
            crate::model::angle_from_couplings(khz(14.0), khz(11.0), khz(131.0), khz(120.0))
                .unwrap();
        let p = ParamsBuilder {
            g_max,
            theta,
            ..reference().to_builder()
        }
        .build()
        .unwrap();
        let grid = FrequencyGrid::linspace_hz(100e3, 150e3, 5001).unwrap();
        let s = interference_term(&p, &grid).unwrap();
        let dip = find_minimum(&s, Some(antiresonance_band(&p))).unwrap();
        let od = p.couplings().omega_d;
        assert!((dip.omega - od).abs() < grid.step(), "{} vs {}", dip.omega, od);
    }

    #[test]
    fn backaction_of_identical_inputs_vanishes() {
        let p = reference();
        let grid = positive_grid();
        let s = branch_psd(&p, &grid, Branch::Lower).unwrap();
        let a = Spectrum::new(grid.clone(), s.values().to_vec(), SpectrumKind::BrightModePsd)
            .unwrap()
            .with_branch(Branch::Upper);
        let d = backaction_spectrum(&s, &a).unwrap();
        assert!(d.values().iter().all(|&v| v == 0.0));
        let other = FrequencyGrid::linspace_hz(60e3, 200e3, 11).unwrap();
        let short = branch_psd(&p, &other, Branch::Upper).unwrap();
        assert!(matches!(
            backaction_spectrum(&s, &short),
            Err(Error::GridMismatch(_))
        ));
    }

    #[test]
    fn vacuum_only_asymmetry_is_the_cavity_ratio() {
        // With Γ = 0 only the back-action survives and A reduces exactly to
        // |χ_c(ω)|²/|χ_c(−ω)|².
        let p = ParamsBuilder {
            decoherence_x: 0.0,
            decoherence_y: 0.0,
            ..reference().to_builder()
        }
        .build()
        .unwrap();
        let grid = positive_grid();
        let a = asymmetry_model(&p, &grid).unwrap();
        for (i, &w) in grid.points().iter().enumerate() {
            let expect = chi_cavity(&p, w).norm_sqr() / chi_cavity(&p, -w).norm_sqr();
            assert_relative_eq!(a.values()[i], expect, max_relative = 1e-12);
        }
    }

    #[test]
    fn dip_deepens_toward_unity_as_damping_vanishes() {
        // g_x = g_y
        let (g_max, theta) =
            crate::model::angle_from_couplings(khz(12.0), khz(12.0), khz(131.0), khz(120.0))
                .unwrap();
        let mut last = f64::INFINITY;
        for gamma_hz in [100.0, 10.0, 1.0, 0.01] {
            let p = ParamsBuilder {
                g_max,
                theta,
                gamma_x: hz(gamma_hz),
                gamma_y: hz(gamma_hz),
                ..reference().to_builder()
            }
            .build()
            .unwrap();
            let od = p.couplings().omega_d;
            let a = asymmetry_model(&p, &FrequencyGrid::new(vec![od]).unwrap()).unwrap();
            let excess = a.values()[0] - 1.0;
            assert!(excess >= 0.0 && excess < last);
            last = excess;
        }
        assert!(last < 1e-6, "{last}");
    }

    #[test]
    fn parabola_vertex_exact_for_quadratics() {
        let f = |x: f64| 3.0 * (x - 0.37).powi(2) - 2.0;
        let x = [0.1, 0.3, 0.6];
        let (xv, yv) = parabolic_vertex(x, x.map(f));
        assert_relative_eq!(xv, 0.37, max_relative = 1e-12);
        assert_relative_eq!(yv, -2.0, max_relative = 1e-12);
    }

    proptest! {
        #[test]
        fn red_detuned_asymmetry_never_below_one(
            theta_deg in 5.0..90.0f64,
            g_khz in 1.0..40.0f64,
            delta_khz in 60.0..200.0f64,
            gx_khz in 0.0..15.0f64,
            gy_khz in 0.0..15.0f64,
        ) {
            let p = ParamsBuilder {
                delta: -khz(delta_khz),
                g_max: khz(g_khz),
                theta: theta_deg.to_radians(),
                decoherence_x: khz(gx_khz),
                decoherence_y: khz(gy_khz),
                ..ParamsBuilder::default()
            }
            .build()
            .unwrap();
            let grid = FrequencyGrid::linspace_hz(20e3, 300e3, 281).unwrap();
            let a = asymmetry_model(&p, &grid).unwrap();
            for (_, v) in a.iter_valid() {
                prop_assert!(v >= 1.0 - 1e-6);
            }
        }
    }
}
