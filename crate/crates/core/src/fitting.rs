//! Weighted damped least squares on shot-noise-normalized heterodyne spectra.
//!
//! Residuals are r_i = √w_i (d_i − m_i) with w_i = 1/max(d_i, 1)². The
//! optimizer is Levenberg-Marquardt with diagonal (Marquardt) damping in
//! coordinates scaled by each parameter's starting magnitude, a
//! forward-difference Jacobian and projection onto box bounds.
//!
//! Several panels (spectra taken at different operating points) can be fit
//! jointly: parameters in [`FitConfig::free`] are shared by all panels, those
//! in [`FitConfig::per_panel`] get one copy per panel.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::model::{angle_from_couplings, hz, FrequencyGrid, SystemParams};
use crate::spectra::{heterodyne_psd, Branch, Spectrum, SpectrumKind};

const LAMBDA_START: f64 = 1e-3;
const LAMBDA_MIN: f64 = 1e-12;
const LAMBDA_STALL: f64 = 1e12;
const LAMBDA_SINGULAR: f64 = 1e16;
const RELATIVE_FD_STEP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FitParam {
    #[serde(rename = "g_max")]
    GMax,
    #[serde(rename = "theta")]
    Theta,
    #[serde(rename = "delta")]
    Delta,
    #[serde(rename = "kappa")]
    Kappa,
    #[serde(rename = "Gamma_x")]
    DecoherenceX,
    #[serde(rename = "Gamma_y")]
    DecoherenceY,
    #[serde(rename = "gamma_x")]
    GammaX,
    #[serde(rename = "gamma_y")]
    GammaY,
    #[serde(rename = "eta")]
    Eta,
    #[serde(rename = "omega_x")]
    OmegaX,
    #[serde(rename = "omega_y")]
    OmegaY,
    /// x coupling; moves g_max and θ with g_y held.
    #[serde(rename = "g_x")]
    Gx,
    /// y coupling; moves g_max and θ with g_x held.
    #[serde(rename = "g_y")]
    Gy,
}

impl FitParam {
    pub const ALL: [FitParam; 13] = [
        FitParam::GMax,
        FitParam::Theta,
        FitParam::Delta,
        FitParam::Kappa,
        FitParam::DecoherenceX,
        FitParam::DecoherenceY,
        FitParam::GammaX,
        FitParam::GammaY,
        FitParam::Eta,
        FitParam::OmegaX,
        FitParam::OmegaY,
        FitParam::Gx,
        FitParam::Gy,
    ];

    /// κ, Ω_x and Ω_y held; everything the spectra are most sensitive to free.
    pub const DEFAULT_FREE: [FitParam; 6] = [
        FitParam::GMax,
        FitParam::Theta,
        FitParam::DecoherenceX,
        FitParam::DecoherenceY,
        FitParam::Eta,
        FitParam::Delta,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FitParam::GMax => "g_max",
            FitParam::Theta => "theta",
            FitParam::Delta => "delta",
            FitParam::Kappa => "kappa",
            FitParam::DecoherenceX => "Gamma_x",
            FitParam::DecoherenceY => "Gamma_y",
            FitParam::GammaX => "gamma_x",
            FitParam::GammaY => "gamma_y",
            FitParam::Eta => "eta",
            FitParam::OmegaX => "omega_x",
            FitParam::OmegaY => "omega_y",
            FitParam::Gx => "g_x",
            FitParam::Gy => "g_y",
        }
    }

    /// True for parameters measured in rad/s.
    pub fn is_rate(self) -> bool {
        !matches!(self, FitParam::Theta | FitParam::Eta)
    }

    fn typical(self) -> f64 {
        match self {
            FitParam::Theta => 1.0,
            FitParam::Eta => 0.1,
            _ => hz(1e3),
        }
    }

    pub fn default_bounds(self) -> (f64, f64) {
        match self {
            FitParam::Theta => (0.0, std::f64::consts::FRAC_PI_2),
            FitParam::Eta => (0.0, 1.0),
            FitParam::Delta => (f64::NEG_INFINITY, f64::INFINITY),
            _ => (0.0, f64::INFINITY),
        }
    }

    pub fn get(self, p: &SystemParams) -> f64 {
        match self {
            FitParam::GMax => p.g_max(),
            FitParam::Theta => p.theta(),
            FitParam::Delta => p.delta(),
            FitParam::Kappa => p.kappa(),
            FitParam::DecoherenceX => p.decoherence_x(),
            FitParam::DecoherenceY => p.decoherence_y(),
            FitParam::GammaX => p.gamma_x(),
            FitParam::GammaY => p.gamma_y(),
            FitParam::Eta => p.eta(),
            FitParam::OmegaX => p.omega_x(),
            FitParam::OmegaY => p.omega_y(),
            FitParam::Gx => p.couplings().g_x,
            FitParam::Gy => p.couplings().g_y,
        }
    }

    pub fn set(self, p: &SystemParams, v: f64) -> Result<SystemParams> {
        let mut b = p.to_builder();
        match self {
            FitParam::GMax => b.g_max = v,
            FitParam::Theta => b.theta = v,
            FitParam::Delta => b.delta = v,
            FitParam::Kappa => b.kappa = v,
            FitParam::DecoherenceX => b.decoherence_x = v,
            FitParam::DecoherenceY => b.decoherence_y = v,
            FitParam::GammaX => b.gamma_x = v,
            FitParam::GammaY => b.gamma_y = v,
            FitParam::Eta => b.eta = v,
            FitParam::OmegaX => b.omega_x = v,
            FitParam::OmegaY => b.omega_y = v,
            FitParam::Gx | FitParam::Gy => {
                let c = p.couplings();
                let (gx, gy) = if self == FitParam::Gx {
                    (v, c.g_y)
                } else {
                    (c.g_x, v)
                };
                let (g_max, theta) = angle_from_couplings(gx, gy, p.omega_x(), p.omega_y())?;
                b.g_max = g_max;
                b.theta = theta;
            }
        }
        b.build()
    }
}

impl fmt::Display for FitParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FitParam {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        FitParam::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::InvalidFitConfig(format!("unknown fit parameter `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    /// Shared by every panel.
    pub free: Vec<FitParam>,
    /// Fitted separately for each panel.
    pub per_panel: Vec<FitParam>,
    /// Overrides of [`FitParam::default_bounds`], internal units.
    pub bounds: BTreeMap<FitParam, (f64, f64)>,
    pub max_iterations: usize,
    /// Relative step below which the iteration stops.
    pub tolerance: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            free: FitParam::DEFAULT_FREE.to_vec(),
            per_panel: Vec::new(),
            bounds: BTreeMap::new(),
            max_iterations: 200,
            tolerance: 1e-8,
        }
    }
}

impl FitConfig {
    pub fn with_free(free: &[FitParam]) -> Self {
        FitConfig {
            free: free.to_vec(),
            ..FitConfig::default()
        }
    }

    pub fn bounds_of(&self, p: FitParam) -> (f64, f64) {
        self.bounds.get(&p).copied().unwrap_or_else(|| p.default_bounds())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidFitConfig(m));
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return bad(format!("tolerance must be positive, got {}", self.tolerance));
        }
        if self.max_iterations == 0 {
            return bad("max_iterations must be at least 1".into());
        }
        let all: Vec<FitParam> = self.free.iter().chain(&self.per_panel).copied().collect();
        for (i, p) in all.iter().enumerate() {
            if all[..i].contains(p) {
                return bad(format!("parameter `{p}` listed twice"));
            }
        }
        let has = |p| all.contains(&p);
        if (has(FitParam::Gx) || has(FitParam::Gy)) && (has(FitParam::GMax) || has(FitParam::Theta)) {
            return bad("g_x/g_y cannot be fit together with g_max or theta".into());
        }
        for (p, (lo, hi)) in &self.bounds {
            if lo.is_nan() || hi.is_nan() || lo > hi {
                return bad(format!("invalid bounds for `{p}`: [{lo}, {hi}]"));
            }
        }
        Ok(())
    }
}

/// One operating point: starting parameters and its measured branches.
#[derive(Debug, Clone, PartialEq)]
pub struct FitPanel {
    pub initial: SystemParams,
    pub data: Vec<Spectrum>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundHit {
    Lower,
    Upper,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParameterEstimate {
    pub param: FitParam,
    /// `None` for shared parameters.
    pub panel: Option<usize>,
    pub value: f64,
    pub std_error: f64,
    pub bound: Option<BoundHit>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    /// Best parameters of the first panel.
    pub estimates: SystemParams,
    pub panel_estimates: Vec<SystemParams>,
    pub parameters: Vec<ParameterEstimate>,
    /// Row-major, ordered as `parameters`, internal units.
    pub covariance: Vec<Vec<f64>>,
    pub chi2: f64,
    pub initial_chi2: f64,
    /// Data points with non-zero weight.
    pub points: usize,
    pub iterations: usize,
    pub converged: bool,
    pub last_relative_step: f64,
    /// χ² after each accepted step, starting with the initial value.
    pub chi2_history: Vec<f64>,
}

impl FitResult {
    /// Standard error of a shared parameter, or of the first panel's copy.
    pub fn std_error(&self, p: FitParam) -> Option<f64> {
        self.parameters
            .iter()
            .find(|e| e.param == p && e.panel.is_none_or(|i| i == 0))
            .map(|e| e.std_error)
    }

    pub fn bound_hits(&self) -> impl Iterator<Item = &ParameterEstimate> {
        self.parameters.iter().filter(|e| e.bound.is_some())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Residuals {
    pub values: Vec<f64>,
    pub chi2: f64,
}

pub fn weight(data: f64) -> f64 {
    1.0 / data.max(1.0).powi(2)
}

/// Weighted residuals of `data` against a model evaluated on the same grid.
/// Invalid points of either spectrum contribute zero.
pub fn weighted_residuals(data: &Spectrum, model: &Spectrum) -> Result<Residuals> {
    if data.grid() != model.grid() {
        return Err(Error::GridMismatch(
            "data and model are on different grids".into(),
        ));
    }
    let values: Vec<f64> = (0..data.len())
        .map(|i| {
            if data.is_valid(i) && model.is_valid(i) {
                let d = data.values()[i];
                weight(d).sqrt() * (d - model.values()[i])
            } else {
                0.0
            }
        })
        .collect();
    let chi2 = values.iter().map(|r| r * r).sum();
    Ok(Residuals { values, chi2 })
}

fn check_branch(s: &Spectrum) -> Result<Branch> {
    s.branch().ok_or_else(|| {
        Error::InvalidFitConfig("data spectrum carries no branch label".into())
    })
}

/// Residuals of heterodyne branches against the model at `p`, concatenated.
pub fn residuals(data: &[Spectrum], p: &SystemParams) -> Result<Residuals> {
    let mut values = Vec::new();
    for d in data {
        let model = heterodyne_psd(p, d.grid(), check_branch(d)?)?;
        values.extend(weighted_residuals(d, &model)?.values);
    }
    let chi2 = values.iter().map(|r| r * r).sum();
    Ok(Residuals { values, chi2 })
}

/// Model branch at `p` with multiplicative Gaussian noise of relative size
/// `relative_noise`. Each branch draws from its own ChaCha8 stream of `seed`.
pub fn synthetic_branch(
    p: &SystemParams,
    grid: &FrequencyGrid,
    branch: Branch,
    relative_noise: f64,
    seed: u64,
) -> Result<Spectrum> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(match branch {
        Branch::Upper => 0,
        Branch::Lower => 1,
    });
    let clean = heterodyne_psd(p, grid, branch)?;
    let noisy = clean
        .values()
        .iter()
        .map(|v| {
            let z: f64 = StandardNormal.sample(&mut rng);
            v * (1.0 + relative_noise * z)
        })
        .collect();
    Ok(Spectrum::new(grid.clone(), noisy, SpectrumKind::Heterodyne)?.with_branch(branch))
}

/// Upper and lower synthetic branches, in that order.
pub fn synthetic_branches(
    p: &SystemParams,
    grid: &FrequencyGrid,
    relative_noise: f64,
    seed: u64,
) -> Result<Vec<Spectrum>> {
    [Branch::Upper, Branch::Lower]
        .into_iter()
        .map(|b| synthetic_branch(p, grid, b, relative_noise, seed))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Slot {
    param: FitParam,
    panel: Option<usize>,
    lo: f64,
    hi: f64,
    scale: f64,
}

/// Parameter layout and residual function of a (joint) fit.
#[derive(Debug, Clone)]
pub struct FitProblem<'a> {
    panels: &'a [FitPanel],
    slots: Vec<Slot>,
    exec: Execution,
}

impl<'a> FitProblem<'a> {
    pub fn new(panels: &'a [FitPanel], cfg: &FitConfig) -> Result<Self> {
        cfg.validate()?;
        if panels.is_empty() {
            return Err(Error::InvalidFitConfig("no data panels".into()));
        }
        for panel in panels {
            if panel.data.is_empty() {
                return Err(Error::InvalidFitConfig("panel without data".into()));
            }
            for d in &panel.data {
                check_branch(d)?;
                if !d.grid().is_strictly_positive() {
                    return Err(Error::InvalidGrid(
                        "heterodyne data must be on positive offsets".into(),
                    ));
                }
            }
        }
        let mut slots = Vec::new();
        let mut push = |param: FitParam, panel: Option<usize>| -> Result<()> {
            let p0 = &panels[panel.unwrap_or(0)].initial;
            let v = param.get(p0);
            let (lo, hi) = cfg.bounds_of(param);
            if v < lo || v > hi {
                return Err(Error::InvalidFitConfig(format!(
                    "initial {param} = {v} lies outside [{lo}, {hi}]"
                )));
            }
            slots.push(Slot {
                param,
                panel,
                lo,
                hi,
                scale: v.abs().max(param.typical()),
            });
            Ok(())
        };
        for &p in &cfg.free {
            push(p, None)?;
        }
        for i in 0..panels.len() {
            for &p in &cfg.per_panel {
                push(p, Some(i))?;
            }
        }
        // g_x, g_y applied after everything they depend on
        slots.sort_by_key(|s| (s.param >= FitParam::Gx, s.panel));
        Ok(FitProblem {
            panels,
            slots,
            exec: Execution::default(),
        })
    }

    pub fn dimension(&self) -> usize {
        self.slots.len()
    }

    /// Parameter values at the starting point, internal units.
    pub fn initial_values(&self) -> Vec<f64> {
        self.slots
            .iter()
            .map(|s| s.param.get(&self.panels[s.panel.unwrap_or(0)].initial))
            .collect()
    }

    /// Per-panel parameters for a value vector.
    pub fn apply(&self, values: &[f64]) -> Result<Vec<SystemParams>> {
        let mut out = Vec::with_capacity(self.panels.len());
        for (i, panel) in self.panels.iter().enumerate() {
            let mut p = panel.initial;
            for (s, &v) in self.slots.iter().zip(values) {
                if s.panel.is_none_or(|j| j == i) {
                    p = s.param.set(&p, v)?;
                }
            }
            out.push(p);
        }
        Ok(out)
    }

    pub fn residuals(&self, values: &[f64]) -> Result<Residuals> {
        let params = self.apply(values)?;
        let pairs: Vec<(usize, &FitPanel)> = self.panels.iter().enumerate().collect();
        let parts = self
            .exec
            .map(&pairs, |&(i, panel)| residuals(&panel.data, &params[i]));
        let mut values = Vec::new();
        for part in parts {
            values.extend(part?.values);
        }
        let chi2 = values.iter().map(|r| r * r).sum();
        Ok(Residuals { values, chi2 })
    }

    /// Data points with non-zero weight.
    pub fn points(&self) -> usize {
        self.panels
            .iter()
            .flat_map(|p| &p.data)
            .map(|d| d.valid().iter().filter(|&&ok| ok).count())
            .sum()
    }

    fn step(&self, k: usize, v: f64) -> f64 {
        let s = &self.slots[k];
        let h = (RELATIVE_FD_STEP * v.abs()).max(RELATIVE_FD_STEP * s.param.typical());
        if v + h > s.hi {
            -h
        } else {
            h
        }
    }

    /// Forward-difference Jacobian ∂r/∂v (rows: residuals, columns: slots).
    pub fn forward_jacobian(&self, values: &[f64]) -> Result<DMatrix<f64>> {
        let base = self.residuals(values)?.values;
        self.jacobian_with(values, &base, 1.0, false)
    }

    /// Central-difference Jacobian with steps scaled by `step_factor`.
    pub fn central_jacobian(&self, values: &[f64], step_factor: f64) -> Result<DMatrix<f64>> {
        let base = self.residuals(values)?.values;
        self.jacobian_with(values, &base, step_factor, true)
    }

    fn jacobian_with(
        &self,
        values: &[f64],
        base: &[f64],
        factor: f64,
        central: bool,
    ) -> Result<DMatrix<f64>> {
        let n = base.len();
        let mut j = DMatrix::zeros(n, values.len());
        for k in 0..values.len() {
            let h = factor * self.step(k, values[k]);
            let mut up = values.to_vec();
            up[k] += h;
            let r_up = self.residuals(&up)?.values;
            if central {
                let mut dn = values.to_vec();
                dn[k] -= h;
                let r_dn = self.residuals(&dn)?.values;
                for i in 0..n {
                    j[(i, k)] = (r_up[i] - r_dn[i]) / (2.0 * h);
                }
            } else {
                for i in 0..n {
                    j[(i, k)] = (r_up[i] - base[i]) / h;
                }
            }
        }
        Ok(j)
    }

    fn project(&self, values: &mut [f64]) {
        for (v, s) in values.iter_mut().zip(&self.slots) {
            *v = v.clamp(s.lo, s.hi);
        }
    }

    fn relative_step(&self, from: &[f64], to: &[f64]) -> f64 {
        from.iter()
            .zip(to)
            .zip(&self.slots)
            .map(|((a, b), s)| (b - a).abs() / a.abs().max(s.param.typical()))
            .fold(0.0, f64::max)
    }

    fn trial_chi2(&self, values: &[f64]) -> f64 {
        match self.residuals(values) {
            Ok(r) if r.values.iter().all(|v| v.is_finite()) => r.chi2,
            _ => f64::INFINITY,
        }
    }
}

fn solve_damped(jtj: &DMatrix<f64>, grad: &DVector<f64>, lambda: f64) -> Option<DVector<f64>> {
    let k = jtj.nrows();
    let peak = (0..k).map(|i| jtj[(i, i)]).fold(0.0, f64::max);
    let mut m = jtj.clone();
    for i in 0..k {
        m[(i, i)] += lambda * jtj[(i, i)].max(1e-12 * peak).max(f64::MIN_POSITIVE);
    }
    m.cholesky().map(|c| c.solve(&(-grad)))
}

fn covariance(j: &DMatrix<f64>, chi2: f64, dof: usize) -> DMatrix<f64> {
    let jtj = j.transpose() * j;
    let k = jtj.nrows();
    let inv = match jtj.clone().cholesky() {
        Some(c) => c.inverse(),
        None => {
            let eps = 1e-12 * jtj.norm();
            jtj.pseudo_inverse(eps)
            .unwrap_or_else(|_| DMatrix::from_element(k, k, f64::NAN))
        }
    };
    let factor = if dof > 0 { chi2 / dof as f64 } else { 1.0 };
    let c = inv * factor;
    (&c + c.transpose()) * 0.5
}

/// Fits one panel's heterodyne branches.
pub fn fit_heterodyne(data: &[Spectrum], initial: &SystemParams, cfg: &FitConfig) -> Result<FitResult> {
    let panels = [FitPanel {
        initial: *initial,
        data: data.to_vec(),
    }];
    fit_joint(&panels, &FitConfig {
        per_panel: Vec::new(),
        free: cfg.free.iter().chain(&cfg.per_panel).copied().collect(),
        ..cfg.clone()
    })
}

/// Joint fit of several panels with shared and per-panel parameters.
pub fn fit_joint(panels: &[FitPanel], cfg: &FitConfig) -> Result<FitResult> {
    let problem = FitProblem::new(panels, cfg)?;
    let k = problem.dimension();
    let scale = DVector::from_iterator(k, problem.slots.iter().map(|s| s.scale));

    let mut values = problem.initial_values();
    let r0 = problem.residuals(&values)?;
    if r0.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidFitConfig(
            "model is not finite at the initial parameters".into(),
        ));
    }
    let initial_chi2 = r0.chi2;
    let mut chi2 = initial_chi2;
    let mut residual = DVector::from_vec(r0.values);
    let mut iterations = 0;
    let mut converged = k == 0;
    let mut last_step = 0.0;
    let mut lambda = LAMBDA_START;
    let mut chi2_history = vec![chi2];

    while !converged && iterations < cfg.max_iterations {
        iterations += 1;
        // Jacobian in scaled coordinates u = v / scale
        let j = problem.jacobian_with(&values, residual.as_slice(), 1.0, false)?;
        let js = &j * DMatrix::from_diagonal(&scale);
        let jtj = js.transpose() * &js;
        let grad = js.transpose() * &residual;

        let mut accepted = false;
        loop {
            let Some(du) = solve_damped(&jtj, &grad, lambda) else {
                lambda *= 10.0;
                if lambda > LAMBDA_SINGULAR {
                    return Err(Error::SingularNormalEquations(format!(
                        "damping reached {lambda:e} without a positive definite system"
                    )));
                }
                continue;
            };
            let mut trial: Vec<f64> = values
                .iter()
                .zip(du.iter().zip(scale.iter()))
                .map(|(v, (d, s))| v + d * s)
                .collect();
            problem.project(&mut trial);
            last_step = problem.relative_step(&values, &trial);
            if last_step < cfg.tolerance {
                converged = true;
                break;
            }
            let trial_chi2 = problem.trial_chi2(&trial);
            if trial_chi2 < chi2 {
                values = trial;
                chi2 = trial_chi2;
                chi2_history.push(chi2);
                residual = DVector::from_vec(problem.residuals(&values)?.values);
                lambda = (lambda / 10.0).max(LAMBDA_MIN);
                accepted = true;
                break;
            }
            lambda *= 10.0;
            if lambda > LAMBDA_STALL {
                break;
            }
        }
        if !accepted && !converged {
            break;
        }
    }

    let panel_estimates = problem.apply(&values)?;
    let points = problem.points();
    let cov = if k > 0 {
        let j = problem.forward_jacobian(&values)?;
        covariance(&j, chi2, points.saturating_sub(k))
    } else {
        DMatrix::zeros(0, 0)
    };
    let parameters = problem
        .slots
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let v = values[i];
            let tol = 1e-9 * v.abs().max(s.param.typical());
            let bound = if v <= s.lo + tol {
                Some(BoundHit::Lower)
            } else if v >= s.hi - tol {
                Some(BoundHit::Upper)
            } else {
                None
            };
            if let Some(b) = bound {
                log::warn!("{} stopped at its {:?} bound", s.param, b);
            }
            ParameterEstimate {
                param: s.param,
                panel: s.panel,
                value: v,
                std_error: cov[(i, i)].max(0.0).sqrt(),
                bound,
            }
        })
        .collect();
    let covariance = (0..k)
        .map(|i| (0..k).map(|j| cov[(i, j)]).collect())
        .collect();
    Ok(FitResult {
        estimates: panel_estimates[0],
        panel_estimates,
        parameters,
        covariance,
        chi2,
        initial_chi2,
        points,
        iterations,
        converged,
        last_relative_step: last_step,
        chi2_history,
    })
}
