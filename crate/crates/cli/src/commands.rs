use std::path::{Path, PathBuf};

use clap::ValueEnum;
use optospec_core::dynamics::{build_drift, eigenmodes, require_stable, spectral_abscissa};
use optospec_core::fitting::{fit_joint, synthetic_branch, FitPanel, FitParam, FitResult};
use optospec_core::model::{hz, to_hz, FrequencyGrid};
use optospec_core::oracle::{simulate_bright_psd, simulate_trajectory, Simulator};
use optospec_core::spectra::{
    asymmetry_model, branch_psd, bright_mode_psd, heterodyne_psd, interference_term,
};
use optospec_core::{Branch, Execution, Spectrum, SpectrumKind, SystemParams};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::{display_name, to_display, ConfigFile, GridSpec};
use crate::error::{CliError, CliResult};
use crate::output::{fmt_f64, write_json, write_sidecar, write_spectrum_csv, write_table};

/// Positive offsets from 1 kHz to 300 kHz in 100 Hz steps.
const POSITIVE_GRID: GridSpec = GridSpec {
    f_min_hz: 1e3,
    f_max_hz: 300e3,
    points: 2991,
};
/// ±300 kHz in 100 Hz steps.
const SYMMETRIC_GRID: GridSpec = GridSpec {
    f_min_hz: -300e3,
    f_max_hz: 300e3,
    points: 6001,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    /// Bright-mode displacement PSD on a two-sided grid.
    Bright,
    /// Shot-noise-normalized heterodyne, anti-Stokes side.
    HeterodyneUpper,
    /// Shot-noise-normalized heterodyne, Stokes side.
    HeterodyneLower,
    /// |g_x²χ_x⁻ + g_y²χ_y⁻|².
    Interference,
    /// Displacement PSD at −ω.
    Stokes,
    /// Displacement PSD at +ω.
    AntiStokes,
    /// S(−ω)/S(ω).
    Asymmetry,
}

impl Kind {
    fn default_grid(self) -> GridSpec {
        match self {
            Kind::Bright => SYMMETRIC_GRID,
            _ => POSITIVE_GRID,
        }
    }

    fn label(self) -> String {
        self.to_possible_value()
            .map(|v| v.get_name().to_owned())
            .unwrap_or_default()
    }

    fn evaluate(self, p: &SystemParams, grid: &FrequencyGrid) -> CliResult<Spectrum> {
        Ok(match self {
            Kind::Bright => bright_mode_psd(p, grid)?,
            Kind::HeterodyneUpper => heterodyne_psd(p, grid, Branch::Upper)?,
            Kind::HeterodyneLower => heterodyne_psd(p, grid, Branch::Lower)?,
            Kind::Interference => interference_term(p, grid)?,
            Kind::Stokes => branch_psd(p, grid, Branch::Lower)?,
            Kind::AntiStokes => branch_psd(p, grid, Branch::Upper)?,
            Kind::Asymmetry => asymmetry_model(p, grid)?,
        })
    }

    fn branch(self) -> Option<Branch> {
        match self {
            Kind::HeterodyneUpper => Some(Branch::Upper),
            Kind::HeterodyneLower => Some(Branch::Lower),
            _ => None,
        }
    }
}

/// Parameters, grid and provenance shared by every command.
pub struct Setup {
    pub config: ConfigFile,
    pub params: SystemParams,
}

impl Setup {
    pub fn load(path: &Path, allow_unknown: bool) -> CliResult<Self> {
        let config = ConfigFile::load(path, allow_unknown)?;
        let params = config.params()?;
        Ok(Setup { config, params })
    }

    fn grid(&self, default: GridSpec) -> CliResult<(GridSpec, Vec<f64>, FrequencyGrid)> {
        let spec = self.config.grid.unwrap_or(default);
        let (f, grid) = spec.build()?;
        Ok((spec, f, grid))
    }

    fn meta(&self, command: &str, extra: Value) -> Value {
        meta_for(&self.config, &self.params, command, extra)
    }
}

fn meta_for(config: &ConfigFile, p: &SystemParams, command: &str, extra: Value) -> Value {
    let mut m = json!({
        "tool": "optospec",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "config": config.resolved(p),
    });
    if let (Some(obj), Value::Object(extra)) = (m.as_object_mut(), extra) {
        obj.extend(extra);
    }
    m
}

fn stable(p: &SystemParams) -> CliResult<()> {
    require_stable(&build_drift(p)).map_err(CliError::from)
}

pub struct SpectrumArgs {
    pub kind: Kind,
    pub noise: Option<f64>,
    pub seed: u64,
}

pub fn spectrum(setup: &Setup, args: &SpectrumArgs, out: &Path) -> CliResult<()> {
    stable(&setup.params)?;
    let (spec, f_hz, grid) = setup.grid(args.kind.default_grid())?;
    let s = match args.noise {
        None => args.kind.evaluate(&setup.params, &grid)?,
        Some(rel) => {
            let Some(branch) = args.kind.branch() else {
                return Err(CliError::config(
                    "--noise",
                    "only heterodyne kinds take synthetic noise",
                ));
            };
            if !(rel.is_finite() && rel >= 0.0) {
                return Err(CliError::config("--noise", "must be a non-negative number"));
            }
            synthetic_branch(&setup.params, &grid, branch, rel, args.seed)?
        }
    };
    write_spectrum_csv(out, "value", &s, Some(&f_hz))?;
    let mut extra = json!({ "kind": args.kind, "grid": spec });
    if let Some(rel) = args.noise {
        extra["noise"] = json!({ "relative": rel, "seed": args.seed });
    }
    write_sidecar(out, &setup.meta("spectrum", extra))
}

pub fn asymmetry(setup: &Setup, out: &Path) -> CliResult<()> {
    stable(&setup.params)?;
    let (spec, f_hz, grid) = setup.grid(POSITIVE_GRID)?;
    if !grid.is_strictly_positive() {
        return Err(CliError::config("grid.f_min_hz", "asymmetry needs f > 0"));
    }
    let s = asymmetry_model(&setup.params, &grid)?;
    write_spectrum_csv(out, "A", &s, Some(&f_hz))?;
    write_sidecar(out, &setup.meta("asymmetry", json!({ "grid": spec })))
}

#[derive(Debug, Serialize)]
struct ModeOut {
    frequency_hz: f64,
    /// Energy linewidth (FWHM), Hz.
    decay_hz: f64,
}

#[derive(Debug, Serialize)]
struct EigenOut {
    stable: bool,
    /// Largest eigenvalue real part divided by 2π.
    spectral_abscissa_hz: f64,
    modes: Vec<ModeOut>,
}

/// Normal modes. Reports instability through the `stable` flag rather than
/// the exit code.
pub fn eigen(setup: &Setup, out: &Path) -> CliResult<()> {
    let drift = build_drift(&setup.params);
    let abscissa = spectral_abscissa(&drift)?;
    let modes = eigenmodes(&drift)?
        .into_iter()
        .map(|m| ModeOut {
            frequency_hz: to_hz(m.frequency),
            decay_hz: to_hz(m.decay),
        })
        .collect();
    let result = EigenOut {
        stable: abscissa < 0.0,
        spectral_abscissa_hz: to_hz(abscissa),
        modes,
    };
    if !result.stable {
        log::warn!("drift matrix is unstable (abscissa {abscissa:e} rad/s)");
    }
    write_json(out, &result)?;
    write_sidecar(out, &setup.meta("eigen", json!({})))
}

pub struct SimulateArgs {
    pub seed: Option<u64>,
    pub zero_noise: bool,
    pub trajectory: Option<PathBuf>,
    pub decimate: usize,
}

pub fn simulate(setup: &Setup, args: &SimulateArgs, out: &Path) -> CliResult<()> {
    stable(&setup.params)?;
    let p = &setup.params;
    let mut section = setup.config.sim.clone().unwrap_or_default();
    if args.zero_noise {
        section.noise = Some(false);
    }
    let cfg = section.resolve(p, args.seed)?;
    if args.decimate == 0 {
        return Err(CliError::config("--decimate", "must be at least 1"));
    }
    let burn_in_steps = Simulator::new(p, &cfg)?.burn_in_steps();
    let extra = json!({
        "seed": cfg.seed,
        "sim": cfg,
        "burn_in_steps": burn_in_steps,
        "total_segments": cfg.total_segments(),
    });

    let psd = simulate_bright_psd(p, &cfg, Execution::default())?;
    write_spectrum_csv(out, "value", &psd, None)?;
    write_sidecar(out, &setup.meta("simulate", extra.clone()))?;

    if let Some(path) = &args.trajectory {
        let t = simulate_trajectory(p, &cfg)?;
        let header = ["t_s", "X_c", "P_c", "x", "p_x", "y", "p_y"];
        let comment = serde_json::to_string(&json!({ "seed": cfg.seed, "sim": cfg }))
            .map_err(anyhow::Error::from)?;
        let rows = t
            .times()
            .zip(&t.states)
            .step_by(args.decimate)
            .map(|(time, s)| std::iter::once(time).chain(s.iter().copied()).collect());
        write_table(path, &comment, &header, rows)?;
        write_sidecar(path, &setup.meta("simulate", extra))?;
    }
    Ok(())
}

/// One heterodyne branch read back from `f_hz,value` CSV.
pub fn read_branch(path: &Path, branch: Branch) -> CliResult<Spectrum> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let bad = |line: usize, what: &str| {
        CliError::Config(format!("{}:{line}: {what}", path.display()))
    };
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));
    match lines.next() {
        Some((_, h)) if h.trim() == "f_hz,value" => {}
        Some((i, _)) => return Err(bad(i + 1, "expected header `f_hz,value`")),
        None => return Err(bad(0, "empty file")),
    }
    let (mut omega, mut values) = (Vec::new(), Vec::new());
    for (i, line) in lines {
        let mut cols = line.split(',').map(str::trim);
        let (Some(f), Some(v), None) = (cols.next(), cols.next(), cols.next()) else {
            return Err(bad(i + 1, "expected two columns"));
        };
        let f: f64 = f.parse().map_err(|_| bad(i + 1, "frequency is not a number"))?;
        let v: f64 = v.parse().map_err(|_| bad(i + 1, "value is not a number"))?;
        omega.push(hz(f));
        values.push(v);
    }
    let grid = FrequencyGrid::new(omega)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    if !grid.is_strictly_positive() {
        return Err(CliError::Config(format!(
            "{}: heterodyne offsets must be positive",
            path.display()
        )));
    }
    Ok(Spectrum::new(grid, values, SpectrumKind::Heterodyne)?.with_branch(branch))
}

/// `upper=path` or `lower=path`.
pub fn parse_data_arg(s: &str) -> Result<(Branch, PathBuf), String> {
    let (b, path) = s
        .split_once('=')
        .ok_or_else(|| format!("expected upper=PATH or lower=PATH, got `{s}`"))?;
    let branch = match b {
        "upper" | "anti-stokes" => Branch::Upper,
        "lower" | "stokes" => Branch::Lower,
        _ => return Err(format!("unknown branch `{b}`, expected upper or lower")),
    };
    Ok((branch, PathBuf::from(path)))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    panels: Vec<ManifestPanel>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestPanel {
    /// Starting point for this panel; the main config when absent.
    #[serde(default)]
    config: Option<PathBuf>,
    #[serde(default)]
    upper: Option<PathBuf>,
    #[serde(default)]
    lower: Option<PathBuf>,
}

struct LoadedPanel {
    config: ConfigFile,
    files: Vec<(Branch, PathBuf)>,
    panel: FitPanel,
}

fn load_panel(config: ConfigFile, files: Vec<(Branch, PathBuf)>) -> CliResult<LoadedPanel> {
    if files.is_empty() {
        return Err(CliError::config("--data", "no data files given"));
    }
    let initial = config.params()?;
    let data = files
        .iter()
        .map(|(b, path)| read_branch(path, *b))
        .collect::<CliResult<Vec<_>>>()?;
    Ok(LoadedPanel {
        config,
        files,
        panel: FitPanel { initial, data },
    })
}

fn load_manifest(path: &Path, fallback: &ConfigFile, allow_unknown: bool) -> CliResult<Vec<LoadedPanel>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let manifest: Manifest = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    manifest
        .panels
        .into_iter()
        .map(|m| {
            let config = match &m.config {
                Some(c) => ConfigFile::load(&base.join(c), allow_unknown)?,
                None => fallback.clone(),
            };
            let files = [(Branch::Upper, m.upper), (Branch::Lower, m.lower)]
                .into_iter()
                .filter_map(|(b, p)| p.map(|p| (b, base.join(p))))
                .collect();
            load_panel(config, files)
        })
        .collect()
}

#[derive(Debug, Serialize)]
struct EstimateOut {
    name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    panel: Option<usize>,
    value: f64,
    std_error: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    bound: Option<optospec_core::fitting::BoundHit>,
}

fn fit_json(result: &FitResult, panels: &[LoadedPanel]) -> Value {
    let params: Vec<FitParam> = result.parameters.iter().map(|e| e.param).collect();
    let estimates: Vec<EstimateOut> = result
        .parameters
        .iter()
        .map(|e| EstimateOut {
            name: display_name(e.param),
            panel: e.panel,
            value: to_display(e.param, e.value),
            std_error: to_display(e.param, e.std_error).abs(),
            bound: e.bound,
        })
        .collect();
    let covariance: Vec<Vec<f64>> = result
        .covariance
        .iter()
        .enumerate()
        .map(|(i, row)| {
            row.iter()
                .enumerate()
                .map(|(j, c)| c * to_display(params[i], 1.0) * to_display(params[j], 1.0))
                .collect()
        })
        .collect();
    let dof = result.points.saturating_sub(params.len()).max(1);
    let resolved: Vec<_> = result
        .panel_estimates
        .iter()
        .zip(panels)
        .map(|(p, l)| l.config.resolved(p))
        .collect();
    json!({
        "converged": result.converged,
        "iterations": result.iterations,
        "chi2": result.chi2,
        "initial_chi2": result.initial_chi2,
        "reduced_chi2": result.chi2 / dof as f64,
        "points": result.points,
        "last_relative_step": result.last_relative_step,
        "parameters": estimates,
        "covariance": covariance,
        "estimates": resolved,
        "chi2_history": result.chi2_history,
    })
}

pub struct FitArgs {
    pub data: Vec<(Branch, PathBuf)>,
    pub panels: Option<PathBuf>,
    pub allow_unknown: bool,
}

/// Writes the result whether or not the fit converged; the caller maps a
/// non-converged fit onto its exit code.
pub fn fit(setup: &Setup, args: &FitArgs, out: &Path) -> CliResult<()> {
    let cfg = setup.config.fit.clone().unwrap_or_default().resolve()?;
    let loaded = match (&args.panels, args.data.is_empty()) {
        (Some(_), false) => {
            return Err(CliError::config("--panels", "give either --panels or --data, not both"))
        }
        (Some(m), true) => load_manifest(m, &setup.config, args.allow_unknown)?,
        (None, _) => vec![load_panel(setup.config.clone(), args.data.clone())?],
    };
    for l in &loaded {
        stable(&l.panel.initial)?;
    }
    let panels: Vec<FitPanel> = loaded.iter().map(|l| l.panel.clone()).collect();
    let result = fit_joint(&panels, &cfg)?;
    write_json(out, &fit_json(&result, &loaded))?;
    let inputs: Vec<Value> = loaded
        .iter()
        .map(|l| {
            let files: Vec<Value> = l
                .files
                .iter()
                .map(|(b, p)| json!({ "branch": b, "path": p }))
                .collect();
            json!({ "initial": l.config.resolved(&l.panel.initial), "data": files })
        })
        .collect();
    let meta = setup.meta(
        "fit",
        json!({
            "free": cfg.free,
            "per_panel": cfg.per_panel,
            "max_iterations": cfg.max_iterations,
            "tolerance": cfg.tolerance,
            "panels": inputs,
        }),
    );
    write_sidecar(out, &meta)?;
    if result.converged {
        Ok(())
    } else {
        Err(CliError::NotConverged(format!(
            "{} iterations, last relative step {:e}; result written to {}",
            result.iterations,
            result.last_relative_step,
            out.display()
        )))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepParam {
    Theta,
    Delta,
    GMax,
    #[value(name = "Gamma_x")]
    DecoherenceX,
    #[value(name = "Gamma_y")]
    DecoherenceY,
    Eta,
    Kappa,
}

impl SweepParam {
    fn label(self) -> &'static str {
        match self {
            SweepParam::Theta => "theta",
            SweepParam::Delta => "delta",
            SweepParam::GMax => "g_max",
            SweepParam::DecoherenceX => "Gamma_x",
            SweepParam::DecoherenceY => "Gamma_y",
            SweepParam::Eta => "eta",
            SweepParam::Kappa => "kappa",
        }
    }

    /// Copy of `cfg` with this parameter set to `v` (degrees or Hz).
    fn apply(self, cfg: &ConfigFile, v: f64) -> CliResult<ConfigFile> {
        let mut c = cfg.clone();
        match self {
            SweepParam::Theta | SweepParam::GMax if c.g_max_hz.is_none() => {
                return Err(CliError::config(
                    "g_max_hz",
                    "sweeping theta or g_max needs g_max_hz and theta_deg in the config",
                ));
            }
            SweepParam::Theta => c.theta_deg = Some(v),
            SweepParam::GMax => c.g_max_hz = Some(v),
            SweepParam::Delta => c.delta_hz = v,
            SweepParam::DecoherenceX => c.decoherence_x_hz = v,
            SweepParam::DecoherenceY => c.decoherence_y_hz = v,
            SweepParam::Eta => c.eta = v,
            SweepParam::Kappa => c.kappa_hz = v,
        }
        Ok(c)
    }
}

/// Inclusive arithmetic progression from `from` towards `to`.
pub fn sweep_values(from: f64, to: f64, step: f64) -> CliResult<Vec<f64>> {
    if !(from.is_finite() && to.is_finite() && step.is_finite()) {
        return Err(CliError::config("--from/--to/--step", "must be finite"));
    }
    if step == 0.0 || (to - from) * step < 0.0 {
        return Err(CliError::config("--step", "must be non-zero and point from --from to --to"));
    }
    let n = ((to - from) / step + 1e-9).floor() as usize + 1;
    if n > 100_000 {
        return Err(CliError::config("--step", format!("sweep would produce {n} files")));
    }
    Ok((0..n).map(|i| from + i as f64 * step).collect())
}

/// File-name form of a sweep value: integers without a fractional part.
fn value_tag(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        fmt_f64(v)
    }
}

pub struct SweepArgs {
    pub param: SweepParam,
    pub from: f64,
    pub to: f64,
    pub step: f64,
    pub kind: Kind,
}

pub fn sweep(setup: &Setup, args: &SweepArgs, out_dir: &Path) -> CliResult<Vec<PathBuf>> {
    let values = sweep_values(args.from, args.to, args.step)?;
    let members = values
        .iter()
        .map(|&v| {
            let c = args.param.apply(&setup.config, v)?;
            let p = c.params()?;
            stable(&p)?;
            Ok((v, c, p))
        })
        .collect::<CliResult<Vec<_>>>()?;
    let (spec, f_hz, grid) = setup.grid(args.kind.default_grid())?;
    let spectra = Execution::default().map(&members, |(_, _, p)| args.kind.evaluate(p, &grid));
    std::fs::create_dir_all(out_dir)?;
    let mut written = Vec::with_capacity(members.len());
    for ((v, c, p), s) in members.iter().zip(spectra) {
        let name = format!("sweep_{}_{}.csv", args.param.label(), value_tag(*v));
        let path = out_dir.join(name);
        let column = if args.kind == Kind::Asymmetry { "A" } else { "value" };
        write_spectrum_csv(&path, column, &s?, Some(&f_hz))?;
        let extra = json!({
            "kind": args.kind,
            "grid": spec,
            "sweep": { "param": args.param.label(), "value": v },
        });
        write_sidecar(&path, &meta_for(c, p, "sweep", extra))?;
        written.push(path);
    }
    log::info!("wrote {} {} files", written.len(), args.kind.label());
    Ok(written)
}
