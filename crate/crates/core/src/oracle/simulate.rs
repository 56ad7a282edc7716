//! Stochastic time-domain integration of the linearized quadrature dynamics.
//!
//! The drift A is propagated exactly over each step, Φ = exp(A dt), and the
//! discrete noise covariance Q = ∫₀^dt e^{As} D e^{Aᵀs} ds is obtained from a
//! single 12×12 matrix exponential. Noise is the classical (symmetrized)
//! realization: D = diag(κ, κ, 2Γ_x, 2Γ_x, 2Γ_y, 2Γ_y).
//!
//! Random numbers come from ChaCha8 seeded with `seed`; independent
//! trajectories use the same key on separate streams (stream = index).

use nalgebra::{SMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dynamics::{build_drift, eigenmodes, spectral_abscissa, DIM};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::model::SystemParams;
use crate::oracle::welch::{hop_length, segment_count, WelchAccumulator, Window};
use crate::spectra::Spectrum;

type Mat6 = [[f64; DIM]; DIM];

/// Step bound relative to the fastest rate in the problem.
pub const MAX_STEP_FRACTION: f64 = 0.05;
const DIVERGENCE_RATIO: f64 = 1e6;
const DIVERGENCE_CHECK_EVERY: usize = 4096;
const MAX_BURN_IN_STEPS: f64 = 1e9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    /// Step in seconds.
    pub dt: f64,
    /// Recorded length in seconds, summed over trajectories.
    pub duration: f64,
    pub seed: u64,
    pub segment_length: usize,
    #[serde(default = "default_overlap")]
    pub overlap: f64,
    #[serde(default)]
    pub window: Window,
    /// Discarded transient in seconds; `None` uses 10 / (slowest mode decay).
    #[serde(default)]
    pub burn_in: Option<f64>,
    /// Set to false for the deterministic response to `initial`.
    #[serde(default = "default_noise")]
    pub noise: bool,
    /// Starting state (X_c, P_c, x, p_x, y, p_y).
    #[serde(default)]
    pub initial: Option<[f64; DIM]>,
    /// Independent trajectories the duration is split across.
    #[serde(default = "default_trajectories")]
    pub trajectories: usize,
}

fn default_overlap() -> f64 {
    0.5
}
fn default_noise() -> bool {
    true
}
fn default_trajectories() -> usize {
    1
}

/// Fastest rate (rad/s) the step must resolve.
pub fn fastest_rate(p: &SystemParams) -> f64 {
    p.omega_x()
        .max(p.omega_y())
        .max(p.delta().abs())
        .max(p.kappa())
}

impl SimConfig {
    /// Config producing `segments` Welch segments per trajectory, with a step
    /// at 80 % of the allowed bound.
    pub fn for_segments(p: &SystemParams, segments: usize, segment_length: usize, seed: u64) -> Self {
        let dt = 0.8 * MAX_STEP_FRACTION / fastest_rate(p);
        let hop = hop_length(segment_length, 0.5);
        let samples = segment_length + segments.saturating_sub(1) * hop;
        SimConfig {
            dt,
            duration: samples as f64 * dt,
            seed,
            segment_length,
            overlap: 0.5,
            window: Window::Hann,
            burn_in: None,
            noise: true,
            initial: None,
            trajectories: 1,
        }
    }

    /// Recorded samples per trajectory.
    pub fn samples_per_trajectory(&self) -> usize {
        ((self.duration / self.dt).round() as usize) / self.trajectories.max(1)
    }

    pub fn total_segments(&self) -> usize {
        self.trajectories
            * segment_count(self.samples_per_trajectory(), self.segment_length, self.overlap)
    }

    pub fn validate(&self, p: &SystemParams) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSimConfig(m));
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        let bound = MAX_STEP_FRACTION / fastest_rate(p);
        if self.dt >= bound {
            return bad(format!("dt = {:e} s must be below {bound:e} s", self.dt));
        }
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return bad(format!("duration must be positive, got {}", self.duration));
        }
        if self.segment_length < 2 {
            return bad(format!("segment_length must be at least 2, got {}", self.segment_length));
        }
        if !(0.0..1.0).contains(&self.overlap) {
            return bad(format!("overlap must lie in [0, 1), got {}", self.overlap));
        }
        if self.trajectories == 0 {
            return bad("trajectories must be at least 1".into());
        }
        if let Some(b) = self.burn_in {
            if !(b.is_finite() && b >= 0.0) {
                return bad(format!("burn_in must be non-negative, got {b}"));
            }
        }
        if let Some(x0) = self.initial {
            if x0.iter().any(|v| !v.is_finite()) {
                return bad("initial state must be finite".into());
            }
        }
        if self.total_segments() < 10 {
            return bad(format!(
                "duration covers {} segments of {} samples, need at least 10",
                self.total_segments(),
                self.segment_length
            ));
        }
        Ok(())
    }
}

/// Sampled quadratures after the transient.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub seed: u64,
    pub burn_in_steps: usize,
    pub states: Vec<[f64; DIM]>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.states.len()).map(|k| k as f64 * self.dt)
    }

    pub fn column(&self, index: usize) -> Vec<f64> {
        self.states.iter().map(|s| s[index]).collect()
    }

    /// x_b = w_x x + w_y y.
    pub fn bright(&self, p: &SystemParams) -> Vec<f64> {
        let (wx, wy) = bright_weights(p);
        self.states.iter().map(|s| wx * s[2] + wy * s[4]).collect()
    }
}

fn bright_weights(p: &SystemParams) -> (f64, f64) {
    let c = p.couplings();
    (c.bright_weight_x, c.bright_weight_y)
}

/// Diffusion of the symmetrized input noise in the quadrature basis.
pub fn diffusion(p: &SystemParams) -> [f64; DIM] {
    let k = p.kappa();
    let gx = 2.0 * p.decoherence_x();
    let gy = 2.0 * p.decoherence_y();
    [k, k, gx, gx, gy, gy]
}

/// Exact one-step propagator and noise factor.
#[derive(Debug, Clone)]
pub struct Simulator {
    dt: f64,
    phi: Mat6,
    noise_factor: Mat6,
    variance_scale: f64,
    burn_in_steps: usize,
}

impl Simulator {
    pub fn new(p: &SystemParams, cfg: &SimConfig) -> Result<Self> {
        cfg.validate(p)?;
        let drift = build_drift(p);
        let abscissa = spectral_abscissa(&drift)?;
        if abscissa >= 0.0 {
            return Err(Error::Unstable { max_real: abscissa });
        }
        let a = SMatrix::<f64, DIM, DIM>::from_fn(|i, j| drift.get(i, j));
        let d = diffusion(p);
        let mut block = SMatrix::<f64, 12, 12>::zeros();
        for i in 0..DIM {
            for j in 0..DIM {
                block[(i, j)] = -a[(i, j)] * cfg.dt;
                block[(DIM + i, DIM + j)] = a[(j, i)] * cfg.dt;
            }
            block[(i, DIM + i)] = d[i] * cfg.dt;
        }
        let f = block.exp();
        let f12 = f.fixed_view::<DIM, DIM>(0, DIM).into_owned();
        let f22 = f.fixed_view::<DIM, DIM>(DIM, DIM).into_owned();
        let phi_m = f22.transpose();
        let q = phi_m * f12;
        let q = (q + q.transpose()) * 0.5;
        let eig = SymmetricEigen::new(q);
        let mut factor = eig.eigenvectors;
        for (j, lam) in eig.eigenvalues.iter().enumerate() {
            let s = lam.max(0.0).sqrt();
            for i in 0..DIM {
                factor[(i, j)] *= s;
            }
        }
        let mut phi = [[0.0; DIM]; DIM];
        let mut noise_factor = [[0.0; DIM]; DIM];
        for i in 0..DIM {
            for j in 0..DIM {
                phi[i][j] = phi_m[(i, j)];
                noise_factor[i][j] = if cfg.noise { factor[(i, j)] } else { 0.0 };
            }
        }

        let slowest_amplitude = -abscissa;
        let mut variance_scale = if cfg.noise {
            d.iter().sum::<f64>() / slowest_amplitude
        } else {
            0.0
        };
        if let Some(x0) = cfg.initial {
            variance_scale = variance_scale.max(x0.iter().map(|v| v * v).sum());
        }

        let burn_in = match cfg.burn_in {
            Some(t) => t,
            None => {
                let slowest = eigenmodes(&drift)?
                    .iter()
                    .map(|m| m.decay)
                    .fold(f64::INFINITY, f64::min);
                10.0 / slowest
            }
        };
        let steps = (burn_in / cfg.dt).ceil();
        if steps > MAX_BURN_IN_STEPS {
            return Err(Error::InvalidSimConfig(format!(
                "automatic transient of {burn_in:e} s needs {steps:e} steps; set burn_in explicitly"
            )));
        }
        Ok(Simulator {
            dt: cfg.dt,
            phi,
            noise_factor,
            variance_scale,
            burn_in_steps: steps as usize,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn burn_in_steps(&self) -> usize {
        self.burn_in_steps
    }

    pub fn propagator(&self) -> Mat6 {
        self.phi
    }

    /// Runs one trajectory: burn-in, then `samples` recorded states passed to
    /// `sink` in time order.
    pub fn run<F: FnMut(&[f64; DIM])>(
        &self,
        seed: u64,
        stream: u64,
        initial: [f64; DIM],
        samples: usize,
        mut sink: F,
    ) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let mut x = initial;
        let total = self.burn_in_steps + samples;
        for step in 0..total {
            if step >= self.burn_in_steps {
                sink(&x);
            }
            x = self.advance(&x, &mut rng);
            if step % DIVERGENCE_CHECK_EVERY == 0 {
                self.check(&x, step)?;
            }
        }
        Ok(())
    }

    fn advance(&self, x: &[f64; DIM], rng: &mut ChaCha8Rng) -> [f64; DIM] {
        let mut xi = [0.0; DIM];
        for v in xi.iter_mut() {
            *v = StandardNormal.sample(rng);
        }
        std::array::from_fn(|i| {
            let mut acc = 0.0;
            for j in 0..DIM {
                acc += self.phi[i][j] * x[j] + self.noise_factor[i][j] * xi[j];
            }
            acc
        })
    }

    fn check(&self, x: &[f64; DIM], step: usize) -> Result<()> {
        let power: f64 = x.iter().map(|v| v * v).sum();
        if !power.is_finite() {
            return Err(Error::Diverged {
                step,
                ratio: f64::INFINITY,
            });
        }
        if self.variance_scale > 0.0 {
            let ratio = power / self.variance_scale;
            if ratio > DIVERGENCE_RATIO {
                return Err(Error::Diverged { step, ratio });
            }
        }
        Ok(())
    }
}

/// Full state history of the first trajectory in `cfg`.
pub fn simulate_trajectory(p: &SystemParams, cfg: &SimConfig) -> Result<Trajectory> {
    let sim = Simulator::new(p, cfg)?;
    let samples = cfg.samples_per_trajectory();
    let mut states = Vec::with_capacity(samples);
    sim.run(
        cfg.seed,
        0,
        cfg.initial.unwrap_or([0.0; DIM]),
        samples,
        |s| states.push(*s),
    )?;
    Ok(Trajectory {
        dt: cfg.dt,
        seed: cfg.seed,
        burn_in_steps: sim.burn_in_steps(),
        states,
    })
}

/// Bright-coordinate series of the first trajectory.
pub fn simulate_bright_mode(p: &SystemParams, cfg: &SimConfig) -> Result<Vec<f64>> {
    let sim = Simulator::new(p, cfg)?;
    let (wx, wy) = bright_weights(p);
    let samples = cfg.samples_per_trajectory();
    let mut out = Vec::with_capacity(samples);
    sim.run(
        cfg.seed,
        0,
        cfg.initial.unwrap_or([0.0; DIM]),
        samples,
        |s| out.push(wx * s[2] + wy * s[4]),
    )?;
    Ok(out)
}

/// Welch PSD of the bright coordinate, streamed without storing the series.
/// Trajectories run on separate RNG streams and are merged in stream order,
/// so the result does not depend on the execution strategy.
pub fn simulate_bright_psd(p: &SystemParams, cfg: &SimConfig, exec: Execution) -> Result<Spectrum> {
    let sim = Simulator::new(p, cfg)?;
    let (wx, wy) = bright_weights(p);
    let samples = cfg.samples_per_trajectory();
    let streams: Vec<u64> = (0..cfg.trajectories as u64).collect();
    let parts = exec.map(&streams, |&stream| -> Result<WelchAccumulator> {
        let mut acc = WelchAccumulator::new(cfg.dt, cfg.segment_length, cfg.overlap, cfg.window)?;
        sim.run(
            cfg.seed,
            stream,
            cfg.initial.unwrap_or([0.0; DIM]),
            samples,
            |s| acc.push(wx * s[2] + wy * s[4]),
        )?;
        Ok(acc)
    });
    let mut iter = parts.into_iter();
    let mut total = iter.next().expect("at least one trajectory")?;
    for part in iter {
        total.merge(&part?)?;
    }
    total.finish()
}
