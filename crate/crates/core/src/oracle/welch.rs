//! Averaged-periodogram PSD estimation.
//!
//! Output is two-sided and normalized so that Σ_k P_k Δf equals the mean
//! windowed power, i.e. the variance of a stationary series.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::FrequencyGrid;
use crate::spectra::{Spectrum, SpectrumKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    #[default]
    Hann,
    Rectangular,
}

impl Window {
    /// Periodic form of length `n`.
    pub fn coefficients(&self, n: usize) -> Vec<f64> {
        match self {
            Window::Hann => (0..n)
                .map(|k| 0.5 * (1.0 - (std::f64::consts::TAU * k as f64 / n as f64).cos()))
                .collect(),
            Window::Rectangular => vec![1.0; n],
        }
    }
}

/// Hop between consecutive segment starts.
pub fn hop_length(segment: usize, overlap: f64) -> usize {
    ((segment as f64) * (1.0 - overlap)).round().max(1.0) as usize
}

/// Number of full segments that fit in `len` samples.
pub fn segment_count(len: usize, segment: usize, overlap: f64) -> usize {
    if len < segment {
        0
    } else {
        1 + (len - segment) / hop_length(segment, overlap)
    }
}

/// Streaming estimator: samples are pushed one at a time and every full
/// segment is transformed as soon as it is available.
pub struct WelchAccumulator {
    dt: f64,
    segment: usize,
    hop: usize,
    window: Vec<f64>,
    window_power: f64,
    fft: Arc<dyn Fft<f64>>,
    buffer: Vec<f64>,
    scratch: Vec<Complex64>,
    sum: Vec<f64>,
    segments: usize,
}

impl std::fmt::Debug for WelchAccumulator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("WelchAccumulator")
            .field("dt", &self.dt)
            .field("segment", &self.segment)
            .field("hop", &self.hop)
            .field("segments", &self.segments)
            .finish()
    }
}

impl WelchAccumulator {
    pub fn new(dt: f64, segment: usize, overlap: f64, window: Window) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidSimConfig(format!("dt must be positive, got {dt}")));
        }
        if segment < 2 {
            return Err(Error::InvalidSimConfig(format!(
                "segment length must be at least 2, got {segment}"
            )));
        }
        if !(0.0..1.0).contains(&overlap) {
            return Err(Error::InvalidSimConfig(format!(
                "overlap must lie in [0, 1), got {overlap}"
            )));
        }
        let w = window.coefficients(segment);
        let window_power = w.iter().map(|v| v * v).sum();
        let fft = FftPlanner::new().plan_fft_forward(segment);
        Ok(WelchAccumulator {
            dt,
            segment,
            hop: hop_length(segment, overlap),
            window: w,
            window_power,
            fft,
            buffer: Vec::with_capacity(segment),
            scratch: vec![Complex64::new(0.0, 0.0); segment],
            sum: vec![0.0; segment],
            segments: 0,
        })
    }

    pub fn push(&mut self, x: f64) {
        self.buffer.push(x);
        if self.buffer.len() == self.segment {
            self.transform();
            self.buffer.drain(..self.hop.min(self.segment));
        }
    }

    pub fn extend<I: IntoIterator<Item = f64>>(&mut self, xs: I) {
        for x in xs {
            self.push(x);
        }
    }

    pub fn segments(&self) -> usize {
        self.segments
    }

    /// Adds the segments of an independent record with identical settings.
    pub fn merge(&mut self, other: &WelchAccumulator) -> Result<()> {
        if other.segment != self.segment || other.hop != self.hop || other.dt != self.dt {
            return Err(Error::InvalidSimConfig(
                "cannot merge Welch estimates with different settings".into(),
            ));
        }
        for (a, b) in self.sum.iter_mut().zip(&other.sum) {
            *a += b;
        }
        self.segments += other.segments;
        Ok(())
    }

    fn transform(&mut self) {
        let mean = self.buffer.iter().sum::<f64>() / self.segment as f64;
        for ((s, x), w) in self.scratch.iter_mut().zip(&self.buffer).zip(&self.window) {
            *s = Complex64::new((x - mean) * w, 0.0);
        }
        self.fft.process(&mut self.scratch);
        for (acc, s) in self.sum.iter_mut().zip(&self.scratch) {
            *acc += s.norm_sqr();
        }
        self.segments += 1;
    }

    /// Averaged two-sided PSD on angular frequencies in ascending order.
    pub fn finish(&self) -> Result<Spectrum> {
        if self.segments < 2 {
            return Err(Error::SeriesTooShort {
                len: self.segments,
                segment: self.segment,
            });
        }
        let n = self.segment;
        let scale = self.dt / (self.window_power * self.segments as f64);
        let df = 1.0 / (n as f64 * self.dt);
        // bins k = -n/2 .. n - n/2 - 1
        let lo = n / 2;
        let mut freqs = Vec::with_capacity(n);
        let mut vals = Vec::with_capacity(n);
        for j in 0..n {
            let k = j as isize - lo as isize;
            let idx = k.rem_euclid(n as isize) as usize;
            freqs.push(std::f64::consts::TAU * df * k as f64);
            vals.push(self.sum[idx] * scale);
        }
        let grid = FrequencyGrid::new(freqs)?;
        Spectrum::new(grid, vals, SpectrumKind::BrightModePsd)
    }
}

/// Welch estimate of a uniformly sampled real series.
pub fn welch_psd(
    series: &[f64],
    dt: f64,
    segment: usize,
    overlap: f64,
    window: Window,
) -> Result<Spectrum> {
    let mut acc = WelchAccumulator::new(dt, segment, overlap, window)?;
    if segment_count(series.len(), segment, overlap) < 2 {
        return Err(Error::SeriesTooShort {
            len: series.len(),
            segment,
        });
    }
    acc.extend(series.iter().copied());
    acc.finish()
}
