//! Normalized log-power spectrograms and the fixed-width network input.
//!
//! Frames of 256 samples are taken every 64 samples, weighted by a Blackman
//! window, zero-padded to 512 points and transformed, giving 257 bins per
//! frame. Cells hold `ln(|X|^2 + 1e-10)`, standardized per utterance over
//! all cells.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::wav::Waveform;
use crate::error::{Error, Result};

pub const WINDOW_LEN: usize = 256;
pub const FRAME_STEP: usize = 64;
pub const FFT_LEN: usize = 512;
pub const NUM_BINS: usize = FFT_LEN / 2 + 1;
pub const LOG_FLOOR: f64 = 1e-10;
/// Width of the network input in frames.
pub const FIXED_WIDTH: usize = 800;

/// Number of frames produced for a signal of `len` samples.
pub fn frame_count(len: usize) -> Option<usize> {
    if len < WINDOW_LEN {
        None
    } else {
        Some((len - WINDOW_LEN) / FRAME_STEP + 1)
    }
}

/// Symmetric Blackman window.
pub fn blackman(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    let m = (n - 1) as f64;
    (0..n)
        .map(|i| {
            let x = i as f64 / m;
            0.42 - 0.5 * (2.0 * PI * x).cos() + 0.08 * (4.0 * PI * x).cos()
        })
        .collect()
}

/// Reusable real-input power spectrum of a fixed transform length.
pub struct PowerSpectrum {
    fft: Arc<dyn Fft<f64>>,
    len: usize,
    buf: Vec<Complex<f64>>,
}

impl PowerSpectrum {
    pub fn new(len: usize) -> Self {
        let fft = FftPlanner::new().plan_fft_forward(len);
        Self { fft, len, buf: vec![Complex::default(); len] }
    }

    /// `|X[k]|^2` for k in `0..=len/2`; `frame` is zero-padded to `len`.
    pub fn compute(&mut self, frame: &[f64], out: &mut Vec<f64>) {
        assert!(frame.len() <= self.len, "frame longer than transform");
        for (i, c) in self.buf.iter_mut().enumerate() {
            *c = Complex::new(frame.get(i).copied().unwrap_or(0.0), 0.0);
        }
        self.fft.process(&mut self.buf);
        out.clear();
        out.extend(self.buf[..=self.len / 2].iter().map(|c| c.norm_sqr()));
    }
}

/// Variable-length spectrogram, 257 rows (frequency) by `frames` columns,
/// stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    bins: Vec<f32>,
    frames: usize,
}

impl Spectrogram {
    pub fn from_bins(bins: Vec<f32>, frames: usize) -> Result<Self> {
        if frames == 0 || bins.len() != NUM_BINS * frames {
            return Err(Error::Dimension(format!(
                "spectrogram needs {NUM_BINS} x frames values with frames >= 1, got {} for {frames} frames",
                bins.len()
            )));
        }
        if bins.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("spectrogram holds non-finite values".into()));
        }
        Ok(Self { bins, frames })
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn bins(&self) -> &[f32] {
        &self.bins
    }

    pub fn at(&self, bin: usize, frame: usize) -> f32 {
        self.bins[bin * self.frames + frame]
    }

    pub fn column(&self, frame: usize) -> Vec<f32> {
        (0..NUM_BINS).map(|b| self.at(b, frame)).collect()
    }
}

/// Spectrogram cropped or tiled to a fixed number of frames.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedSpectrogram {
    bins: Vec<f32>,
    width: usize,
}

impl FixedSpectrogram {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        NUM_BINS
    }

    /// Row-major `[257 x width]`, which is also the `H x W x 1` network layout.
    pub fn bins(&self) -> &[f32] {
        &self.bins
    }

    pub fn at(&self, bin: usize, frame: usize) -> f32 {
        self.bins[bin * self.width + frame]
    }

    pub fn into_spectrogram(self) -> Spectrogram {
        Spectrogram { bins: self.bins, frames: self.width }
    }
}

/// Raw `ln(|X|^2 + eps)` values before standardization, `[257 x T]`.
pub fn log_power_frames(w: &Waveform) -> Result<(Vec<f64>, usize)> {
    let samples = w.samples();
    let frames = frame_count(samples.len())
        .ok_or(Error::TooShort { needed: WINDOW_LEN, got: samples.len() })?;
    let window = blackman(WINDOW_LEN);
    let mut ps = PowerSpectrum::new(FFT_LEN);
    let mut frame = vec![0.0; WINDOW_LEN];
    let mut power = Vec::with_capacity(NUM_BINS);
    let mut out = vec![0.0; NUM_BINS * frames];
    for t in 0..frames {
        let start = t * FRAME_STEP;
        for (i, f) in frame.iter_mut().enumerate() {
            *f = samples[start + i] as f64 * window[i];
        }
        ps.compute(&frame, &mut power);
        for (b, p) in power.iter().enumerate() {
            out[b * frames + t] = (p + LOG_FLOOR).ln();
        }
    }
    Ok((out, frames))
}

/// Normalized log-power spectrogram of a waveform.
///
/// A spectrogram whose cells are all equal (digital silence) standardizes
/// to all zeros.
pub fn compute_spectrogram(w: &Waveform) -> Result<Spectrogram> {
    let (raw, frames) = log_power_frames(w)?;
    let n = raw.len() as f64;
    let (lo, hi) = raw.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if lo == hi {
        return Ok(Spectrogram { bins: vec![0.0; raw.len()], frames });
    }
    let mean = raw.iter().sum::<f64>() / n;
    let var = raw.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let scale = 1.0 / var.sqrt();
    let bins = raw.iter().map(|v| ((v - mean) * scale) as f32).collect();
    Ok(Spectrogram { bins, frames })
}

/// Crop to the first 800 frames or tile end-to-end up to 800.
pub fn fit_length(s: &Spectrogram) -> FixedSpectrogram {
    fit_length_to(s, FIXED_WIDTH)
}

/// `fit_length` for an arbitrary target width: output column `j` is input
/// column `j mod T`.
pub fn fit_length_to(s: &Spectrogram, width: usize) -> FixedSpectrogram {
    assert!(width > 0, "target width must be positive");
    let t = s.frames;
    let mut bins = Vec::with_capacity(NUM_BINS * width);
    for b in 0..NUM_BINS {
        let row = &s.bins[b * t..(b + 1) * t];
        bins.extend((0..width).map(|j| row[j % t]));
    }
    FixedSpectrogram { bins, width }
}
