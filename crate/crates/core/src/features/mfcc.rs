//! MFCC + log energy frontend with Δ and ΔΔ.
//!
//! Per frame: Hamming window, 512-point power spectrum, triangular mel
//! filterbank, log, DCT-II keeping c1..c19, then the log frame energy as the
//! 20th static. Statics get per-utterance mean/variance normalization before
//! the regression deltas are appended, giving 60 columns.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::spectrogram::PowerSpectrum;
use super::wav::Waveform;
use crate::error::{Error, Result};

pub const NUM_STATICS: usize = 20;
pub const NUM_COLUMNS: usize = 3 * NUM_STATICS;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MfccConfig {
    pub sample_rate: u32,
    /// Analysis window in samples (25 ms at 16 kHz).
    pub window_len: usize,
    /// Frame step in samples (10 ms at 16 kHz).
    pub step: usize,
    pub fft_len: usize,
    pub num_filters: usize,
    pub low_hz: f64,
    pub high_hz: f64,
    /// Cepstra kept are c1..=num_cepstra (c0 is replaced by log energy).
    pub num_cepstra: usize,
    /// Frames on each side used by the delta regression.
    pub delta_radius: usize,
    pub log_floor: f64,
}

impl Default for MfccConfig {
    fn default() -> Self {
        Self {
            sample_rate: 16_000,
            window_len: 400,
            step: 160,
            fft_len: 512,
            num_filters: 26,
            low_hz: 0.0,
            high_hz: 8000.0,
            num_cepstra: 19,
            delta_radius: 2,
            log_floor: 1e-10,
        }
    }
}

/// `[T x 60]` row-major: 20 normalized statics, then Δ, then ΔΔ.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    data: Vec<f64>,
    frames: usize,
}

impl FeatureMatrix {
    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn columns(&self) -> usize {
        NUM_COLUMNS
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * NUM_COLUMNS..(t + 1) * NUM_COLUMNS]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.frames).map(|t| self.data[t * NUM_COLUMNS + c]).collect()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

pub fn hamming(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    let m = (n - 1) as f64;
    (0..n).map(|i| 0.54 - 0.46 * (2.0 * PI * i as f64 / m).cos()).collect()
}

/// Regression deltas with edge replication:
/// `d_t = sum_n n (c_{t+n} - c_{t-n}) / (2 sum_n n^2)`.
pub fn deltas(frames: &[Vec<f64>], radius: usize) -> Vec<Vec<f64>> {
    let t_len = frames.len();
    if t_len == 0 {
        return Vec::new();
    }
    let dim = frames[0].len();
    let denom: f64 = 2.0 * (1..=radius).map(|n| (n * n) as f64).sum::<f64>();
    (0..t_len)
        .map(|t| {
            (0..dim)
                .map(|c| {
                    let mut acc = 0.0;
                    for n in 1..=radius {
                        let fwd = frames[(t + n).min(t_len - 1)][c];
                        let back = frames[t.saturating_sub(n)][c];
                        acc += n as f64 * (fwd - back);
                    }
                    if denom > 0.0 { acc / denom } else { 0.0 }
                })
                .collect()
        })
        .collect()
}

pub struct MfccExtractor {
    config: MfccConfig,
    window: Vec<f64>,
    /// `num_filters` rows of `fft_len/2 + 1` weights.
    filterbank: Vec<Vec<f64>>,
}

impl MfccExtractor {
    pub fn new(config: MfccConfig) -> Result<Self> {
        if config.window_len == 0 || config.step == 0 || config.window_len > config.fft_len {
            return Err(Error::Config(format!(
                "mfcc window {} / step {} / fft {} inconsistent",
                config.window_len, config.step, config.fft_len
            )));
        }
        if config.num_cepstra + 1 > config.num_filters {
            return Err(Error::Config("num_cepstra must be below num_filters".into()));
        }
        if !(0.0..config.high_hz).contains(&config.low_hz)
            || config.high_hz > config.sample_rate as f64 / 2.0
        {
            return Err(Error::Config("mel band edges out of range".into()));
        }
        let window = hamming(config.window_len);
        let filterbank = build_filterbank(&config);
        Ok(Self { config, window, filterbank })
    }

    pub fn config(&self) -> &MfccConfig {
        &self.config
    }

    pub fn filterbank(&self) -> &[Vec<f64>] {
        &self.filterbank
    }

    pub fn window(&self) -> &[f64] {
        &self.window
    }

    /// Filterbank energies of one raw (unwindowed) frame.
    pub fn filterbank_energies(&self, ps: &mut PowerSpectrum, frame: &[f64]) -> Vec<f64> {
        let windowed: Vec<f64> = frame.iter().zip(&self.window).map(|(s, w)| s * w).collect();
        let mut power = Vec::new();
        ps.compute(&windowed, &mut power);
        self.filterbank
            .iter()
            .map(|row| row.iter().zip(&power).map(|(w, p)| w * p).sum())
            .collect()
    }

    /// The 20 statics of every frame before normalization.
    pub fn raw_statics(&self, w: &Waveform) -> Result<Vec<Vec<f64>>> {
        let cfg = &self.config;
        let samples = w.samples();
        if samples.len() < cfg.window_len {
            return Err(Error::TooShort { needed: cfg.window_len, got: samples.len() });
        }
        if w.sample_rate() != cfg.sample_rate {
            return Err(Error::UnsupportedFormat(format!(
                "mfcc configured for {} Hz, waveform is {} Hz",
                cfg.sample_rate,
                w.sample_rate()
            )));
        }
        let frames = (samples.len() - cfg.window_len) / cfg.step + 1;
        let mut ps = PowerSpectrum::new(cfg.fft_len);
        let nf = cfg.num_filters as f64;
        let mut out = Vec::with_capacity(frames);
        let mut frame = vec![0.0; cfg.window_len];
        for t in 0..frames {
            let start = t * cfg.step;
            for (i, f) in frame.iter_mut().enumerate() {
                *f = samples[start + i] as f64;
            }
            let log_fb: Vec<f64> = self
                .filterbank_energies(&mut ps, &frame)
                .into_iter()
                .map(|e| (e + cfg.log_floor).ln())
                .collect();
            let mut statics = Vec::with_capacity(cfg.num_cepstra + 1);
            // orthonormal DCT-II
            for k in 1..=cfg.num_cepstra {
                let c: f64 = log_fb
                    .iter()
                    .enumerate()
                    .map(|(m, v)| v * (PI * k as f64 * (m as f64 + 0.5) / nf).cos())
                    .sum();
                statics.push(c * (2.0 / nf).sqrt());
            }
            let energy: f64 = frame.iter().map(|s| s * s).sum();
            statics.push((energy + cfg.log_floor).ln());
            out.push(statics);
        }
        Ok(out)
    }

    pub fn compute(&self, w: &Waveform) -> Result<FeatureMatrix> {
        let mut statics = self.raw_statics(w)?;
        cmvn(&mut statics);
        let d = deltas(&statics, self.config.delta_radius);
        let dd = deltas(&d, self.config.delta_radius);
        let frames = statics.len();
        let mut data = Vec::with_capacity(frames * NUM_COLUMNS);
        for t in 0..frames {
            data.extend_from_slice(&statics[t]);
            data.extend_from_slice(&d[t]);
            data.extend_from_slice(&dd[t]);
        }
        Ok(FeatureMatrix { data, frames })
    }
}

/// Per-column mean/variance normalization. Zero-variance columns are only
/// centred.
pub fn cmvn(rows: &mut [Vec<f64>]) {
    if rows.is_empty() {
        return;
    }
    let n = rows.len() as f64;
    for c in 0..rows[0].len() {
        let mean = rows.iter().map(|r| r[c]).sum::<f64>() / n;
        let var = rows.iter().map(|r| (r[c] - mean).powi(2)).sum::<f64>() / n;
        let scale = if var > 0.0 { 1.0 / var.sqrt() } else { 1.0 };
        for r in rows.iter_mut() {
            r[c] = (r[c] - mean) * scale;
        }
    }
}

fn build_filterbank(cfg: &MfccConfig) -> Vec<Vec<f64>> {
    let nbins = cfg.fft_len / 2 + 1;
    let lo = hz_to_mel(cfg.low_hz);
    let hi = hz_to_mel(cfg.high_hz);
    let edges: Vec<f64> = (0..cfg.num_filters + 2)
        .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (cfg.num_filters + 1) as f64))
        .collect();
    let bin_hz = cfg.sample_rate as f64 / cfg.fft_len as f64;
    (0..cfg.num_filters)
        .map(|m| {
            let (left, center, right) = (edges[m], edges[m + 1], edges[m + 2]);
            (0..nbins)
                .map(|k| {
                    let f = k as f64 * bin_hz;
                    if f <= left || f >= right {
                        0.0
                    } else if f <= center {
                        (f - left) / (center - left)
                    } else {
                        (right - f) / (right - center)
                    }
                })
                .collect()
        })
        .collect()
}

/// MFCC features with the default configuration.
pub fn compute_mfcc(w: &Waveform) -> Result<FeatureMatrix> {
    MfccExtractor::new(MfccConfig::default())?.compute(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(freq: f64, len: usize) -> Waveform {
        let s = (0..len).map(|i| (0.5 * (2.0 * PI * freq * i as f64 / 16000.0).sin()) as f32).collect();
        Waveform::new(s, 16000).unwrap()
    }

    #[test]
    fn sixty_columns_and_centred_statics() {
        let noisy: Vec<f32> = (0..8000).map(|i| ((i * 7919 % 1000) as f32 / 1000.0 - 0.5) * 0.3).collect();
        let w = Waveform::new(noisy, 16000).unwrap();
        let f = compute_mfcc(&w).unwrap();
        assert_eq!(f.columns(), 60);
        assert_eq!(f.frames(), (8000 - 400) / 160 + 1);
        for c in 0..NUM_STATICS {
            let col = f.column(c);
            let n = col.len() as f64;
            let mean = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            assert!(mean.abs() < 1e-6, "column {c} mean {mean}");
            assert!((var - 1.0).abs() < 1e-6, "column {c} var {var}");
        }
    }

    #[test]
    fn zero_signal_has_constant_energy_and_flat_deltas() {
        let w = Waveform::new(vec![0.0; 3200], 16000).unwrap();
        let ex = MfccExtractor::new(MfccConfig::default()).unwrap();
        let raw = ex.raw_statics(&w).unwrap();
        let e0 = raw[0][19];
        assert!(raw.iter().all(|r| r[19] == e0));
        let f = ex.compute(&w).unwrap();
        for c in NUM_STATICS..NUM_COLUMNS {
            assert!(f.column(c).iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn too_short_errors() {
        let w = Waveform::new(vec![0.0; 399], 16000).unwrap();
        assert!(matches!(compute_mfcc(&w), Err(Error::TooShort { needed: 400, .. })));
    }

    #[test]
    fn filters_are_triangles_covering_the_band() {
        let ex = MfccExtractor::new(MfccConfig::default()).unwrap();
        let fb = ex.filterbank();
        assert_eq!(fb.len(), 26);
        for row in fb {
            assert_eq!(row.len(), 257);
            let peak = row.iter().cloned().fold(0.0, f64::max);
            assert!(peak > 0.5 && peak <= 1.0);
            assert!(row.iter().all(|&w| (0.0..=1.0).contains(&w)));
        }
        assert!(fb[25][256].abs() < 1e-9);
    }

    #[test]
    fn deltas_of_a_linear_ramp_are_its_slope_inside() {
        let frames: Vec<Vec<f64>> = (0..10).map(|t| vec![3.0 * t as f64]).collect();
        let d = deltas(&frames, 2);
        for t in 2..8 {
            assert!((d[t][0] - 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn tone_energy_lands_in_the_matching_filter() {
        let ex = MfccExtractor::new(MfccConfig::default()).unwrap();
        let w = tone(1000.0, 400);
        let frame: Vec<f64> = w.samples().iter().map(|&s| s as f64).collect();
        let mut ps = PowerSpectrum::new(512);
        let e = ex.filterbank_energies(&mut ps, &frame);
        let best = (0..e.len()).max_by(|&a, &b| e[a].total_cmp(&e[b])).unwrap();
        let centre = |m: usize| ex.filterbank()[m].iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0 as f64 * 31.25;
        assert!((centre(best) - 1000.0).abs() < 200.0, "filter {best} centred at {}", centre(best));
    }
}
