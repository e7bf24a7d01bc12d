//! MFCC front end.
//!
//! Pipeline per utterance: pre-emphasis over the whole signal, framing,
//! Hamming window, zero-padded FFT magnitude, triangular mel filterbank,
//! floored natural log, orthonormal DCT-II. Frontend constants are engine
//! choices (25 ms / 10 ms framing, 26 filters, 13 cepstra).

use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::wav::{AudioClip, SAMPLE_RATE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Window {
    Hamming,
}

impl Window {
    fn coefficients(self, len: usize) -> Vec<f64> {
        match self {
            Window::Hamming => (0..len)
                .map(|n| 0.54 - 0.46 * (2.0 * PI * n as f64 / (len - 1) as f64).cos())
                .collect(),
        }
    }
}

/// Framing parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameSpec {
    pub frame_length_ms: u32,
    pub hop_ms: u32,
    pub window: Window,
    pub fft_size: usize,
}

impl Default for FrameSpec {
    fn default() -> Self {
        Self {
            frame_length_ms: 25,
            hop_ms: 10,
            window: Window::Hamming,
            fft_size: 512,
        }
    }
}

impl FrameSpec {
    pub fn frame_samples(&self) -> usize {
        (SAMPLE_RATE as usize * self.frame_length_ms as usize) / 1000
    }

    pub fn hop_samples(&self) -> usize {
        (SAMPLE_RATE as usize * self.hop_ms as usize) / 1000
    }

    /// Number of frames produced for a signal of `n` samples.
    pub fn frame_count(&self, n: usize) -> usize {
        let frame = self.frame_samples();
        if n < frame {
            0
        } else {
            (n - frame) / self.hop_samples() + 1
        }
    }

    pub fn validate(&self) -> Result<(), FeatureError> {
        let frame = self.frame_samples();
        let hop = self.hop_samples();
        if hop == 0 || frame == 0 || hop > frame {
            return Err(FeatureError::BadFrameSpec(format!(
                "hop {hop} samples must be in 1..={frame}"
            )));
        }
        if !self.fft_size.is_power_of_two() || self.fft_size < frame {
            return Err(FeatureError::BadFrameSpec(format!(
                "fft_size {} must be a power of two >= {frame}",
                self.fft_size
            )));
        }
        Ok(())
    }
}

/// Full front-end configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MfccConfig {
    pub frame: FrameSpec,
    pub num_filters: usize,
    pub num_ceps: usize,
    pub pre_emphasis: f64,
    pub log_floor: f64,
    pub low_hz: f64,
    pub high_hz: f64,
    /// Append delta and delta-delta coefficients (triples the dimension).
    pub deltas: bool,
}

impl Default for MfccConfig {
    fn default() -> Self {
        Self {
            frame: FrameSpec::default(),
            num_filters: 26,
            num_ceps: 13,
            pre_emphasis: 0.97,
            log_floor: 1e-10,
            low_hz: 0.0,
            high_hz: SAMPLE_RATE as f64 / 2.0,
            deltas: false,
        }
    }
}

impl MfccConfig {
    pub fn dim(&self) -> usize {
        if self.deltas {
            3 * self.num_ceps
        } else {
            self.num_ceps
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FeatureError {
    #[error("clip of {samples} samples is shorter than one frame ({frame} samples)")]
    TooShort { samples: usize, frame: usize },
    #[error("invalid frame spec: {0}")]
    BadFrameSpec(String),
    #[error("feature dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("feature sequence needs at least one vector")]
    Empty,
}

/// Time-ordered feature vectors of one utterance, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSequence {
    dim: usize,
    data: Vec<f64>,
    frame_spec: FrameSpec,
}

impl FeatureSequence {
    pub fn from_vectors(vectors: Vec<Vec<f64>>, frame_spec: FrameSpec) -> Result<Self, FeatureError> {
        let dim = vectors.first().map(Vec::len).ok_or(FeatureError::Empty)?;
        let mut data = Vec::with_capacity(dim * vectors.len());
        for v in &vectors {
            if v.len() != dim {
                return Err(FeatureError::DimensionMismatch {
                    expected: dim,
                    actual: v.len(),
                });
            }
            data.extend_from_slice(v);
        }
        Ok(Self {
            dim,
            data,
            frame_spec,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn frame(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn frames(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn frame_spec(&self) -> FrameSpec {
        self.frame_spec
    }

    /// Frames `range` as a new sequence.
    pub fn slice(&self, range: std::ops::Range<usize>) -> FeatureSequence {
        FeatureSequence {
            dim: self.dim,
            data: self.data[range.start * self.dim..range.end * self.dim].to_vec(),
            frame_spec: self.frame_spec,
        }
    }

    /// Concatenates sequences of equal dimension.
    pub fn concat<'a>(parts: impl IntoIterator<Item = &'a FeatureSequence>) -> Result<Self, FeatureError> {
        let mut iter = parts.into_iter();
        let first = iter.next().ok_or(FeatureError::Empty)?;
        let mut out = first.clone();
        for p in iter {
            if p.dim != out.dim {
                return Err(FeatureError::DimensionMismatch {
                    expected: out.dim,
                    actual: p.dim,
                });
            }
            out.data.extend_from_slice(&p.data);
        }
        Ok(out)
    }

    /// Applies `f` to every frame, producing frames of dimension `dim`.
    pub(crate) fn map_frames(&self, dim: usize, mut f: impl FnMut(&[f64], &mut [f64])) -> Self {
        let mut data = vec![0.0; self.len() * dim];
        for (src, dst) in self.frames().zip(data.chunks_exact_mut(dim)) {
            f(src, dst);
        }
        Self {
            dim,
            data,
            frame_spec: self.frame_spec,
        }
    }
}

fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular mel filters over the `fft_size / 2 + 1` magnitude bins.
/// Returns one weight row per filter.
pub fn mel_filterbank(config: &MfccConfig) -> Vec<Vec<f64>> {
    let bins = config.frame.fft_size / 2 + 1;
    let (lo, hi) = (hz_to_mel(config.low_hz), hz_to_mel(config.high_hz));
    let step = (hi - lo) / (config.num_filters + 1) as f64;
    let edges: Vec<f64> = (0..config.num_filters + 2)
        .map(|i| mel_to_hz(lo + step * i as f64))
        .collect();
    let bin_hz = SAMPLE_RATE as f64 / config.frame.fft_size as f64;
    (0..config.num_filters)
        .map(|m| {
            let (left, center, right) = (edges[m], edges[m + 1], edges[m + 2]);
            (0..bins)
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

/// Per-frame mel filterbank energies (before the log).
pub fn mel_energies(clip: &AudioClip, config: &MfccConfig) -> Result<Vec<Vec<f64>>, FeatureError> {
    let spec = config.frame;
    spec.validate()?;
    let frame_len = spec.frame_samples();
    let hop = spec.hop_samples();
    let n = clip.len();
    if n < frame_len {
        return Err(FeatureError::TooShort {
            samples: n,
            frame: frame_len,
        });
    }

    let x: Vec<f64> = clip.samples().iter().map(|&s| s as f64 / 32768.0).collect();
    let mut emphasized = Vec::with_capacity(n);
    emphasized.push(x[0]);
    emphasized.extend(x.windows(2).map(|w| w[1] - config.pre_emphasis * w[0]));

    let window = spec.window.coefficients(frame_len);
    let filters = mel_filterbank(config);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(spec.fft_size);
    let bins = spec.fft_size / 2 + 1;

    let mut buf = vec![Complex::new(0.0, 0.0); spec.fft_size];
    let mut magnitude = vec![0.0; bins];
    let mut out = Vec::with_capacity(spec.frame_count(n));
    for t in 0..spec.frame_count(n) {
        let start = t * hop;
        for (i, slot) in buf.iter_mut().enumerate() {
            *slot = if i < frame_len {
                Complex::new(emphasized[start + i] * window[i], 0.0)
            } else {
                Complex::new(0.0, 0.0)
            };
        }
        fft.process(&mut buf);
        for (m, c) in magnitude.iter_mut().zip(&buf) {
            *m = c.norm();
        }
        out.push(
            filters
                .iter()
                .map(|w| w.iter().zip(&magnitude).map(|(a, b)| a * b).sum())
                .collect(),
        );
    }
    Ok(out)
}

fn dct_ii(input: &[f64], num_out: usize) -> Vec<f64> {
    let m = input.len() as f64;
    (0..num_out)
        .map(|k| {
            let scale = if k == 0 { (1.0 / m).sqrt() } else { (2.0 / m).sqrt() };
            scale
                * input
                    .iter()
                    .enumerate()
                    .map(|(i, v)| v * (PI * k as f64 * (i as f64 + 0.5) / m).cos())
                    .sum::<f64>()
        })
        .collect()
}

// Two-frame regression window, edges clamped.
fn deltas(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    const N: isize = 2;
    let denom = 2.0 * (1..=N).map(|n| (n * n) as f64).sum::<f64>();
    let last = rows.len() as isize - 1;
    (0..rows.len() as isize)
        .map(|t| {
            (0..rows[0].len())
                .map(|d| {
                    (1..=N)
                        .map(|n| {
                            let fwd = &rows[(t + n).min(last) as usize];
                            let back = &rows[(t - n).max(0) as usize];
                            n as f64 * (fwd[d] - back[d])
                        })
                        .sum::<f64>()
                        / denom
                })
                .collect()
        })
        .collect()
}

/// Computes MFCCs for a clip. Deterministic: the same clip always yields
/// bit-identical features.
pub fn mfcc(clip: &AudioClip, config: &MfccConfig) -> Result<FeatureSequence, FeatureError> {
    let energies = mel_energies(clip, config)?;
    let ceps: Vec<Vec<f64>> = energies
        .iter()
        .map(|e| {
            let logs: Vec<f64> = e.iter().map(|v| v.max(config.log_floor).ln()).collect();
            dct_ii(&logs, config.num_ceps)
        })
        .collect();
    let rows = if config.deltas {
        let d1 = deltas(&ceps);
        let d2 = deltas(&d1);
        ceps.iter()
            .zip(&d1)
            .zip(&d2)
            .map(|((c, a), b)| c.iter().chain(a).chain(b).copied().collect())
            .collect()
    } else {
        ceps
    };
    FeatureSequence::from_vectors(rows, config.frame)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn clip_of(samples: Vec<i16>) -> AudioClip {
        AudioClip::new(samples).unwrap()
    }

    fn sine(freq: f64, n: usize, amp: f64) -> AudioClip {
        clip_of(
            (0..n)
                .map(|i| (amp * (2.0 * PI * freq * i as f64 / 16000.0).sin() * 32767.0).round() as i16)
                .collect(),
        )
    }

    #[test]
    fn default_spec_is_valid() {
        let spec = FrameSpec::default();
        spec.validate().unwrap();
        assert_eq!(spec.frame_samples(), 400);
        assert_eq!(spec.hop_samples(), 160);
    }

    #[test]
    fn rejects_bad_specs() {
        let spec = FrameSpec { hop_ms: 30, ..FrameSpec::default() };
        assert!(spec.validate().is_err());
        let spec = FrameSpec { fft_size: 256, ..FrameSpec::default() };
        assert!(spec.validate().is_err());
        let spec = FrameSpec { fft_size: 600, ..FrameSpec::default() };
        assert!(spec.validate().is_err());
    }

    #[test]
    fn short_clip_is_an_error() {
        let err = mfcc(&clip_of(vec![0; 399]), &MfccConfig::default()).unwrap_err();
        assert_eq!(err, FeatureError::TooShort { samples: 399, frame: 400 });
        assert_eq!(mfcc(&clip_of(vec![0; 400]), &MfccConfig::default()).unwrap().len(), 1);
    }

    #[test]
    fn deterministic() {
        let clip = sine(523.0, 4000, 0.4);
        let cfg = MfccConfig::default();
        assert_eq!(mfcc(&clip, &cfg).unwrap(), mfcc(&clip, &cfg).unwrap());
    }

    #[test]
    fn silence_sits_at_the_log_floor() {
        let cfg = MfccConfig::default();
        let feats = mfcc(&clip_of(vec![0; 3200]), &cfg).unwrap();
        let expected_c0 = (cfg.num_filters as f64).sqrt() * cfg.log_floor.ln();
        for f in feats.frames() {
            assert!((f[0] - expected_c0).abs() < 1e-9, "{} vs {}", f[0], expected_c0);
            assert!(f[1..].iter().all(|c| c.abs() < 1e-9));
        }
    }

    #[test]
    fn deltas_triple_the_dimension() {
        let cfg = MfccConfig { deltas: true, ..MfccConfig::default() };
        let feats = mfcc(&sine(700.0, 4000, 0.3), &cfg).unwrap();
        assert_eq!(feats.dim(), 39);
        // a stationary tone has vanishing interior deltas
        let mid = feats.frame(feats.len() / 2);
        assert!(mid[13..].iter().all(|d| d.abs() < 1e-6));
    }

    #[test]
    fn filterbank_rows_are_triangles_with_unit_peak_or_less() {
        let bank = mel_filterbank(&MfccConfig::default());
        assert_eq!(bank.len(), 26);
        for row in &bank {
            assert_eq!(row.len(), 257);
            let peak = row.iter().cloned().fold(0.0, f64::max);
            assert!(peak > 0.0 && peak <= 1.0);
        }
    }

    proptest! {
        #[test]
        fn length_formula_holds(n in 400usize..6000) {
            let feats = mfcc(&clip_of(vec![1; n]), &MfccConfig::default()).unwrap();
            prop_assert_eq!(feats.len(), (n - 400) / 160 + 1);
        }

        #[test]
        fn one_hop_delay_shifts_by_one_frame(seed in 0u64..1000, n in 400usize..3000) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let samples: Vec<i16> = (0..n).map(|_| rng.gen_range(-8000..8000)).collect();
            let mut delayed = vec![0i16; 160];
            delayed.extend_from_slice(&samples);
            let cfg = MfccConfig::default();
            let a = mfcc(&clip_of(samples), &cfg).unwrap();
            let b = mfcc(&clip_of(delayed), &cfg).unwrap();
            prop_assert_eq!(b.len(), a.len() + 1);
            for t in 0..a.len() {
                for (x, y) in a.frame(t).iter().zip(b.frame(t + 1)) {
                    prop_assert!((x - y).abs() <= 1e-9);
                }
            }
        }
    }
}
