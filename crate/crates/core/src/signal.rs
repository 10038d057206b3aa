//! Window-method FIR band-pass design, valid-region filtering, non-overlapping
//! segmentation and z-score normalization.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper cutoffs at or above Nyquist are pulled down to this fraction of fs.
pub const UPPER_CUTOFF_CLAMP: f64 = 0.45;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowKind {
    #[default]
    Hamming,
    Hann,
    Blackman,
    Rectangular,
}

impl WindowKind {
    /// Window value at tap `n` of an `len`-tap symmetric window.
    pub fn value(self, n: usize, len: usize) -> f64 {
        if len == 1 {
            return 1.0;
        }
        let x = 2.0 * PI * n as f64 / (len - 1) as f64;
        match self {
            WindowKind::Hamming => 0.54 - 0.46 * x.cos(),
            WindowKind::Hann => 0.5 - 0.5 * x.cos(),
            WindowKind::Blackman => 0.42 - 0.5 * x.cos() + 0.08 * (2.0 * x).cos(),
            WindowKind::Rectangular => 1.0,
        }
    }
}

impl fmt::Display for WindowKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WindowKind::Hamming => "hamming",
            WindowKind::Hann => "hann",
            WindowKind::Blackman => "blackman",
            WindowKind::Rectangular => "rectangular",
        })
    }
}

impl FromStr for WindowKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hamming" => Ok(WindowKind::Hamming),
            "hann" | "hanning" => Ok(WindowKind::Hann),
            "blackman" => Ok(WindowKind::Blackman),
            "rectangular" | "rect" | "boxcar" => Ok(WindowKind::Rectangular),
            other => Err(Error::Config(format!("unknown window kind {other:?}"))),
        }
    }
}

/// Linear-phase (type I) FIR filter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirFilter {
    pub taps: Vec<f64>,
    pub f_low_hz: f64,
    /// Requested upper cutoff.
    pub f_high_hz: f64,
    /// Upper cutoff actually designed, after Nyquist clamping.
    pub f_high_effective_hz: f64,
    pub sample_rate_hz: f64,
    pub window_kind: WindowKind,
}

impl FirFilter {
    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    pub fn group_delay(&self) -> usize {
        (self.taps.len() - 1) / 2
    }

    /// True when the requested upper cutoff was unrealizable and got clamped.
    pub fn upper_clamped(&self) -> bool {
        self.f_high_effective_hz < self.f_high_hz
    }

    pub fn freq_response(&self, freq_hz: f64) -> Complex64 {
        freq_response(&self.taps, self.sample_rate_hz, freq_hz)
    }

    pub fn apply(&self, samples: &[f64]) -> Result<Vec<f64>> {
        apply_filter(&self.taps, samples)
    }
}

/// Default tap count: 101 taps at 128 Hz, 201 at 700 Hz, scaled in between.
pub fn default_taps(sample_rate_hz: f64) -> usize {
    if sample_rate_hz <= 128.0 {
        101
    } else if sample_rate_hz >= 700.0 {
        201
    } else {
        let t = (sample_rate_hz - 128.0) / (700.0 - 128.0);
        let n = (101.0 + t * 100.0).round() as usize;
        n | 1
    }
}

/// Unit-DC-gain windowed-sinc low-pass at `cutoff_hz`.
fn lowpass_taps(cutoff_hz: f64, sample_rate_hz: f64, n_taps: usize, window: WindowKind) -> Vec<f64> {
    let fc = cutoff_hz / sample_rate_hz;
    let mid = (n_taps - 1) as f64 / 2.0;
    let mut taps: Vec<f64> = (0..n_taps)
        .map(|n| {
            let m = n as f64 - mid;
            let sinc = if m == 0.0 {
                2.0 * fc
            } else {
                (2.0 * PI * fc * m).sin() / (PI * m)
            };
            sinc * window.value(n, n_taps)
        })
        .collect();
    let sum: f64 = taps.iter().sum();
    for t in &mut taps {
        *t /= sum;
    }
    symmetrize(&mut taps);
    taps
}

fn symmetrize(taps: &mut [f64]) {
    let n = taps.len();
    for k in 0..n / 2 {
        let avg = 0.5 * (taps[k] + taps[n - 1 - k]);
        taps[k] = avg;
        taps[n - 1 - k] = avg;
    }
}

/// Windowed-sinc band-pass `[f_low, f_high]`, built as the difference of two
/// unit-DC-gain low-passes. `f_low = 0` yields a plain low-pass. An upper
/// cutoff at or beyond Nyquist is clamped to `0.45 fs`, which turns a nominal
/// band-pass into an effective high-pass over the usable band.
pub fn design_bandpass(
    sample_rate_hz: f64,
    f_low_hz: f64,
    f_high_hz: f64,
    n_taps: usize,
    window_kind: WindowKind,
) -> Result<FirFilter> {
    if !(sample_rate_hz > 0.0 && sample_rate_hz.is_finite()) {
        return Err(Error::FilterDesign(format!("sample rate must be positive, got {sample_rate_hz}")));
    }
    if n_taps < 3 || n_taps.is_multiple_of(2) {
        return Err(Error::FilterDesign(format!("tap count must be odd and >= 3, got {n_taps}")));
    }
    if f_low_hz.is_nan() || f_low_hz < 0.0 || !f_high_hz.is_finite() {
        return Err(Error::FilterDesign(format!("invalid cutoffs {f_low_hz}..{f_high_hz} Hz")));
    }
    let nyquist = sample_rate_hz / 2.0;
    let f_high_effective_hz = if f_high_hz >= nyquist {
        UPPER_CUTOFF_CLAMP * sample_rate_hz
    } else {
        f_high_hz
    };
    if f_low_hz >= f_high_effective_hz {
        return Err(Error::FilterDesign(format!(
            "lower cutoff {f_low_hz} Hz is not below the effective upper cutoff {f_high_effective_hz} Hz"
        )));
    }

    let mut taps = lowpass_taps(f_high_effective_hz, sample_rate_hz, n_taps, window_kind);
    if f_low_hz > 0.0 {
        let low = lowpass_taps(f_low_hz, sample_rate_hz, n_taps, window_kind);
        for (t, l) in taps.iter_mut().zip(&low) {
            *t -= l;
        }
    }

    Ok(FirFilter {
        taps,
        f_low_hz,
        f_high_hz,
        f_high_effective_hz,
        sample_rate_hz,
        window_kind,
    })
}

/// `H(f) = sum_k taps[k] * exp(-j 2 pi f k / fs)`.
pub fn freq_response(taps: &[f64], sample_rate_hz: f64, freq_hz: f64) -> Complex64 {
    let w = -2.0 * PI * freq_hz / sample_rate_hz;
    taps.iter()
        .enumerate()
        .map(|(k, &t)| Complex64::from_polar(t, w * k as f64))
        .sum()
}

/// Valid-region convolution: output `i` is the filter centred on input
/// sample `i + delay`, so the result is aligned to the input with the
/// `taps.len() - 1` edge samples dropped.
pub fn apply_filter(taps: &[f64], samples: &[f64]) -> Result<Vec<f64>> {
    if taps.is_empty() {
        return Err(Error::InvalidInput("filter has no taps".into()));
    }
    if samples.len() < taps.len() {
        return Err(Error::InvalidInput(format!(
            "input of {} samples is shorter than the {}-tap filter",
            samples.len(),
            taps.len()
        )));
    }
    let n_out = samples.len() - taps.len() + 1;
    let last = taps.len() - 1;
    Ok((0..n_out)
        .map(|i| {
            let window = &samples[i..i + taps.len()];
            taps.iter().enumerate().map(|(k, &h)| h * window[last - k]).sum()
        })
        .collect())
}

/// Consecutive disjoint windows; a trailing partial window is dropped.
pub fn segment_signal(samples: &[f64], window_len: usize) -> Vec<Vec<f64>> {
    if window_len == 0 {
        return Vec::new();
    }
    samples.chunks_exact(window_len).map(<[f64]>::to_vec).collect()
}

/// Population z-score. Constant input maps to zeros.
pub fn zscore(values: &[f64]) -> Vec<f64> {
    if values.is_empty() {
        return Vec::new();
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    if std <= f64::EPSILON * mean.abs().max(1.0) {
        return vec![0.0; values.len()];
    }
    values.iter().map(|v| (v - mean) / std).collect()
}

/// A fixed-length window cut from one record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub values: Vec<f64>,
    pub label: usize,
    pub subject_id: String,
    pub window_len: usize,
}

impl Segment {
    pub fn normalized(&self) -> Segment {
        Segment {
            values: zscore(&self.values),
            ..self.clone()
        }
    }
}
