//! Averaged windowed periodogram (Welch) of one or more signal records.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

pub const DEFAULT_SEGMENT: usize = 512;

#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    pub freq_hz: Vec<f64>,
    /// One-sided power spectral density.
    pub power: Vec<f64>,
}

impl Spectrum {
    /// Integral of the one-sided density over `[lo, hi]` Hz.
    pub fn band_power(&self, lo: f64, hi: f64) -> f64 {
        let df = self.freq_hz.get(1).copied().unwrap_or(0.0);
        self.freq_hz
            .iter()
            .zip(&self.power)
            .filter(|(f, _)| **f >= lo && **f <= hi)
            .map(|(_, p)| p * df)
            .sum()
    }

    pub fn total_power(&self) -> f64 {
        self.band_power(0.0, f64::INFINITY)
    }

    /// Index of the grid point nearest `f` Hz.
    pub fn nearest_bin(&self, f: f64) -> usize {
        self.freq_hz
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - f).abs().total_cmp(&(b.1 - f).abs()))
            .map(|(i, _)| i)
            .unwrap_or(0)
    }
}

/// Periodic Hann window.
fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect()
}

/// Welch estimate with a Hann window and 50% overlap, averaged over every
/// segment of every record. Each record must hold at least `segment` samples.
pub fn welch(records: &[&[f64]], segment: usize, sample_period: f64) -> Result<Spectrum> {
    if segment < 2 {
        return Err(Error::InvalidArgument("segment length must be >= 2".into()));
    }
    if records.is_empty() {
        return Err(Error::InvalidArgument("no records to analyse".into()));
    }
    if let Some(short) = records.iter().find(|r| r.len() < segment) {
        return Err(Error::SegmentTooShort {
            len: short.len(),
            window: segment,
        });
    }
    let window = hann(segment);
    let fs = 1.0 / sample_period;
    let norm = fs * window.iter().map(|w| w * w).sum::<f64>();
    let fft = FftPlanner::new().plan_fft_forward(segment);
    let step = segment / 2;
    let bins = segment / 2 + 1;

    let mut acc = vec![0.0; bins];
    let mut count = 0usize;
    let mut buf = vec![Complex64::new(0.0, 0.0); segment];
    for record in records {
        let mut start = 0;
        while start + segment <= record.len() {
            let seg = &record[start..start + segment];
            let mean = seg.iter().sum::<f64>() / segment as f64;
            for ((b, x), w) in buf.iter_mut().zip(seg).zip(&window) {
                *b = Complex64::new((x - mean) * w, 0.0);
            }
            fft.process(&mut buf);
            for (a, b) in acc.iter_mut().zip(&buf) {
                *a += b.norm_sqr();
            }
            count += 1;
            start += step;
        }
    }
    let power = acc
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let one_sided = if k == 0 || (segment.is_multiple_of(2) && k == bins - 1) {
                1.0
            } else {
                2.0
            };
            one_sided * s / (norm * count as f64)
        })
        .collect();
    let freq_hz = (0..bins).map(|k| k as f64 * fs / segment as f64).collect();
    Ok(Spectrum { freq_hz, power })
}
