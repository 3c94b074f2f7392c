//! Power spectral density estimate from independent realizations.
//!
//! Each realization gives one unwindowed periodogram over its full length,
//! so Parseval holds exactly. The periodograms are averaged and smoothed
//! with a circular moving average one resolution bandwidth wide, which
//! keeps the total power unchanged.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::transforms::{fft_in_place, C64};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Psd {
    /// Frequencies in Hz, ascending from `-fs/2`.
    pub freq_hz: Vec<f64>,
    /// Density in dB relative to one power unit per Hz.
    pub density_db: Vec<f64>,
    pub bin_hz: f64,
}

impl Psd {
    /// Power in a band of `bw_hz` around each frequency, in dB.
    pub fn in_bandwidth_db(&self, bw_hz: f64) -> Vec<f64> {
        let off = 10.0 * bw_hz.log10();
        self.density_db.iter().map(|d| d + off).collect()
    }

    /// Total power, linear.
    pub fn total_power(&self) -> f64 {
        self.density_db.iter().map(|d| 10f64.powf(d / 10.0)).sum::<f64>() * self.bin_hz
    }
}

/// Averaged, smoothed periodogram. All realizations must share one length.
pub fn psd_estimate(realizations: &[Vec<C64>], rbw_hz: f64, fs_hz: f64) -> Result<Psd> {
    let n = realizations.first().map_or(0, |r| r.len());
    if n == 0 {
        return Err(Error::InvalidSize(0));
    }
    if realizations.iter().any(|r| r.len() != n) {
        return Err(Error::Config("realizations differ in length".into()));
    }
    if !(fs_hz > 0.0 && rbw_hz >= 0.0) {
        return Err(Error::Config("sample rate must be positive and RBW non-negative".into()));
    }
    let bin = fs_hz / n as f64;
    let mut acc = vec![0.0; n];
    let mut buf = vec![C64::new(0.0, 0.0); n];
    for r in realizations {
        buf.copy_from_slice(r);
        fft_in_place(&mut buf);
        for (a, v) in acc.iter_mut().zip(&buf) {
            *a += v.norm_sqr();
        }
    }
    let scale = 1.0 / (realizations.len() as f64 * n as f64 * fs_hz);
    acc.iter_mut().for_each(|v| *v *= scale);

    // kernel of `width` bins; an even width gets half weights at both ends
    let width = (rbw_hz / bin).round().max(1.0) as usize;
    let half = width / 2;
    let mut kernel: Vec<f64> = vec![1.0; 2 * half + 1];
    if width % 2 == 0 {
        kernel[0] = 0.5;
        kernel[2 * half] = 0.5;
    }
    let norm: f64 = kernel.iter().sum();
    let smooth: Vec<f64> = (0..n)
        .map(|k| {
            kernel
                .iter()
                .enumerate()
                .map(|(j, w)| w * acc[(k as i64 + j as i64 - half as i64).rem_euclid(n as i64) as usize])
                .sum::<f64>()
                / norm
        })
        .collect();

    let shift = n / 2;
    let freq_hz = (0..n).map(|i| (i as f64 - shift as f64) * bin).collect();
    let density_db = (0..n)
        .map(|i| 10.0 * smooth[(i + n - shift) % n].max(1e-300).log10())
        .collect();
    Ok(Psd { freq_hz, density_db, bin_hz: bin })
}
