//! Time-domain subband filters of the reference waveforms.
//!
//! Frequencies are in cycles per sample of the grid the taps run on. The
//! prototypes are real lowpass filters; [`modulate_taps`] moves them to a
//! subband center.

use crate::error::{Error, Result};
use crate::transforms::{dft, C64};

/// Hann-windowed sinc lowpass for an allocation of `active` subcarriers on
/// an `fft_len`-point symbol, widened by `tone_offset` subcarriers. The
/// two-sided passband is `active + tone_offset` subcarriers wide and the
/// taps sum to one.
pub fn f_ofdm_filter(active: usize, tone_offset: f64, fft_len: usize, n_fir: usize) -> Result<Vec<f64>> {
    if n_fir < 2 || fft_len == 0 {
        return Err(Error::Config("filter length must be at least 2".into()));
    }
    let width = active as f64 + tone_offset;
    if width <= 0.0 {
        return Err(Error::Config("passband width must be positive".into()));
    }
    let fc = width / (2.0 * fft_len as f64);
    let mid = (n_fir - 1) as f64 / 2.0;
    let taps: Vec<f64> = (0..n_fir)
        .map(|n| {
            let t = n as f64 - mid;
            let arg = 2.0 * fc * t;
            let sinc = if arg.abs() < 1e-12 {
                1.0
            } else {
                (std::f64::consts::PI * arg).sin() / (std::f64::consts::PI * arg)
            };
            let hann = 0.5 - 0.5 * (2.0 * std::f64::consts::PI * n as f64 / (n_fir - 1) as f64).cos();
            sinc * hann
        })
        .collect();
    let sum: f64 = taps.iter().sum();
    Ok(taps.into_iter().map(|v| v / sum).collect())
}

/// Dolph-Chebyshev window of `n` taps with sidelobes `atten_db` below the
/// main lobe, scaled to a peak of one.
pub fn dolph_chebyshev(n: usize, atten_db: f64) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::Config("window length must be at least 2".into()));
    }
    let order = (n - 1) as f64;
    let beta = ((10f64.powf(atten_db.abs() / 20.0)).acosh() / order).cosh();
    let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
    let p: Vec<f64> = (0..n)
        .map(|k| {
            let x = beta * (std::f64::consts::PI * k as f64 / n as f64).cos();
            if x > 1.0 {
                (order * x.acosh()).cosh()
            } else if x < -1.0 {
                sign * (order * (-x).acosh()).cosh()
            } else {
                (order * x.acos()).cos()
            }
        })
        .collect();
    let w: Vec<f64> = if n % 2 == 1 {
        let spec = dft(&p.iter().map(|&v| C64::new(v, 0.0)).collect::<Vec<_>>())?;
        let half = (n + 1) / 2;
        let w: Vec<f64> = spec[..half].iter().map(|v| v.re).collect();
        w[1..].iter().rev().chain(w.iter()).copied().collect()
    } else {
        let rotated: Vec<C64> = p
            .iter()
            .enumerate()
            .map(|(k, &v)| v * C64::from_polar(1.0, std::f64::consts::PI * k as f64 / n as f64))
            .collect();
        let spec = dft(&rotated)?;
        let half = n / 2 + 1;
        let w: Vec<f64> = spec[..half].iter().map(|v| v.re).collect();
        w[1..].iter().rev().chain(w[1..].iter()).copied().collect()
    };
    let peak = w.iter().cloned().fold(f64::MIN, f64::max);
    Ok(w.into_iter().map(|v| v / peak).collect())
}

/// Dolph-Chebyshev subband filter with unit DC gain.
pub fn uf_ofdm_filter(atten_db: f64, n_fir: usize) -> Result<Vec<f64>> {
    let w = dolph_chebyshev(n_fir, atten_db)?;
    let sum: f64 = w.iter().sum();
    Ok(w.into_iter().map(|v| v / sum).collect())
}

/// Shifts a lowpass prototype to center frequency `f0` (cycles per sample).
/// The phase reference is the filter midpoint, so the delay stays real.
pub fn modulate_taps(taps: &[f64], f0: f64) -> Vec<C64> {
    let mid = (taps.len() as f64 - 1.0) / 2.0;
    taps.iter()
        .enumerate()
        .map(|(n, &h)| h * C64::from_polar(1.0, 2.0 * std::f64::consts::PI * f0 * (n as f64 - mid)))
        .collect()
}

/// Frequency response of real taps at `f` cycles per sample.
pub fn freq_response(taps: &[f64], f: f64) -> C64 {
    taps.iter()
        .enumerate()
        .map(|(n, &h)| h * C64::from_polar(1.0, -2.0 * std::f64::consts::PI * f * n as f64))
        .sum()
}

/// Per-subcarrier amplitude inversion of a filter response at the given
/// frequencies (cycles per sample, relative to the prototype center).
pub fn pre_equalizer(taps: &[f64], freqs: &[f64]) -> Vec<f64> {
    freqs.iter().map(|&f| 1.0 / freq_response(taps, f).norm()).collect()
}

/// Group delay of a linear-phase filter in samples.
pub fn group_delay(n_fir: usize) -> f64 {
    (n_fir as f64 - 1.0) / 2.0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn db(v: f64) -> f64 {
        20.0 * v.log10()
    }

    #[test]
    fn f_ofdm_cutoff_and_gain() {
        let h = f_ofdm_filter(48, 0.0, 1024, 512).unwrap();
        assert_eq!(h.len(), 512);
        assert!((freq_response(&h, 0.0).norm() - 1.0).abs() < 1e-12);
        let fc = 48.0 / 2048.0;
        let at_cut = db(freq_response(&h, fc).norm());
        assert!((at_cut + 6.02).abs() < 0.5, "{at_cut}");
        // a tone offset of four widens the passband by four subcarriers
        let h4 = f_ofdm_filter(48, 4.0, 1024, 512).unwrap();
        let edge = |taps: &[f64]| {
            let mut f = 0.0;
            while freq_response(taps, f).norm() > 0.5 {
                f += 1e-6;
            }
            f
        };
        let widen = 2.0 * (edge(&h4) - edge(&h)) * 1024.0;
        assert!((widen - 4.0).abs() < 0.2, "{widen}");
    }

    #[test]
    fn chebyshev_sidelobes() {
        for (atten, n) in [(37.0, 73), (75.0, 73), (37.0, 37), (30.0, 36)] {
            let w = dolph_chebyshev(n, atten).unwrap();
            for k in 0..n {
                assert!((w[k] - w[n - 1 - k]).abs() < 1e-9);
            }
            // response on a fine grid; the main lobe ends at the first null
            let grid = 8192;
            let mag: Vec<f64> = (0..grid / 2)
                .map(|k| freq_response(&w, k as f64 / grid as f64).norm())
                .collect();
            let mut k = 1;
            while mag[k] < mag[k - 1] {
                k += 1;
            }
            let side = mag[k..].iter().cloned().fold(0.0, f64::max);
            let rel = db(side / mag[0]);
            assert!((rel + atten).abs() < 0.5, "{atten} dB, {n} taps: {rel}");
        }
    }

    #[test]
    fn uf_filter_unit_dc() {
        let h = uf_ofdm_filter(75.0, 73).unwrap();
        assert!((h.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((group_delay(73) - 36.0).abs() < 1e-15);
    }

    #[test]
    fn pre_equalizer_flattens() {
        let h = f_ofdm_filter(12, 0.0, 128, 64).unwrap();
        let freqs: Vec<f64> = (-6..6).map(|k| k as f64 / 128.0).collect();
        let g = pre_equalizer(&h, &freqs);
        for (f, gi) in freqs.iter().zip(&g) {
            assert!((freq_response(&h, *f).norm() * gi - 1.0).abs() < 1e-12);
        }
        let hm = modulate_taps(&h, 0.25);
        let r: C64 = hm
            .iter()
            .enumerate()
            .map(|(n, v)| v * C64::from_polar(1.0, -2.0 * std::f64::consts::PI * 0.25 * n as f64))
            .sum();
        assert!((r.norm() - 1.0).abs() < 1e-12);
    }
}
