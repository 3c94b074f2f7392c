//! Magnitude response of the synthesis processing.
//!
//! The synthesis bank is periodically shift-variant with `L_S` distinct
//! impulse responses per block. `M(w)` is the mean of their squared
//! magnitude responses. Because the mask enters linearly, each response is
//! split per basis vector and `M(w) = w' Q(w) w` with a small real
//! symmetric `Q(w)` at every frequency, which makes repeated evaluation
//! during optimization cheap.

use crate::error::{Error, Result};
use crate::fcfb::{impulse_responses, FcConfig, Side, Subband, WeightMask};
use crate::transforms::{fft_in_place, C64};

/// Frequency grid in units of long-transform bins, `[0, N)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FreqGrid {
    pub points_per_bin: usize,
    pub n: usize,
}

impl FreqGrid {
    pub fn new(n: usize, points_per_bin: usize) -> Result<Self> {
        if n == 0 || points_per_bin == 0 {
            return Err(Error::Config("grid needs positive size and density".into()));
        }
        Ok(FreqGrid { points_per_bin, n })
    }

    pub fn len(&self) -> usize {
        self.n * self.points_per_bin
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Frequency of grid point `i` in bins.
    pub fn bin(&self, i: usize) -> f64 {
        i as f64 / self.points_per_bin as f64
    }
}

/// Stopband of one subband: every frequency at least
/// `active / 2 + tbw + 1/2` bins away from the passband center, measured
/// circularly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stopband {
    /// Passband center in long bins (may be fractional).
    pub center: f64,
    /// Minimum distance from the center in bins.
    pub edge: f64,
    pub n: usize,
}

impl Stopband {
    pub fn for_mask(cfg: &FcConfig, mask: &WeightMask) -> Self {
        let a = mask.active as f64;
        let center = cfg.center as f64 + (a - 1.0) / 2.0 - (mask.active / 2) as f64;
        Stopband {
            center,
            edge: a / 2.0 + mask.tbw() as f64 + 0.5,
            n: cfg.n,
        }
    }

    /// Signed circular distance from the center in bins.
    pub fn offset(&self, f: f64) -> f64 {
        let n = self.n as f64;
        let d = (f - self.center).rem_euclid(n);
        if d >= n / 2.0 {
            d - n
        } else {
            d
        }
    }

    pub fn contains(&self, f: f64) -> bool {
        self.offset(f).abs() >= self.edge - 1e-9
    }
}

/// Per-basis impulse-response spectra on a frequency grid.
#[derive(Debug, Clone)]
pub struct MagnitudeModel {
    pub grid: FreqGrid,
    /// Number of basis vectors.
    pub dim: usize,
    /// Frequencies (bins) of the stored points.
    pub freqs: Vec<f64>,
    /// `Q(w)` for each stored point, row-major `dim x dim`.
    pub q: Vec<Vec<f64>>,
}

fn basis_spectra(cfg: &FcConfig, bases: &[Vec<f64>], grid: &FreqGrid) -> Result<Vec<Vec<Vec<C64>>>> {
    if cfg.side != Side::Synthesis {
        return Err(Error::Config("magnitude response needs a synthesis configuration".into()));
    }
    if grid.n != cfg.n {
        return Err(Error::Config("grid and filter bank disagree on N".into()));
    }
    let size = grid.len();
    // spectra[a][j] = FFT of response j of basis a
    bases
        .iter()
        .map(|b| {
            let sub = Subband::from_weights(*cfg, b.clone())?;
            impulse_responses(&sub)?
                .into_iter()
                .map(|ir| {
                    if ir.taps.len() > size {
                        return Err(Error::Config(format!(
                            "impulse response of {} taps exceeds the grid of {size} points",
                            ir.taps.len()
                        )));
                    }
                    let mut buf = vec![C64::new(0.0, 0.0); size];
                    buf[..ir.taps.len()].copy_from_slice(&ir.taps);
                    fft_in_place(&mut buf);
                    Ok(buf)
                })
                .collect()
        })
        .collect()
}

impl MagnitudeModel {
    /// Builds `Q(w)` at the grid points accepted by `keep`.
    pub fn build(
        cfg: &FcConfig,
        bases: &[Vec<f64>],
        grid: FreqGrid,
        keep: impl Fn(f64) -> bool,
    ) -> Result<Self> {
        let spectra = basis_spectra(cfg, bases, &grid)?;
        let dim = bases.len();
        let cols = spectra.first().map_or(0, |s| s.len());
        let mut freqs = Vec::new();
        let mut q = Vec::new();
        for i in 0..grid.len() {
            let f = grid.bin(i);
            if !keep(f) {
                continue;
            }
            let mut qi = vec![0.0; dim * dim];
            for j in 0..cols {
                for a in 0..dim {
                    let va = spectra[a][j][i].conj();
                    for b in 0..dim {
                        qi[a * dim + b] += (va * spectra[b][j][i]).re;
                    }
                }
            }
            qi.iter_mut().for_each(|v| *v /= cols as f64);
            freqs.push(f);
            q.push(qi);
        }
        Ok(MagnitudeModel { grid, dim, freqs, q })
    }

    /// Model restricted to the stopband of `mask`, with the mask basis.
    pub fn stopband(cfg: &FcConfig, mask: &WeightMask, points_per_bin: usize) -> Result<Self> {
        let sb = Stopband::for_mask(cfg, mask);
        Self::build(cfg, &mask.basis(), FreqGrid::new(cfg.n, points_per_bin)?, |f| sb.contains(f))
    }

    /// `M(w)` at every stored point, linear.
    pub fn evaluate(&self, coef: &[f64]) -> Vec<f64> {
        let d = self.dim;
        self.q
            .iter()
            .map(|qi| {
                let mut acc = 0.0;
                for a in 0..d {
                    for b in 0..d {
                        acc += coef[a] * qi[a * d + b] * coef[b];
                    }
                }
                acc.max(0.0)
            })
            .collect()
    }

    /// Largest stored value in dB.
    pub fn max_db(&self, coef: &[f64]) -> f64 {
        let m = self.evaluate(coef).into_iter().fold(0.0, f64::max);
        10.0 * m.max(1e-300).log10()
    }
}

/// `M(w)` of a fixed diagonal on the whole grid, linear.
pub fn magnitude_response(cfg: &FcConfig, weights: &[f64], points_per_bin: usize) -> Result<(FreqGrid, Vec<f64>)> {
    let grid = FreqGrid::new(cfg.n, points_per_bin)?;
    let model = MagnitudeModel::build(cfg, &[weights.to_vec()], grid.clone(), |_| true)?;
    Ok((grid, model.evaluate(&[1.0])))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stopband_edges() {
        let cfg = FcConfig::synthesis(1024, 128, 64, 100).unwrap();
        let mask = WeightMask::raised_cosine(128, 48, 2).unwrap();
        let sb = Stopband::for_mask(&cfg, &mask);
        // ones on bins 76..=123, center 99.5
        assert!((sb.center - 99.5).abs() < 1e-12);
        assert!(sb.contains(99.5 + 26.5));
        assert!(!sb.contains(99.5 + 26.4));
        assert!(sb.contains(99.5 - 26.5));
        assert!(sb.contains(99.5 + 512.0));
        assert!((sb.offset(1023.0) - (-100.5)).abs() < 1e-12);
    }

    #[test]
    fn quadratic_matches_direct() {
        let cfg = FcConfig::synthesis(64, 16, 8, 10).unwrap();
        let mask = WeightMask::new(16, 6, vec![0.8, 0.3]).unwrap();
        let grid = FreqGrid::new(64, 4).unwrap();
        let model = MagnitudeModel::build(&cfg, &mask.basis(), grid, |_| true).unwrap();
        let (_, direct) = magnitude_response(&cfg, &mask.diagonal(), 4).unwrap();
        let quad = model.evaluate(&mask.coefficients());
        for (a, b) in direct.iter().zip(&quad) {
            assert!((a - b).abs() < 1e-12 * (1.0 + a));
        }
    }
}
