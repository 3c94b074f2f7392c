//! Weighted overlap-and-add windowing of CP-OFDM symbols.
//!
//! The transmitter appends a cyclic suffix of `N_WS` samples, tapers the
//! first and last `N_WS` samples with raised-cosine slopes and overlaps the
//! suffix with the ramp-up of the next symbol, so symbol timing is kept.
//! The receiver takes `L_OFDM + N_WS` samples centered in the regular CP
//! region, tapers both ends and folds the tail onto the head.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ofdm::{modulate_symbol, OfdmNumerology};
use crate::transforms::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WolaParams {
    /// Window slope length, equal to the symbol extension.
    pub n_ws: usize,
}

impl WolaParams {
    pub fn n_ext(&self) -> usize {
        self.n_ws
    }

    /// Transmit window length `L_OFDM + L_CP + N_WS`.
    pub fn n_win_tx(&self, num: &OfdmNumerology) -> usize {
        num.l_ofdm + num.l_cp + self.n_ws
    }

    /// Receive window length `L_OFDM + N_WS`.
    pub fn n_win_rx(&self, num: &OfdmNumerology) -> usize {
        num.l_ofdm + self.n_ws
    }

    /// How far the folded FFT window of [`wola_rx`] starts before the end of the CP.
    pub fn rx_advance(&self, num: &OfdmNumerology) -> usize {
        num.l_cp - (num.l_cp - self.n_ws) / 2
    }

    /// Rising raised-cosine slope; the falling slope is its reverse and the
    /// two sum to one sample by sample.
    pub fn ramp(&self) -> Vec<f64> {
        let n = self.n_ws as f64;
        (0..self.n_ws)
            .map(|j| (std::f64::consts::PI * (j as f64 + 0.5) / (2.0 * n)).sin().powi(2))
            .collect()
    }
}

/// Windowed transmit stream. The output is `N_WS` samples longer than the
/// plain CP-OFDM stream because of the suffix of the last symbol.
pub fn wola_tx(qam: &[C64], num: &OfdmNumerology, p: &WolaParams, first: usize) -> Result<Vec<C64>> {
    if qam.len() % num.active != 0 {
        return Err(Error::Allocation("symbol count is not a multiple of L_ACT".into()));
    }
    let ramp = p.ramp();
    let l = num.l_ofdm;
    let total: usize = (0..qam.len() / num.active)
        .map(|i| num.cp_len(first + i) + l)
        .sum();
    let mut out = vec![C64::new(0.0, 0.0); total + p.n_ws];
    let mut t = 0;
    for (i, chunk) in qam.chunks(num.active).enumerate() {
        let cp = num.cp_len(first + i);
        let sym = modulate_symbol(chunk, num, cp)?;
        for j in 0..cp + l + p.n_ws {
            let v = if j < cp + l { sym[j] } else { sym[cp + (j - cp - l) % l] };
            let w = if j < p.n_ws {
                ramp[j]
            } else if j >= cp + l {
                ramp[p.n_ws - 1 - (j - cp - l)]
            } else {
                1.0
            };
            out[t + j] += v * w;
        }
        t += cp + l;
    }
    Ok(out)
}

/// Receive windowing. Returns a stream with the CP-OFDM layout in which
/// each symbol's FFT window, starting [`WolaParams::rx_advance`] samples
/// before the end of the CP, holds the folded samples.
pub fn wola_rx(stream: &[C64], num: &OfdmNumerology, p: &WolaParams, first: usize) -> Result<Vec<C64>> {
    if p.n_ws > num.l_cp {
        return Err(Error::Config(format!(
            "window slope {} longer than the CP {}",
            p.n_ws, num.l_cp
        )));
    }
    let ramp = p.ramp();
    let l = num.l_ofdm;
    let mut out = stream.to_vec();
    let mut t = 0;
    let mut i = first;
    loop {
        let cp = num.cp_len(i);
        if t + cp + l > stream.len() {
            break;
        }
        let s = t + cp - p.rx_advance(num);
        for j in 0..l {
            let mut v = stream[s + j];
            if j < p.n_ws {
                v = v * ramp[j] + stream[s + j + l] * ramp[p.n_ws - 1 - j];
            }
            out[s + j] = v;
        }
        t += cp + l;
        i += 1;
    }
    Ok(out)
}
