//! Single-subcarrier responses and the index bookkeeping of the block
//! model.
//!
//! [`tx_subcarrier_response`] is the high-rate output of one unit symbol on
//! one transmit subcarrier. [`rx_subcarrier_operator`] is the linear map
//! from a span of high-rate samples to the values one receive subcarrier
//! observes on a run of symbols. Their product gives the response vector
//! `t` between a transmit and a receive subcarrier.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::fcfb::{AnalysisBank, Subband, SynthesisBank};
use crate::metrics::tmux::{touching_blocks, SideModel};
use crate::ofdm::{demodulate_symbol, modulate_symbol};
use crate::transforms::C64;

/// High-rate response of a unit symbol on subcarrier `l` at subframe
/// position `i`, for mask coefficients `coef`. Returns the start time and
/// the samples of every block the symbol touches.
pub fn tx_subcarrier_response(side: &SideModel, coef: &[f64], l: usize, i: usize) -> Result<(i64, Vec<C64>)> {
    if l >= side.num.active {
        return Err(Error::OutOfRange(format!(
            "subcarrier {l} outside 0..{}",
            side.num.active
        )));
    }
    let sub = Subband::from_weights(side.cfg, side.weights(coef)?)?;
    let bank = SynthesisBank::new(&[sub])?;
    let mut unit = vec![C64::new(0.0, 0.0); side.num.active];
    unit[l] = C64::new(1.0, 0.0);
    let sym = modulate_symbol(&unit, &side.num, side.num.cp_len(i))?;
    let pos = i % side.num.symbols_per_subframe();
    let tau = (i / side.num.symbols_per_subframe() * side.num.subframe_len()
        + side.num.symbol_starts(0, pos + 1)[pos]) as i64;
    let (lead, _) = side.cfg.short_overlap();
    let (r0, nr) = touching_blocks(tau, tau + sym.len() as i64, side.cfg.l, side.cfg.ls, lead);
    let y = bank.process_range(&[(&sym, tau)], r0, nr)?;
    Ok((r0 * side.cfg.ns as i64, y))
}

/// Low-rate start of symbol `j` (global index, frames of `S` symbols).
fn symbol_start(side: &SideModel, j: i64) -> i64 {
    let s = side.num.symbols_per_subframe() as i64;
    let f = j.div_euclid(s);
    let pos = j.rem_euclid(s) as usize;
    f * side.num.subframe_len() as i64 + side.num.symbol_starts(0, pos + 1)[pos] as i64
}

/// Receive operator: row `j - first` maps high-rate samples
/// `y_start .. y_start + len` to subcarrier `k` of symbol `j`.
///
/// Columns are found by pushing unit impulses through the analysis bank
/// and the demodulator, which is exact but costs one bank run per column.
pub fn rx_subcarrier_operator(
    side: &SideModel,
    coef: &[f64],
    k: usize,
    first: i64,
    count: usize,
    y_start: i64,
    len: usize,
) -> Result<Array2<C64>> {
    if k >= side.num.active {
        return Err(Error::OutOfRange(format!(
            "subcarrier {k} outside 0..{}",
            side.num.active
        )));
    }
    let sub = Subband::from_weights(side.cfg, side.weights(coef)?)?;
    let bank = AnalysisBank::new(&[sub])?;
    let lo = side.num.l_ofdm;
    let off = side.window_offset as i64;
    let windows: Vec<i64> = (first..first + count as i64)
        .map(|j| {
            let pos = j.rem_euclid(side.num.symbols_per_subframe() as i64) as usize;
            symbol_start(side, j) + side.num.cp_len(pos) as i64 - off
        })
        .collect();
    let u0 = windows.iter().copied().min().unwrap_or(0);
    let u1 = windows.iter().copied().max().unwrap_or(0) + lo as i64;
    let ls = side.cfg.ls as i64;
    let q0 = u0.div_euclid(ls);
    let nq = (super::tmux::ceil_div(u1, ls) - q0) as usize;
    let base = q0 * side.cfg.ls as i64;
    let mut op = Array2::zeros((count, len));
    let one = [C64::new(1.0, 0.0)];
    for col in 0..len {
        let t = y_start + col as i64;
        let u = bank.process_range(&one, t, q0, nq)?.remove(0);
        for (row, &w0) in windows.iter().enumerate() {
            let s = (w0 - base) as usize;
            let z = demodulate_symbol(&u[s..s + lo], &side.num, side.window_offset)?;
            op[[row, col]] = z[k];
        }
    }
    Ok(op)
}

/// Dimensions of the block model in the matrix formulation:
/// TX blocks `B_F`, TX span `P`, RX blocks `B_G`, RX span `Q`, the RX
/// selection offset `S_G` and the symbol counts `U` before and `V` after
/// the current one.
///
/// The analytical model in [`TmuxModel`](crate::metrics::TmuxModel) tracks
/// the exact support of every response instead and does not depend on
/// these numbers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockDims {
    pub b_f: usize,
    pub p: usize,
    pub b_g: usize,
    pub q: usize,
    pub s_g: i64,
    pub u: usize,
    pub v: usize,
}

impl BlockDims {
    pub fn new(tx: &SideModel, rx: &SideModel) -> Self {
        let n = tx.cfg.n as i64;
        let ns = tx.cfg.ns as i64;
        let b_f = (tx.num.l_ofdm + tx.num.l_cp).div_ceil(tx.cfg.ls) as i64;
        let p = ns * b_f;
        let b_g = (p + n) / ns - b_f % 2;
        let q = rx.cfg.ls as i64 * b_g;
        let s_g = (n + (b_g - 1) * ns - p).div_euclid(2);
        let lbar = rx.cfg.l as i64;
        let lo = rx.num.l_ofdm as i64;
        let u = (s_g * lbar).div_euclid(n * lo) + i64::from((s_g * lbar).rem_euclid(n * lo) != 0);
        let v = p.div_euclid(lo) + i64::from(p % lo != 0) - u;
        BlockDims {
            b_f: b_f as usize,
            p: p as usize,
            b_g: b_g.max(0) as usize,
            q: q.max(0) as usize,
            s_g,
            u: u.max(0) as usize,
            v: v.max(0) as usize,
        }
    }
}
