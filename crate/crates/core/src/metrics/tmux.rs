//! Analytical transmultiplexer model.
//!
//! A unit symbol on one transmit subcarrier is pushed through the synthesis
//! bank, the analysis bank and the receiver DFT, and every value it leaves
//! on the receiver subcarriers of every overlapping receive symbol is
//! recorded. This is repeated for each symbol position of a subframe, since
//! the positions sit differently on the block grid, and the results are
//! averaged. When a subframe spans a whole number of blocks on both sides
//! the average is exact for a stationary stream.
//!
//! The masks enter linearly on both sides. Each side is described by a set
//! of basis diagonals, and every response is stored per pair of transmit
//! and receive basis vectors, so the mean squared errors become quadratic
//! forms in the Kronecker product `c = w_tx (x) w_rx` of the coefficient
//! vectors:
//!
//! `MSE = mean_i |h_i . c - 1|^2 + c' G c`,
//!
//! where `h_i` are the direct-path responses and `G` collects the rest.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fcfb::{AnalysisBank, FcConfig, Side, Subband, SynthesisBank, WeightMask};
use crate::ofdm::{modulate_symbol, OfdmNumerology};
use crate::transforms::{fft_in_place, C64};

/// One side of the link: numerology, filter bank and mask basis.
#[derive(Debug, Clone, PartialEq)]
pub struct SideModel {
    pub num: OfdmNumerology,
    pub cfg: FcConfig,
    /// Basis diagonals in shifted order; the applied mask is
    /// `sum_a coef[a] * bases[a]`.
    pub bases: Vec<Vec<f64>>,
    /// Receiver only: FFT window advance before the end of the CP.
    pub window_offset: usize,
}

impl SideModel {
    /// Side whose transition weights stay free: basis 0 is the passband,
    /// basis `i + 1` the pair of bins holding `d_i`.
    pub fn with_mask(num: OfdmNumerology, cfg: FcConfig, mask: &WeightMask) -> Result<Self> {
        Self::from_bases(num, cfg, mask.l, mask.basis())
    }

    /// Side with a fixed diagonal.
    pub fn fixed(num: OfdmNumerology, cfg: FcConfig, weights: Vec<f64>) -> Result<Self> {
        let l = weights.len();
        Self::from_bases(num, cfg, l, vec![weights])
    }

    /// Plain CP-OFDM at the high rate: `L = N` with an all-ones mask,
    /// shifted so that subcarrier offset zero sits on long bin `center`.
    pub fn unfiltered(num: OfdmNumerology, side: Side, center: usize) -> Result<Self> {
        if num.l != num.n {
            return Err(Error::Config(format!(
                "an unfiltered side needs L = N, got L = {} and N = {}",
                num.l, num.n
            )));
        }
        let cfg = FcConfig::new(num.n, num.n / 2, num.n, num.n / 2, center, side)?;
        Self::fixed(num, cfg, vec![1.0; num.n])
    }

    fn from_bases(num: OfdmNumerology, cfg: FcConfig, l: usize, bases: Vec<Vec<f64>>) -> Result<Self> {
        cfg.validate()?;
        num.validate()?;
        if num.n != cfg.n || num.l != cfg.l || l != cfg.l {
            return Err(Error::Config(format!(
                "numerology (N = {}, L = {}) and filter bank (N = {}, L = {}) disagree",
                num.n, num.l, cfg.n, cfg.l
            )));
        }
        if bases.iter().any(|b| b.len() != cfg.l) {
            return Err(Error::Mask("basis length differs from L".into()));
        }
        Ok(SideModel { num, cfg, bases, window_offset: 0 })
    }

    pub fn with_window_offset(mut self, offset: usize) -> Result<Self> {
        if offset > self.num.l_cp {
            return Err(Error::OutOfRange(format!(
                "window offset {offset} outside 0..={}",
                self.num.l_cp
            )));
        }
        self.window_offset = offset;
        Ok(self)
    }

    /// Same side, with the current coefficients frozen into one diagonal.
    pub fn frozen(&self, coef: &[f64]) -> Result<Self> {
        let mut s = self.clone();
        s.bases = vec![self.weights(coef)?];
        Ok(s)
    }

    pub fn basis_count(&self) -> usize {
        self.bases.len()
    }

    /// Applied diagonal for coefficient vector `coef`.
    pub fn weights(&self, coef: &[f64]) -> Result<Vec<f64>> {
        if coef.len() != self.bases.len() {
            return Err(Error::Mask(format!(
                "{} coefficients for {} basis vectors",
                coef.len(),
                self.bases.len()
            )));
        }
        let mut w = vec![0.0; self.cfg.l];
        for (c, b) in coef.iter().zip(&self.bases) {
            for (wi, bi) in w.iter_mut().zip(b) {
                *wi += c * bi;
            }
        }
        Ok(w)
    }

    /// Long-spectrum bin of every active subcarrier.
    pub fn subcarrier_bins(&self) -> Vec<usize> {
        let rho = self.num.bin_ratio() as i64;
        let n = self.cfg.n as i64;
        self.num
            .subcarrier_offsets()
            .into_iter()
            .map(|o| (self.cfg.center as i64 + o * rho).rem_euclid(n) as usize)
            .collect()
    }

    fn subframe_high(&self) -> f64 {
        self.num.subframe_len() as f64 * self.cfg.n as f64 / self.cfg.l as f64
    }

    fn symbol_high(&self) -> f64 {
        (self.num.l_ofdm + self.num.l_cp) as f64 * self.cfg.n as f64 / self.cfg.l as f64
    }
}

pub(crate) fn ceil_div(a: i64, b: i64) -> i64 {
    -((-a).div_euclid(b))
}

/// Blocks of a bank with block length `len`, hop `hop` and leading overlap
/// `lead` that see any sample of `[t0, t1)`.
pub(crate) fn touching_blocks(t0: i64, t1: i64, len: usize, hop: usize, lead: usize) -> (i64, usize) {
    let (len, hop, lead) = (len as i64, hop as i64, lead as i64);
    let lo = ceil_div(t0 + lead - len + 1, hop);
    let hi = (t1 - 1 + lead).div_euclid(hop);
    (lo, (hi - lo + 1).max(0) as usize)
}

/// Response of one transmit symbol on one receive subcarrier of one receive
/// symbol, for every pair of basis vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseEntry {
    /// Global receive symbol index; frame `f`, position `j` is `f * S + j`.
    pub symbol: i64,
    /// Index into the receive active subcarriers.
    pub k: usize,
    /// Values ordered `a * n_rx + b`.
    pub values: Vec<C64>,
}

/// Quadratic statistics of one subcarrier.
///
/// Direct-path responses are kept one by one so that the error of a
/// nearly perfect link does not drown in cancellation.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadStat {
    /// Whether the subcarrier has a partner on the other side.
    pub has_direct: bool,
    /// Direct-path response of every symbol position.
    pub direct: Vec<Vec<C64>>,
    /// Weight of each direct entry in the average.
    pub weight: f64,
    /// Weighted sum of `Re(conj(v) v')` over all other responses, row-major.
    pub g: Vec<f64>,
}

impl QuadStat {
    fn zeros(n: usize, has_direct: bool) -> Self {
        QuadStat {
            has_direct,
            direct: Vec::new(),
            weight: 1.0,
            g: vec![0.0; n * n],
        }
    }

    fn add_outer(&mut self, v: &[C64]) {
        let n = v.len();
        for p in 0..n {
            let vp = v[p].conj();
            let row = &mut self.g[p * n..(p + 1) * n];
            for (q, gq) in row.iter_mut().enumerate() {
                *gq += (vp * v[q]).re;
            }
        }
    }

    fn add(&mut self, other: &QuadStat) {
        for (a, b) in self.g.iter_mut().zip(&other.g) {
            *a += b;
        }
        self.direct.extend(other.direct.iter().cloned());
    }

    fn scale(&mut self, s: f64) {
        self.g.iter_mut().for_each(|v| *v *= s);
        self.weight = s;
    }

    fn crosstalk(&self, c: &[f64]) -> f64 {
        let n = c.len();
        let mut acc = 0.0;
        for p in 0..n {
            let row = &self.g[p * n..(p + 1) * n];
            let inner: f64 = row.iter().zip(c).map(|(g, x)| g * x).sum();
            acc += c[p] * inner;
        }
        acc.max(0.0)
    }

    fn dot(v: &[C64], c: &[f64]) -> C64 {
        v.iter().zip(c).map(|(v, x)| v * x).sum()
    }

    /// Average received power.
    pub fn power(&self, c: &[f64]) -> f64 {
        let d: f64 = self.direct.iter().map(|v| Self::dot(v, c).norm_sqr()).sum();
        self.crosstalk(c) + self.weight * d
    }

    /// Mean squared error, or `None` without a direct path.
    pub fn mse(&self, c: &[f64]) -> Option<f64> {
        if !self.has_direct {
            return None;
        }
        let d: f64 = self
            .direct
            .iter()
            .map(|v| (Self::dot(v, c) - 1.0).norm_sqr())
            .sum();
        Some(self.crosstalk(c) + self.weight * d)
    }
}

/// Frame-averaged response statistics between a transmit and a receive side.
#[derive(Debug, Clone)]
pub struct TmuxModel {
    pub tx: SideModel,
    pub rx: SideModel,
    /// Per transmit subcarrier: error and power leaving it (per symbol).
    pub from: Vec<QuadStat>,
    /// Per receive subcarrier: error and power arriving at it (per symbol).
    pub into: Vec<QuadStat>,
    /// Receive partner of each transmit subcarrier.
    pub partner: Vec<Option<usize>>,
}

struct Prepared<'a> {
    tx: &'a SideModel,
    rx: &'a SideModel,
    tx_banks: Vec<SynthesisBank>,
    rx_bank: AnalysisBank,
    tx_starts: Vec<usize>,
    rx_starts: Vec<usize>,
    rx_bins: Vec<usize>,
    partner: Vec<Option<usize>>,
    same_timing: bool,
}

impl<'a> Prepared<'a> {
    fn new(tx: &'a SideModel, rx: &'a SideModel) -> Result<Self> {
        if tx.cfg.side != Side::Synthesis || rx.cfg.side != Side::Analysis {
            return Err(Error::Config("model needs a synthesis and an analysis side".into()));
        }
        if tx.cfg.n != rx.cfg.n {
            return Err(Error::Config("both sides must share the long transform length".into()));
        }
        if (tx.subframe_high() - rx.subframe_high()).abs() > 1e-9 {
            return Err(Error::Framing(format!(
                "subframe durations differ: {} vs {} high-rate samples",
                tx.subframe_high(),
                rx.subframe_high()
            )));
        }
        let tx_banks = tx
            .bases
            .iter()
            .map(|b| SynthesisBank::new(&[Subband::from_weights(tx.cfg, b.clone())?]))
            .collect::<Result<Vec<_>>>()?;
        let rx_subs = rx
            .bases
            .iter()
            .map(|b| Subband::from_weights(rx.cfg, b.clone()))
            .collect::<Result<Vec<_>>>()?;
        let rx_bank = AnalysisBank::new(&rx_subs)?;
        let same_timing = (tx.symbol_high() - rx.symbol_high()).abs() < 1e-9
            && tx.num.symbols_per_subframe() == rx.num.symbols_per_subframe()
            && (tx.num.first_cp_ext * tx.cfg.n * rx.cfg.l == rx.num.first_cp_ext * rx.cfg.n * tx.cfg.l);
        let rx_long = rx.subcarrier_bins();
        let partner = tx
            .subcarrier_bins()
            .iter()
            .map(|b| {
                if same_timing {
                    rx_long.iter().position(|r| r == b)
                } else {
                    None
                }
            })
            .collect();
        Ok(Prepared {
            tx,
            rx,
            tx_banks,
            rx_bank,
            tx_starts: tx.num.symbol_starts(0, tx.num.symbols_per_subframe()),
            rx_starts: rx.num.symbol_starts(0, rx.num.symbols_per_subframe()),
            rx_bins: rx.num.active_bins(),
            partner,
            same_timing,
        })
    }

    /// All responses of the unit symbol on transmit subcarrier `l` at
    /// subframe position `i` (frame 0).
    fn entries(&self, l: usize, i: usize) -> Result<Vec<ResponseEntry>> {
        let (tx, rx) = (self.tx, self.rx);
        let mut unit = vec![C64::new(0.0, 0.0); tx.num.active];
        unit[l] = C64::new(1.0, 0.0);
        let cp = tx.num.cp_len(i);
        let sym = modulate_symbol(&unit, &tx.num, cp)?;
        let tau = self.tx_starts[i] as i64;
        let (tl, _) = tx.cfg.short_overlap();
        let (r0, nr) = touching_blocks(tau, tau + sym.len() as i64, tx.cfg.l, tx.cfg.ls, tl);
        let y_start = r0 * tx.cfg.ns as i64;

        let n_rx = rx.bases.len();
        let n_tx = tx.bases.len();
        let (nl, _) = rx.cfg.long_overlap();
        let y_end = y_start + (nr * tx.cfg.ns) as i64;
        let (q0, nq) = touching_blocks(y_start, y_end, rx.cfg.n, rx.cfg.ns, nl);
        let u_start = q0 * rx.cfg.ls as i64;
        let u_end = u_start + (nq * rx.cfg.ls) as i64;

        // low-rate receive outputs, indexed [a][b]
        let mut outs: Vec<Vec<Vec<C64>>> = Vec::with_capacity(n_tx);
        for bank in &self.tx_banks {
            let y = bank.process_range(&[(&sym, tau)], r0, nr)?;
            outs.push(self.rx_bank.process_range(&y, y_start, q0, nq)?);
        }

        let sf = rx.num.subframe_len() as i64;
        let s_rx = rx.num.symbols_per_subframe() as i64;
        let lo = rx.num.l_ofdm;
        let off = rx.window_offset;
        let mut result = Vec::new();
        let mut buf = vec![C64::new(0.0, 0.0); lo];
        let f_lo = u_start.div_euclid(sf) - 1;
        let f_hi = u_end.div_euclid(sf) + 1;
        for f in f_lo..=f_hi {
            for (j, &start) in self.rx_starts.iter().enumerate() {
                let w0 = f * sf + (start + rx.num.cp_len(j)) as i64 - off as i64;
                let w1 = w0 + lo as i64;
                if w1 <= u_start || w0 >= u_end {
                    continue;
                }
                let mut vals = vec![vec![C64::new(0.0, 0.0); n_tx * n_rx]; self.rx_bins.len()];
                for a in 0..n_tx {
                    for b in 0..n_rx {
                        let u = &outs[a][b];
                        for (m, v) in buf.iter_mut().enumerate() {
                            let t = w0 + m as i64 - u_start;
                            *v = if t >= 0 && (t as usize) < u.len() {
                                u[t as usize]
                            } else {
                                C64::new(0.0, 0.0)
                            };
                        }
                        fft_in_place(&mut buf);
                        for (k, &bin) in self.rx_bins.iter().enumerate() {
                            let turn = ((bin * off) % lo) as f64 / lo as f64;
                            vals[k][a * n_rx + b] =
                                buf[bin] * C64::from_polar(1.0, 2.0 * std::f64::consts::PI * turn);
                        }
                    }
                }
                let symbol = f * s_rx + j as i64;
                for (k, values) in vals.into_iter().enumerate() {
                    result.push(ResponseEntry { symbol, k, values });
                }
            }
        }
        Ok(result)
    }

    fn is_direct(&self, l: usize, i: usize, e: &ResponseEntry) -> bool {
        self.same_timing && e.symbol == i as i64 && self.partner[l] == Some(e.k)
    }
}

impl TmuxModel {
    /// Computes the frame-averaged statistics. Work is split over transmit
    /// subcarriers in fixed chunks, so the result does not depend on the
    /// thread count.
    pub fn build(tx: &SideModel, rx: &SideModel) -> Result<Self> {
        let prep = Prepared::new(tx, rx)?;
        let n = tx.bases.len() * rx.bases.len();
        let k_tx = tx.num.active;
        let k_rx = rx.num.active;
        let s_tx = tx.num.symbols_per_subframe();
        let s_rx = rx.num.symbols_per_subframe();
        let has_into_direct: Vec<bool> = (0..k_rx).map(|k| prep.partner.contains(&Some(k))).collect();

        let ls: Vec<usize> = (0..k_tx).collect();
        let chunks: Vec<Result<(Vec<QuadStat>, Vec<QuadStat>)>> = ls
            .par_chunks(8)
            .map(|chunk| {
                let mut from = Vec::with_capacity(chunk.len());
                let mut into: Vec<QuadStat> =
                    (0..k_rx).map(|k| QuadStat::zeros(n, has_into_direct[k])).collect();
                for &l in chunk {
                    let mut st = QuadStat::zeros(n, prep.partner[l].is_some());
                    for i in 0..s_tx {
                        for e in prep.entries(l, i)? {
                            if prep.is_direct(l, i, &e) {
                                st.direct.push(e.values.clone());
                                into[e.k].direct.push(e.values);
                            } else {
                                st.add_outer(&e.values);
                                into[e.k].add_outer(&e.values);
                            }
                        }
                    }
                    st.scale(1.0 / s_tx as f64);
                    from.push(st);
                }
                Ok((from, into))
            })
            .collect();

        let mut from = Vec::with_capacity(k_tx);
        let mut into: Vec<QuadStat> = (0..k_rx).map(|k| QuadStat::zeros(n, has_into_direct[k])).collect();
        for c in chunks {
            let (f, i) = c?;
            from.extend(f);
            for (acc, part) in into.iter_mut().zip(&i) {
                acc.add(part);
            }
        }
        into.iter_mut().for_each(|q| q.scale(1.0 / s_rx as f64));
        Ok(TmuxModel {
            tx: tx.clone(),
            rx: rx.clone(),
            from,
            into,
            partner: prep.partner,
        })
    }

    /// Raw responses of the unit symbol on transmit subcarrier `l` at
    /// subframe position `i`, per pair of basis vectors.
    pub fn responses(&self, l: usize, i: usize) -> Result<Vec<ResponseEntry>> {
        Prepared::new(&self.tx, &self.rx)?.entries(l, i)
    }

    /// Kronecker product of the coefficient vectors.
    pub fn combine(&self, tx_coef: &[f64], rx_coef: &[f64]) -> Result<Vec<f64>> {
        if tx_coef.len() != self.tx.bases.len() || rx_coef.len() != self.rx.bases.len() {
            return Err(Error::Mask("coefficient count does not match the basis".into()));
        }
        Ok(tx_coef
            .iter()
            .flat_map(|a| rx_coef.iter().map(move |b| a * b))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn block_touching() {
        // L = 4, L_S = 2, lead 1: block r covers [2r - 1, 2r + 3)
        assert_eq!(touching_blocks(0, 1, 4, 2, 1), (-1, 2));
        assert_eq!(touching_blocks(2, 3, 4, 2, 1), (0, 2));
        assert_eq!(touching_blocks(-5, -4, 4, 2, 1), (-3, 2));
        assert_eq!(ceil_div(-3, 2), -1);
        assert_eq!(ceil_div(3, 2), 2);
    }
}
