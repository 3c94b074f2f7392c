//! Real multiplications per QAM symbol for subband filtering.
//!
//! Transforms are counted with the split-radix figure
//! `C(n) = n (log2 n - 3) + 4`. A complex by complex product costs 4 real
//! multiplications and a complex by real product 2.
//!
//! Fast-convolution cost per OFDM symbol is the subband IFFTs plus, for
//! every overlap-save block, the short transform and the weighting of each
//! subband and one shared long transform. Blocks per OFDM symbol are the
//! high-rate symbol length over `N_S`. The per-block phase rotation is
//! merged into the weights and not counted.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Split-radix multiplication count of an `n`-point transform.
pub fn split_radix_muls(n: usize) -> f64 {
    if n < 4 {
        return 0.0;
    }
    let n = n as f64;
    n * (n.log2() - 3.0) + 4.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexityReport {
    pub muls_per_qam_symbol: f64,
    /// Over a plain `N`-point OFDM transmitter for the same allocation.
    pub ratio_vs_plain_ofdm: f64,
    /// `(stage, muls per QAM symbol)`, summing to the total.
    pub breakdown: Vec<(String, f64)>,
}

impl ComplexityReport {
    fn from_stages(stages: Vec<(&str, f64)>, plain: f64) -> Self {
        let total: f64 = stages.iter().map(|s| s.1).sum();
        ComplexityReport {
            muls_per_qam_symbol: total,
            ratio_vs_plain_ofdm: total / plain,
            breakdown: stages.into_iter().map(|(s, v)| (s.to_string(), v)).collect(),
        }
    }
}

/// Plain CP-OFDM: one `n`-point IFFT per `n_symb` QAM symbols.
pub fn plain_ofdm_muls(n: usize, n_symb: usize) -> f64 {
    split_radix_muls(n) / n_symb as f64
}

fn check_symb(n_symb: usize) -> Result<()> {
    if n_symb == 0 {
        return Err(Error::Config("no QAM symbols per OFDM symbol".into()));
    }
    Ok(())
}

/// Time-domain filtered OFDM: `L`-point IFFT, CP insertion, an
/// interpolating symmetric filter of `N_FIR L / N` taps per rail and
/// optional mixing to the subband center at the high rate.
pub fn td_filter_muls(
    l: usize,
    l_cp: usize,
    n: usize,
    n_fir: usize,
    n_symb: usize,
    mixing: bool,
) -> Result<ComplexityReport> {
    check_symb(n_symb)?;
    if l == 0 || n == 0 {
        return Err(Error::Config("transform lengths must be positive".into()));
    }
    let s = n_symb as f64;
    let (lf, nf) = (l as f64, n as f64);
    let ifft = split_radix_muls(l) / s;
    let filter = n_fir as f64 * lf * (lf + l_cp as f64) / (nf * s);
    let mix = if mixing { 4.0 * (nf + l_cp as f64 * nf / lf) / s } else { 0.0 };
    Ok(ComplexityReport::from_stages(
        vec![("ifft", ifft), ("cp", 0.0), ("filter", filter), ("mixing", mix)],
        plain_ofdm_muls(n, n_symb),
    ))
}

/// One subband of a fast-convolution transmitter or receiver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FcLoad {
    /// OFDM transform length.
    pub l_ofdm: usize,
    /// Short transform length.
    pub l: usize,
    /// Passband bins of the mask.
    pub mask_active: usize,
    pub tbw: usize,
}

/// Fast-convolution cost for `subbands` sharing one `n`-point long
/// transform with hop `ns`. `symbol_len` is the high-rate OFDM symbol
/// length including CP and `n_symb` the QAM symbols carried per OFDM
/// symbol by all subbands together.
pub fn fc_muls(
    n: usize,
    ns: usize,
    symbol_len: f64,
    subbands: &[FcLoad],
    n_symb: usize,
) -> Result<ComplexityReport> {
    check_symb(n_symb)?;
    if subbands.is_empty() {
        return Err(Error::Config("no subbands".into()));
    }
    if ns == 0 || ns > n {
        return Err(Error::Config(format!("hop {ns} outside 1..={n}")));
    }
    let s = n_symb as f64;
    let blocks = symbol_len / ns as f64;
    let ifft: f64 = subbands.iter().map(|b| split_radix_muls(b.l_ofdm)).sum();
    let short: f64 = subbands.iter().map(|b| split_radix_muls(b.l)).sum();
    let weights: f64 = subbands.iter().map(|b| 2.0 * (b.mask_active + 2 * b.tbw) as f64).sum();
    let long = split_radix_muls(n);
    Ok(ComplexityReport::from_stages(
        vec![
            ("ofdm_ifft", ifft / s),
            ("short_dft", blocks * short / s),
            ("weighting", blocks * weights / s),
            ("long_dft", blocks * long / s),
        ],
        plain_ofdm_muls(n, n_symb),
    ))
}

/// One row of the comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexityRow {
    pub config: String,
    pub overlap: f64,
    pub fc_muls: f64,
    pub fc_ratio: f64,
    pub cp_uf_muls: f64,
    pub f_ofdm_muls: f64,
}

/// A group of `count` equal subbands of `prbs` PRBs each at 15 kHz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubbandGroup {
    pub count: usize,
    pub prbs: usize,
}

impl SubbandGroup {
    pub fn name(&self) -> String {
        if self.count == 1 {
            format!("{} PRB", self.prbs)
        } else {
            format!("{}x{} PRB", self.count, self.prbs)
        }
    }
}

/// Transform lengths used for a subband of `prbs` PRBs at `N = 1024`.
fn subband_lengths(prbs: usize) -> (usize, usize) {
    // (L_OFDM, L_CP): smallest power of two that holds the subcarriers
    let l = (12 * prbs).next_power_of_two().max(128);
    (l, 72 * l / 1024)
}

/// Rows for each group at each overlap factor with `N = 1024`, 72-sample
/// CP, `L_TBW = 2` and time-domain filters of 73 and 512 taps.
pub fn comparison_table(groups: &[SubbandGroup], overlaps: &[f64]) -> Result<Vec<ComplexityRow>> {
    let n = 1024;
    let symbol_len = (n + 72) as f64;
    let mut rows = Vec::new();
    for g in groups {
        if g.count == 0 || g.prbs == 0 {
            return Err(Error::Config("empty subband group".into()));
        }
        let (l, l_cp) = subband_lengths(g.prbs);
        let per_band = 12 * g.prbs;
        let load = FcLoad { l_ofdm: l, l, mask_active: per_band, tbw: 2 };
        let loads = vec![load; g.count];
        let td_uf = td_filter_muls(l, l_cp, n, 73, per_band, true)?;
        let td_f = td_filter_muls(l, l_cp, n, 512, per_band, true)?;
        for &lambda in overlaps {
            if !(0.0..1.0).contains(&lambda) {
                return Err(Error::Config(format!("overlap factor {lambda} outside [0, 1)")));
            }
            let ns = ((1.0 - lambda) * n as f64).round() as usize;
            let fc = fc_muls(n, ns, symbol_len, &loads, per_band * g.count)?;
            rows.push(ComplexityRow {
                config: g.name(),
                overlap: lambda,
                fc_muls: fc.muls_per_qam_symbol,
                fc_ratio: fc.ratio_vs_plain_ofdm,
                cp_uf_muls: td_uf.muls_per_qam_symbol,
                f_ofdm_muls: td_f.muls_per_qam_symbol,
            });
        }
    }
    Ok(rows)
}

/// The four allocations of the reference comparison.
pub fn reference_groups() -> Vec<SubbandGroup> {
    vec![
        SubbandGroup { count: 1, prbs: 1 },
        SubbandGroup { count: 1, prbs: 4 },
        SubbandGroup { count: 1, prbs: 50 },
        SubbandGroup { count: 12, prbs: 4 },
    ]
}
