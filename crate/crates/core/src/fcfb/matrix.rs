//! Literal block-matrix model of the filter banks.
//!
//! Each block matrix is assembled from explicit factors: DFT matrices, the
//! half-length circular shift, the diagonal weighting, the bin mapping with
//! its phase term and the row selection of overlap-save. The products are
//! formed densely, so this module is meant for verification and for
//! inspecting the shift-variant impulse responses of small systems.

use ndarray::{s, Array2};

use crate::error::{Error, Result};
use crate::fcfb::{block_phase, engine::Subband, Side, SynthesisBank};
use crate::transforms::C64;

fn dft_matrix(n: usize, inverse: bool) -> Array2<C64> {
    let sign = if inverse { 1.0 } else { -1.0 };
    let scale = if inverse { 1.0 / n as f64 } else { 1.0 };
    Array2::from_shape_fn((n, n), |(p, q)| {
        let k = (p * q) % n;
        C64::from_polar(scale, sign * 2.0 * std::f64::consts::PI * k as f64 / n as f64)
    })
}

/// Permutation moving element `(q + L/2) mod L` to position `q`.
fn half_shift(l: usize) -> Array2<C64> {
    let mut p = Array2::zeros((l, l));
    for q in 0..l {
        p[[q, (q + l / 2) % l]] = C64::new(1.0, 0.0);
    }
    p
}

fn diag(w: &[f64]) -> Array2<C64> {
    let mut d = Array2::zeros((w.len(), w.len()));
    for (i, &v) in w.iter().enumerate() {
        d[[i, i]] = C64::new(v, 0.0);
    }
    d
}

/// `N x L` bin mapping with the block phase folded in.
fn mapping(sub: &Subband, r: i64) -> Array2<C64> {
    let cfg = &sub.cfg;
    let rot = block_phase(r, cfg);
    let mut m = Array2::zeros((cfg.n, cfg.l));
    for q in 0..cfg.l {
        m[[cfg.long_bin(q), q]] = rot;
    }
    m
}

fn require(sub: &Subband, side: Side) -> Result<()> {
    sub.cfg.validate()?;
    if sub.cfg.side != side {
        return Err(Error::Config(format!("expected a {side:?} configuration")));
    }
    if sub.weights.len() != sub.cfg.l {
        return Err(Error::Mask("weight vector length differs from L".into()));
    }
    Ok(())
}

/// Synthesis block matrix of shape `N_S x L` for block `r`.
pub fn build_synthesis_block(sub: &Subband, r: i64) -> Result<Array2<C64>> {
    require(sub, Side::Synthesis)?;
    let cfg = &sub.cfg;
    let (nl, _) = cfg.long_overlap();
    let w_l = dft_matrix(cfg.l, false);
    let shifted = half_shift(cfg.l).dot(&w_l);
    let weighted = diag(&sub.weights).dot(&shifted);
    let mapped = mapping(sub, r).dot(&weighted);
    let w_inv = dft_matrix(cfg.n, true);
    let selected = w_inv.slice(s![nl..nl + cfg.ns, ..]);
    Ok(selected.dot(&mapped))
}

/// Analysis block matrix of shape `L_S x N` for block `r`.
pub fn build_analysis_block(sub: &Subband, r: i64) -> Result<Array2<C64>> {
    require(sub, Side::Analysis)?;
    let cfg = &sub.cfg;
    let (ll, _) = cfg.short_overlap();
    let w_n = dft_matrix(cfg.n, false);
    let gathered = mapping(sub, r).t().mapv(|v| v.conj()).dot(&w_n);
    let weighted = diag(&sub.weights).dot(&gathered);
    // the shift by L/2 is its own inverse
    let unshifted = half_shift(cfg.l).t().dot(&weighted);
    let w_inv = dft_matrix(cfg.l, true);
    let selected = w_inv.slice(s![ll..ll + cfg.ls, ..]);
    Ok(selected.dot(&unshifted))
}

/// Stream-domain synthesis operator for blocks `r_first .. r_first + count`.
///
/// Column `j` is the low-rate input at time `r_first * L_S - L_L + j`, row
/// `i` the high-rate output at time `r_first * N_S + i`.
pub fn synthesis_operator(sub: &Subband, r_first: i64, count: usize) -> Result<Array2<C64>> {
    let cfg = &sub.cfg;
    let cols = cfg.ls * count.saturating_sub(1) + cfg.l;
    let mut op = Array2::zeros((cfg.ns * count, cols));
    for b in 0..count {
        let blk = build_synthesis_block(sub, r_first + b as i64)?;
        let mut dst = op.slice_mut(s![b * cfg.ns..(b + 1) * cfg.ns, b * cfg.ls..b * cfg.ls + cfg.l]);
        dst += &blk;
    }
    Ok(op)
}

/// Stream-domain analysis operator for blocks `r_first .. r_first + count`.
///
/// Column `j` is the high-rate input at time `r_first * N_S - N_L + j`, row
/// `i` the low-rate output at time `r_first * L_S + i`.
pub fn analysis_operator(sub: &Subband, r_first: i64, count: usize) -> Result<Array2<C64>> {
    let cfg = &sub.cfg;
    let cols = cfg.ns * count.saturating_sub(1) + cfg.n;
    let mut op = Array2::zeros((cfg.ls * count, cols));
    for b in 0..count {
        let blk = build_analysis_block(sub, r_first + b as i64)?;
        let mut dst = op.slice_mut(s![b * cfg.ls..(b + 1) * cfg.ls, b * cfg.ns..b * cfg.ns + cfg.n]);
        dst += &blk;
    }
    Ok(op)
}

/// One of the shift-variant impulse responses of a bank.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpulseResponse {
    /// Time of the excited input sample (synthesis) or of the observed
    /// output sample (analysis), on the low-rate grid.
    pub time: i64,
    /// High-rate time of `taps[0]`.
    pub start: i64,
    pub taps: Vec<C64>,
}

/// The `L_S` distinct impulse responses of one period.
///
/// For a synthesis bank these are the responses to unit impulses at
/// low-rate times `0 .. L_S`, spanning every block that sees the impulse.
/// For an analysis bank they are the weights by which low-rate outputs
/// `0 .. L_S` combine the high-rate input; each spans one long block.
pub fn impulse_responses(sub: &Subband) -> Result<Vec<ImpulseResponse>> {
    let cfg = &sub.cfg;
    match cfg.side {
        Side::Synthesis => {
            let bank = SynthesisBank::new(std::slice::from_ref(sub))?;
            let (ll, _) = cfg.short_overlap();
            let (l, ls, ll) = (cfg.l as i64, cfg.ls as i64, ll as i64);
            let one = [C64::new(1.0, 0.0)];
            (0..ls)
                .map(|t| {
                    let r_lo = (t + ll - l + 1).div_euclid(ls)
                        + i64::from((t + ll - l + 1).rem_euclid(ls) != 0);
                    let r_hi = (t + ll).div_euclid(ls);
                    let count = (r_hi - r_lo + 1) as usize;
                    let taps = bank.process_range(&[(&one, t)], r_lo, count)?;
                    Ok(ImpulseResponse {
                        time: t,
                        start: r_lo * cfg.ns as i64,
                        taps,
                    })
                })
                .collect()
        }
        Side::Analysis => {
            let blk = build_analysis_block(sub, 0)?;
            let (nl, _) = cfg.long_overlap();
            Ok((0..cfg.ls)
                .map(|t| ImpulseResponse {
                    time: t as i64,
                    start: -(nl as i64),
                    taps: blk.row(t).to_vec(),
                })
                .collect())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fcfb::{FcConfig, WeightMask};

    fn sub(n: usize, l: usize, ls: usize, c: usize, side: Side, mask: &WeightMask) -> Subband {
        let cfg = match side {
            Side::Synthesis => FcConfig::synthesis(n, l, ls, c),
            Side::Analysis => FcConfig::analysis(n, l, ls, c),
        }
        .unwrap();
        Subband::new(cfg, mask).unwrap()
    }

    #[test]
    fn full_length_passthrough_is_selection() {
        let ones = WeightMask::rectangular(16, 16).unwrap();
        let f = build_synthesis_block(&sub(16, 16, 8, 0, Side::Synthesis, &ones), 0).unwrap();
        let g = build_analysis_block(&sub(16, 16, 8, 0, Side::Analysis, &ones), 0).unwrap();
        for i in 0..8 {
            for j in 0..16 {
                let want = if j == i + 4 { 1.0 } else { 0.0 };
                assert!((f[[i, j]] - want).norm() < 1e-12);
                assert!((g[[i, j]] - want).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn toy_response_lengths() {
        let mask = WeightMask::new(4, 2, vec![0.5]).unwrap();
        let lens = |ls| {
            impulse_responses(&sub(8, 4, ls, 0, Side::Synthesis, &mask))
                .unwrap()
                .iter()
                .map(|h| h.taps.len())
                .collect::<Vec<_>>()
        };
        assert_eq!(lens(1), vec![8]);
        assert_eq!(lens(2), vec![8, 8]);
        let mut three = lens(3);
        three.sort();
        assert_eq!(three, vec![6, 6, 12]);
    }

    #[test]
    fn responses_are_operator_columns() {
        let mask = WeightMask::new(16, 6, vec![0.3, 0.8]).unwrap();
        let sb = sub(64, 16, 12, 21, Side::Synthesis, &mask);
        let op = synthesis_operator(&sb, -2, 6).unwrap();
        let (ll, _) = sb.cfg.short_overlap();
        for h in impulse_responses(&sb).unwrap() {
            let col = (h.time + 2 * 12 + ll as i64) as usize;
            for (i, v) in op.column(col).iter().enumerate() {
                let t = i as i64 - 2 * 48;
                let k = t - h.start;
                let want = if k >= 0 && (k as usize) < h.taps.len() {
                    h.taps[k as usize]
                } else {
                    C64::new(0.0, 0.0)
                };
                assert!((v - want).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn single_bin_block_is_exponential() {
        let cfg = FcConfig::synthesis(32, 8, 4, 5).unwrap();
        let mut w = vec![0.0; 8];
        w[6] = 1.0; // offset +2
        let f = build_synthesis_block(&Subband::from_weights(cfg, w).unwrap(), 3).unwrap();
        // every column is a multiple of exp(i 2 pi 7 n / 32) over the kept rows
        for j in 0..8 {
            let base = f[[0, j]];
            for i in 0..16 {
                let e = C64::from_polar(1.0, 2.0 * std::f64::consts::PI * 7.0 * i as f64 / 32.0);
                assert!((f[[i, j]] - base * e).norm() < 1e-12);
            }
        }
    }
}
