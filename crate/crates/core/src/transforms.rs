//! Discrete Fourier transforms and overlap-save framing.
//!
//! The forward transform is unnormalized and the inverse carries the `1/n`
//! factor, so `idft(dft(x)) == x`. Block framing follows the overlap-save
//! convention used by both filter banks: a block of length `L` keeps its
//! central `L_S` samples, with `L_L = ceil((L - L_S)/2)` leading and
//! `L_T = floor((L - L_S)/2)` tailing overlap samples.

use std::cell::RefCell;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

pub type C64 = Complex64;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(n)
        } else {
            p.plan_fft_forward(n)
        }
    })
}

/// In-place unnormalized forward DFT. Empty buffers are left untouched.
pub fn fft_in_place(buf: &mut [C64]) {
    if !buf.is_empty() {
        plan(buf.len(), false).process(buf);
    }
}

/// In-place inverse DFT including the `1/n` scaling.
pub fn ifft_in_place(buf: &mut [C64]) {
    if buf.is_empty() {
        return;
    }
    plan(buf.len(), true).process(buf);
    let scale = 1.0 / buf.len() as f64;
    for v in buf.iter_mut() {
        *v *= scale;
    }
}

/// Unnormalized forward DFT, `X[k] = sum_n x[n] exp(-i 2 pi k n / len)`.
pub fn dft(x: &[C64]) -> Result<Vec<C64>> {
    if x.is_empty() {
        return Err(Error::InvalidSize(0));
    }
    let mut out = x.to_vec();
    fft_in_place(&mut out);
    Ok(out)
}

/// Inverse DFT with `1/n` normalization.
pub fn idft(x: &[C64]) -> Result<Vec<C64>> {
    if x.is_empty() {
        return Err(Error::InvalidSize(0));
    }
    let mut out = x.to_vec();
    ifft_in_place(&mut out);
    Ok(out)
}

/// Circular left shift by `k` positions: `out[i] = x[(i + k) mod n]`.
pub fn circshift_left(x: &[C64], k: usize) -> Vec<C64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    (0..n).map(|i| x[(i + k) % n]).collect()
}

/// Leading and tailing overlap lengths for a block of `l` samples that keeps `ls`.
pub fn overlap_split(l: usize, ls: usize) -> (usize, usize) {
    let o = l - ls;
    (o.div_ceil(2), o / 2)
}

/// One overlap-save block cut from a stream.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockFrame {
    /// Global block index, starting at 0.
    pub index: usize,
    pub samples: Vec<C64>,
    pub lead: usize,
    pub tail: usize,
}

/// Cut `x` into overlapping blocks of `l` samples advancing by `ls`.
///
/// Block `r` starts at stream sample `r * ls - lead`; samples outside the
/// stream are zero. The saved central region of block `r` is exactly stream
/// samples `[r * ls, (r + 1) * ls)`, so `ceil(len / ls)` blocks cover the
/// whole stream.
pub fn segment_stream(x: &[C64], l: usize, ls: usize) -> Result<Vec<BlockFrame>> {
    if ls == 0 || l == 0 {
        return Err(Error::InvalidSize(0));
    }
    if ls > l {
        return Err(Error::InvalidOverlap { l, ls });
    }
    let (lead, tail) = overlap_split(l, ls);
    let count = x.len().div_ceil(ls);
    let blocks = (0..count)
        .map(|r| {
            let start = (r * ls) as isize - lead as isize;
            let samples = (0..l as isize)
                .map(|i| {
                    let t = start + i;
                    if t >= 0 && (t as usize) < x.len() {
                        x[t as usize]
                    } else {
                        C64::new(0.0, 0.0)
                    }
                })
                .collect();
            BlockFrame {
                index: r,
                samples,
                lead,
                tail,
            }
        })
        .collect();
    Ok(blocks)
}

/// Concatenate the central `ns` samples of each block (overlap-save output).
pub fn concat_overlap_save<B: AsRef<[C64]>>(blocks: &[B], ns: usize) -> Result<Vec<C64>> {
    let Some(first) = blocks.first() else {
        return Ok(Vec::new());
    };
    let n = first.as_ref().len();
    if ns > n {
        return Err(Error::InvalidOverlap { l: n, ls: ns });
    }
    let (lead, _) = overlap_split(n, ns);
    let mut out = Vec::with_capacity(blocks.len() * ns);
    for (r, b) in blocks.iter().enumerate() {
        let b = b.as_ref();
        if b.len() != n {
            return Err(Error::Framing(format!(
                "block {r} has {} samples, expected {n}",
                b.len()
            )));
        }
        out.extend_from_slice(&b[lead..lead + ns]);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn direct_dft(x: &[C64]) -> Vec<C64> {
        let n = x.len();
        (0..n)
            .map(|k| {
                x.iter()
                    .enumerate()
                    .map(|(t, v)| {
                        let a = -2.0 * std::f64::consts::PI * (k * t % n) as f64 / n as f64;
                        v * C64::from_polar(1.0, a)
                    })
                    .sum()
            })
            .collect()
    }

    #[test]
    fn impulse_and_constant() {
        let y = dft(&[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]).unwrap();
        assert!(y.iter().all(|v| (v - c(1.0, 0.0)).norm() < 1e-15));
        let y = dft(&[c(1.0, 0.0); 4]).unwrap();
        assert!((y[0] - c(4.0, 0.0)).norm() < 1e-15);
        assert!(y[1..].iter().all(|v| v.norm() < 1e-15));
    }

    #[test]
    fn matches_direct_sum() {
        let x: Vec<C64> = (0..16)
            .map(|i| c((i as f64 * 0.7).sin(), (i as f64 * 1.3).cos() - 0.2))
            .collect();
        let fast = dft(&x).unwrap();
        let slow = direct_dft(&x);
        let scale = slow.iter().map(|v| v.norm()).fold(0.0, f64::max);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).norm() <= 1e-12 * scale);
        }
    }

    #[test]
    fn empty_input_rejected() {
        assert_eq!(dft(&[]), Err(Error::InvalidSize(0)));
        assert_eq!(idft(&[]), Err(Error::InvalidSize(0)));
    }

    #[test]
    fn framing_hand_example() {
        let x: Vec<C64> = (1..=6).map(|v| c(v as f64, 0.0)).collect();
        let blocks = segment_stream(&x, 4, 2).unwrap();
        let re: Vec<Vec<f64>> = blocks
            .iter()
            .map(|b| b.samples.iter().map(|v| v.re).collect())
            .collect();
        assert_eq!(
            re,
            vec![
                vec![0.0, 1.0, 2.0, 3.0],
                vec![2.0, 3.0, 4.0, 5.0],
                vec![4.0, 5.0, 6.0, 0.0]
            ]
        );
        assert_eq!((blocks[0].lead, blocks[0].tail), (1, 1));
    }

    #[test]
    fn framing_counts() {
        let x = vec![c(0.0, 0.0); 1096];
        assert_eq!(segment_stream(&x, 128, 64).unwrap().len(), 18);
        let x = vec![c(1.0, 0.0); 12];
        let blocks = segment_stream(&x, 3, 3).unwrap();
        assert_eq!(blocks.len(), 4);
        assert!(blocks.iter().all(|b| b.samples.iter().all(|v| v.re == 1.0)));
        assert_eq!(
            segment_stream(&x, 2, 3),
            Err(Error::InvalidOverlap { l: 2, ls: 3 })
        );
    }

    #[test]
    fn concat_selects_center() {
        let b: Vec<C64> = (0..8).map(|v| c(v as f64, 0.0)).collect();
        let out = concat_overlap_save(&[b.clone()], 4).unwrap();
        assert_eq!(out.iter().map(|v| v.re).collect::<Vec<_>>(), vec![2.0, 3.0, 4.0, 5.0]);
        let out = concat_overlap_save(&[b.clone(), b.clone()], 8).unwrap();
        assert_eq!(out.len(), 16);
        let short = vec![c(0.0, 0.0); 7];
        assert!(matches!(
            concat_overlap_save(&[b, short], 4),
            Err(Error::Framing(_))
        ));
    }

    proptest! {
        #[test]
        fn parseval_and_inverse(v in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..64)) {
            let x: Vec<C64> = v.iter().map(|&(a, b)| c(a, b)).collect();
            let y = dft(&x).unwrap();
            let ex: f64 = x.iter().map(|v| v.norm_sqr()).sum();
            let ey: f64 = y.iter().map(|v| v.norm_sqr()).sum();
            prop_assert!((ey - x.len() as f64 * ex).abs() <= 1e-10 * (x.len() as f64 * ex).max(1e-300));
            let back = idft(&y).unwrap();
            let scale = ex.sqrt().max(1e-300);
            for (a, b) in back.iter().zip(&x) {
                prop_assert!((a - b).norm() <= 1e-12 * scale.max(1.0));
            }
        }

        #[test]
        fn segment_identity_concat_roundtrip(ls in 1usize..40, extra in 0usize..40, len in 1usize..300) {
            let l = ls + extra;
            let x: Vec<C64> = (0..len).map(|i| c(i as f64, -(i as f64))).collect();
            let blocks = segment_stream(&x, l, ls).unwrap();
            let samples: Vec<Vec<C64>> = blocks.into_iter().map(|b| b.samples).collect();
            let y = concat_overlap_save(&samples, ls).unwrap();
            prop_assert!(y.len() >= len);
            for i in 0..len {
                prop_assert!((y[i] - x[i]).norm() <= 1e-12);
            }
        }
    }
}
