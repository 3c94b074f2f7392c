//! CP-OFDM modulation and demodulation on the low-rate grid.
//!
//! The IFFT carries the `1/L_OFDM` factor and the receiver DFT is
//! unnormalized, so a flat channel returns the transmitted symbols.

use crate::error::{Error, Result};
use crate::ofdm::OfdmNumerology;
use crate::transforms::{fft_in_place, ifft_in_place, C64};

/// One OFDM symbol with a CP of `cp` samples.
pub fn modulate_symbol(values: &[C64], num: &OfdmNumerology, cp: usize) -> Result<Vec<C64>> {
    if values.len() != num.active {
        return Err(Error::Allocation(format!(
            "{} values for {} active subcarriers",
            values.len(),
            num.active
        )));
    }
    let l = num.l_ofdm;
    let mut body = vec![C64::new(0.0, 0.0); l];
    for (&k, &v) in num.active_bins().iter().zip(values) {
        body[k] = v;
    }
    ifft_in_place(&mut body);
    let mut out = Vec::with_capacity(cp + l);
    // a CP longer than the symbol wraps around several times
    for j in 0..cp {
        out.push(body[(l - cp % l + j) % l]);
    }
    out.extend_from_slice(&body);
    Ok(out)
}

/// Modulates consecutive symbols; `qam` holds `L_ACT` values per symbol and
/// `first` is the position of the first symbol within its subframe.
pub fn modulate(qam: &[C64], num: &OfdmNumerology, first: usize) -> Result<Vec<C64>> {
    if qam.len() % num.active != 0 {
        return Err(Error::Allocation(format!(
            "{} symbols are not a multiple of {} active subcarriers",
            qam.len(),
            num.active
        )));
    }
    let mut out = Vec::new();
    for (i, chunk) in qam.chunks(num.active).enumerate() {
        out.extend(modulate_symbol(chunk, num, num.cp_len(first + i))?);
    }
    Ok(out)
}

/// DFT of one `L_OFDM` window that starts `advance` samples before the end
/// of the CP, with the resulting phase slope removed.
pub fn demodulate_symbol(window: &[C64], num: &OfdmNumerology, advance: usize) -> Result<Vec<C64>> {
    let l = num.l_ofdm;
    if window.len() != l {
        return Err(Error::Framing(format!("window of {} samples, expected {l}", window.len())));
    }
    let mut buf = window.to_vec();
    fft_in_place(&mut buf);
    Ok(num
        .active_bins()
        .iter()
        .map(|&k| {
            let turn = ((k * advance) % l) as f64 / l as f64;
            buf[k] * C64::from_polar(1.0, 2.0 * std::f64::consts::PI * turn)
        })
        .collect())
}

/// Demodulates every complete symbol of `stream`. The FFT window starts
/// `window_offset` samples before the end of each CP, `0 <= window_offset <= L_CP`.
pub fn demodulate(
    stream: &[C64],
    num: &OfdmNumerology,
    window_offset: usize,
    first: usize,
) -> Result<Vec<C64>> {
    if window_offset > num.l_cp {
        return Err(Error::OutOfRange(format!(
            "window offset {window_offset} outside 0..={}",
            num.l_cp
        )));
    }
    let mut out = Vec::new();
    let mut t = 0;
    let mut i = first;
    loop {
        let cp = num.cp_len(i);
        if t + cp + num.l_ofdm > stream.len() {
            break;
        }
        let s = t + cp - window_offset;
        out.extend(demodulate_symbol(&stream[s..s + num.l_ofdm], num, window_offset)?);
        t += cp + num.l_ofdm;
        i += 1;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ofdm::ActiveMapping;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn qpsk(rng: &mut ChaCha8Rng, n: usize) -> Vec<C64> {
        let a = std::f64::consts::FRAC_1_SQRT_2;
        (0..n)
            .map(|_| C64::new(if rng.gen() { a } else { -a }, if rng.gen() { a } else { -a }))
            .collect()
    }

    #[test]
    fn cp_is_tail_copy() {
        let num = OfdmNumerology::new(4, 1, 0, 1, 4, 4).unwrap();
        let y = modulate(&[C64::new(1.0, 0.0)], &num, 1).unwrap();
        let x = crate::transforms::idft(&[1.0, 0.0, 0.0, 0.0].map(|v| C64::new(v, 0.0))).unwrap();
        assert_eq!(y, vec![x[3], x[0], x[1], x[2], x[3]]);
    }

    #[test]
    fn table_row_lengths() {
        let num = OfdmNumerology::table_row(15, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let y = modulate(&qpsk(&mut rng, 24), &num, 1).unwrap();
        assert_eq!(y.len(), 2 * 137);
        let y = modulate(&qpsk(&mut rng, 12), &num, 0).unwrap();
        assert_eq!(y.len(), 138);
    }

    #[test]
    fn round_trip_every_row() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for (scs, prbs) in [(15, 1), (15, 4), (15, 50), (30, 1), (30, 2), (30, 25)] {
            for mapping in [ActiveMapping::Contiguous, ActiveMapping::NullDc] {
                let num = OfdmNumerology::table_row(scs, prbs)
                    .unwrap()
                    .with_mapping(mapping)
                    .unwrap();
                let qam = qpsk(&mut rng, num.active * 9);
                let y = modulate(&qam, &num, 0).unwrap();
                for off in [0, num.l_cp / 2, num.l_cp] {
                    let z = demodulate(&y, &num, off, 0).unwrap();
                    assert_eq!(z.len(), qam.len());
                    for (a, b) in qam.iter().zip(&z) {
                        assert!((a - b).norm() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn offset_out_of_range() {
        let num = OfdmNumerology::table_row(15, 1).unwrap();
        assert!(matches!(demodulate(&[], &num, 10, 0), Err(Error::OutOfRange(_))));
    }

    #[test]
    fn two_tap_channel_is_per_bin_gain() {
        let num = OfdmNumerology::new(64, 8, 0, 40, 64, 64).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let qam = qpsk(&mut rng, 40 * 4);
        let y = modulate(&qam, &num, 1).unwrap();
        let taps = [C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.5, -0.2)];
        let mut h = vec![C64::new(0.0, 0.0); 64];
        h[..3].copy_from_slice(&taps);
        let hf = crate::transforms::dft(&h).unwrap();
        let mut ych = vec![C64::new(0.0, 0.0); y.len()];
        for (i, v) in y.iter().enumerate() {
            for (j, t) in taps.iter().enumerate() {
                if i + j < ych.len() {
                    ych[i + j] += v * t;
                }
            }
        }
        let z = demodulate(&ych, &num, 0, 1).unwrap();
        let bins = num.active_bins();
        for (s, (a, b)) in qam.iter().zip(&z).enumerate() {
            let k = bins[s % 40];
            assert!((a * hf[k] - b).norm() < 1e-9);
        }
    }
}
