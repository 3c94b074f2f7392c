//! Fast-convolution synthesis and analysis filter banks.
//!
//! A synthesis bank takes low-rate subband streams, transforms overlapping
//! blocks with a short DFT of length `L`, weights the bins with a frequency
//! mask, places them around the subband center `c` of a shared long spectrum
//! of length `N` and returns to the time domain with one long inverse DFT per
//! block. The analysis bank is the dual operation. Both exist here in two
//! forms: the streaming engine in [`engine`] and the literal block-matrix
//! model in [`matrix`], which is slow but follows the matrix factorization
//! term by term.
//!
//! Time is absolute on both sides. Block `r` of a bank covers the high-rate
//! output samples `r * N_S .. (r + 1) * N_S` and the low-rate samples
//! `r * L_S .. (r + 1) * L_S`. The per-block phase term tracks the start of
//! the long transform window, which makes every bank a true frequency
//! translator: delaying the input by one low-rate block delays the output
//! by one high-rate block, and the only extra factor is the carrier phase
//! `exp(i 2 pi c N_S / N)` accumulated over that block.

pub mod engine;
pub mod mask;
pub mod matrix;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::transforms::{overlap_split, C64};

pub use engine::{AnalysisBank, Subband, SynthesisBank};
pub use mask::WeightMask;
pub use matrix::{
    analysis_operator, build_analysis_block, build_synthesis_block, impulse_responses,
    synthesis_operator, ImpulseResponse,
};

/// Which side of the transmultiplexer a configuration describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Synthesis,
    Analysis,
}

/// Transform sizes and placement of one subband.
///
/// `l` and `ls` are the short transform length and its non-overlapping part.
/// On the analysis side they play the role of the dual lengths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FcConfig {
    pub n: usize,
    pub ns: usize,
    pub l: usize,
    pub ls: usize,
    pub center: usize,
    pub side: Side,
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl FcConfig {
    /// Builds and validates a configuration.
    pub fn new(n: usize, ns: usize, l: usize, ls: usize, center: usize, side: Side) -> Result<Self> {
        let cfg = FcConfig { n, ns, l, ls, center, side };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Synthesis configuration with `N_S` derived from the overlap of the short side.
    pub fn synthesis(n: usize, l: usize, ls: usize, center: usize) -> Result<Self> {
        Self::derived(n, l, ls, center, Side::Synthesis)
    }

    /// Analysis configuration with `N_S` derived from the overlap of the short side.
    pub fn analysis(n: usize, l: usize, ls: usize, center: usize) -> Result<Self> {
        Self::derived(n, l, ls, center, Side::Analysis)
    }

    fn derived(n: usize, l: usize, ls: usize, center: usize, side: Side) -> Result<Self> {
        if l == 0 || (n * ls) % l != 0 {
            return Err(Error::Config(format!(
                "N * L_S = {} is not a multiple of L = {l}",
                n * ls
            )));
        }
        Self::new(n, n * ls / l, l, ls, center, side)
    }

    /// Checks the rate identity `N / L = N_S / L_S` and the size constraints.
    pub fn validate(&self) -> Result<()> {
        let FcConfig { n, ns, l, ls, center, .. } = *self;
        if n == 0 || l == 0 || ns == 0 || ls == 0 {
            return Err(Error::Config("transform sizes must be positive".into()));
        }
        if l % 2 != 0 {
            return Err(Error::Config(format!("short transform length L = {l} must be even")));
        }
        if n % 2 != 0 {
            return Err(Error::Config(format!("long transform length N = {n} must be even")));
        }
        if ns > n {
            return Err(Error::InvalidOverlap { l: n, ls: ns });
        }
        if ls > l {
            return Err(Error::InvalidOverlap { l, ls });
        }
        if l > n {
            return Err(Error::Config(format!("L = {l} exceeds N = {n}")));
        }
        if n * ls != ns * l {
            return Err(Error::Config(format!(
                "rate identity violated: N / L = {n}/{l} differs from N_S / L_S = {ns}/{ls}"
            )));
        }
        let step = n / gcd(n, ns);
        if l % step != 0 {
            return Err(Error::Config(format!(
                "L = {l} is not a multiple of N / gcd(N, N_S) = {step}"
            )));
        }
        if center >= n {
            return Err(Error::Config(format!("center bin {center} outside 0..{n}")));
        }
        Ok(())
    }

    /// Overlap factor `1 - L_S / L`.
    pub fn overlap_factor(&self) -> f64 {
        1.0 - self.ls as f64 / self.l as f64
    }

    /// Rate conversion factor `N / L` (not necessarily an integer).
    pub fn rate_factor(&self) -> f64 {
        self.n as f64 / self.l as f64
    }

    /// Leading and tailing overlap of the short transform.
    pub fn short_overlap(&self) -> (usize, usize) {
        overlap_split(self.l, self.ls)
    }

    /// Leading and tailing overlap of the long transform.
    pub fn long_overlap(&self) -> (usize, usize) {
        overlap_split(self.n, self.ns)
    }

    /// Long-spectrum bin fed by the FFT-shifted short bin `q`.
    pub fn long_bin(&self, q: usize) -> usize {
        let off = q as i64 - (self.l / 2) as i64;
        (self.center as i64 + off).rem_euclid(self.n as i64) as usize
    }

    /// Same configuration on the other side of the link.
    pub fn with_side(mut self, side: Side) -> Self {
        self.side = side;
        self
    }
}

fn unit_phasor(num: i128, den: i128) -> C64 {
    let frac = num.rem_euclid(den) as f64 / den as f64;
    C64::from_polar(1.0, 2.0 * std::f64::consts::PI * frac)
}

/// Block phase rotation `exp(i 2 pi r c L_S / L)`, evaluated with exact
/// integer arithmetic modulo one cycle.
pub fn phase_rotation(r: i64, cfg: &FcConfig) -> C64 {
    unit_phasor(r as i128 * cfg.center as i128 * cfg.ls as i128, cfg.l as i128)
}

/// Phase applied by the synthesis bank in block `r`.
///
/// Equals [`phase_rotation`] times the constant `exp(-i 2 pi c N_L / N)`, so
/// the rotation refers to the absolute start time `r N_S - N_L` of the long
/// transform window. The analysis bank applies the conjugate.
pub fn block_phase(r: i64, cfg: &FcConfig) -> C64 {
    let (nl, _) = cfg.long_overlap();
    let start = r as i128 * cfg.ns as i128 - nl as i128;
    unit_phasor(cfg.center as i128 * start, cfg.n as i128)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_identity_checked() {
        assert!(FcConfig::new(1024, 512, 128, 64, 0, Side::Synthesis).is_ok());
        let err = FcConfig::new(1024, 512, 128, 60, 0, Side::Synthesis).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert!(FcConfig::new(1024, 768, 128, 96, 3, Side::Analysis).is_ok());
        assert!(FcConfig::new(1024, 512, 127, 64, 0, Side::Synthesis).is_err());
        assert!(FcConfig::new(1024, 512, 128, 64, 1024, Side::Synthesis).is_err());
        assert!(FcConfig::new(8, 6, 4, 3, 0, Side::Synthesis).is_ok());
        // N / gcd(N, N_S) = 4 does not divide L = 2
        assert!(FcConfig::new(8, 6, 2, 1, 0, Side::Synthesis).is_err());
    }

    #[test]
    fn overlap_factor_and_rate() {
        let c = FcConfig::synthesis(1024, 128, 96, 0).unwrap();
        assert_eq!(c.ns, 768);
        assert!((c.overlap_factor() - 0.25).abs() < 1e-15);
        assert!((c.rate_factor() - 8.0).abs() < 1e-15);
    }

    #[test]
    fn phase_rotation_values() {
        let base = FcConfig::synthesis(1024, 128, 64, 0).unwrap();
        for r in 0..10 {
            assert!((phase_rotation(r, &base) - 1.0).norm() < 1e-15);
        }
        let int = FcConfig::synthesis(16, 8, 2, 4).unwrap();
        for r in 0..10 {
            assert!((phase_rotation(r, &int) - 1.0).norm() < 1e-15);
        }
        let c3 = FcConfig::synthesis(1024, 128, 64, 3).unwrap();
        assert!((phase_rotation(1, &c3) + 1.0).norm() < 1e-15);
    }

    #[test]
    fn block_phase_is_offset_rotation() {
        let c = FcConfig::synthesis(1024, 128, 96, 37).unwrap();
        let (nl, _) = c.long_overlap();
        let offset = C64::from_polar(
            1.0,
            -2.0 * std::f64::consts::PI * (37 * nl) as f64 / 1024.0,
        );
        for r in [-3i64, 0, 1, 5, 10_000] {
            let want = phase_rotation(r, &c) * offset;
            assert!((block_phase(r, &c) - want).norm() < 1e-12);
        }
    }
}
