//! CP-OFDM numerology, modulation and the reference waveform processors.
//!
//! An [`OfdmNumerology`] describes one subband on its own low-rate grid:
//! the IFFT length `L_OFDM`, the CP length `L_CP` and the short transform
//! length `L` of the filter bank that lifts it to the common high rate
//! with long transform length `N`. Symbols are grouped in subframes of
//! `7 * 2^eta` symbols whose first CP is extended so that a subframe lasts
//! exactly `7.5 * N_base` high-rate samples, where `N_base = N_OFDM * 2^eta`.

pub mod filters;
pub mod modem;
pub mod spread;
pub mod wola;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use filters::{dolph_chebyshev, f_ofdm_filter, pre_equalizer, uf_ofdm_filter};
pub use modem::{demodulate, demodulate_symbol, modulate, modulate_symbol};
pub use spread::{dft_despread, dft_spread};
pub use wola::{wola_rx, wola_tx, WolaParams};

/// How the active subcarriers are placed around the subband center.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActiveMapping {
    /// `L_ACT` consecutive bins at offsets `-floor(L_ACT/2) .. ceil(L_ACT/2) - 1`,
    /// the same bins the passband of a weight mask covers.
    #[default]
    Contiguous,
    /// `ceil(L_ACT/2)` bins below and `floor(L_ACT/2)` bins above an unused DC bin.
    NullDc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OfdmNumerology {
    /// Useful symbol length on the low-rate grid.
    pub l_ofdm: usize,
    /// Regular CP length on the low-rate grid.
    pub l_cp: usize,
    /// Subcarrier spacing exponent, `SCS = 2^eta * 15 kHz`.
    pub eta: u32,
    /// Number of active subcarriers.
    pub active: usize,
    /// Extra CP samples of the first symbol of each subframe.
    pub first_cp_ext: usize,
    /// Long transform length of the high-rate side.
    pub n: usize,
    /// Short transform length lifting this numerology to the high rate.
    pub l: usize,
    pub mapping: ActiveMapping,
}

impl OfdmNumerology {
    /// Builds a numerology without first-CP extension.
    pub fn new(l_ofdm: usize, l_cp: usize, eta: u32, active: usize, n: usize, l: usize) -> Result<Self> {
        let num = OfdmNumerology {
            l_ofdm,
            l_cp,
            eta,
            active,
            first_cp_ext: 0,
            n,
            l,
            mapping: ActiveMapping::Contiguous,
        };
        num.validate()?;
        Ok(num)
    }

    /// Sets the first-CP extension that aligns a subframe to
    /// `7.5 * N_base` high-rate samples.
    pub fn aligned(mut self) -> Result<Self> {
        self.first_cp_ext = self.aligned_cp_extension()?;
        Ok(self)
    }

    /// Same numerology with an explicit first-CP extension.
    pub fn with_first_cp_ext(mut self, ext: usize) -> Self {
        self.first_cp_ext = ext;
        self
    }

    pub fn with_mapping(mut self, mapping: ActiveMapping) -> Result<Self> {
        self.mapping = mapping;
        self.validate()?;
        Ok(self)
    }

    /// Rows of the example parametrization table for a 10 MHz carrier
    /// (`N = 1024`): `(scs_khz, prbs)` in
    /// `{(15, 1), (15, 4), (15, 50), (30, 1), (30, 2), (30, 25)}`.
    pub fn table_row(scs_khz: u32, prbs: usize) -> Result<Self> {
        let (eta, l_ofdm, l_cp, l) = match (scs_khz, prbs) {
            (15, 1) | (15, 4) => (0, 128, 9, 128),
            (15, 50) => (0, 1024, 72, 1024),
            (30, 1) | (30, 2) => (1, 128, 9, 256),
            (30, 25) => (1, 512, 36, 1024),
            _ => {
                return Err(Error::Config(format!(
                    "no table entry for {scs_khz} kHz with {prbs} PRBs"
                )))
            }
        };
        Self::new(l_ofdm, l_cp, eta, 12 * prbs, 1024, l)?.aligned()
    }

    pub fn validate(&self) -> Result<()> {
        if self.l_ofdm == 0 || self.l == 0 || self.n == 0 {
            return Err(Error::Config("transform lengths must be positive".into()));
        }
        if self.active == 0 {
            return Err(Error::Allocation("no active subcarriers".into()));
        }
        let limit = match self.mapping {
            ActiveMapping::Contiguous => self.l_ofdm,
            ActiveMapping::NullDc => self.l_ofdm - 1,
        };
        if self.active > limit {
            return Err(Error::Allocation(format!(
                "{} active subcarriers do not fit a {}-point IFFT",
                self.active, self.l_ofdm
            )));
        }
        if self.l_cp > self.l_ofdm {
            return Err(Error::Config(format!(
                "CP length {} exceeds symbol length {}",
                self.l_cp, self.l_ofdm
            )));
        }
        if self.l % self.l_ofdm != 0 {
            return Err(Error::Config(format!(
                "short transform length {} is not a multiple of the IFFT length {}",
                self.l, self.l_ofdm
            )));
        }
        Ok(())
    }

    /// The same allocation on the high-rate grid, with `L = N`.
    pub fn at_high_rate(&self) -> Result<Self> {
        let (n, l) = (self.n, self.l);
        let scale = |v: usize| -> Result<usize> {
            if (v * n) % l != 0 {
                return Err(Error::Config(format!(
                    "{v} low-rate samples are not a whole number of high-rate samples"
                )));
            }
            Ok(v * n / l)
        };
        OfdmNumerology::new(scale(self.l_ofdm)?, scale(self.l_cp)?, self.eta, self.active, n, n)?
            .with_first_cp_ext(scale(self.first_cp_ext)?)
            .with_mapping(self.mapping)
    }

    /// Subcarrier spacing in kHz.
    pub fn scs_khz(&self) -> f64 {
        15.0 * f64::from(1u32 << self.eta)
    }

    /// Symbols per subframe, `7 * 2^eta`.
    pub fn symbols_per_subframe(&self) -> usize {
        7 << self.eta
    }

    /// Spacing of subcarriers in short-transform bins, `L / L_OFDM`.
    pub fn bin_ratio(&self) -> usize {
        self.l / self.l_ofdm
    }

    /// High-rate useful symbol length `N L_OFDM / L`.
    pub fn n_ofdm(&self) -> f64 {
        self.n as f64 * self.l_ofdm as f64 / self.l as f64
    }

    /// High-rate CP length `N L_CP / L`.
    pub fn n_cp(&self) -> f64 {
        self.n as f64 * self.l_cp as f64 / self.l as f64
    }

    /// Overall high-rate symbol duration `N (L_OFDM + L_CP) / L`.
    pub fn n_ovr(&self) -> f64 {
        self.n_ofdm() + self.n_cp()
    }

    /// High-rate samples per subframe, `7.5 * N_OFDM * 2^eta`.
    pub fn subframe_len_high(&self) -> f64 {
        7.5 * self.n_ofdm() * f64::from(1u32 << self.eta)
    }

    fn aligned_cp_extension(&self) -> Result<usize> {
        let target = self.subframe_len_high() * self.l as f64 / self.n as f64;
        let base = (self.symbols_per_subframe() * (self.l_ofdm + self.l_cp)) as f64;
        let ext = target - base;
        if ext < -1e-9 || (ext - ext.round()).abs() > 1e-9 {
            return Err(Error::Framing(format!(
                "subframe of {target} low-rate samples cannot be reached from {base} with an integer first-CP extension"
            )));
        }
        Ok(ext.round() as usize)
    }

    /// CP length of symbol `i` counted from the start of a subframe.
    pub fn cp_len(&self, i: usize) -> usize {
        if i % self.symbols_per_subframe() == 0 {
            self.l_cp + self.first_cp_ext
        } else {
            self.l_cp
        }
    }

    /// Low-rate samples per subframe.
    pub fn subframe_len(&self) -> usize {
        (0..self.symbols_per_subframe())
            .map(|i| self.cp_len(i) + self.l_ofdm)
            .sum()
    }

    /// Start times of `count` symbols beginning with symbol `first` of a
    /// subframe, relative to the start of symbol `first`.
    pub fn symbol_starts(&self, first: usize, count: usize) -> Vec<usize> {
        let mut t = 0;
        (first..first + count)
            .map(|i| {
                let s = t;
                t += self.cp_len(i) + self.l_ofdm;
                s
            })
            .collect()
    }

    /// Signed subcarrier offsets from the subband center, in subcarriers.
    pub fn subcarrier_offsets(&self) -> Vec<i64> {
        let a = self.active as i64;
        match self.mapping {
            ActiveMapping::Contiguous => (-(a / 2)..a - a / 2).collect(),
            ActiveMapping::NullDc => {
                let below = (a + 1) / 2;
                (-below..0).chain(1..=a / 2).collect()
            }
        }
    }

    /// IFFT bin of each active subcarrier.
    pub fn active_bins(&self) -> Vec<usize> {
        let l = self.l_ofdm as i64;
        self.subcarrier_offsets()
            .into_iter()
            .map(|o| o.rem_euclid(l) as usize)
            .collect()
    }
}
