//! Frequency-domain weight masks.
//!
//! Masks are stored in FFT-shifted order: index `q` of the diagonal
//! weights the short-transform bin with signed offset `q - L/2` from the
//! subband center. The layout is zeros, rising transition weights, `L_ACT`
//! ones, the mirrored transition weights and zeros again. With an odd
//! number of free bins the extra zero goes to the low-frequency side.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightMask {
    /// Short transform length.
    pub l: usize,
    /// Number of unit-weight passband bins.
    pub active: usize,
    /// Transition weights, ordered from the stopband toward the passband.
    pub d: Vec<f64>,
}

impl WeightMask {
    pub fn new(l: usize, active: usize, d: Vec<f64>) -> Result<Self> {
        let m = WeightMask { l, active, d };
        m.validate()?;
        Ok(m)
    }

    /// Rectangular mask without transition weights.
    pub fn rectangular(l: usize, active: usize) -> Result<Self> {
        Self::new(l, active, Vec::new())
    }

    /// Raised-cosine ramp `d_i = sin^2(pi (i + 0.5) / (2 p))`.
    pub fn raised_cosine(l: usize, active: usize, tbw: usize) -> Result<Self> {
        Self::new(l, active, raised_cosine_ramp(tbw))
    }

    pub fn validate(&self) -> Result<()> {
        if self.l == 0 || self.l % 2 != 0 {
            return Err(Error::Mask(format!("mask length {} must be even and positive", self.l)));
        }
        if self.active == 0 {
            return Err(Error::Mask("mask needs at least one active bin".into()));
        }
        if self.active + 2 * self.tbw() > self.l {
            return Err(Error::Mask(format!(
                "L_ACT + 2 L_TBW = {} exceeds L = {}",
                self.active + 2 * self.tbw(),
                self.l
            )));
        }
        if let Some(w) = self.d.iter().find(|w| !(0.0..=1.0).contains(*w)) {
            return Err(Error::Mask(format!("transition weight {w} outside [0, 1]")));
        }
        Ok(())
    }

    /// Transition band width in bins per side.
    pub fn tbw(&self) -> usize {
        self.d.len()
    }

    /// Index of the first passband bin in shifted order.
    pub fn first_active(&self) -> usize {
        (self.l - self.active).div_ceil(2)
    }

    /// The full diagonal in FFT-shifted order.
    pub fn diagonal(&self) -> Vec<f64> {
        let mut coef = vec![1.0];
        coef.extend_from_slice(&self.d);
        let mut out = vec![0.0; self.l];
        for (a, idx) in self.basis_indices().iter().enumerate() {
            for &q in idx {
                out[q] = coef[a];
            }
        }
        out
    }

    /// Shifted-order positions carrying each free coefficient.
    ///
    /// Entry 0 lists the passband bins, entry `i + 1` the two bins holding
    /// `d_i`. The diagonal equals the sum of these indicator vectors scaled
    /// by `[1, d_0, .., d_{p-1}]`.
    pub fn basis_indices(&self) -> Vec<Vec<usize>> {
        let first = self.first_active();
        let p = self.tbw();
        let mut out = vec![(first..first + self.active).collect::<Vec<_>>()];
        for i in 0..p {
            let lo = first - p + i;
            let hi = first + self.active + p - 1 - i;
            out.push(vec![lo, hi]);
        }
        out
    }

    /// Indicator vectors of [`basis_indices`](Self::basis_indices).
    pub fn basis(&self) -> Vec<Vec<f64>> {
        self.basis_indices()
            .into_iter()
            .map(|idx| {
                let mut v = vec![0.0; self.l];
                for q in idx {
                    v[q] = 1.0;
                }
                v
            })
            .collect()
    }

    /// Coefficients multiplying [`basis`](Self::basis): `[1, d_0, ..]`.
    pub fn coefficients(&self) -> Vec<f64> {
        let mut c = vec![1.0];
        c.extend_from_slice(&self.d);
        c
    }

    /// Same layout with new transition weights.
    pub fn with_weights(&self, d: Vec<f64>) -> Result<Self> {
        Self::new(self.l, self.active, d)
    }
}

/// Raised-cosine transition ramp of `p` weights.
pub fn raised_cosine_ramp(p: usize) -> Vec<f64> {
    (0..p)
        .map(|i| {
            let x = std::f64::consts::PI * (i as f64 + 0.5) / (2.0 * p as f64);
            x.sin().powi(2)
        })
        .collect()
}
