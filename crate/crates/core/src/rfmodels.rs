//! Memoryless power amplifier models and drive-level accounting.
//!
//! Complex samples are envelope voltages across 50 ohm, so a sample `x`
//! carries `|x|^2 / 100` watts. [`RappPa`] is the modified Rapp model used
//! for the downlink, [`PolyPa`] the order-nine polynomial fitted to an
//! uplink amplifier, which works on instantaneous power in dBm.

use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::transforms::C64;

/// Load resistance in ohm.
pub const LOAD_OHM: f64 = 50.0;

/// Power of envelope amplitude `a` in dBm.
pub fn amplitude_to_dbm(a: f64) -> f64 {
    10.0 * (a * a / (2.0 * LOAD_OHM)).max(1e-300).log10() + 30.0
}

/// Envelope amplitude with power `dbm`.
pub fn dbm_to_amplitude(dbm: f64) -> f64 {
    (2.0 * LOAD_OHM * 10f64.powf((dbm - 30.0) / 10.0)).sqrt()
}

/// Mean power of a block in dBm.
pub fn mean_power_dbm(x: &[C64]) -> f64 {
    let p = x.iter().map(|v| v.norm_sqr()).sum::<f64>() / x.len().max(1) as f64;
    10.0 * (p / (2.0 * LOAD_OHM)).max(1e-300).log10() + 30.0
}

/// Modified Rapp model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RappPa {
    pub g: f64,
    pub v_sat: f64,
    pub p: f64,
    pub q: f64,
    pub a: f64,
    pub b: f64,
}

impl Default for RappPa {
    fn default() -> Self {
        RappPa { g: 1.0, v_sat: 239.6, p: 3.0, q: 5.0, a: -0.14, b: 1.2 }
    }
}

impl RappPa {
    pub fn am_am(&self, x: f64) -> f64 {
        let r = (self.g * x / self.v_sat).abs();
        self.g * x / (1.0 + r.powf(2.0 * self.p)).powf(1.0 / (2.0 * self.p))
    }

    /// Added phase in radians.
    pub fn am_pm(&self, x: f64) -> f64 {
        let r = (self.g * x / self.v_sat).abs();
        let rb = (self.g * x / (self.b * self.v_sat)).abs();
        self.a * r.powf(self.q) / (1.0 + rb.powf(self.q))
    }

    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        x.iter()
            .map(|v| {
                let a = v.norm();
                if a == 0.0 {
                    return *v;
                }
                C64::from_polar(self.am_am(a), v.arg() + self.am_pm(a))
            })
            .collect()
    }

    /// Input power in dBm where the gain has dropped by 1 dB.
    pub fn p1db_input_dbm(&self) -> f64 {
        let drop = |a: f64| 20.0 * (self.g * a / self.am_am(a)).log10() - 1.0;
        let (mut lo, mut hi) = (1e-3 * self.v_sat, 100.0 * self.v_sat);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if drop(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        amplitude_to_dbm(0.5 * (lo + hi))
    }
}

/// AM-AM coefficients, highest order first; input dBm to output dBm.
pub const POLY_AM: [f64; 10] = [
    7.9726e-12, 1.2771e-9, 8.2526e-8, 2.6615e-6, 3.9727e-5, 2.7715e-5, -7.1100e-3, -7.9183e-2, 8.2921e-1,
    27.3535,
];

/// AM-PM coefficients, highest order first; input dBm to degrees.
pub const POLY_PM: [f64; 10] = [
    9.8591e-11, 1.3544e-8, 7.2970e-7, 1.8757e-5, 1.9730e-4, -7.5352e-4, -3.6477e-2, -2.7752e-1, -1.6672e-2,
    79.1553,
];

/// Validity range of [`PolyPa`] in input dBm.
pub const POLY_RANGE_DBM: (f64, f64) = (-30.0, 9.0);

fn horner(c: &[f64], x: f64) -> f64 {
    c.iter().fold(0.0, |acc, &k| acc * x + k)
}

/// Order-nine polynomial model. Samples below the valid range continue
/// linearly with the gain and phase at its lower end; samples above it are
/// held at the upper end. Both count as clamped. The added phase is taken
/// relative to its value at the lower end, so small signals pass unrotated.
#[derive(Debug, Default)]
pub struct PolyPa {
    clamped: AtomicU64,
}

impl Clone for PolyPa {
    fn clone(&self) -> Self {
        PolyPa { clamped: AtomicU64::new(self.clamped()) }
    }
}

impl PolyPa {
    pub fn new() -> Self {
        Self::default()
    }

    /// Output dBm for input dBm, on the valid range.
    pub fn am_am_dbm(&self, dbm: f64) -> f64 {
        horner(&POLY_AM, dbm)
    }

    /// Phase in degrees for input dBm, on the valid range.
    pub fn am_pm_deg(&self, dbm: f64) -> f64 {
        horner(&POLY_PM, dbm)
    }

    /// Samples clamped since construction or the last reset.
    pub fn clamped(&self) -> u64 {
        self.clamped.load(Ordering::Relaxed)
    }

    pub fn reset_clamped(&self) {
        self.clamped.store(0, Ordering::Relaxed);
    }

    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        let (lo, hi) = POLY_RANGE_DBM;
        let phase0 = self.am_pm_deg(lo);
        let mut clamped = 0;
        let out = x
            .iter()
            .map(|v| {
                let a = v.norm();
                if a == 0.0 {
                    return *v;
                }
                let din = amplitude_to_dbm(a);
                let (dout, deg) = if din < lo {
                    clamped += 1;
                    (self.am_am_dbm(lo) + din - lo, self.am_pm_deg(lo))
                } else if din > hi {
                    clamped += 1;
                    (self.am_am_dbm(hi), self.am_pm_deg(hi))
                } else {
                    (self.am_am_dbm(din), self.am_pm_deg(din))
                };
                // phase relative to small-signal operation
                C64::from_polar(dbm_to_amplitude(dout), v.arg() + (deg - phase0).to_radians())
            })
            .collect();
        self.clamped.fetch_add(clamped, Ordering::Relaxed);
        out
    }

    /// Input power in dBm where the gain has dropped 1 dB below its value
    /// at the bottom of the valid range.
    pub fn p1db_input_dbm(&self) -> f64 {
        let (lo, hi) = POLY_RANGE_DBM;
        let g0 = self.am_am_dbm(lo) - lo;
        let drop = |d: f64| g0 - (self.am_am_dbm(d) - d) - 1.0;
        let (mut a, mut b) = (lo, hi);
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if drop(mid) < 0.0 {
                a = mid;
            } else {
                b = mid;
            }
        }
        0.5 * (a + b)
    }
}

/// Amplifier selection.
#[derive(Debug, Clone, Default)]
pub enum PaModel {
    #[default]
    None,
    Rapp(RappPa),
    Poly(PolyPa),
}

impl PaModel {
    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        match self {
            PaModel::None => x.to_vec(),
            PaModel::Rapp(pa) => pa.apply(x),
            PaModel::Poly(pa) => pa.apply(x),
        }
    }

    /// Samples the model clamped so far.
    pub fn clamped(&self) -> u64 {
        match self {
            PaModel::Poly(pa) => pa.clamped(),
            _ => 0,
        }
    }

    /// Linear amplitude gain for small inputs.
    pub fn small_signal_gain(&self) -> f64 {
        match self {
            PaModel::None => 1.0,
            PaModel::Rapp(pa) => pa.g,
            PaModel::Poly(pa) => {
                let lo = POLY_RANGE_DBM.0;
                10f64.powf((pa.am_am_dbm(lo) - lo) / 20.0)
            }
        }
    }

    /// Input-referred 1 dB compression point, dBm.
    pub fn p1db_input_dbm(&self) -> Option<f64> {
        match self {
            PaModel::None => None,
            PaModel::Rapp(pa) => Some(pa.p1db_input_dbm()),
            PaModel::Poly(pa) => Some(pa.p1db_input_dbm()),
        }
    }
}

/// Scales `x` to a mean power of `reference_dbm - ibo_db`. An infinite
/// back-off gives silence.
pub fn apply_ibo(x: &[C64], ibo_db: f64, reference_dbm: f64) -> Result<Vec<C64>> {
    if ibo_db.is_nan() || !reference_dbm.is_finite() {
        return Err(Error::Config("back-off and reference must be numbers".into()));
    }
    let p = x.iter().map(|v| v.norm_sqr()).sum::<f64>() / x.len().max(1) as f64;
    if p == 0.0 {
        return Err(Error::Config("cannot scale a silent signal".into()));
    }
    let target = dbm_to_amplitude(reference_dbm - ibo_db).powi(2);
    let g = (target / p).sqrt();
    Ok(x.iter().map(|v| v * g).collect())
}
