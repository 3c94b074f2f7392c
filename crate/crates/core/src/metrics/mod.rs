//! Link-quality figures of the filtered multicarrier chain.
//!
//! [`TmuxModel`] holds frame-averaged response statistics between one
//! transmit and one receive configuration. From it follow the per-subcarrier
//! mean squared errors, the EVM figures and the subband leakage ratio.
//! [`magnitude`] covers the synthesis magnitude response used as the
//! stopband constraint, [`psd`] the empirical spectrum estimate and
//! [`export`] the CSV output.

pub mod export;
pub mod magnitude;
pub mod psd;
pub mod response;
pub mod tmux;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use magnitude::{magnitude_response, FreqGrid, MagnitudeModel, Stopband};
pub use psd::{psd_estimate, Psd};
pub use response::{rx_subcarrier_operator, tx_subcarrier_response, BlockDims};
pub use tmux::{QuadStat, ResponseEntry, SideModel, TmuxModel};

/// Which way errors are attributed to subcarriers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorForm {
    /// Error caused by each transmit subcarrier: its own dispersion plus
    /// everything it leaks onto other receive subcarriers.
    #[default]
    From,
    /// Error observed on each receive subcarrier, as a receiver measures it.
    Into,
}

pub fn to_db(v: f64) -> f64 {
    10.0 * v.max(1e-300).log10()
}

/// Linear MSE of every active subcarrier for mask coefficients `tx_coef`
/// and `rx_coef`. Subcarriers without a partner on the other side are
/// skipped.
pub fn mse_per_subcarrier(model: &TmuxModel, tx_coef: &[f64], rx_coef: &[f64], form: ErrorForm) -> Result<Vec<f64>> {
    let c = model.combine(tx_coef, rx_coef)?;
    let stats = match form {
        ErrorForm::From => &model.from,
        ErrorForm::Into => &model.into,
    };
    let out: Vec<f64> = stats.iter().filter_map(|s| s.mse(&c)).collect();
    if out.is_empty() {
        return Err(Error::Config("no subcarrier is shared by both sides".into()));
    }
    Ok(out)
}

/// Worst subcarrier EVM in dB.
pub fn evm_max(mse: &[f64]) -> f64 {
    to_db(mse.iter().cloned().fold(0.0, f64::max))
}

/// EVM of the mean linear MSE in dB.
pub fn evm_avg(mse: &[f64]) -> f64 {
    to_db(mse.iter().sum::<f64>() / mse.len() as f64)
}

/// Total received power of all transmit subcarriers, per symbol.
pub fn received_power(model: &TmuxModel, tx_coef: &[f64], rx_coef: &[f64]) -> Result<f64> {
    let c = model.combine(tx_coef, rx_coef)?;
    Ok(model.from.iter().map(|s| s.power(&c)).sum())
}

/// Subband leakage ratio in dB: the power `leak` carries from its transmit
/// subband into a foreign receive subband, over the power `own` delivers
/// to the matching receiver.
pub fn sblr(
    leak: &TmuxModel,
    own: &TmuxModel,
    tx_coef: &[f64],
    rx_leak_coef: &[f64],
    rx_own_coef: &[f64],
) -> Result<f64> {
    if leak.tx.cfg != own.tx.cfg || leak.tx.num != own.tx.num {
        return Err(Error::Config("both models must share the transmit side".into()));
    }
    if leak.rx.cfg.center == own.rx.cfg.center && leak.rx.num == own.rx.num && leak.rx.cfg == own.rx.cfg {
        return Err(Error::Config("leakage needs a receive subband other than the own one".into()));
    }
    let pi = received_power(leak, tx_coef, rx_leak_coef)?;
    let ps = received_power(own, tx_coef, rx_own_coef)?;
    Ok(to_db(pi / ps))
}
