//! DFT-spread precoding with unitary scaling.

use crate::error::Result;
use crate::transforms::{dft, idft, C64};

/// Forward DFT of a block of `K` symbols scaled by `1 / sqrt(K)`.
pub fn dft_spread(block: &[C64]) -> Result<Vec<C64>> {
    let scale = 1.0 / (block.len() as f64).sqrt();
    Ok(dft(block)?.into_iter().map(|v| v * scale).collect())
}

/// Exact inverse of [`dft_spread`].
pub fn dft_despread(freq: &[C64]) -> Result<Vec<C64>> {
    let scale = (freq.len() as f64).sqrt();
    Ok(idft(freq)?.into_iter().map(|v| v * scale).collect())
}
