//! Fast-convolution filter banks for subband-filtered CP-OFDM.
//!
//! [`fcfb`] holds the synthesis and analysis banks and their matrix models,
//! [`ofdm`] the numerologies and reference waveforms. [`metrics`] derives
//! EVM and leakage figures from the banks, [`optimizer`] designs the
//! transition weights, [`rfmodels`] and [`linksim`] cover amplifiers and
//! link simulation, and [`complexity`] counts multiplications.

pub mod complexity;
pub mod error;
pub mod fcfb;
pub mod linksim;
pub mod metrics;
pub mod ofdm;
pub mod optimizer;
pub mod rfmodels;
pub mod transforms;

/// Version of this crate, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

// The guide's chapters compiled as doc comments, so `cargo test --doc`
// runs every snippet in the book.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/numerology.md")]
    mod numerology {}
    #[doc = include_str!("../../../book/src/filter-banks.md")]
    mod filter_banks {}
    #[doc = include_str!("../../../book/src/mask-design.md")]
    mod mask_design {}
    #[doc = include_str!("../../../book/src/error-model.md")]
    mod error_model {}
    #[doc = include_str!("../../../book/src/link.md")]
    mod link {}
    #[doc = include_str!("../../../book/src/complexity.md")]
    mod complexity {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
