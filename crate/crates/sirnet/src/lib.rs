//! Files, experiment harness and plotting around `sirnet-core`.

pub mod experiments;
pub mod io;
pub mod svg;

pub use sirnet_core as core;
