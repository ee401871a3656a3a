//! Diversity analysis and block-mapping design for protograph LDPC codes on
//! block-fading channels.
//!
//! - [`protograph`]: base graphs, the shipped 5G-NR BG1/BG2 data, rate selection.
//! - [`fading`], [`dive`]: Boolean fading functions and diversity evolution.
//! - [`mapping`]: block mappings and their file format.
//! - [`mapsearch`]: greedy search for diversity-aligned mappings (two blocks).
//! - [`qclift`]: circulant lifting, encoding, alist export.
//! - [`simkit`]: Rayleigh block-fading Monte Carlo with a min-sum decoder.

pub mod dive;
pub mod error;
pub mod fading;
pub mod mapping;
pub mod mapsearch;
pub mod protograph;
pub mod qclift;
pub mod simkit;

pub use error::{Error, Result};
