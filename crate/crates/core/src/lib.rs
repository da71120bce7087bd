//! Few-mode model of a plasmonic antenna coupled to a whispering-gallery cavity
//! whose counter-propagating modes are chirally coupled by a mirror.

pub mod commands;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod export;
pub mod fit;
pub mod linalg;
pub mod params;
pub mod presets;
pub mod quantum_yield;
pub mod response;
pub mod scatter;
pub mod spectrum;
pub mod sweep;
pub mod units;

pub use error::{Error, Result};
pub use params::{Couplings, Drive, DriveTarget, Emitter, MirrorConfig, PhotonicMode, PlasmonMode, SystemParams};
pub use spectrum::{ComplexSpectrum, C64};
