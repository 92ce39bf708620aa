//! Simulation and calculator toolkit for certifying entangled two-photon
//! absorption (ETPA): SPDC joint spectra, a two-photon notch absorber,
//! Hong-Ou-Mandel interferograms, photon budgets and detector-noise limits.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod absorption;
pub mod biphoton;
pub mod budget;
pub mod constants;
pub mod dispersion;
pub mod error;
pub mod hom;
pub mod noisesim;
pub mod samples;
pub mod scenarios;

pub use error::{EtpaError, Result};
