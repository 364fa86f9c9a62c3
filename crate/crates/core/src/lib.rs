//! Dyadic and dyadic-parabolic frequency decompositions, `H^{s,p}_FIO`
//! norms and rough pseudodifferential operators on periodic grids.

pub mod dyadic;
pub mod error;
pub mod family;
pub mod frame;
pub mod harness;
pub mod fourier;
pub mod io;
pub mod norms;
pub mod pseudo;
pub mod symbol;

pub use error::{Error, Result};
pub use fourier::{GridField, GridSpec, SpectralMultiplier, Spectrum, C64};
