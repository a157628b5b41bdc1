//! Echo state reservoirs whose recurrent weights come from a 2D
//! finite-difference wave simulation, trained to anticipate beats.
//!
//! The pieces, bottom up:
//!
//! - [`grid`], [`fields`], [`fdtd`]: the staggered wave grid, its speed and
//!   damping fields, and the explicit leapfrog step.
//! - [`coupling`]: that step written as a sparse matrix `A`, and the
//!   reservoir weights `W` derived from it.
//! - [`reservoir`]: the leaky-tanh reservoir driven at the fast row.
//! - [`readout`]: the linear readout and its SGD training.
//! - [`normalize`], [`adaptation`]: online speed and damping adaptation.
//! - [`signals`], [`eval`]: beat signals, timing metrics, spectra.
//! - [`baseline`]: the random sparse reservoir used for comparison.
//! - [`persist`]: versioned model files.

pub mod adaptation;
pub mod baseline;
pub mod coupling;
pub mod error;
pub mod eval;
pub mod fdtd;
pub mod fields;
pub mod grid;
pub mod normalize;
pub mod persist;
pub mod readout;
pub mod reservoir;
pub mod rng;
pub mod signals;
pub mod sparse;
pub mod spectral;

pub use error::{Error, Result};
pub use grid::{Boundary, GridSpec, KConvention, WaveState};
pub use readout::Readout;
pub use reservoir::{ReservoirModel, ReservoirParams};
pub use signals::Signal;

/// The guide's code blocks, compiled and run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/wave-grid.md")]
    mod wave_grid {}
    #[doc = include_str!("../../../book/src/reservoir.md")]
    mod reservoir {}
    #[doc = include_str!("../../../book/src/readout.md")]
    mod readout {}
    #[doc = include_str!("../../../book/src/adaptation.md")]
    mod adaptation {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
