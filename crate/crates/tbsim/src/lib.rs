//! Simulation and analysis of heralded time-bin entanglement between an
//! optical photon and a phonon traveling in an acoustic waveguide.

pub mod error;
pub mod model;

pub use error::{Error, Result};
pub mod circuit;
pub mod fock;
pub mod gaussian;
pub mod linalg;
pub mod outcome;
pub mod protocol;
pub mod analysis;
pub mod waveguide;
pub mod experiments;

// Guide chapters, compiled so their snippets run as doctests.
#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../book/src/running.md")]
    mod running {}
    #[doc = include_str!("../../../book/src/engines.md")]
    mod engines {}
    #[doc = include_str!("../../../book/src/protocol.md")]
    mod protocol {}
    #[doc = include_str!("../../../book/src/noise.md")]
    mod noise {}
    #[doc = include_str!("../../../book/src/waveguide.md")]
    mod waveguide {}
    #[doc = include_str!("../../../book/src/analysis.md")]
    mod analysis {}
}
