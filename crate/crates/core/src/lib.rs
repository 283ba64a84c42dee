//! Coherent scattering of a conduction electron off two electrons bound in
//! a double quantum dot.
//!
//! The pipeline runs from the device potential ([`model`]) to the bound
//! two-particle states that serve as qubits ([`bound`]), through the
//! three-particle open-boundary solve ([`qtbm`]) and the reduced density
//! matrix of the dot pair ([`qinfo`]), to repeated injection ([`current`]).
//! [`sweep`] and [`figures`] drive energy scans and write result files.
//!
//! The guide in `book/` walks through the physics with runnable examples.

pub mod bound;
pub mod config;
pub mod current;
pub mod error;
pub mod figures;
pub mod fit;
pub mod model;
pub mod nested;
pub mod qinfo;
pub mod qtbm;
pub mod sweep;

pub use error::{Error, Result};

// The guide's code blocks run as doc-tests of this crate.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/device.md")]
    mod device {}
    #[doc = include_str!("../../../book/src/bound-states.md")]
    mod bound_states {}
    #[doc = include_str!("../../../book/src/scattering.md")]
    mod scattering {}
    #[doc = include_str!("../../../book/src/entanglement.md")]
    mod entanglement {}
    #[doc = include_str!("../../../book/src/current.md")]
    mod current {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
