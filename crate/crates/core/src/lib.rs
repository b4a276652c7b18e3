//! Truncated spectral triples, the quantum double suspension, and the two
//! differential graded algebras attached to a triple: the Dirac dga built from
//! commutators with `D`, and the heat-functional dga obtained by quotienting the
//! universal forms by the kernel of a Dixmier-type trace.
//!
//! Everything here is pure computation over finite truncations. The crate is
//! `no_std` and only needs `alloc`.
#![no_std]

extern crate alloc;

pub mod error;
pub mod fgr;
pub mod forms;
pub mod linalg;
pub mod qds;
pub mod triple;

pub use error::{Error, Result};
pub use linalg::C64;
