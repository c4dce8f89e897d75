//! Exact-diagonalization and master-equation toolkit for rings of coupled
//! Jaynes-Cummings cells, including the two-pulse protocol that pumps a
//! spatially entangled polariton pair.

// `!(x > 0.0)` is used on purpose so NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod csv;
pub mod dynamics;
pub mod error;
pub mod hilbert;
pub mod model;
pub mod operator;
pub mod protocol;
pub mod spectrum;

pub use error::{Error, Result};
pub use hilbert::{DensityMatrix, FockBasis, QuantumState, SiteLevel, SiteOp};
pub use model::{BoseHubbardParams, PulseSegment, SystemParams};
pub use operator::Operator;
