#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibrate;
pub mod error;
pub mod hamiltonian;
pub mod io;
pub mod lattice;
pub mod lsq;
pub mod placement;
pub mod refine;
pub mod sequences;
pub mod spinphys;
pub mod synth;
pub mod telegraph;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
