pub mod config;
pub mod dsp;
pub mod eit;
pub mod experiment;
pub mod error;
pub mod gaussian;
pub mod memory;
pub mod sideband;
pub mod synth;
pub mod trace_io;

pub use error::{Error, Result};
