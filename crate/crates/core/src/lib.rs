//! Multi-fidelity EMT and phasor simulator for AC grids with
//! converter-interfaced renewable sources.

// `!(x > 0.0)` is used on purpose: it also rejects NaN. Phase loops index
// several three-element arrays at once.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod benchmark;
pub mod converter;
pub mod error;
pub mod events;
pub mod frames;
pub mod harness;
pub mod integrate;
pub mod machines;
pub mod network;
pub mod perunit;
pub mod res;
pub mod sim;

pub use error::{Result, SimError};
