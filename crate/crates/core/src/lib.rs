//! Zero-temperature Glauber dynamics and bootstrap percolation on finite
//! blocks of `Z^d` and on `d`-dimensional tori.
//!
//! The crate is `no_std` and only needs `alloc`. Everything here is a pure
//! function of its inputs and a master seed; IO, parallel replica
//! scheduling and the command line live in the `quench` crate.
//!
//! Layout:
//!
//! * [`geometry`]: vertex indexing, neighbourhoods, distances and blocks.
//! * [`rng`]: counter-based spin fields, clock streams and tie coins.
//! * [`glauber`]: the event-driven majority dynamics.
//! * [`bootstrap`]: r-neighbour and staged-threshold bootstrap closures.
//! * [`coupling`]: the block processes, their events and locality checks.
//! * [`block_field`]: block-constant spin fields and goodness fields.
//! * [`bounds`]: exact tails and the closed-form inequalities built on them.

#![no_std]

extern crate alloc;

pub mod block_field;
pub mod bootstrap;
pub mod bounds;
pub mod coupling;
mod error;
pub mod geometry;
pub mod glauber;
pub mod ratio;
pub mod rng;
mod set;
mod sum;

pub use error::Error;
pub use geometry::{BlockPartition, Geometry, Vertex};
pub use ratio::Ratio;
pub use rng::{ClockStream, Spin, SpinField};
pub use set::VertexSet;

pub type Result<T> = core::result::Result<T, Error>;
