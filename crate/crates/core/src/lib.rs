#![no_std]
extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod chart;
pub mod error;
pub mod frame;
pub mod geodesic;
pub mod linalg;
pub mod metric;
pub mod null_distance;
pub mod ode;
pub mod radius;
pub mod report;
pub mod sampling;
pub mod time;

pub use error::{Error, Result};
