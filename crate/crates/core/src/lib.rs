//! Simulation of a cavity-coupled NV ensemble used as a multispectral
//! magnetometer.
//!
//! Angular frequencies and rates are in rad/µs throughout; see [`units`].

pub mod dressed;
pub mod error;
pub mod grid;
pub mod master;
pub mod ops;
pub mod par;
pub mod resolvent;
pub mod sensitivity;
pub mod spectrum;
pub mod units;

pub use error::{Error, Result};
pub use ops::{DensityMatrix, HilbertLayout, Operator};
