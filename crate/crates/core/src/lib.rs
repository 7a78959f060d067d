//! Numerics for free convolutions with an infinitely divisible factor.
//!
//! The library evaluates densities, atoms and boundary curves of the
//! subordination domains for free additive convolution on the line and
//! free multiplicative convolution on the positive half-line and the unit
//! circle. It also classifies density zeros, predicts cusp asymptotics
//! from Taylor data and runs superconvergence experiments for convolution
//! powers.

pub mod boundary;
pub mod cli;
pub mod classify;
pub mod cusp;
pub mod density;
pub mod error;
pub mod generators;
pub mod measures;
pub mod num;
pub mod poly;
pub mod powers;
pub mod quad;
pub mod verify;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
