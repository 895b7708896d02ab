pub mod bubble;
pub mod cli;
pub mod constants;
pub mod error;
pub mod flow;
pub mod geometry;
pub mod morse;
pub mod normalization;
pub mod quadrature;
pub mod scenario;
pub mod selftest;
pub mod spectral;

pub use error::{Error, Result};
