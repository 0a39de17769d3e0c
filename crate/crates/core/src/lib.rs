#![no_std]

extern crate alloc;

pub mod approximations;
pub mod error;
pub mod mc;
pub mod mortality;
pub mod numerics;
pub mod pricing;
pub mod wishart;

pub use error::{Error, Result};
