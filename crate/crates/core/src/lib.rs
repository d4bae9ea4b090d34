//! Antithetic and quasi-random noise designs for diffusion-style samplers,
//! variance-reduced estimators with confidence intervals, and analytic tools
//! for checking when antithetic pairing pays off.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diffusion;
pub mod error;
pub mod estimators;
pub mod fkg;
pub mod image_stats;
pub mod io;
pub mod noise;
pub mod ou;
pub mod qmc;
pub mod rng;
pub mod special;
pub mod stats;
pub mod symmetry;

pub use error::{Error, Result};
pub use rng::RngStream;
