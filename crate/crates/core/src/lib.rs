//! Controller synthesis from plant models or noisy trajectories, with H2 / H∞
//! performance bounds and independent certification.

pub mod data;
pub mod error;
pub mod harness;
pub mod io;
pub mod linalg;
pub mod model;
pub mod sdp;
pub mod synthesis;

pub use error::{Error, Result};
