//! Translate scene-space motion designs into screen-space control signals.

pub mod bundle;
pub mod camera;
pub mod chain;
pub mod cli;
pub mod codec;
pub mod design;
pub mod error;
pub mod io;
pub mod localmotion;
pub mod objmotion;
pub mod pipeline;
#[cfg(feature = "server")]
pub mod service;
pub mod spline;
pub mod types;
pub mod verify;
pub mod warp;

pub use error::{Error, Result};
