//! Focal-point driven control of reconfigurable reflector arrays in an
//! indoor mmWave link, trained with multi-agent PPO.

pub mod environment;
pub mod error;
pub mod harness;
pub mod marl;
pub mod neuralnet;
pub mod raytracer;
pub mod reflector;
pub mod scene;
pub mod vectormath;

pub use error::{Error, Result};
