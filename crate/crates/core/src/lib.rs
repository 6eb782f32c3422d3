//! Identification of multi-input multi-output Hammerstein models.
//!
//! The pipeline runs excitation design, preprocessing, delay and order
//! selection, least-squares estimation with per-channel separation, and
//! validation by free-run simulation.

pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod estimate;
pub mod excitation;
pub mod model;
pub mod persistence;
pub mod preprocess;
pub mod structure;
pub mod validate;

pub use dataset::{Dataset, Signal};
pub use error::{Error, Result};
pub use model::{
    HammersteinChannel, LinearDynamics, MimoHammersteinModel, OperatingPoint, StaticNonlinearity,
};
