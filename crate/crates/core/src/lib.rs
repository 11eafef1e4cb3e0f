//! Session-based next-item recommendation with multi-head self-attention
//! and tied-embedding scoring.

pub mod checkpoint;
pub mod config;
pub mod data;
pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod loss;
pub mod model;
pub mod nncore;
pub mod sweep;
pub mod synthetic;
pub mod trainer;

pub use error::{Error, NnError, Result};
