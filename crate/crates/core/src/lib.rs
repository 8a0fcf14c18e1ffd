// SPDX-License-Identifier: MIT OR Apache-2.0

//! Linear probes for knowledge awareness in transformer residual streams.

pub mod analysis;
pub mod cli;
pub mod dataset;
pub mod error;
pub mod extract;
pub mod labeling;
pub mod probe;
pub mod prompting;
pub mod report;
pub mod seeding;
pub mod separation;
pub mod store;
pub mod tensors;
pub mod toy_model;

pub use error::{Error, Result};
