// SPDX-License-Identifier: MIT OR Apache-2.0

//! Error type shared by every module of the crate.

use std::io;

/// Errors raised by the awarescope pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Invalid configuration (templates, bands, relation sets, flags).
    #[error("configuration error: {0}")]
    Config(String),

    /// Malformed or out-of-range input data.
    #[error("invalid input: {0}")]
    Input(String),

    /// A document could not be parsed; `offset` is the byte offset of the failure.
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    /// Inputs disagree with each other (counts, sample ids, layer shapes).
    #[error("consistency error: {0}")]
    Consistency(String),

    /// An on-disk artifact failed validation.
    #[error("validation error: {0}")]
    Validation(String),

    /// Not enough candidates to build a few-shot context.
    #[error("few-shot pool exhausted: needed {needed} eligible facts, found {available}")]
    PoolExhausted { needed: usize, available: usize },

    /// Training data that cannot support a binary classifier.
    #[error("degenerate data: {0}")]
    DegenerateData(String),

    /// Remote endpoint failure after retries.
    #[error("http error: {0}")]
    Http(String),

    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    ///
    /// `1` is reserved for usage errors and is produced by argument parsing.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(_) | Error::Http(_) => 3,
            Error::Csv(e) if matches!(e.kind(), csv::ErrorKind::Io(_)) => 3,
            _ => 2,
        }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn consistency(msg: impl Into<String>) -> Self {
        Error::Consistency(msg.into())
    }

    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
