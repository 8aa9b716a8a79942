// Copyright 2026 qubitcorr Contributors
// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

use crate::model::Violation;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("invalid estimator window: {0}")]
    InvalidWindow(String),

    #[error("ensemble is empty")]
    EmptyEnsemble,

    #[error("integration diverged in trace {trace} at step {step}")]
    IntegrationDiverged { trace: u64, step: usize },

    #[error("response is not identifiable: {0}")]
    UnidentifiableResponse(String),

    #[error("parameter is not identifiable: {0}")]
    Unidentifiable(String),

    #[error("setup failed validation: {}", format_violations(.0))]
    Validation(Vec<Violation>),

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by the file system rather than by the inputs.
    pub fn is_io(&self) -> bool {
        match self {
            Error::Io(_) => true,
            Error::Csv(e) => e.is_io_error(),
            _ => false,
        }
    }
}

fn format_violations(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}
