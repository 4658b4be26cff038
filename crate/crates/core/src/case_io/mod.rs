//! Case file ingestion and serialization.

pub mod convert;
pub mod matpower;
pub mod native;

use std::path::Path;

use thiserror::Error;

pub use convert::{to_network, ConvertError, RowViolation};
pub use matpower::{parse_matpower, parse_matpower_with, render, CaseDocument, ParseError, ParseOptions, Table};
pub use native::{read_native, write_native, NativeError};

use crate::netmodel::Network;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseFormat {
    Matpower,
    Native,
}

impl CaseFormat {
    /// Guess from the file extension: `.json` is native, anything else MATPOWER.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => CaseFormat::Native,
            _ => CaseFormat::Matpower,
        }
    }
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Convert(#[from] ConvertError),
    #[error(transparent)]
    Native(#[from] NativeError),
    #[error("invalid network: {0}")]
    Invalid(#[from] crate::netmodel::ModelError),
}

/// Parse text in the given format into a validated network.
pub fn load_str(text: &str, format: CaseFormat) -> Result<Network, LoadError> {
    let network = match format {
        CaseFormat::Matpower => to_network(&parse_matpower(text)?)?,
        CaseFormat::Native => read_native(text)?,
    };
    network.ensure_valid()?;
    Ok(network)
}

pub fn load(path: &Path, format: Option<CaseFormat>) -> Result<Network, LoadError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| LoadError::Io { path: path.display().to_string(), source })?;
    load_str(&text, format.unwrap_or_else(|| CaseFormat::from_path(path)))
}
