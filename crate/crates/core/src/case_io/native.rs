//! Versioned JSON document holding a [`Network`].
//!
//! Floats are written in their shortest round-trip decimal form, so reading a
//! document back yields bit-identical values. Schema:
//!
//! ```text
//! {
//!   "format": "relaxflow-network",
//!   "format_version": 1,
//!   "network": {
//!     "name": str, "base_mva": num,
//!     "buses": [{ "id", "v_min", "v_max", "shunt_g", "shunt_b",
//!                 "p_demand", "q_demand", "is_reference" }],
//!     "branches": [{ "from_bus", "to_bus", "r", "x", "b_charge", "tap",
//!                    "shift", "s_rating": num | null, "angle_limit" }],
//!     "generators": [{ "bus", "p_min", "p_max", "q_min", "q_max",
//!                      "c0", "c1", "c2", "p_setpoint", "v_setpoint" }]
//!   }
//! }
//! ```

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netmodel::Network;

pub const FORMAT_NAME: &str = "relaxflow-network";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum NativeError {
    #[error("malformed document: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error("not a {FORMAT_NAME} document (format {0:?})")]
    Format(String),
    #[error("unsupported format_version {found}, expected {FORMAT_VERSION}")]
    Version { found: u32 },
    #[error("non-finite value in network; the native format stores finite numbers only")]
    NonFinite,
}

#[derive(Serialize)]
struct DocumentOut<'a> {
    format: &'static str,
    format_version: u32,
    network: &'a Network,
}

#[derive(Deserialize)]
struct DocumentIn {
    format: String,
    format_version: u32,
    network: serde_json::Value,
}

pub fn write_native(network: &Network) -> Result<String, NativeError> {
    let doc = DocumentOut { format: FORMAT_NAME, format_version: FORMAT_VERSION, network };
    // serde_json writes non-finite floats as null, which would not read back.
    let value = serde_json::to_value(&doc)?;
    if has_null_number(&value["network"]) {
        return Err(NativeError::NonFinite);
    }
    Ok(serde_json::to_string_pretty(&value)?)
}

fn has_null_number(v: &serde_json::Value) -> bool {
    match v {
        serde_json::Value::Object(m) => m.iter().any(|(k, v)| (v.is_null() && k != "s_rating") || has_null_number(v)),
        serde_json::Value::Array(a) => a.iter().any(has_null_number),
        _ => false,
    }
}

pub fn read_native(text: &str) -> Result<Network, NativeError> {
    let doc: DocumentIn = serde_json::from_str(text)?;
    if doc.format != FORMAT_NAME {
        return Err(NativeError::Format(doc.format));
    }
    if doc.format_version != FORMAT_VERSION {
        return Err(NativeError::Version { found: doc.format_version });
    }
    Ok(serde_json::from_value(doc.network)?)
}
