use crate::error::{Error, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Hex SHA-256 of the TOML serialization of `value`.
pub fn config_hash<T: Serialize>(value: &T) -> Result<String> {
    let text = toml::to_string(value).map_err(|e| Error::invalid(format!("cannot serialize config: {e}")))?;
    Ok(hex::encode(Sha256::digest(text.as_bytes())))
}
