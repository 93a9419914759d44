//! Checksummed JSON documents: pretty-printed JSON whose last member is
//! `"checksum": "sha256:<hex>"`, computed over every byte before it.

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

use super::{Result, ThesaurusError};

const MARKER: &str = ",\n  \"checksum\": \"sha256:";

fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Serializes `value` (a JSON object with `format` and `version` members) and
/// appends the checksum member.
pub fn to_checked_json<T: Serialize>(value: &T) -> Result<String> {
    let body = serde_json::to_string_pretty(value).map_err(|e| ThesaurusError::Json(e.to_string()))?;
    let head = body
        .strip_suffix("\n}")
        .ok_or_else(|| ThesaurusError::InvalidInput("document must be a non-empty JSON object".into()))?;
    Ok(format!("{head}{MARKER}{}\"\n}}\n", digest(head.as_bytes())))
}

/// Verifies the checksum, then the `format` tag and `version`, then decodes.
pub fn from_checked_json<T: DeserializeOwned>(text: &str, format: &str, supported_version: u32) -> Result<T> {
    let corrupt = |m: &str| ThesaurusError::CorruptFile(m.to_string());
    let at = text.rfind(MARKER).ok_or_else(|| corrupt("checksum member missing"))?;
    let head = &text[..at];
    let trailer = &text[at + MARKER.len()..];
    let hex_part = trailer.get(..64).ok_or_else(|| corrupt("truncated checksum"))?;
    if !hex_part.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b)) || &trailer[64..] != "\"\n}\n" {
        return Err(corrupt("malformed checksum trailer"));
    }
    if digest(head.as_bytes()) != hex_part {
        return Err(corrupt("checksum mismatch"));
    }
    let mut value: serde_json::Value = serde_json::from_str(text).map_err(|e| corrupt(&e.to_string()))?;
    let obj = value.as_object_mut().ok_or_else(|| corrupt("not a JSON object"))?;
    obj.remove("checksum");
    let found_format = obj.get("format").and_then(|v| v.as_str()).unwrap_or_default();
    if found_format != format {
        return Err(ThesaurusError::FormatMismatch {
            expected: format.to_string(),
            found: found_format.to_string(),
        });
    }
    let version = obj.get("version").and_then(|v| v.as_u64()).ok_or_else(|| corrupt("version missing"))?;
    if version > u64::from(supported_version) || version == 0 {
        return Err(ThesaurusError::VersionMismatch {
            found: version,
            supported: supported_version,
        });
    }
    serde_json::from_value(value).map_err(|e| ThesaurusError::Json(e.to_string()))
}
