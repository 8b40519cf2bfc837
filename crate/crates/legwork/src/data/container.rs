//! Versioned binary container shared by datasets and model checkpoints.
//!
//! Layout, all little-endian:
//!
//! ```text
//! offset  size  field
//! 0       8     magic (ASCII, artifact kind)
//! 8       4     format version (u32)
//! 12      8     payload length in bytes (u64)
//! 20      n     payload
//! 20+n    4     CRC-32 (IEEE) of the payload
//! ```

use std::fs;
use std::path::Path;

use super::codec::crc32;
use crate::error::Error;
use crate::Result;

pub const DATASET_MAGIC: &[u8; 8] = b"LEGWORKD";
pub const MODEL_MAGIC: &[u8; 8] = b"LEGWORKM";

/// Serializes `payload` under the given magic and version.
pub fn to_container_bytes(magic: &[u8; 8], version: u32, payload: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(24 + payload.len());
    out.extend_from_slice(magic);
    out.extend_from_slice(&version.to_le_bytes());
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(payload);
    out.extend_from_slice(&crc32(payload).to_le_bytes());
    out
}

/// Validates the header and checksum, returning the payload and version.
pub fn from_container_bytes<'a>(
    magic: &[u8; 8],
    supported_version: u32,
    bytes: &'a [u8],
    path: &str,
) -> Result<(u32, &'a [u8])> {
    if bytes.len() < 8 || &bytes[..8] != magic {
        let expected = std::str::from_utf8(magic).unwrap_or("eight ASCII bytes");
        return Err(Error::BadMagic { path: path.to_string(), expected: expected.to_string() });
    }
    if bytes.len() < 20 {
        return Err(Error::Malformed {
            path: path.to_string(),
            detail: format!("header needs 20 bytes, file has {} (truncated file)", bytes.len()),
        });
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != supported_version {
        return Err(Error::BadVersion {
            path: path.to_string(),
            found: version,
            supported: supported_version,
        });
    }
    let payload_len = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
    let expect_total = 20usize
        .checked_add(payload_len)
        .and_then(|v| v.checked_add(4))
        .ok_or_else(|| Error::Malformed {
            path: path.to_string(),
            detail: "payload length overflows".to_string(),
        })?;
    if bytes.len() != expect_total {
        return Err(Error::Malformed {
            path: path.to_string(),
            detail: format!(
                "payload length {payload_len} implies {expect_total} bytes, file has {} (truncated or padded file)",
                bytes.len()
            ),
        });
    }
    let payload = &bytes[20..20 + payload_len];
    let stored = u32::from_le_bytes(bytes[20 + payload_len..].try_into().unwrap());
    let computed = crc32(payload);
    if stored != computed {
        return Err(Error::ChecksumMismatch { path: path.to_string(), stored, computed });
    }
    Ok((version, payload))
}

pub fn write_container(path: &Path, magic: &[u8; 8], version: u32, payload: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    fs::write(path, to_container_bytes(magic, version, payload))?;
    Ok(())
}

pub fn read_container(path: &Path, magic: &[u8; 8], supported_version: u32) -> Result<Vec<u8>> {
    let bytes = fs::read(path)?;
    let (_, payload) =
        from_container_bytes(magic, supported_version, &bytes, &path.to_string_lossy())?;
    Ok(payload.to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_preserves_payload() {
        let payload = b"hello container".to_vec();
        let bytes = to_container_bytes(DATASET_MAGIC, 3, &payload);
        let (version, got) = from_container_bytes(DATASET_MAGIC, 3, &bytes, "mem").unwrap();
        assert_eq!(version, 3);
        assert_eq!(got, payload.as_slice());
    }

    #[test]
    fn wrong_magic_is_rejected() {
        let bytes = to_container_bytes(MODEL_MAGIC, 1, b"x");
        let err = from_container_bytes(DATASET_MAGIC, 1, &bytes, "mem").unwrap_err();
        assert!(matches!(err, Error::BadMagic { .. }));
    }

    #[test]
    fn wrong_version_is_rejected() {
        let bytes = to_container_bytes(DATASET_MAGIC, 2, b"x");
        let err = from_container_bytes(DATASET_MAGIC, 1, &bytes, "mem").unwrap_err();
        assert!(matches!(err, Error::BadVersion { found: 2, supported: 1, .. }));
    }

    #[test]
    fn corrupt_payload_fails_the_checksum() {
        let mut bytes = to_container_bytes(DATASET_MAGIC, 1, b"payload bytes");
        bytes[24] ^= 0x40;
        let err = from_container_bytes(DATASET_MAGIC, 1, &bytes, "mem").unwrap_err();
        assert!(matches!(err, Error::ChecksumMismatch { .. }));
    }

    #[test]
    fn truncated_file_is_an_explicit_error() {
        let bytes = to_container_bytes(DATASET_MAGIC, 1, b"payload bytes");
        for cut in [bytes.len() - 1, bytes.len() - 5, 19, 10] {
            let err = from_container_bytes(DATASET_MAGIC, 1, &bytes[..cut], "mem").unwrap_err();
            assert!(
                matches!(err, Error::Malformed { .. } | Error::BadMagic { .. }),
                "cut at {cut} gave {err}"
            );
        }
    }
}
