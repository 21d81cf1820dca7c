//! Flat binary checkpoint format.
//!
//! Layout: magic `CSNN`, format version (u32 LE), header length (u32 LE),
//! a JSON header `{ "spec": ..., "params": [{name, shape}, ...] }`, then
//! the parameter values as little-endian f64 blobs in header order. The
//! spec type is caller-defined; loading returns it alongside the raw
//! parameter vectors for the model builder to consume.

use std::io::{Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

use super::tensor::Param;

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"CSNN";
const CHECKPOINT_VERSION: u32 = 1;

/// Name and shape of one parameter blob, as recorded in the header.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamInfo {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct Header<T> {
    spec: T,
    params: Vec<ParamInfo>,
}

/// A checkpoint read back from disk: the deserialized spec plus each
/// parameter's descriptor and values, in file order.
#[derive(Debug)]
pub struct LoadedCheckpoint<T> {
    pub spec: T,
    pub params: Vec<(ParamInfo, Vec<f64>)>,
}

pub fn save_checkpoint<T: Serialize>(
    path: impl AsRef<Path>,
    spec: &T,
    params: &[&Param],
) -> Result<()> {
    let path = path.as_ref();
    for p in params {
        p.value
            .assert_finite(&format!("checkpoint parameter {}", p.name()))?;
    }
    let header = Header {
        spec,
        params: params
            .iter()
            .map(|p| ParamInfo {
                name: p.name().to_string(),
                shape: p.value.shape().to_vec(),
            })
            .collect(),
    };
    let json = serde_json::to_vec(&header).map_err(|e| Error::Checkpoint {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let json_len = u32::try_from(json.len()).map_err(|_| Error::Checkpoint {
        path: path.to_path_buf(),
        reason: "header exceeds u32 length".into(),
    })?;

    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut write = |bytes: &[u8]| file.write_all(bytes).map_err(|e| Error::io(path, e));
    write(&CHECKPOINT_MAGIC)?;
    write(&CHECKPOINT_VERSION.to_le_bytes())?;
    write(&json_len.to_le_bytes())?;
    write(&json)?;
    for p in params {
        for v in p.value.data() {
            write(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn load_checkpoint<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<LoadedCheckpoint<T>> {
    let path = path.as_ref();
    let bad = |reason: String| Error::Checkpoint {
        path: path.to_path_buf(),
        reason,
    };
    let mut file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut bytes = Vec::new();
    file.read_to_end(&mut bytes)
        .map_err(|e| Error::io(path, e))?;

    if bytes.len() < 12 {
        return Err(bad("file shorter than the fixed header".into()));
    }
    if bytes[0..4] != CHECKPOINT_MAGIC {
        return Err(bad("bad magic, not a model checkpoint".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != CHECKPOINT_VERSION {
        return Err(bad(format!(
            "unsupported checkpoint version {version}, expected {CHECKPOINT_VERSION}"
        )));
    }
    let json_len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let blob_start = 12 + json_len;
    if bytes.len() < blob_start {
        return Err(bad("truncated JSON header".into()));
    }
    let header: Header<T> = serde_json::from_slice(&bytes[12..blob_start])
        .map_err(|e| bad(format!("malformed header JSON: {e}")))?;

    let expected: usize = header
        .params
        .iter()
        .map(|p| p.shape.iter().product::<usize>())
        .sum();
    if bytes.len() != blob_start + 8 * expected {
        return Err(bad(format!(
            "parameter payload is {} bytes, header promises {}",
            bytes.len() - blob_start,
            8 * expected
        )));
    }

    let mut offset = blob_start;
    let mut params = Vec::with_capacity(header.params.len());
    for info in header.params {
        let count: usize = info.shape.iter().product();
        let values: Vec<f64> = bytes[offset..offset + 8 * count]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(bad(format!("non-finite values in parameter {}", info.name)));
        }
        offset += 8 * count;
        params.push((info, values));
    }
    Ok(LoadedCheckpoint {
        spec: header.spec,
        params,
    })
}

/// Hex SHA-256 of a file's bytes; used to pin fusion members to the exact
/// checkpoints they were trained against.
pub fn file_sha256(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::{Deserialize, Serialize};

    #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
    struct ToySpec {
        arch: String,
        width: usize,
    }

    fn toy_params() -> (Param, Param) {
        let mut w = Param::new("l.w", &[2, 3]);
        w.value
            .data_mut()
            .copy_from_slice(&[0.1, -0.2, 0.3, 1.5, -2.5, 0.0]);
        let mut b = Param::new("l.b", &[2]);
        b.value.data_mut().copy_from_slice(&[0.25, -0.75]);
        (w, b)
    }

    #[test]
    fn roundtrip_preserves_spec_and_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let spec = ToySpec {
            arch: "toy".into(),
            width: 3,
        };
        let (w, b) = toy_params();
        save_checkpoint(&path, &spec, &[&w, &b]).unwrap();

        let loaded: LoadedCheckpoint<ToySpec> = load_checkpoint(&path).unwrap();
        assert_eq!(loaded.spec, spec);
        assert_eq!(loaded.params.len(), 2);
        assert_eq!(
            loaded.params[0].0,
            ParamInfo {
                name: "l.w".into(),
                shape: vec![2, 3]
            }
        );
        assert_eq!(loaded.params[0].1, w.value.data());
        assert_eq!(loaded.params[1].1, b.value.data());
    }

    #[test]
    fn header_layout_is_as_documented() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let (w, b) = toy_params();
        save_checkpoint(
            &path,
            &ToySpec {
                arch: "t".into(),
                width: 1,
            },
            &[&w, &b],
        )
        .unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(&bytes[0..4], b"CSNN");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        let json_len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        assert!(serde_json::from_slice::<serde_json::Value>(&bytes[12..12 + json_len]).is_ok());
        assert_eq!(bytes.len(), 12 + json_len + 8 * 8);
    }

    #[test]
    fn corruption_is_detected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let (w, b) = toy_params();
        let spec = ToySpec {
            arch: "t".into(),
            width: 1,
        };
        save_checkpoint(&path, &spec, &[&w, &b]).unwrap();

        let good = std::fs::read(&path).unwrap();
        // Wrong magic.
        let mut bad = good.clone();
        bad[0] = b'X';
        std::fs::write(&path, &bad).unwrap();
        assert!(load_checkpoint::<ToySpec>(&path).is_err());
        // Truncated payload.
        std::fs::write(&path, &good[..good.len() - 4]).unwrap();
        assert!(load_checkpoint::<ToySpec>(&path).is_err());
        // Trailing garbage.
        let mut padded = good.clone();
        padded.extend_from_slice(&[0u8; 8]);
        std::fs::write(&path, &padded).unwrap();
        assert!(load_checkpoint::<ToySpec>(&path).is_err());
    }

    #[test]
    fn sha256_tracks_content() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.bin");
        std::fs::write(&a, b"abc").unwrap();
        // Known digest of "abc".
        assert_eq!(
            file_sha256(&a).unwrap(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
        std::fs::write(&a, b"abd").unwrap();
        assert_ne!(
            file_sha256(&a).unwrap(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
