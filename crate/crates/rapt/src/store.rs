//! Binary case-base persistence (`.rcb` files).
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic   4 bytes  "RCBF"
//! version u16      currently 1
//! d       u32      embedding dimension
//! L       u32      label count
//! count   u64      number of cases
//! vocab   L × (u32 length + UTF-8 bytes)
//! cases   count × (u32 id length + id bytes, d × f32, L × f32, L × u8)
//! digest  32 bytes SHA-256 of everything above
//! ```
//!
//! Fixed-width f32 payloads round-trip the in-memory representation exactly.

use std::fs;
use std::path::Path;

use rapt_core::{Case, CaseBase, LabelVocab};
use sha2::{Digest, Sha256};

use crate::error::Error;

const MAGIC: &[u8; 4] = b"RCBF";
const VERSION: u16 = 1;
const DIGEST_LEN: usize = 32;

/// Serializes and writes a case base.
pub fn save_case_base(cb: &CaseBase, path: &Path) -> Result<(), Error> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(cb.dims() as u32).to_le_bytes());
    buf.extend_from_slice(&(cb.label_count() as u32).to_le_bytes());
    buf.extend_from_slice(&(cb.len() as u64).to_le_bytes());
    for name in cb.vocab().names() {
        write_str(&mut buf, name);
    }
    for case in cb.cases() {
        write_str(&mut buf, &case.id);
        for &v in &case.embedding {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        for &v in &case.scores {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        buf.extend_from_slice(&case.labels);
    }
    let digest = Sha256::digest(&buf);
    buf.extend_from_slice(&digest);
    fs::write(path, buf).map_err(Error::io(path))
}

/// Reads and validates a case base written by [`save_case_base`].
pub fn load_case_base(path: &Path) -> Result<CaseBase, Error> {
    let buf = fs::read(path).map_err(Error::io(path))?;
    if buf.len() < MAGIC.len() + 2 + DIGEST_LEN {
        return Err(Error::CorruptPayload("file too short".into()));
    }
    if &buf[..4] != MAGIC {
        return Err(Error::CorruptPayload("bad magic bytes".into()));
    }
    let version = u16::from_le_bytes([buf[4], buf[5]]);
    if version != VERSION {
        return Err(Error::FormatVersionMismatch { found: version, supported: VERSION });
    }
    let payload_len = buf.len() - DIGEST_LEN;
    let digest = Sha256::digest(&buf[..payload_len]);
    if digest.as_slice() != &buf[payload_len..] {
        return Err(Error::CorruptPayload("checksum mismatch".into()));
    }

    let mut reader = Reader { buf: &buf[..payload_len], pos: 6 };
    let dims = reader.read_u32()? as usize;
    let label_count = reader.read_u32()? as usize;
    let count = usize::try_from(reader.read_u64()?)
        .map_err(|_| Error::CorruptPayload("case count overflows usize".into()))?;

    let mut names = Vec::with_capacity(label_count);
    for _ in 0..label_count {
        names.push(reader.read_str()?);
    }
    let vocab = LabelVocab::new(names).map_err(Error::Core)?;

    let mut cases = Vec::with_capacity(count);
    for _ in 0..count {
        let id = reader.read_str()?;
        let mut embedding = Vec::with_capacity(dims);
        for _ in 0..dims {
            embedding.push(reader.read_f32()?);
        }
        let mut scores = Vec::with_capacity(label_count);
        for _ in 0..label_count {
            scores.push(reader.read_f32()?);
        }
        let labels = reader.read_bytes(label_count)?.to_vec();
        cases.push(Case::new(id, embedding, scores, labels));
    }
    if reader.pos != reader.buf.len() {
        return Err(Error::CorruptPayload("trailing bytes after last case".into()));
    }
    // Reconstruction re-validates every case-base invariant.
    CaseBase::new(vocab, cases).map_err(Error::Core)
}

fn write_str(buf: &mut Vec<u8>, s: &str) {
    buf.extend_from_slice(&(s.len() as u32).to_le_bytes());
    buf.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn read_bytes(&mut self, len: usize) -> Result<&'a [u8], Error> {
        let end = self
            .pos
            .checked_add(len)
            .filter(|&end| end <= self.buf.len())
            .ok_or_else(|| Error::CorruptPayload("unexpected end of payload".into()))?;
        let slice = &self.buf[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn read_u32(&mut self) -> Result<u32, Error> {
        Ok(u32::from_le_bytes(self.read_bytes(4)?.try_into().unwrap()))
    }

    fn read_u64(&mut self) -> Result<u64, Error> {
        Ok(u64::from_le_bytes(self.read_bytes(8)?.try_into().unwrap()))
    }

    fn read_f32(&mut self) -> Result<f32, Error> {
        Ok(f32::from_le_bytes(self.read_bytes(4)?.try_into().unwrap()))
    }

    fn read_str(&mut self) -> Result<String, Error> {
        let len = self.read_u32()? as usize;
        let bytes = self.read_bytes(len)?;
        String::from_utf8(bytes.to_vec())
            .map_err(|_| Error::CorruptPayload("invalid UTF-8 string".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn sample_base(cases: usize) -> CaseBase {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let records = (0..cases)
            .map(|i| {
                let embedding: Vec<f32> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
                let scores: Vec<f32> = (0..4).map(|_| rng.random_range(-3.0f32..3.0)).collect();
                let labels: Vec<u8> = (0..4).map(|_| rng.random_range(0..=1)).collect();
                Case::new(format!("case-{i}"), embedding, scores, labels)
            })
            .collect();
        let vocab = LabelVocab::new(
            vec!["alpha".into(), "beta".into(), "gamma".into(), "delta".into()],
        )
        .unwrap();
        CaseBase::new(vocab, records).unwrap()
    }

    #[test]
    fn round_trip_is_identity() {
        let cb = sample_base(100);
        let file = tempfile::NamedTempFile::new().unwrap();
        save_case_base(&cb, file.path()).unwrap();
        let loaded = load_case_base(file.path()).unwrap();
        assert_eq!(cb, loaded);
    }

    #[test]
    fn truncated_file_is_corrupt() {
        let cb = sample_base(5);
        let file = tempfile::NamedTempFile::new().unwrap();
        save_case_base(&cb, file.path()).unwrap();
        let bytes = fs::read(file.path()).unwrap();
        fs::write(file.path(), &bytes[..bytes.len() - 17]).unwrap();
        assert_eq!(load_case_base(file.path()).unwrap_err().kind(), "CorruptPayload");
    }

    #[test]
    fn flipped_byte_fails_the_checksum() {
        let cb = sample_base(5);
        let file = tempfile::NamedTempFile::new().unwrap();
        save_case_base(&cb, file.path()).unwrap();
        let mut bytes = fs::read(file.path()).unwrap();
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0x40;
        fs::write(file.path(), &bytes).unwrap();
        assert_eq!(load_case_base(file.path()).unwrap_err().kind(), "CorruptPayload");
    }

    #[test]
    fn future_version_is_reported_as_such() {
        let cb = sample_base(3);
        let file = tempfile::NamedTempFile::new().unwrap();
        save_case_base(&cb, file.path()).unwrap();
        let mut bytes = fs::read(file.path()).unwrap();
        // Advertise version 2 and re-sign so only the version differs.
        bytes[4..6].copy_from_slice(&2u16.to_le_bytes());
        let payload_len = bytes.len() - DIGEST_LEN;
        let digest = Sha256::digest(&bytes[..payload_len]);
        bytes[payload_len..].copy_from_slice(&digest);
        fs::write(file.path(), &bytes).unwrap();
        match load_case_base(file.path()).unwrap_err() {
            Error::FormatVersionMismatch { found, supported } => {
                assert_eq!(found, 2);
                assert_eq!(supported, 1);
            }
            other => panic!("expected version mismatch, got {other:?}"),
        }
    }

    #[test]
    fn bad_magic_is_corrupt() {
        let file = tempfile::NamedTempFile::new().unwrap();
        fs::write(file.path(), b"NOPE0000000000000000000000000000000000000000000000").unwrap();
        assert_eq!(load_case_base(file.path()).unwrap_err().kind(), "CorruptPayload");
    }
}
