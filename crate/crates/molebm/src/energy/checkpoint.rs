//! Model checkpoint serialization.
//!
//! Layout: magic `GEBM`, format version u32, header (dims, layer count,
//! width, vocabulary symbols with valences, metadata key/value text), then
//! every tensor as little-endian f64 in row-major order (weight matrices
//! layer-ascending then channel-ascending, the readout vector, then the
//! spectral state vectors in the same order), terminated by a CRC32 of that
//! tensor payload. All integers are little-endian u32.

use std::collections::BTreeMap;
use std::path::Path;

use ndarray::{Array1, Array2};

use super::{EnergyError, EnergyModel};
use crate::graph::{AtomVocab, Dims};

const MAGIC: &[u8; 4] = b"GEBM";
const VERSION: u32 = 1;

fn push_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn push_str(buf: &mut Vec<u8>, s: &str) {
    push_u32(buf, s.len() as u32);
    buf.extend_from_slice(s.as_bytes());
}

/// Write a model to disk; the round trip through [`load_checkpoint`] is
/// bit-exact.
pub fn save_checkpoint(model: &EnergyModel, path: impl AsRef<Path>) -> Result<(), EnergyError> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    push_u32(&mut out, VERSION);

    push_u32(&mut out, model.dims.n as u32);
    push_u32(&mut out, model.dims.b as u32);
    push_u32(&mut out, model.dims.c as u32);
    push_u32(&mut out, model.layers as u32);
    push_u32(&mut out, model.width as u32);
    push_u32(&mut out, model.vocab.len() as u32);
    for (sym, val) in model.vocab.entries() {
        push_str(&mut out, sym);
        push_u32(&mut out, val);
    }
    push_u32(&mut out, model.metadata.len() as u32);
    for (k, v) in &model.metadata {
        push_str(&mut out, k);
        push_str(&mut out, v);
    }

    let mut payload = Vec::new();
    for w in model.weights.iter().flatten() {
        for &v in w.iter() {
            payload.extend_from_slice(&v.to_le_bytes());
        }
    }
    for &v in model.readout.iter() {
        payload.extend_from_slice(&v.to_le_bytes());
    }
    for u in &model.spectral_u {
        for &v in u.iter() {
            payload.extend_from_slice(&v.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&payload);
    out.extend_from_slice(&payload);
    out.extend_from_slice(&crc.to_le_bytes());
    std::fs::write(path, out)?;
    Ok(())
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    /// Exhaustion means the file is shorter than its own structure claims,
    /// which is treated as corruption.
    fn take(&mut self, n: usize) -> Result<&'a [u8], EnergyError> {
        if self.pos + n > self.data.len() {
            return Err(EnergyError::ChecksumMismatch);
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, EnergyError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String, EnergyError> {
        let len = self.u32()? as usize;
        let bytes = self.take(len)?;
        String::from_utf8(bytes.to_vec())
            .map_err(|_| EnergyError::InvalidCheckpoint("non-UTF-8 text field".into()))
    }

    fn f64s(&mut self, count: usize) -> Result<Vec<f64>, EnergyError> {
        let bytes = self.take(count * 8)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

/// Read a model written by [`save_checkpoint`].
pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<EnergyModel, EnergyError> {
    let data = std::fs::read(path)?;
    let mut cur = Cursor { data: &data, pos: 0 };
    if cur.take(4)? != MAGIC {
        return Err(EnergyError::BadMagic);
    }
    let version = cur.u32()?;
    if version != VERSION {
        return Err(EnergyError::FormatVersionMismatch { found: version, expected: VERSION });
    }
    let n = cur.u32()? as usize;
    let b = cur.u32()? as usize;
    let c = cur.u32()? as usize;
    let dims = Dims::new(n, b, c)
        .map_err(|e| EnergyError::InvalidCheckpoint(format!("bad dims: {e}")))?;
    let layers = cur.u32()? as usize;
    let width = cur.u32()? as usize;
    if layers < 1 || width < 1 {
        return Err(EnergyError::InvalidCheckpoint("bad architecture".into()));
    }
    let vocab_len = cur.u32()? as usize;
    let mut entries = Vec::with_capacity(vocab_len);
    for _ in 0..vocab_len {
        let sym = cur.string()?;
        let val = cur.u32()?;
        entries.push((sym, val));
    }
    let borrowed: Vec<(&str, u32)> = entries.iter().map(|(s, v)| (s.as_str(), *v)).collect();
    let vocab = AtomVocab::new(&borrowed)
        .map_err(|e| EnergyError::InvalidCheckpoint(format!("bad vocabulary: {e}")))?;
    if vocab.len() != dims.b {
        return Err(EnergyError::VocabMismatch { vocab: vocab.len(), b: dims.b });
    }
    let meta_len = cur.u32()? as usize;
    let mut metadata = BTreeMap::new();
    for _ in 0..meta_len {
        let k = cur.string()?;
        let v = cur.string()?;
        metadata.insert(k, v);
    }

    let payload_start = cur.pos;
    let mut weights = Vec::with_capacity(layers);
    for l in 0..layers {
        let rows = if l == 0 { dims.node_channels() } else { width };
        let mut per_channel = Vec::with_capacity(dims.bond_channels());
        for _ in 0..dims.bond_channels() {
            let vals = cur.f64s(rows * width)?;
            per_channel.push(Array2::from_shape_vec((rows, width), vals).unwrap());
        }
        weights.push(per_channel);
    }
    let readout = Array1::from_vec(cur.f64s(width)?);
    let mut spectral_u = Vec::new();
    for l in 0..layers {
        let rows = if l == 0 { dims.node_channels() } else { width };
        for _ in 0..dims.bond_channels() {
            spectral_u.push(Array1::from_vec(cur.f64s(rows)?));
        }
    }
    spectral_u.push(Array1::from_vec(cur.f64s(width)?));
    let payload_end = cur.pos;
    let stored_crc = cur.u32()?;
    if cur.pos != data.len() {
        return Err(EnergyError::InvalidCheckpoint("trailing bytes".into()));
    }
    if crc32fast::hash(&data[payload_start..payload_end]) != stored_crc {
        return Err(EnergyError::ChecksumMismatch);
    }
    Ok(EnergyModel { dims, vocab, layers, width, weights, readout, spectral_u, metadata })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::random_tensor;

    fn model() -> EnergyModel {
        let dims = Dims::new(5, 4, 3).unwrap();
        let mut m = EnergyModel::init(dims, AtomVocab::qm9(), 2, 8, 42).unwrap();
        m.set_metadata("epochs", "3");
        m.set_metadata("dataset", "desk");
        m
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.gebm");
        let m = model();
        save_checkpoint(&m, &path).unwrap();
        let loaded = load_checkpoint(&path).unwrap();
        assert_eq!(m, loaded);
        for seed in 0..10 {
            let s = random_tensor(m.dims, seed);
            assert_eq!(m.energy(&s).unwrap(), loaded.energy(&s).unwrap());
        }
        assert_eq!(loaded.metadata()["dataset"], "desk");
    }

    #[test]
    fn truncation_fails_integrity() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.gebm");
        save_checkpoint(&model(), &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes.truncate(bytes.len() - 10);
        std::fs::write(&path, bytes).unwrap();
        assert!(matches!(load_checkpoint(&path), Err(EnergyError::ChecksumMismatch)));
    }

    #[test]
    fn corrupted_payload_fails_integrity() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.gebm");
        save_checkpoint(&model(), &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0xff;
        std::fs::write(&path, bytes).unwrap();
        assert!(matches!(load_checkpoint(&path), Err(EnergyError::ChecksumMismatch)));
    }

    #[test]
    fn future_version_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.gebm");
        save_checkpoint(&model(), &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[4..8].copy_from_slice(&999u32.to_le_bytes());
        std::fs::write(&path, bytes).unwrap();
        assert!(matches!(
            load_checkpoint(&path),
            Err(EnergyError::FormatVersionMismatch { found: 999, expected: 1 })
        ));
    }

    #[test]
    fn wrong_magic_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.gebm");
        std::fs::write(&path, b"NOPE than some more bytes").unwrap();
        assert!(matches!(load_checkpoint(&path), Err(EnergyError::BadMagic)));
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            load_checkpoint("/definitely/not/here.gebm"),
            Err(EnergyError::Io(_))
        ));
    }
}
