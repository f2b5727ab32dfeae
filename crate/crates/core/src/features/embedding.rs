//! Externally computed patch embeddings.
//!
//! A manifest is UTF-8 text: a `K=<dim>` header line, then one
//! `patch_key<TAB>row_index` line per vector. The vectors live next to the
//! manifest in a file with the same stem and a `.f32` extension, as
//! contiguous little-endian `f32` rows of length `K`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::features::{FeatureKind, FeatureVector};

const ELEMENT_BYTES: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    dimension: usize,
    /// Byte offset of each key's row in the vector file.
    offsets: BTreeMap<String, usize>,
    data: Vec<f32>,
}

impl EmbeddingStore {
    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn contains(&self, key: &str) -> bool {
        self.offsets.contains_key(key)
    }

    pub fn offset(&self, key: &str) -> Option<usize> {
        self.offsets.get(key).copied()
    }

    pub fn lookup(&self, key: &str) -> Result<FeatureVector> {
        let offset = self.offset(key).ok_or_else(|| Error::Lookup(key.to_string()))?;
        let start = offset / ELEMENT_BYTES;
        let values = self.data[start..start + self.dimension]
            .iter()
            .map(|&v| f64::from(v))
            .collect();
        FeatureVector::new(FeatureKind::External, values)
    }
}

pub fn vector_file_path(manifest: &Path) -> PathBuf {
    manifest.with_extension("f32")
}

pub fn load_embeddings(manifest_path: impl AsRef<Path>) -> Result<EmbeddingStore> {
    let path = manifest_path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());

    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Format(format!("{}: empty embedding manifest", path.display())))?;
    let dimension: usize = header
        .trim()
        .strip_prefix("K=")
        .and_then(|k| k.parse().ok())
        .filter(|&k| k > 0)
        .ok_or_else(|| Error::Format(format!("{}:1: expected `K=<positive int>`, got `{header}`", path.display())))?;

    let vectors_path = vector_file_path(path);
    let bytes = fs::read(&vectors_path).map_err(|e| Error::io(&vectors_path, e))?;
    if bytes.len() % ELEMENT_BYTES != 0 {
        return Err(Error::Format(format!(
            "{}: length {} is not a multiple of {ELEMENT_BYTES}",
            vectors_path.display(),
            bytes.len()
        )));
    }
    let data: Vec<f32> = bytes
        .chunks_exact(ELEMENT_BYTES)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    let rows_available = data.len() / dimension;
    if data.len() % dimension != 0 {
        return Err(Error::Format(format!(
            "{}: {} floats is not a whole number of K={dimension} rows",
            vectors_path.display(),
            data.len()
        )));
    }

    let mut offsets = BTreeMap::new();
    for (lineno, line) in lines {
        let bad = |what: &str| Error::Format(format!("{}:{}: {what}: `{line}`", path.display(), lineno + 1));
        let (key, row) = line.split_once('\t').ok_or_else(|| bad("expected key<TAB>row"))?;
        let row: usize = row.trim().parse().map_err(|_| bad("row index is not an integer"))?;
        if row >= rows_available {
            return Err(bad(&format!(
                "row {row} is past the end of the vector file ({rows_available} rows of K={dimension})"
            )));
        }
        if offsets.insert(key.to_string(), row * dimension * ELEMENT_BYTES).is_some() {
            return Err(bad("duplicate key"));
        }
    }
    Ok(EmbeddingStore {
        dimension,
        offsets,
        data,
    })
}

/// Writes a manifest and its vector file. Rows are stored in input order.
pub fn write_embeddings(
    manifest_path: impl AsRef<Path>,
    dimension: usize,
    entries: &[(String, Vec<f32>)],
) -> Result<()> {
    let path = manifest_path.as_ref();
    if dimension == 0 {
        return Err(Error::Parameter("embedding dimension must be positive".into()));
    }
    let mut text = format!("K={dimension}\n");
    let mut bytes = Vec::with_capacity(entries.len() * dimension * ELEMENT_BYTES);
    for (row, (key, values)) in entries.iter().enumerate() {
        if values.len() != dimension {
            return Err(Error::Format(format!(
                "embedding `{key}` has {} values, expected {dimension}",
                values.len()
            )));
        }
        if key.contains(['\t', '\n']) {
            return Err(Error::Format(format!("embedding key `{key}` contains a tab or newline")));
        }
        let _ = writeln!(text, "{key}\t{row}");
        bytes.extend(values.iter().flat_map(|v| v.to_le_bytes()));
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))?;
    let vectors_path = vector_file_path(path);
    fs::write(&vectors_path, bytes).map_err(|e| Error::io(&vectors_path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fc6.txt");
        let entries: Vec<(String, Vec<f32>)> = (0..5)
            .map(|i| (format!("img:{i}:0"), (0..7).map(|j| (i * 7 + j) as f32 * 0.37 - 3.1).collect()))
            .collect();
        write_embeddings(&path, 7, &entries).unwrap();
        let store = load_embeddings(&path).unwrap();
        assert_eq!(store.dimension(), 7);
        for (key, values) in &entries {
            let v = store.lookup(key).unwrap();
            let back: Vec<f32> = v.values.iter().map(|&x| x as f32).collect();
            assert_eq!(&back, values);
        }
    }

    #[test]
    fn short_vector_file_is_a_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fc6.txt");
        fs::write(&path, "K=4096\nimg:0:0\t0\n").unwrap();
        fs::write(vector_file_path(&path), vec![0u8; 4096 * 4 - 4]).unwrap();
        assert!(matches!(load_embeddings(&path), Err(Error::Format(_))));

        fs::write(vector_file_path(&path), vec![0u8; 4096 * 4]).unwrap();
        fs::write(&path, "K=4096\nimg:0:0\t0\nimg:0:65\t1\n").unwrap();
        assert!(matches!(load_embeddings(&path), Err(Error::Format(_))));
    }

    #[test]
    fn unknown_key_is_a_lookup_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.txt");
        write_embeddings(&path, 2, &[("a:0:0".into(), vec![1.0, 2.0])]).unwrap();
        let store = load_embeddings(&path).unwrap();
        match store.lookup("b:0:0") {
            Err(Error::Lookup(k)) => assert_eq!(k, "b:0:0"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
