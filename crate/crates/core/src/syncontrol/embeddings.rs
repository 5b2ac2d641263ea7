use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;

use crate::corpus::io::open_maybe_gzip;
use crate::error::{Error, Result};

/// Unit-length word vectors, read-only after construction.
#[derive(Debug, Clone)]
pub struct EmbeddingStore {
    dimension: usize,
    words: Vec<String>,
    index: HashMap<String, usize>,
    data: Vec<f64>,
    zero_vectors: usize,
}

impl EmbeddingStore {
    /// Builds a store from raw vectors. Zero vectors are skipped and counted.
    pub fn from_vectors<I, S>(dimension: usize, vectors: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, Vec<f64>)>,
        S: Into<String>,
    {
        if dimension == 0 {
            return Err(Error::InvalidInput(
                "embedding dimension must be positive".into(),
            ));
        }
        let mut store = EmbeddingStore {
            dimension,
            words: Vec::new(),
            index: HashMap::new(),
            data: Vec::new(),
            zero_vectors: 0,
        };
        for (word, v) in vectors {
            store.push(word.into(), v)?;
        }
        Ok(store)
    }

    fn push(&mut self, word: String, v: Vec<f64>) -> Result<()> {
        if v.len() != self.dimension {
            return Err(Error::DimensionMismatch(format!(
                "vector for '{word}' has {} components, expected {}",
                v.len(),
                self.dimension
            )));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("vector for '{word}'")));
        }
        if self.index.contains_key(&word) {
            return Err(Error::InvalidInput(format!(
                "duplicate embedding for '{word}'"
            )));
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            self.zero_vectors += 1;
            return Ok(());
        }
        self.index.insert(word.clone(), self.words.len());
        self.words.push(word);
        self.data.extend(v.iter().map(|x| x / norm));
        Ok(())
    }

    /// Reads word2vec text format: a `<count> <dim>` header, then one
    /// `<word> <v1> ... <vdim>` line per word. Gzip input is accepted.
    pub fn load(path: &Path) -> Result<Self> {
        let reader = open_maybe_gzip(path)?;
        let parse_err = |line: usize, message: String| Error::Parse {
            path: path.into(),
            line,
            message,
        };
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or_else(|| parse_err(1, "missing header".into()))?
            .map_err(|e| Error::io(path, e))?;
        let mut head = header.split_whitespace();
        let (Some(count), Some(dim), None) = (head.next(), head.next(), head.next()) else {
            return Err(parse_err(
                1,
                format!("expected '<count> <dim>', got '{header}'"),
            ));
        };
        let count: usize = count
            .parse()
            .map_err(|_| parse_err(1, format!("bad count '{count}'")))?;
        let dim: usize = dim
            .parse()
            .map_err(|_| parse_err(1, format!("bad dimension '{dim}'")))?;
        let mut store = EmbeddingStore::from_vectors(dim, std::iter::empty::<(String, _)>())?;
        let mut seen = 0;
        for (i, line) in lines.enumerate() {
            let lineno = i + 2;
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let word = parts.next().expect("line is not blank").to_string();
            let v = parts
                .map(|s| s.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| parse_err(lineno, e.to_string()))?;
            store
                .push(word, v)
                .map_err(|e| parse_err(lineno, e.to_string()))?;
            seen += 1;
        }
        if seen != count {
            return Err(parse_err(
                1,
                format!("header declares {count} vectors, found {seen}"),
            ));
        }
        Ok(store)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Number of zero vectors dropped on construction.
    pub fn zero_vectors(&self) -> usize {
        self.zero_vectors
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.index
            .get(word)
            .map(|&i| &self.data[i * self.dimension..(i + 1) * self.dimension])
    }

    /// Words in load order.
    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.words.iter().map(String::as_str)
    }

    pub fn cosine(&self, a: &str, b: &str) -> Option<f64> {
        let (u, v) = (self.get(a)?, self.get(b)?);
        Some(u.iter().zip(v).map(|(x, y)| x * y).sum())
    }

    /// Keeps only words accepted by `keep`, preserving load order.
    pub fn restrict(&self, keep: impl Fn(&str) -> bool) -> Self {
        let mut out = EmbeddingStore {
            dimension: self.dimension,
            words: Vec::new(),
            index: HashMap::new(),
            data: Vec::new(),
            zero_vectors: self.zero_vectors,
        };
        for w in self.words.iter().filter(|w| keep(w)) {
            out.index.insert(w.clone(), out.words.len());
            out.words.push(w.clone());
            out.data
                .extend_from_slice(self.get(w).expect("word is indexed"));
        }
        out
    }

    /// Renames every word through `key` (for example a stemmer). When several
    /// words map to one key, the first in load order wins.
    pub fn rekey(&self, key: impl Fn(&str) -> String) -> Self {
        let mut out = EmbeddingStore {
            dimension: self.dimension,
            words: Vec::new(),
            index: HashMap::new(),
            data: Vec::new(),
            zero_vectors: self.zero_vectors,
        };
        for w in &self.words {
            let k = key(w);
            if out.index.contains_key(&k) {
                continue;
            }
            out.index.insert(k.clone(), out.words.len());
            out.words.push(k);
            out.data
                .extend_from_slice(self.get(w).expect("word is indexed"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loads_and_normalizes() {
        let f = tempfile::NamedTempFile::new().unwrap();
        std::fs::write(f.path(), "3 2\ndelve 3 4\nzero 0 0\nrealm 0 -2\n").unwrap();
        let s = EmbeddingStore::load(f.path()).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.zero_vectors(), 1);
        assert_eq!(s.get("delve").unwrap(), &[0.6, 0.8]);
        assert!((s.cosine("delve", "realm").unwrap() + 0.8).abs() < 1e-15);
        assert!(s.get("zero").is_none());
    }

    #[test]
    fn rejects_dimension_mismatch_and_bad_count() {
        let f = tempfile::NamedTempFile::new().unwrap();
        std::fs::write(f.path(), "2 2\na 1 0\nb 1 0 0\n").unwrap();
        assert!(EmbeddingStore::load(f.path()).is_err());
        std::fs::write(f.path(), "3 2\na 1 0\nb 0 1\n").unwrap();
        assert!(EmbeddingStore::load(f.path()).is_err());
        std::fs::write(f.path(), "2 2\na 1 0\na 0 1\n").unwrap();
        assert!(EmbeddingStore::load(f.path()).is_err());
    }

    #[test]
    fn restrict_keeps_order() {
        let s = EmbeddingStore::from_vectors(
            1,
            [("c", vec![1.0]), ("a", vec![2.0]), ("b", vec![-1.0])],
        )
        .unwrap();
        let r = s.restrict(|w| w != "a");
        assert_eq!(r.words().collect::<Vec<_>>(), vec!["c", "b"]);
        assert_eq!(r.get("b").unwrap(), &[-1.0]);
    }

    #[test]
    fn rekey_keeps_first_form() {
        let s = EmbeddingStore::from_vectors(
            2,
            [
                ("delves", vec![1.0, 0.0]),
                ("delve", vec![0.0, 1.0]),
                ("realm", vec![1.0, 1.0]),
            ],
        )
        .unwrap();
        let r = s.rekey(crate::corpus::porter_stem);
        assert_eq!(r.words().collect::<Vec<_>>(), vec!["delv", "realm"]);
        assert_eq!(r.get("delv").unwrap(), &[1.0, 0.0]);
    }
}
