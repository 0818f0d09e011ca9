//! Embedding store with CSV and SVT1 dumps.
//!
//! CSV rows are `utterance_id,speaker_id,phrase_id,v0,...,v511`. The binary
//! form is a `labels.tsv` of ids next to one `[N, D]` SVT1 tensor.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::container::{atomic_write, load_tensor, read_text, save_tensor};
use crate::error::{Error, Result};
use crate::model::Embedding;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EmbeddingStore {
    entries: Vec<Embedding>,
    index: HashMap<String, usize>,
}

impl EmbeddingStore {
    pub fn new(entries: Vec<Embedding>) -> Result<Self> {
        let mut index = HashMap::with_capacity(entries.len());
        let dim = entries.first().map(|e| e.values.len());
        for (i, e) in entries.iter().enumerate() {
            if Some(e.values.len()) != dim {
                return Err(Error::Dimension(format!("embedding {} has {} values", e.utterance_id, e.values.len())));
            }
            if index.insert(e.utterance_id.clone(), i).is_some() {
                return Err(Error::Format(format!("duplicate utterance id {}", e.utterance_id)));
            }
        }
        Ok(Self { entries, index })
    }

    pub fn entries(&self) -> &[Embedding] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.entries.first().map_or(0, |e| e.values.len())
    }

    pub fn get(&self, utterance_id: &str) -> Result<&Embedding> {
        self.index
            .get(utterance_id)
            .map(|&i| &self.entries[i])
            .ok_or_else(|| Error::Index(format!("no embedding for utterance {utterance_id}")))
    }

    pub fn of_phrase<'a>(&'a self, phrase_id: &'a str) -> impl Iterator<Item = &'a Embedding> + 'a {
        self.entries.iter().filter(move |e| e.phrase_id == phrase_id)
    }

    /// Distinct phrase ids in first-seen order.
    pub fn phrases(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for e in &self.entries {
            if !out.contains(&e.phrase_id) {
                out.push(e.phrase_id.clone());
            }
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for e in &self.entries {
            let _ = write!(s, "{},{},{}", e.utterance_id, e.speaker_id, e.phrase_id);
            for v in &e.values {
                let _ = write!(s, ",{v}");
            }
            s.push('\n');
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (n, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let mut f = line.trim_end_matches('\r').split(',');
            let mut id = || f.next().filter(|s| !s.is_empty()).map(str::to_string);
            let (Some(utterance_id), Some(speaker_id), Some(phrase_id)) = (id(), id(), id()) else {
                return Err(Error::Format(format!("embedding line {}: missing ids", n + 1)));
            };
            let values = f
                .map(|v| v.parse::<f32>().ok().filter(|x| x.is_finite()))
                .collect::<Option<Vec<f32>>>()
                .ok_or_else(|| Error::Format(format!("embedding line {}: bad value", n + 1)))?;
            if values.is_empty() {
                return Err(Error::Format(format!("embedding line {}: no values", n + 1)));
            }
            entries.push(Embedding { utterance_id, speaker_id, phrase_id, values });
        }
        Self::new(entries)
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        atomic_write(path, self.to_csv().as_bytes())
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        Self::from_csv(&read_text(path)?)
    }

    /// Binary dump: `<stem>.svt` holds the `[N, D]` matrix and `<stem>.ids`
    /// the tab-separated ids in row order.
    pub fn save_binary(&self, stem: &Path) -> Result<()> {
        let ids = self.entries.iter().fold(String::new(), |mut s, e| {
            let _ = writeln!(s, "{}\t{}\t{}", e.utterance_id, e.speaker_id, e.phrase_id);
            s
        });
        let data: Vec<f32> = self.entries.iter().flat_map(|e| e.values.iter().copied()).collect();
        save_tensor(&stem.with_extension("svt"), &[self.len(), self.dim()], &data)?;
        atomic_write(&stem.with_extension("ids"), ids.as_bytes())
    }

    pub fn load_binary(stem: &Path) -> Result<Self> {
        let t = load_tensor(&stem.with_extension("svt"))?;
        let ids = read_text(&stem.with_extension("ids"))?;
        let [n, d] = t.dims[..] else {
            return Err(Error::Format(format!("embedding matrix has rank {}", t.dims.len())));
        };
        let rows: Vec<&str> = ids.lines().filter(|l| !l.is_empty()).collect();
        if rows.len() != n {
            return Err(Error::Format(format!("{} id rows for {n} embeddings", rows.len())));
        }
        let mut entries = Vec::with_capacity(n);
        for (i, row) in rows.iter().enumerate() {
            let f: Vec<&str> = row.split('\t').collect();
            if f.len() != 3 {
                return Err(Error::Format(format!("id row {}: expected 3 fields", i + 1)));
            }
            entries.push(Embedding {
                utterance_id: f[0].into(),
                speaker_id: f[1].into(),
                phrase_id: f[2].into(),
                values: t.data[i * d..(i + 1) * d].to_vec(),
            });
        }
        Self::new(entries)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> EmbeddingStore {
        let e = |u: &str, s: &str, v: Vec<f32>| Embedding {
            utterance_id: u.into(),
            speaker_id: s.into(),
            phrase_id: "p1".into(),
            values: v,
        };
        EmbeddingStore::new(vec![e("u1", "s1", vec![0.1, -2.0, 1e-7]), e("u2", "s2", vec![3.0, 0.0, -0.333])]).unwrap()
    }

    #[test]
    fn csv_and_binary_round_trip() {
        let s = sample();
        assert_eq!(EmbeddingStore::from_csv(&s.to_csv()).unwrap(), s);
        let dir = tempfile::tempdir().unwrap();
        s.save_binary(&dir.path().join("emb")).unwrap();
        assert_eq!(EmbeddingStore::load_binary(&dir.path().join("emb")).unwrap(), s);
    }

    #[test]
    fn unknown_id_is_an_index_error() {
        assert!(matches!(sample().get("u9"), Err(Error::Index(_))));
    }
}
