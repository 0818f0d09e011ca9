//! Scoring back-end: WCCN, cosine scoring, s-norm, fusion and PCA.

pub mod fusion;
pub mod pca;
pub mod snorm;
pub mod store;
pub mod trials;
pub mod wccn;

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use fusion::{apply_fusion, fit_fusion, FusionModel};
pub use pca::{pca_project, Pca};
pub use snorm::{apply_snorm, score_stats, Cohort, CohortMember, ScoreStats};
pub use store::EmbeddingStore;
pub use trials::{labelled, read_scores, read_trials, write_scores, write_trials, Label, ScoredTrial, Trial};
pub use wccn::{cosine, cosine_score, fit_wccn, within_class_covariance, WccnTransform};

use crate::container::{atomic_dir, decode_record, encode_record, read_file, read_text};
use crate::error::{Error, Result};
use crate::model::Embedding;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BackendConfig {
    pub wccn: bool,
    pub snorm: bool,
    /// Cohort utterances kept per phrase, in store order; 0 keeps all.
    pub cohort_size: usize,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self { wccn: true, snorm: true, cohort_size: 0 }
    }
}

/// Fitted artifacts of one phrase.
#[derive(Debug, Clone, PartialEq)]
pub struct PhraseBackend {
    pub transform: WccnTransform,
    pub cohort: Option<Cohort>,
}

/// Per-phrase WCCN transforms and s-norm cohorts.
#[derive(Debug, Clone, PartialEq)]
pub struct Backend {
    pub config: BackendConfig,
    pub phrases: Vec<PhraseBackend>,
}

impl Backend {
    /// Fit every phrase present in `background` using only that phrase's
    /// utterances.
    pub fn fit(background: &EmbeddingStore, config: BackendConfig) -> Result<Self> {
        if background.is_empty() {
            return Err(Error::InsufficientData("empty background set".into()));
        }
        let mut phrases = Vec::new();
        for p in background.phrases() {
            let utts: Vec<&Embedding> = background.of_phrase(&p).collect();
            let transform =
                if config.wccn { fit_wccn(&p, &utts)? } else { WccnTransform::identity(&p, background.dim()) };
            let cohort_utts = match config.cohort_size {
                0 => &utts[..],
                n => &utts[..n.min(utts.len())],
            };
            let cohort = if config.snorm { Some(Cohort::fit(&p, cohort_utts, &transform)?) } else { None };
            phrases.push(PhraseBackend { transform, cohort });
        }
        Ok(Self { config, phrases })
    }

    pub fn phrase(&self, phrase_id: &str) -> Result<&PhraseBackend> {
        self.phrases
            .iter()
            .find(|p| p.transform.phrase_id == phrase_id)
            .ok_or_else(|| Error::Index(format!("no back-end artifacts for phrase {phrase_id}")))
    }

    /// Raw (and, if configured, s-normalized) score of one trial.
    pub fn score(&self, trial: &Trial, store: &EmbeddingStore) -> Result<f64> {
        let e = store.get(&trial.enroll_id)?;
        let t = store.get(&trial.test_id)?;
        for u in [e, t] {
            if u.phrase_id != trial.phrase_id {
                return Err(Error::InvalidArgument(format!(
                    "utterance {} is phrase {}, trial is phrase {}",
                    u.utterance_id, u.phrase_id, trial.phrase_id
                )));
            }
        }
        let pb = self.phrase(&trial.phrase_id)?;
        let ve = pb.transform.apply(&e.values)?;
        let vt = pb.transform.apply(&t.values)?;
        let raw = cosine(&ve, &vt)?;
        match &pb.cohort {
            None => Ok(raw),
            Some(c) => {
                let exclude = [e.speaker_id.as_str(), t.speaker_id.as_str()];
                Ok(apply_snorm(raw, c.stats(&ve, &exclude)?, c.stats(&vt, &exclude)?))
            }
        }
    }

    pub fn score_all(&self, trials: &[Trial], store: &EmbeddingStore) -> Result<Vec<ScoredTrial>> {
        trials.iter().map(|t| Ok(ScoredTrial { trial: t.clone(), score: self.score(t, store)? })).collect()
    }

    /// `manifest.toml` lists phrases and cohort ids; `tensors.svt` holds, per
    /// phrase, `B`, `W̄` and the transformed cohort matrix.
    pub fn save(&self, dir: &Path) -> Result<()> {
        let mut blob = Vec::new();
        let mut entries = Vec::new();
        for pb in &self.phrases {
            let d = pb.transform.dim();
            for m in [&pb.transform.b, &pb.transform.w_bar] {
                let data: Vec<f32> = m.transpose().iter().map(|&v| v as f32).collect();
                encode_record(&[d, d], &data, &mut blob)?;
            }
            let members = pb.cohort.as_ref().map_or(&[][..], |c| &c.members[..]);
            let data: Vec<f32> = members.iter().flat_map(|m| m.vector.iter().map(|&v| v as f32)).collect();
            encode_record(&[members.len(), d], &data, &mut blob)?;
            entries.push(PhraseEntry {
                phrase_id: pb.transform.phrase_id.clone(),
                cohort_utterances: members.iter().map(|m| m.utterance_id.clone()).collect(),
                cohort_speakers: members.iter().map(|m| m.speaker_id.clone()).collect(),
            });
        }
        let manifest = BackendManifest {
            format: BACKEND_FORMAT.into(),
            version: 1,
            wccn: self.config.wccn,
            snorm: self.config.snorm,
            cohort_size: self.config.cohort_size,
            phrases: entries,
        };
        let text = toml::to_string(&manifest).map_err(|e| Error::Format(format!("backend manifest: {e}")))?;
        atomic_dir(dir, |tmp| {
            std::fs::write(tmp.join("manifest.toml"), &text).map_err(|e| Error::io(tmp.join("manifest.toml"), e))?;
            std::fs::write(tmp.join("tensors.svt"), &blob).map_err(|e| Error::io(tmp.join("tensors.svt"), e))
        })
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let mpath = dir.join("manifest.toml");
        let m: BackendManifest =
            toml::from_str(&read_text(&mpath)?).map_err(|e| Error::Format(format!("{}: {e}", mpath.display())))?;
        if m.format != BACKEND_FORMAT || m.version != 1 {
            return Err(Error::UnsupportedFormat(format!("back-end {} version {}", m.format, m.version)));
        }
        let tpath = dir.join("tensors.svt");
        let bytes = read_file(&tpath)?;
        let mut r = bytes.as_slice();
        let mut next = || -> Result<crate::container::StoredTensor> {
            decode_record(&mut r)?.ok_or_else(|| Error::Format(format!("{}: too few tensors", tpath.display())))
        };
        let mut phrases = Vec::new();
        for e in m.phrases {
            let square = |t: crate::container::StoredTensor| -> Result<DMatrix<f64>> {
                match t.dims[..] {
                    [a, b] if a == b => Ok(DMatrix::from_row_iterator(a, a, t.data.iter().map(|&v| v as f64))),
                    _ => Err(Error::Format(format!("expected a square matrix, got {:?}", t.dims))),
                }
            };
            let b = square(next()?)?;
            let w_bar = square(next()?)?;
            let c = next()?;
            let n = e.cohort_utterances.len();
            if c.dims != [n, b.nrows()] || e.cohort_speakers.len() != n {
                return Err(Error::Format(format!("phrase {}: cohort shape {:?} disagrees with manifest", e.phrase_id, c.dims)));
            }
            let cohort = m.snorm.then(|| Cohort {
                phrase_id: e.phrase_id.clone(),
                members: (0..n)
                    .map(|i| CohortMember {
                        utterance_id: e.cohort_utterances[i].clone(),
                        speaker_id: e.cohort_speakers[i].clone(),
                        vector: c.data[i * b.nrows()..(i + 1) * b.nrows()].iter().map(|&v| v as f64).collect(),
                    })
                    .collect(),
            });
            phrases.push(PhraseBackend { transform: WccnTransform { phrase_id: e.phrase_id, b, w_bar }, cohort });
        }
        Ok(Self { config: BackendConfig { wccn: m.wccn, snorm: m.snorm, cohort_size: m.cohort_size }, phrases })
    }
}

const BACKEND_FORMAT: &str = "svtk-backend";

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PhraseEntry {
    phrase_id: String,
    cohort_utterances: Vec<String>,
    cohort_speakers: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BackendManifest {
    format: String,
    version: u32,
    wccn: bool,
    snorm: bool,
    cohort_size: usize,
    phrases: Vec<PhraseEntry>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store() -> EmbeddingStore {
        let mut v = Vec::new();
        for p in ["p1", "p2"] {
            for s in 0..4 {
                for u in 0..3 {
                    let values = (0..6).map(|j| ((s * 7 + u * 3 + j * 5 + p.len()) % 11) as f32 - 5.0 + (j == s) as u8 as f32 * 4.0).collect();
                    v.push(Embedding { utterance_id: format!("{p}-{s}-{u}"), speaker_id: format!("s{s}"), phrase_id: p.into(), values });
                }
            }
        }
        EmbeddingStore::new(v).unwrap()
    }

    #[test]
    fn save_load_round_trip_scores_match() {
        let st = store();
        let b = Backend::fit(&st, BackendConfig::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        b.save(&dir.path().join("be")).unwrap();
        let l = Backend::load(&dir.path().join("be")).unwrap();
        let trial = Trial::new("p1-0-0", "p1-0-1", "p1", Label::Target);
        let (x, y) = (b.score(&trial, &st).unwrap(), l.score(&trial, &st).unwrap());
        assert!((x - y).abs() < 1e-4);
    }

    #[test]
    fn cross_phrase_trial_is_refused() {
        let st = store();
        let b = Backend::fit(&st, BackendConfig::default()).unwrap();
        let trial = Trial::new("p1-0-0", "p2-0-1", "p1", Label::Target);
        assert!(matches!(b.score(&trial, &st), Err(Error::InvalidArgument(_))));
        let trial = Trial::new("p1-0-0", "p1-0-1", "p3", Label::Target);
        assert!(b.score(&trial, &st).is_err());
    }
}
