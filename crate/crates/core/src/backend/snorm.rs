//! Symmetric score normalization against a phrase-dependent cohort.

use super::wccn::{cosine, WccnTransform};
use crate::error::{Error, Result};
use crate::model::Embedding;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreStats {
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CohortMember {
    pub utterance_id: String,
    pub speaker_id: String,
    /// WCCN-transformed vector.
    pub vector: Vec<f64>,
}

/// Background utterances of one phrase, already through that phrase's WCCN.
#[derive(Debug, Clone, PartialEq)]
pub struct Cohort {
    pub phrase_id: String,
    pub members: Vec<CohortMember>,
}

impl Cohort {
    pub fn fit(phrase_id: &str, embeddings: &[&Embedding], t: &WccnTransform) -> Result<Self> {
        if t.phrase_id != phrase_id {
            return Err(Error::InvalidArgument(format!("cohort for {phrase_id} built with transform of {}", t.phrase_id)));
        }
        let mut members = Vec::with_capacity(embeddings.len());
        for e in embeddings {
            if e.phrase_id != phrase_id {
                return Err(Error::InvalidArgument(format!(
                    "cohort utterance {} is phrase {}, not {phrase_id}",
                    e.utterance_id, e.phrase_id
                )));
            }
            members.push(CohortMember {
                utterance_id: e.utterance_id.clone(),
                speaker_id: e.speaker_id.clone(),
                vector: t.apply(&e.values)?,
            });
        }
        if members.len() < 2 {
            return Err(Error::InsufficientData(format!("phrase {phrase_id}: cohort needs at least 2 utterances")));
        }
        Ok(Self { phrase_id: phrase_id.into(), members })
    }

    /// Mean and population standard deviation of the cosine scores of `v`
    /// (already transformed) against every member whose speaker is not in
    /// `exclude`.
    pub fn stats(&self, v: &[f64], exclude: &[&str]) -> Result<ScoreStats> {
        let scores = self
            .members
            .iter()
            .filter(|m| !exclude.contains(&m.speaker_id.as_str()))
            .map(|m| cosine(v, &m.vector))
            .collect::<Result<Vec<f64>>>()?;
        score_stats(&scores)
    }
}

pub fn score_stats(scores: &[f64]) -> Result<ScoreStats> {
    if scores.len() < 2 {
        return Err(Error::InsufficientData(format!("cohort of {} scores, need at least 2", scores.len())));
    }
    let n = scores.len() as f64;
    let mean = scores.iter().sum::<f64>() / n;
    let std = (scores.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / n).sqrt();
    if !(std > 0.0) {
        return Err(Error::Degenerate("cohort scores have zero spread".into()));
    }
    Ok(ScoreStats { mean, std })
}

/// `½((s - μe)/σe + (s - μt)/σt)`.
pub fn apply_snorm(s: f64, enroll: ScoreStats, test: ScoreStats) -> f64 {
    0.5 * ((s - enroll.mean) / enroll.std + (s - test.mean) / test.std)
}
