//! Phrase-dependent within-class covariance normalization and cosine scoring.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{length_normalize, Embedding};

/// Regularizer added to the within-class covariance.
pub const WCCN_RIDGE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct WccnTransform {
    pub phrase_id: String,
    /// Lower-triangular `B` with `B B^T = W̄^-1`.
    pub b: DMatrix<f64>,
    /// `W̄ = W + ½I`.
    pub w_bar: DMatrix<f64>,
}

impl WccnTransform {
    /// Build from a within-class covariance `W`.
    pub fn from_covariance(phrase_id: &str, w: DMatrix<f64>) -> Result<Self> {
        if !w.is_square() || w.nrows() == 0 {
            return Err(Error::Dimension(format!("covariance is {}x{}", w.nrows(), w.ncols())));
        }
        let d = w.nrows();
        let w_bar = &w + DMatrix::identity(d, d) * WCCN_RIDGE;
        let w_bar = (&w_bar + w_bar.transpose()) * 0.5;
        let inv = w_bar
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Degenerate("regularized covariance is not positive definite".into()))?
            .inverse();
        let inv = (&inv + inv.transpose()) * 0.5;
        let b = inv
            .cholesky()
            .ok_or_else(|| Error::Degenerate("inverse covariance is not positive definite".into()))?
            .l();
        Ok(Self { phrase_id: phrase_id.into(), b, w_bar })
    }

    /// Identity-covariance-free transform, `B = I`.
    pub fn identity(phrase_id: &str, dim: usize) -> Self {
        Self { phrase_id: phrase_id.into(), b: DMatrix::identity(dim, dim), w_bar: DMatrix::identity(dim, dim) }
    }

    pub fn dim(&self) -> usize {
        self.b.nrows()
    }

    /// `B^T x`.
    pub fn apply(&self, x: &[f32]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::Dimension(format!("embedding has {} values, transform expects {}", x.len(), self.dim())));
        }
        let v = DVector::from_iterator(x.len(), x.iter().map(|&v| v as f64));
        Ok(self.b.tr_mul(&v).iter().copied().collect())
    }
}

/// Average of the biased per-speaker covariances of length-normalized
/// vectors; speakers with a single utterance contribute nothing.
pub fn within_class_covariance(groups: &[Vec<Vec<f32>>]) -> Result<DMatrix<f64>> {
    let dim = groups
        .iter()
        .flatten()
        .map(Vec::len)
        .next()
        .ok_or_else(|| Error::InsufficientData("no embeddings".into()))?;
    let mut w = DMatrix::<f64>::zeros(dim, dim);
    let mut used = 0usize;
    for utts in groups.iter().filter(|g| g.len() >= 2) {
        let rows = utts.iter().map(|u| length_normalize(u)).collect::<Result<Vec<_>>>()?;
        let n = rows.len();
        let x = DMatrix::from_fn(n, dim, |i, j| rows[i].get(j).copied().unwrap_or(f32::NAN) as f64);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::Dimension("embeddings of different widths".into()));
        }
        let mean = x.row_mean();
        let centered = DMatrix::from_fn(n, dim, |i, j| x[(i, j)] - mean[j]);
        w += centered.tr_mul(&centered) / n as f64;
        used += 1;
    }
    if used == 0 {
        return Err(Error::InsufficientData("no speaker has two or more utterances".into()));
    }
    Ok(w / used as f64)
}

/// Fit WCCN for one phrase from its embeddings, grouped by speaker.
pub fn fit_wccn(phrase_id: &str, embeddings: &[&Embedding]) -> Result<WccnTransform> {
    if let Some(e) = embeddings.iter().find(|e| e.phrase_id != phrase_id) {
        return Err(Error::InvalidArgument(format!(
            "utterance {} belongs to phrase {}, not {phrase_id}",
            e.utterance_id, e.phrase_id
        )));
    }
    let mut speakers: Vec<&str> = embeddings.iter().map(|e| e.speaker_id.as_str()).collect();
    speakers.sort_unstable();
    speakers.dedup();
    if speakers.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "phrase {phrase_id}: WCCN needs at least 2 speakers, got {}",
            speakers.len()
        )));
    }
    let groups: Vec<Vec<Vec<f32>>> = speakers
        .iter()
        .map(|s| embeddings.iter().filter(|e| e.speaker_id == *s).map(|e| e.values.clone()).collect())
        .collect();
    WccnTransform::from_covariance(phrase_id, within_class_covariance(&groups)?)
}

/// Cosine of the angle between two vectors.
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Dimension(format!("cosine of {}- and {}-d vectors", a.len(), b.len())));
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::Degenerate("cosine of a zero-norm vector".into()));
    }
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// Cosine score after WCCN; the transform must belong to `phrase_id`.
pub fn cosine_score(e1: &[f32], e2: &[f32], t: &WccnTransform, phrase_id: &str) -> Result<f64> {
    if t.phrase_id != phrase_id {
        return Err(Error::InvalidArgument(format!(
            "trial phrase {phrase_id} scored with the transform of phrase {}",
            t.phrase_id
        )));
    }
    cosine(&t.apply(e1)?, &t.apply(e2)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_covariance_gives_scaled_identity() {
        let t = WccnTransform::from_covariance("p", DMatrix::identity(4, 4)).unwrap();
        let expect = 1.0 / 1.5f64.sqrt();
        for i in 0..4 {
            for j in 0..4 {
                let e = if i == j { expect } else { 0.0 };
                assert!((t.b[(i, j)] - e).abs() < 1e-12);
            }
        }
        assert!((expect - 0.8165).abs() < 1e-4);
    }

    #[test]
    fn identical_utterances_give_root_two_scaling() {
        let e = |s: &str, v: Vec<f32>| Embedding { utterance_id: String::new(), speaker_id: s.into(), phrase_id: "p".into(), values: v };
        let data = [e("a", vec![1.0, 0.0]), e("a", vec![1.0, 0.0]), e("b", vec![0.0, 2.0]), e("b", vec![0.0, 2.0])];
        let refs: Vec<&Embedding> = data.iter().collect();
        let t = fit_wccn("p", &refs).unwrap();
        assert!((t.b[(0, 0)] - 2f64.sqrt()).abs() < 1e-12 && (t.b[(1, 1)] - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn one_speaker_is_insufficient() {
        let e = Embedding { utterance_id: String::new(), speaker_id: "a".into(), phrase_id: "p".into(), values: vec![1.0, 0.0] };
        assert!(matches!(fit_wccn("p", &[&e, &e]), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn cosine_examples_and_phrase_guard() {
        let t = WccnTransform::identity("p1", 3);
        let s = std::f32::consts::FRAC_1_SQRT_2;
        let v = cosine_score(&[1.0, 0.0, 0.0], &[s, s, 0.0], &t, "p1").unwrap();
        assert!((v - 0.70711).abs() < 1e-5);
        assert_eq!(cosine_score(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0], &t, "p1").unwrap(), 1.0);
        assert_eq!(cosine_score(&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &t, "p1").unwrap(), 0.0);
        assert!(matches!(cosine_score(&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &t, "p2"), Err(Error::InvalidArgument(_))));
        assert!(matches!(cosine_score(&[0.0; 3], &[0.0, 1.0, 0.0], &t, "p1"), Err(Error::Degenerate(_))));
    }
}
