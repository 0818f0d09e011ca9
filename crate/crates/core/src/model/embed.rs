use rayon::prelude::*;

use super::network::Network;
use crate::error::{Error, Result};
use crate::features::FixedSpectrogram;
use crate::nn::Tensor;

/// Penultimate-layer activation of one utterance with its labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub utterance_id: String,
    pub speaker_id: String,
    pub phrase_id: String,
    pub values: Vec<f32>,
}

/// Stack spectrograms into an `[N, 257, W, 1]` batch.
pub fn input_tensor(xs: &[&FixedSpectrogram]) -> Result<Tensor<f32>> {
    let first = xs.first().ok_or_else(|| Error::InvalidArgument("empty batch".into()))?;
    let (h, w) = (first.height(), first.width());
    let mut data = Vec::with_capacity(xs.len() * h * w);
    for x in xs {
        if x.width() != w {
            return Err(Error::Dimension(format!("batch mixes widths {w} and {}", x.width())));
        }
        data.extend_from_slice(x.bins());
    }
    Tensor::from_vec(vec![xs.len(), h, w, 1], data)
}

/// Global-average-pool output for one input, batch-norm in infer mode.
pub fn extract_embedding(net: &Network<f32>, x: &FixedSpectrogram) -> Result<Vec<f32>> {
    let out = net.infer(&input_tensor(&[x])?)?;
    let e = out.embedding.into_data();
    if e.iter().any(|v| !v.is_finite()) {
        return Err(Error::Degenerate("embedding has non-finite values".into()));
    }
    Ok(e)
}

/// One embedding per input, computed in parallel. Each input runs alone so
/// results do not depend on the thread count.
pub fn extract_embeddings(net: &Network<f32>, xs: &[FixedSpectrogram]) -> Result<Vec<Vec<f32>>> {
    xs.par_iter().map(|x| extract_embedding(net, x)).collect()
}

/// `e / ||e||`, accumulated in double precision.
pub fn length_normalize(e: &[f32]) -> Result<Vec<f32>> {
    let norm = e.iter().map(|&v| v as f64 * v as f64).sum::<f64>().sqrt();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(Error::Degenerate(format!("cannot length-normalize an embedding of norm {norm}")));
    }
    Ok(e.iter().map(|&v| (v as f64 / norm) as f32).collect())
}
