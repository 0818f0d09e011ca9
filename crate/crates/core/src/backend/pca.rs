//! Principal-component projection for visualizing embeddings.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Pca {
    pub mean: Vec<f64>,
    /// `k` unit-norm principal axes, by decreasing variance.
    pub axes: Vec<Vec<f64>>,
    /// Sample variance (1/(n-1)) along each axis.
    pub variances: Vec<f64>,
}

impl Pca {
    /// Fit the top `k` axes through a thin SVD of the centered data. Each
    /// axis is signed so that its largest-magnitude entry is positive.
    pub fn fit(data: &[Vec<f32>], k: usize) -> Result<Self> {
        let n = data.len();
        let d = data.first().map_or(0, Vec::len);
        if k == 0 || k > d {
            return Err(Error::InvalidArgument(format!("cannot take {k} components of {d}-d data")));
        }
        if n < k + 1 {
            return Err(Error::RankDeficient(format!("{n} points cannot span {k} components")));
        }
        if data.iter().any(|r| r.len() != d) {
            return Err(Error::Dimension("rows of different widths".into()));
        }
        let x = DMatrix::from_fn(n, d, |i, j| data[i][j] as f64);
        let mean: Vec<f64> = x.row_mean().iter().copied().collect();
        let centered = DMatrix::from_fn(n, d, |i, j| x[(i, j)] - mean[j]);
        let svd = centered.svd(false, true);
        let v_t = svd.v_t.expect("requested V^T");
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
        if svd.singular_values[order[0]] == 0.0 {
            return Err(Error::RankDeficient("data has no variance".into()));
        }
        let mut axes = Vec::with_capacity(k);
        let mut variances = Vec::with_capacity(k);
        for &i in order.iter().take(k) {
            let mut axis: Vec<f64> = v_t.row(i).iter().copied().collect();
            let lead = axis.iter().copied().fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
            if lead < 0.0 {
                axis.iter_mut().for_each(|v| *v = -*v);
            }
            axes.push(axis);
            let s = svd.singular_values[i];
            variances.push(s * s / (n - 1) as f64);
        }
        Ok(Self { mean, axes, variances })
    }

    pub fn project(&self, x: &[f32]) -> Result<Vec<f64>> {
        if x.len() != self.mean.len() {
            return Err(Error::Dimension(format!("{}-d point for {}-d projection", x.len(), self.mean.len())));
        }
        Ok(self
            .axes
            .iter()
            .map(|a| a.iter().zip(x).zip(&self.mean).map(|((a, &v), m)| a * (v as f64 - m)).sum())
            .collect())
    }
}

/// Project every row of `data` onto its own top-`k` principal axes.
pub fn pca_project(data: &[Vec<f32>], k: usize) -> Result<Vec<Vec<f64>>> {
    let pca = Pca::fit(data, k)?;
    data.iter().map(|x| pca.project(x)).collect()
}
