//! Parameter-free layers: ReLU, max pooling and global average pooling.

use super::conv::same_padding;
use super::tensor::{Scalar, Tensor};
use crate::error::{Error, Result};

pub fn relu<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| if v > T::zero() { v } else { T::zero() })
}

/// Backward through ReLU given its forward output.
pub fn relu_backward<T: Scalar>(y: &Tensor<T>, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
    if y.dims() != grad_out.dims() {
        return Err(Error::Dimension(format!("relu grad {:?} vs {:?}", grad_out.dims(), y.dims())));
    }
    let data = y
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&v, &g)| if v > T::zero() { g } else { T::zero() })
        .collect();
    Tensor::from_vec(y.dims().to_vec(), data)
}

/// Max pooling with "same" padding. Padded cells never win.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MaxPool2d {
    pub kernel: usize,
    pub stride: usize,
}

/// Flat input index of the winner of every output cell.
#[derive(Debug, Clone)]
pub struct PoolCache {
    argmax: Vec<usize>,
    in_dims: Vec<usize>,
}

impl MaxPool2d {
    pub fn new(kernel: usize, stride: usize) -> Self {
        assert!(kernel >= 1 && stride >= 1);
        Self { kernel, stride }
    }

    pub fn output_dims(&self, input: &[usize]) -> Result<Vec<usize>> {
        match *input {
            [n, h, w, c] => Ok(vec![n, same_padding(h, self.kernel, self.stride).0, same_padding(w, self.kernel, self.stride).0, c]),
            _ => Err(Error::Dimension(format!("maxpool expects [N,H,W,C], got {input:?}"))),
        }
    }

    pub fn forward<T: Scalar>(&self, x: &Tensor<T>) -> Result<(Tensor<T>, PoolCache)> {
        let (n, h, w, c) = x.dims4()?;
        let (oh, pt) = same_padding(h, self.kernel, self.stride);
        let (ow, pl) = same_padding(w, self.kernel, self.stride);
        let mut out = Tensor::zeros(&[n, oh, ow, c]);
        let mut argmax = vec![0usize; out.len()];
        let xd = x.data();
        let od = out.data_mut();
        for b in 0..n {
            for oy in 0..oh {
                let y0 = (oy * self.stride) as isize - pt as isize;
                for ox in 0..ow {
                    let x0 = (ox * self.stride) as isize - pl as isize;
                    let obase = ((b * oh + oy) * ow + ox) * c;
                    for ch in 0..c {
                        let mut best = T::neg_infinity();
                        let mut best_i = usize::MAX;
                        // scan order is row-major; ties keep the first
                        for ky in 0..self.kernel {
                            let iy = y0 + ky as isize;
                            if iy < 0 || iy as usize >= h {
                                continue;
                            }
                            for kx in 0..self.kernel {
                                let ix = x0 + kx as isize;
                                if ix < 0 || ix as usize >= w {
                                    continue;
                                }
                                let idx = ((b * h + iy as usize) * w + ix as usize) * c + ch;
                                if best_i == usize::MAX || xd[idx] > best {
                                    best = xd[idx];
                                    best_i = idx;
                                }
                            }
                        }
                        od[obase + ch] = best;
                        argmax[obase + ch] = best_i;
                    }
                }
            }
        }
        Ok((out, PoolCache { argmax, in_dims: x.dims().to_vec() }))
    }

    pub fn backward<T: Scalar>(&self, cache: &PoolCache, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        if grad_out.len() != cache.argmax.len() {
            return Err(Error::Dimension(format!(
                "maxpool grad has {} cells, forward output had {}",
                grad_out.len(),
                cache.argmax.len()
            )));
        }
        let mut gx = Tensor::zeros(&cache.in_dims);
        let gd = gx.data_mut();
        for (&i, &g) in cache.argmax.iter().zip(grad_out.data()) {
            gd[i] = gd[i] + g;
        }
        Ok(gx)
    }
}

/// `[N,H,W,C] -> [N,C]` spatial mean.
pub fn global_avgpool<T: Scalar>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let (n, h, w, c) = x.dims4()?;
    let area = (h * w) as f64;
    let mut out = Vec::with_capacity(n * c);
    for b in 0..n {
        let ex = x.example(b);
        for ch in 0..c {
            let s: f64 = ex.iter().skip(ch).step_by(c).map(|v| v.as_f64()).sum();
            out.push(T::lit(s / area));
        }
    }
    Tensor::from_vec(vec![n, c], out)
}

pub fn global_avgpool_backward<T: Scalar>(in_dims: &[usize], grad_out: &Tensor<T>) -> Result<Tensor<T>> {
    let (n, h, w, c) = match *in_dims {
        [n, h, w, c] => (n, h, w, c),
        _ => return Err(Error::Dimension(format!("avgpool input dims {in_dims:?}"))),
    };
    if grad_out.dims() != [n, c] {
        return Err(Error::Dimension(format!("avgpool grad {:?}, expected [{n},{c}]", grad_out.dims())));
    }
    let inv = T::lit(1.0 / (h * w) as f64);
    let mut gx = Tensor::zeros(in_dims);
    for (b, chunk) in gx.data_mut().chunks_exact_mut(h * w * c).enumerate() {
        let g = &grad_out.data()[b * c..(b + 1) * c];
        for px in chunk.chunks_exact_mut(c) {
            for ch in 0..c {
                px[ch] = g[ch] * inv;
            }
        }
    }
    Ok(gx)
}
