use super::param::{Param, Parameterized};
use super::tensor::{debug_check_finite, Scalar, Tensor};
use crate::error::{Error, Result};

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics; running statistics are updated.
    Train,
    /// Running statistics.
    Infer,
}

/// Per-channel batch normalization over every axis but the last.
///
/// Without a gain the layer only learns a shift, which loses nothing when
/// the output feeds a ReLU and then a linear layer.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm<T> {
    pub gain: Option<Param<T>>,
    pub shift: Param<T>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    /// False until the first training-mode pass.
    pub initialized: bool,
    pub channels: usize,
    pub eps: f64,
    pub momentum: f64,
}

#[derive(Debug, Clone)]
pub struct BnCache<T> {
    x_hat: Vec<T>,
    inv_std: Vec<f64>,
    dims: Vec<usize>,
}

impl<T: Scalar> BatchNorm<T> {
    pub fn new(prefix: &str, channels: usize, with_gain: bool) -> Self {
        let gain = with_gain.then(|| {
            let mut g = Param::zeros(format!("{prefix}.gain"), &[channels]);
            g.value.iter_mut().for_each(|v| *v = T::one());
            g
        });
        Self {
            gain,
            shift: Param::zeros(format!("{prefix}.shift"), &[channels]),
            running_mean: vec![0.0; channels],
            running_var: vec![1.0; channels],
            initialized: false,
            channels,
            eps: BN_EPS,
            momentum: BN_MOMENTUM,
        }
    }

    fn check(&self, x: &Tensor<T>) -> Result<()> {
        match x.dims().last() {
            Some(&c) if c == self.channels && x.dims().len() >= 2 => Ok(()),
            _ => Err(Error::Dimension(format!(
                "batchnorm {} has {} channels, input {:?}",
                self.shift.name,
                self.channels,
                x.dims()
            ))),
        }
    }

    fn gain_at(&self, c: usize) -> T {
        self.gain.as_ref().map_or(T::one(), |g| g.value[c])
    }

    /// Inference-mode normalization with the running statistics.
    pub fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.check(x)?;
        if !self.initialized {
            return Err(Error::UninitializedStats(format!(
                "batchnorm {} has no running statistics; train or load the network first",
                self.shift.name
            )));
        }
        let c = self.channels;
        let scale: Vec<T> = (0..c).map(|ch| T::lit(1.0 / (self.running_var[ch] + self.eps).sqrt())).collect();
        let mean: Vec<T> = self.running_mean.iter().map(|&m| T::lit(m)).collect();
        let mut y = Tensor::zeros(x.dims());
        for (xo, yo) in x.data().chunks_exact(c).zip(y.data_mut().chunks_exact_mut(c)) {
            for ch in 0..c {
                yo[ch] = self.gain_at(ch) * (xo[ch] - mean[ch]) * scale[ch] + self.shift.value[ch];
            }
        }
        debug_check_finite(&y, &self.shift.name);
        Ok(y)
    }

    pub fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<(Tensor<T>, Option<BnCache<T>>)> {
        self.check(x)?;
        let c = self.channels;
        let rows = x.len() / c;
        match mode {
            Mode::Infer => Ok((self.infer(x)?, None)),
            Mode::Train => {
                let mut y = Tensor::zeros(x.dims());
                let mut mean = vec![0.0f64; c];
                for xo in x.data().chunks_exact(c) {
                    for ch in 0..c {
                        mean[ch] += xo[ch].as_f64();
                    }
                }
                mean.iter_mut().for_each(|m| *m /= rows as f64);
                let mut var = vec![0.0f64; c];
                for xo in x.data().chunks_exact(c) {
                    for ch in 0..c {
                        let d = xo[ch].as_f64() - mean[ch];
                        var[ch] += d * d;
                    }
                }
                var.iter_mut().for_each(|v| *v /= rows as f64);
                let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + self.eps).sqrt()).collect();
                let mut x_hat = vec![T::zero(); x.len()];
                for ((xo, ho), yo) in x
                    .data()
                    .chunks_exact(c)
                    .zip(x_hat.chunks_exact_mut(c))
                    .zip(y.data_mut().chunks_exact_mut(c))
                {
                    for ch in 0..c {
                        let h = T::lit((xo[ch].as_f64() - mean[ch]) * inv_std[ch]);
                        ho[ch] = h;
                        yo[ch] = self.gain_at(ch) * h + self.shift.value[ch];
                    }
                }
                let unbias = if rows > 1 { rows as f64 / (rows - 1) as f64 } else { 1.0 };
                for ch in 0..c {
                    self.running_mean[ch] = self.momentum * self.running_mean[ch] + (1.0 - self.momentum) * mean[ch];
                    self.running_var[ch] =
                        self.momentum * self.running_var[ch] + (1.0 - self.momentum) * var[ch] * unbias;
                }
                self.initialized = true;
                debug_check_finite(&y, &self.shift.name);
                Ok((y, Some(BnCache { x_hat, inv_std, dims: x.dims().to_vec() })))
            }
        }
    }

    /// Training-mode backward; accumulates gain/shift gradients.
    pub fn backward(&mut self, cache: &BnCache<T>, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        if grad_out.dims() != cache.dims.as_slice() {
            return Err(Error::Dimension(format!(
                "batchnorm {} grad {:?} vs input {:?}",
                self.shift.name,
                grad_out.dims(),
                cache.dims
            )));
        }
        let c = self.channels;
        let rows = grad_out.len() / c;
        let mut sum_g = vec![0.0f64; c];
        let mut sum_gh = vec![0.0f64; c];
        for (go, ho) in grad_out.data().chunks_exact(c).zip(cache.x_hat.chunks_exact(c)) {
            for ch in 0..c {
                let g = go[ch].as_f64();
                sum_g[ch] += g;
                sum_gh[ch] += g * ho[ch].as_f64();
            }
        }
        let shift_grad: Vec<T> = sum_g.iter().map(|&v| T::lit(v)).collect();
        self.shift.accumulate(&shift_grad);
        if let Some(g) = self.gain.as_mut() {
            let gain_grad: Vec<T> = sum_gh.iter().map(|&v| T::lit(v)).collect();
            g.accumulate(&gain_grad);
        }
        let n = rows as f64;
        let mut gx = Tensor::zeros(&cache.dims);
        let coef: Vec<f64> = (0..c).map(|ch| self.gain_at(ch).as_f64() * cache.inv_std[ch]).collect();
        for ((go, ho), xo) in grad_out
            .data()
            .chunks_exact(c)
            .zip(cache.x_hat.chunks_exact(c))
            .zip(gx.data_mut().chunks_exact_mut(c))
        {
            for ch in 0..c {
                let v = coef[ch] * (go[ch].as_f64() - sum_g[ch] / n - ho[ch].as_f64() * sum_gh[ch] / n);
                xo[ch] = T::lit(v);
            }
        }
        Ok(gx)
    }
}

impl<T: Scalar> Parameterized<T> for BatchNorm<T> {
    fn params(&self) -> Vec<&Param<T>> {
        self.gain.iter().chain(std::iter::once(&self.shift)).collect()
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        self.gain.iter_mut().chain(std::iter::once(&mut self.shift)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn per_channel_stats(y: &Tensor<f64>, c: usize) -> Vec<(f64, f64)> {
        let rows = y.len() / c;
        (0..c)
            .map(|ch| {
                let vals: Vec<f64> = y.data().chunks_exact(c).map(|r| r[ch]).collect();
                let m = vals.iter().sum::<f64>() / rows as f64;
                let v = vals.iter().map(|x| (x - m).powi(2)).sum::<f64>() / rows as f64;
                (m, v.sqrt())
            })
            .collect()
    }

    #[test]
    fn constant_input_normalizes_to_zero() {
        let mut bn = BatchNorm::<f64>::new("bn", 3, true);
        let x = Tensor::full(&[2, 4, 4, 3], 5.0);
        let (y, _) = bn.forward(&x, Mode::Train).unwrap();
        assert!(y.data().iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn gain_and_shift_are_affine() {
        let mut bn = BatchNorm::<f64>::new("bn", 2, true);
        bn.gain.as_mut().unwrap().value = vec![2.0, 2.0];
        bn.shift.value = vec![3.0, 3.0];
        bn.eps = 0.0;
        let data: Vec<f64> = (0..32).map(|i| ((i * 37) % 11) as f64).collect();
        let x = Tensor::from_vec(vec![2, 2, 4, 2], data).unwrap();
        let (y, _) = bn.forward(&x, Mode::Train).unwrap();
        for (m, s) in per_channel_stats(&y, 2) {
            assert!((m - 3.0).abs() < 1e-12);
            assert!((s - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn inference_before_training_is_an_error() {
        let mut bn = BatchNorm::<f32>::new("bn", 2, false);
        let x = Tensor::zeros(&[1, 2, 2, 2]);
        assert!(matches!(bn.forward(&x, Mode::Infer), Err(Error::UninitializedStats(_))));
        bn.forward(&x, Mode::Train).unwrap();
        assert!(bn.forward(&x, Mode::Infer).is_ok());
    }

    #[test]
    fn running_stats_use_momentum() {
        let mut bn = BatchNorm::<f64>::new("bn", 1, false);
        let x = Tensor::from_vec(vec![4, 1], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        bn.forward(&x, Mode::Train).unwrap();
        assert!((bn.running_mean[0] - 0.25).abs() < 1e-12);
        // unbiased batch variance 5/3
        assert!((bn.running_var[0] - (0.9 + 0.1 * 5.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn channel_mismatch_is_a_dimension_error() {
        let mut bn = BatchNorm::<f64>::new("bn", 3, true);
        assert!(bn.forward(&Tensor::zeros(&[1, 2, 2, 2]), Mode::Train).is_err());
    }
}
