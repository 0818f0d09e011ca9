use rand::Rng;

use super::param::{Param, Parameterized};
use super::tensor::{gemm, MatRef, Scalar, Tensor};
use crate::error::{Error, Result};

/// Fully connected layer, `y = x W^T + b` with `W` stored `[out, in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    pub weight: Param<T>,
    pub bias: Param<T>,
    pub inputs: usize,
    pub outputs: usize,
}

impl<T: Scalar> Dense<T> {
    pub fn new(prefix: &str, inputs: usize, outputs: usize) -> Self {
        Self {
            weight: Param::zeros(format!("{prefix}.weight"), &[outputs, inputs]),
            bias: Param::zeros(format!("{prefix}.bias"), &[outputs]),
            inputs,
            outputs,
        }
    }

    /// Fan-in scaled Gaussian weights (variance 1/inputs), zero bias.
    pub fn init(&mut self, rng: &mut impl Rng) {
        let std = (1.0 / self.inputs as f64).sqrt();
        self.weight = Param::normal(self.weight.name.clone(), &self.weight.dims, std, rng);
    }

    fn check(&self, x: &Tensor<T>) -> Result<usize> {
        let (n, f) = x.dims2()?;
        if f != self.inputs {
            return Err(Error::Dimension(format!(
                "dense {} expects {} features, got {f}",
                self.weight.name, self.inputs
            )));
        }
        Ok(n)
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let n = self.check(x)?;
        let mut out = Vec::with_capacity(n * self.outputs);
        for _ in 0..n {
            out.extend_from_slice(&self.bias.value);
        }
        gemm(
            MatRef::new(x.data(), n, self.inputs),
            MatRef::new(&self.weight.value, self.outputs, self.inputs).t(),
            T::one(),
            &mut out,
        );
        Tensor::from_vec(vec![n, self.outputs], out)
    }

    pub fn backward(&mut self, x: &Tensor<T>, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let n = self.check(x)?;
        if grad_out.dims() != [n, self.outputs] {
            return Err(Error::Dimension(format!("dense grad {:?}", grad_out.dims())));
        }
        let g = MatRef::new(grad_out.data(), n, self.outputs);
        let mut gw = vec![T::zero(); self.outputs * self.inputs];
        gemm(g.t(), MatRef::new(x.data(), n, self.inputs), T::zero(), &mut gw);
        self.weight.accumulate(&gw);
        let mut gb = vec![T::zero(); self.outputs];
        for row in grad_out.data().chunks_exact(self.outputs) {
            for (a, &b) in gb.iter_mut().zip(row) {
                *a = *a + b;
            }
        }
        self.bias.accumulate(&gb);
        let mut gx = vec![T::zero(); n * self.inputs];
        gemm(g, MatRef::new(&self.weight.value, self.outputs, self.inputs), T::zero(), &mut gx);
        Tensor::from_vec(vec![n, self.inputs], gx)
    }
}

impl<T: Scalar> Parameterized<T> for Dense<T> {
    fn params(&self) -> Vec<&Param<T>> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        vec![&mut self.weight, &mut self.bias]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forward_matches_hand_computation() {
        let mut d = Dense::<f64>::new("d", 2, 2);
        d.weight.value = vec![1.0, 2.0, 3.0, 4.0];
        d.bias.value = vec![0.5, -0.5];
        let x = Tensor::from_vec(vec![1, 2], vec![1.0, 1.0]).unwrap();
        assert_eq!(d.forward(&x).unwrap().data(), &[3.5, 6.5]);
    }

    #[test]
    fn wrong_width_is_rejected() {
        let d = Dense::<f64>::new("d", 3, 2);
        assert!(d.forward(&Tensor::zeros(&[1, 2])).is_err());
    }
}
