use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::tensor::Scalar;

/// A trainable array with its accumulated gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Param<T> {
    pub name: String,
    pub dims: Vec<usize>,
    pub value: Vec<T>,
    pub grad: Vec<T>,
}

impl<T: Scalar> Param<T> {
    pub fn zeros(name: impl Into<String>, dims: &[usize]) -> Self {
        let n = dims.iter().product();
        Self { name: name.into(), dims: dims.to_vec(), value: vec![T::zero(); n], grad: vec![T::zero(); n] }
    }

    /// Gaussian initialization with standard deviation `std`.
    pub fn normal(name: impl Into<String>, dims: &[usize], std: f64, rng: &mut impl Rng) -> Self {
        let mut p = Self::zeros(name, dims);
        for v in p.value.iter_mut() {
            let z: f64 = StandardNormal.sample(rng);
            *v = T::lit(z * std);
        }
        p
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    pub fn zero_grad(&mut self) {
        self.grad.iter_mut().for_each(|g| *g = T::zero());
    }

    pub fn accumulate(&mut self, g: &[T]) {
        debug_assert_eq!(g.len(), self.grad.len());
        for (a, &b) in self.grad.iter_mut().zip(g) {
            *a = *a + b;
        }
    }
}

/// Anything that owns trainable parameters, visited in a fixed order.
pub trait Parameterized<T> {
    fn params(&self) -> Vec<&Param<T>>;
    fn params_mut(&mut self) -> Vec<&mut Param<T>>;

    fn zero_grad(&mut self)
    where
        T: Scalar,
    {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    fn num_parameters(&self) -> usize
    where
        T: Scalar,
    {
        self.params().iter().map(|p| p.len()).sum()
    }
}
