use rand::Rng;

use crate::error::Result;
use crate::nn::{relu, relu_backward, BatchNorm, BnCache, Conv2d, Mode, Param, Parameterized, Scalar, Tensor};

/// Pre-activation residual unit:
///
/// ```text
/// a = relu(bn1(x))
/// F = conv2(relu(bn2(conv1(a))))
/// y = shortcut + F,  shortcut = x  or  proj(a) when shape changes
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualBlock<T> {
    pub bn1: BatchNorm<T>,
    pub conv1: Conv2d<T>,
    pub bn2: BatchNorm<T>,
    pub conv2: Conv2d<T>,
    pub projection: Option<Conv2d<T>>,
    pub stride: usize,
}

pub struct BlockCache<T> {
    x: Tensor<T>,
    bn1: Option<BnCache<T>>,
    a: Tensor<T>,
    bn2: Option<BnCache<T>>,
    r: Tensor<T>,
}

impl<T: Scalar> ResidualBlock<T> {
    /// `next_layer` numbers the parameterized layers; it is advanced past
    /// this block's layers.
    pub fn new(next_layer: &mut usize, in_ch: usize, out_ch: usize, stride: usize) -> Self {
        let mut name = || {
            let n = format!("layer{}", *next_layer);
            *next_layer += 1;
            n
        };
        let bn1 = BatchNorm::new(&name(), in_ch, false);
        let conv1 = Conv2d::new(&name(), in_ch, out_ch, 3, stride, false);
        let bn2 = BatchNorm::new(&name(), out_ch, false);
        let conv2 = Conv2d::new(&name(), out_ch, out_ch, 3, 1, true);
        let projection = (stride != 1 || in_ch != out_ch).then(|| Conv2d::new(&name(), in_ch, out_ch, 1, stride, true));
        Self { bn1, conv1, bn2, conv2, projection, stride }
    }

    pub fn init(&mut self, rng: &mut impl Rng) {
        self.conv1.init_he(rng);
        self.conv2.init_he(rng);
        if let Some(p) = self.projection.as_mut() {
            p.init_he(rng);
        }
    }

    pub fn output_dims(&self, input: &[usize]) -> Result<Vec<usize>> {
        self.conv1.output_dims(input)
    }

    pub fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<(Tensor<T>, Option<BlockCache<T>>)> {
        let (b1, c1) = self.bn1.forward(x, mode)?;
        let a = relu(&b1);
        let h = self.conv1.forward(&a)?;
        let (b2, c2) = self.bn2.forward(&h, mode)?;
        let r = relu(&b2);
        let mut y = self.conv2.forward(&r)?;
        match &self.projection {
            Some(p) => y.add_assign(&p.forward(&a)?)?,
            None => y.add_assign(x)?,
        }
        let cache = (mode == Mode::Train).then(|| BlockCache { x: x.clone(), bn1: c1, a, bn2: c2, r });
        Ok((y, cache))
    }

    pub fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let a = relu(&self.bn1.infer(x)?);
        let r = relu(&self.bn2.infer(&self.conv1.forward(&a)?)?);
        let mut y = self.conv2.forward(&r)?;
        match &self.projection {
            Some(p) => y.add_assign(&p.forward(&a)?)?,
            None => y.add_assign(x)?,
        }
        Ok(y)
    }

    pub fn backward(&mut self, cache: &BlockCache<T>, grad_y: &Tensor<T>) -> Result<Tensor<T>> {
        let gr = self.conv2.backward(&cache.r, grad_y)?;
        let gb2 = relu_backward(&cache.r, &gr)?;
        let gh = self.bn2.backward(cache.bn2.as_ref().expect("train cache"), &gb2)?;
        let mut ga = self.conv1.backward(&cache.a, &gh)?;
        if let Some(p) = self.projection.as_mut() {
            ga.add_assign(&p.backward(&cache.a, grad_y)?)?;
        }
        let gb1 = relu_backward(&cache.a, &ga)?;
        let mut gx = self.bn1.backward(cache.bn1.as_ref().expect("train cache"), &gb1)?;
        if self.projection.is_none() {
            gx.add_assign(grad_y)?;
        }
        debug_assert_eq!(gx.dims(), cache.x.dims());
        Ok(gx)
    }

    pub fn batchnorms(&self) -> [&BatchNorm<T>; 2] {
        [&self.bn1, &self.bn2]
    }

    pub fn batchnorms_mut(&mut self) -> [&mut BatchNorm<T>; 2] {
        [&mut self.bn1, &mut self.bn2]
    }
}

impl<T: Scalar> Parameterized<T> for ResidualBlock<T> {
    fn params(&self) -> Vec<&Param<T>> {
        let mut v = self.bn1.params();
        v.extend(self.conv1.params());
        v.extend(self.bn2.params());
        v.extend(self.conv2.params());
        if let Some(p) = &self.projection {
            v.extend(p.params());
        }
        v
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        let mut v = self.bn1.params_mut();
        v.extend(self.conv1.params_mut());
        v.extend(self.bn2.params_mut());
        v.extend(self.conv2.params_mut());
        if let Some(p) = self.projection.as_mut() {
            v.extend(p.params_mut());
        }
        v
    }
}
