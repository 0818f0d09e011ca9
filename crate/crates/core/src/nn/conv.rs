//! 2-D convolution (cross-correlation) with "same"-style padding, lowered to
//! GEMM through an im2col buffer built one example at a time.

use rand::Rng;

use super::param::{Param, Parameterized};
use super::tensor::{debug_check_finite, gemm, MatRef, Scalar, Tensor};
use crate::error::{Error, Result};

/// Output extent and leading pad for "same" padding: `out = ceil(in/stride)`,
/// any odd remainder of the total pad goes to the bottom/right.
pub fn same_padding(input: usize, kernel: usize, stride: usize) -> (usize, usize) {
    let out = input.div_ceil(stride);
    let total = ((out - 1) * stride + kernel).saturating_sub(input);
    (out, total / 2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeometry {
    pub in_h: usize,
    pub in_w: usize,
    pub out_h: usize,
    pub out_w: usize,
    pub pad_top: usize,
    pub pad_left: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d<T> {
    /// `[out_ch, in_ch, kh, kw]`
    pub weight: Param<T>,
    pub bias: Option<Param<T>>,
    pub in_ch: usize,
    pub out_ch: usize,
    pub kh: usize,
    pub kw: usize,
    pub stride: usize,
}

impl<T: Scalar> Conv2d<T> {
    /// Zero-initialized layer; `prefix` names the parameters (`prefix.weight`).
    pub fn new(prefix: &str, in_ch: usize, out_ch: usize, kernel: usize, stride: usize, bias: bool) -> Self {
        assert!(stride >= 1 && kernel >= 1 && in_ch >= 1 && out_ch >= 1);
        Self {
            weight: Param::zeros(format!("{prefix}.weight"), &[out_ch, in_ch, kernel, kernel]),
            bias: bias.then(|| Param::zeros(format!("{prefix}.bias"), &[out_ch])),
            in_ch,
            out_ch,
            kh: kernel,
            kw: kernel,
            stride,
        }
    }

    /// He fan-in initialization of the weights; bias stays zero.
    pub fn init_he(&mut self, rng: &mut impl Rng) {
        let fan_in = (self.in_ch * self.kh * self.kw) as f64;
        self.weight = Param::normal(self.weight.name.clone(), &self.weight.dims, (2.0 / fan_in).sqrt(), rng);
    }

    fn patch_len(&self) -> usize {
        self.in_ch * self.kh * self.kw
    }

    pub fn geometry(&self, in_h: usize, in_w: usize) -> ConvGeometry {
        let (out_h, pad_top) = same_padding(in_h, self.kh, self.stride);
        let (out_w, pad_left) = same_padding(in_w, self.kw, self.stride);
        ConvGeometry { in_h, in_w, out_h, out_w, pad_top, pad_left }
    }

    pub fn output_dims(&self, input: &[usize]) -> Result<Vec<usize>> {
        match *input {
            [n, h, w, c] if c == self.in_ch => {
                let g = self.geometry(h, w);
                Ok(vec![n, g.out_h, g.out_w, self.out_ch])
            }
            _ => Err(Error::Dimension(format!(
                "conv {} expects [N,H,W,{}], got {input:?}",
                self.weight.name, self.in_ch
            ))),
        }
    }

    /// One example `[H,W,Cin]` into `col`, `[out_h*out_w x Cin*kh*kw]` with
    /// the patch ordered (channel, ky, kx) to match the weight layout.
    fn im2col(&self, x: &[T], g: &ConvGeometry, col: &mut [T]) {
        let k = self.patch_len();
        let c = self.in_ch;
        for oy in 0..g.out_h {
            for ox in 0..g.out_w {
                let row = &mut col[(oy * g.out_w + ox) * k..][..k];
                let y0 = (oy * self.stride) as isize - g.pad_top as isize;
                let x0 = (ox * self.stride) as isize - g.pad_left as isize;
                for ky in 0..self.kh {
                    let iy = y0 + ky as isize;
                    for kx in 0..self.kw {
                        let ix = x0 + kx as isize;
                        let inside = iy >= 0 && ix >= 0 && (iy as usize) < g.in_h && (ix as usize) < g.in_w;
                        let off = ky * self.kw + kx;
                        if inside {
                            let base = (iy as usize * g.in_w + ix as usize) * c;
                            for ci in 0..c {
                                row[ci * self.kh * self.kw + off] = x[base + ci];
                            }
                        } else {
                            for ci in 0..c {
                                row[ci * self.kh * self.kw + off] = T::zero();
                            }
                        }
                    }
                }
            }
        }
    }

    fn col2im(&self, col: &[T], g: &ConvGeometry, gx: &mut [T]) {
        let k = self.patch_len();
        let c = self.in_ch;
        for oy in 0..g.out_h {
            for ox in 0..g.out_w {
                let row = &col[(oy * g.out_w + ox) * k..][..k];
                let y0 = (oy * self.stride) as isize - g.pad_top as isize;
                let x0 = (ox * self.stride) as isize - g.pad_left as isize;
                for ky in 0..self.kh {
                    let iy = y0 + ky as isize;
                    if iy < 0 || iy as usize >= g.in_h {
                        continue;
                    }
                    for kx in 0..self.kw {
                        let ix = x0 + kx as isize;
                        if ix < 0 || ix as usize >= g.in_w {
                            continue;
                        }
                        let base = (iy as usize * g.in_w + ix as usize) * c;
                        let off = ky * self.kw + kx;
                        for ci in 0..c {
                            gx[base + ci] = gx[base + ci] + row[ci * self.kh * self.kw + off];
                        }
                    }
                }
            }
        }
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let out_dims = self.output_dims(x.dims())?;
        let (n, h, w, _) = x.dims4()?;
        let g = self.geometry(h, w);
        let p = g.out_h * g.out_w;
        let k = self.patch_len();
        let mut out = Tensor::zeros(&out_dims);
        let mut col = vec![T::zero(); p * k];
        let wmat = MatRef::new(&self.weight.value, self.out_ch, k);
        for i in 0..n {
            self.im2col(x.example(i), &g, &mut col);
            let o = &mut out.data_mut()[i * p * self.out_ch..(i + 1) * p * self.out_ch];
            gemm(MatRef::new(&col, p, k), wmat.t(), T::zero(), o);
            if let Some(b) = &self.bias {
                for px in o.chunks_exact_mut(self.out_ch) {
                    for (v, &bv) in px.iter_mut().zip(&b.value) {
                        *v = *v + bv;
                    }
                }
            }
        }
        debug_check_finite(&out, &self.weight.name);
        Ok(out)
    }

    /// Gradients w.r.t. input, weights and bias, without touching the layer.
    pub fn gradients(&self, x: &Tensor<T>, grad_out: &Tensor<T>) -> Result<ConvGrads<T>> {
        let out_dims = self.output_dims(x.dims())?;
        if grad_out.dims() != out_dims.as_slice() {
            return Err(Error::Dimension(format!(
                "conv {} grad_out {:?}, forward output {out_dims:?}",
                self.weight.name,
                grad_out.dims()
            )));
        }
        let (n, h, w, _) = x.dims4()?;
        let g = self.geometry(h, w);
        let p = g.out_h * g.out_w;
        let k = self.patch_len();
        let mut gx = Tensor::zeros(x.dims());
        let mut gw = vec![T::zero(); self.out_ch * k];
        let mut gb = self.bias.as_ref().map(|_| vec![T::zero(); self.out_ch]);
        let mut col = vec![T::zero(); p * k];
        let mut gcol = vec![T::zero(); p * k];
        let wmat = MatRef::new(&self.weight.value, self.out_ch, k);
        let per_in = h * w * self.in_ch;
        for i in 0..n {
            let go = grad_out.example(i);
            self.im2col(x.example(i), &g, &mut col);
            // dW += G^T col
            gemm(MatRef::new(go, p, self.out_ch).t(), MatRef::new(&col, p, k), T::one(), &mut gw);
            // dcol = G W
            gemm(MatRef::new(go, p, self.out_ch), wmat, T::zero(), &mut gcol);
            self.col2im(&gcol, &g, &mut gx.data_mut()[i * per_in..(i + 1) * per_in]);
            if let Some(gb) = gb.as_mut() {
                for px in go.chunks_exact(self.out_ch) {
                    for (a, &b) in gb.iter_mut().zip(px) {
                        *a = *a + b;
                    }
                }
            }
        }
        Ok(ConvGrads { input: gx, weight: gw, bias: gb })
    }

    /// Accumulate parameter gradients and return the input gradient.
    pub fn backward(&mut self, x: &Tensor<T>, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let g = self.gradients(x, grad_out)?;
        self.weight.accumulate(&g.weight);
        if let (Some(b), Some(gb)) = (self.bias.as_mut(), g.bias.as_ref()) {
            b.accumulate(gb);
        }
        Ok(g.input)
    }
}

#[derive(Debug, Clone)]
pub struct ConvGrads<T> {
    pub input: Tensor<T>,
    pub weight: Vec<T>,
    pub bias: Option<Vec<T>>,
}

impl<T: Scalar> Parameterized<T> for Conv2d<T> {
    fn params(&self) -> Vec<&Param<T>> {
        std::iter::once(&self.weight).chain(self.bias.as_ref()).collect()
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        std::iter::once(&mut self.weight).chain(self.bias.as_mut()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_padding_follows_halving_pattern() {
        assert_eq!(same_padding(257, 7, 2), (129, 3));
        assert_eq!(same_padding(800, 7, 2), (400, 2));
        assert_eq!(same_padding(65, 3, 2), (33, 1));
        assert_eq!(same_padding(65, 1, 2), (33, 0));
        assert_eq!(same_padding(5, 3, 1), (5, 1));
    }

    #[test]
    fn one_by_one_identity_kernel() {
        let mut c = Conv2d::<f64>::new("c", 1, 1, 1, 1, false);
        c.weight.value[0] = 1.0;
        let x = Tensor::from_vec(vec![1, 1, 1, 1], vec![0.37]).unwrap();
        assert_eq!(c.forward(&x).unwrap(), x);
    }

    #[test]
    fn all_ones_three_by_three_centre_is_nine() {
        let mut c = Conv2d::<f64>::new("c", 1, 1, 3, 1, false);
        c.weight.value.iter_mut().for_each(|v| *v = 1.0);
        let x = Tensor::full(&[1, 3, 3, 1], 1.0);
        let y = c.forward(&x).unwrap();
        assert_eq!(y.dims(), &[1, 3, 3, 1]);
        assert_eq!(y.data()[4], 9.0);
        assert_eq!(y.data()[0], 4.0);
    }

    #[test]
    fn stem_output_shape() {
        let c = Conv2d::<f32>::new("stem", 1, 64, 7, 2, false);
        assert_eq!(c.output_dims(&[1, 257, 800, 1]).unwrap(), vec![1, 129, 400, 64]);
        assert!(c.output_dims(&[1, 257, 800, 2]).is_err());
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let mut c = Conv2d::<f64>::new("c", 2, 3, 3, 2, true);
        c.init_he(&mut rng);
        let x = Tensor::full(&[2, 5, 5, 2], 0.5);
        let g = c.gradients(&x, &Tensor::zeros(&[2, 3, 3, 3])).unwrap();
        assert!(g.input.data().iter().all(|&v| v == 0.0));
        assert!(g.weight.iter().all(|&v| v == 0.0));
        assert!(g.bias.unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_pixel_upstream_recovers_receptive_field() {
        let mut c = Conv2d::<f64>::new("c", 2, 1, 3, 1, false);
        c.weight.value.iter_mut().for_each(|v| *v = 0.1);
        let data: Vec<f64> = (0..5 * 5 * 2).map(|i| i as f64).collect();
        let x = Tensor::from_vec(vec![1, 5, 5, 2], data).unwrap();
        let mut go = Tensor::zeros(&[1, 5, 5, 1]);
        go.data_mut()[2 * 5 + 3] = 1.0; // output (2, 3)
        let g = c.gradients(&x, &go).unwrap();
        for ci in 0..2 {
            for ky in 0..3 {
                for kx in 0..3 {
                    let (iy, ix) = (2 + ky - 1, 3 + kx - 1);
                    let expect = x.data()[(iy * 5 + ix) * 2 + ci];
                    assert_eq!(g.weight[ci * 9 + ky * 3 + kx], expect);
                }
            }
        }
    }

    #[test]
    fn grad_out_shape_is_checked() {
        let c = Conv2d::<f64>::new("c", 1, 1, 3, 1, false);
        let x = Tensor::zeros(&[1, 4, 4, 1]);
        assert!(matches!(c.gradients(&x, &Tensor::zeros(&[1, 3, 3, 1])), Err(Error::Dimension(_))));
    }

    use rand::SeedableRng;
}
