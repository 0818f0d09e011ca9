//! Finite-difference gradient checks of every layer and of the tiny network.

use rand::Rng;
use rand_distr::StandardNormal;
use svtk::model::{Network, NetworkConfig, ResidualBlock};
use svtk::nn::{
    global_avgpool, global_avgpool_backward, relu, relu_backward, softmax_cross_entropy, BatchNorm, Conv2d, Dense,
    MaxPool2d, Mode, Parameterized, Tensor,
};

use super::{max_rel_err, numeric_gradient, probe, rng, Probe};

/// Worst relative error and the number of coordinates skipped as kinks.
#[derive(Debug, Clone, Copy, Default)]
pub struct GradReport {
    pub max_rel_err: f64,
    pub checked: usize,
    pub kinks: usize,
}

impl GradReport {
    fn add(&mut self, p: Probe) {
        match p {
            Probe::Checked(e) => {
                self.max_rel_err = self.max_rel_err.max(e);
                self.checked += 1;
            }
            Probe::Kink => self.kinks += 1,
        }
    }

    pub fn merge(&mut self, o: GradReport) {
        self.max_rel_err = self.max_rel_err.max(o.max_rel_err);
        self.checked += o.checked;
        self.kinks += o.kinks;
    }
}

fn randn(rng: &mut impl Rng, dims: &[usize]) -> Tensor<f64> {
    let n = dims.iter().product();
    Tensor::from_vec(dims.to_vec(), (0..n).map(|_| rng.sample(StandardNormal)).collect()).unwrap()
}

fn dot(a: &Tensor<f64>, b: &Tensor<f64>) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}

/// Check input and parameter gradients of a module for `L = r . f(x)`.
fn check_module<M: Parameterized<f64>>(
    m: &mut M,
    x: &Tensor<f64>,
    seed: u64,
    fwd: &dyn Fn(&mut M, &Tensor<f64>) -> Tensor<f64>,
    bwd: &dyn Fn(&mut M, &Tensor<f64>, &Tensor<f64>) -> Tensor<f64>,
) -> GradReport {
    let mut r = rng(seed ^ 0x5eed);
    let y = fwd(m, x);
    let proj = randn(&mut r, y.dims());
    m.zero_grad();
    let gx = bwd(m, x, &proj);
    let grads: Vec<Vec<f64>> = m.params().iter().map(|p| p.grad.clone()).collect();
    let mut report = GradReport::default();
    let mut xv = x.clone();
    for i in 0..x.len() {
        let x0 = xv.data()[i];
        let cell = std::cell::RefCell::new((&mut xv, &mut *m));
        let mut f = || {
            let mut c = cell.borrow_mut();
            let (xx, mm) = &mut *c;
            let xx = (**xx).clone();
            dot(&fwd(mm, &xx), &proj)
        };
        let mut set = |v: f64| cell.borrow_mut().0.data_mut()[i] = v;
        let p = probe_pair(&mut f, &mut set, x0, gx.data()[i]);
        report.add(p);
    }
    for (pi, g) in grads.iter().enumerate() {
        for i in 0..g.len() {
            let x0 = m.params()[pi].value[i];
            let cell = std::cell::RefCell::new(&mut *m);
            let mut f = || {
                let mut mm = cell.borrow_mut();
                dot(&fwd(&mut mm, x), &proj)
            };
            let mut set = |v: f64| cell.borrow_mut().params_mut()[pi].value[i] = v;
            report.add(probe_pair(&mut f, &mut set, x0, g[i]));
        }
    }
    report
}

fn probe_pair(f: &mut dyn FnMut() -> f64, set: &mut dyn FnMut(f64), x0: f64, a: f64) -> Probe {
    probe(f, set, x0, a)
}

/// Parameter-free layer: only the input gradient.
fn check_fn(x: &Tensor<f64>, seed: u64, fwd: &dyn Fn(&Tensor<f64>) -> Tensor<f64>, bwd: &dyn Fn(&Tensor<f64>, &Tensor<f64>) -> Tensor<f64>) -> GradReport {
    struct Nothing;
    impl Parameterized<f64> for Nothing {
        fn params(&self) -> Vec<&svtk::nn::Param<f64>> {
            Vec::new()
        }
        fn params_mut(&mut self) -> Vec<&mut svtk::nn::Param<f64>> {
            Vec::new()
        }
    }
    check_module(&mut Nothing, x, seed, &|_, x| fwd(x), &|_, x, g| bwd(x, g))
}

pub fn check_conv(seed: u64) -> GradReport {
    let mut r = rng(seed);
    let mut total = GradReport::default();
    for &(k, stride, bias) in &[(3, 1, true), (3, 2, false), (1, 2, true), (7, 2, false)] {
        let (cin, cout) = (r.random_range(1..4), r.random_range(1..4));
        let mut conv = Conv2d::<f64>::new("c", cin, cout, k, stride, bias);
        conv.init_he(&mut r);
        if let Some(b) = conv.bias.as_mut() {
            b.value.iter_mut().for_each(|v| *v = r.random_range(-0.5..0.5));
        }
        let dims = [2, r.random_range(3..8), r.random_range(3..8), cin];
        let x = randn(&mut r, &dims);
        total.merge(check_module(&mut conv, &x, seed, &|m, x| m.forward(x).unwrap(), &|m, x, g| m.backward(x, g).unwrap()));
    }
    total
}

pub fn check_batchnorm(seed: u64) -> GradReport {
    let mut r = rng(seed);
    let mut total = GradReport::default();
    for gain in [true, false] {
        let c = r.random_range(1..4);
        let mut bn = BatchNorm::<f64>::new("bn", c, gain);
        if let Some(g) = bn.gain.as_mut() {
            g.value.iter_mut().for_each(|v| *v = r.random_range(0.5..1.5));
        }
        bn.shift.value.iter_mut().for_each(|v| *v = r.random_range(-0.5..0.5));
        let x = randn(&mut r, &[3, 2, 3, c]);
        total.merge(check_module(
            &mut bn,
            &x,
            seed,
            &|m, x| m.forward(x, Mode::Train).unwrap().0,
            &|m, x, g| {
                let (_, cache) = m.forward(x, Mode::Train).unwrap();
                m.backward(&cache.unwrap(), g).unwrap()
            },
        ));
    }
    total
}

pub fn check_dense(seed: u64) -> GradReport {
    let mut r = rng(seed);
    let (i, o) = (r.random_range(1..6), r.random_range(2..6));
    let mut d = Dense::<f64>::new("d", i, o);
    d.init(&mut r);
    d.bias.value.iter_mut().for_each(|v| *v = r.random_range(-0.5..0.5));
    let x = randn(&mut r, &[3, i]);
    check_module(&mut d, &x, seed, &|m, x| m.forward(x).unwrap(), &|m, x, g| m.backward(x, g).unwrap())
}

/// Inputs kept at least 0.05 away from zero so no probe straddles the kink.
pub fn check_relu(seed: u64) -> GradReport {
    let mut r = rng(seed);
    let x = randn(&mut r, &[2, 3, 3, 2]).map(|v| if v.abs() < 0.05 { v + 0.1 } else { v });
    check_fn(&x, seed, &|x| relu(x), &|x, g| relu_backward(&relu(x), g).unwrap())
}

pub fn check_maxpool(seed: u64) -> GradReport {
    let mut r = rng(seed);
    let pool = MaxPool2d::new(3, 2);
    let x = randn(&mut r, &[2, 5, 6, 2]);
    check_fn(&x, seed, &|x| pool.forward(x).unwrap().0, &|x, g| {
        let (_, c) = pool.forward(x).unwrap();
        pool.backward(&c, g).unwrap()
    })
}

pub fn check_avgpool(seed: u64) -> GradReport {
    let mut r = rng(seed);
    let x = randn(&mut r, &[2, 3, 4, 3]);
    check_fn(&x, seed, &|x| global_avgpool(x).unwrap(), &|x, g| global_avgpool_backward(x.dims(), g).unwrap())
}

pub fn check_softmax_ce(seed: u64) -> GradReport {
    let mut r = rng(seed);
    let k = r.random_range(2..7);
    let mut logits: Vec<f64> = (0..4 * k).map(|_| r.random_range(-3.0..3.0)).collect();
    let labels: Vec<usize> = (0..4).map(|_| r.random_range(0..k)).collect();
    let (_, g) = softmax_cross_entropy(&Tensor::from_vec(vec![4, k], logits.clone()).unwrap(), &labels).unwrap();
    let num = numeric_gradient(&mut logits, &mut |l| {
        softmax_cross_entropy(&Tensor::from_vec(vec![4, k], l.to_vec()).unwrap(), &labels).unwrap().0
    });
    GradReport { max_rel_err: max_rel_err(g.data(), &num), checked: num.len(), kinks: 0 }
}

pub fn check_block(seed: u64) -> GradReport {
    let mut r = rng(seed);
    let mut total = GradReport::default();
    for &(cin, cout, stride) in &[(2, 2, 1), (2, 3, 2)] {
        let mut n = 0;
        let mut b = ResidualBlock::<f64>::new(&mut n, cin, cout, stride);
        b.init(&mut r);
        let x = randn(&mut r, &[2, 4, 5, cin]);
        total.merge(check_module(
            &mut b,
            &x,
            seed,
            &|m, x| m.forward(x, Mode::Train).unwrap().0,
            &|m, x, g| {
                let (_, cache) = m.forward(x, Mode::Train).unwrap();
                m.backward(&cache.unwrap(), g).unwrap()
            },
        ));
    }
    total
}

/// Every layer kind at one seed.
pub fn check_all_layers(seed: u64) -> Vec<(&'static str, GradReport)> {
    vec![
        ("conv", check_conv(seed)),
        ("batchnorm", check_batchnorm(seed)),
        ("dense", check_dense(seed)),
        ("relu", check_relu(seed)),
        ("maxpool", check_maxpool(seed)),
        ("avgpool", check_avgpool(seed)),
        ("softmax-ce", check_softmax_ce(seed)),
        ("residual-block", check_block(seed)),
    ]
}

/// Cross-entropy of the tiny network in training mode, against `coords`
/// random parameter coordinates and every input coordinate of one example.
pub fn check_tiny_network(seed: u64, coords: usize) -> GradReport {
    let mut r = rng(seed);
    let mut net = Network::<f64>::build(NetworkConfig::tiny(3), seed).unwrap();
    for p in net.params_mut() {
        if p.name.ends_with(".shift") || p.name.ends_with(".bias") {
            p.value.iter_mut().for_each(|v| *v = r.random_range(-0.3..0.3));
        }
    }
    let x = randn(&mut r, &[3, 17, 20, 1]);
    let labels = [0usize, 2, 1];
    let loss = |net: &mut Network<f64>, x: &Tensor<f64>| {
        let out = net.forward(x, Mode::Train).unwrap();
        softmax_cross_entropy(&out.logits, &labels).unwrap().0
    };
    net.zero_grad();
    let out = net.forward(&x, Mode::Train).unwrap();
    let (_, g) = softmax_cross_entropy(&out.logits, &labels).unwrap();
    let gx = net.backward(out.cache.as_ref().unwrap(), &g).unwrap();
    let grads: Vec<Vec<f64>> = net.params().iter().map(|p| p.grad.clone()).collect();
    let mut report = GradReport::default();
    let sizes: Vec<usize> = grads.iter().map(Vec::len).collect();
    for _ in 0..coords {
        let pi = r.random_range(0..sizes.len());
        let i = r.random_range(0..sizes[pi]);
        let x0 = net.params()[pi].value[i];
        let cell = std::cell::RefCell::new(&mut net);
        let mut f = || loss(&mut cell.borrow_mut(), &x);
        let mut set = |v: f64| cell.borrow_mut().params_mut()[pi].value[i] = v;
        report.add(probe(&mut f, &mut set, x0, grads[pi][i]));
    }
    let mut xv = x.clone();
    for _ in 0..coords / 2 {
        let i = r.random_range(0..17 * 20);
        let x0 = xv.data()[i];
        let cell = std::cell::RefCell::new((&mut net, &mut xv));
        let mut f = || {
            let mut c = cell.borrow_mut();
            let xx = c.1.clone();
            loss(c.0, &xx)
        };
        let mut set = |v: f64| cell.borrow_mut().1.data_mut()[i] = v;
        report.add(probe(&mut f, &mut set, x0, gx.data()[i]));
    }
    report
}
