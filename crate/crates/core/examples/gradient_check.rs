//! Central-difference check of the tiny network's backward pass in double
//! precision.
//!
//! `cargo run --release --example gradient_check`

use rand::{Rng, SeedableRng};
use svtk::model::{Network, NetworkConfig};
use svtk::nn::{softmax_cross_entropy, Mode, Parameterized, Tensor};

fn loss(net: &mut Network<f64>, x: &Tensor<f64>, labels: &[usize]) -> f64 {
    let out = net.forward(x, Mode::Train).unwrap();
    softmax_cross_entropy(&out.logits, labels).unwrap().0
}

fn main() -> svtk::Result<()> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    let mut net = Network::<f64>::build(NetworkConfig::tiny(3), 1)?;
    let x = Tensor::from_vec(vec![4, 17, 20, 1], (0..4 * 340).map(|_| rng.random_range(-1.0..1.0)).collect())?;
    let labels = [0, 1, 2, 0];

    let out = net.forward(&x, Mode::Train)?;
    let (_, g) = softmax_cross_entropy(&out.logits, &labels)?;
    net.zero_grad();
    net.backward(out.cache.as_ref().expect("train cache"), &g)?;

    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..40 {
        let p = rng.random_range(0..net.params().len());
        let i = rng.random_range(0..net.params()[p].value.len());
        let analytic = net.params()[p].grad[i];
        let x0 = net.params()[p].value[i];
        net.params_mut()[p].value[i] = x0 + h;
        let fp = loss(&mut net, &x, &labels);
        net.params_mut()[p].value[i] = x0 - h;
        let fm = loss(&mut net, &x, &labels);
        net.params_mut()[p].value[i] = x0;
        let numeric = (fp - fm) / (2.0 * h);
        let err = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
        worst = worst.max(err);
    }
    println!("40 random coordinates, worst relative error {worst:.2e}");
    Ok(())
}
