//! Logistic-regression fusion of two systems that each separate only one
//! phrase's trials.
//!
//! `cargo run --release --example fusion`

use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use svtk::backend::{apply_fusion, fit_fusion};
use svtk::metrics::compute_eer;

fn systems(rng: &mut impl Rng) -> (Vec<Vec<f64>>, Vec<bool>) {
    let (mut a, mut b, mut t) = (Vec::new(), Vec::new(), Vec::new());
    for phrase in 0..2 {
        for i in 0..400 {
            let target = i % 4 == 0;
            let m = if target { 2.0 } else { -2.0 };
            let (ma, mb) = if phrase == 0 { (m, 0.0) } else { (0.0, m) };
            a.push(ma + rng.sample::<f64, _>(StandardNormal));
            b.push(mb + rng.sample::<f64, _>(StandardNormal));
            t.push(target);
        }
    }
    (vec![a, b], t)
}

fn main() -> svtk::Result<()> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    let (dev, dev_t) = systems(&mut rng);
    let (eval, eval_t) = systems(&mut rng);
    let model = fit_fusion(&dev, &dev_t)?;
    println!("weights {:.3?} bias {:.3}", model.weights, model.bias);
    println!("system A EER {:.2}%", 100.0 * compute_eer(&eval[0], &eval_t)?);
    println!("system B EER {:.2}%", 100.0 * compute_eer(&eval[1], &eval_t)?);
    let fused = apply_fusion(&model, &eval)?;
    println!("fused    EER {:.2}%", 100.0 * compute_eer(&fused, &eval_t)?);
    Ok(())
}
