//! EER, minDCF and DET curve of two overlapping score distributions; writes
//! the DET points (linear and probit axes) next to OUT_STEM.
//!
//! `cargo run --release --example det_metrics [OUT_STEM]`

use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use svtk::metrics::{evaluate, DcfParams};

fn main() -> svtk::Result<()> {
    let stem = std::env::args().nth(1).unwrap_or_else(|| "svtk-out/det/example".into());
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
    let mut scores = Vec::new();
    let mut targets = Vec::new();
    for i in 0..5000 {
        let target = i % 10 == 0;
        let mean = if target { 2.0 } else { 0.0 };
        scores.push(mean + rng.sample::<f64, _>(StandardNormal));
        targets.push(target);
    }
    let (summary, det) = evaluate(&scores, &targets, DcfParams::default())?;
    print!("{}", summary.to_key_values());
    println!("DET has {} operating points", det.points.len());
    det.save(stem.as_ref())?;
    println!("wrote {stem}.csv and {stem}.probit.csv");
    Ok(())
}
