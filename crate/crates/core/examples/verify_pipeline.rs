//! End-to-end verification: CNN embeddings and the MFCC-statistics baseline,
//! each through WCCN, cosine scoring and s-norm, then score fusion and a 2-D
//! projection.
//!
//! `cargo run --release --example verify_pipeline [OUT_DIR] [EPOCHS]`

use svtk::pipeline::{cmd_embed, cmd_eval, cmd_fuse, cmd_project, cmd_score, cmd_synth, cmd_train};
use svtk::pipeline::{PipelineConfig, System, Workspace};
use svtk::synth::Split;

fn main() -> svtk::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = args.next().unwrap_or_else(|| "svtk-out".into());
    let mut config = PipelineConfig::default();
    if let Some(e) = args.next() {
        config.train.epochs = e.parse().expect("epoch count");
    }
    let ws = Workspace::new(out, config)?;
    cmd_synth(&ws)?;
    cmd_train(&ws, |e| eprintln!("epoch {} loss {:.4}", e.epoch, e.loss))?;
    println!("{:<8} {:>8} {:>8}", "system", "EER [%]", "minDCF");
    for system in [System::Cnn, System::Mfcc] {
        cmd_embed(&ws, system)?;
        for split in [Split::Dev, Split::Eval] {
            cmd_score(&ws, system, split)?;
        }
        let s = cmd_eval(&ws, &ws.scores_path(system.as_str(), Split::Eval))?;
        println!("{:<8} {:>8.2} {:>8.4}", system.as_str(), 100.0 * s.eer, s.min_dcf);
    }
    let model = cmd_fuse(&ws, &[System::Cnn, System::Mfcc])?;
    let s = cmd_eval(&ws, &ws.scores_path("fused", Split::Eval))?;
    println!("{:<8} {:>8.2} {:>8.4}  weights {:.3?}", "fused", 100.0 * s.eer, s.min_dcf, model.weights);
    println!("projection {}", cmd_project(&ws, System::Cnn, 9)?.display());
    Ok(())
}
