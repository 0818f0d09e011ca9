//! Synthesize the corpus and train the desk-scale network on its background
//! split, logging loss and accuracy per epoch.
//!
//! `cargo run --release --example train_desk [OUT_DIR] [EPOCHS]`

use svtk::pipeline::{cmd_synth, cmd_train, PipelineConfig, Workspace};

fn main() -> svtk::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = args.next().unwrap_or_else(|| "svtk-out".into());
    let mut config = PipelineConfig::default();
    if let Some(e) = args.next() {
        config.train.epochs = e.parse().expect("epoch count");
    }
    let ws = Workspace::new(out, config)?;
    cmd_synth(&ws)?;
    let log = cmd_train(&ws, |e| println!("epoch {:>3}  loss {:.4}  accuracy {:.3}", e.epoch, e.loss, e.accuracy))?;
    println!("first batch loss {:.4}; checkpoint {}", log.first_batch_loss, ws.checkpoint().display());
    Ok(())
}
