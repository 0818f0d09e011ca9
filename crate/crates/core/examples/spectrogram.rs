//! Log-power spectrogram of a synthetic utterance, tiled to the network width.
//!
//! `cargo run --release --example spectrogram`

use svtk::features::{compute_spectrogram, fit_length_to, NUM_BINS};
use svtk::synth::CorpusSpec;

fn main() -> svtk::Result<()> {
    let spec = CorpusSpec::default();
    let voice = &spec.voices()[0];
    let phrase = &spec.phrase_templates()[0];
    let wav = spec.synthesize(voice, phrase, 0);
    let s = compute_spectrogram(&wav)?;
    println!("{} samples -> {} bins x {} frames", wav.len(), NUM_BINS, s.frames());

    let fixed = fit_length_to(&s, 200);
    println!("fixed width {} (columns repeat with period {})", fixed.width(), s.frames());

    let col = s.column(s.frames() / 2);
    let mut top: Vec<usize> = (0..NUM_BINS).collect();
    top.sort_by(|&a, &b| col[b].total_cmp(&col[a]));
    println!("strongest bins of the middle frame (31.25 Hz each): {:?}", &top[..5]);
    Ok(())
}
