//! MFCC features and the 60-d utterance statistics used by the baseline
//! system.
//!
//! `cargo run --release --example mfcc`

use svtk::features::MfccExtractor;
use svtk::pipeline::mfcc_statistics;
use svtk::synth::CorpusSpec;

fn main() -> svtk::Result<()> {
    let spec = CorpusSpec::default();
    let phrase = &spec.phrase_templates()[0];
    let ex = MfccExtractor::new(Default::default())?;
    for voice in spec.voices().iter().take(3) {
        let wav = spec.synthesize(voice, phrase, 1);
        let m = ex.compute(&wav)?;
        let stats = mfcc_statistics(&ex, &wav)?;
        let head: Vec<String> = stats[..4].iter().map(|v| format!("{v:+.2}")).collect();
        println!("{}: {} frames x {} coefficients; stats[..4] = {}", voice.id, m.frames(), m.columns(), head.join(" "));
    }
    Ok(())
}
