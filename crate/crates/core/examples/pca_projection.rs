//! Two-dimensional PCA of MFCC-statistics vectors for a few speakers,
//! printed as CSV.
//!
//! `cargo run --release --example pca_projection`

use svtk::backend::Pca;
use svtk::features::MfccExtractor;
use svtk::pipeline::mfcc_statistics;
use svtk::synth::CorpusSpec;

fn main() -> svtk::Result<()> {
    let spec = CorpusSpec::default();
    let ex = MfccExtractor::new(Default::default())?;
    let phrase = &spec.phrase_templates()[0];
    let mut rows = Vec::new();
    let mut data = Vec::new();
    for voice in spec.voices().iter().take(4) {
        for take in 0..6 {
            data.push(mfcc_statistics(&ex, &spec.synthesize(voice, phrase, take))?);
            rows.push(voice.id.clone());
        }
    }
    let pca = Pca::fit(&data, 2)?;
    println!("speaker,pc1,pc2");
    for (id, x) in rows.iter().zip(&data) {
        let p = pca.project(x)?;
        println!("{id},{:.4},{:.4}", p[0], p[1]);
    }
    println!("# explained variances {:.4?}", pca.variances);
    Ok(())
}
