//! Generate the synthetic two-phrase corpus and summarize its splits.
//!
//! `cargo run --release --example synth_corpus [OUT_DIR]`

use svtk::synth::{generate, CorpusSpec, Split};

fn main() -> svtk::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "svtk-out/corpus".into());
    let spec = CorpusSpec::default();
    let utts = generate(&spec, out.as_ref())?;
    println!("{} utterances in {out}", utts.len());
    for split in [Split::Background, Split::Dev, Split::Eval] {
        let n = utts.iter().filter(|u| u.split == split).count();
        let trials = spec.trials(split);
        let targets = trials.iter().filter(|t| t.label == svtk::backend::Label::Target).count();
        println!("{:<10} {n:>4} utterances {:>5} trials ({targets} target)", split.as_str(), trials.len());
    }
    Ok(())
}
