//! WCCN, cosine scoring and symmetric s-norm on a toy embedding store with
//! a shared nuisance direction.
//!
//! `cargo run --release --example backend_scoring`

use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use svtk::backend::{Backend, BackendConfig, EmbeddingStore, Label, Trial};
use svtk::metrics::compute_eer;
use svtk::model::Embedding;

fn store(rng: &mut impl Rng, speakers: std::ops::Range<usize>, takes: usize) -> Vec<Embedding> {
    let mut out = Vec::new();
    for s in speakers {
        let centre: Vec<f64> = (0..16).map(|_| rng.sample(StandardNormal)).collect();
        for k in 0..takes {
            // Large session variability along the first two axes.
            let nuisance: f64 = 1.0 * rng.sample::<f64, _>(StandardNormal);
            let values = (0..16)
                .map(|d| {
                    let n = if d < 2 { nuisance } else { 0.0 };
                    (centre[d] + n + 0.3 * rng.sample::<f64, _>(StandardNormal)) as f32
                })
                .collect();
            out.push(Embedding { utterance_id: format!("s{s}-{k}"), speaker_id: format!("s{s}"), phrase_id: "p".into(), values });
        }
    }
    out
}

fn main() -> svtk::Result<()> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    let background = EmbeddingStore::new(store(&mut rng, 0..30, 8))?;
    let test = EmbeddingStore::new(store(&mut rng, 30..40, 4))?;
    let ids: Vec<&Embedding> = test.entries().iter().collect();
    let mut trials = Vec::new();
    for i in 0..ids.len() {
        for j in i + 1..ids.len() {
            let label = if ids[i].speaker_id == ids[j].speaker_id { Label::Target } else { Label::Nontarget };
            trials.push(Trial::new(&ids[i].utterance_id, &ids[j].utterance_id, "p", label));
        }
    }
    for (wccn, snorm) in [(false, false), (true, false), (true, true)] {
        let config = BackendConfig { wccn, snorm, ..BackendConfig::default() };
        let backend = Backend::fit(&background, config)?;
        let scored = backend.score_all(&trials, &test)?;
        let (s, t) = svtk::backend::labelled(&scored);
        println!("wccn={wccn:<5} snorm={snorm:<5} EER {:.2}%", 100.0 * compute_eer(&s, &t)?);
    }
    Ok(())
}
