//! End-to-end commands over a working directory.
//!
//! ```text
//! <root>/corpus/                 synth
//! <root>/model/final/            train (checkpoints/epoch-NNN, speakers.txt, train_log.tsv)
//! <root>/embeddings/<system>.csv embed (+ .svt/.ids)
//! <root>/backend/<system>/       score
//! <root>/scores/<system>_<split>.tsv
//! <root>/eval/<scores stem>.summary / .det.csv / .det.probit.csv
//! <root>/fusion/model.toml       fuse (scores/fused_<split>.tsv)
//! <root>/project/<system>.csv    project
//! ```

pub mod config;

use std::path::{Path, PathBuf};

use rayon::prelude::*;

pub use config::{PipelineConfig, Preset};

use crate::backend::{
    apply_fusion, fit_fusion, labelled, read_scores, read_trials, write_scores, Backend, EmbeddingStore, FusionModel,
    Pca, ScoredTrial, Trial,
};
use crate::container::atomic_write;
use crate::error::{Error, Result};
use crate::features::{compute_spectrogram, fit_length_to, read_wav, FixedSpectrogram, MfccExtractor};
use crate::features::mfcc::deltas;
use crate::metrics::{evaluate, DcfParams, Summary};
use crate::model::{
    extract_embeddings, length_normalize, load_checkpoint, save_checkpoint, train, Embedding, EpochLog, Network,
    TrainConfig, TrainingLog,
};
use crate::synth::{generate, read_utterances, Split, UtteranceInfo};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum System {
    /// Residual-network embeddings.
    Cnn,
    /// Utterance-level MFCC statistics.
    Mfcc,
}

impl System {
    pub fn as_str(self) -> &'static str {
        match self {
            System::Cnn => "cnn",
            System::Mfcc => "mfcc",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "cnn" => Ok(System::Cnn),
            "mfcc" => Ok(System::Mfcc),
            other => Err(Error::InvalidArgument(format!("unknown system {other:?} (cnn|mfcc)"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Workspace {
    pub root: PathBuf,
    pub config: PipelineConfig,
}

fn require(path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::MissingArtifact(path.to_path_buf()))
    }
}

impl Workspace {
    pub fn new(root: impl Into<PathBuf>, config: PipelineConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { root: root.into(), config })
    }

    pub fn corpus_dir(&self) -> PathBuf {
        self.config.paths.corpus.clone().unwrap_or_else(|| self.root.join("corpus"))
    }

    pub fn model_dir(&self) -> PathBuf {
        self.root.join("model")
    }

    pub fn checkpoint(&self) -> PathBuf {
        self.model_dir().join("final")
    }

    pub fn embeddings_path(&self, system: System) -> PathBuf {
        self.root.join("embeddings").join(format!("{}.csv", system.as_str()))
    }

    pub fn backend_dir(&self, system: System) -> PathBuf {
        self.root.join("backend").join(system.as_str())
    }

    pub fn scores_path(&self, name: &str, split: Split) -> PathBuf {
        self.root.join("scores").join(format!("{name}_{}.tsv", split.as_str()))
    }

    pub fn trials_path(&self, split: Split) -> Result<PathBuf> {
        match split {
            Split::Background => Err(Error::InvalidArgument("the background split has no trials".into())),
            s => Ok(self.corpus_dir().join(format!("trials_{}.tsv", s.as_str()))),
        }
    }

    fn utterances(&self) -> Result<Vec<UtteranceInfo>> {
        read_utterances(&self.corpus_dir())
    }

    fn input_width(&self) -> usize {
        self.config.network.build(2).input_width
    }

    /// Fixed-width spectrograms of `utts`, computed in parallel.
    pub fn network_inputs(&self, utts: &[UtteranceInfo]) -> Result<Vec<FixedSpectrogram>> {
        let corpus = self.corpus_dir();
        let width = self.input_width();
        utts.par_iter()
            .map(|u| {
                let w = read_wav(&corpus.join(&u.wav))?;
                w.require_pipeline_rate()?;
                Ok(fit_length_to(&compute_spectrogram(&w)?, width))
            })
            .collect()
    }
}

pub fn cmd_synth(ws: &Workspace) -> Result<Vec<UtteranceInfo>> {
    let mut spec = ws.config.synth.clone();
    spec.seed = ws.config.seed;
    generate(&spec, &ws.corpus_dir())
}

/// Train on the background split. Class `i` is the `i`-th background speaker
/// id in sorted order, listed in `model/speakers.txt`.
pub fn cmd_train(ws: &Workspace, on_epoch: impl FnMut(&EpochLog)) -> Result<TrainingLog> {
    require(&ws.corpus_dir().join("utterances.tsv"))?;
    let utts: Vec<UtteranceInfo> = ws.utterances()?.into_iter().filter(|u| u.split == Split::Background).collect();
    let mut speakers: Vec<String> = utts.iter().map(|u| u.speaker_id.clone()).collect();
    speakers.sort();
    speakers.dedup();
    let labels: Vec<usize> =
        utts.iter().map(|u| speakers.binary_search(&u.speaker_id).expect("speaker listed")).collect();
    let inputs = ws.network_inputs(&utts)?;
    let mut net = Network::<f32>::build(ws.config.network.build(speakers.len()), ws.config.seed)?;
    let tc = TrainConfig {
        epochs: ws.config.train.epochs,
        batch_size: ws.config.train.batch_size,
        adam: ws.config.train.adam(),
        shuffle_seed: ws.config.seed.wrapping_add(1),
    };
    let dir = ws.model_dir();
    let log = train(&mut net, &inputs, &labels, &tc, Some(&dir.join("checkpoints")), on_epoch)?;
    save_checkpoint(&ws.checkpoint(), &net, Some(tc.epochs))?;
    atomic_write(&dir.join("speakers.txt"), (speakers.join("\n") + "\n").as_bytes())?;
    let mut text = String::from("epoch\tloss\taccuracy\n");
    for e in &log.epochs {
        text += &format!("{}\t{:.6}\t{:.4}\n", e.epoch, e.loss, e.accuracy);
    }
    atomic_write(&dir.join("train_log.tsv"), text.as_bytes())?;
    Ok(log)
}

/// Mean and standard deviation of the 20 MFCC statics plus the standard
/// deviation of their deltas: a 60-d utterance vector.
pub fn mfcc_statistics(ex: &MfccExtractor, w: &crate::features::Waveform) -> Result<Vec<f32>> {
    let statics = ex.raw_statics(w)?;
    let d = deltas(&statics, ex.config().delta_radius);
    let n = statics.len() as f64;
    let cols = statics[0].len();
    let mut out = Vec::with_capacity(3 * cols);
    let mean = |rows: &[Vec<f64>], c: usize| rows.iter().map(|r| r[c]).sum::<f64>() / n;
    let std = |rows: &[Vec<f64>], c: usize| {
        let m = mean(rows, c);
        (rows.iter().map(|r| (r[c] - m).powi(2)).sum::<f64>() / n).sqrt()
    };
    out.extend((0..cols).map(|c| mean(&statics, c) as f32));
    out.extend((0..cols).map(|c| std(&statics, c) as f32));
    out.extend((0..cols).map(|c| std(&d, c) as f32));
    Ok(out)
}

/// Embed every corpus utterance with `system`.
pub fn cmd_embed(ws: &Workspace, system: System) -> Result<EmbeddingStore> {
    require(&ws.corpus_dir().join("utterances.tsv"))?;
    let utts = ws.utterances()?;
    let values = match system {
        System::Cnn => {
            require(&ws.checkpoint())?;
            let (net, _) = load_checkpoint(&ws.checkpoint())?;
            extract_embeddings(&net, &ws.network_inputs(&utts)?)?
        }
        System::Mfcc => {
            let ex = MfccExtractor::new(ws.config.mfcc.clone())?;
            let corpus = ws.corpus_dir();
            utts.par_iter().map(|u| mfcc_statistics(&ex, &read_wav(&corpus.join(&u.wav))?)).collect::<Result<_>>()?
        }
    };
    let entries = utts
        .iter()
        .zip(values)
        .map(|(u, values)| Embedding {
            utterance_id: u.utterance_id.clone(),
            speaker_id: u.speaker_id.clone(),
            phrase_id: u.phrase_id.clone(),
            values,
        })
        .collect();
    let store = EmbeddingStore::new(entries)?;
    let path = ws.embeddings_path(system);
    store.save_csv(&path)?;
    store.save_binary(&path.with_extension(""))?;
    Ok(store)
}

fn background_store(ws: &Workspace, store: &EmbeddingStore) -> Result<EmbeddingStore> {
    let bg: Vec<String> = ws
        .utterances()?
        .into_iter()
        .filter(|u| u.split == Split::Background)
        .map(|u| u.utterance_id)
        .collect();
    EmbeddingStore::new(bg.iter().map(|id| store.get(id).cloned()).collect::<Result<_>>()?)
}

/// Fit the back-end on background embeddings (once per system) and score
/// the trials of `split`.
pub fn cmd_score(ws: &Workspace, system: System, split: Split) -> Result<Vec<ScoredTrial>> {
    let emb = ws.embeddings_path(system);
    require(&emb)?;
    let trials_path = ws.trials_path(split)?;
    require(&trials_path)?;
    let store = EmbeddingStore::load_csv(&emb)?;
    let backend = Backend::fit(&background_store(ws, &store)?, ws.config.backend.config())?;
    backend.save(&ws.backend_dir(system))?;
    let backend = Backend::load(&ws.backend_dir(system))?;
    let scores = backend.score_all(&read_trials(&trials_path)?, &store)?;
    write_scores(&ws.scores_path(system.as_str(), split), &scores)?;
    Ok(scores)
}

/// EER and minDCF of a score file; writes `<root>/eval/<stem>.summary` and
/// the DET point files.
pub fn cmd_eval(ws: &Workspace, scores_path: &Path) -> Result<Summary> {
    require(scores_path)?;
    let scores = read_scores(scores_path)?;
    let (s, t) = labelled(&scores);
    let (summary, det) = evaluate(&s, &t, DcfParams::default())?;
    let stem = scores_path.file_stem().map_or("scores".into(), |s| s.to_string_lossy().into_owned());
    let dir = ws.root.join("eval");
    atomic_write(&dir.join(format!("{stem}.summary")), summary.to_key_values().as_bytes())?;
    det.save(&dir.join(format!("{stem}.det")))?;
    Ok(summary)
}

fn aligned_systems(paths: &[PathBuf]) -> Result<(Vec<Trial>, Vec<Vec<f64>>)> {
    let mut trials: Option<Vec<Trial>> = None;
    let mut systems = Vec::new();
    for p in paths {
        require(p)?;
        let s = read_scores(p)?;
        let t: Vec<Trial> = s.iter().map(|x| x.trial.clone()).collect();
        match &trials {
            Some(first) if *first != t => {
                return Err(Error::InvalidArgument(format!("{} scores different trials", p.display())));
            }
            None => trials = Some(t),
            _ => {}
        }
        systems.push(s.iter().map(|x| x.score).collect());
    }
    Ok((trials.unwrap_or_default(), systems))
}

/// Fit logistic-regression fusion on the dev scores of `systems` and apply
/// it to dev and eval, writing `scores/fused_<split>.tsv`.
pub fn cmd_fuse(ws: &Workspace, systems: &[System]) -> Result<FusionModel> {
    if systems.is_empty() {
        return Err(Error::InvalidArgument("fuse needs at least one system".into()));
    }
    let paths = |split| systems.iter().map(|s| ws.scores_path(s.as_str(), split)).collect::<Vec<_>>();
    let (dev_trials, dev) = aligned_systems(&paths(Split::Dev))?;
    let (eval_trials, eval) = aligned_systems(&paths(Split::Eval))?;
    let keep: Vec<usize> = (0..dev_trials.len()).filter(|&i| dev_trials[i].label.is_target().is_some()).collect();
    let targets: Vec<bool> = keep.iter().map(|&i| dev_trials[i].label.is_target().unwrap()).collect();
    let dev_labelled: Vec<Vec<f64>> = dev.iter().map(|s| keep.iter().map(|&i| s[i]).collect()).collect();
    let model = fit_fusion(&dev_labelled, &targets)?;
    let names: Vec<&str> = systems.iter().map(|s| s.as_str()).collect();
    let text = format!(
        "systems = {:?}\nweights = {:?}\nbias = {:?}\n",
        names, model.weights, model.bias
    );
    atomic_write(&ws.root.join("fusion").join("model.toml"), text.as_bytes())?;
    for (split, trials, sys) in [(Split::Dev, dev_trials, dev), (Split::Eval, eval_trials, eval)] {
        let fused = apply_fusion(&model, &sys)?;
        let scored: Vec<ScoredTrial> =
            trials.into_iter().zip(fused).map(|(trial, score)| ScoredTrial { trial, score }).collect();
        write_scores(&ws.scores_path("fused", split), &scored)?;
    }
    Ok(model)
}

/// 2-D PCA of the length-normalized embeddings of the first `speakers`
/// speakers (sorted ids), fitted on that subset. CSV columns:
/// `utterance_id,speaker_id,phrase_id,pc1,pc2`.
pub fn cmd_project(ws: &Workspace, system: System, speakers: usize) -> Result<PathBuf> {
    let emb = ws.embeddings_path(system);
    require(&emb)?;
    let store = EmbeddingStore::load_csv(&emb)?;
    let mut ids: Vec<&str> = store.entries().iter().map(|e| e.speaker_id.as_str()).collect();
    ids.sort_unstable();
    ids.dedup();
    ids.truncate(speakers.max(1));
    let chosen: Vec<&Embedding> = store.entries().iter().filter(|e| ids.contains(&e.speaker_id.as_str())).collect();
    let data = chosen.iter().map(|e| length_normalize(&e.values)).collect::<Result<Vec<_>>>()?;
    let pca = Pca::fit(&data, 2)?;
    let mut text = String::from("utterance_id,speaker_id,phrase_id,pc1,pc2\n");
    for (e, x) in chosen.iter().zip(&data) {
        let p = pca.project(x)?;
        text += &format!("{},{},{},{:.6},{:.6}\n", e.utterance_id, e.speaker_id, e.phrase_id, p[0], p[1]);
    }
    let out = ws.root.join("project").join(format!("{}.csv", system.as_str()));
    atomic_write(&out, text.as_bytes())?;
    Ok(out)
}
