//! Seeded synthetic text-dependent corpus.
//!
//! A speaker is a fundamental frequency, a formant scale and a spectral tilt;
//! a phrase is a sequence of formant targets. An utterance drives a bank of
//! harmonics of the (slightly perturbed) speaker pitch through the phrase's
//! formant trajectory, scaled by the speaker, plus white noise.
//!
//! Output layout under the corpus root:
//!
//! ```text
//! corpus.toml              generator settings
//! utterances.tsv           utterance_id  speaker_id  phrase_id  split  wav path
//! trials_dev.tsv           dev-split trials
//! trials_eval.tsv          eval-split trials
//! wav/<speaker>/<utterance>.wav
//! ```

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backend::{write_trials, Label, Trial};
use crate::container::{atomic_write, read_text};
use crate::error::{Error, Result};
use crate::features::{write_wav, Waveform};

pub const SAMPLE_RATE: u32 = 16000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorpusSpec {
    pub speakers: usize,
    pub phrases: usize,
    /// Utterances per speaker and phrase.
    pub utterances: usize,
    /// Standard deviation of the additive noise relative to a unit-peak voice.
    pub noise: f64,
    pub min_duration: f64,
    pub max_duration: f64,
    pub background_fraction: f64,
    pub dev_fraction: f64,
    pub seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            speakers: 10,
            phrases: 2,
            utterances: 20,
            noise: 0.02,
            min_duration: 0.6,
            max_duration: 1.0,
            background_fraction: 0.6,
            dev_fraction: 0.2,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Split {
    Background,
    Dev,
    Eval,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Background => "background",
            Split::Dev => "dev",
            Split::Eval => "eval",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "background" => Ok(Split::Background),
            "dev" => Ok(Split::Dev),
            "eval" => Ok(Split::Eval),
            other => Err(Error::Format(format!("unknown split {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpeakerVoice {
    pub id: String,
    pub f0: f64,
    pub formant_scale: f64,
    /// Harmonic amplitude falls as `k^-tilt`.
    pub tilt: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhraseTemplate {
    pub id: String,
    /// Per segment: three formant frequencies and a relative energy.
    pub segments: Vec<([f64; 3], f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UtteranceInfo {
    pub utterance_id: String,
    pub speaker_id: String,
    pub phrase_id: String,
    pub split: Split,
    /// Relative to the corpus root.
    pub wav: PathBuf,
}

impl CorpusSpec {
    pub fn validate(&self) -> Result<()> {
        if self.speakers < 2 || self.phrases == 0 || self.utterances < 5 {
            return Err(Error::Config("corpus needs >= 2 speakers, >= 1 phrase, >= 5 utterances".into()));
        }
        if !(self.min_duration >= 0.02 && self.min_duration <= self.max_duration) {
            return Err(Error::Config("durations must satisfy 0.02 <= min <= max".into()));
        }
        let (b, d) = (self.background_fraction, self.dev_fraction);
        if !(b > 0.0 && d > 0.0 && b + d < 1.0) || !(self.noise >= 0.0) {
            return Err(Error::Config("split fractions must be positive and sum below 1; noise >= 0".into()));
        }
        Ok(())
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::seed_from_u64(self.seed);
        r.set_stream(stream);
        r
    }

    /// Pitch and formant scale are spread on evenly spaced, independently
    /// permuted grids, so no two speakers share either.
    pub fn voices(&self) -> Vec<SpeakerVoice> {
        let mut rng = self.rng(1);
        let n = self.speakers;
        let grid = |lo: f64, hi: f64, i: usize| lo + (hi - lo) * i as f64 / (n - 1) as f64;
        let mut scale_slots: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            scale_slots.swap(i, rng.random_range(0..=i));
        }
        (0..n)
            .map(|i| SpeakerVoice {
                id: format!("spk{i:02}"),
                f0: grid(95.0, 240.0, i),
                formant_scale: grid(0.82, 1.22, scale_slots[i]),
                tilt: rng.random_range(0.6..1.4),
            })
            .collect()
    }

    pub fn phrase_templates(&self) -> Vec<PhraseTemplate> {
        let mut rng = self.rng(2);
        (0..self.phrases)
            .map(|p| {
                let segments = (0..5)
                    .map(|_| {
                        let f = [rng.random_range(300.0..900.0), rng.random_range(950.0..2400.0), rng.random_range(2500.0..3600.0)];
                        (f, rng.random_range(0.4..1.0))
                    })
                    .collect();
                PhraseTemplate { id: format!("ph{p}"), segments }
            })
            .collect()
    }

    /// Dev and eval each keep at least two takes so both have target trials.
    pub fn split_of(&self, index: usize) -> Split {
        let n = self.utterances;
        let bg = ((n as f64 * self.background_fraction).round() as usize).clamp(1, n - 4);
        let dev = ((n as f64 * self.dev_fraction).round() as usize).clamp(2, n - bg - 2);
        if index < bg {
            Split::Background
        } else if index < bg + dev {
            Split::Dev
        } else {
            Split::Eval
        }
    }

    pub fn utterances(&self) -> Vec<UtteranceInfo> {
        let mut out = Vec::new();
        for v in self.voices() {
            for p in self.phrase_templates() {
                for i in 0..self.utterances {
                    let utterance_id = format!("{}-{}-{i:02}", v.id, p.id);
                    out.push(UtteranceInfo {
                        wav: PathBuf::from("wav").join(&v.id).join(format!("{utterance_id}.wav")),
                        utterance_id,
                        speaker_id: v.id.clone(),
                        phrase_id: p.id.clone(),
                        split: self.split_of(i),
                    });
                }
            }
        }
        out
    }

    /// One utterance of `phrase` by `voice`; `stream` selects the take.
    pub fn synthesize(&self, voice: &SpeakerVoice, phrase: &PhraseTemplate, stream: u64) -> Waveform {
        let mut rng = self.rng(1000 + stream);
        let sr = SAMPLE_RATE as f64;
        let duration = rng.random_range(self.min_duration..=self.max_duration);
        let len = (duration * sr) as usize;
        let f0 = voice.f0 * (1.0 + 0.03 * rng.sample::<f64, _>(StandardNormal));
        let fscale = voice.formant_scale * (1.0 + 0.02 * rng.sample::<f64, _>(StandardNormal));
        let vibrato_rate = rng.random_range(3.0..6.0);
        let harmonics = ((7600.0 / f0) as usize).min(60);
        let mut phases: Vec<f64> = (0..harmonics).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
        let segs = &phrase.segments;
        let block = 32;
        let mut samples = vec![0.0f64; len];
        let mut amps = vec![0.0f64; harmonics];
        for start in (0..len).step_by(block) {
            let t = start as f64 / len as f64;
            let pos = t * (segs.len() - 1) as f64;
            let k0 = (pos.floor() as usize).min(segs.len() - 2);
            let w = pos - k0 as f64;
            let formants: Vec<f64> =
                (0..3).map(|i| fscale * (segs[k0].0[i] * (1.0 - w) + segs[k0 + 1].0[i] * w)).collect();
            let energy = segs[k0].1 * (1.0 - w) + segs[k0 + 1].1 * w;
            let ramp = (t / 0.05).min((1.0 - t) / 0.05).clamp(0.0, 1.0);
            let pitch = f0 * (1.0 + 0.02 * (2.0 * PI * vibrato_rate * start as f64 / sr).sin() - 0.08 * t);
            for (k, a) in amps.iter_mut().enumerate() {
                let f = pitch * (k + 1) as f64;
                let env: f64 = formants
                    .iter()
                    .enumerate()
                    .map(|(i, &fm)| {
                        let bw = 80.0 + 40.0 * i as f64;
                        let gain = [1.0, 0.7, 0.45][i];
                        gain / (1.0 + ((f - fm) / bw).powi(2))
                    })
                    .sum();
                *a = if f < sr / 2.0 { energy * ramp * env * ((k + 1) as f64).powf(-voice.tilt) } else { 0.0 };
            }
            let step = 2.0 * PI * pitch / sr;
            for s in samples.iter_mut().skip(start).take(block) {
                let mut acc = 0.0;
                for (k, ph) in phases.iter_mut().enumerate() {
                    *ph += step * (k + 1) as f64;
                    acc += amps[k] * ph.sin();
                }
                *s = acc;
            }
            for ph in phases.iter_mut() {
                *ph %= 2.0 * PI;
            }
        }
        let peak = samples.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
        let noise = self.noise * rng.random_range(0.5..1.5);
        let out = samples
            .iter()
            .map(|v| (0.5 * (v / peak + noise * rng.sample::<f64, _>(StandardNormal))).clamp(-1.0, 1.0) as f32)
            .collect();
        Waveform::new(out, SAMPLE_RATE).expect("valid synthetic waveform")
    }

    /// Every unordered same-phrase pair of `split`; target iff same speaker.
    pub fn trials(&self, split: Split) -> Vec<Trial> {
        let utts: Vec<UtteranceInfo> = self.utterances().into_iter().filter(|u| u.split == split).collect();
        let mut out = Vec::new();
        for p in self.phrase_templates() {
            let ph: Vec<&UtteranceInfo> = utts.iter().filter(|u| u.phrase_id == p.id).collect();
            for i in 0..ph.len() {
                for j in i + 1..ph.len() {
                    let label = if ph[i].speaker_id == ph[j].speaker_id { Label::Target } else { Label::Nontarget };
                    out.push(Trial::new(&ph[i].utterance_id, &ph[j].utterance_id, &p.id, label));
                }
            }
        }
        out
    }
}

pub fn format_utterances(utts: &[UtteranceInfo]) -> String {
    utts.iter().fold(String::new(), |mut s, u| {
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}\t{}",
            u.utterance_id,
            u.speaker_id,
            u.phrase_id,
            u.split.as_str(),
            u.wav.display()
        );
        s
    })
}

pub fn read_utterances(corpus: &Path) -> Result<Vec<UtteranceInfo>> {
    let path = corpus.join("utterances.tsv");
    let text = read_text(&path)?;
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 5 {
            return Err(Error::Format(format!("{} line {}: expected 5 fields", path.display(), n + 1)));
        }
        out.push(UtteranceInfo {
            utterance_id: f[0].into(),
            speaker_id: f[1].into(),
            phrase_id: f[2].into(),
            split: Split::parse(f[3])?,
            wav: PathBuf::from(f[4]),
        });
    }
    Ok(out)
}

/// Write the whole corpus under `root`.
pub fn generate(spec: &CorpusSpec, root: &Path) -> Result<Vec<UtteranceInfo>> {
    spec.validate()?;
    let voices = spec.voices();
    let phrases = spec.phrase_templates();
    let utts = spec.utterances();
    utts.par_iter().enumerate().try_for_each(|(stream, u)| {
        let v = voices.iter().find(|v| v.id == u.speaker_id).expect("known speaker");
        let p = phrases.iter().find(|p| p.id == u.phrase_id).expect("known phrase");
        write_wav(&root.join(&u.wav), &spec.synthesize(v, p, stream as u64))
    })?;
    let toml = toml::to_string(spec).map_err(|e| Error::Format(format!("corpus spec: {e}")))?;
    atomic_write(&root.join("corpus.toml"), toml.as_bytes())?;
    atomic_write(&root.join("utterances.tsv"), format_utterances(&utts).as_bytes())?;
    write_trials(&root.join("trials_dev.tsv"), &spec.trials(Split::Dev))?;
    write_trials(&root.join("trials_eval.tsv"), &spec.trials(Split::Eval))?;
    Ok(utts)
}
