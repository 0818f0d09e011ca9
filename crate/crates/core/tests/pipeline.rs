use std::fs;
use std::path::Path;
use std::process::Command;

use svtk::features::{compute_spectrogram, read_wav};
use svtk::pipeline::{cmd_embed, cmd_eval, cmd_fuse, cmd_project, cmd_score, cmd_synth, PipelineConfig, System, Workspace};
use svtk::synth::{CorpusSpec, Split};
use svtk::Error;

fn small_config(seed: u64) -> PipelineConfig {
    let mut c = PipelineConfig::default();
    c.seed = seed;
    c.synth.utterances = 6;
    c
}

fn tree_bytes(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(root).unwrap().display().to_string(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn synthesis_is_byte_identical_for_a_seed() {
    let (a, b, c) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    cmd_synth(&Workspace::new(a.path(), small_config(3)).unwrap()).unwrap();
    cmd_synth(&Workspace::new(b.path(), small_config(3)).unwrap()).unwrap();
    cmd_synth(&Workspace::new(c.path(), small_config(4)).unwrap()).unwrap();
    let ta = tree_bytes(&a.path().join("corpus"));
    assert!(ta.len() > 100);
    assert_eq!(ta, tree_bytes(&b.path().join("corpus")));
    assert_ne!(ta, tree_bytes(&c.path().join("corpus")));
}

fn mean_log_spectrum(path: &Path) -> Vec<f64> {
    let s = compute_spectrogram(&read_wav(path).unwrap()).unwrap();
    let mut m = vec![0.0; 257];
    for f in 0..s.frames() {
        for (b, v) in s.column(f).iter().enumerate() {
            m[b] += *v as f64 / s.frames() as f64;
        }
    }
    m
}

#[test]
fn speakers_are_spectrally_distinct() {
    let dir = tempfile::tempdir().unwrap();
    let spec = CorpusSpec { speakers: 4, phrases: 1, utterances: 5, ..CorpusSpec::default() };
    let utts = svtk::synth::generate(&spec, dir.path()).unwrap();
    let feats: Vec<(String, Vec<f64>)> =
        utts.iter().map(|u| (u.speaker_id.clone(), mean_log_spectrum(&dir.path().join(&u.wav)))).collect();
    let (mut within, mut across) = (Vec::new(), Vec::new());
    for i in 0..feats.len() {
        for j in i + 1..feats.len() {
            let d: f64 = feats[i].1.iter().zip(&feats[j].1).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            if feats[i].0 == feats[j].0 { within.push(d) } else { across.push(d) }
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    assert!(mean(&within) < mean(&across), "within {} across {}", mean(&within), mean(&across));
}

#[test]
fn missing_upstream_artifacts_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let ws = Workspace::new(dir.path(), small_config(1)).unwrap();
    assert!(matches!(cmd_embed(&ws, System::Cnn), Err(Error::MissingArtifact(_))));
    assert!(matches!(cmd_score(&ws, System::Mfcc, Split::Eval), Err(Error::MissingArtifact(_))));
    assert!(matches!(cmd_eval(&ws, &dir.path().join("nope.tsv")), Err(Error::MissingArtifact(_))));
}

#[test]
fn perfect_scores_give_zero_error() {
    let dir = tempfile::tempdir().unwrap();
    let ws = Workspace::new(dir.path(), small_config(1)).unwrap();
    let p = dir.path().join("perfect.tsv");
    fs::write(&p, "a\tb\tp1\ttgt\t2.0\nc\td\tp1\ttgt\t1.5\ne\tf\tp1\tnon\t-1.0\ng\th\tp1\tnon\t0.5\n").unwrap();
    let s = cmd_eval(&ws, &p).unwrap();
    assert!(s.to_key_values().starts_with("eer=0.0000\nmin_dcf=0.0000\n"));
    let written = fs::read_to_string(dir.path().join("eval/perfect.summary")).unwrap();
    assert_eq!(written, s.to_key_values());
}

#[test]
fn statistics_system_runs_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let ws = Workspace::new(dir.path(), small_config(2)).unwrap();
    cmd_synth(&ws).unwrap();
    let store = cmd_embed(&ws, System::Mfcc).unwrap();
    assert_eq!(store.dim(), 60);
    for split in [Split::Dev, Split::Eval] {
        cmd_score(&ws, System::Mfcc, split).unwrap();
    }
    let s = cmd_eval(&ws, &ws.scores_path("mfcc", Split::Eval)).unwrap();
    assert!(s.eer < 0.5, "eer {}", s.eer);
    let m = cmd_fuse(&ws, &[System::Mfcc]).unwrap();
    assert_eq!(m.weights.len(), 1);
    assert!(m.weights[0] > 0.0);
    let proj = cmd_project(&ws, System::Mfcc, 3).unwrap();
    let lines = fs::read_to_string(proj).unwrap().lines().count();
    assert!(lines > 1);
}

fn svtk(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_svtk")).args(args).output().unwrap()
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let r = svtk(&["--output-dir", out, "embed"]);
    assert_eq!(r.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&r.stderr).contains("missing"));
    assert_eq!(svtk(&["--output-dir", out, "frobnicate"]).status.code(), Some(2));

    let cfg = dir.path().join("cfg.toml");
    fs::write(&cfg, "version = 1\n[synth]\nutterances = 5\n").unwrap();
    let r = svtk(&["--config", cfg.to_str().unwrap(), "--seed", "9", "--threads", "1", "--output-dir", out, "synth"]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    assert!(String::from_utf8_lossy(&r.stdout).contains("utterances=100"));

    fs::write(&cfg, "version = 1\nbogus = 3\n").unwrap();
    let r = svtk(&["--config", cfg.to_str().unwrap(), "--output-dir", out, "synth"]);
    assert_eq!(r.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&r.stderr).contains("config"));
}
