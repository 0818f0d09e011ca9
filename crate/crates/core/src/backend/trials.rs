//! Trial lists and score files.
//!
//! A trial line is `enroll_id<TAB>test_id<TAB>phrase_id<TAB>label` with label
//! `tgt`, `non` or `unk`; a score line appends `<TAB>score` printed `%.6f`.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::container::{atomic_write, read_text};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Target,
    Nontarget,
    Unknown,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Target => "tgt",
            Label::Nontarget => "non",
            Label::Unknown => "unk",
        }
    }

    /// `Some(true)` for targets, `Some(false)` for nontargets.
    pub fn is_target(self) -> Option<bool> {
        match self {
            Label::Target => Some(true),
            Label::Nontarget => Some(false),
            Label::Unknown => None,
        }
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tgt" => Ok(Label::Target),
            "non" => Ok(Label::Nontarget),
            "unk" => Ok(Label::Unknown),
            other => Err(Error::Format(format!("unknown trial label {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Trial {
    pub enroll_id: String,
    pub test_id: String,
    pub phrase_id: String,
    pub label: Label,
}

impl Trial {
    pub fn new(enroll_id: &str, test_id: &str, phrase_id: &str, label: Label) -> Self {
        Self { enroll_id: enroll_id.into(), test_id: test_id.into(), phrase_id: phrase_id.into(), label }
    }

    fn line(&self) -> String {
        format!("{}\t{}\t{}\t{}", self.enroll_id, self.test_id, self.phrase_id, self.label.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredTrial {
    pub trial: Trial,
    pub score: f64,
}

fn fields<'a>(line: &'a str, lineno: usize, n: usize, what: &str) -> Result<Vec<&'a str>> {
    let f: Vec<&str> = line.split('\t').collect();
    if f.len() != n || f.iter().any(|s| s.is_empty()) {
        return Err(Error::Format(format!("{what} line {lineno}: expected {n} tab-separated fields, got {line:?}")));
    }
    Ok(f)
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r'))).filter(|(_, l)| !l.trim().is_empty())
}

fn check_unique<'a>(trials: impl Iterator<Item = &'a Trial>) -> Result<()> {
    let mut seen = HashSet::new();
    for t in trials {
        if !seen.insert((&t.enroll_id, &t.test_id, &t.phrase_id)) {
            return Err(Error::Format(format!(
                "duplicate trial ({}, {}, {})",
                t.enroll_id, t.test_id, t.phrase_id
            )));
        }
    }
    Ok(())
}

pub fn parse_trials(text: &str) -> Result<Vec<Trial>> {
    let mut out = Vec::new();
    for (n, line) in content_lines(text) {
        let f = fields(line, n, 4, "trial")?;
        out.push(Trial::new(f[0], f[1], f[2], f[3].parse()?));
    }
    check_unique(out.iter())?;
    Ok(out)
}

pub fn format_trials(trials: &[Trial]) -> String {
    trials.iter().fold(String::new(), |mut s, t| {
        let _ = writeln!(s, "{}", t.line());
        s
    })
}

pub fn read_trials(path: &Path) -> Result<Vec<Trial>> {
    parse_trials(&read_text(path)?)
}

pub fn write_trials(path: &Path, trials: &[Trial]) -> Result<()> {
    atomic_write(path, format_trials(trials).as_bytes())
}

pub fn parse_scores(text: &str) -> Result<Vec<ScoredTrial>> {
    let mut out = Vec::new();
    for (n, line) in content_lines(text) {
        let f = fields(line, n, 5, "score")?;
        let score: f64 = f[4]
            .parse()
            .map_err(|_| Error::Format(format!("score line {n}: bad score {:?}", f[4])))?;
        if !score.is_finite() {
            return Err(Error::Format(format!("score line {n}: non-finite score")));
        }
        out.push(ScoredTrial { trial: Trial::new(f[0], f[1], f[2], f[3].parse()?), score });
    }
    check_unique(out.iter().map(|s| &s.trial))?;
    Ok(out)
}

pub fn format_scores(scores: &[ScoredTrial]) -> String {
    scores.iter().fold(String::new(), |mut s, t| {
        let _ = writeln!(s, "{}\t{:.6}", t.trial.line(), t.score);
        s
    })
}

pub fn read_scores(path: &Path) -> Result<Vec<ScoredTrial>> {
    parse_scores(&read_text(path)?)
}

pub fn write_scores(path: &Path, scores: &[ScoredTrial]) -> Result<()> {
    atomic_write(path, format_scores(scores).as_bytes())
}

/// Scores and target flags of the labelled trials, skipping `unk`.
pub fn labelled(scores: &[ScoredTrial]) -> (Vec<f64>, Vec<bool>) {
    scores
        .iter()
        .filter_map(|s| s.trial.label.is_target().map(|t| (s.score, t)))
        .unzip()
}
