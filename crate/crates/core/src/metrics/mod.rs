//! Detection metrics: DET operating points, EER and minimum DCF.

use std::fmt::Write as _;
use std::path::Path;

use statrs::distribution::{ContinuousCDF, Normal};

use crate::container::atomic_write;
use crate::error::{Error, Result};

/// One operating point: accept iff `score >= threshold`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetPoint {
    pub threshold: f64,
    pub p_miss: f64,
    pub p_fa: f64,
}

/// Operating points sorted by ascending threshold, from accept-all
/// (`-inf`) to reject-all (`+inf`).
#[derive(Debug, Clone, PartialEq)]
pub struct DetCurve {
    pub points: Vec<DetPoint>,
    pub targets: usize,
    pub nontargets: usize,
}

fn check(scores: &[f64], targets: &[bool]) -> Result<(usize, usize)> {
    if scores.len() != targets.len() {
        return Err(Error::Dimension(format!("{} scores, {} labels", scores.len(), targets.len())));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::InvalidArgument("non-finite score".into()));
    }
    let t = targets.iter().filter(|&&t| t).count();
    let n = targets.len() - t;
    if t == 0 || n == 0 {
        return Err(Error::Degenerate(format!("need both classes, got {t} targets and {n} nontargets")));
    }
    Ok((t, n))
}

/// Exact DET curve by a single sweep over the sorted scores.
pub fn compute_det(scores: &[f64], targets: &[bool]) -> Result<DetCurve> {
    let (n_tar, n_non) = check(scores, targets)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let point = |threshold: f64, missed: usize, false_alarms: usize| DetPoint {
        threshold,
        p_miss: missed as f64 / n_tar as f64,
        p_fa: false_alarms as f64 / n_non as f64,
    };
    let mut points = vec![point(f64::NEG_INFINITY, 0, n_non)];
    // Scores strictly below the current threshold are rejected.
    let (mut missed, mut fa) = (0usize, n_non);
    let mut i = 0;
    while i < order.len() {
        let thr = scores[order[i]];
        points.push(point(thr, missed, fa));
        while i < order.len() && scores[order[i]] == thr {
            if targets[order[i]] {
                missed += 1;
            } else {
                fa -= 1;
            }
            i += 1;
        }
    }
    points.push(point(f64::INFINITY, n_tar, 0));
    Ok(DetCurve { points, targets: n_tar, nontargets: n_non })
}

/// Rate where `P_miss = P_fa` on the curve, interpolating linearly between
/// the two operating points that straddle the crossing.
pub fn eer_from_points(points: &[DetPoint]) -> f64 {
    let d = |p: &DetPoint| p.p_miss - p.p_fa;
    let i = points.iter().position(|p| d(p) >= 0.0).expect("reject-all point has P_miss - P_fa = 1");
    let hi = points[i];
    if d(&hi) == 0.0 || i == 0 {
        return hi.p_miss;
    }
    let lo = points[i - 1];
    let t = -d(&lo) / (d(&hi) - d(&lo));
    lo.p_miss + t * (hi.p_miss - lo.p_miss)
}

pub fn compute_eer(scores: &[f64], targets: &[bool]) -> Result<f64> {
    Ok(eer_from_points(&compute_det(scores, targets)?.points))
}

/// Detection-cost parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DcfParams {
    pub p_tar: f64,
    pub c_miss: f64,
    pub c_fa: f64,
}

impl Default for DcfParams {
    fn default() -> Self {
        Self { p_tar: 1e-3, c_miss: 1.0, c_fa: 1.0 }
    }
}

pub fn min_dcf_from_points(points: &[DetPoint], p: DcfParams) -> f64 {
    let norm = (p.c_miss * p.p_tar).min(p.c_fa * (1.0 - p.p_tar));
    points
        .iter()
        .map(|q| p.c_miss * p.p_tar * q.p_miss + p.c_fa * (1.0 - p.p_tar) * q.p_fa)
        .fold(f64::INFINITY, f64::min)
        / norm
}

/// Normalized minimum detection cost over the DET operating points.
pub fn compute_min_dcf(scores: &[f64], targets: &[bool], p: DcfParams) -> Result<f64> {
    if !(p.p_tar > 0.0 && p.p_tar < 1.0) || p.c_miss <= 0.0 || p.c_fa <= 0.0 {
        return Err(Error::InvalidArgument(format!("invalid cost parameters {p:?}")));
    }
    Ok(min_dcf_from_points(&compute_det(scores, targets)?.points, p))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub eer: f64,
    pub min_dcf: f64,
    pub targets: usize,
    pub nontargets: usize,
}

pub fn evaluate(scores: &[f64], targets: &[bool], p: DcfParams) -> Result<(Summary, DetCurve)> {
    let det = compute_det(scores, targets)?;
    let summary = Summary {
        eer: eer_from_points(&det.points),
        min_dcf: compute_min_dcf(scores, targets, p)?,
        targets: det.targets,
        nontargets: det.nontargets,
    };
    Ok((summary, det))
}

impl Summary {
    /// `key=value` lines, rates printed `%.4f`.
    pub fn to_key_values(&self) -> String {
        format!(
            "eer={:.4}\nmin_dcf={:.4}\ntargets={}\nnontargets={}\n",
            self.eer, self.min_dcf, self.targets, self.nontargets
        )
    }
}

impl DetCurve {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("threshold,p_miss,p_fa\n");
        for p in &self.points {
            let _ = writeln!(s, "{},{},{}", p.threshold, p.p_miss, p.p_fa);
        }
        s
    }

    /// Probit-warped coordinates; rates of exactly 0 or 1 are clipped to
    /// `[1/(2N), 1 - 1/(2N)]` of their class so every point is finite.
    pub fn to_probit_csv(&self) -> String {
        let normal = Normal::standard();
        let warp = |p: f64, n: usize| {
            let lo = 0.5 / n as f64;
            normal.inverse_cdf(p.clamp(lo, 1.0 - lo))
        };
        let mut s = String::from("threshold,probit_p_miss,probit_p_fa\n");
        for p in &self.points {
            let _ = writeln!(s, "{},{:.6},{:.6}", p.threshold, warp(p.p_miss, self.targets), warp(p.p_fa, self.nontargets));
        }
        s
    }

    /// Writes `<stem>.csv` and `<stem>.probit.csv`.
    pub fn save(&self, stem: &Path) -> Result<()> {
        atomic_write(&stem.with_extension("csv"), self.to_csv().as_bytes())?;
        atomic_write(&stem.with_extension("probit.csv"), self.to_probit_csv().as_bytes())
    }
}
