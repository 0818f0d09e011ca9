//! Independent oracles shared by the integration tests and the acceptance
//! harness.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut impl Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

/// `|a - n| / max(|a|, |n|, floor)`.
pub fn rel_err(a: f64, n: f64, floor: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(floor)
}

pub const FD_STEP: f64 = 1e-5;
pub const FD_FLOOR: f64 = 1e-6;

/// Outcome of a finite-difference probe of one coordinate.
pub enum Probe {
    Checked(f64),
    /// One-sided slopes disagree: a ReLU or max-pool switch lies within the
    /// step, so the central difference is meaningless there.
    Kink,
}

/// Compare `analytic` with the central difference of `f` at coordinate
/// `get/set`, flagging kinks.
pub fn probe(f: &mut dyn FnMut() -> f64, set: &mut dyn FnMut(f64), x0: f64, analytic: f64) -> Probe {
    let f0 = f();
    set(x0 + FD_STEP);
    let fp = f();
    set(x0 - FD_STEP);
    let fm = f();
    set(x0);
    let right = (fp - f0) / FD_STEP;
    let left = (f0 - fm) / FD_STEP;
    let central = (fp - fm) / (2.0 * FD_STEP);
    if rel_err(right, left, 1e-4) > 1e-2 {
        return Probe::Kink;
    }
    Probe::Checked(rel_err(analytic, central, FD_FLOOR))
}

/// Central differences of `f` for every coordinate of `x` (no kink logic;
/// for smooth functions).
pub fn numeric_gradient(x: &mut [f64], f: &mut dyn FnMut(&[f64]) -> f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let x0 = x[i];
            x[i] = x0 + FD_STEP;
            let fp = f(x);
            x[i] = x0 - FD_STEP;
            let fm = f(x);
            x[i] = x0;
            (fp - fm) / (2.0 * FD_STEP)
        })
        .collect()
}

pub fn max_rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic.iter().zip(numeric).map(|(&a, &n)| rel_err(a, n, FD_FLOOR)).fold(0.0, f64::max)
}

/// Brute-force operating point at threshold `t`: accept iff score >= t.
pub fn brute_point(scores: &[f64], targets: &[bool], t: f64) -> (f64, f64) {
    let nt = targets.iter().filter(|&&x| x).count() as f64;
    let nn = targets.len() as f64 - nt;
    let mut miss = 0usize;
    let mut fa = 0usize;
    for (s, &tg) in scores.iter().zip(targets) {
        if tg && *s < t {
            miss += 1;
        }
        if !tg && *s >= t {
            fa += 1;
        }
    }
    (miss as f64 / nt, fa as f64 / nn)
}

/// All `(threshold, p_miss, p_fa)` for -inf, every distinct score, +inf,
/// each counted from scratch: O(N^2).
pub fn brute_det(scores: &[f64], targets: &[bool]) -> Vec<(f64, f64, f64)> {
    let mut thr: Vec<f64> = scores.to_vec();
    thr.push(f64::NEG_INFINITY);
    thr.push(f64::INFINITY);
    thr.sort_by(f64::total_cmp);
    thr.dedup();
    thr.iter()
        .map(|&t| {
            let (m, f) = brute_point(scores, targets, t);
            (t, m, f)
        })
        .collect()
}

/// Scan every consecutive pair of brute-force points for the first segment
/// that reaches the diagonal.
pub fn brute_eer(scores: &[f64], targets: &[bool]) -> f64 {
    let pts = brute_det(scores, targets);
    for k in 0..pts.len() {
        let (_, m, f) = pts[k];
        let d = m - f;
        if d == 0.0 {
            return m;
        }
        if d > 0.0 {
            let (_, m0, f0) = pts[k - 1];
            let d0 = m0 - f0;
            let t = -d0 / (d - d0);
            return m0 + t * (m - m0);
        }
    }
    unreachable!("reject-all point lies above the diagonal")
}

pub fn brute_min_dcf(scores: &[f64], targets: &[bool], p_tar: f64) -> f64 {
    let norm = p_tar.min(1.0 - p_tar);
    brute_det(scores, targets)
        .iter()
        .map(|&(_, m, f)| p_tar * m + (1.0 - p_tar) * f)
        .fold(f64::INFINITY, f64::min)
        / norm
}

/// Random scored trial set with both classes present and frequent ties.
pub fn random_trials(rng: &mut impl Rng, max_n: usize) -> (Vec<f64>, Vec<bool>) {
    let n = rng.random_range(2..=max_n);
    let mut targets: Vec<bool> = (0..n).map(|_| rng.random_bool(0.4)).collect();
    targets[0] = true;
    targets[1] = false;
    let grid = rng.random_range(4..200) as f64;
    let scores = targets
        .iter()
        .map(|&t| {
            let shift = if t { rng.random_range(0.0..1.5) } else { 0.0 };
            ((rng.random_range(-2.0..2.0) + shift) * grid).round() / grid
        })
        .collect();
    (scores, targets)
}

/// `|X[k]|^2` of a zero-padded frame by the definition of the DFT.
pub fn naive_power(frame: &[f64], n: usize) -> Vec<f64> {
    (0..=n / 2)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (t, &x) in frame.iter().enumerate() {
                let a = -2.0 * std::f64::consts::PI * (k * t % n) as f64 / n as f64;
                re += x * a.cos();
                im += x * a.sin();
            }
            re * re + im * im
        })
        .collect()
}

pub mod grad;
