mod common;

use common::{brute_det, brute_eer, brute_min_dcf, random_trials, rng};
use proptest::prelude::*;
use svtk::metrics::{compute_det, compute_eer, compute_min_dcf, DcfParams};

#[test]
fn sweep_agrees_with_brute_force_exactly() {
    let mut r = rng(2024);
    for _ in 0..1000 {
        let (s, t) = random_trials(&mut r, 200);
        let det = compute_det(&s, &t).unwrap();
        let pts: Vec<(f64, f64, f64)> = det.points.iter().map(|p| (p.threshold, p.p_miss, p.p_fa)).collect();
        assert_eq!(pts, brute_det(&s, &t));
        assert_eq!(compute_eer(&s, &t).unwrap(), brute_eer(&s, &t));
        assert_eq!(compute_min_dcf(&s, &t, DcfParams::default()).unwrap(), brute_min_dcf(&s, &t, 1e-3));
    }
}

#[test]
fn worked_four_plus_four() {
    let s = [0.9, 0.8, 0.7, 0.2, 0.6, 0.3, 0.1, 0.05];
    let t = [true, true, true, true, false, false, false, false];
    assert_eq!(compute_eer(&s, &t).unwrap(), 0.25);
    assert_eq!(brute_eer(&s, &t), 0.25);
    assert_eq!(common::brute_point(&s, &t, 0.65), (0.25, 0.0));
}

fn trial_set() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
    (2usize..120).prop_flat_map(|n| {
        (prop::collection::vec(-150i32..150, n), prop::collection::vec(any::<bool>(), n)).prop_map(|(k, mut t)| {
            t[0] = true;
            t[1] = false;
            (k.iter().map(|&v| v as f64 / 64.0).collect(), t)
        })
    })
}

proptest! {
    #[test]
    fn increasing_transforms_leave_metrics_bit_equal((s, t) in trial_set()) {
        let eer = compute_eer(&s, &t).unwrap();
        let dcf = compute_min_dcf(&s, &t, DcfParams::default()).unwrap();
        for f in [|x: f64| 2.0 * x + 1.0, |x: f64| x.tanh()] {
            let u: Vec<f64> = s.iter().map(|&x| f(x)).collect();
            prop_assert_eq!(compute_eer(&u, &t).unwrap(), eer);
            prop_assert_eq!(compute_min_dcf(&u, &t, DcfParams::default()).unwrap(), dcf);
        }
    }

    #[test]
    fn det_is_monotone_and_bounded((s, t) in trial_set()) {
        let det = compute_det(&s, &t).unwrap();
        let first = det.points[0];
        let last = *det.points.last().unwrap();
        prop_assert_eq!((first.p_miss, first.p_fa), (0.0, 1.0));
        prop_assert_eq!((last.p_miss, last.p_fa), (1.0, 0.0));
        for w in det.points.windows(2) {
            prop_assert!(w[0].threshold < w[1].threshold);
            prop_assert!(w[0].p_miss <= w[1].p_miss && w[0].p_fa >= w[1].p_fa);
        }
        let eer = compute_eer(&s, &t).unwrap();
        prop_assert!((0.0..=1.0).contains(&eer));
    }
}
