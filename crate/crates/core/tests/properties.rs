use hysterlab::epnn::{forward, Architecture, EpnnParams};
use hysterlab::operators::{soundness, DsState, RelayState, StopState};
use hysterlab::refmodels::*;
use hysterlab::signals::*;
use hysterlab::training::{mse, mse_fixed_output};
use proptest::prelude::*;

fn series(x: Vec<f64>) -> TimeSeriesPair {
    TimeSeriesPair::from_input(0.01, x).unwrap()
}

fn run_stop(r: f64, xs: &[f64]) -> Vec<f64> {
    let mut s = StopState::new(r, xs[0]).unwrap();
    let mut out = vec![s.output()];
    for &x in &xs[1..] {
        out.push(s.step(x).unwrap());
    }
    out
}

fn run_ds(r: f64, beta: f64, xs: &[f64]) -> Vec<f64> {
    let mut s = DsState::new(r, beta, xs[0]).unwrap();
    let mut out = vec![s.output()];
    for &x in &xs[1..] {
        out.push(s.step(x).unwrap());
    }
    out
}

/// Inserts `k` points strictly inside every step; returns the refined
/// sequence and the positions of the original samples in it.
fn refine(xs: &[f64], fractions: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut out = vec![xs[0]];
    let mut keep = vec![0];
    for w in xs.windows(2) {
        for &f in fractions {
            out.push(w[0] + (w[1] - w[0]) * f);
        }
        out.push(w[1]);
        keep.push(out.len() - 1);
    }
    (out, keep)
}

fn walk() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0..3.0f64, 2..200)
}

fn sorted_fractions() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01..0.99f64, 1..4).prop_map(|mut v| {
        v.sort_by(f64::total_cmp);
        v
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn stop_output_is_bounded(r in 0.05..2.0f64, xs in walk()) {
        for y in run_stop(r, &xs) {
            prop_assert!(y.abs() <= r);
        }
    }

    #[test]
    fn play_plus_stop_is_input(r in 0.05..2.0f64, xs in walk()) {
        let mut s = StopState::new(r, xs[0]).unwrap();
        prop_assert!((s.play() + s.output() - xs[0]).abs() <= 1e-12);
        for &x in &xs[1..] {
            let y = s.step(x).unwrap();
            prop_assert!((s.play() + y - x).abs() <= 1e-12);
        }
    }

    #[test]
    fn stop_wipes_out_closed_minor_loops(
        r in 0.05..1.5f64, a in -3.0..3.0f64, b in -3.0..3.0f64, t in 0.0..1.0f64, c in -3.0..3.0f64,
    ) {
        let a2 = b + t * (a - b);
        let with_loop = run_stop(r, &[0.0, a, b, a2, b, c]);
        let without = run_stop(r, &[0.0, a, b, c]);
        prop_assert!((with_loop[5] - without[3]).abs() <= 1e-12);
        // The minor branch returns to its emanation point (b, y_b).
        prop_assert!((with_loop[4] - with_loop[2]).abs() <= 1e-12);
    }

    #[test]
    fn stop_and_ds_are_refinement_invariant(
        r in 0.05..1.5f64, beta in 0.5..50.0f64, xs in walk(), fr in sorted_fractions(),
    ) {
        let (fine, keep) = refine(&xs, &fr);
        let coarse = run_stop(r, &xs);
        let refined = run_stop(r, &fine);
        for (i, &k) in keep.iter().enumerate() {
            prop_assert!((coarse[i] - refined[k]).abs() <= 1e-12);
        }
        let coarse = run_ds(r, beta, &xs);
        let refined = run_ds(r, beta, &fine);
        for (i, &k) in keep.iter().enumerate() {
            prop_assert!((coarse[i] - refined[k]).abs() <= 1e-12);
        }
    }

    #[test]
    fn stop_semigroup_on_a_monotone_step(r in 0.05..1.5f64, prefix in walk(), x1 in -4.0..4.0f64, fr in sorted_fractions()) {
        let mut one = StopState::new(r, prefix[0]).unwrap();
        for &x in &prefix[1..] {
            one.step(x).unwrap();
        }
        let mut many = one;
        let start = one.last_input();
        one.step(x1).unwrap();
        for &f in &fr {
            many.step(start + (x1 - start) * f).unwrap();
        }
        many.step(x1).unwrap();
        prop_assert!((one.output() - many.output()).abs() <= 1e-12);
    }

    #[test]
    fn soundness_is_non_increasing_and_absorbing(r in 0.1..1.0f64, beta in 0.5..5.0f64, xs in walk()) {
        let mut s = DsState::new(r, beta, xs[0]).unwrap();
        let mut prev = s.soundness();
        let mut dead = false;
        for &x in &xs[1..] {
            let y = s.step(x).unwrap();
            prop_assert!(s.soundness() <= prev);
            prev = s.soundness();
            if dead {
                prop_assert_eq!(y, 0.0);
            }
            if s.slip() >= r * beta {
                dead = true;
                prop_assert_eq!(y, 0.0);
            }
        }
    }

    #[test]
    fn relay_matches_two_state_automaton(s in -1.0..1.0f64, r in 0.01..1.0f64, xs in prop::collection::vec(-2.0..2.0f64, 1..400)) {
        let mut relay = RelayState::new(s, r, xs[0]).unwrap();
        let mut state = if s > 0.0 { -1.0 } else { 1.0 };
        for (i, &x) in xs.iter().enumerate() {
            if x >= s + r {
                state = 1.0;
            } else if x <= s - r {
                state = -1.0;
            }
            if i > 0 {
                relay.step(x).unwrap();
            }
            prop_assert_eq!(relay.sign(), state);
        }
    }

    #[test]
    fn pi_is_refinement_invariant(xs in walk(), fr in sorted_fractions()) {
        let spec = PiSpec { thresholds: vec![0.1, 0.4, 0.9, 1.6], weights: vec![1.0, -0.3, 0.7, 0.2] };
        let (fine, keep) = refine(&xs, &fr);
        let coarse = pi_simulate(&spec, &series(xs)).unwrap();
        let refined = pi_simulate(&spec, &series(fine)).unwrap();
        for (i, &k) in keep.iter().enumerate() {
            prop_assert!((coarse[i] - refined[k]).abs() <= 1e-12);
        }
    }

    #[test]
    fn preisach_wipes_out_closed_minor_loops(
        a in -1.0..1.0f64, b in -1.0..1.0f64, t in 0.0..1.0f64, c in -1.0..1.0f64,
    ) {
        let spec = PreisachSpec::from_grid(&PreisachGrid {
            bounds: (-1.0, 1.0),
            resolution: 24,
            density: Density::Uniform { height: 1.0 },
        }).unwrap();
        let a2 = b + t * (a - b);
        let with_loop = preisach_simulate(&spec, &series(vec![0.0, a, b, a2, b, c])).unwrap();
        let without = preisach_simulate(&spec, &series(vec![0.0, a, b, c])).unwrap();
        prop_assert!((with_loop[5] - without[3]).abs() <= 1e-6);
    }

    #[test]
    fn rdpi_with_zero_rate_is_pi(xs in walk(), c in 0.0..2.0f64) {
        let spec = RdpiSpec { thresholds: vec![0.2, 0.5, 1.0], weights: vec![1.0, 0.5, 0.25], rate_coefficient: c };
        let s = series(xs.clone()).with_xdot(vec![0.0; xs.len()]).unwrap();
        let a = rdpi_simulate(&spec, &s).unwrap();
        let b = pi_simulate(&spec.pi(), &s).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn rate_estimate_is_linear(
        xs in prop::collection::vec((-3.0..3.0f64, -3.0..3.0f64), 2..100), p in -2.0..2.0f64, q in -2.0..2.0f64,
    ) {
        let x: Vec<f64> = xs.iter().map(|v| v.0).collect();
        let z: Vec<f64> = xs.iter().map(|v| v.1).collect();
        let mix: Vec<f64> = xs.iter().map(|v| p * v.0 + q * v.1).collect();
        let rx = estimate_rate(&series(x));
        let rz = estimate_rate(&series(z));
        let rm = estimate_rate(&series(mix));
        for i in 0..xs.len() {
            let (a, b) = (p * rx.xdot().unwrap()[i], q * rz.xdot().unwrap()[i]);
            let scale = a.abs().max(b.abs()).max(1.0);
            prop_assert!((rm.xdot().unwrap()[i] - (a + b)).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn normalize_round_trip(
        rows in prop::collection::vec((-1e3..1e3f64, -50.0..50.0f64), 2..100), gain in 0.001..1e3f64,
    ) {
        let x: Vec<f64> = rows.iter().map(|v| v.0 * gain).collect();
        let y: Vec<f64> = rows.iter().map(|v| v.1).collect();
        let s = estimate_rate(&series(x).with_y(y).unwrap());
        let (n, scales) = normalize(&s);
        for v in n.x().iter().chain(n.y().unwrap()) {
            prop_assert!(v.abs() <= 1.0 + 1e-12);
        }
        let back = denormalize(&n, &scales);
        let close = |a: &[f64], b: &[f64]| {
            let scale = b.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
            a.iter().zip(b).all(|(u, v)| (u - v).abs() <= 1e-12 * scale)
        };
        prop_assert!(close(back.x(), s.x()));
        prop_assert!(close(back.y().unwrap(), s.y().unwrap()));
        prop_assert!(close(back.xdot().unwrap(), s.xdot().unwrap()));
        prop_assert_eq!(back.t(), s.t());
    }

    #[test]
    fn reversed_series_mirrors_breakpoints(steps in prop::collection::vec(prop_oneof![-1.0..-0.01f64, 0.01..1.0f64], 1..150)) {
        let mut x = vec![0.0];
        for d in steps {
            let last = *x.last().unwrap();
            x.push(last + d);
        }
        let n = x.len();
        let fwd = monotone_segments(&series(x.clone())).breakpoints;
        let rev: Vec<f64> = x.into_iter().rev().collect();
        let bwd = monotone_segments(&series(rev)).breakpoints;
        let mirrored: Vec<usize> = fwd.iter().rev().map(|&b| n - 1 - b).collect();
        prop_assert_eq!(bwd, mirrored);
    }

    #[test]
    fn nested_least_squares_dominates_fixed_output(
        inner in prop::collection::vec(-2.0..2.0f64, 18), output in prop::collection::vec(-3.0..3.0f64, 3),
    ) {
        let arch = Architecture::new(2, 2, false).unwrap();
        let mut v = inner;
        v[3] = v[3].abs() * 3.0;
        v[7] = v[7].abs() * 3.0;
        let mut p = EpnnParams::unpack(&v, &arch).unwrap();
        let xs: Vec<f64> = (0..120).map(|i| (i as f64 * 0.11).sin() * (1.0 - i as f64 / 240.0)).collect();
        let y: Vec<f64> = xs.iter().map(|x| x.powi(3) - 0.2 * x).collect();
        let s = series(xs).with_y(y).unwrap();
        let best = mse(&p, &arch, &s).unwrap();
        p.output = output;
        prop_assert!(best <= mse_fixed_output(&p, &arch, &s).unwrap() + 1e-15);
    }

    #[test]
    fn epnn_without_rate_is_refinement_invariant(inner in prop::collection::vec(-2.0..2.0f64, 24), xs in prop::collection::vec(-1.0..1.0f64, 2..80), fr in sorted_fractions()) {
        let arch = Architecture::new(3, 2, false).unwrap();
        let mut v = inner;
        for i in arch.log_beta_indices() {
            v[i] = v[i].abs() * 4.0;
        }
        let mut p = EpnnParams::unpack(&v, &arch).unwrap();
        p.output = vec![0.7, -1.1, 0.2];
        let (fine, keep) = refine(&xs, &fr);
        let a = forward(&p, &arch, &series(xs)).unwrap();
        let b = forward(&p, &arch, &series(fine)).unwrap();
        for (i, &k) in keep.iter().enumerate() {
            prop_assert!((a[i] - b[k]).abs() <= 1e-12);
        }
    }
}

#[test]
fn soundness_boundary_is_zero() {
    assert_eq!(soundness(2.0, 1.0, 2.0), 0.0);
}
