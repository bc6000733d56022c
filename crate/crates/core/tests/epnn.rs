use hysterlab::epnn::*;
use hysterlab::signals::{estimate_rate, normalize, TimeSeriesPair};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn cycles(amp: f64, per_leg: usize, n: usize) -> TimeSeriesPair {
    let mut x = vec![0.0];
    for _ in 0..n {
        for &(from, to) in &[(0.0, amp), (amp, -amp), (-amp, 0.0)] {
            let k = if from == 0.0 || to == 0.0 { per_leg } else { 2 * per_leg };
            for i in 1..=k {
                x.push(from + (to - from) * i as f64 / k as f64);
            }
        }
    }
    estimate_rate(&TimeSeriesPair::from_input(0.01, x).unwrap())
}

fn random_params(arch: &Architecture, rng: &mut ChaCha8Rng, log_beta: (f64, f64), biases: bool) -> EpnnParams {
    let mut p = EpnnParams::zeros(arch);
    for n in p.nds.iter_mut() {
        *n = NdsParams {
            w_x: rng.gen_range(-1.5..1.5),
            w_xdot: if arch.rate_input { rng.gen_range(-0.02..0.02) } else { 0.0 },
            bias: if biases { rng.gen_range(-0.5..0.5) } else { 0.0 },
            log_beta: rng.gen_range(log_beta.0..log_beta.1),
        };
    }
    p.linear = LinearNeuron { w_x: rng.gen_range(-1.0..1.0), w_xdot: 0.0 };
    for row in p.hidden_weights.iter_mut() {
        for w in row.iter_mut() {
            *w = rng.gen_range(-1.0..1.0);
        }
    }
    for (b, c) in p.hidden_bias.iter_mut().zip(p.output.iter_mut()) {
        *b = if biases { rng.gen_range(-0.5..0.5) } else { 0.0 };
        *c = rng.gen_range(-1.0..1.0);
    }
    *p.output.last_mut().unwrap() = if biases { 0.3 } else { 0.0 };
    p
}

fn negate(s: &TimeSeriesPair) -> TimeSeriesPair {
    let x = s.x().iter().map(|v| -v).collect();
    let d = s.xdot().unwrap().iter().map(|v| -v).collect();
    TimeSeriesPair::new(s.t().to_vec(), x, None).unwrap().with_xdot(d).unwrap()
}

/// Dense Gauss-Jordan solve of the ridge normal equations.
fn brute_normal_equations(h: &[Vec<f64>], y: &[f64], lambda: f64) -> Vec<f64> {
    let p = h[0].len();
    let mut a = vec![vec![0.0; p + 1]; p];
    for (row, &t) in h.iter().zip(y) {
        for i in 0..p {
            for j in 0..p {
                a[i][j] += row[i] * row[j];
            }
            a[i][p] += row[i] * t;
        }
    }
    for (i, r) in a.iter_mut().enumerate() {
        r[i] += lambda;
    }
    for col in 0..p {
        let piv = (col..p).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        for row in 0..p {
            if row != col {
                let m = a[row][col] / a[col][col];
                for k in col..=p {
                    a[row][k] -= m * a[col][k];
                }
            }
        }
    }
    (0..p).map(|i| a[i][p] / a[i][i]).collect()
}

#[test]
fn least_squares_matches_dense_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let rows: Vec<Vec<f64>> = (0..200).map(|_| (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let y: Vec<f64> = (0..200).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let h = DMatrix::from_fn(200, 6, |i, j| rows[i][j]);
    let c = solve_output_weights(&h, &y).unwrap();
    let oracle = brute_normal_equations(&rows, &y, RIDGE_LAMBDA);
    for (a, b) in c.iter().zip(&oracle) {
        assert!((a - b).abs() <= 1e-9, "{a} vs {b}");
    }
    assert!(normal_equation_residual(&h, &y, &c) <= 1e-8);
}

#[test]
fn simulate_round_trip_on_training_data() {
    let arch = Architecture::new(3, 2, true).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let p = random_params(&arch, &mut rng, (2.0, 6.0), true);
    let raw = cycles(3.0, 10, 3);
    let y: Vec<f64> = raw.x().iter().map(|v| 5.0 + 2.0 * v).collect();
    let raw = raw.with_y(y).unwrap();
    let (norm, scales) = normalize(&raw);
    let base = forward(&p, &arch, &norm).unwrap();
    let sim = simulate_denormalized(&p, &arch, &raw, &scales).unwrap();
    assert!(sim.warnings.is_empty());
    for (a, b) in sim.y.iter().zip(&base) {
        assert!((a - scales.y.unapply(*b)).abs() <= 1e-12);
    }
}

#[test]
fn zero_biases_give_odd_loops_and_biases_break_them() {
    let arch = Architecture::new(4, 3, true).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let s = cycles(0.9, 12, 2);
    let neg = negate(&s);

    let odd = random_params(&arch, &mut rng, (1.0, 5.0), false);
    let up = forward(&odd, &arch, &s).unwrap();
    let down = forward(&odd, &arch, &neg).unwrap();
    for (a, b) in up.iter().zip(&down) {
        assert!((a + b).abs() <= 1e-12);
    }

    let skew = random_params(&arch, &mut rng, (1.0, 5.0), true);
    let up = forward(&skew, &arch, &s).unwrap();
    let down = forward(&skew, &arch, &neg).unwrap();
    let gap = up.iter().zip(&down).fold(0.0_f64, |m, (a, b)| m.max((a + b).abs()));
    assert!(gap > 1e-3, "{gap}");
}

#[test]
fn large_beta_gives_congruent_cycles() {
    let arch = Architecture::new(5, 3, false).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let per_leg = 10;
    let per_cycle = 4 * per_leg;
    let s = cycles(1.0, per_leg, 3);
    for _ in 0..10 {
        let p = random_params(&arch, &mut rng, (1e7_f64.ln(), 1e8_f64.ln()), true);
        let y = forward(&p, &arch, &s).unwrap();
        let second = &y[1 + per_cycle..1 + 2 * per_cycle];
        let third = &y[1 + 2 * per_cycle..1 + 3 * per_cycle];
        let dev = second.iter().zip(third).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(dev <= 1e-6, "{dev}");
    }
}

#[test]
fn forward_is_bit_deterministic() {
    let arch = Architecture::new(6, 4, true).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let p = random_params(&arch, &mut rng, (0.0, 8.0), true);
    let s = cycles(1.0, 9, 4);
    let a = forward(&p, &arch, &s).unwrap();
    let b = forward(&p, &arch, &s).unwrap();
    assert!(a.iter().zip(&b).all(|(u, v)| u.to_bits() == v.to_bits()));
}

#[test]
fn unpack_rejects_wrong_length_and_pack_is_bit_exact() {
    let arch = Architecture::new(10, 5, true).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let v: Vec<f64> = (0..102).map(|_| rng.gen_range(-5.0..5.0)).collect();
    let p = EpnnParams::unpack(&v, &arch).unwrap();
    assert_eq!(EpnnParams::unpack(&p.pack(), &arch).unwrap(), p);
    assert_eq!(p.pack(), v);
    assert!(EpnnParams::unpack(&v[..82], &arch).is_err());
}
