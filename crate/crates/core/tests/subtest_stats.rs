use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use hellinger_bn::bn::{random_simplex, CountTable};
use hellinger_bn::subtest::{closeness_statistic, hellinger_subtest, hellinger_subtest_symbols, Decision, SubtestConfig};

fn draw(p: &[f64], m: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    (0..m)
        .map(|_| {
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            for (i, &x) in p.iter().enumerate() {
                acc += x;
                if u < acc {
                    return i;
                }
            }
            p.len() - 1
        })
        .collect()
}

#[test]
fn level_under_equality() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let mut far = 0;
    let trials = 400;
    for t in 0..trials {
        let p = random_simplex(8, &mut rng);
        let (a, b) = (draw(&p, 400, &mut rng), draw(&p, 400, &mut rng));
        let cfg = SubtestConfig {
            permutations: 200,
            calibration_seed: t,
            ..SubtestConfig::new(0.1, 1.0 / 3.0)
        };
        if hellinger_subtest_symbols(&a, &b, 8, &cfg).unwrap().decision == Decision::Far {
            far += 1;
        }
    }
    let rate = far as f64 / trials as f64;
    assert!(rate <= 1.0 / 3.0 + 0.05, "false-Far rate {rate}");
}

#[test]
fn statistic_is_centered_under_poissonized_equality() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let p = random_simplex(12, &mut rng);
    let lambda = 300.0;
    let reps = 20_000;
    let ts: Vec<f64> = (0..reps)
        .map(|_| {
            let mut count = || -> Vec<u64> {
                p.iter()
                    .map(|&x| Poisson::new(lambda * x).unwrap().sample(&mut rng) as u64)
                    .collect()
            };
            let (a, b) = (count(), count());
            closeness_statistic(&CountTable::flat(a), &CountTable::flat(b)).unwrap()
        })
        .collect();
    let mean = ts.iter().sum::<f64>() / reps as f64;
    let sd = (ts.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (reps as f64 - 1.0)).sqrt();
    assert!(mean.abs() <= 3.0 * sd / (reps as f64).sqrt(), "mean {mean}, sd {sd}");
}

#[test]
fn widening_gaps_never_lowers_the_statistic() {
    // Two cells with n samples each: A = (a, n - a), B = (b, n - b).
    let t = |n: u64, a: u64, b: u64| {
        closeness_statistic(&CountTable::flat(vec![a, n - a]), &CountTable::flat(vec![b, n - b])).unwrap()
    };
    for n in 1..40 {
        for a in 0..=n {
            for b in 0..=a {
                if a < n {
                    assert!(t(n, a + 1, b) >= t(n, a, b) - 1e-12, "n={n} a={a} b={b}");
                }
                if b > 0 {
                    assert!(t(n, a, b - 1) >= t(n, a, b) - 1e-12, "n={n} a={a} b={b}");
                }
            }
        }
    }
}

#[test]
fn power_against_a_far_pair() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let far_p = [0.4, 0.1, 0.4, 0.1];
    let base = [0.25; 4];
    let mut hits = 0;
    for t in 0..100 {
        let cfg = SubtestConfig {
            permutations: 200,
            calibration_seed: t,
            ..SubtestConfig::new(0.05, 1.0 / 3.0)
        };
        let (a, b) = (draw(&far_p, 600, &mut rng), draw(&base, 600, &mut rng));
        let mut ca = vec![0u64; 4];
        let mut cb = vec![0u64; 4];
        a.iter().for_each(|&x| ca[x] += 1);
        b.iter().for_each(|&x| cb[x] += 1);
        let v = hellinger_subtest(&CountTable::flat(ca), &CountTable::flat(cb), &cfg).unwrap();
        assert_eq!(v.decision == Decision::Far, v.statistic > v.threshold);
        if v.decision == Decision::Far {
            hits += 1;
        }
    }
    assert!(hits >= 67, "{hits} of 100");
}
