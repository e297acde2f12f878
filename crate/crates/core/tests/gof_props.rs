use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hellinger_bn::bn::SampleSet;
use hellinger_bn::gof::{
    gof_product, poissonized_counts, preprocess_flip, preprocess_xor_noise, product_tv_exact, GofConfig, ProductModel,
};
use hellinger_bn::subtest::Decision;

/// Dense product distribution over `{0,1}^n`, coordinate 0 in the low bit.
fn dense(p: &[f64]) -> Vec<f64> {
    (0..1usize << p.len())
        .map(|x| {
            p.iter()
                .enumerate()
                .map(|(i, &pi)| if (x >> i) & 1 == 1 { pi } else { 1.0 - pi })
                .product()
        })
        .collect()
}

fn tv(p: &[f64], q: &[f64]) -> f64 {
    0.5 * dense(p).iter().zip(dense(q)).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

fn h_sq(p: &[f64], q: &[f64]) -> f64 {
    1.0 - dense(p).iter().zip(dense(q)).map(|(a, b)| (a * b).sqrt()).sum::<f64>()
}

fn noisy(x: f64, r: f64) -> f64 {
    x * (1.0 - r) + (1.0 - x) * r
}

#[test]
fn flip_preserves_distance() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..200 {
        let n = rng.gen_range(1..=10);
        let p: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
        let q = ProductModel::new((0..n).map(|_| rng.gen()).collect()).unwrap();
        let (fq, mask) = preprocess_flip(&q);
        let fp: Vec<f64> = p.iter().zip(&mask).map(|(&x, &f)| if f { 1.0 - x } else { x }).collect();
        assert!((tv(&p, q.means()) - tv(&fp, fq.means())).abs() < 1e-12);
        assert!(fq.means().iter().all(|&x| x <= 0.5));
    }
}

#[test]
fn noise_moves_distance_by_at_most_two_eps_over_c() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (eps, c) = (0.5, 10.0);
    for _ in 0..200 {
        let n = rng.gen_range(1..=10);
        let floor = eps / (c * n as f64);
        // Half the reference means sit below the noise floor.
        let q: Vec<f64> = (0..n)
            .map(|i| if i % 2 == 0 { rng.gen_range(0.0..floor) } else { rng.gen_range(0.0..=0.5) })
            .collect();
        let p: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
        let (lq, rates) = preprocess_xor_noise(&ProductModel::new(q.clone()).unwrap(), eps, c).unwrap();
        let lp: Vec<f64> = p.iter().zip(&rates).map(|(&x, &r)| noisy(x, r)).collect();
        assert!(lq.means().iter().all(|&x| x >= floor - 1e-15));
        assert!((tv(&p, &q) - tv(&lp, lq.means())).abs() <= 2.0 * eps / c + 1e-12);
        let same: Vec<f64> = q.iter().zip(&rates).map(|(&x, &r)| noisy(x, r)).collect();
        assert_eq!(&same[..], lq.means());
    }
}

#[test]
fn hellinger_below_chi_square_for_small_means() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..300 {
        let n = rng.gen_range(1..=10);
        let q: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..=0.5)).collect();
        let p: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
        let chi: f64 = p.iter().zip(&q).map(|(a, b)| (a - b).powi(2) / b).sum();
        assert!(h_sq(&p, &q) <= chi + 1e-12);
    }
}

#[test]
fn product_tv_oracle_matches_dense() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..100 {
        let n = rng.gen_range(1..=10);
        let p: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
        let q: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
        assert!((product_tv_exact(&p, &q, 1 << 12).unwrap() - tv(&p, &q)).abs() < 1e-12);
    }
}

#[test]
fn poisson_thinning_mean() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let p = [0.1, 0.5, 0.9, 1.0];
    let model = ProductModel::new(p.to_vec()).unwrap();
    let m = 20;
    let rows = (2.0 * std::f64::consts::E * m as f64).ceil() as usize;
    let reps = 10_000;
    let mut sums = [0.0f64; 4];
    let mut sq = [0.0f64; 4];
    for _ in 0..reps {
        let s = model.sample(rows, &mut rng);
        let c = poissonized_counts(&s, m, &mut rng).unwrap();
        assert_eq!(c.ones[3], c.draws[3]);
        for i in 0..4 {
            sums[i] += c.ones[i] as f64;
            sq[i] += (c.ones[i] as f64).powi(2);
        }
    }
    for i in 0..4 {
        let mean = sums[i] / reps as f64;
        let var = sq[i] / reps as f64 - mean * mean;
        let se = (var / reps as f64).sqrt();
        assert!((mean - m as f64 * p[i]).abs() <= 3.0 * se, "coordinate {i}: mean {mean}");
    }
}

#[test]
fn truncation_is_rare() {
    let (n, eps) = (20, 0.25);
    let cfg = GofConfig::new(eps);
    let m = cfg.rate(n);
    let data = vec![0u32; cfg.sample_cap(n) * n];
    let s = SampleSet::new(vec![2; n], data).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let truncated = (0..1000)
        .filter(|_| poissonized_counts(&s, m, &mut rng).unwrap().truncated)
        .count();
    assert!(truncated < 10, "{truncated} truncations in 1000 runs");
}

#[test]
fn scalar_case_detects_a_point_mass() {
    let q = ProductModel::new(vec![0.5]).unwrap();
    let p = ProductModel::new(vec![1.0]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut far = 0;
    for t in 0..100 {
        let cfg = GofConfig {
            seed: t,
            ..GofConfig::new(0.5)
        };
        let s = p.sample(cfg.sample_cap(1), &mut rng);
        if gof_product(&s, &q, &cfg).unwrap().decision == Decision::Far {
            far += 1;
        }
    }
    assert!(far >= 67, "{far} of 100");
}

#[test]
fn preprocessing_heavy_reference() {
    // Means above 1/2 get flipped, zeros get lifted by noise.
    let n = 40;
    let base = [0.9, 0.0, 0.3, 0.5];
    let q = ProductModel::new((0..n).map(|i| base[i % 4]).collect()).unwrap();
    let eps = 0.3;
    let mut alt = q.means().to_vec();
    for i in (2..n).step_by(4) {
        alt[i] = 0.45;
    }
    assert!(product_tv_exact(&alt, q.means(), 1 << 20).unwrap() >= eps);
    let alt = ProductModel::new(alt).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut false_far, mut hits) = (0, 0);
    for t in 0..60 {
        let cfg = GofConfig {
            seed: t,
            ..GofConfig::new(eps)
        };
        let rows = cfg.sample_cap(n);
        let v = gof_product(&q.sample(rows, &mut rng), &q, &cfg).unwrap();
        assert_eq!(v.flip_mask.iter().filter(|&&f| f).count(), 10);
        assert_eq!(v.noise_rates.iter().filter(|&&r| r > 0.0).count(), 10);
        if v.decision == Decision::Far {
            false_far += 1;
        }
        if gof_product(&alt.sample(rows, &mut rng), &q, &cfg).unwrap().decision == Decision::Far {
            hits += 1;
        }
    }
    assert!(false_far <= 25, "{false_far} of 60");
    assert!(hits >= 40, "{hits} of 60");
}

#[test]
fn short_streams_and_bad_inputs() {
    let q = ProductModel::uniform(4);
    let cfg = GofConfig::new(0.5);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let short = q.sample(10, &mut rng);
    assert!(gof_product(&short, &q, &cfg).is_err());
    let wide = SampleSet::new(vec![3; 4], vec![2; 4 * cfg.sample_cap(4)]).unwrap();
    assert!(gof_product(&wide, &q, &cfg).is_err());
    let mut bad = cfg.clone();
    bad.c = 1.5;
    assert!(gof_product(&q.sample(cfg.sample_cap(4), &mut rng), &q, &bad).is_err());
}
