//! Goodness-of-fit for product distributions on `{0,1}^n` against a fully
//! known reference.
//!
//! Pipeline:
//!
//! 1. complement every coordinate whose reference mean exceeds 1/2, so all
//!    means are at most 1/2 (total variation is unchanged);
//! 2. XOR coordinates whose mean is below `eps/(c n)` with independent
//!    Bernoulli(`eps/(c n)`) noise, in both the reference and the samples, so
//!    every mean is at least `eps/(c n)` (total variation moves by at most
//!    `2 eps / c`);
//! 3. Poissonize: for each coordinate draw `M_i ~ Poisson(m)` and count the
//!    ones `N_i` among its first `M_i` samples, making `N_i ~ Poisson(m p_i)`
//!    independent across coordinates;
//! 4. reject when `Z = sum_i [(N_i - m q_i)^2 - N_i] / (m q_i)` exceeds a
//!    threshold. `E[Z] = m sum_i (p_i - q_i)^2 / q_i`, zero under the null.

use rand::Rng;
use rand_distr::{Bernoulli, Distribution, Poisson};
use rayon::prelude::*;

use crate::bn::SampleSet;
use crate::error::{Error, Result};
use crate::rng;
use crate::subtest::Decision;

/// Independent Bernoulli means of a product distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductModel {
    q: Vec<f64>,
}

impl ProductModel {
    pub fn new(q: Vec<f64>) -> Result<Self> {
        if let Some(x) = q.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(Error::InvalidModel(format!("mean {x} outside [0, 1]")));
        }
        Ok(ProductModel { q })
    }

    /// Uniform distribution on `{0,1}^n`.
    pub fn uniform(n: usize) -> Self {
        ProductModel { q: vec![0.5; n] }
    }

    pub fn means(&self) -> &[f64] {
        &self.q
    }

    pub fn n(&self) -> usize {
        self.q.len()
    }

    /// Parse one mean per line; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let q = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .enumerate()
            .map(|(i, l)| {
                l.parse::<f64>()
                    .map_err(|_| Error::Parse(format!("line {}: bad mean {l:?}", i + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(q)
    }

    /// `n` rows drawn from the product distribution.
    pub fn sample<R: Rng + ?Sized>(&self, rows: usize, rng: &mut R) -> SampleSet {
        let mut data = Vec::with_capacity(rows * self.n());
        for _ in 0..rows {
            data.extend(self.q.iter().map(|&p| u32::from(rng.gen::<f64>() < p)));
        }
        SampleSet::new(vec![2; self.n()], data).expect("binary symbols")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThresholdMode {
    /// `tau = m eps'^2 / 4`, halfway between the null mean and the
    /// alternative's lower bound `m eps'^2 / 2`.
    Chebyshev,
    /// Simulate `Z` under the known reference and place `tau` halfway
    /// between its 2/3 quantile and `m eps'^2 / 2`.
    MonteCarloNull,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GofConfig {
    pub eps: f64,
    /// Noise-floor constant: means below `eps / (c n)` are lifted.
    pub c: f64,
    /// Budget constant: `m = ceil(c_prime sqrt(n) / eps^2)`.
    pub c_prime: f64,
    pub seed: u64,
    pub mode: ThresholdMode,
    pub null_replicas: usize,
}

impl GofConfig {
    pub fn new(eps: f64) -> Self {
        GofConfig {
            eps,
            c: 10.0,
            c_prime: 15.0,
            seed: 0,
            mode: ThresholdMode::MonteCarloNull,
            null_replicas: 500,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps <= 1.0) {
            return Err(Error::InvalidConfig(format!("eps must lie in (0, 1], got {}", self.eps)));
        }
        if self.c.is_nan() || self.c <= 2.0 {
            return Err(Error::InvalidConfig(format!("c must exceed 2, got {}", self.c)));
        }
        if self.c_prime.is_nan() || self.c_prime <= 0.0 {
            return Err(Error::InvalidConfig("c_prime must be positive".into()));
        }
        if self.null_replicas == 0 {
            return Err(Error::InvalidConfig("at least one null replica is needed".into()));
        }
        Ok(())
    }

    /// Per-coordinate Poisson rate for dimension `n`. The rate uses the
    /// original `eps`; the test is then run against `eps_prime`.
    pub fn rate(&self, n: usize) -> u64 {
        ((self.c_prime * (n as f64).sqrt() / (self.eps * self.eps)).ceil() as u64).max(1)
    }

    /// Separation left after the noise reduction: `(1 - 2/c) eps`.
    pub fn eps_prime(&self) -> f64 {
        (1.0 - 2.0 / self.c) * self.eps
    }

    /// Rows of samples the test may consume: `ceil(2 e m)`.
    pub fn sample_cap(&self, n: usize) -> usize {
        (2.0 * std::f64::consts::E * self.rate(n) as f64).ceil() as usize
    }
}

/// Complement every coordinate with `q_i > 1/2`. Returns the relabeled model
/// and the mask of complemented coordinates.
pub fn preprocess_flip(q: &ProductModel) -> (ProductModel, Vec<bool>) {
    let mask: Vec<bool> = q.q.iter().map(|&x| x > 0.5).collect();
    let flipped = q
        .q
        .iter()
        .zip(&mask)
        .map(|(&x, &f)| if f { 1.0 - x } else { x })
        .collect();
    (ProductModel { q: flipped }, mask)
}

/// Lift every mean below `eps / (c n)` by XOR with Bernoulli(`eps / (c n)`)
/// noise. Returns the new model and the per-coordinate noise rates.
pub fn preprocess_xor_noise(q: &ProductModel, eps: f64, c: f64) -> Result<(ProductModel, Vec<f64>)> {
    let n = q.n();
    if n == 0 {
        return Ok((q.clone(), Vec::new()));
    }
    let floor = eps / (c * n as f64);
    if floor.is_nan() || floor < 0.0 || 2.0 * floor > 1.0 {
        return Err(Error::InvalidConfig(format!(
            "noise floor {floor} needs 2 eps/(c n) <= 1"
        )));
    }
    if let Some(x) = q.q.iter().find(|&&x| x > 0.5) {
        return Err(Error::InvalidConfig(format!(
            "noise lifting expects means at most 1/2, found {x}"
        )));
    }
    let rates: Vec<f64> = q.q.iter().map(|&x| if x < floor { floor } else { 0.0 }).collect();
    let lifted = q
        .q
        .iter()
        .zip(&rates)
        .map(|(&x, &r)| x * (1.0 - r) + (1.0 - x) * r)
        .collect();
    Ok((ProductModel { q: lifted }, rates))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoissonCounts {
    /// `N_i`: ones among the first `M_i` samples of coordinate `i`.
    pub ones: Vec<u64>,
    /// `M_i ~ Poisson(m)`.
    pub draws: Vec<u64>,
    /// Some `M_i` exceeded `2 e m`; the caller should answer at random.
    pub truncated: bool,
}

/// Per-coordinate Poissonized counts from a binary sample stream.
pub fn poissonized_counts<R: Rng + ?Sized>(samples: &SampleSet, m: u64, rng: &mut R) -> Result<PoissonCounts> {
    if m == 0 {
        return Err(Error::InvalidConfig("Poisson rate must be at least 1".into()));
    }
    let cap_f = 2.0 * std::f64::consts::E * m as f64;
    let cap = cap_f.ceil() as usize;
    if samples.rows() < cap {
        return Err(Error::InsufficientSamples {
            needed: cap,
            got: samples.rows(),
        });
    }
    let poisson = Poisson::new(m as f64).expect("positive rate");
    let n = samples.cols();
    let mut ones = Vec::with_capacity(n);
    let mut draws = Vec::with_capacity(n);
    let mut truncated = false;
    for i in 0..n {
        let mi = poisson.sample(rng) as u64;
        if mi as f64 > cap_f {
            truncated = true;
        }
        let used = (mi as usize).min(samples.rows());
        ones.push((0..used).filter(|&r| samples.get(r, i) == 1).count() as u64);
        draws.push(mi);
    }
    Ok(PoissonCounts {
        ones,
        draws,
        truncated,
    })
}

/// `Z = sum_i [(N_i - m q_i)^2 - N_i] / (m q_i)`.
pub fn z_statistic(ones: &[u64], m: f64, q: &ProductModel) -> Result<f64> {
    if ones.len() != q.n() {
        return Err(Error::ShapeMismatch(format!(
            "{} counts for {} coordinates",
            ones.len(),
            q.n()
        )));
    }
    let mut z = 0.0;
    for (i, (&c, &qi)) in ones.iter().zip(&q.q).enumerate() {
        if qi == 0.0 {
            return Err(Error::ZeroQ(i));
        }
        let c = c as f64;
        let mean = m * qi;
        z += ((c - mean) * (c - mean) - c) / mean;
    }
    Ok(z)
}

/// Draw `Z` once with `N_i ~ Poisson(m p_i)` independent.
pub fn simulate_z<R: Rng + ?Sized>(p: &[f64], q: &ProductModel, m: f64, rng: &mut R) -> Result<f64> {
    let ones: Vec<u64> = p
        .iter()
        .map(|&pi| {
            if pi * m <= 0.0 {
                0
            } else {
                Poisson::new(m * pi).expect("positive rate").sample(rng) as u64
            }
        })
        .collect();
    z_statistic(&ones, m, q)
}

/// Decision threshold on `Z` for the (already preprocessed) reference `q`.
pub fn threshold(q: &ProductModel, m: u64, cfg: &GofConfig) -> Result<f64> {
    let ep = cfg.eps_prime();
    let alt_floor = m as f64 * ep * ep / 2.0;
    match cfg.mode {
        ThresholdMode::Chebyshev => Ok(alt_floor / 2.0),
        ThresholdMode::MonteCarloNull => {
            let mut zs = (0..cfg.null_replicas)
                .into_par_iter()
                .map(|r| {
                    let mut g = rng::stream(cfg.seed, "gof-null", r as u64);
                    simulate_z(&q.q, q, m as f64, &mut g)
                })
                .collect::<Result<Vec<_>>>()?;
            zs.sort_by(f64::total_cmp);
            let k = ((2.0 / 3.0 * zs.len() as f64).ceil() as usize).clamp(1, zs.len());
            let q23 = zs[k - 1];
            Ok(q23.max(0.5 * (q23 + alt_floor)))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GofVerdict {
    pub decision: Decision,
    pub z: f64,
    pub threshold: f64,
    pub m: u64,
    /// Poissonization exceeded its sample cap and the decision is a coin flip.
    pub truncated: bool,
    pub flip_mask: Vec<bool>,
    pub noise_rates: Vec<f64>,
    pub samples_used: usize,
}

/// Test `P = Q` against `TV(P, Q) >= eps` for a product `P` given by samples
/// and a known product `Q`.
pub fn gof_product(samples: &SampleSet, q: &ProductModel, cfg: &GofConfig) -> Result<GofVerdict> {
    cfg.validate()?;
    let n = q.n();
    if samples.cols() != n {
        return Err(Error::ShapeMismatch(format!(
            "samples have {} columns, reference has {n}",
            samples.cols()
        )));
    }
    if let Some(&k) = samples.arities().iter().find(|&&k| k > 2) {
        return Err(Error::ShapeMismatch(format!(
            "binary samples required, found alphabet of size {k}"
        )));
    }
    let m = cfg.rate(n);
    let needed = cfg.sample_cap(n);
    if samples.rows() < needed {
        return Err(Error::InsufficientSamples {
            needed,
            got: samples.rows(),
        });
    }

    let (flipped, mask) = preprocess_flip(q);
    let (lifted, rates) = preprocess_xor_noise(&flipped, cfg.eps, cfg.c)?;

    let mut noise = rng::stream(cfg.seed, "xor-noise", 0);
    let coins: Vec<Option<Bernoulli>> = rates
        .iter()
        .map(|&r| (r > 0.0).then(|| Bernoulli::new(r).expect("rate in [0, 1]")))
        .collect();
    let stream = samples.head(needed).map_entries(|col, x| {
        let x = if mask[col] { 1 - x } else { x };
        match &coins[col] {
            Some(b) => x ^ u32::from(b.sample(&mut noise)),
            None => x,
        }
    });
    let stream = SampleSet::new(vec![2; n], stream.data().to_vec())?;

    let mut pois = rng::stream(cfg.seed, "poisson", 0);
    let counts = poissonized_counts(&stream, m, &mut pois)?;
    let z = z_statistic(&counts.ones, m as f64, &lifted)?;
    let tau = threshold(&lifted, m, cfg)?;
    let decision = if counts.truncated {
        let mut coin = rng::stream(cfg.seed, "guess", 0);
        if coin.gen::<bool>() {
            Decision::Far
        } else {
            Decision::Equal
        }
    } else if z > tau {
        Decision::Far
    } else {
        Decision::Equal
    };
    Ok(GofVerdict {
        decision,
        z,
        threshold: tau,
        m,
        truncated: counts.truncated,
        flip_mask: mask,
        noise_rates: rates,
        samples_used: needed,
    })
}

/// Exact total variation between two product distributions on `{0,1}^n`.
///
/// Coordinates with `p_i = q_i` cancel; the rest are grouped by their
/// `(p_i, q_i)` pair and summed over per-group counts of ones, which is exact
/// because the densities depend only on those counts. Returns `None` when the
/// number of count vectors exceeds `cap`.
pub fn product_tv_exact(p: &[f64], q: &[f64], cap: usize) -> Option<f64> {
    assert_eq!(p.len(), q.len(), "dimension mismatch");
    let mut groups: Vec<((f64, f64), usize)> = Vec::new();
    for (&a, &b) in p.iter().zip(q) {
        if a == b {
            continue;
        }
        match groups.iter_mut().find(|((x, y), _)| *x == a && *y == b) {
            Some((_, n)) => *n += 1,
            None => groups.push(((a, b), 1)),
        }
    }
    let mut cells: usize = 1;
    for (_, n) in &groups {
        cells = cells.checked_mul(n + 1)?;
        if cells > cap {
            return None;
        }
    }
    // Per-group binomial weights for P and Q.
    let weights: Vec<(Vec<f64>, Vec<f64>)> = groups
        .iter()
        .map(|&((a, b), n)| (binomial_pmf(n, a), binomial_pmf(n, b)))
        .collect();
    let mut ks = vec![0usize; groups.len()];
    let mut total = 0.0;
    loop {
        let (mut wp, mut wq) = (1.0, 1.0);
        for (g, &k) in ks.iter().enumerate() {
            wp *= weights[g].0[k];
            wq *= weights[g].1[k];
        }
        total += (wp - wq).abs();
        let mut g = 0;
        loop {
            if g == ks.len() {
                return Some((0.5 * total).clamp(0.0, 1.0));
            }
            ks[g] += 1;
            if ks[g] <= groups[g].1 {
                break;
            }
            ks[g] = 0;
            g += 1;
        }
    }
}

fn binomial_pmf(n: usize, p: f64) -> Vec<f64> {
    // Recurrence over k in log space for stability at large n.
    let ln_choose: Vec<f64> = {
        let mut v = vec![0.0; n + 1];
        for k in 1..=n {
            v[k] = v[k - 1] + ((n - k + 1) as f64).ln() - (k as f64).ln();
        }
        v
    };
    (0..=n)
        .map(|k| {
            let (k_f, r_f) = (k as f64, (n - k) as f64);
            let term = |x: f64, e: f64| if e == 0.0 { 0.0 } else { e * x.ln() };
            let l = ln_choose[k] + term(p, k_f) + term(1.0 - p, r_f);
            if l.is_finite() {
                l.exp()
            } else {
                0.0
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn flip_examples() {
        let q = ProductModel::new(vec![0.2, 0.5, 0.3]).unwrap();
        let (f, mask) = preprocess_flip(&q);
        assert_eq!(f, q);
        assert!(mask.iter().all(|&m| !m));

        let q = ProductModel::new(vec![0.9, 0.3]).unwrap();
        let (f, mask) = preprocess_flip(&q);
        assert!((f.means()[0] - 0.1).abs() < 1e-15);
        assert_eq!(f.means()[1], 0.3);
        assert_eq!(mask, vec![true, false]);
        let (again, mask2) = preprocess_flip(&f);
        assert_eq!(again, f);
        assert!(mask2.iter().all(|&m| !m));
    }

    #[test]
    fn xor_noise_examples() {
        let q = ProductModel::new(vec![0.2, 0.4]).unwrap();
        let (l, r) = preprocess_xor_noise(&q, 0.5, 10.0).unwrap();
        assert_eq!(l, q);
        assert_eq!(r, vec![0.0, 0.0]);

        let q = ProductModel::new(vec![0.0; 10]).unwrap();
        let (l, r) = preprocess_xor_noise(&q, 0.5, 10.0).unwrap();
        assert!(l.means().iter().all(|&x| (x - 0.005).abs() < 1e-15));
        assert!(r.iter().all(|&x| (x - 0.005).abs() < 1e-15));

        let mut means = vec![0.3; 10];
        means[0] = 0.001;
        let (l, _) = preprocess_xor_noise(&ProductModel::new(means).unwrap(), 0.5, 10.0).unwrap();
        assert!((l.means()[0] - 0.005990).abs() < 1e-12);

        assert!(preprocess_xor_noise(&ProductModel::new(vec![0.0]).unwrap(), 1.0, 1.5).is_err());
        assert!(preprocess_xor_noise(&ProductModel::new(vec![0.7]).unwrap(), 0.5, 10.0).is_err());
    }

    #[test]
    fn z_examples() {
        let q = ProductModel::new(vec![0.5, 0.25]).unwrap();
        assert_eq!(z_statistic(&[50, 25], 100.0, &q).unwrap(), -2.0);
        let q1 = ProductModel::new(vec![0.5]).unwrap();
        assert!((z_statistic(&[60], 100.0, &q1).unwrap() - 0.8).abs() < 1e-15);
        let zero = ProductModel::new(vec![0.0]).unwrap();
        assert!(matches!(z_statistic(&[1], 10.0, &zero), Err(Error::ZeroQ(0))));
    }

    #[test]
    fn poissonized_counts_contracts() {
        let ones = SampleSet::new(vec![2, 2], [1u32, 0].repeat(100)).unwrap();
        let mut g = ChaCha8Rng::seed_from_u64(3);
        let c = poissonized_counts(&ones, 10, &mut g).unwrap();
        assert_eq!(c.ones[0], c.draws[0]);
        assert_eq!(c.ones[1], 0);
        assert!(matches!(
            poissonized_counts(&ones.head(20), 10, &mut g),
            Err(Error::InsufficientSamples { needed: 55, got: 20 })
        ));
        assert!(poissonized_counts(&ones, 0, &mut g).is_err());
    }

    #[test]
    fn config_derivations() {
        let cfg = GofConfig::new(0.25);
        assert_eq!(cfg.rate(50), (15.0 * 50f64.sqrt() / 0.0625f64).ceil() as u64);
        assert_eq!(cfg.rate(50), 1698);
        assert!((cfg.eps_prime() - 0.2).abs() < 1e-15);
        let mut bad = cfg.clone();
        bad.c = 2.0;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn product_tv_matches_dense_enumeration() {
        let mut g = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..50 {
            let n = g.gen_range(1..8);
            let p: Vec<f64> = (0..n).map(|_| g.gen()).collect();
            let q: Vec<f64> = (0..n).map(|_| g.gen()).collect();
            let mut dense = 0.0;
            for x in 0..(1usize << n) {
                let mut a = 1.0;
                let mut b = 1.0;
                for i in 0..n {
                    let bit = (x >> i) & 1 == 1;
                    a *= if bit { p[i] } else { 1.0 - p[i] };
                    b *= if bit { q[i] } else { 1.0 - q[i] };
                }
                dense += (a - b).abs();
            }
            let exact = product_tv_exact(&p, &q, 1 << 20).unwrap();
            assert!((exact - 0.5 * dense).abs() < 1e-12);
        }
    }

    #[test]
    fn product_tv_grouped_coordinates() {
        // 25 coordinates at 0.6 versus 0.5 reduce to Binomial(25, .6) vs Binomial(25, .5).
        let mut p = vec![0.5; 50];
        p[..25].iter_mut().for_each(|x| *x = 0.6);
        let tv = product_tv_exact(&p, &[0.5; 50], 1 << 20).unwrap();
        let a = binomial_pmf(25, 0.6);
        let b = binomial_pmf(25, 0.5);
        let direct: f64 = 0.5 * a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum::<f64>();
        assert!((tv - direct).abs() < 1e-14);
        assert!(tv > 0.25);
        assert_eq!(product_tv_exact(&[0.3; 4], &[0.3; 4], 1), Some(0.0));
        assert!(product_tv_exact(&[0.1, 0.2, 0.3], &[0.4, 0.5, 0.6], 7).is_none());
    }

    #[test]
    fn binomial_pmf_sums_to_one() {
        for &(n, p) in &[(0, 0.3), (1, 0.0), (10, 1.0), (60, 0.37)] {
            let s: f64 = binomial_pmf(n, p).iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn parse_model() {
        let q = ProductModel::parse("# means\n0.5\n\n0.25\n").unwrap();
        assert_eq!(q.means(), &[0.5, 0.25]);
        assert!(ProductModel::parse("1.5\n").is_err());
        assert!(ProductModel::parse("abc\n").is_err());
    }
}
