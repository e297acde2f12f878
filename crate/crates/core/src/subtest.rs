//! Two-sample squared-Hellinger test on a small domain.
//!
//! Distinguishes `P = Q` from `H^2(P, Q) >= eps_sq` using a collision-style
//! closeness statistic calibrated by permutation: the pooled samples are
//! re-split at random `R` times and the test rejects when the observed
//! statistic exceeds the `(1 - eta)` quantile of the re-split statistics.
//! Under `P = Q` the two samples are exchangeable, so the false-rejection
//! rate is at most `eta` up to resampling noise.

use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, Hypergeometric};
use rayon::prelude::*;

use crate::bn::CountTable;
use crate::error::{Error, Result};
use crate::rng;

/// Binary test outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Decision {
    Equal,
    Far,
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Decision::Equal => "Equal",
            Decision::Far => "Far",
        })
    }
}

pub const DEFAULT_PERMUTATIONS: usize = 200;
pub const DEFAULT_SAMPLE_CONSTANT: f64 = 20.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SubtestConfig {
    /// Squared-Hellinger separation to detect.
    pub eps_sq: f64,
    /// Error budget of this invocation.
    pub eta: f64,
    /// Number of permutation replicas.
    pub permutations: usize,
    /// Overrides [`required_samples`] as the per-distribution budget.
    pub sample_budget: Option<usize>,
    pub calibration_seed: u64,
    /// Constant in front of [`required_samples`].
    pub constant: f64,
}

impl SubtestConfig {
    pub fn new(eps_sq: f64, eta: f64) -> Self {
        SubtestConfig {
            eps_sq,
            eta,
            permutations: DEFAULT_PERMUTATIONS,
            sample_budget: None,
            calibration_seed: 0,
            constant: DEFAULT_SAMPLE_CONSTANT,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps_sq > 0.0 && self.eps_sq <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "eps_sq must lie in (0, 1], got {}",
                self.eps_sq
            )));
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "eta must lie in (0, 1), got {}",
                self.eta
            )));
        }
        if self.permutations == 0 {
            return Err(Error::InvalidConfig("at least one permutation is needed".into()));
        }
        if self.constant.is_nan() || self.constant <= 0.0 {
            return Err(Error::InvalidConfig("sample constant must be positive".into()));
        }
        Ok(())
    }

    /// Per-distribution sample budget this configuration asks for on a
    /// domain of size `domain`.
    pub fn budget(&self, domain: usize) -> Result<usize> {
        match self.sample_budget {
            Some(b) => Ok(b),
            None => required_samples(domain, self.eps_sq, self.eta, self.constant),
        }
    }
}

/// `ceil(C * min(D^{2/3}/eps^{8/3}, D^{3/4}/eps^2) * ln(1/eta) * (1 + ln D))`
/// with `eps = sqrt(eps_sq)`. The `(1 + ln D)` factor stands in for the
/// unspecified polylogarithmic overhead.
pub fn required_samples(domain: usize, eps_sq: f64, eta: f64, constant: f64) -> Result<usize> {
    let cfg = SubtestConfig {
        constant,
        ..SubtestConfig::new(eps_sq, eta)
    };
    cfg.validate()?;
    if domain == 0 {
        return Err(Error::InvalidConfig("domain must be non-empty".into()));
    }
    let d = domain as f64;
    let eps = eps_sq.sqrt();
    let low_d = d.powf(2.0 / 3.0) / eps.powf(8.0 / 3.0);
    let high_d = d.powf(0.75) / eps_sq;
    let n = constant * low_d.min(high_d) * (1.0 / eta).ln() * (1.0 + d.ln());
    Ok((n.ceil() as usize).max(1))
}

fn closeness_from_slices(a: &[u64], b: &[u64]) -> f64 {
    a.iter()
        .zip(b)
        .filter(|(&x, &y)| x + y > 0)
        .map(|(&x, &y)| {
            let (x, y) = (x as f64, y as f64);
            ((x - y) * (x - y) - x - y) / (x + y)
        })
        .sum()
}

/// `sum_x [(A_x - B_x)^2 - A_x - B_x] / (A_x + B_x)`, skipping empty cells.
pub fn closeness_statistic(a: &CountTable, b: &CountTable) -> Result<f64> {
    if a.sizes() != b.sizes() || a.scope() != b.scope() {
        return Err(Error::DomainMismatch(format!(
            "tables over {:?}/{:?} and {:?}/{:?}",
            a.scope(),
            a.sizes(),
            b.scope(),
            b.sizes()
        )));
    }
    Ok(closeness_from_slices(a.counts(), b.counts()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubtestVerdict {
    pub decision: Decision,
    pub statistic: f64,
    pub threshold: f64,
    /// `(1 + #{replicas >= statistic}) / (R + 1)`.
    pub pvalue: f64,
    /// Samples fell short of the configured budget; the test still ran.
    pub insufficient_samples: bool,
    pub required: usize,
    pub samples_a: u64,
    pub samples_b: u64,
}

/// One random re-split of the pooled counts: sizes are preserved, cells are
/// drawn by sequential hypergeometric sampling.
fn resplit<R: Rng + ?Sized>(pooled: &[u64], size_a: u64, rng: &mut R, a: &mut [u64], b: &mut [u64]) {
    let mut remaining = pooled.iter().sum::<u64>();
    let mut quota = size_a;
    for (x, &c) in pooled.iter().enumerate() {
        let take = if c == 0 || quota == 0 {
            0
        } else if quota == remaining {
            c
        } else {
            Hypergeometric::new(remaining, c, quota)
                .expect("valid hypergeometric parameters")
                .sample(rng)
        };
        a[x] = take;
        b[x] = c - take;
        remaining -= c;
        quota -= take;
    }
}

/// Empirical `level`-quantile: order statistic `ceil(level * R)` (1-based).
fn upper_quantile(sorted: &[f64], level: f64) -> f64 {
    let r = sorted.len();
    let k = ((level * r as f64).ceil() as usize).clamp(1, r);
    sorted[k - 1]
}

/// Permutation-calibrated closeness test on two count tables.
pub fn hellinger_subtest(a: &CountTable, b: &CountTable, cfg: &SubtestConfig) -> Result<SubtestVerdict> {
    cfg.validate()?;
    let statistic = closeness_statistic(a, b)?;
    let pooled: Vec<u64> = a.counts().iter().zip(b.counts()).map(|(x, y)| x + y).collect();
    let (na, nb) = (a.total(), b.total());

    let mut replicas: Vec<f64> = (0..cfg.permutations)
        .into_par_iter()
        .map_init(
            || (vec![0u64; pooled.len()], vec![0u64; pooled.len()]),
            |(ra, rb), r| {
                let mut g = rng::stream(cfg.calibration_seed, "permutation", r as u64);
                resplit(&pooled, na, &mut g, ra, rb);
                closeness_from_slices(ra, rb)
            },
        )
        .collect();
    replicas.sort_by(f64::total_cmp);
    let threshold = upper_quantile(&replicas, 1.0 - cfg.eta);
    let exceed = replicas.iter().filter(|&&t| t >= statistic).count();
    let required = cfg.budget(a.domain())?;
    Ok(SubtestVerdict {
        decision: if statistic > threshold {
            Decision::Far
        } else {
            Decision::Equal
        },
        statistic,
        threshold,
        pvalue: (1 + exceed) as f64 / (cfg.permutations + 1) as f64,
        insufficient_samples: (na.min(nb) as usize) < required,
        required,
        samples_a: na,
        samples_b: nb,
    })
}

/// [`hellinger_subtest`] on raw symbol lists over `0..domain`.
pub fn hellinger_subtest_symbols(
    a: &[usize],
    b: &[usize],
    domain: usize,
    cfg: &SubtestConfig,
) -> Result<SubtestVerdict> {
    let tally = |xs: &[usize]| -> Result<CountTable> {
        let mut c = vec![0u64; domain];
        for &x in xs {
            if x >= domain {
                return Err(Error::DomainMismatch(format!(
                    "symbol {x} outside a domain of size {domain}"
                )));
            }
            c[x] += 1;
        }
        Ok(CountTable::flat(c))
    };
    hellinger_subtest(&tally(a)?, &tally(b)?, cfg)
}
