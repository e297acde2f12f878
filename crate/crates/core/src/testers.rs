//! Composite identity testers for Bayesian networks.
//!
//! Each tester reduces "`P = Q` versus `TV(P, Q) >= eps`" to a family of
//! subtests on small marginals, each asking "`P_S = Q_S` versus
//! `H^2(P_S, Q_S) >= eps^2 / (2n)`", and answers `Far` as soon as any subtest
//! does. The families are:
//!
//! - known DAG: one subtest per node on `{v} ∪ parents(v)`;
//! - unknown DAG with in-degree at most `d`: every `(d + 1)`-subset;
//! - two unknown trees: every subset of at most six variables.
//!
//! All subtests project the same two sample sets; no fresh samples are drawn
//! per subtest.

use rayon::prelude::*;

use crate::bn::{empirical_counts, marginal, Dag, DenseDistribution, SampleSet};
use crate::divergences::hellinger_sq;
use crate::error::{Error, Result};
use crate::rng;
use crate::subtest::{hellinger_subtest, required_samples, Decision, SubtestConfig, DEFAULT_PERMUTATIONS, DEFAULT_SAMPLE_CONSTANT};

/// Largest subset size the two-tree tester enumerates.
pub const TWO_TREE_SUBSET_SIZE: usize = 6;
/// Default cap on the number of subtests a composite run may schedule.
pub const DEFAULT_MAX_SUBTESTS: usize = 2_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct TesterConfig {
    /// Total-variation separation.
    pub eps: f64,
    /// Minimum permutation replicas per subtest; raised to `ceil(10 / eta)`
    /// when the per-subtest error budget is small.
    pub permutations: usize,
    pub sample_constant: f64,
    /// Per-distribution budget override passed to every subtest.
    pub sample_budget: Option<usize>,
    pub seed: u64,
    pub max_subtests: usize,
    /// Run the first `max_subtests` subsets and flag the verdict incomplete
    /// instead of failing with `BudgetExceeded`.
    pub allow_truncation: bool,
}

impl TesterConfig {
    pub fn new(eps: f64) -> Self {
        TesterConfig {
            eps,
            permutations: DEFAULT_PERMUTATIONS,
            sample_constant: DEFAULT_SAMPLE_CONSTANT,
            sample_budget: None,
            seed: 0,
            max_subtests: DEFAULT_MAX_SUBTESTS,
            allow_truncation: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "eps must lie in (0, 1], got {}",
                self.eps
            )));
        }
        Ok(())
    }
}

/// Permutation replicas used for a subtest with error budget `eta`.
pub fn permutations_for(base: usize, eta: f64) -> usize {
    base.max((10.0 / eta).ceil() as usize)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubtestRecord {
    pub set: Vec<usize>,
    pub statistic: f64,
    pub threshold: f64,
    pub pvalue: f64,
    pub decision: Decision,
    pub insufficient_samples: bool,
    /// Exact oracle only: `0 < H^2 < eps_sq`, where either answer is acceptable.
    pub indeterminate: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub decision: Decision,
    /// Set of the most significant `Far` subtest.
    pub witness: Option<Vec<usize>>,
    pub subtests: Vec<SubtestRecord>,
    pub eps_sq: f64,
    pub eta: f64,
    pub samples_p: usize,
    pub samples_q: usize,
    /// Number of subsets the full family contains.
    pub planned_subtests: u128,
    /// Fewer than `planned_subtests` were run.
    pub incomplete: bool,
}

/// A decision procedure for one variable subset.
pub trait SetSubtest: Sync {
    fn run(&self, set: &[usize], eps_sq: f64, eta: f64, index: u64) -> Result<SubtestRecord>;
    /// Number of variables.
    fn n(&self) -> usize;
    fn samples(&self) -> (usize, usize) {
        (0, 0)
    }
}

/// Subtest on empirical marginals of two sample sets.
pub struct SampleSubtest<'a> {
    p: &'a SampleSet,
    q: &'a SampleSet,
    cfg: &'a TesterConfig,
}

impl<'a> SampleSubtest<'a> {
    pub fn new(p: &'a SampleSet, q: &'a SampleSet, cfg: &'a TesterConfig) -> Result<Self> {
        if p.cols() != q.cols() {
            return Err(Error::ShapeMismatch(format!(
                "{} versus {} columns",
                p.cols(),
                q.cols()
            )));
        }
        if p.arities() != q.arities() {
            return Err(Error::ShapeMismatch(format!(
                "alphabet sizes {:?} versus {:?}",
                p.arities(),
                q.arities()
            )));
        }
        Ok(SampleSubtest { p, q, cfg })
    }
}

impl SetSubtest for SampleSubtest<'_> {
    fn run(&self, set: &[usize], eps_sq: f64, eta: f64, index: u64) -> Result<SubtestRecord> {
        let a = empirical_counts(self.p, set)?;
        let b = empirical_counts(self.q, set)?;
        let sub = SubtestConfig {
            eps_sq,
            eta,
            permutations: permutations_for(self.cfg.permutations, eta),
            sample_budget: self.cfg.sample_budget,
            calibration_seed: rng::derive_seed(self.cfg.seed, "subtest", index),
            constant: self.cfg.sample_constant,
        };
        let v = hellinger_subtest(&a, &b, &sub)?;
        Ok(SubtestRecord {
            set: a.scope().to_vec(),
            statistic: v.statistic,
            threshold: v.threshold,
            pvalue: v.pvalue,
            decision: v.decision,
            insufficient_samples: v.insufficient_samples,
            indeterminate: false,
        })
    }

    fn n(&self) -> usize {
        self.p.cols()
    }

    fn samples(&self) -> (usize, usize) {
        (self.p.rows(), self.q.rows())
    }
}

/// Subtest that reads the true marginals: `Far` iff `H^2(P_S, Q_S) >= eps_sq`.
/// Correct on every instance of the subtest promise, so composite testers
/// built on it are deterministic.
pub struct ExactSubtest<'a> {
    p: &'a DenseDistribution,
    q: &'a DenseDistribution,
}

impl<'a> ExactSubtest<'a> {
    pub fn new(p: &'a DenseDistribution, q: &'a DenseDistribution) -> Result<Self> {
        if !p.same_domain(q) {
            return Err(Error::ScopeMismatch("P and Q have different domains".into()));
        }
        Ok(ExactSubtest { p, q })
    }
}

const ZERO_TOLERANCE: f64 = 1e-12;

impl SetSubtest for ExactSubtest<'_> {
    fn run(&self, set: &[usize], eps_sq: f64, _eta: f64, _index: u64) -> Result<SubtestRecord> {
        let (mp, mq) = (marginal(self.p, set)?, marginal(self.q, set)?);
        let h = hellinger_sq(&mp, &mq)?;
        let far = h >= eps_sq;
        Ok(SubtestRecord {
            set: mp.scope().to_vec(),
            statistic: h,
            threshold: eps_sq,
            pvalue: if far { 0.0 } else { 1.0 },
            decision: if far { Decision::Far } else { Decision::Equal },
            insufficient_samples: false,
            indeterminate: h > ZERO_TOLERANCE && !far,
        })
    }

    fn n(&self) -> usize {
        self.p.scope().len()
    }
}

/// Binomial coefficient, saturating.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u128) / (i as u128 + 1);
    }
    acc
}

/// Lexicographic `k`-subsets of `0..n`.
pub fn combinations(n: usize, k: usize) -> impl Iterator<Item = Vec<usize>> {
    let mut current: Option<Vec<usize>> = if k <= n { Some((0..k).collect()) } else { None };
    std::iter::from_fn(move || {
        let out = current.clone()?;
        let cur = current.as_mut().unwrap();
        let mut i = k;
        loop {
            if i == 0 {
                current = None;
                break;
            }
            i -= 1;
            if cur[i] < n - k + i {
                cur[i] += 1;
                for j in i + 1..k {
                    cur[j] = cur[j - 1] + 1;
                }
                break;
            }
        }
        Some(out)
    })
}

/// Run `sets` through `subtest` and aggregate: `Far` iff any subtest is `Far`.
pub fn run_family<I>(
    subtest: &dyn SetSubtest,
    sets: I,
    planned: u128,
    eps_sq: f64,
    eta: f64,
    cfg: &TesterConfig,
) -> Result<Verdict>
where
    I: Iterator<Item = Vec<usize>>,
{
    if planned > cfg.max_subtests as u128 && !cfg.allow_truncation {
        return Err(Error::BudgetExceeded {
            needed: planned,
            budget: cfg.max_subtests,
        });
    }
    let sets: Vec<Vec<usize>> = sets.take(cfg.max_subtests).collect();
    let subtests = sets
        .par_iter()
        .enumerate()
        .map(|(i, s)| subtest.run(s, eps_sq, eta, i as u64))
        .collect::<Result<Vec<_>>>()?;
    let witness = subtests
        .iter()
        .filter(|r| r.decision == Decision::Far)
        .min_by(|a, b| {
            a.pvalue
                .total_cmp(&b.pvalue)
                .then((b.statistic - b.threshold).total_cmp(&(a.statistic - a.threshold)))
        })
        .map(|r| r.set.clone());
    let (samples_p, samples_q) = subtest.samples();
    Ok(Verdict {
        decision: if witness.is_some() {
            Decision::Far
        } else {
            Decision::Equal
        },
        witness,
        incomplete: (subtests.len() as u128) < planned,
        subtests,
        eps_sq,
        eta,
        samples_p,
        samples_q,
        planned_subtests: planned,
    })
}

fn neighborhood_sets(dag: &Dag) -> Vec<Vec<usize>> {
    (0..dag.n())
        .map(|v| {
            let mut s = dag.parents(v).to_vec();
            s.push(v);
            s.sort_unstable();
            s
        })
        .collect()
}

/// Known common DAG: one subtest per node neighborhood.
pub fn known_structure_with(subtest: &dyn SetSubtest, dag: &Dag, cfg: &TesterConfig) -> Result<Verdict> {
    cfg.validate()?;
    let n = dag.n();
    if subtest.n() != n {
        return Err(Error::ShapeMismatch(format!(
            "{} variables but the DAG has {n} nodes",
            subtest.n()
        )));
    }
    let sets = neighborhood_sets(dag);
    let eps_sq = cfg.eps * cfg.eps / (2.0 * n as f64);
    let eta = 1.0 / (3.0 * n as f64);
    run_family(subtest, sets.into_iter(), n as u128, eps_sq, eta, cfg)
}

/// Unknown common DAG of in-degree at most `d`: every `(d + 1)`-subset.
pub fn unknown_structure_with(subtest: &dyn SetSubtest, d: usize, cfg: &TesterConfig) -> Result<Verdict> {
    cfg.validate()?;
    let n = subtest.n();
    if d + 1 > n {
        return Err(Error::InvalidConfig(format!(
            "in-degree bound {d} needs at least {} variables, have {n}",
            d + 1
        )));
    }
    let planned = binomial(n, d + 1);
    let eps_sq = cfg.eps * cfg.eps / (2.0 * n as f64);
    let eta = 1.0 / (3.0 * planned as f64);
    run_family(subtest, combinations(n, d + 1), planned, eps_sq, eta, cfg)
}

/// Two unknown trees: every subset of at most six variables.
pub fn two_trees_with(subtest: &dyn SetSubtest, cfg: &TesterConfig) -> Result<Verdict> {
    cfg.validate()?;
    let n = subtest.n();
    let top = TWO_TREE_SUBSET_SIZE.min(n);
    let planned: u128 = (1..=top).map(|k| binomial(n, k)).sum();
    let eps_sq = cfg.eps * cfg.eps / (2.0 * n as f64);
    let eta = 1.0 / (3.0 * planned as f64);
    let sets = (1..=top).flat_map(move |k| combinations(n, k));
    run_family(subtest, sets, planned, eps_sq, eta, cfg)
}

/// Samples per distribution that satisfy the largest subtest budget in a
/// family over `arities`. `sets` yields the subsets the tester would run.
fn plan<I: Iterator<Item = Vec<usize>>>(arities: &[usize], sets: I, eps_sq: f64, eta: f64, cfg: &TesterConfig) -> Result<usize> {
    let mut need = 0;
    for s in sets {
        let domain = s.iter().try_fold(1usize, |acc, &v| {
            let k = *arities.get(v).ok_or(Error::UnknownVariable(v))?;
            acc.checked_mul(k).ok_or(Error::DomainTooLarge {
                size: u128::MAX,
                cap: usize::MAX,
            })
        })?;
        need = need.max(match cfg.sample_budget {
            Some(b) => b,
            None => required_samples(domain, eps_sq, eta, cfg.sample_constant)?,
        });
    }
    Ok(need)
}

/// Per-distribution sample count the known-structure tester asks for.
pub fn known_structure_samples(dag: &Dag, arities: &[usize], cfg: &TesterConfig) -> Result<usize> {
    cfg.validate()?;
    let n = dag.n() as f64;
    let sets = neighborhood_sets(dag);
    plan(arities, sets.into_iter(), cfg.eps * cfg.eps / (2.0 * n), 1.0 / (3.0 * n), cfg)
}

/// Per-distribution sample count the unknown-structure tester asks for.
/// Only the `d + 1` largest alphabets matter.
pub fn unknown_structure_samples(arities: &[usize], d: usize, cfg: &TesterConfig) -> Result<usize> {
    cfg.validate()?;
    let n = arities.len();
    if d + 1 > n {
        return Err(Error::InvalidConfig(format!("in-degree bound {d} exceeds {n} variables")));
    }
    let eta = 1.0 / (3.0 * binomial(n, d + 1) as f64);
    plan(arities, std::iter::once(largest(arities, d + 1)), cfg.eps * cfg.eps / (2.0 * n as f64), eta, cfg)
}

/// Per-distribution sample count the two-tree tester asks for.
pub fn two_trees_samples(arities: &[usize], cfg: &TesterConfig) -> Result<usize> {
    cfg.validate()?;
    let n = arities.len();
    let top = TWO_TREE_SUBSET_SIZE.min(n);
    let planned: u128 = (1..=top).map(|k| binomial(n, k)).sum();
    let eta = 1.0 / (3.0 * planned as f64);
    plan(arities, std::iter::once(largest(arities, top)), cfg.eps * cfg.eps / (2.0 * n as f64), eta, cfg)
}

fn largest(arities: &[usize], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..arities.len()).collect();
    idx.sort_by_key(|&v| std::cmp::Reverse(arities[v]));
    idx.truncate(k);
    idx
}

fn check_columns(samples_p: &SampleSet, dag: &Dag) -> Result<()> {
    if samples_p.cols() != dag.n() {
        return Err(Error::ShapeMismatch(format!(
            "samples have {} columns, DAG has {} nodes",
            samples_p.cols(),
            dag.n()
        )));
    }
    Ok(())
}

/// Identity test for two networks on a known common DAG.
pub fn test_known_structure(
    samples_p: &SampleSet,
    samples_q: &SampleSet,
    dag: &Dag,
    cfg: &TesterConfig,
) -> Result<Verdict> {
    check_columns(samples_p, dag)?;
    let sub = SampleSubtest::new(samples_p, samples_q, cfg)?;
    known_structure_with(&sub, dag, cfg)
}

/// Identity test for two networks on an unknown common DAG of in-degree at most `d`.
pub fn test_unknown_structure(
    samples_p: &SampleSet,
    samples_q: &SampleSet,
    d: usize,
    cfg: &TesterConfig,
) -> Result<Verdict> {
    let sub = SampleSubtest::new(samples_p, samples_q, cfg)?;
    unknown_structure_with(&sub, d, cfg)
}

/// Identity test for two tree-structured networks on unknown, possibly
/// different, trees.
pub fn test_two_trees(samples_p: &SampleSet, samples_q: &SampleSet, cfg: &TesterConfig) -> Result<Verdict> {
    let sub = SampleSubtest::new(samples_p, samples_q, cfg)?;
    two_trees_with(&sub, cfg)
}
