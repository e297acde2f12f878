//! Common factorizations, per-block squared Hellinger terms, and
//! localization of a joint discrepancy onto one block.
//!
//! A [`Factorization`] is an ordered list of blocks `(S_l, C_l)`: disjoint
//! variable sets `S_l` covering the scope, each with a conditioning set `C_l`
//! drawn from earlier blocks. A distribution respects it when
//! `P(x) = prod_l P(x_{S_l} | x_{C_l})`. For two distributions that both
//! respect the same factorization, the squared Hellinger distance of the
//! joints is at most the sum over blocks of the squared Hellinger distance
//! between the marginals on `S_l ∪ C_l`. [`decompose`] reports both sides.

use std::collections::BTreeSet;

use crate::bn::{encode, marginal, Dag, DenseDistribution};
use crate::divergences::{hellinger_sq, total_variation};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    /// Variables introduced by this block, ascending.
    pub set: Vec<usize>,
    /// Conditioning variables from earlier blocks, ascending.
    pub cond: Vec<usize>,
}

impl Block {
    pub fn new(mut set: Vec<usize>, mut cond: Vec<usize>) -> Self {
        set.sort_unstable();
        cond.sort_unstable();
        Block { set, cond }
    }

    /// `set ∪ cond`, ascending.
    pub fn neighborhood(&self) -> Vec<usize> {
        let mut all: Vec<usize> = self.set.iter().chain(&self.cond).copied().collect();
        all.sort_unstable();
        all.dedup();
        all
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Factorization {
    blocks: Vec<Block>,
}

impl Factorization {
    /// Build and check the structural invariants against `scope`.
    pub fn new(blocks: Vec<Block>, scope: &[usize]) -> Result<Self> {
        let f = Factorization { blocks };
        f.validate(scope)?;
        Ok(f)
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Blocks are disjoint, cover `scope` exactly, and condition only on
    /// variables introduced by earlier blocks.
    pub fn validate(&self, scope: &[usize]) -> Result<()> {
        let universe: BTreeSet<usize> = scope.iter().copied().collect();
        let mut seen = BTreeSet::new();
        for (l, b) in self.blocks.iter().enumerate() {
            if b.set.is_empty() {
                return Err(Error::InvalidFactorization(format!("block {l} is empty")));
            }
            for &v in &b.cond {
                if !seen.contains(&v) {
                    return Err(Error::InvalidFactorization(format!(
                        "block {l} conditions on {v}, which no earlier block introduces"
                    )));
                }
            }
            for &v in &b.set {
                if !universe.contains(&v) {
                    return Err(Error::InvalidFactorization(format!(
                        "block {l} introduces {v}, which is outside the scope"
                    )));
                }
                if !seen.insert(v) {
                    return Err(Error::InvalidFactorization(format!(
                        "variable {v} appears in more than one block"
                    )));
                }
            }
        }
        if seen != universe {
            return Err(Error::InvalidFactorization(
                "blocks do not cover the scope".into(),
            ));
        }
        Ok(())
    }
}

/// Singleton blocks `({v}, parents(v))` in topological order.
pub fn neighborhood_factorization(dag: &Dag) -> Factorization {
    let blocks = dag
        .topological_order()
        .iter()
        .map(|&v| Block::new(vec![v], dag.parents(v).to_vec()))
        .collect();
    Factorization { blocks }
}

struct BlockTables {
    joint: DenseDistribution,
    cond: DenseDistribution,
    joint_pos: Vec<usize>,
    cond_pos: Vec<usize>,
}

/// Precomputed block marginals of one distribution, for repeated evaluation
/// of the factorized product.
pub struct FactorizedView {
    blocks: Vec<BlockTables>,
}

impl FactorizedView {
    pub fn new(dist: &DenseDistribution, fact: &Factorization) -> Result<Self> {
        fact.validate(dist.scope())?;
        let mut blocks = Vec::with_capacity(fact.len());
        for b in fact.blocks() {
            let hood = b.neighborhood();
            let joint = marginal(dist, &hood)?;
            let cond = marginal(dist, &b.cond)?;
            let joint_pos = hood
                .iter()
                .map(|&v| dist.position(v))
                .collect::<Result<_>>()?;
            let cond_pos = b
                .cond
                .iter()
                .map(|&v| dist.position(v))
                .collect::<Result<_>>()?;
            blocks.push(BlockTables {
                joint,
                cond,
                joint_pos,
                cond_pos,
            });
        }
        Ok(FactorizedView { blocks })
    }

    /// `prod_l P(x_{S_l} | x_{C_l})` for an assignment `x` in scope order.
    /// A conditional whose condition has probability zero contributes 0.
    pub fn eval(&self, x: &[usize]) -> f64 {
        let mut buf = Vec::new();
        let mut acc = 1.0;
        for b in &self.blocks {
            buf.clear();
            buf.extend(b.joint_pos.iter().map(|&p| x[p]));
            let num = b.joint.probs()[encode(&buf, b.joint.sizes())];
            buf.clear();
            buf.extend(b.cond_pos.iter().map(|&p| x[p]));
            let den = b.cond.probs()[encode(&buf, b.cond.sizes())];
            if den <= 0.0 {
                return 0.0;
            }
            acc *= num / den;
        }
        acc
    }
}

/// Evaluate the factorized product at one assignment (`x` in scope order).
pub fn conditional_factor_eval(
    dist: &DenseDistribution,
    fact: &Factorization,
    x: &[usize],
) -> Result<f64> {
    if x.len() != dist.scope().len() || x.iter().zip(dist.sizes()).any(|(&a, &s)| a >= s) {
        return Err(Error::InvalidFactorization(
            "assignment does not fit the distribution's domain".into(),
        ));
    }
    Ok(FactorizedView::new(dist, fact)?.eval(x))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionReport {
    /// `H^2` between the block marginals on `S_l ∪ C_l`.
    pub terms: Vec<f64>,
    /// Exact `H^2` between the joints.
    pub total_h_sq: f64,
    /// `sum(terms) - total_h_sq`; negative only if a distribution does not
    /// respect the factorization.
    pub slack: f64,
    pub argmax_block: usize,
    /// Total variation between the same block marginals, for comparison.
    pub tv_terms: Vec<f64>,
    pub total_tv: f64,
}

/// Per-block and joint squared Hellinger distances.
pub fn decompose(
    p: &DenseDistribution,
    q: &DenseDistribution,
    fact: &Factorization,
) -> Result<DecompositionReport> {
    if !p.same_domain(q) {
        return Err(Error::ScopeMismatch(
            "P and Q are defined on different domains".into(),
        ));
    }
    fact.validate(p.scope())?;
    let mut terms = Vec::with_capacity(fact.len());
    let mut tv_terms = Vec::with_capacity(fact.len());
    for b in fact.blocks() {
        let hood = b.neighborhood();
        let (mp, mq) = (marginal(p, &hood)?, marginal(q, &hood)?);
        terms.push(hellinger_sq(&mp, &mq)?);
        tv_terms.push(total_variation(&mp, &mq)?);
    }
    let total_h_sq = hellinger_sq(p, q)?;
    let argmax_block = argmax(&terms);
    Ok(DecompositionReport {
        slack: terms.iter().sum::<f64>() - total_h_sq,
        terms,
        total_h_sq,
        argmax_block,
        tv_terms,
        total_tv: total_variation(p, q)?,
    })
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct Localization {
    pub block: usize,
    pub term: f64,
    /// `eps / L`.
    pub threshold: f64,
    /// Whether `H^2(P, Q) >= eps` held; when false the block is only the
    /// argmax and carries no guarantee.
    pub premise_met: bool,
    pub report: DecompositionReport,
}

/// Block carrying the largest share of the discrepancy. When
/// `H^2(P, Q) >= eps` (an `H^2` threshold, not total variation) the returned
/// term is at least `eps / L`.
pub fn localize(
    p: &DenseDistribution,
    q: &DenseDistribution,
    fact: &Factorization,
    eps: f64,
) -> Result<Localization> {
    let report = decompose(p, q, fact)?;
    let block = report.argmax_block;
    Ok(Localization {
        block,
        term: report.terms.get(block).copied().unwrap_or(0.0),
        threshold: eps / fact.len().max(1) as f64,
        premise_met: report.total_h_sq >= eps,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bn::{chain, empty, joint_distribution, star, BayesNet};

    fn bern(p: f64) -> Vec<f64> {
        vec![1.0 - p, p]
    }

    fn product(ps: &[f64]) -> DenseDistribution {
        let n = ps.len();
        let net = BayesNet::new(
            empty(n),
            vec![2; n],
            ps.iter().map(|&p| vec![bern(p)]).collect(),
        )
        .unwrap();
        joint_distribution(&net).unwrap()
    }

    #[test]
    fn neighborhood_factorization_examples() {
        let f = neighborhood_factorization(&empty(3));
        assert_eq!(
            f.blocks(),
            &[
                Block::new(vec![0], vec![]),
                Block::new(vec![1], vec![]),
                Block::new(vec![2], vec![])
            ]
        );
        let f = neighborhood_factorization(&chain(3));
        assert_eq!(
            f.blocks(),
            &[
                Block::new(vec![0], vec![]),
                Block::new(vec![1], vec![0]),
                Block::new(vec![2], vec![1])
            ]
        );
        let f = neighborhood_factorization(&star(3));
        assert_eq!(
            f.blocks(),
            &[
                Block::new(vec![0], vec![]),
                Block::new(vec![1], vec![0]),
                Block::new(vec![2], vec![0])
            ]
        );
    }

    #[test]
    fn invalid_factorizations() {
        let scope = [0, 1];
        assert!(Factorization::new(vec![Block::new(vec![0], vec![1]), Block::new(vec![1], vec![])], &scope).is_err());
        assert!(Factorization::new(vec![Block::new(vec![0, 1], vec![]), Block::new(vec![1], vec![])], &scope).is_err());
        assert!(Factorization::new(vec![Block::new(vec![0], vec![])], &scope).is_err());
        assert!(Factorization::new(vec![Block::new(vec![0, 1, 2], vec![])], &scope).is_err());
        assert!(Factorization::new(vec![Block::new(vec![], vec![]), Block::new(vec![0, 1], vec![])], &scope).is_err());
    }

    #[test]
    fn factor_eval_examples() {
        let p = product(&[0.2, 0.7]);
        let whole = Factorization::new(vec![Block::new(vec![0, 1], vec![])], &[0, 1]).unwrap();
        let singles = neighborhood_factorization(&empty(2));
        for x0 in 0..2 {
            for x1 in 0..2 {
                let x = [x0, x1];
                assert_eq!(conditional_factor_eval(&p, &whole, &x).unwrap(), p.prob(&x));
                let m0 = if x0 == 1 { 0.2 } else { 0.8 };
                let m1 = if x1 == 1 { 0.7 } else { 0.3 };
                let v = conditional_factor_eval(&p, &singles, &x).unwrap();
                assert!((v - m0 * m1).abs() < 1e-15);
            }
        }
        assert!(conditional_factor_eval(&p, &whole, &[0, 2]).is_err());
    }

    #[test]
    fn zero_probability_condition_contributes_zero() {
        let d = DenseDistribution::new(vec![0, 1], vec![2, 2], vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        let f = neighborhood_factorization(&chain(2));
        assert_eq!(conditional_factor_eval(&d, &f, &[1, 0]).unwrap(), 0.0);
        assert_eq!(conditional_factor_eval(&d, &f, &[0, 0]).unwrap(), 1.0);
    }

    #[test]
    fn decompose_examples() {
        let p = product(&[0.5, 0.5]);
        let f = neighborhood_factorization(&empty(2));
        let r = decompose(&p, &p, &f).unwrap();
        assert_eq!(r.terms, vec![0.0, 0.0]);
        assert_eq!(r.total_h_sq, 0.0);
        assert_eq!(r.slack, 0.0);

        let q = product(&[0.5, 0.9]);
        let r = decompose(&p, &q, &f).unwrap();
        let h = 1.0 - 0.45f64.sqrt() - 0.05f64.sqrt();
        assert!(r.terms[0].abs() < 1e-15);
        assert!((r.terms[1] - h).abs() < 1e-12);
        assert!((r.total_h_sq - h).abs() < 1e-12);
        assert!(r.slack.abs() < 1e-12);
        assert_eq!(r.argmax_block, 1);
        assert!((h - 0.105573).abs() < 1e-6);
    }

    #[test]
    fn localize_examples() {
        let p = product(&[0.5, 0.5]);
        let q = product(&[0.5, 0.9]);
        let f = neighborhood_factorization(&empty(2));
        let same = localize(&p, &p, &f, 0.1).unwrap();
        assert!(!same.premise_met);
        assert!(same.report.terms.iter().all(|&t| t == 0.0));
        let l = localize(&p, &q, &f, 0.1).unwrap();
        assert!(l.premise_met);
        assert_eq!(l.block, 1);
        assert!(l.term >= l.threshold);
        assert_eq!(l.threshold, 0.05);
    }

    #[test]
    fn decompose_rejects_mismatched_domains() {
        let p = product(&[0.5, 0.5]);
        let q = product(&[0.5, 0.5, 0.5]);
        let f = neighborhood_factorization(&empty(2));
        assert!(matches!(decompose(&p, &q, &f), Err(Error::ScopeMismatch(_))));
    }
}
