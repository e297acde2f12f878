//! Exact divergences between distributions on a shared domain.
//!
//! The slice-level functions take raw probability vectors; the
//! [`DenseDistribution`] wrappers additionally check that scope and alphabet
//! sizes agree.

use std::fmt;

use crate::bn::DenseDistribution;
use crate::error::{Error, Result};

/// Which divergence a [`DivergenceValue`] holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DivergenceKind {
    HellingerSq,
    TotalVariation,
    Kl,
    ChiSq,
}

impl fmt::Display for DivergenceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DivergenceKind::HellingerSq => "hellinger_sq",
            DivergenceKind::TotalVariation => "total_variation",
            DivergenceKind::Kl => "kl",
            DivergenceKind::ChiSq => "chi_sq",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DivergenceValue {
    pub kind: DivergenceKind,
    pub value: f64,
}

fn check_lengths(p: &[f64], q: &[f64]) -> Result<()> {
    if p.len() != q.len() {
        return Err(Error::ScopeMismatch(format!(
            "vectors of length {} and {}",
            p.len(),
            q.len()
        )));
    }
    Ok(())
}

fn check_domain(p: &DenseDistribution, q: &DenseDistribution) -> Result<()> {
    if !p.same_domain(q) {
        return Err(Error::ScopeMismatch(format!(
            "scopes {:?}/{:?} with sizes {:?}/{:?}",
            p.scope(),
            q.scope(),
            p.sizes(),
            q.sizes()
        )));
    }
    Ok(())
}

/// Squared Hellinger distance `1 - sum sqrt(p_k q_k)`, clamped to `[0, 1]`.
///
/// Evaluated as `sum (sqrt p_k - sqrt q_k)^2 / 2`, which equals the above for
/// normalized inputs but does not cancel catastrophically near `p = q`.
pub fn hellinger_sq_probs(p: &[f64], q: &[f64]) -> Result<f64> {
    check_lengths(p, q)?;
    let s: f64 = p
        .iter()
        .zip(q)
        .map(|(&a, &b)| {
            let d = a.sqrt() - b.sqrt();
            d * d
        })
        .sum();
    Ok((0.5 * s).clamp(0.0, 1.0))
}

/// Half the L1 distance.
pub fn total_variation_probs(p: &[f64], q: &[f64]) -> Result<f64> {
    check_lengths(p, q)?;
    let s: f64 = p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum();
    Ok((0.5 * s).clamp(0.0, 1.0))
}

/// `sum p log(p/q)` in nats; `+inf` when `p` puts mass where `q` has none.
pub fn kl_probs(p: &[f64], q: &[f64]) -> Result<f64> {
    check_lengths(p, q)?;
    let mut s = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        if a == 0.0 {
            continue;
        }
        if b == 0.0 {
            return Ok(f64::INFINITY);
        }
        s += a * (a / b).ln();
    }
    Ok(s.max(0.0))
}

/// Pearson chi-square `sum (p - q)^2 / q`; `+inf` when `q_k = 0 < p_k`.
pub fn chi_sq_probs(p: &[f64], q: &[f64]) -> Result<f64> {
    check_lengths(p, q)?;
    let mut s = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        if b == 0.0 {
            if a > 0.0 {
                return Ok(f64::INFINITY);
            }
            continue;
        }
        s += (a - b) * (a - b) / b;
    }
    Ok(s)
}

pub fn hellinger_sq(p: &DenseDistribution, q: &DenseDistribution) -> Result<f64> {
    check_domain(p, q)?;
    hellinger_sq_probs(p.probs(), q.probs())
}

/// Hellinger distance, `sqrt` of [`hellinger_sq`].
pub fn hellinger(p: &DenseDistribution, q: &DenseDistribution) -> Result<f64> {
    hellinger_sq(p, q).map(f64::sqrt)
}

pub fn total_variation(p: &DenseDistribution, q: &DenseDistribution) -> Result<f64> {
    check_domain(p, q)?;
    total_variation_probs(p.probs(), q.probs())
}

pub fn kl(p: &DenseDistribution, q: &DenseDistribution) -> Result<f64> {
    check_domain(p, q)?;
    kl_probs(p.probs(), q.probs())
}

pub fn chi_sq(p: &DenseDistribution, q: &DenseDistribution) -> Result<f64> {
    check_domain(p, q)?;
    chi_sq_probs(p.probs(), q.probs())
}

/// All four divergences, in a fixed order.
pub fn all_divergences(p: &DenseDistribution, q: &DenseDistribution) -> Result<[DivergenceValue; 4]> {
    Ok([
        DivergenceValue {
            kind: DivergenceKind::HellingerSq,
            value: hellinger_sq(p, q)?,
        },
        DivergenceValue {
            kind: DivergenceKind::TotalVariation,
            value: total_variation(p, q)?,
        },
        DivergenceValue {
            kind: DivergenceKind::Kl,
            value: kl(p, q)?,
        },
        DivergenceValue {
            kind: DivergenceKind::ChiSq,
            value: chi_sq(p, q)?,
        },
    ])
}

/// Squared Hellinger distance between Bernoulli(p) and Bernoulli(q).
pub fn bernoulli_hellinger_sq(p: f64, q: f64) -> f64 {
    hellinger_sq_probs(&[1.0 - p, p], &[1.0 - q, q]).expect("equal lengths")
}

/// Upper bound `(p - q)^2 / 2 * (1/q + 1/(1 - q))` on the squared Hellinger
/// distance between two Bernoullis.
pub fn bernoulli_hellinger_bound(p: f64, q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::DegenerateQ(q));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::OutOfDomain(p));
    }
    let x = p - q;
    Ok(0.5 * x * x * (1.0 / q + 1.0 / (1.0 - q)))
}

/// Whether `sqrt(1 + t) >= 1 + t/2 - t^2/2` holds at `t`.
pub fn sqrt_lower_bound_check(t: f64) -> Result<bool> {
    if !t.is_finite() || t < -1.0 {
        return Err(Error::OutOfDomain(t));
    }
    Ok((1.0 + t).sqrt() >= 1.0 + 0.5 * t - 0.5 * t * t)
}
