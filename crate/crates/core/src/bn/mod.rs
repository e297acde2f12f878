//! Discrete Bayesian networks and exact small-domain distributions.
//!
//! All assignment indexing uses one mixed-radix convention: within an
//! ascending scope, the variable with the smallest index is the most
//! significant digit. CPT rows follow the same convention over a node's
//! parents (kept sorted ascending), and count tables and dense
//! distributions share it, so an index computed in one place means the same
//! assignment everywhere.

mod families;
mod io;

pub use families::{chain, empty, random_dag, random_tree_edges, random_tree_parents, star};
pub use io::{read_dag, read_model, read_samples, write_model, write_samples};

use std::collections::BinaryHeap;
use std::cmp::Reverse;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Tolerance on the normalization of user-supplied probability vectors.
pub const INPUT_TOLERANCE: f64 = 1e-12;
/// Tolerance on the normalization of computed joints and marginals.
pub const COMPUTED_TOLERANCE: f64 = 1e-10;
/// Default cap on the number of cells an exact enumeration may touch.
pub const DEFAULT_DOMAIN_CAP: usize = 1 << 24;

/// Row-major mixed-radix index of `values` under `sizes`.
pub fn encode(values: &[usize], sizes: &[usize]) -> usize {
    debug_assert_eq!(values.len(), sizes.len());
    values
        .iter()
        .zip(sizes)
        .fold(0, |acc, (&v, &s)| acc * s + v)
}

/// Inverse of [`encode`]; writes the digits into `out`.
pub fn decode(mut index: usize, sizes: &[usize], out: &mut [usize]) {
    for (slot, &s) in out.iter_mut().zip(sizes).rev() {
        *slot = index % s;
        index /= s;
    }
}

/// Product of `sizes`, or `None` on overflow.
pub fn domain_size(sizes: &[usize]) -> Option<usize> {
    sizes.iter().try_fold(1usize, |acc, &s| acc.checked_mul(s))
}

fn domain_size_wide(sizes: &[usize]) -> u128 {
    sizes
        .iter()
        .fold(1u128, |acc, &s| acc.saturating_mul(s as u128))
}

/// Topological order of the graph given by `parents`, ties broken by
/// ascending node index.
pub fn topological_order(parents: &[Vec<usize>]) -> Result<Vec<usize>> {
    let n = parents.len();
    let mut children = vec![Vec::new(); n];
    let mut indegree = vec![0usize; n];
    for (v, ps) in parents.iter().enumerate() {
        for &p in ps {
            if p >= n {
                return Err(Error::InvalidGraph(format!(
                    "node {v} has parent {p} but the graph has {n} nodes"
                )));
            }
            children[p].push(v);
            indegree[v] += 1;
        }
    }
    let mut ready: BinaryHeap<Reverse<usize>> = (0..n)
        .filter(|&v| indegree[v] == 0)
        .map(Reverse)
        .collect();
    let mut order = Vec::with_capacity(n);
    while let Some(Reverse(v)) = ready.pop() {
        order.push(v);
        for &c in &children[v] {
            indegree[c] -= 1;
            if indegree[c] == 0 {
                ready.push(Reverse(c));
            }
        }
    }
    if order.len() != n {
        return Err(Error::CycleDetected);
    }
    Ok(order)
}

/// Directed acyclic graph stored as per-node parent lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dag {
    parents: Vec<Vec<usize>>,
    labels: Vec<String>,
    order: Vec<usize>,
}

impl Dag {
    /// Build a DAG from parent lists. Parent lists are sorted ascending.
    pub fn new(parents: Vec<Vec<usize>>) -> Result<Self> {
        let labels = (0..parents.len()).map(|i| format!("X{i}")).collect();
        Self::with_labels(parents, labels)
    }

    pub fn with_labels(mut parents: Vec<Vec<usize>>, labels: Vec<String>) -> Result<Self> {
        if labels.len() != parents.len() {
            return Err(Error::InvalidGraph(format!(
                "{} labels for {} nodes",
                labels.len(),
                parents.len()
            )));
        }
        for (v, ps) in parents.iter_mut().enumerate() {
            ps.sort_unstable();
            if ps.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::InvalidGraph(format!("node {v} has a duplicate parent")));
            }
            if ps.contains(&v) {
                return Err(Error::InvalidGraph(format!("node {v} is its own parent")));
            }
        }
        let order = topological_order(&parents)?;
        Ok(Dag {
            parents,
            labels,
            order,
        })
    }

    pub fn n(&self) -> usize {
        self.parents.len()
    }

    pub fn parents(&self, v: usize) -> &[usize] {
        &self.parents[v]
    }

    pub fn parent_lists(&self) -> &[Vec<usize>] {
        &self.parents
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Cached topological order (ascending-index tie break).
    pub fn topological_order(&self) -> &[usize] {
        &self.order
    }

    /// Maximum in-degree.
    pub fn max_indegree(&self) -> usize {
        self.parents.iter().map(Vec::len).max().unwrap_or(0)
    }
}

/// Conditional probability table for one node.
///
/// Row `r` holds the distribution of the node given the parent configuration
/// whose mixed-radix index (over the ascending parent list) is `r`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cpt {
    arity: usize,
    probs: Vec<f64>,
}

impl Cpt {
    pub fn rows(&self) -> usize {
        self.probs.len() / self.arity
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.probs[r * self.arity..(r + 1) * self.arity]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.probs[r * self.arity..(r + 1) * self.arity]
    }
}

/// A discrete Bayesian network: a DAG plus one CPT per node.
#[derive(Debug, Clone, PartialEq)]
pub struct BayesNet {
    dag: Dag,
    arities: Vec<usize>,
    cpts: Vec<Cpt>,
}

fn check_prob_vector(v: &[f64], tol: f64) -> std::result::Result<(), String> {
    if let Some(x) = v.iter().find(|x| !x.is_finite() || **x < 0.0) {
        return Err(format!("entry {x} is negative or not finite"));
    }
    let s: f64 = v.iter().sum();
    if (s - 1.0).abs() > tol {
        return Err(format!("entries sum to {s}"));
    }
    Ok(())
}

impl BayesNet {
    /// Build a network from per-node CPT rows (`cpts[v][row][symbol]`).
    pub fn new(dag: Dag, arities: Vec<usize>, cpts: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let n = dag.n();
        if arities.len() != n || cpts.len() != n {
            return Err(Error::InvalidModel(format!(
                "{n} nodes but {} arities and {} tables",
                arities.len(),
                cpts.len()
            )));
        }
        if let Some(v) = arities.iter().position(|&k| k == 0) {
            return Err(Error::InvalidModel(format!("node {v} has arity 0")));
        }
        let mut tables = Vec::with_capacity(n);
        for (v, rows) in cpts.into_iter().enumerate() {
            let parent_sizes: Vec<usize> = dag.parents(v).iter().map(|&p| arities[p]).collect();
            let expected = domain_size(&parent_sizes).ok_or_else(|| {
                Error::InvalidModel(format!("node {v} has too many parent configurations"))
            })?;
            if rows.len() != expected {
                return Err(Error::InvalidModel(format!(
                    "node {v}: expected {expected} CPT rows, found {}",
                    rows.len()
                )));
            }
            let mut probs = Vec::with_capacity(expected * arities[v]);
            for (r, row) in rows.into_iter().enumerate() {
                if row.len() != arities[v] {
                    return Err(Error::InvalidModel(format!(
                        "node {v} row {r}: expected {} entries, found {}",
                        arities[v],
                        row.len()
                    )));
                }
                check_prob_vector(&row, INPUT_TOLERANCE)
                    .map_err(|e| Error::InvalidModel(format!("node {v} row {r}: {e}")))?;
                probs.extend(row);
            }
            tables.push(Cpt {
                arity: arities[v],
                probs,
            });
        }
        Ok(BayesNet {
            dag,
            arities,
            cpts: tables,
        })
    }

    /// Network on `dag` with every CPT row drawn uniformly from the simplex.
    pub fn random<R: Rng + ?Sized>(dag: Dag, arities: Vec<usize>, rng: &mut R) -> Result<Self> {
        let cpts = (0..dag.n())
            .map(|v| {
                let rows: usize = dag.parents(v).iter().map(|&p| arities[p]).product();
                (0..rows).map(|_| random_simplex(arities[v], rng)).collect()
            })
            .collect();
        Self::new(dag, arities, cpts)
    }

    pub fn dag(&self) -> &Dag {
        &self.dag
    }

    pub fn n(&self) -> usize {
        self.dag.n()
    }

    pub fn arities(&self) -> &[usize] {
        &self.arities
    }

    pub fn cpt(&self, v: usize) -> &Cpt {
        &self.cpts[v]
    }

    /// Replace row `row` of node `v`'s CPT.
    pub fn set_cpt_row(&mut self, v: usize, row: usize, probs: &[f64]) -> Result<()> {
        if v >= self.n() {
            return Err(Error::UnknownVariable(v));
        }
        let cpt = &mut self.cpts[v];
        if row >= cpt.rows() || probs.len() != cpt.arity {
            return Err(Error::InvalidModel(format!("bad CPT row {row} for node {v}")));
        }
        check_prob_vector(probs, INPUT_TOLERANCE)
            .map_err(|e| Error::InvalidModel(format!("node {v} row {row}: {e}")))?;
        cpt.row_mut(row).copy_from_slice(probs);
        Ok(())
    }

    /// CPT row index of node `v` under the full assignment `x`.
    pub fn parent_row(&self, v: usize, x: &[usize]) -> usize {
        self.dag
            .parents(v)
            .iter()
            .fold(0, |acc, &p| acc * self.arities[p] + x[p])
    }

    /// Probability of a full assignment.
    pub fn prob(&self, x: &[usize]) -> f64 {
        (0..self.n())
            .map(|v| self.cpts[v].row(self.parent_row(v, x))[x[v]])
            .product()
    }
}

/// Uniform draw from the `k`-simplex.
pub fn random_simplex<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Vec<f64> {
    let mut w: Vec<f64> = (0..k)
        .map(|_| -(1.0 - rng.gen::<f64>()).ln())
        .collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= s);
    w
}

/// Exact probability vector over a small product domain.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseDistribution {
    scope: Vec<usize>,
    sizes: Vec<usize>,
    probs: Vec<f64>,
}

impl DenseDistribution {
    /// Validated constructor for user-supplied vectors. `scope` must be
    /// strictly ascending.
    pub fn new(scope: Vec<usize>, sizes: Vec<usize>, probs: Vec<f64>) -> Result<Self> {
        Self::build(scope, sizes, probs, INPUT_TOLERANCE)
    }

    /// One-variable distribution on variable 0.
    pub fn univariate(probs: Vec<f64>) -> Result<Self> {
        let k = probs.len();
        Self::new(vec![0], vec![k], probs)
    }

    pub(crate) fn computed(scope: Vec<usize>, sizes: Vec<usize>, probs: Vec<f64>) -> Result<Self> {
        Self::build(scope, sizes, probs, COMPUTED_TOLERANCE)
    }

    fn build(scope: Vec<usize>, sizes: Vec<usize>, probs: Vec<f64>, tol: f64) -> Result<Self> {
        if scope.len() != sizes.len() {
            return Err(Error::InvalidDistribution(format!(
                "{} scope entries for {} sizes",
                scope.len(),
                sizes.len()
            )));
        }
        if scope.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidDistribution(
                "scope must be strictly ascending".into(),
            ));
        }
        if sizes.contains(&0) {
            return Err(Error::InvalidDistribution("zero alphabet size".into()));
        }
        if domain_size(&sizes) != Some(probs.len()) {
            return Err(Error::InvalidDistribution(format!(
                "length {} does not match the domain size",
                probs.len()
            )));
        }
        check_prob_vector(&probs, tol).map_err(Error::InvalidDistribution)?;
        Ok(DenseDistribution {
            scope,
            sizes,
            probs,
        })
    }

    pub fn scope(&self) -> &[usize] {
        &self.scope
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Probability of an assignment given in scope order.
    pub fn prob(&self, x: &[usize]) -> f64 {
        self.probs[encode(x, &self.sizes)]
    }

    /// Same scope and alphabet sizes.
    pub fn same_domain(&self, other: &DenseDistribution) -> bool {
        self.scope == other.scope && self.sizes == other.sizes
    }

    /// Position of variable `v` inside the scope.
    pub fn position(&self, v: usize) -> Result<usize> {
        self.scope
            .binary_search(&v)
            .map_err(|_| Error::UnknownVariable(v))
    }
}

/// Exact joint distribution of `net` over scope `0..n`.
pub fn joint_distribution(net: &BayesNet) -> Result<DenseDistribution> {
    joint_distribution_capped(net, DEFAULT_DOMAIN_CAP)
}

/// [`joint_distribution`] with an explicit cap on the number of cells.
pub fn joint_distribution_capped(net: &BayesNet, cap: usize) -> Result<DenseDistribution> {
    let sizes = net.arities().to_vec();
    let size = domain_size_wide(&sizes);
    if size > cap as u128 {
        return Err(Error::DomainTooLarge { size, cap });
    }
    let n = net.n();
    let mut x = vec![0usize; n];
    let mut probs = Vec::with_capacity(size as usize);
    for idx in 0..size as usize {
        decode(idx, &sizes, &mut x);
        probs.push(net.prob(&x));
    }
    DenseDistribution::computed((0..n).collect(), sizes, probs)
}

/// Sum out every variable of `dist` not in `subset`. The result's scope is
/// `subset` sorted ascending.
pub fn marginal(dist: &DenseDistribution, subset: &[usize]) -> Result<DenseDistribution> {
    let mut keep: Vec<usize> = subset.to_vec();
    keep.sort_unstable();
    keep.dedup();
    let positions = keep
        .iter()
        .map(|&v| dist.position(v))
        .collect::<Result<Vec<_>>>()?;
    let out_sizes: Vec<usize> = positions.iter().map(|&p| dist.sizes[p]).collect();
    let out_len = domain_size(&out_sizes).expect("marginal is no larger than its source");

    // Stride of every source position inside the target index (0 if summed out).
    let mut strides = vec![0usize; dist.scope.len()];
    let mut s = 1;
    for &p in positions.iter().rev() {
        strides[p] = s;
        s *= dist.sizes[p];
    }

    let mut out = vec![0.0; out_len];
    let mut digits = vec![0usize; dist.scope.len()];
    let mut target = 0usize;
    for &p in &dist.probs {
        out[target] += p;
        // Odometer increment, least significant digit last.
        for j in (0..digits.len()).rev() {
            digits[j] += 1;
            target += strides[j];
            if digits[j] < dist.sizes[j] {
                break;
            }
            target -= strides[j] * digits[j];
            digits[j] = 0;
        }
    }
    DenseDistribution::computed(keep, out_sizes, out)
}

/// Matrix of i.i.d. draws: one row per sample, one column per variable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleSet {
    rows: usize,
    arities: Vec<usize>,
    names: Vec<String>,
    data: Vec<u32>,
}

impl SampleSet {
    /// Validated constructor from row-major data.
    pub fn new(arities: Vec<usize>, data: Vec<u32>) -> Result<Self> {
        let names = (0..arities.len()).map(|i| format!("X{i}")).collect();
        Self::with_names(arities, names, data)
    }

    pub fn with_names(arities: Vec<usize>, names: Vec<String>, data: Vec<u32>) -> Result<Self> {
        let cols = arities.len();
        if names.len() != cols {
            return Err(Error::ShapeMismatch(format!(
                "{} names for {cols} columns",
                names.len()
            )));
        }
        if cols == 0 {
            if !data.is_empty() {
                return Err(Error::ShapeMismatch("data without columns".into()));
            }
            return Ok(SampleSet {
                rows: 0,
                arities,
                names,
                data,
            });
        }
        if !data.len().is_multiple_of(cols) {
            return Err(Error::ShapeMismatch(format!(
                "{} entries do not fill rows of {cols}",
                data.len()
            )));
        }
        for (i, &x) in data.iter().enumerate() {
            let j = i % cols;
            if x as usize >= arities[j] {
                return Err(Error::ShapeMismatch(format!(
                    "row {} column {j}: symbol {x} outside alphabet of size {}",
                    i / cols,
                    arities[j]
                )));
            }
        }
        Ok(SampleSet {
            rows: data.len() / cols,
            arities,
            names,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.arities.len()
    }

    pub fn arities(&self) -> &[usize] {
        &self.arities
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn row(&self, i: usize) -> &[u32] {
        let c = self.cols();
        &self.data[i * c..(i + 1) * c]
    }

    pub fn get(&self, row: usize, col: usize) -> u32 {
        self.data[row * self.cols() + col]
    }

    pub fn data(&self) -> &[u32] {
        &self.data
    }

    /// First `rows` rows.
    pub fn head(&self, rows: usize) -> SampleSet {
        let rows = rows.min(self.rows);
        SampleSet {
            rows,
            arities: self.arities.clone(),
            names: self.names.clone(),
            data: self.data[..rows * self.cols()].to_vec(),
        }
    }

    /// Apply `f(column, value)` to every entry. `f` must stay inside the
    /// column's alphabet.
    pub(crate) fn map_entries(&self, mut f: impl FnMut(usize, u32) -> u32) -> SampleSet {
        let c = self.cols();
        let data = self
            .data
            .iter()
            .enumerate()
            .map(|(i, &x)| f(i % c, x))
            .collect();
        SampleSet {
            rows: self.rows,
            arities: self.arities.clone(),
            names: self.names.clone(),
            data,
        }
    }
}

/// Ancestral sampling, reproducible from `seed`.
pub fn sample(net: &BayesNet, count: usize, seed: u64) -> SampleSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_with_rng(net, count, &mut rng)
}

/// Ancestral sampling from a caller-provided generator.
pub fn sample_with_rng<R: Rng + ?Sized>(net: &BayesNet, count: usize, rng: &mut R) -> SampleSet {
    let n = net.n();
    let order = net.dag().topological_order();
    let mut data = Vec::with_capacity(count * n);
    let mut x = vec![0usize; n];
    for _ in 0..count {
        for &v in order {
            let row = net.cpt(v).row(net.parent_row(v, &x));
            x[v] = draw_categorical(row, rng);
        }
        data.extend(x.iter().map(|&s| s as u32));
    }
    SampleSet {
        rows: count,
        arities: net.arities().to_vec(),
        names: net.dag().labels().to_vec(),
        data,
    }
}

/// Inverse-CDF draw; rounding past the last cumulative value falls back to
/// the last symbol with positive mass.
pub(crate) fn draw_categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (k, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// Histogram over the assignments of a variable subset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountTable {
    scope: Vec<usize>,
    sizes: Vec<usize>,
    counts: Vec<u64>,
}

impl CountTable {
    pub fn new(scope: Vec<usize>, sizes: Vec<usize>, counts: Vec<u64>) -> Result<Self> {
        if scope.len() != sizes.len() || domain_size(&sizes) != Some(counts.len()) {
            return Err(Error::DomainMismatch(
                "count table shape does not match its scope".into(),
            ));
        }
        Ok(CountTable {
            scope,
            sizes,
            counts,
        })
    }

    /// Table over a single anonymous variable with the given counts.
    pub fn flat(counts: Vec<u64>) -> Self {
        CountTable {
            scope: vec![0],
            sizes: vec![counts.len()],
            counts,
        }
    }

    pub fn scope(&self) -> &[usize] {
        &self.scope
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn domain(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Counts of the projections of every sample row onto `subset`.
pub fn empirical_counts(samples: &SampleSet, subset: &[usize]) -> Result<CountTable> {
    let mut scope = subset.to_vec();
    scope.sort_unstable();
    scope.dedup();
    if let Some(&v) = scope.iter().find(|&&v| v >= samples.cols()) {
        return Err(Error::UnknownVariable(v));
    }
    let sizes: Vec<usize> = scope.iter().map(|&v| samples.arities[v]).collect();
    let len = domain_size(&sizes)
        .ok_or_else(|| Error::DomainMismatch("count table too large".into()))?;
    let mut counts = vec![0u64; len];
    for r in 0..samples.rows {
        let row = samples.row(r);
        let idx = scope
            .iter()
            .zip(&sizes)
            .fold(0, |acc, (&v, &s)| acc * s + row[v] as usize);
        counts[idx] += 1;
    }
    Ok(CountTable {
        scope,
        sizes,
        counts,
    })
}
