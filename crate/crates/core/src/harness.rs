//! Size and power experiments over generated network pairs.
//!
//! An [`ExperimentSpec`] names a network family, a scenario and a tester.
//! Every trial draws its instance, its samples and its calibration
//! randomness from labeled splits of the one root seed, so a spec always
//! reproduces the same report apart from the `wall_ms` column.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bn::{
    chain, joint_distribution_capped, random_dag, random_tree_parents, sample_with_rng, star, BayesNet, Dag,
    DEFAULT_DOMAIN_CAP,
};
use crate::divergences::total_variation;
use crate::error::{Error, Result};
use crate::rng;
use crate::subtest::{Decision, DEFAULT_PERMUTATIONS, DEFAULT_SAMPLE_CONSTANT};
use crate::testers::{
    known_structure_samples, test_known_structure, test_two_trees, test_unknown_structure, two_trees_samples,
    unknown_structure_samples, TesterConfig, Verdict,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    /// `P = Q`; the report's rate is the false-`Far` rate.
    Size,
    /// `P` perturbed away from `Q`; the rate is the `Far` rate among trials
    /// whose exact distance meets `eps`.
    Power,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Chain,
    Tree,
    Star,
    RandomDag,
    /// `Q` and `P` on independently drawn random trees.
    TreePair,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub family: Family,
    pub n: usize,
    #[serde(default = "default_k")]
    pub k: usize,
    /// In-degree bound for `random-dag`.
    #[serde(default)]
    pub d: usize,
    /// Mixing weight toward a point mass in the perturbed CPT.
    #[serde(default)]
    pub perturbation: f64,
}

fn default_k() -> usize {
    2
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TesterId {
    Known,
    Unknown,
    Trees,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TesterSpec {
    pub id: TesterId,
    pub eps: f64,
    #[serde(default)]
    pub max_indegree: Option<usize>,
    /// Samples per distribution; defaults to what the tester asks for.
    #[serde(default)]
    pub samples: Option<usize>,
    #[serde(default = "default_permutations")]
    pub permutations: usize,
    #[serde(default = "default_constant")]
    pub sample_constant: f64,
}

fn default_permutations() -> usize {
    DEFAULT_PERMUTATIONS
}

fn default_constant() -> f64 {
    DEFAULT_SAMPLE_CONSTANT
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub scenario: Scenario,
    pub generator: GeneratorSpec,
    pub tester: TesterSpec,
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Joint domain size above which the exact distance is skipped.
    #[serde(default = "default_cap")]
    pub oracle_cap: usize,
}

fn default_cap() -> usize {
    DEFAULT_DOMAIN_CAP
}

impl ExperimentSpec {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let spec: ExperimentSpec = serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::from_json_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.generator;
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be at least 1".into()));
        }
        if g.n == 0 || g.k < 2 {
            return Err(Error::InvalidConfig(format!(
                "need n >= 1 and k >= 2, got n = {} and k = {}",
                g.n, g.k
            )));
        }
        if !(0.0..=1.0).contains(&g.perturbation) {
            return Err(Error::InvalidConfig(format!(
                "perturbation must lie in [0, 1], got {}",
                g.perturbation
            )));
        }
        if self.tester.id == TesterId::Unknown && self.tester.max_indegree.is_none() {
            return Err(Error::InvalidConfig("the unknown-structure tester needs max_indegree".into()));
        }
        Ok(())
    }

    fn tester_config(&self, trial: usize) -> TesterConfig {
        TesterConfig {
            permutations: self.tester.permutations,
            sample_constant: self.tester.sample_constant,
            seed: rng::derive_seed(self.seed, "tester", trial as u64),
            ..TesterConfig::new(self.tester.eps)
        }
    }
}

#[derive(Debug, Clone)]
pub struct Instance {
    pub p: BayesNet,
    pub q: BayesNet,
    pub exact_tv: Option<f64>,
}

fn family_dag(g: &GeneratorSpec, rng: &mut impl Rng) -> Result<Dag> {
    Ok(match g.family {
        Family::Chain => chain(g.n),
        Family::Star => star(g.n),
        Family::Tree | Family::TreePair => random_tree_parents(g.n, rng),
        Family::RandomDag => random_dag(g.n, g.d, rng),
    })
}

/// Mix every row of node `v`'s CPT toward the point mass on its least likely
/// symbol: `row <- (1 - w) row + w e_a`.
fn perturb(net: &mut BayesNet, v: usize, w: f64) -> Result<()> {
    let cpt = net.cpt(v).clone();
    for r in 0..cpt.rows() {
        let row = cpt.row(r);
        let a = (0..row.len()).min_by(|&i, &j| row[i].total_cmp(&row[j])).unwrap_or(0);
        let mut new: Vec<f64> = row.iter().map(|&x| (1.0 - w) * x).collect();
        new[a] += w;
        net.set_cpt_row(v, r, &new)?;
    }
    Ok(())
}

/// Instance for `trial`, deterministic in `(spec.seed, trial)`. The exact
/// distance is computed when the joint fits under `oracle_cap`; power
/// scenarios require it.
pub fn generate_instance(spec: &ExperimentSpec, trial: usize) -> Result<Instance> {
    let g = &spec.generator;
    let mut r = rng::stream(spec.seed, "instance", trial as u64);
    let arities = vec![g.k; g.n];
    let q = BayesNet::random(family_dag(g, &mut r)?, arities.clone(), &mut r)?;
    let p = match spec.scenario {
        Scenario::Size => q.clone(),
        Scenario::Power if g.family == Family::TreePair => {
            let mut p = BayesNet::random(family_dag(g, &mut r)?, arities, &mut r)?;
            if g.perturbation > 0.0 {
                let v = r.gen_range(0..g.n);
                perturb(&mut p, v, g.perturbation)?;
            }
            p
        }
        Scenario::Power => {
            let mut p = q.clone();
            if g.perturbation > 0.0 {
                let v = r.gen_range(0..g.n);
                perturb(&mut p, v, g.perturbation)?;
            }
            p
        }
    };
    let exact_tv = match (
        joint_distribution_capped(&p, spec.oracle_cap),
        joint_distribution_capped(&q, spec.oracle_cap),
    ) {
        (Ok(a), Ok(b)) => Some(total_variation(&a, &b)?),
        (Err(e @ Error::DomainTooLarge { .. }), _) | (_, Err(e @ Error::DomainTooLarge { .. })) => {
            if spec.scenario == Scenario::Power {
                return Err(e);
            }
            None
        }
        (Err(e), _) | (_, Err(e)) => return Err(e),
    };
    Ok(Instance { p, q, exact_tv })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRow {
    pub trial: usize,
    pub instance_hash: u64,
    pub exact_tv: Option<f64>,
    /// Counted toward the summary rate.
    pub included: bool,
    pub decision: Decision,
    pub witness: Option<Vec<usize>>,
    pub subtests: usize,
    pub far_subtests: usize,
    pub min_pvalue: f64,
    pub samples_p: usize,
    pub samples_q: usize,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub counted: usize,
    pub far: usize,
    pub excluded: usize,
    pub rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub rows: Vec<TrialRow>,
    pub summary: Summary,
}

/// Wilson score interval for `k` successes out of `n` at 95% coverage.
pub fn wilson_interval(k: usize, n: usize) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054;
    let (k, n) = (k as f64, n as f64);
    let p = k / n;
    let z2 = z * z;
    let center = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = z / (1.0 + z2 / n) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

fn instance_hash(inst: &Instance) -> u64 {
    let h = rng::fnv1a(inst.p.to_json_string().as_bytes());
    rng::fnv1a_extend(h, inst.q.to_json_string().as_bytes())
}

fn samples_for(spec: &ExperimentSpec, net: &BayesNet, cfg: &TesterConfig) -> Result<usize> {
    if let Some(s) = spec.tester.samples {
        return Ok(s);
    }
    match spec.tester.id {
        TesterId::Known => known_structure_samples(net.dag(), net.arities(), cfg),
        TesterId::Unknown => unknown_structure_samples(net.arities(), spec.tester.max_indegree.unwrap_or(0), cfg),
        TesterId::Trees => two_trees_samples(net.arities(), cfg),
    }
}

fn run_trial(spec: &ExperimentSpec, trial: usize) -> Result<TrialRow> {
    let start = Instant::now();
    let inst = generate_instance(spec, trial)?;
    let cfg = spec.tester_config(trial);
    let m = samples_for(spec, &inst.q, &cfg)?;
    let sp = sample_with_rng(&inst.p, m, &mut rng::stream(spec.seed, "samples-p", trial as u64));
    let sq = sample_with_rng(&inst.q, m, &mut rng::stream(spec.seed, "samples-q", trial as u64));
    let verdict: Verdict = match spec.tester.id {
        // The tester is told Q's structure, which P shares by construction.
        TesterId::Known => test_known_structure(&sp, &sq, inst.q.dag(), &cfg)?,
        TesterId::Unknown => test_unknown_structure(&sp, &sq, spec.tester.max_indegree.unwrap_or(0), &cfg)?,
        TesterId::Trees => test_two_trees(&sp, &sq, &cfg)?,
    };
    let included = match spec.scenario {
        Scenario::Size => true,
        Scenario::Power => inst.exact_tv.is_some_and(|tv| tv >= spec.tester.eps),
    };
    Ok(TrialRow {
        trial,
        instance_hash: instance_hash(&inst),
        exact_tv: inst.exact_tv,
        included,
        decision: verdict.decision,
        far_subtests: verdict.subtests.iter().filter(|r| r.decision == Decision::Far).count(),
        min_pvalue: verdict.subtests.iter().map(|r| r.pvalue).fold(1.0, f64::min),
        subtests: verdict.subtests.len(),
        witness: verdict.witness,
        samples_p: verdict.samples_p,
        samples_q: verdict.samples_q,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

/// Run every trial (in parallel) and summarize in trial order.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Report> {
    spec.validate()?;
    let rows = (0..spec.trials)
        .into_par_iter()
        .map(|t| run_trial(spec, t))
        .collect::<Result<Vec<_>>>()?;
    let counted = rows.iter().filter(|r| r.included).count();
    let far = rows
        .iter()
        .filter(|r| r.included && r.decision == Decision::Far)
        .count();
    let (ci_low, ci_high) = wilson_interval(far, counted);
    let summary = Summary {
        counted,
        far,
        excluded: rows.len() - counted,
        rate: if counted == 0 { f64::NAN } else { far as f64 / counted as f64 },
        ci_low,
        ci_high,
    };
    Ok(Report { rows, summary })
}

pub const REPORT_HEADER: [&str; 17] = [
    "kind",
    "trial",
    "instance_hash",
    "exact_tv",
    "included",
    "decision",
    "witness",
    "subtests",
    "far_subtests",
    "min_pvalue",
    "samples_p",
    "samples_q",
    "far_rate",
    "ci_low",
    "ci_high",
    "excluded",
    "wall_ms",
];

/// Join a variable set as `a;b;c`.
pub fn format_set(set: &[usize]) -> String {
    set.iter().map(usize::to_string).collect::<Vec<_>>().join(";")
}

/// CSV report: one `trial` row per trial, then one `summary` row.
pub fn write_report<W: Write>(report: &Report, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Parse(e.to_string());
    w.write_record(REPORT_HEADER).map_err(csv_err)?;
    for r in &report.rows {
        w.write_record([
            "trial".to_string(),
            r.trial.to_string(),
            format!("{:016x}", r.instance_hash),
            r.exact_tv.map(|x| format!("{x:.12}")).unwrap_or_default(),
            r.included.to_string(),
            r.decision.to_string(),
            r.witness.as_deref().map(format_set).unwrap_or_default(),
            r.subtests.to_string(),
            r.far_subtests.to_string(),
            format!("{:.6}", r.min_pvalue),
            r.samples_p.to_string(),
            r.samples_q.to_string(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            format!("{:.3}", r.wall_ms),
        ])
        .map_err(csv_err)?;
    }
    let s = &report.summary;
    let mut row = vec![String::new(); REPORT_HEADER.len()];
    row[0] = "summary".into();
    row[4] = s.counted.to_string();
    row[8] = s.far.to_string();
    row[12] = format!("{:.6}", s.rate);
    row[13] = format!("{:.6}", s.ci_low);
    row[14] = format!("{:.6}", s.ci_high);
    row[15] = s.excluded.to_string();
    w.write_record(&row).map_err(csv_err)?;
    w.flush().map_err(|e| Error::io("report", e))
}

/// Remove a named column from CSV text, e.g. `wall_ms` before comparing
/// two reports byte for byte.
pub fn strip_column(csv_text: &str, column: &str) -> Result<String> {
    let mut rd = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(csv_text.as_bytes());
    let mut out = csv::Writer::from_writer(Vec::new());
    let mut drop = None;
    for (i, rec) in rd.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
        if i == 0 {
            drop = rec.iter().position(|f| f == column);
        }
        let kept: Vec<&str> = rec
            .iter()
            .enumerate()
            .filter(|(j, _)| Some(*j) != drop)
            .map(|(_, f)| f)
            .collect();
        out.write_record(kept).map_err(|e| Error::Parse(e.to_string()))?;
    }
    let bytes = out.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
}
