//! `bnh`: command-line front end for the hellinger-bn library.
//!
//! Exit status is 0 when a result was produced, 1 for usage errors and 2 for
//! data errors (unreadable or invalid inputs).

mod report;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use hellinger_bn::bn::{
    joint_distribution, read_dag, read_model, read_samples, sample, write_samples, Dag, SampleSet,
};
use hellinger_bn::decomposition::{decompose, neighborhood_factorization, Block, Factorization};
use hellinger_bn::divergences::all_divergences;
use hellinger_bn::gof::{gof_product, GofConfig, ProductModel, ThresholdMode};
use hellinger_bn::harness::{run_experiment, write_report, ExperimentSpec};
use hellinger_bn::subtest::{hellinger_subtest, SubtestConfig, DEFAULT_PERMUTATIONS, DEFAULT_SAMPLE_CONSTANT};
use hellinger_bn::testers::{
    test_known_structure, test_two_trees, test_unknown_structure, TesterConfig, DEFAULT_MAX_SUBTESTS,
};
use hellinger_bn::tree_order::{order_two_trees, Tree};
use hellinger_bn::{bn::empirical_counts, Error, Result};

#[derive(Parser, Debug)]
#[command(name = "bnh", version, about = "Squared-Hellinger tools for discrete Bayesian networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Format {
    Csv,
}

#[derive(Args, Debug)]
struct Common {
    /// Root seed for every random choice.
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

impl Common {
    fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }
}

#[derive(Args, Debug)]
struct TesterArgs {
    #[arg(long = "p-samples")]
    p_samples: PathBuf,
    #[arg(long = "q-samples")]
    q_samples: PathBuf,
    /// Total-variation separation.
    #[arg(long)]
    eps: f64,
    /// Minimum permutation replicas per subtest.
    #[arg(long, default_value_t = DEFAULT_PERMUTATIONS)]
    permutations: usize,
    #[arg(long = "sample-constant", default_value_t = DEFAULT_SAMPLE_CONSTANT)]
    sample_constant: f64,
    #[arg(long = "max-subtests", default_value_t = DEFAULT_MAX_SUBTESTS)]
    max_subtests: usize,
    /// Run only the first `max-subtests` subsets instead of failing.
    #[arg(long = "allow-truncation")]
    allow_truncation: bool,
}

impl TesterArgs {
    fn config(&self, seed: u64) -> TesterConfig {
        TesterConfig {
            permutations: self.permutations,
            sample_constant: self.sample_constant,
            seed,
            max_subtests: self.max_subtests,
            allow_truncation: self.allow_truncation,
            ..TesterConfig::new(self.eps)
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Mode {
    Chebyshev,
    Mc,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw samples from a model.
    Sample {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        count: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Exact divergences between the joints of two models.
    Divergence {
        #[arg(long = "model-p")]
        model_p: PathBuf,
        #[arg(long = "model-q")]
        model_q: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Per-block squared Hellinger terms against the joint value.
    VerifySubadditivity {
        #[arg(long = "model-p")]
        model_p: PathBuf,
        #[arg(long = "model-q")]
        model_q: PathBuf,
        /// JSON list of {"set": [...], "cond": [...]} blocks. Defaults to the
        /// parent neighborhoods of the union of both DAGs.
        #[arg(long)]
        partition: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Ordering of two trees with small dependent-set unions.
    OrderTrees {
        #[arg(long = "tree-p")]
        tree_p: PathBuf,
        #[arg(long = "tree-q")]
        tree_q: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Two-sample squared-Hellinger test on a variable subset.
    Subtest {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        /// Hellinger separation; the test threshold is `eps^2`.
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        eta: f64,
        /// Comma-separated column indices; all columns when omitted.
        #[arg(long, value_delimiter = ',')]
        set: Option<Vec<usize>>,
        #[arg(long, default_value_t = DEFAULT_PERMUTATIONS)]
        permutations: usize,
        #[arg(long = "sample-constant", default_value_t = DEFAULT_SAMPLE_CONSTANT)]
        sample_constant: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Identity test on a known common DAG.
    TestKnown {
        /// Model file; only structure and arities are read.
        #[arg(long)]
        dag: PathBuf,
        #[command(flatten)]
        tester: TesterArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Identity test on an unknown common DAG with bounded in-degree.
    TestUnknown {
        #[arg(long = "max-indegree")]
        max_indegree: usize,
        #[command(flatten)]
        tester: TesterArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Identity test for two unknown trees.
    TestTrees {
        #[command(flatten)]
        tester: TesterArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Goodness-of-fit of binary samples to a known product distribution.
    GofProduct {
        /// One mean per line.
        #[arg(long)]
        q: PathBuf,
        #[arg(long = "p-samples")]
        p_samples: PathBuf,
        #[arg(long)]
        eps: f64,
        #[arg(long, value_enum, default_value_t = Mode::Mc)]
        mode: Mode,
        #[arg(long, default_value_t = 10.0)]
        c: f64,
        #[arg(long = "c-prime", default_value_t = 15.0)]
        c_prime: f64,
        #[arg(long = "null-replicas", default_value_t = 500)]
        null_replicas: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Run a size or power experiment described by a JSON spec.
    Experiment {
        #[arg(long)]
        spec: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

fn open_out(out: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| Error::io(format!("creating {}", p.display()), e))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

/// Read two sample files and give both the larger inferred alphabet per column.
fn read_pair(a: &Path, b: &Path, arities: Option<&[usize]>) -> Result<(SampleSet, SampleSet)> {
    let sa = read_samples(a, arities)?;
    let sb = read_samples(b, arities)?;
    if sa.cols() != sb.cols() {
        return Err(Error::ShapeMismatch(format!(
            "{} has {} columns, {} has {}",
            a.display(),
            sa.cols(),
            b.display(),
            sb.cols()
        )));
    }
    if arities.is_some() {
        return Ok((sa, sb));
    }
    let k: Vec<usize> = sa.arities().iter().zip(sb.arities()).map(|(x, y)| *x.max(y)).collect();
    let widen = |s: SampleSet| SampleSet::with_names(k.clone(), s.names().to_vec(), s.data().to_vec());
    Ok((widen(sa)?, widen(sb)?))
}

#[derive(Deserialize)]
struct BlockEntry {
    set: Vec<usize>,
    #[serde(default)]
    cond: Vec<usize>,
}

fn read_partition(path: &Path, n: usize) -> Result<Factorization> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let entries: Vec<BlockEntry> =
        serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    let blocks = entries.into_iter().map(|b| Block::new(b.set, b.cond)).collect();
    Factorization::new(blocks, &(0..n).collect::<Vec<_>>())
}

fn union_dag(a: &Dag, b: &Dag) -> Result<Dag> {
    if a.n() != b.n() {
        return Err(Error::ScopeMismatch(format!("{} versus {} nodes", a.n(), b.n())));
    }
    let parents = (0..a.n())
        .map(|v| {
            let mut ps: Vec<usize> = a.parents(v).iter().chain(b.parents(v)).copied().collect();
            ps.sort_unstable();
            ps.dedup();
            ps
        })
        .collect();
    Dag::new(parents)
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Sample { model, count, common } => {
            let net = read_model(&model)?;
            let s = sample(&net, count, common.seed());
            write_samples(&s, open_out(common.out.as_deref())?)
        }
        Command::Divergence {
            model_p,
            model_q,
            common,
        } => {
            let p = joint_distribution(&read_model(&model_p)?)?;
            let q = joint_distribution(&read_model(&model_q)?)?;
            report::divergences(&all_divergences(&p, &q)?, open_out(common.out.as_deref())?)
        }
        Command::VerifySubadditivity {
            model_p,
            model_q,
            partition,
            common,
        } => {
            let (np, nq) = (read_model(&model_p)?, read_model(&model_q)?);
            let fact = match partition {
                Some(f) => read_partition(&f, np.n())?,
                None => neighborhood_factorization(&union_dag(np.dag(), nq.dag())?),
            };
            let (p, q) = (joint_distribution(&np)?, joint_distribution(&nq)?);
            let rep = decompose(&p, &q, &fact)?;
            report::decomposition(&fact, &rep, open_out(common.out.as_deref())?)
        }
        Command::OrderTrees { tree_p, tree_q, common } => {
            let (tp, tq) = (Tree::read(&tree_p)?, Tree::read(&tree_q)?);
            report::ordering(&order_two_trees(&tp, &tq)?, open_out(common.out.as_deref())?)
        }
        Command::Subtest {
            a,
            b,
            eps,
            eta,
            set,
            permutations,
            sample_constant,
            common,
        } => {
            let (sa, sb) = read_pair(&a, &b, None)?;
            let set = set.unwrap_or_else(|| (0..sa.cols()).collect());
            let cfg = SubtestConfig {
                permutations,
                calibration_seed: common.seed(),
                constant: sample_constant,
                ..SubtestConfig::new(eps * eps, eta)
            };
            let v = hellinger_subtest(&empirical_counts(&sa, &set)?, &empirical_counts(&sb, &set)?, &cfg)?;
            report::subtest(&v, open_out(common.out.as_deref())?)
        }
        Command::TestKnown { dag, tester, common } => {
            let (dag, arities) = read_dag(&dag)?;
            let (sp, sq) = read_pair(&tester.p_samples, &tester.q_samples, Some(&arities))?;
            let v = test_known_structure(&sp, &sq, &dag, &tester.config(common.seed()))?;
            report::verdict(&v, open_out(common.out.as_deref())?)
        }
        Command::TestUnknown {
            max_indegree,
            tester,
            common,
        } => {
            let (sp, sq) = read_pair(&tester.p_samples, &tester.q_samples, None)?;
            let v = test_unknown_structure(&sp, &sq, max_indegree, &tester.config(common.seed()))?;
            report::verdict(&v, open_out(common.out.as_deref())?)
        }
        Command::TestTrees { tester, common } => {
            let (sp, sq) = read_pair(&tester.p_samples, &tester.q_samples, None)?;
            let v = test_two_trees(&sp, &sq, &tester.config(common.seed()))?;
            report::verdict(&v, open_out(common.out.as_deref())?)
        }
        Command::GofProduct {
            q,
            p_samples,
            eps,
            mode,
            c,
            c_prime,
            null_replicas,
            common,
        } => {
            let text = std::fs::read_to_string(&q).map_err(|e| Error::io(format!("reading {}", q.display()), e))?;
            let model = ProductModel::parse(&text)?;
            let samples = read_samples(&p_samples, Some(&vec![2; model.n()]))?;
            let cfg = GofConfig {
                c,
                c_prime,
                seed: common.seed(),
                mode: match mode {
                    Mode::Chebyshev => ThresholdMode::Chebyshev,
                    Mode::Mc => ThresholdMode::MonteCarloNull,
                },
                null_replicas,
                ..GofConfig::new(eps)
            };
            report::gof(&gof_product(&samples, &model, &cfg)?, open_out(common.out.as_deref())?)
        }
        Command::Experiment { spec, common } => {
            let mut spec = ExperimentSpec::read(&spec)?;
            if let Some(s) = common.seed {
                spec.seed = s;
            }
            let out = common.out.clone().or_else(|| spec.output.clone());
            write_report(&run_experiment(&spec)?, open_out(out.as_deref())?)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
