//! Model (JSON) and sample (CSV) files.
//!
//! Model file:
//!
//! ```json
//! {"nodes": [{"name": "A", "arity": 2, "parents": [], "cpt": [[0.3, 0.7]]},
//!            {"name": "B", "arity": 2, "parents": [0], "cpt": [[0.9, 0.1], [0.2, 0.8]]}]}
//! ```
//!
//! CPT rows are indexed by the parent configuration in mixed-radix order over
//! the parents sorted by ascending node index. `cpt` may be omitted when only
//! the structure is needed ([`read_dag`]).

use std::fs::File;
use std::io::{BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{BayesNet, Dag, SampleSet};
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    nodes: Vec<NodeEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct NodeEntry {
    name: String,
    arity: usize,
    #[serde(default)]
    parents: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cpt: Option<Vec<Vec<f64>>>,
}

fn parse_model_file(path: &Path) -> Result<ModelFile> {
    let file = File::open(path).map_err(|e| Error::io(format!("opening {}", path.display()), e))?;
    serde_json::from_reader(BufReader::new(file))
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

fn structure(model: &ModelFile) -> Result<(Dag, Vec<usize>)> {
    let parents = model.nodes.iter().map(|n| n.parents.clone()).collect();
    let labels = model.nodes.iter().map(|n| n.name.clone()).collect();
    let arities = model.nodes.iter().map(|n| n.arity).collect();
    Ok((Dag::with_labels(parents, labels)?, arities))
}

impl BayesNet {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let model: ModelFile =
            serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        from_model(model)
    }

    pub fn to_json_string(&self) -> String {
        let nodes = (0..self.n())
            .map(|v| {
                let cpt = self.cpt(v);
                NodeEntry {
                    name: self.dag().labels()[v].clone(),
                    arity: self.arities()[v],
                    parents: self.dag().parents(v).to_vec(),
                    cpt: Some((0..cpt.rows()).map(|r| cpt.row(r).to_vec()).collect()),
                }
            })
            .collect();
        serde_json::to_string_pretty(&ModelFile { nodes }).expect("model serializes")
    }
}

fn from_model(model: ModelFile) -> Result<BayesNet> {
    let (dag, arities) = structure(&model)?;
    let cpts = model
        .nodes
        .into_iter()
        .map(|n| {
            n.cpt
                .ok_or_else(|| Error::InvalidModel(format!("node {} has no cpt", n.name)))
        })
        .collect::<Result<Vec<_>>>()?;
    BayesNet::new(dag, arities, cpts)
}

/// Read a full model file.
pub fn read_model(path: impl AsRef<Path>) -> Result<BayesNet> {
    from_model(parse_model_file(path.as_ref())?)
}

/// Read only the structure (and arities) of a model file.
pub fn read_dag(path: impl AsRef<Path>) -> Result<(Dag, Vec<usize>)> {
    structure(&parse_model_file(path.as_ref())?)
}

pub fn write_model(net: &BayesNet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, net.to_json_string())
        .map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// Write samples as CSV with a header of node names.
pub fn write_samples<W: Write>(samples: &SampleSet, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Parse(e.to_string());
    w.write_record(samples.names()).map_err(csv_err)?;
    for r in 0..samples.rows() {
        w.write_record(samples.row(r).iter().map(|x| x.to_string()))
            .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io("flushing samples", e))
}

/// Read a sample CSV. Without `arities`, each column's alphabet is inferred
/// as one more than its largest symbol.
pub fn read_samples(path: impl AsRef<Path>, arities: Option<&[usize]>) -> Result<SampleSet> {
    let path = path.as_ref();
    let mut rdr = csv::Reader::from_path(path)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    let names: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();
    let cols = names.len();
    let mut data = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        if rec.len() != cols {
            return Err(Error::ShapeMismatch(format!(
                "{} row {}: {} fields, header has {cols}",
                path.display(),
                i + 1,
                rec.len()
            )));
        }
        for field in rec.iter() {
            let x: u32 = field.trim().parse().map_err(|_| {
                Error::Parse(format!("{} row {}: bad symbol {field:?}", path.display(), i + 1))
            })?;
            data.push(x);
        }
    }
    let arities = match arities {
        Some(a) => {
            if a.len() != cols {
                return Err(Error::ShapeMismatch(format!(
                    "{} has {cols} columns, model has {}",
                    path.display(),
                    a.len()
                )));
            }
            a.to_vec()
        }
        None => {
            let mut a = vec![1usize; cols];
            for (i, &x) in data.iter().enumerate() {
                a[i % cols] = a[i % cols].max(x as usize + 1);
            }
            a
        }
    };
    SampleSet::with_names(arities, names, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bn::{chain, sample};
    use rand::SeedableRng;

    #[test]
    fn model_json_round_trip() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let net = BayesNet::random(chain(3), vec![2, 3, 2], &mut rng).unwrap();
        let back = BayesNet::from_json_str(&net.to_json_string()).unwrap();
        assert_eq!(net, back);
    }

    #[test]
    fn missing_cpt_is_an_error_for_models_only() {
        let s = r#"{"nodes":[{"name":"a","arity":2,"parents":[]}]}"#;
        assert!(BayesNet::from_json_str(s).is_err());
        let dir = std::env::temp_dir().join(format!("hbn-io-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let p = dir.join("dag.json");
        std::fs::write(&p, s).unwrap();
        let (dag, ar) = read_dag(&p).unwrap();
        assert_eq!(dag.n(), 1);
        assert_eq!(ar, vec![2]);
    }

    #[test]
    fn samples_csv_round_trip() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let net = BayesNet::random(chain(3), vec![2, 3, 2], &mut rng).unwrap();
        let s = sample(&net, 25, 1);
        let dir = std::env::temp_dir().join(format!("hbn-io-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let p = dir.join("s.csv");
        write_samples(&s, File::create(&p).unwrap()).unwrap();
        let back = read_samples(&p, Some(net.arities())).unwrap();
        assert_eq!(s, back);
    }
}
