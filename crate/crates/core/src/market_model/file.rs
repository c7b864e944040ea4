use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::{LocalTransitionSet, MeasureFamily, NodeRecord, Process, ScenarioTree};
use crate::error::{Error, Result};

pub const TREE_MODEL_KIND: &str = "tree_model";

#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    kind: String,
    horizon: usize,
    dim: usize,
    nodes: Vec<NodeEntry>,
    local_sets: IndexMap<String, Vec<Vec<f64>>>,
    payoff: IndexMap<String, f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct NodeEntry {
    id: String,
    t: usize,
    parent: Option<String>,
    succ: Vec<String>,
    #[serde(rename = "S")]
    price: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dt: Option<f64>,
}

/// Tree, measure family and payoff loaded from a `tree_model` file.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeModel {
    pub tree: ScenarioTree,
    pub family: MeasureFamily,
    pub payoff: Process,
}

/// Reads the `kind` tag and fails with [`Error::WrongKind`] unless it matches.
pub(crate) fn expect_kind(value: &serde_json::Value, expected: &str) -> Result<()> {
    let found = value
        .get("kind")
        .and_then(|k| k.as_str())
        .unwrap_or("<missing>");
    if found != expected {
        return Err(Error::WrongKind {
            expected: expected.into(),
            found: found.into(),
        });
    }
    Ok(())
}

pub(crate) fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_model(path: impl AsRef<Path>) -> Result<TreeModel> {
    parse_model(&read_file(path.as_ref())?)
}

pub fn parse_model(text: &str) -> Result<TreeModel> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    expect_kind(&value, TREE_MODEL_KIND)?;
    let file: ModelFile = serde_json::from_value(value)?;
    TreeModel::from_file(file)
}

impl TreeModel {
    pub fn new(tree: ScenarioTree, family: MeasureFamily, payoff: Process) -> Result<Self> {
        family.ensure_covers(&tree)?;
        if payoff.len() != tree.len() {
            return Err(Error::InvalidInput(
                "payoff length differs from node count".into(),
            ));
        }
        Ok(Self {
            tree,
            family,
            payoff,
        })
    }

    fn from_file(file: ModelFile) -> Result<Self> {
        let records = file
            .nodes
            .into_iter()
            .map(|n| NodeRecord {
                id: n.id,
                t: n.t,
                parent: n.parent,
                succ: n.succ,
                price: n.price,
                dt: n.dt,
            })
            .collect();
        let tree = ScenarioTree::from_records(file.horizon, file.dim, records)?;

        let mut sets = vec![None; tree.len()];
        for (id, extremes) in file.local_sets {
            let ix = tree
                .lookup(&id)
                .map_err(|_| Error::invariant(&id, "local set for unknown node"))?;
            if tree.is_terminal(ix) {
                return Err(Error::invariant(&id, "terminal node has a local set"));
            }
            let set = LocalTransitionSet::new(extremes, tree.succ(ix).len())
                .map_err(|rule| Error::invariant(&id, rule))?;
            sets[ix] = Some(set);
        }
        let family = MeasureFamily::new(&tree, sets)?;

        let mut payoff = vec![None; tree.len()];
        for (id, v) in file.payoff {
            let ix = tree
                .lookup(&id)
                .map_err(|_| Error::invariant(&id, "payoff for unknown node"))?;
            payoff[ix] = Some(v);
        }
        let payoff = payoff
            .into_iter()
            .enumerate()
            .map(|(ix, v)| v.ok_or_else(|| Error::invariant(tree.id(ix), "payoff missing")))
            .collect::<Result<Vec<_>>>()?;
        let payoff = Process::new(&tree, payoff)?;
        Self::new(tree, family, payoff)
    }

    fn to_file(&self) -> ModelFile {
        let tree = &self.tree;
        let nodes = tree
            .nodes()
            .iter()
            .map(|n| NodeEntry {
                id: n.id.clone(),
                t: n.t,
                parent: n.parent.map(|p| tree.id(p).to_string()),
                succ: n.succ.iter().map(|&s| tree.id(s).to_string()).collect(),
                price: n.price.clone(),
                dt: n.dt,
            })
            .collect();
        let local_sets = tree
            .non_terminal()
            .map(|ix| (tree.id(ix).to_string(), self.family.extremes(ix).to_vec()))
            .collect();
        let payoff = (0..tree.len())
            .map(|ix| (tree.id(ix).to_string(), self.payoff[ix]))
            .collect();
        ModelFile {
            kind: TREE_MODEL_KIND.into(),
            horizon: tree.horizon(),
            dim: tree.dim(),
            nodes,
            local_sets,
            payoff,
        }
    }

    /// Serializes to the `tree_model` JSON layout, keys in schema order.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("model serializes")
    }
}
