//! Finite scenario-tree market model.
//!
//! A [`ScenarioTree`] is the discrete carrier of everything else in the crate: every
//! node carries a price vector in `R^d` and a time increment to its successors. Uncertainty
//! about the transition law is described node-wise by a [`MeasureFamily`], a finite list
//! of extreme transition vectors per non-terminal node. Because the family is rectangular
//! (chosen independently per node), conditioning on a subtree and pasting measures together
//! never leaves the family.

pub(crate) mod file;

use std::collections::HashMap;

use crate::error::{Error, Result};

pub use file::{load_model, parse_model, TreeModel};

/// Index of a node inside its [`ScenarioTree`].
pub type NodeIx = usize;

/// Tolerance used to validate probability vectors.
pub const PROB_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: String,
    pub t: usize,
    pub parent: Option<NodeIx>,
    pub succ: Vec<NodeIx>,
    pub price: Vec<f64>,
    /// Time increment to the successors; `None` on terminal nodes.
    pub dt: Option<f64>,
}

/// Raw node description, as found in a model file.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeRecord {
    pub id: String,
    pub t: usize,
    pub parent: Option<String>,
    pub succ: Vec<String>,
    pub price: Vec<f64>,
    pub dt: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioTree {
    horizon: usize,
    dim: usize,
    nodes: Vec<Node>,
    index: HashMap<String, NodeIx>,
    root: NodeIx,
    slices: Vec<Vec<NodeIx>>,
}

impl ScenarioTree {
    /// Builds and validates a tree from node records. Successor order is preserved;
    /// a missing `dt` on a non-terminal node defaults to 1.0.
    pub fn from_records(horizon: usize, dim: usize, records: Vec<NodeRecord>) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::InvalidInput("horizon must be at least 1".into()));
        }
        if dim == 0 {
            return Err(Error::InvalidInput("dim must be at least 1".into()));
        }
        let mut index = HashMap::with_capacity(records.len());
        for (ix, r) in records.iter().enumerate() {
            if index.insert(r.id.clone(), ix).is_some() {
                return Err(Error::invariant(&r.id, "duplicate node id"));
            }
        }
        let lookup = |owner: &str, id: &str| -> Result<NodeIx> {
            index
                .get(id)
                .copied()
                .ok_or_else(|| Error::invariant(owner, format!("references unknown node `{id}`")))
        };

        let mut nodes = Vec::with_capacity(records.len());
        for r in &records {
            let parent = r.parent.as_deref().map(|p| lookup(&r.id, p)).transpose()?;
            let succ = r
                .succ
                .iter()
                .map(|s| lookup(&r.id, s))
                .collect::<Result<Vec<_>>>()?;
            let dt = if succ.is_empty() {
                None
            } else {
                Some(r.dt.unwrap_or(1.0))
            };
            nodes.push(Node {
                id: r.id.clone(),
                t: r.t,
                parent,
                succ,
                price: r.price.clone(),
                dt,
            });
        }
        Self::from_nodes(horizon, dim, nodes, index)
    }

    fn from_nodes(
        horizon: usize,
        dim: usize,
        nodes: Vec<Node>,
        index: HashMap<String, NodeIx>,
    ) -> Result<Self> {
        let roots: Vec<NodeIx> = (0..nodes.len())
            .filter(|&ix| nodes[ix].parent.is_none())
            .collect();
        let root = match roots.as_slice() {
            [r] => *r,
            [] => return Err(Error::invariant("<tree>", "no root node")),
            [_, second, ..] => {
                return Err(Error::invariant(&nodes[*second].id, "more than one root"))
            }
        };

        for node in &nodes {
            let id = &node.id;
            if node.price.len() != dim {
                return Err(Error::invariant(
                    id,
                    format!(
                        "price has {} entries, expected dim = {dim}",
                        node.price.len()
                    ),
                ));
            }
            if node.price.iter().any(|s| !s.is_finite()) {
                return Err(Error::invariant(id, "price is not finite"));
            }
            if node.t > horizon {
                return Err(Error::invariant(id, "time exceeds horizon"));
            }
            if node.parent.is_none() && node.t != 0 {
                return Err(Error::invariant(id, "root must sit at t = 0"));
            }
            if node.t < horizon && node.succ.is_empty() {
                return Err(Error::invariant(
                    id,
                    "node before the horizon has no successor",
                ));
            }
            if node.t == horizon && !node.succ.is_empty() {
                return Err(Error::invariant(id, "node at the horizon has successors"));
            }
            if let Some(dt) = node.dt {
                if !(dt.is_finite() && dt > 0.0) {
                    return Err(Error::invariant(id, "dt must be positive and finite"));
                }
            }
        }
        for (ix, node) in nodes.iter().enumerate() {
            for &s in &node.succ {
                let child = &nodes[s];
                if child.parent != Some(ix) {
                    return Err(Error::invariant(
                        &child.id,
                        format!(
                            "listed as successor of `{}` but its parent differs",
                            node.id
                        ),
                    ));
                }
                if child.t != node.t + 1 {
                    return Err(Error::invariant(
                        &child.id,
                        "successor time must be parent time + 1",
                    ));
                }
            }
            if let Some(p) = node.parent {
                if !nodes[p].succ.contains(&ix) {
                    return Err(Error::invariant(
                        &node.id,
                        format!("parent `{}` does not list it as successor", nodes[p].id),
                    ));
                }
            }
        }

        // Reachability: walk from the root.
        let mut seen = vec![false; nodes.len()];
        let mut stack = vec![root];
        while let Some(ix) = stack.pop() {
            if std::mem::replace(&mut seen[ix], true) {
                return Err(Error::invariant(&nodes[ix].id, "node reached twice"));
            }
            stack.extend(nodes[ix].succ.iter().copied());
        }
        if let Some(ix) = seen.iter().position(|s| !s) {
            return Err(Error::invariant(
                &nodes[ix].id,
                "not reachable from the root",
            ));
        }

        let mut slices = vec![Vec::new(); horizon + 1];
        for (ix, node) in nodes.iter().enumerate() {
            slices[node.t].push(ix);
        }
        Ok(Self {
            horizon,
            dim,
            nodes,
            index,
            root,
            slices,
        })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn root(&self) -> NodeIx {
        self.root
    }

    pub fn node(&self, ix: NodeIx) -> &Node {
        &self.nodes[ix]
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn id(&self, ix: NodeIx) -> &str {
        &self.nodes[ix].id
    }

    pub fn lookup(&self, id: &str) -> Result<NodeIx> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| Error::UnknownNode(id.to_string()))
    }

    pub fn succ(&self, ix: NodeIx) -> &[NodeIx] {
        &self.nodes[ix].succ
    }

    pub fn is_terminal(&self, ix: NodeIx) -> bool {
        self.nodes[ix].succ.is_empty()
    }

    pub fn price(&self, ix: NodeIx) -> &[f64] {
        &self.nodes[ix].price
    }

    /// `dt` of a non-terminal node, 0 on terminal nodes.
    pub fn dt(&self, ix: NodeIx) -> f64 {
        self.nodes[ix].dt.unwrap_or(0.0)
    }

    /// Nodes at time `t`.
    pub fn slice(&self, t: usize) -> &[NodeIx] {
        &self.slices[t]
    }

    pub fn leaves(&self) -> &[NodeIx] {
        &self.slices[self.horizon]
    }

    pub fn non_terminal(&self) -> impl Iterator<Item = NodeIx> + '_ {
        (0..self.nodes.len()).filter(move |&ix| !self.is_terminal(ix))
    }

    /// Non-terminal nodes ordered from the last slice back to the root.
    pub fn backward(&self) -> impl Iterator<Item = NodeIx> + '_ {
        self.slices[..self.horizon]
            .iter()
            .rev()
            .flat_map(|s| s.iter().copied())
    }

    /// Price increments `S_succ - S_node` for every successor, in successor order.
    pub fn increments(&self, ix: NodeIx) -> Vec<Vec<f64>> {
        let s = self.price(ix);
        self.succ(ix)
            .iter()
            .map(|&c| self.price(c).iter().zip(s).map(|(a, b)| a - b).collect())
            .collect()
    }

    /// Root-to-node path, both ends included.
    pub fn path(&self, ix: NodeIx) -> Vec<NodeIx> {
        let mut path = vec![ix];
        let mut cur = ix;
        while let Some(p) = self.nodes[cur].parent {
            path.push(p);
            cur = p;
        }
        path.reverse();
        path
    }

    pub fn ancestor_at(&self, ix: NodeIx, t: usize) -> Option<NodeIx> {
        let mut cur = ix;
        if self.nodes[cur].t < t {
            return None;
        }
        while self.nodes[cur].t > t {
            cur = self.nodes[cur].parent?;
        }
        Some(cur)
    }

    /// All nodes of the subtree rooted at `ix`, in preorder.
    pub fn subtree(&self, ix: NodeIx) -> Vec<NodeIx> {
        let mut out = Vec::new();
        let mut stack = vec![ix];
        while let Some(n) = stack.pop() {
            out.push(n);
            stack.extend(self.succ(n).iter().rev().copied());
        }
        out
    }

    /// Largest total remaining time `sum dt` along any path from `ix` to a leaf.
    pub fn remaining_time(&self, ix: NodeIx) -> f64 {
        if self.is_terminal(ix) {
            return 0.0;
        }
        let tail = self
            .succ(ix)
            .iter()
            .map(|&c| self.remaining_time(c))
            .fold(0.0, f64::max);
        self.dt(ix) + tail
    }
}

/// Incremental construction of trees with generated node ids.
///
/// The root gets id `"0"`; the `k`-th child of node `p` gets id `"{p}.{k}"`.
#[derive(Debug, Clone)]
pub struct TreeBuilder {
    dim: usize,
    nodes: Vec<Node>,
}

impl TreeBuilder {
    pub fn new(root_price: Vec<f64>) -> Self {
        Self {
            dim: root_price.len(),
            nodes: vec![Node {
                id: "0".into(),
                t: 0,
                parent: None,
                succ: Vec::new(),
                price: root_price,
                dt: None,
            }],
        }
    }

    pub fn root(&self) -> NodeIx {
        0
    }

    /// Adds a successor of `parent` and sets `parent`'s time increment to `dt`.
    pub fn child(&mut self, parent: NodeIx, price: Vec<f64>, dt: f64) -> NodeIx {
        let ix = self.nodes.len();
        let k = self.nodes[parent].succ.len();
        let id = format!("{}.{k}", self.nodes[parent].id);
        let t = self.nodes[parent].t + 1;
        self.nodes[parent].succ.push(ix);
        self.nodes[parent].dt = Some(dt);
        self.nodes.push(Node {
            id,
            t,
            parent: Some(parent),
            succ: Vec::new(),
            price,
            dt: None,
        });
        ix
    }

    pub fn price(&self, ix: NodeIx) -> &[f64] {
        &self.nodes[ix].price
    }

    pub fn time(&self, ix: NodeIx) -> usize {
        self.nodes[ix].t
    }

    pub fn build(self) -> Result<ScenarioTree> {
        let horizon = self.nodes.iter().map(|n| n.t).max().unwrap_or(0);
        let index = self
            .nodes
            .iter()
            .enumerate()
            .map(|(ix, n)| (n.id.clone(), ix))
            .collect();
        ScenarioTree::from_nodes(horizon, self.dim, self.nodes, index)
    }
}

/// Scalar process indexed by node, e.g. a payoff or an envelope.
#[derive(Debug, Clone, PartialEq)]
pub struct Process {
    values: Vec<f64>,
}

impl Process {
    pub fn new(tree: &ScenarioTree, values: Vec<f64>) -> Result<Self> {
        if values.len() != tree.len() {
            return Err(Error::InvalidInput(format!(
                "process has {} values for {} nodes",
                values.len(),
                tree.len()
            )));
        }
        if let Some(ix) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invariant(tree.id(ix), "process value is not finite"));
        }
        Ok(Self { values })
    }

    pub fn from_fn(tree: &ScenarioTree, f: impl FnMut(NodeIx) -> f64) -> Self {
        Self {
            values: (0..tree.len()).map(f).collect(),
        }
    }

    pub fn constant(tree: &ScenarioTree, c: f64) -> Self {
        Self {
            values: vec![c; tree.len()],
        }
    }

    pub(crate) fn zeros(len: usize) -> Self {
        Self {
            values: vec![0.0; len],
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl std::ops::Index<NodeIx> for Process {
    type Output = f64;

    fn index(&self, ix: NodeIx) -> &f64 {
        &self.values[ix]
    }
}

impl std::ops::IndexMut<NodeIx> for Process {
    fn index_mut(&mut self, ix: NodeIx) -> &mut f64 {
        &mut self.values[ix]
    }
}

/// Predictable `R^d`-valued process, defined on non-terminal nodes (hedge ratios).
#[derive(Debug, Clone, PartialEq)]
pub struct Strategy {
    holdings: Vec<Option<Vec<f64>>>,
}

impl Strategy {
    pub fn new(tree: &ScenarioTree, holdings: Vec<Option<Vec<f64>>>) -> Result<Self> {
        if holdings.len() != tree.len() {
            return Err(Error::InvalidInput(
                "strategy length differs from node count".into(),
            ));
        }
        for ix in tree.non_terminal() {
            match &holdings[ix] {
                None => {
                    return Err(Error::invariant(
                        tree.id(ix),
                        "strategy missing at non-terminal node",
                    ))
                }
                Some(z) if z.len() != tree.dim() => {
                    return Err(Error::invariant(
                        tree.id(ix),
                        "strategy has wrong dimension",
                    ))
                }
                Some(z) if z.iter().any(|v| !v.is_finite()) => {
                    return Err(Error::invariant(
                        tree.id(ix),
                        "strategy value is not finite",
                    ))
                }
                Some(_) => {}
            }
        }
        Ok(Self { holdings })
    }

    pub fn zeros(tree: &ScenarioTree) -> Self {
        Self {
            holdings: (0..tree.len())
                .map(|ix| (!tree.is_terminal(ix)).then(|| vec![0.0; tree.dim()]))
                .collect(),
        }
    }

    pub fn get(&self, ix: NodeIx) -> Option<&[f64]> {
        self.holdings[ix].as_deref()
    }

    /// Holdings at a non-terminal node.
    pub fn at(&self, ix: NodeIx) -> &[f64] {
        self.holdings[ix]
            .as_deref()
            .expect("strategy queried at a terminal node")
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Checks nonnegativity and unit mass within [`PROB_TOL`].
pub fn check_probability(p: &[f64], len: usize) -> std::result::Result<(), String> {
    if p.len() != len {
        return Err(format!(
            "probability vector has {} entries for {len} successors",
            p.len()
        ));
    }
    if p.iter().any(|&w| !w.is_finite() || w < -PROB_TOL) {
        return Err("probability vector has a negative or non-finite entry".into());
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > PROB_TOL {
        return Err(format!("probabilities sum to {sum}, not 1"));
    }
    Ok(())
}

/// Finite set of extreme transition vectors at one node.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalTransitionSet {
    extremes: Vec<Vec<f64>>,
}

impl LocalTransitionSet {
    pub fn new(extremes: Vec<Vec<f64>>, successors: usize) -> std::result::Result<Self, String> {
        if extremes.is_empty() {
            return Err("local transition set is empty".into());
        }
        for p in &extremes {
            check_probability(p, successors)?;
        }
        Ok(Self { extremes })
    }

    pub fn extremes(&self) -> &[Vec<f64>] {
        &self.extremes
    }

    pub fn len(&self) -> usize {
        self.extremes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.extremes.is_empty()
    }

    /// Maximum of `p . values` over the extremes, i.e. over the convex hull.
    pub fn sup_expectation(&self, values: impl Fn(usize) -> f64) -> f64 {
        self.extremes
            .iter()
            .map(|p| {
                p.iter()
                    .enumerate()
                    .map(|(i, w)| w * values(i))
                    .sum::<f64>()
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        self.extremes
            .iter()
            .any(|e| e.len() == p.len() && e.iter().zip(p).all(|(a, b)| (a - b).abs() <= PROB_TOL))
    }
}

/// Rectangular measure family: one [`LocalTransitionSet`] per non-terminal node of the
/// subtree rooted at [`MeasureFamily::root`].
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureFamily {
    root: NodeIx,
    sets: Vec<Option<LocalTransitionSet>>,
}

impl MeasureFamily {
    pub fn new(tree: &ScenarioTree, sets: Vec<Option<LocalTransitionSet>>) -> Result<Self> {
        if sets.len() != tree.len() {
            return Err(Error::InvalidInput(
                "family length differs from node count".into(),
            ));
        }
        for (ix, set) in sets.iter().enumerate() {
            match (set, tree.is_terminal(ix)) {
                (None, false) => {
                    return Err(Error::invariant(tree.id(ix), "no local transition set"))
                }
                (Some(_), true) => {
                    return Err(Error::invariant(
                        tree.id(ix),
                        "terminal node has a local set",
                    ))
                }
                (Some(s), false) => {
                    for p in s.extremes() {
                        check_probability(p, tree.succ(ix).len())
                            .map_err(|rule| Error::invariant(tree.id(ix), rule))?;
                    }
                }
                (None, true) => {}
            }
        }
        Ok(Self {
            root: tree.root(),
            sets,
        })
    }

    /// Builds a family from per-node extreme lists, validating each one.
    pub fn from_fn(
        tree: &ScenarioTree,
        mut f: impl FnMut(NodeIx) -> Vec<Vec<f64>>,
    ) -> Result<Self> {
        let mut sets = vec![None; tree.len()];
        for ix in tree.non_terminal() {
            let set = LocalTransitionSet::new(f(ix), tree.succ(ix).len())
                .map_err(|rule| Error::invariant(tree.id(ix), rule))?;
            sets[ix] = Some(set);
        }
        Self::new(tree, sets)
    }

    /// The family containing exactly one measure.
    pub fn singleton(tree: &ScenarioTree, measure: &Measure) -> Result<Self> {
        Self::from_fn(tree, |ix| vec![measure.transition(ix).to_vec()])
    }

    pub fn root(&self) -> NodeIx {
        self.root
    }

    pub fn local(&self, ix: NodeIx) -> Option<&LocalTransitionSet> {
        self.sets[ix].as_ref()
    }

    /// Extremes at a covered node. Panics if the node has no local set.
    pub fn extremes(&self, ix: NodeIx) -> &[Vec<f64>] {
        self.sets[ix]
            .as_ref()
            .map(LocalTransitionSet::extremes)
            .expect("node not covered by the measure family")
    }

    /// Fails unless the family covers every non-terminal node of `tree`.
    pub fn ensure_covers(&self, tree: &ScenarioTree) -> Result<()> {
        if self.sets.len() != tree.len() {
            return Err(Error::InvalidInput(
                "family built for a different tree".into(),
            ));
        }
        match tree.non_terminal().find(|&ix| self.sets[ix].is_none()) {
            Some(ix) => Err(Error::invariant(tree.id(ix), "no local transition set")),
            None => Ok(()),
        }
    }

    /// Restriction to the subtree rooted at `node`.
    pub fn condition(&self, tree: &ScenarioTree, node: NodeIx) -> Result<Self> {
        if node >= tree.len() {
            return Err(Error::UnknownNode(node.to_string()));
        }
        let mut sets = vec![None; tree.len()];
        for ix in tree.subtree(node) {
            if !tree.is_terminal(ix) {
                let set = self.sets[ix]
                    .clone()
                    .ok_or_else(|| Error::invariant(tree.id(ix), "no local transition set"))?;
                sets[ix] = Some(set);
            }
        }
        Ok(Self { root: node, sets })
    }

    /// True iff every selection of `measure` inside this family's subtree is one of the
    /// family's extremes.
    pub fn contains_extremes(&self, tree: &ScenarioTree, measure: &Measure) -> bool {
        tree.subtree(self.root)
            .into_iter()
            .filter(|&ix| !tree.is_terminal(ix))
            .all(|ix| match (&self.sets[ix], measure.get(ix)) {
                (Some(set), Some(p)) => set.contains(p),
                _ => false,
            })
    }

    /// Number of measures that select an extreme at every covered node.
    pub fn extreme_selection_count(&self) -> u128 {
        self.sets
            .iter()
            .flatten()
            .fold(1u128, |acc, s| acc.saturating_mul(s.len() as u128))
    }

    /// Measure selecting extreme `choice(ix)` at every covered node.
    pub fn select(&self, mut choice: impl FnMut(NodeIx) -> usize) -> Measure {
        Measure {
            selection: self
                .sets
                .iter()
                .enumerate()
                .map(|(ix, s)| {
                    s.as_ref().map(|s| {
                        let k = choice(ix).min(s.len() - 1);
                        s.extremes()[k].clone()
                    })
                })
                .collect(),
        }
    }
}

/// A single law: one transition vector per non-terminal node.
#[derive(Debug, Clone, PartialEq)]
pub struct Measure {
    selection: Vec<Option<Vec<f64>>>,
}

impl Measure {
    /// Validates every present selection; `None` entries are allowed so that measures on
    /// subtrees can be expressed.
    pub fn new(tree: &ScenarioTree, selection: Vec<Option<Vec<f64>>>) -> Result<Self> {
        if selection.len() != tree.len() {
            return Err(Error::InvalidInput(
                "measure length differs from node count".into(),
            ));
        }
        for (ix, p) in selection.iter().enumerate() {
            if let Some(p) = p {
                if tree.is_terminal(ix) {
                    return Err(Error::invariant(
                        tree.id(ix),
                        "terminal node has a transition",
                    ));
                }
                check_probability(p, tree.succ(ix).len())
                    .map_err(|rule| Error::invariant(tree.id(ix), rule))?;
            }
        }
        Ok(Self { selection })
    }

    /// Measure with the same transition vector-generating rule at every node.
    pub fn from_fn(tree: &ScenarioTree, mut f: impl FnMut(NodeIx) -> Vec<f64>) -> Result<Self> {
        let selection = (0..tree.len())
            .map(|ix| (!tree.is_terminal(ix)).then(|| f(ix)))
            .collect();
        Self::new(tree, selection)
    }

    pub fn get(&self, ix: NodeIx) -> Option<&[f64]> {
        self.selection[ix].as_deref()
    }

    /// Transition vector at a non-terminal node. Panics if the measure has no selection there.
    pub fn transition(&self, ix: NodeIx) -> &[f64] {
        self.selection[ix]
            .as_deref()
            .expect("measure has no transition at this node")
    }

    pub fn ensure_total(&self, tree: &ScenarioTree) -> Result<()> {
        match tree.non_terminal().find(|&ix| self.selection[ix].is_none()) {
            Some(ix) => Err(Error::invariant(
                tree.id(ix),
                "measure has no transition here",
            )),
            None => Ok(()),
        }
    }

    /// Restriction to the subtree rooted at `node`.
    pub fn restrict(&self, tree: &ScenarioTree, node: NodeIx) -> Measure {
        let mut selection = vec![None; self.selection.len()];
        for ix in tree.subtree(node) {
            selection[ix] = self.selection[ix].clone();
        }
        Measure { selection }
    }

    /// `E[values at successors | node]` under this measure.
    pub fn expect(&self, tree: &ScenarioTree, ix: NodeIx, values: &Process) -> f64 {
        let p = self.transition(ix);
        tree.succ(ix)
            .iter()
            .zip(p)
            .map(|(&c, w)| w * values[c])
            .sum()
    }
}

/// Uses `outer` before time `t` and, from `t` on, the kernel entry of the time-`t`
/// ancestor. `kernel` maps every node at time `t` to a measure on its subtree.
pub fn paste(
    tree: &ScenarioTree,
    outer: &Measure,
    t: usize,
    kernel: &HashMap<NodeIx, Measure>,
) -> Result<Measure> {
    if t > tree.horizon() {
        return Err(Error::InvalidInput(format!(
            "paste time {t} outside 0..={}",
            tree.horizon()
        )));
    }
    let mut selection = vec![None; tree.len()];
    for ix in tree.non_terminal() {
        let node_t = tree.node(ix).t;
        let p = if node_t < t {
            outer.get(ix).ok_or_else(|| {
                Error::invariant(
                    tree.id(ix),
                    "outer measure has no transition before paste time",
                )
            })?
        } else {
            let anchor = tree
                .ancestor_at(ix, t)
                .expect("node at or after t has an ancestor at t");
            let inner = kernel.get(&anchor).ok_or_else(|| {
                Error::invariant(tree.id(anchor), "kernel has no entry for this node")
            })?;
            inner.get(ix).ok_or_else(|| {
                Error::invariant(
                    tree.id(ix),
                    "kernel measure has no transition on its subtree",
                )
            })?
        };
        check_probability(p, tree.succ(ix).len())
            .map_err(|rule| Error::invariant(tree.id(ix), rule))?;
        selection[ix] = Some(p.to_vec());
    }
    Ok(Measure { selection })
}

/// Probability of reaching `leaf` under `measure`: product of selected weights along
/// the root-to-leaf path.
pub fn path_probability(tree: &ScenarioTree, measure: &Measure, leaf: NodeIx) -> Result<f64> {
    if !tree.is_terminal(leaf) {
        return Err(Error::invariant(
            tree.id(leaf),
            "path probability needs a terminal node",
        ));
    }
    Ok(node_probability(tree, measure, leaf))
}

/// Probability of passing through `ix` under `measure`.
pub fn node_probability(tree: &ScenarioTree, measure: &Measure, ix: NodeIx) -> f64 {
    let path = tree.path(ix);
    path.windows(2)
        .map(|w| {
            let k = tree
                .succ(w[0])
                .iter()
                .position(|&c| c == w[1])
                .expect("path edge");
            measure.transition(w[0])[k]
        })
        .product()
}
