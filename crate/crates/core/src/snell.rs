//! Snell envelopes on scenario trees.
//!
//! [`classical_snell`] solves the optimal stopping problem under one measure. [`robust_snell`]
//! replaces the conditional expectation by its maximum over the node's local transition set;
//! on a rectangular family this is the aggregated envelope, and its root equals the
//! double supremum over measures and exercise rules computed by [`brute_force_value`].

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::market_model::{Measure, MeasureFamily, NodeIx, Process, ScenarioTree};

/// Default bound on `#extreme selections * #exercise rules` for [`brute_force_value`].
pub const DEFAULT_BRUTE_FORCE_CAP: u128 = 10_000_000;

/// Slack used by the supermartingale checks.
pub const SUPERMARTINGALE_TOL: f64 = 1e-9;

/// Relative tolerance for first contact `Y = xi`.
pub const CONTACT_TOL: f64 = 1e-9;

/// Stop/continue flag per node. Terminal nodes always stop; the induced stopping time is
/// the first stopping node along each path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExerciseRule {
    stop: Vec<bool>,
}

impl ExerciseRule {
    pub fn new(tree: &ScenarioTree, mut stop: Vec<bool>) -> Result<Self> {
        if stop.len() != tree.len() {
            return Err(Error::InvalidInput(
                "rule length differs from node count".into(),
            ));
        }
        for &leaf in tree.leaves() {
            stop[leaf] = true;
        }
        Ok(Self { stop })
    }

    /// Rule stopping exactly on the given nodes (plus all leaves).
    pub fn from_nodes(tree: &ScenarioTree, nodes: &[NodeIx]) -> Self {
        let mut stop = vec![false; tree.len()];
        for &n in nodes.iter().chain(tree.leaves()) {
            stop[n] = true;
        }
        Self { stop }
    }

    pub fn stops(&self, ix: NodeIx) -> bool {
        self.stop[ix]
    }

    /// Nodes where the induced stopping time fires, i.e. first stopping node per path.
    pub fn exercise_nodes(&self, tree: &ScenarioTree) -> Vec<NodeIx> {
        let mut out = Vec::new();
        let mut stack = vec![tree.root()];
        while let Some(n) = stack.pop() {
            if self.stop[n] {
                out.push(n);
            } else {
                stack.extend(tree.succ(n).iter().rev().copied());
            }
        }
        out
    }

    /// `E[xi_tau]` under `measure`.
    pub fn expected_payoff(&self, tree: &ScenarioTree, measure: &Measure, xi: &Process) -> f64 {
        fn go(
            rule: &ExerciseRule,
            tree: &ScenarioTree,
            m: &Measure,
            xi: &Process,
            n: NodeIx,
        ) -> f64 {
            if rule.stop[n] {
                return xi[n];
            }
            tree.succ(n)
                .iter()
                .zip(m.transition(n))
                .map(|(&c, w)| w * go(rule, tree, m, xi, c))
                .sum()
        }
        go(self, tree, measure, xi, tree.root())
    }
}

/// Snell envelope of `xi` under a single measure.
pub fn classical_snell(tree: &ScenarioTree, measure: &Measure, xi: &Process) -> Result<Process> {
    measure.ensure_total(tree)?;
    let mut y = xi.clone();
    for ix in tree.backward() {
        let cont = measure.expect(tree, ix, &y);
        y[ix] = xi[ix].max(cont);
    }
    Ok(y)
}

/// Aggregated envelope: `Y = max(xi, max over local extremes of E[Y_next])`.
pub fn robust_snell(tree: &ScenarioTree, family: &MeasureFamily, xi: &Process) -> Result<Process> {
    family.ensure_covers(tree)?;
    let mut y = xi.clone();
    for ix in tree.backward() {
        let cont = robust_continuation(tree, family, &y, ix);
        y[ix] = xi[ix].max(cont);
    }
    Ok(y)
}

/// `max over extremes p of sum_i p_i values[succ_i]` at a covered node.
pub fn robust_continuation(
    tree: &ScenarioTree,
    family: &MeasureFamily,
    values: &Process,
    ix: NodeIx,
) -> f64 {
    let succ = tree.succ(ix);
    family
        .local(ix)
        .expect("node covered by the family")
        .sup_expectation(|i| values[succ[i]])
}

/// Stop at first contact `|Y - xi| <= 1e-9 (1 + |xi|)`.
pub fn optimal_exercise(tree: &ScenarioTree, y: &Process, xi: &Process) -> ExerciseRule {
    let stop = (0..tree.len())
        .map(|ix| {
            tree.is_terminal(ix) || (y[ix] - xi[ix]).abs() <= CONTACT_TOL * (1.0 + xi[ix].abs())
        })
        .collect();
    ExerciseRule { stop }
}

/// `Y_n >= E[Y_next | n] - 1e-9` at every non-terminal node.
pub fn check_supermartingale(tree: &ScenarioTree, y: &Process, measure: &Measure) -> bool {
    tree.non_terminal()
        .all(|ix| y[ix] >= measure.expect(tree, ix, y) - SUPERMARTINGALE_TOL)
}

/// Supermartingale property under every extreme of the family at once.
pub fn check_robust_supermartingale(
    tree: &ScenarioTree,
    y: &Process,
    family: &MeasureFamily,
) -> bool {
    tree.non_terminal()
        .all(|ix| y[ix] >= robust_continuation(tree, family, y, ix) - SUPERMARTINGALE_TOL)
}

/// All stopping-node sets of exercise rules, flattened. A rule either stops at a node
/// or continues and picks a rule independently in every successor subtree.
struct RuleTable {
    nodes: Vec<NodeIx>,
    offsets: Vec<usize>,
}

impl RuleTable {
    fn count(tree: &ScenarioTree, ix: NodeIx) -> u128 {
        if tree.is_terminal(ix) {
            return 1;
        }
        tree.succ(ix)
            .iter()
            .fold(1u128, |acc, &c| acc.saturating_mul(Self::count(tree, c)))
            .saturating_add(1)
    }

    fn build(tree: &ScenarioTree) -> Self {
        fn rules(tree: &ScenarioTree, ix: NodeIx) -> Vec<Vec<NodeIx>> {
            let mut out = vec![vec![ix]];
            if tree.is_terminal(ix) {
                return out;
            }
            let mut combos: Vec<Vec<NodeIx>> = vec![Vec::new()];
            for &c in tree.succ(ix) {
                let sub = rules(tree, c);
                combos = combos
                    .iter()
                    .flat_map(|prefix| {
                        sub.iter().map(move |r| {
                            let mut v = prefix.clone();
                            v.extend_from_slice(r);
                            v
                        })
                    })
                    .collect();
            }
            out.extend(combos);
            out
        }
        let mut nodes = Vec::new();
        let mut offsets = vec![0];
        for r in rules(tree, tree.root()) {
            nodes.extend(r);
            offsets.push(nodes.len());
        }
        Self { nodes, offsets }
    }

    fn iter(&self) -> impl Iterator<Item = &[NodeIx]> {
        self.offsets.windows(2).map(|w| &self.nodes[w[0]..w[1]])
    }
}

/// Number of exercise rules on `tree` (saturating).
pub fn exercise_rule_count(tree: &ScenarioTree) -> u128 {
    RuleTable::count(tree, tree.root())
}

/// Exact `max over extreme measures and exercise rules of E[xi_tau]`, by enumeration.
pub fn brute_force_value(
    tree: &ScenarioTree,
    family: &MeasureFamily,
    xi: &Process,
    cap: u128,
) -> Result<f64> {
    family.ensure_covers(tree)?;
    let selections = family.extreme_selection_count();
    let rule_count = RuleTable::count(tree, tree.root());
    let size = selections.saturating_mul(rule_count);
    if size > cap {
        return Err(Error::CapExceeded { size, cap });
    }
    let rules = RuleTable::build(tree);
    let covered: Vec<NodeIx> = tree.non_terminal().collect();
    let radices: Vec<u64> = covered
        .iter()
        .map(|&ix| family.extremes(ix).len() as u64)
        .collect();
    // Parents precede children in the preorder of `subtree`.
    let order = tree.subtree(tree.root());

    let best = (0..selections as u64)
        .into_par_iter()
        .map_init(
            || vec![0.0; tree.len()],
            |prob, mut code| {
                let mut choice = vec![0usize; tree.len()];
                for (k, &ix) in covered.iter().enumerate() {
                    choice[ix] = (code % radices[k]) as usize;
                    code /= radices[k];
                }
                prob[tree.root()] = 1.0;
                for &n in &order {
                    if tree.is_terminal(n) {
                        continue;
                    }
                    let p = &family.extremes(n)[choice[n]];
                    for (&c, w) in tree.succ(n).iter().zip(p) {
                        prob[c] = prob[n] * w;
                    }
                }
                rules
                    .iter()
                    .map(|r| r.iter().map(|&n| prob[n] * xi[n]).sum::<f64>())
                    .fold(f64::NEG_INFINITY, f64::max)
            },
        )
        .reduce(|| f64::NEG_INFINITY, f64::max);
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market_model::TreeBuilder;

    fn one_period() -> (ScenarioTree, Process) {
        let mut b = TreeBuilder::new(vec![1.0]);
        b.child(0, vec![2.0], 1.0);
        b.child(0, vec![0.5], 1.0);
        let tree = b.build().unwrap();
        let xi = Process::from_fn(&tree, |ix| {
            if ix == 0 {
                0.0
            } else {
                (tree.price(ix)[0] - 1.0).max(0.0)
            }
        });
        (tree, xi)
    }

    fn chain(len: usize) -> ScenarioTree {
        let mut b = TreeBuilder::new(vec![1.0]);
        let mut cur = 0;
        for _ in 0..len {
            cur = b.child(cur, vec![1.0], 1.0);
        }
        b.build().unwrap()
    }

    fn uv_family(tree: &ScenarioTree) -> MeasureFamily {
        MeasureFamily::from_fn(tree, |_| vec![vec![1.0 / 3.0, 2.0 / 3.0], vec![0.4, 0.6]]).unwrap()
    }

    #[test]
    fn classical_constant_payoff() {
        let tree = chain(3);
        let m = Measure::from_fn(&tree, |_| vec![1.0]).unwrap();
        let y = classical_snell(&tree, &m, &Process::constant(&tree, 2.5)).unwrap();
        assert!(y.values().iter().all(|&v| v == 2.5));
    }

    #[test]
    fn classical_one_period_call() {
        let (tree, xi) = one_period();
        let m = Measure::from_fn(&tree, |_| vec![1.0 / 3.0, 2.0 / 3.0]).unwrap();
        let y = classical_snell(&tree, &m, &xi).unwrap();
        assert!((y[0] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn decreasing_payoff_stops_at_root() {
        let tree = chain(3);
        let xi = Process::from_fn(&tree, |ix| 3.0 - ix as f64);
        let m = Measure::from_fn(&tree, |_| vec![1.0]).unwrap();
        let y = classical_snell(&tree, &m, &xi).unwrap();
        assert_eq!(y[0], xi[0]);
        let rule = optimal_exercise(&tree, &y, &xi);
        assert_eq!(rule.exercise_nodes(&tree), vec![0]);
    }

    #[test]
    fn robust_two_candidates() {
        let (tree, xi) = one_period();
        let fam = uv_family(&tree);
        let y = robust_snell(&tree, &fam, &xi).unwrap();
        assert!((y[0] - 0.4).abs() < 1e-15);
        let bf = brute_force_value(&tree, &fam, &xi, DEFAULT_BRUTE_FORCE_CAP).unwrap();
        assert!((bf - 0.4).abs() < 1e-15);
        let rule = optimal_exercise(&tree, &y, &xi);
        assert!(!rule.stops(0));
        assert_eq!(rule.exercise_nodes(&tree), vec![1, 2]);
    }

    #[test]
    fn robust_singleton_matches_classical() {
        let (tree, xi) = one_period();
        let m = Measure::from_fn(&tree, |_| vec![1.0 / 3.0, 2.0 / 3.0]).unwrap();
        let fam = MeasureFamily::singleton(&tree, &m).unwrap();
        assert_eq!(
            robust_snell(&tree, &fam, &xi).unwrap(),
            classical_snell(&tree, &m, &xi).unwrap()
        );
        let bf = brute_force_value(&tree, &fam, &xi, DEFAULT_BRUTE_FORCE_CAP).unwrap();
        assert!((bf - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn zero_payoff_zero_envelope() {
        let (tree, _) = one_period();
        let y = robust_snell(&tree, &uv_family(&tree), &Process::constant(&tree, 0.0)).unwrap();
        assert!(y.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn constant_payoff_stops_at_root() {
        let (tree, _) = one_period();
        let xi = Process::constant(&tree, 1.0);
        let y = robust_snell(&tree, &uv_family(&tree), &xi).unwrap();
        assert!(optimal_exercise(&tree, &y, &xi).stops(0));
    }

    #[test]
    fn supermartingale_checks() {
        let tree = chain(3);
        let m = Measure::from_fn(&tree, |_| vec![1.0]).unwrap();
        let increasing = Process::from_fn(&tree, |ix| ix as f64);
        assert!(!check_supermartingale(&tree, &increasing, &m));
        assert!(check_supermartingale(
            &tree,
            &Process::constant(&tree, 4.0),
            &m
        ));

        let (tree, xi) = one_period();
        let fam = uv_family(&tree);
        let y = robust_snell(&tree, &fam, &xi).unwrap();
        for k in 0..2 {
            assert!(check_supermartingale(&tree, &y, &fam.select(|_| k)));
        }
    }

    #[test]
    fn rule_count_matches_table() {
        let mut b = TreeBuilder::new(vec![0.0]);
        for _ in 0..3 {
            let c = b.child(0, vec![0.0], 1.0);
            for _ in 0..2 {
                b.child(c, vec![0.0], 1.0);
            }
        }
        let tree = b.build().unwrap();
        // Depth-one nodes have 1 + 1*1 = 2 rules, root has 1 + 2^3 = 9.
        assert_eq!(RuleTable::count(&tree, 0), 9);
        assert_eq!(RuleTable::build(&tree).iter().count(), 9);
    }

    #[test]
    fn cap_is_enforced() {
        let (tree, xi) = one_period();
        let err = brute_force_value(&tree, &uv_family(&tree), &xi, 3).unwrap_err();
        assert!(matches!(err, Error::CapExceeded { size: 4, cap: 3 }));
    }
}
