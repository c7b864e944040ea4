//! Minimal superhedging on scenario trees and the martingale-measure side of the duality.
//!
//! Each non-terminal node solves the one-step problem `min y  s.t.  y + Z.dS_i >= V_i`
//! through its dual, `max p.V` over the martingale polytope
//! `{p >= 0, sum p = 1, sum p_i dS_i = 0}`. The simplex multipliers of the dual are the
//! hedge `(y, Z)` and the optimal `p` certifies optimality by complementary slackness.

use itertools::Itertools;
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::lp::{self, LpError};
use crate::market_model::{dot, MeasureFamily, NodeIx, Process, ScenarioTree, Strategy};
use crate::snell::{check_robust_supermartingale, robust_snell};

/// Slack allowed in pathwise superhedging and decomposition checks.
pub const HEDGE_TOL: f64 = 1e-9;

/// A report is certified when the duality gap is at most this.
pub const CERTIFY_TOL: f64 = 1e-8;

/// Feasibility tolerance of candidate polytope vertices.
pub const VERTEX_TOL: f64 = 1e-10;

/// Max-norm distance under which two vertices are the same.
pub const DEDUP_TOL: f64 = 1e-9;

/// Optimal one-step hedge at a node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeHedge {
    pub y: f64,
    pub z: Vec<f64>,
    /// Successors whose constraint binds.
    pub active: Vec<usize>,
    /// Optimal dual point: a martingale measure on the successors.
    pub multipliers: Vec<f64>,
}

/// Minimal capital `y` and holdings `Z` with `y + Z.dS_i >= V_i` for every successor.
///
/// Fails with [`Error::Arbitrage`] when zero is outside the convex hull of the increments,
/// in which case the minimum is unbounded below.
pub fn node_hedge(increments: &[Vec<f64>], targets: &[f64]) -> Result<NodeHedge> {
    if increments.is_empty() || increments.len() != targets.len() {
        return Err(Error::InvalidInput(
            "node hedge needs equally many increments and targets".into(),
        ));
    }
    let d = increments[0].len();
    if increments.iter().any(|v| v.len() != d) {
        return Err(Error::InvalidInput(
            "increments have mixed dimensions".into(),
        ));
    }
    let (rows, rhs) = martingale_system(increments);
    let cost: Vec<f64> = targets.iter().map(|v| -v).collect();
    let sol = match lp::minimize(&cost, &rows, &rhs) {
        Ok(sol) => sol,
        Err(LpError::Infeasible) => {
            return Err(Error::Arbitrage {
                node: "<unnamed>".into(),
            })
        }
        Err(e) => return Err(Error::Numerical(e.to_string())),
    };
    let z: Vec<f64> = sol.multipliers[1..].iter().map(|v| -v).collect();
    // Smallest capital for these holdings; equals the LP value at the optimum.
    let y = increments
        .iter()
        .zip(targets)
        .map(|(ds, v)| v - dot(&z, ds))
        .fold(f64::NEG_INFINITY, f64::max);
    let value = -sol.objective;
    let scale = 1.0 + targets.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if (y - value).abs() > 1e-9 * scale {
        return Err(Error::Numerical(format!(
            "hedge capital {y} disagrees with LP value {value}"
        )));
    }
    let active = increments
        .iter()
        .zip(targets)
        .enumerate()
        .filter(|(_, (ds, v))| (y + dot(&z, ds) - *v).abs() <= HEDGE_TOL * (1.0 + v.abs()))
        .map(|(i, _)| i)
        .collect();
    Ok(NodeHedge {
        y,
        z,
        active,
        multipliers: sol.x,
    })
}

/// Rows `[1 ... 1]` and one row per coordinate of the increments, right-hand side `(1, 0...)`.
fn martingale_system(increments: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let d = increments[0].len();
    let mut rows = vec![vec![1.0; increments.len()]];
    for j in 0..d {
        rows.push(increments.iter().map(|ds| ds[j]).collect());
    }
    let mut rhs = vec![0.0; d + 1];
    rhs[0] = 1.0;
    (rows, rhs)
}

/// Vertices of `{p >= 0 : A p = b}`, enumerated over supports of size at most `rows(A)`.
///
/// Each support whose columns are independent and whose unique solution is nonnegative
/// (within [`VERTEX_TOL`]) yields a vertex; duplicates within [`DEDUP_TOL`] are dropped.
pub fn polytope_vertices(a: &[Vec<f64>], b: &[f64]) -> Vec<Vec<f64>> {
    let cols = a.first().map_or(0, Vec::len);
    let scale = a
        .iter()
        .flatten()
        .fold(0.0_f64, |m, v| m.max(v.abs()))
        .max(1.0);
    let mut out: Vec<Vec<f64>> = Vec::new();
    for size in 1..=a.len().min(cols) {
        for support in (0..cols).combinations(size) {
            let sub: Vec<Vec<f64>> = a
                .iter()
                .map(|row| support.iter().map(|&j| row[j]).collect())
                .collect();
            let Some(sol) = crate::linalg::solve_unique(&sub, b, 1e-12 * scale) else {
                continue;
            };
            if sol.iter().any(|&v| v < -VERTEX_TOL) {
                continue;
            }
            let mut p = vec![0.0; cols];
            for (&j, v) in support.iter().zip(sol) {
                p[j] = v.max(0.0);
            }
            let dup = out
                .iter()
                .any(|q| q.iter().zip(&p).all(|(x, y)| (x - y).abs() <= DEDUP_TOL));
            if !dup {
                out.push(p);
            }
        }
    }
    out
}

/// Vertices of the local martingale-measure polytope for the given increments.
pub fn martingale_polytope_vertices(increments: &[Vec<f64>]) -> Vec<Vec<f64>> {
    if increments.is_empty() {
        return Vec::new();
    }
    let (rows, rhs) = martingale_system(increments);
    polytope_vertices(&rows, &rhs)
}

/// Family of all martingale measures: every node's local set is its polytope's vertex set.
pub fn saturate(tree: &ScenarioTree) -> Result<MeasureFamily> {
    let mut extremes = vec![Vec::new(); tree.len()];
    for ix in tree.non_terminal() {
        let v = martingale_polytope_vertices(&tree.increments(ix));
        if v.is_empty() {
            return Err(Error::Arbitrage {
                node: tree.id(ix).to_string(),
            });
        }
        extremes[ix] = v;
    }
    MeasureFamily::from_fn(tree, |ix| std::mem::take(&mut extremes[ix]))
}

/// Nodes whose martingale polytope has no strictly positive point, so no martingale
/// measure there is equivalent to a full-support law.
pub fn saturation_warnings(tree: &ScenarioTree) -> Vec<NodeIx> {
    tree.non_terminal()
        .filter(|&ix| {
            let v = martingale_polytope_vertices(&tree.increments(ix));
            let k = tree.succ(ix).len();
            !v.is_empty() && (0..k).any(|i| v.iter().all(|p| p[i] <= VERTEX_TOL))
        })
        .collect()
}

/// True iff every local set consists of martingale measures and contains every vertex of
/// the node's martingale polytope.
pub fn is_saturated(tree: &ScenarioTree, family: &MeasureFamily) -> bool {
    if family.ensure_covers(tree).is_err() {
        return false;
    }
    tree.non_terminal().all(|ix| {
        let inc = tree.increments(ix);
        let extremes = family.extremes(ix);
        let martingale = extremes.iter().all(|p| {
            (0..tree.dim()).all(|j| {
                p.iter()
                    .zip(&inc)
                    .map(|(w, ds)| w * ds[j])
                    .sum::<f64>()
                    .abs()
                    <= HEDGE_TOL
            })
        });
        martingale
            && martingale_polytope_vertices(&inc).iter().all(|v| {
                extremes
                    .iter()
                    .any(|e| e.iter().zip(v).all(|(a, b)| (a - b).abs() <= DEDUP_TOL))
            })
    })
}

/// Superhedging price, strategy and certificate for an American claim.
#[derive(Debug, Clone, PartialEq)]
pub struct HedgeReport {
    pub price: f64,
    /// Minimal superhedging value process `V = max(xi, one-step hedge capital)`.
    pub value: Process,
    pub strategy: Strategy,
    /// Increment of the non-decreasing consumption at each node (0 at the root).
    pub consumption: Process,
    pub duality_gap: f64,
    pub certified: bool,
    /// Optimal dual point of every node LP.
    pub multipliers: Vec<Option<Vec<f64>>>,
}

impl HedgeReport {
    /// `{"price","gap","certified","strategy":{id:[..]},"consumption":{id:..}}`.
    pub fn to_json(&self, tree: &ScenarioTree) -> Value {
        let strategy: Map<String, Value> = tree
            .non_terminal()
            .map(|ix| (tree.id(ix).to_string(), json!(self.strategy.at(ix))))
            .collect();
        let consumption: Map<String, Value> = (0..tree.len())
            .map(|ix| (tree.id(ix).to_string(), json!(self.consumption[ix])))
            .collect();
        json!({
            "price": self.price,
            "gap": self.duality_gap,
            "certified": self.certified,
            "strategy": strategy,
            "consumption": consumption,
        })
    }
}

/// Backward recursion `V_T = xi_T`, `V_n = max(xi_n, node_hedge(dS, V_succ).y)`.
pub fn superhedge(tree: &ScenarioTree, xi: &Process) -> Result<HedgeReport> {
    let mut value = xi.clone();
    let mut holdings = vec![None; tree.len()];
    let mut multipliers = vec![None; tree.len()];
    for ix in tree.backward() {
        let targets: Vec<f64> = tree.succ(ix).iter().map(|&c| value[c]).collect();
        let hedge = node_hedge(&tree.increments(ix), &targets).map_err(|e| match e {
            Error::Arbitrage { .. } => Error::Arbitrage {
                node: tree.id(ix).to_string(),
            },
            other => other,
        })?;
        value[ix] = xi[ix].max(hedge.y);
        holdings[ix] = Some(hedge.z);
        multipliers[ix] = Some(hedge.multipliers);
    }
    let strategy = Strategy::new(tree, holdings)?;

    let mut consumption = Process::constant(tree, 0.0);
    for ix in tree.non_terminal() {
        let z = strategy.at(ix);
        for (&c, ds) in tree.succ(ix).iter().zip(tree.increments(ix)) {
            consumption[c] = value[ix] + dot(z, &ds) - value[c];
        }
    }

    let dual = robust_snell(tree, &saturate(tree)?, xi)?;
    let price = value[tree.root()];
    let duality_gap = (price - dual[tree.root()]).abs();
    Ok(HedgeReport {
        price,
        value,
        strategy,
        consumption,
        duality_gap,
        certified: duality_gap <= CERTIFY_TOL,
        multipliers,
    })
}

/// Pathwise check `y0 + sum over root->n edges of Z.dS >= xi_n - 1e-9` at every node.
pub fn verify_superhedge(tree: &ScenarioTree, xi: &Process, y0: f64, z: &Strategy) -> bool {
    let mut wealth = Process::constant(tree, 0.0);
    wealth[tree.root()] = y0;
    for ix in tree.subtree(tree.root()) {
        if wealth[ix] < xi[ix] - HEDGE_TOL {
            return false;
        }
        if tree.is_terminal(ix) {
            continue;
        }
        let Some(h) = z.get(ix) else {
            return false;
        };
        for (&c, ds) in tree.succ(ix).iter().zip(tree.increments(ix)) {
            wealth[c] = wealth[ix] + dot(h, &ds);
        }
    }
    true
}

/// `|superhedge price - robust envelope root under family|`.
pub fn duality_gap(tree: &ScenarioTree, xi: &Process, family: &MeasureFamily) -> Result<f64> {
    let primal = superhedge(tree, xi)?.price;
    let dual = robust_snell(tree, family, xi)?[tree.root()];
    Ok((primal - dual).abs())
}

/// `Y - Y_0 - Z.S` is non-increasing along every edge, and `Y` is a supermartingale
/// under every extreme of `family`.
pub fn optional_decomposition_check(
    tree: &ScenarioTree,
    family: &MeasureFamily,
    y: &Process,
    z: &Strategy,
) -> bool {
    if family.ensure_covers(tree).is_err() || !check_robust_supermartingale(tree, y, family) {
        return false;
    }
    tree.non_terminal().all(|ix| {
        let Some(h) = z.get(ix) else {
            return false;
        };
        tree.succ(ix)
            .iter()
            .zip(tree.increments(ix))
            .all(|(&c, ds)| y[c] - y[ix] - dot(h, &ds) <= HEDGE_TOL)
    })
}
