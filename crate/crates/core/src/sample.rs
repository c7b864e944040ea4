//! Random desk-scale instances for property tests, acceptance runs and benchmarks.

use rand::Rng;

use crate::market_model::{MeasureFamily, Process, ScenarioTree, TreeBuilder};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeShape {
    pub max_horizon: usize,
    pub max_successors: usize,
    pub dim: usize,
    /// Shift every node's increments so that zero is inside their convex hull.
    pub arbitrage_free: bool,
    /// Draw a random `dt` in `[0.5, 1.5]` instead of 1.
    pub random_dt: bool,
    /// Use exactly `max_horizon` periods and `max_successors` successors everywhere.
    pub exact: bool,
}

impl TreeShape {
    pub fn new(max_horizon: usize, max_successors: usize, dim: usize) -> Self {
        Self {
            max_horizon,
            max_successors,
            dim,
            arbitrage_free: false,
            random_dt: false,
            exact: false,
        }
    }

    pub fn arbitrage_free(mut self) -> Self {
        self.arbitrage_free = true;
        self
    }

    pub fn exact(mut self) -> Self {
        self.exact = true;
        self
    }
}

/// Random tree with horizon in `1..=max_horizon` and `1..=max_successors` successors per node
/// (or exactly those counts when `shape.exact`).
pub fn random_tree<R: Rng + ?Sized>(rng: &mut R, shape: TreeShape) -> ScenarioTree {
    let horizon = if shape.exact {
        shape.max_horizon
    } else {
        rng.gen_range(1..=shape.max_horizon)
    };
    let mut b = TreeBuilder::new((0..shape.dim).map(|_| rng.gen_range(0.5..1.5)).collect());
    let mut frontier = vec![b.root()];
    for _ in 0..horizon {
        let mut next = Vec::new();
        for &n in &frontier {
            let k = if shape.exact {
                shape.max_successors
            } else {
                rng.gen_range(1..=shape.max_successors)
            };
            let mut inc: Vec<Vec<f64>> = (0..k)
                .map(|_| (0..shape.dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect();
            if shape.arbitrage_free {
                let w: Vec<f64> = (0..k).map(|_| rng.gen_range(0.05..1.0)).collect();
                let total: f64 = w.iter().sum();
                for j in 0..shape.dim {
                    let mean: f64 =
                        inc.iter().zip(&w).map(|(v, wi)| v[j] * wi).sum::<f64>() / total;
                    for v in inc.iter_mut() {
                        v[j] -= mean;
                    }
                }
            }
            let dt = if shape.random_dt {
                rng.gen_range(0.5..1.5)
            } else {
                1.0
            };
            let s: Vec<f64> = b.price(n).to_vec();
            for v in inc {
                let price = s.iter().zip(&v).map(|(a, d)| a + d).collect();
                next.push(b.child(n, price, dt));
            }
        }
        frontier = next;
    }
    b.build().expect("generated tree is valid")
}

/// Random probability vector of length `k`; roughly a third of the draws have a zero entry.
pub fn random_probability<R: Rng + ?Sized>(rng: &mut R, k: usize) -> Vec<f64> {
    let mut w: Vec<f64> = (0..k).map(|_| rng.gen_range(0.0..1.0)).collect();
    if k > 1 && rng.gen_bool(1.0 / 3.0) {
        let z = rng.gen_range(0..k);
        w[z] = 0.0;
    }
    let total: f64 = w.iter().sum();
    if total == 0.0 {
        let mut p = vec![0.0; k];
        p[0] = 1.0;
        return p;
    }
    let mut p: Vec<f64> = w.iter().map(|x| x / total).collect();
    // Put the rounding residue on the largest entry so the sum is 1 to the last bit or two.
    let resid = 1.0 - p.iter().sum::<f64>();
    let top = (0..k)
        .max_by(|&a, &b| p[a].total_cmp(&p[b]))
        .expect("k >= 1");
    p[top] += resid;
    p
}

/// Family with `1..=max_extremes` random extremes at every node.
pub fn random_family<R: Rng + ?Sized>(
    rng: &mut R,
    tree: &ScenarioTree,
    max_extremes: usize,
) -> MeasureFamily {
    MeasureFamily::from_fn(tree, |ix| {
        let k = tree.succ(ix).len();
        let count = rng.gen_range(1..=max_extremes);
        (0..count).map(|_| random_probability(rng, k)).collect()
    })
    .expect("generated family is valid")
}

/// Payoff with values in `[-1, 2]`, occasionally with flat stretches.
pub fn random_payoff<R: Rng + ?Sized>(rng: &mut R, tree: &ScenarioTree) -> Process {
    let strike = rng.gen_range(0.5..1.5);
    let put = rng.gen_bool(0.5);
    Process::from_fn(tree, |ix| {
        if rng.gen_bool(0.2) {
            rng.gen_range(-1.0..2.0)
        } else {
            let s = tree.price(ix)[0];
            if put {
                (strike - s).max(0.0)
            } else {
                (s - strike).max(0.0)
            }
        }
    })
}
