#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use robust_snell::linalg::Matrix;
use robust_snell::sample::{random_family, random_payoff, random_tree, TreeShape};
use robust_snell::snell::exercise_rule_count;
use robust_snell::{MeasureFamily, Process, ScenarioTree, TreeBuilder};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `S_0 = 1 -> {2, 0.5}`, call struck at 1 paid only at the horizon.
pub fn one_period() -> (ScenarioTree, Process) {
    let mut b = TreeBuilder::new(vec![1.0]);
    b.child(0, vec![2.0], 1.0);
    b.child(0, vec![0.5], 1.0);
    let tree = b.build().unwrap();
    let xi = Process::from_fn(&tree, |ix| {
        if tree.is_terminal(ix) {
            (tree.price(ix)[0] - 1.0).max(0.0)
        } else {
            0.0
        }
    });
    (tree, xi)
}

pub struct DeskCase {
    pub tree: ScenarioTree,
    pub family: MeasureFamily,
    pub xi: Process,
}

/// Random tree, family and payoff whose brute-force enumeration stays within `budget`.
pub fn desk_case(
    rng: &mut ChaCha8Rng,
    shape: TreeShape,
    max_extremes: usize,
    budget: u128,
) -> DeskCase {
    loop {
        let tree = random_tree(rng, shape);
        let family = random_family(rng, &tree, max_extremes);
        let size = family
            .extreme_selection_count()
            .saturating_mul(exercise_rule_count(&tree));
        if size <= budget {
            let xi = random_payoff(rng, &tree);
            return DeskCase { tree, family, xi };
        }
    }
}

pub fn max_abs_diff(a: &Process, b: &Process) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .fold(0.0, |m, (x, y)| f64::max(m, (x - y).abs()))
}

/// American put on a recombining arithmetic trinomial lattice, indexed by net level.
pub fn lattice_put(s0: f64, delta: f64, sigma: f64, dt: f64, steps: usize, strike: f64) -> f64 {
    let pm = sigma * sigma * dt / (2.0 * delta * delta);
    let p0 = 1.0 - 2.0 * pm;
    let payoff = |j: i64| (strike - (s0 + j as f64 * delta)).max(0.0);
    let n = steps as i64;
    let mut v: Vec<f64> = (-n..=n).map(payoff).collect();
    for t in (0..n).rev() {
        v = (-t..=t)
            .map(|j| {
                let k = (j + t + 1) as usize; // index of level j in the previous row
                let cont = pm * v[k - 1] + p0 * v[k] + pm * v[k + 1];
                cont.max(payoff(j))
            })
            .collect();
    }
    v[0]
}

/// `G G^T` with `G` of shape `d x rank`, entries uniform in `[-1, 1]`.
pub fn random_psd(r: &mut ChaCha8Rng, d: usize, rank: usize) -> Matrix {
    let g: Vec<Vec<f64>> = (0..d)
        .map(|_| (0..rank).map(|_| r.gen_range(-1.0..1.0)).collect())
        .collect();
    let rows: Vec<Vec<f64>> = (0..d)
        .map(|i| {
            (0..d)
                .map(|j| (0..rank).map(|k| g[i][k] * g[j][k]).sum())
                .collect()
        })
        .collect();
    Matrix::from_rows(&rows).unwrap()
}
