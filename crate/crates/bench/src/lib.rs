//! Deterministic instances shared by the benchmarks.

use rand::rngs::StdRng;
use rand::SeedableRng;
use robust_snell::families::{uv_lattice, UvSpec};
use robust_snell::linalg::Matrix;
use robust_snell::sample::{random_family, random_payoff, random_tree, TreeShape};
use robust_snell::{MeasureFamily, Process, ScenarioTree};

pub struct Instance {
    pub tree: ScenarioTree,
    pub family: MeasureFamily,
    pub xi: Process,
}

/// Uncertain-volatility lattice with an American put struck at the money.
pub fn uv_instance(steps: usize) -> Instance {
    let (tree, family) = uv_lattice(&UvSpec::new(0.1, 0.3, steps, 0.25, 1.0)).expect("valid spec");
    let xi = Process::from_fn(&tree, |ix| (1.0 - tree.price(ix)[0]).max(0.0));
    Instance { tree, family, xi }
}

/// Random arbitrage-free tree with exactly `horizon` periods and `successors` branches.
pub fn random_instance(
    seed: u64,
    horizon: usize,
    successors: usize,
    dim: usize,
    extremes: usize,
) -> Instance {
    let mut rng = StdRng::seed_from_u64(seed);
    let shape = TreeShape::new(horizon, successors, dim)
        .arbitrage_free()
        .exact();
    let tree = random_tree(&mut rng, shape);
    let family = random_family(&mut rng, &tree, extremes);
    let xi = random_payoff(&mut rng, &tree);
    Instance { tree, family, xi }
}

/// `G G^T` with a `d x d` matrix `G` of entries `((i * 7 + j * 3) mod 5) - 2`, plus `shift I`.
pub fn psd_matrix(d: usize, shift: f64) -> Matrix {
    let g = |i: usize, j: usize| ((i * 7 + j * 3) % 5) as f64 - 2.0;
    let rows: Vec<Vec<f64>> = (0..d)
        .map(|i| {
            (0..d)
                .map(|j| {
                    (0..d).map(|k| g(i, k) * g(j, k)).sum::<f64>()
                        + if i == j { shift } else { 0.0 }
                })
                .collect()
        })
        .collect();
    Matrix::from_rows(&rows).expect("square")
}
