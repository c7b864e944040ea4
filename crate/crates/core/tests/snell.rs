mod common;

use std::collections::HashMap;

use common::{desk_case, max_abs_diff, rng};
use proptest::prelude::*;
use robust_snell::market_model::node_probability;
use robust_snell::sample::TreeShape;
use robust_snell::snell::{
    brute_force_value, check_robust_supermartingale, classical_snell, optimal_exercise,
    robust_continuation, robust_snell, DEFAULT_BRUTE_FORCE_CAP,
};
use robust_snell::{paste, path_probability, Measure, MeasureFamily, Process, TreeBuilder};

fn small_shape() -> TreeShape {
    TreeShape::new(3, 3, 1)
}

/// Every extreme selection of the family, as measures.
fn all_selections(family: &MeasureFamily, len: usize) -> Vec<Measure> {
    let covered: Vec<usize> = (0..len).filter(|&ix| family.local(ix).is_some()).collect();
    let total = family.extreme_selection_count() as usize;
    (0..total)
        .map(|mut code| {
            let mut choice = vec![0; len];
            for &ix in &covered {
                let k = family.extremes(ix).len();
                choice[ix] = code % k;
                code /= k;
            }
            family.select(|ix| choice[ix])
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn root_matches_brute_force(seed in any::<u64>()) {
        let case = desk_case(&mut rng(seed), small_shape(), 3, 20_000);
        let y = robust_snell(&case.tree, &case.family, &case.xi).unwrap();
        let bf = brute_force_value(&case.tree, &case.family, &case.xi, DEFAULT_BRUTE_FORCE_CAP).unwrap();
        prop_assert!((y[case.tree.root()] - bf).abs() <= 1e-12);
    }

    #[test]
    fn envelope_dominates_and_is_supermartingale(seed in any::<u64>()) {
        let case = desk_case(&mut rng(seed), small_shape(), 3, u128::MAX);
        let y = robust_snell(&case.tree, &case.family, &case.xi).unwrap();
        for ix in 0..case.tree.len() {
            prop_assert!(y[ix] >= case.xi[ix]);
        }
        prop_assert!(check_robust_supermartingale(&case.tree, &y, &case.family));
    }

    /// Smallest dominating robust supermartingale: at every node the envelope touches
    /// either the payoff or the worst-case continuation.
    #[test]
    fn envelope_is_tight(seed in any::<u64>()) {
        let case = desk_case(&mut rng(seed), small_shape(), 3, u128::MAX);
        let y = robust_snell(&case.tree, &case.family, &case.xi).unwrap();
        for ix in case.tree.non_terminal() {
            let cont = robust_continuation(&case.tree, &case.family, &y, ix);
            let gap = (y[ix] - case.xi[ix]).min(y[ix] - cont);
            prop_assert!(gap.abs() <= 1e-12);
        }
    }

    /// The robust envelope equals the node-wise maximum of classical envelopes over
    /// extreme selections, at every node simultaneously.
    #[test]
    fn aggregates_classical_envelopes(seed in any::<u64>()) {
        let case = desk_case(&mut rng(seed), TreeShape::new(2, 3, 1), 2, 2_000);
        let y = robust_snell(&case.tree, &case.family, &case.xi).unwrap();
        let mut best = Process::constant(&case.tree, f64::NEG_INFINITY);
        for m in all_selections(&case.family, case.tree.len()) {
            let c = classical_snell(&case.tree, &m, &case.xi).unwrap();
            for ix in 0..case.tree.len() {
                best[ix] = best[ix].max(c[ix]);
            }
        }
        prop_assert!(max_abs_diff(&y, &best) <= 1e-12);
    }

    #[test]
    fn larger_family_larger_value(seed in any::<u64>()) {
        let mut r = rng(seed);
        let case = desk_case(&mut r, small_shape(), 2, u128::MAX);
        let extra = robust_snell::sample::random_family(&mut r, &case.tree, 2);
        let bigger = MeasureFamily::from_fn(&case.tree, |ix| {
            let mut e = case.family.extremes(ix).to_vec();
            e.extend_from_slice(extra.extremes(ix));
            e
        }).unwrap();
        let small = robust_snell(&case.tree, &case.family, &case.xi).unwrap();
        let big = robust_snell(&case.tree, &bigger, &case.xi).unwrap();
        for ix in 0..case.tree.len() {
            prop_assert!(big[ix] >= small[ix] - 1e-12);
        }
    }

    /// Under the maximizing extreme selection, the first contact time attains the root value.
    #[test]
    fn optimal_rule_attains_value(seed in any::<u64>()) {
        let case = desk_case(&mut rng(seed), small_shape(), 3, u128::MAX);
        let tree = &case.tree;
        let y = robust_snell(tree, &case.family, &case.xi).unwrap();
        let worst = case.family.select(|ix| {
            let ex = case.family.extremes(ix);
            (0..ex.len())
                .max_by(|&a, &b| {
                    let e = |k: usize| tree.succ(ix).iter().zip(&ex[k]).map(|(&c, w)| w * y[c]).sum::<f64>();
                    e(a).total_cmp(&e(b))
                })
                .unwrap()
        });
        let rule = optimal_exercise(tree, &y, &case.xi);
        let payoff = rule.expected_payoff(tree, &worst, &case.xi);
        prop_assert!((payoff - y[tree.root()]).abs() <= 1e-12);
    }

    #[test]
    fn leaf_probabilities_sum_to_one(seed in any::<u64>()) {
        let case = desk_case(&mut rng(seed), TreeShape::new(4, 3, 2), 3, u128::MAX);
        let m = case.family.select(|ix| ix);
        let total: f64 = case.tree.leaves().iter()
            .map(|&l| path_probability(&case.tree, &m, l).unwrap())
            .sum();
        prop_assert!((total - 1.0).abs() <= 1e-12);
        for t in 0..=case.tree.horizon() {
            let slice: f64 = case.tree.slice(t).iter().map(|&n| node_probability(&case.tree, &m, n)).sum();
            prop_assert!((slice - 1.0).abs() <= 1e-12);
        }
    }
}

/// Two periods, two branches, two extremes per node: closure under conditioning and
/// pasting, checked over every combination.
#[test]
fn condition_and_paste_closure_exhaustive() {
    let mut b = TreeBuilder::new(vec![1.0]);
    let u = b.child(0, vec![1.5], 1.0);
    let d = b.child(0, vec![0.5], 1.0);
    for &n in &[u, d] {
        let s = b.price(n)[0];
        b.child(n, vec![s + 0.5], 1.0);
        b.child(n, vec![s - 0.5], 1.0);
    }
    let tree = b.build().unwrap();
    let family = MeasureFamily::from_fn(&tree, |ix| match ix {
        0 => vec![vec![0.3, 0.7], vec![0.6, 0.4]],
        _ => vec![vec![0.5, 0.5], vec![0.2, 0.8]],
    })
    .unwrap();
    let measures = all_selections(&family, tree.len());
    assert_eq!(measures.len(), 8);

    for node in 0..tree.len() {
        let cond = family.condition(&tree, node).unwrap();
        for m in &measures {
            assert!(cond.contains_extremes(&tree, &m.restrict(&tree, node)));
        }
    }

    let mut checked = 0;
    for t in 0..=tree.horizon() {
        let anchors = tree.slice(t).to_vec();
        for outer in &measures {
            // Every assignment of a family member to each time-t node.
            let combos = measures.len().pow(anchors.len() as u32);
            for mut code in 0..combos {
                let mut kernel = HashMap::new();
                for &a in &anchors {
                    kernel.insert(a, measures[code % measures.len()].restrict(&tree, a));
                    code /= measures.len();
                }
                let pasted = paste(&tree, outer, t, &kernel).unwrap();
                assert!(family.contains_extremes(&tree, &pasted));
                checked += 1;
            }
        }
    }
    assert_eq!(checked, 8 * 8 + 8 * 64 + 8 * 8usize.pow(4));
}

#[test]
fn brute_force_refuses_above_cap() {
    let case = desk_case(&mut rng(7), TreeShape::new(3, 3, 1), 3, u128::MAX);
    let err = brute_force_value(&case.tree, &case.family, &case.xi, 1).unwrap_err();
    assert!(matches!(err, robust_snell::Error::CapExceeded { .. }));
}
