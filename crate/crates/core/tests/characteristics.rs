mod common;

use common::{random_psd, rng};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use robust_snell::characteristics::{
    counterexample_triplet, counterexample_verdicts, dominating_diffusion,
    dominating_diffusion_componentwise, equivalence_suite, factorize, hedging_candidate,
    interval_report, parse_triplet, CharacteristicTriplet,
};
use robust_snell::linalg::{pseudo_inverse, Matrix};

fn to_na(m: &Matrix) -> DMatrix<f64> {
    let d = m.dim();
    DMatrix::from_fn(d, d, |i, j| m[(i, j)])
}

/// Random triplet: cumulative PSD increments of random rank, jumps on some intervals.
fn random_triplet(r: &mut ChaCha8Rng, d: usize, intervals: usize) -> CharacteristicTriplet {
    let mut c = vec![Matrix::zeros(d)];
    let mut k = vec![0.0];
    for _ in 0..intervals {
        let rank = r.gen_range(0..=d);
        let inc = random_psd(r, d, rank);
        c.push(c.last().unwrap().add(&inc));
        let jump = if r.gen_bool(0.6) {
            r.gen_range(0.0..1.0)
        } else {
            0.0
        };
        k.push(k.last().unwrap() + jump);
    }
    let grid = (0..=intervals).map(|i| i as f64).collect();
    CharacteristicTriplet::new(grid, vec![vec![0.0; d]; intervals + 1], c, k).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn penrose_identities_and_oracle(seed in any::<u64>()) {
        let mut r = rng(seed);
        let d = r.gen_range(1..=5);
        let rank = r.gen_range(0..=d);
        let a = random_psd(&mut r, d, rank);
        let p = pseudo_inverse(&a).unwrap();
        let scale = 1.0 + a.max_abs() * p.max_abs();
        prop_assert!(a.mul(&p).mul(&a).sub(&a).max_abs() <= 1e-9 * scale * a.max_abs().max(1.0));
        prop_assert!(p.mul(&a).mul(&p).sub(&p).max_abs() <= 1e-9 * scale * p.max_abs().max(1.0));
        prop_assert!(a.mul(&p).asymmetry() <= 1e-9 * scale);
        prop_assert!(p.mul(&a).asymmetry() <= 1e-9 * scale);
        if rank == d || rank == 0 {
            // Away from rank-deficiency thresholds the SVD oracle is unambiguous.
            let want = to_na(&a).pseudo_inverse(1e-12).unwrap();
            let got = to_na(&p);
            prop_assert!((got - want).amax() <= 1e-6 * scale);
        }
    }

    #[test]
    fn five_way_agreement(seed in any::<u64>()) {
        let mut r = rng(seed);
        let d = r.gen_range(1..=5);
        let intervals = r.gen_range(1..=4);
        let t = random_triplet(&mut r, d, intervals);
        let fact = factorize(&t).unwrap();
        let suite = equivalence_suite(&fact, &t);
        prop_assert!(suite.iter().all(|&v| v == suite[0]));
        prop_assert_eq!(suite[0], dominating_diffusion(&fact, &t));
        for v in interval_report(&fact, &t) {
            prop_assert!(v.five_way.iter().all(|&b| b == v.dd_new));
        }
    }

    /// The determinant condition implies the componentwise one; in one dimension they agree.
    #[test]
    fn determinant_is_stricter(seed in any::<u64>()) {
        let mut r = rng(seed);
        let d = r.gen_range(1..=4);
        let t = random_triplet(&mut r, d, 3);
        let fact = factorize(&t).unwrap();
        let new = dominating_diffusion(&fact, &t);
        let old = dominating_diffusion_componentwise(&fact, &t);
        prop_assert!(!new || old);
        if d == 1 {
            prop_assert_eq!(new, old);
        }
    }

    #[test]
    fn factorize_round_trip(seed in any::<u64>()) {
        let mut r = rng(seed);
        let d = r.gen_range(1..=5);
        let t = random_triplet(&mut r, d, 4);
        let fact = factorize(&t).unwrap();
        for i in 0..t.intervals() {
            let inc = t.diffusion[i + 1].sub(&t.diffusion[i]);
            let back = fact.density[i].scale(fact.trace_increment(i));
            prop_assert!(inc.sub(&back).max_abs() <= 1e-12 * (1.0 + inc.max_abs()));
            if fact.trace_increment(i) > 0.0 {
                prop_assert!((fact.density[i].trace() - 1.0).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn candidate_solves_in_range_systems(seed in any::<u64>()) {
        let mut r = rng(seed);
        let d = r.gen_range(1..=5);
        let rank = r.gen_range(1..=d);
        let c = random_psd(&mut r, d, rank);
        let z0: Vec<f64> = (0..d).map(|_| r.gen_range(-1.0..1.0)).collect();
        let c_sy = c.mul_vec(&z0);
        let cand = hedging_candidate(std::slice::from_ref(&c), std::slice::from_ref(&c_sy)).unwrap();
        prop_assert!(cand[0].in_range);
        let back = c.mul_vec(&cand[0].z);
        for (a, b) in back.iter().zip(&c_sy) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
    }
}

#[test]
fn counterexample_fixture() {
    assert_eq!(counterexample_verdicts(), (true, false));
    let t = counterexample_triplet();
    let fact = factorize(&t).unwrap();
    for i in 0..t.intervals() {
        assert_eq!(fact.trace_increment(i), 2.0 * (t.grid[i + 1] - t.grid[i]));
        assert_eq!(
            fact.density[i].to_rows(),
            vec![vec![0.5, 0.5], vec![0.5, 0.5]]
        );
    }
    let z = hedging_candidate(&fact.density[..1], &[vec![0.5, 0.5]]).unwrap();
    assert!((z[0].z[0] - 0.5).abs() <= 1e-12 && (z[0].z[1] - 0.5).abs() <= 1e-12);
}

#[test]
fn file_round_trip() {
    let text =
        r#"{"kind":"characteristics","grid":[0,1],"B":[[0],[0]],"C":[[[0]],[[2]]],"K":[0,0.5]}"#;
    let t = parse_triplet(text).unwrap();
    let fact = factorize(&t).unwrap();
    assert!(dominating_diffusion(&fact, &t));
    let bad = r#"{"kind":"tree_model","grid":[0,1]}"#;
    assert!(parse_triplet(bad).is_err());
}
