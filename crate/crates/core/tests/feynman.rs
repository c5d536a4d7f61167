use nalgebra::{DMatrix, DVector};
use odesr::dataset::RegressionDataset;
use odesr::expr::{Expr, UnaryOp};
use odesr::feynman::{self, FeynmanConfig};
use odesr::ga::Candidate;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn synthetic(k: usize, n: usize, seed: u64, f: impl Fn(&[f64]) -> f64) -> RegressionDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let states: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..k).map(|_| rng.gen_range(0.2..2.0)).collect())
        .collect();
    let targets = states.iter().map(|x| f(x)).collect();
    RegressionDataset {
        times: (0..n).map(|i| i as f64 * 0.1).collect(),
        states,
        targets,
        dt: 0.1,
        target_dim: 0,
    }
}

#[test]
fn planted_polynomial_is_recovered() {
    let data = synthetic(2, 100, 1, |x| 1.5 * x[0] - x[0] * x[1]);
    let fit = feynman::polyfit(&data, 2).unwrap();
    // monomials: 1, x, y, x², xy, y²
    let expected = [0.0, 1.5, 0.0, 0.0, -1.0, 0.0];
    let m = DMatrix::from_fn(100, 6, |i, j| {
        let x = &data.states[i];
        let e = &fit.monomials[j];
        x[0].powi(e[0] as i32) * x[1].powi(e[1] as i32)
    });
    let oracle = m.svd(true, true).solve(&DVector::from_column_slice(&data.targets), 1e-14).unwrap();
    for j in 0..6 {
        assert!((fit.coefficients[j] - expected[j]).abs() < 1e-8, "{:?}", fit.coefficients);
        assert!((fit.coefficients[j] - oracle[j]).abs() < 1e-8);
    }
    assert!(fit.candidate.train_rmse < 1e-8);
}

#[test]
fn polynomial_error_is_nested() {
    let data = synthetic(2, 80, 2, |x| (x[0] * x[1]).sin() + x[0].exp());
    let errs: Vec<f64> = (1..=4)
        .map(|d| feynman::polyfit(&data, d).unwrap().candidate.train_rmse)
        .collect();
    assert!(errs.windows(2).all(|w| w[1] <= w[0] + 1e-12), "{errs:?}");
}

#[test]
fn zero_targets_fit_the_zero_polynomial() {
    let data = synthetic(2, 30, 3, |_| 0.0);
    let fit = feynman::polyfit(&data, 3).unwrap();
    assert_eq!(fit.candidate.expr, Expr::Const(0.0));
    assert_eq!(fit.candidate.train_rmse, 0.0);
    let out = feynman::run_pipeline(&data, &FeynmanConfig { max_brute_nodes: 3, ..Default::default() }).unwrap();
    assert_eq!(out.best.expr, Expr::Const(0.0));
    assert_eq!(out.best.train_rmse, 0.0);
}

#[test]
fn planted_sine_is_recovered() {
    let data = synthetic(2, 100, 4, |x| -9.81 * x[0].sin());
    let cfg = FeynmanConfig { max_brute_nodes: 4, ..Default::default() };
    let found = feynman::brute_force(&data, &cfg);
    let best = &found[0];
    assert!(best.train_rmse < 1e-6);
    match &best.expr {
        Expr::Binary(_, c, g) => {
            assert!(matches!(**c, Expr::Const(v) if (v + 9.81).abs() < 1e-6));
            assert_eq!(**g, Expr::unary(UnaryOp::Sin, Expr::Var(0)));
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn brute_force_candidates_are_unique_and_finite() {
    let data = synthetic(2, 40, 5, |x| x[0] / x[1]);
    let found = feynman::brute_force(&data, &FeynmanConfig { max_brute_nodes: 5, ..Default::default() });
    let printed: std::collections::HashSet<String> = found.iter().map(|c| c.expr.to_text()).collect();
    assert_eq!(printed.len(), found.len());
    assert!(found.iter().all(|c| c.train_rmse.is_finite()));
    assert!(found[0].train_rmse < 1e-12);
}

#[test]
fn additive_split_is_detected() {
    let data = synthetic(2, 200, 6, |x| x[0].sin() + x[1] * x[1]);
    let s = feynman::separability_split(&data, 1e-2).unwrap();
    assert_eq!((s.left, s.right), (vec![0], vec![1]));
    let data = synthetic(2, 200, 7, |x| x[0] * x[1]);
    assert!(feynman::separability_split(&data, 1e-2).is_none());
    let data = synthetic(1, 50, 8, |x| x[0]);
    assert!(feynman::separability_split(&data, 1e-2).is_none());
}

#[test]
fn pipeline_is_deterministic_and_best_is_on_front() {
    let data = synthetic(2, 60, 9, |x| x[0].cos() * 2.0 + x[1]);
    let cfg = FeynmanConfig { max_brute_nodes: 5, ..Default::default() };
    let a = feynman::run_pipeline(&data, &cfg).unwrap();
    let b = feynman::run_pipeline(&data, &cfg).unwrap();
    assert_eq!(a.best, b.best);
    assert_eq!(a.front.candidates, b.front.candidates);
    let min = a.candidates.iter().map(|c| c.train_rmse).fold(f64::INFINITY, f64::min);
    assert_eq!(a.best.train_rmse, min);
    assert!(a.front.candidates.contains(&a.best));
    assert!(dominance_front(&a.candidates).len() == a.front.candidates.len());
}

/// O(n²) oracle: candidates not dominated by any other, ties on
/// (complexity, rmse) resolved by the smallest printed form.
fn dominance_front(cands: &[Candidate]) -> Vec<Candidate> {
    let mut out: Vec<Candidate> = cands
        .iter()
        .enumerate()
        .filter(|(i, a)| {
            !cands.iter().enumerate().any(|(j, b)| {
                if *i == j {
                    return false;
                }
                let le = b.complexity <= a.complexity && b.train_rmse <= a.train_rmse;
                let strict = b.complexity < a.complexity || b.train_rmse < a.train_rmse;
                let tie = b.complexity == a.complexity
                    && b.train_rmse == a.train_rmse
                    && (b.expr.to_text(), j) < (a.expr.to_text(), *i);
                (le && strict) || tie
            })
        })
        .map(|(_, c)| c.clone())
        .collect();
    out.sort_by(|a, b| a.complexity.cmp(&b.complexity));
    out
}

fn arb_candidates() -> impl Strategy<Value = Vec<Candidate>> {
    prop::collection::vec((1usize..12, prop_oneof![9 => (0u32..8).prop_map(|v| v as f64), 1 => Just(f64::INFINITY)], 0u32..1000), 1..40)
        .prop_map(|v| {
            v.into_iter()
                .map(|(c, e, tag)| Candidate {
                    expr: Expr::Const(tag as f64),
                    genome: None,
                    train_rmse: e,
                    complexity: c,
                })
                .collect()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]
    #[test]
    fn front_matches_dominance_oracle(cands in arb_candidates()) {
        let front = feynman::pareto_front(&cands);
        let oracle = dominance_front(&cands);
        let f: Vec<_> = front.candidates.iter().map(|c| (c.complexity, c.train_rmse.to_bits(), c.expr.to_text())).collect();
        let o: Vec<_> = oracle.iter().map(|c| (c.complexity, c.train_rmse.to_bits(), c.expr.to_text())).collect();
        prop_assert_eq!(f, o);
        for w in front.candidates.windows(2) {
            prop_assert!(w[0].complexity < w[1].complexity);
            prop_assert!(w[1].train_rmse < w[0].train_rmse);
        }
    }
}
