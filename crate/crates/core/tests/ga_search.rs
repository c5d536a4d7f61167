use odesr::dataset::{self, RegressionDataset, Split};
use odesr::dynamics;
use odesr::expr::{Expr, UnaryOp};
use odesr::ga::{self, GaConfig};
use odesr::genome::{Genome, Grammar};
use odesr::IntegratorConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn planted_dataset() -> RegressionDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let states: Vec<Vec<f64>> = (0..100).map(|_| vec![rng.gen_range(-2.0..2.0)]).collect();
    let targets = states.iter().map(|x| 1.5 * x[0]).collect();
    RegressionDataset {
        times: (0..100).map(|i| i as f64 * 0.1).collect(),
        states,
        targets,
        dt: 0.1,
        target_dim: 0,
    }
}

#[test]
fn velocity_is_recovered_up_to_discretization() {
    let cfg = IntegratorConfig::default();
    let p = dynamics::simple_pendulum().with_target_dim(0).unwrap();
    let traj = dataset::trajectory(&p, Split::Train, &cfg).unwrap();
    let data = dataset::make_dataset(&p, Split::Train, &cfg).unwrap();
    let rmse = ga::fitness(&Expr::Var(1), &data);

    // residual recomputed directly from the sampled trajectory
    let n = traj.len() - 1;
    let sse: f64 = (0..n)
        .map(|i| {
            let fd = (traj.states[i + 1][0] - traj.states[i][0]) / (traj.times[i + 1] - traj.times[i]);
            (traj.states[i][1] - fd).powi(2)
        })
        .sum();
    let oracle = (sse / n as f64).sqrt();
    assert!((rmse - oracle).abs() < 1e-12);
    // first-order scheme: error bounded by dt/2 · max|θ̈|
    let max_acc = traj
        .states
        .iter()
        .map(|x| p.derivative(0.0, x)[1].abs())
        .fold(0.0, f64::max);
    assert!(rmse <= 0.5 * cfg.sample_dt * max_acc);
}

#[test]
fn planted_expression_is_recovered() {
    let data = planted_dataset();
    let grammar = Grammar::new(1, vec![1.5, 1.0, -1.0]);
    let cfg = GaConfig {
        population_size: 70,
        bitstring_length: 20,
        iterations: 100,
        seed: 3,
        ..GaConfig::default()
    };
    let out = ga::run(&cfg, &data, &grammar).unwrap();
    assert!(out.best.train_rmse <= 0.05, "{:?}", out.best);
}

#[test]
fn run_invariants() {
    let cfg = IntegratorConfig::default();
    let lv = dynamics::lotka_volterra();
    let data = dataset::make_dataset(&lv, Split::Train, &cfg).unwrap();
    let grammar = Grammar::new(2, vec![1.0, 1.5, -3.0, -1.0]);
    let ga_cfg = GaConfig {
        iterations: 15,
        seed: 9,
        ..GaConfig::preset("lotka_volterra").unwrap()
    };
    let mut generations = 0;
    let out = ga::run_with(&ga_cfg, &data, &grammar, |_, pop| {
        generations += 1;
        assert_eq!(pop.len(), ga_cfg.population_size);
        for c in pop {
            let g: &Genome = c.genome.as_ref().unwrap();
            assert_eq!(grammar.decode(g).as_ref(), Some(&c.expr));
            assert_eq!(c.complexity, c.expr.complexity());
            assert!(c.train_rmse >= 0.0);
        }
    })
    .unwrap();
    assert_eq!(generations, 16);
    assert_eq!(out.history.len(), 15);
    assert!(out.history.windows(2).all(|w| w[1] <= w[0]));
    assert_eq!(*out.history.last().unwrap(), out.best.train_rmse);
}

#[test]
fn identical_seed_gives_identical_result() {
    let data = planted_dataset();
    let grammar = Grammar::new(1, vec![1.5, 1.0]);
    let cfg = GaConfig {
        iterations: 10,
        seed: 77,
        ..GaConfig::default()
    };
    let a = ga::run(&cfg, &data, &grammar).unwrap();
    let b = ga::run(&cfg, &data, &grammar).unwrap();
    assert_eq!(a.best.expr.to_text(), b.best.expr.to_text());
    assert_eq!(a.history, b.history);
}

#[test]
fn zero_fitness_member_survives_every_generation() {
    let data = planted_dataset();
    let grammar = Grammar::new(1, vec![1.5, 1.0]);
    // <expr>=00 binary; <expr>=10 <var>=01 (1.5); <op>=010 (*); <expr>=10 <var>=00 (x1)
    let exact: Genome = "0010010101000".parse().unwrap();
    let padded: Genome = format!("{exact}0000000").parse().unwrap();
    let expr = grammar.decode(&padded).unwrap();
    assert_eq!(expr, Expr::mul(Expr::Const(1.5), Expr::Var(0)));
    let cfg = GaConfig {
        population_size: 6,
        iterations: 5,
        ..GaConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut pop: Vec<ga::Candidate> = (0..6)
        .map(|i| {
            let g = if i == 3 {
                padded.clone()
            } else {
                odesr::genome::random_genome(20, &mut rng, &grammar, 10_000).unwrap()
            };
            let e = grammar.decode(&g).unwrap();
            let f = ga::fitness(&e, &data);
            ga::Candidate::new(e, Some(g), f)
        })
        .collect();
    for _ in 0..5 {
        pop = ga::step(&pop, &cfg, &data, &grammar, &mut rng).unwrap();
        assert_eq!(pop[0].train_rmse, 0.0);
        assert_eq!(pop[0].genome.as_ref(), Some(&padded));
    }
}

#[test]
fn initialization_failure_propagates() {
    let data = planted_dataset();
    let grammar = Grammar::new(1, vec![1.5]);
    let cfg = GaConfig {
        bitstring_length: 1,
        max_attempts: 50,
        ..GaConfig::default()
    };
    assert!(matches!(
        ga::run(&cfg, &data, &grammar),
        Err(ga::GaError::Genome(odesr::genome::GenomeError::InitializationFailure { .. }))
    ));
}

#[test]
fn non_finite_candidates_rank_last() {
    let data = planted_dataset();
    let bad = Expr::unary(UnaryOp::Log, Expr::Var(0));
    assert_eq!(ga::fitness(&bad, &data), f64::INFINITY);
}
