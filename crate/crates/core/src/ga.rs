//! Genetic search over grammar-decoded bitstrings.

use std::cmp::Ordering;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::RegressionDataset;
use crate::expr::Expr;
use crate::genome::{self, Genome, GenomeError, Grammar, DEFAULT_MAX_ATTEMPTS};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GaError {
    #[error("invalid GA configuration: {0}")]
    InvalidConfig(String),
    #[error("empty dataset")]
    EmptyData,
    #[error("population member {0} has no genome")]
    MissingGenome(usize),
    #[error(transparent)]
    Genome(#[from] GenomeError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaConfig {
    pub population_size: usize,
    pub bitstring_length: usize,
    pub iterations: usize,
    pub mutation_rate: f64,
    pub selection_fraction: f64,
    pub seed: u64,
    pub max_attempts: usize,
}

impl Default for GaConfig {
    fn default() -> GaConfig {
        GaConfig {
            population_size: 70,
            bitstring_length: 20,
            iterations: 100,
            mutation_rate: 0.1,
            selection_fraction: 0.5,
            seed: 0,
            max_attempts: DEFAULT_MAX_ATTEMPTS,
        }
    }
}

impl GaConfig {
    /// Benchmark settings for the built-in systems.
    pub fn preset(system: &str) -> Option<GaConfig> {
        let (bitstring_length, population_size, iterations) = match system {
            "lotka_volterra" => (20, 70, 100),
            "pendulum" => (20, 70, 40),
            "cartpole" => (60, 100, 100),
            _ => return None,
        };
        Some(GaConfig {
            population_size,
            bitstring_length,
            iterations,
            ..GaConfig::default()
        })
    }

    pub fn with_seed(self, seed: u64) -> GaConfig {
        GaConfig { seed, ..self }
    }

    pub fn validate(&self) -> Result<(), GaError> {
        let bad = |m: &str| Err(GaError::InvalidConfig(m.to_string()));
        if self.population_size < 2 || self.population_size % 2 != 0 {
            return bad("population_size must be even and at least 2");
        }
        if self.iterations == 0 {
            return bad("iterations must be at least 1");
        }
        if !(self.selection_fraction > 0.0 && self.selection_fraction < 1.0) {
            return bad("selection_fraction must lie in (0, 1)");
        }
        if !(0.0..=1.0).contains(&self.mutation_rate) {
            return bad("mutation_rate must lie in [0, 1]");
        }
        if self.max_attempts == 0 {
            return bad("max_attempts must be at least 1");
        }
        Ok(())
    }

    fn survivors(&self) -> usize {
        let s = (self.population_size as f64 * self.selection_fraction).ceil() as usize;
        s.clamp(1, self.population_size)
    }
}

/// An expression with its fit statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub expr: Expr,
    pub genome: Option<Genome>,
    /// `+∞` when the expression is non-finite on some sample.
    pub train_rmse: f64,
    pub complexity: usize,
}

impl Candidate {
    pub fn new(expr: Expr, genome: Option<Genome>, train_rmse: f64) -> Candidate {
        let complexity = expr.complexity();
        Candidate {
            expr,
            genome,
            train_rmse,
            complexity,
        }
    }

    pub fn evaluated(expr: Expr, data: &RegressionDataset) -> Candidate {
        let rmse = fitness(&expr, data);
        Candidate::new(expr, None, rmse)
    }

    /// Orders by RMSE, then complexity.
    pub fn rank_cmp(&self, other: &Candidate) -> Ordering {
        self.train_rmse
            .total_cmp(&other.train_rmse)
            .then(self.complexity.cmp(&other.complexity))
    }
}

/// Root mean square error of `expr` against the dataset targets; `+∞` on any
/// non-finite evaluation.
pub fn fitness(expr: &Expr, data: &RegressionDataset) -> f64 {
    if data.is_empty() {
        return f64::INFINITY;
    }
    let mut sum = 0.0;
    for ((t, x), y) in data.times.iter().zip(&data.states).zip(&data.targets) {
        let v = expr.eval_raw(*t, x);
        if !v.is_finite() {
            return f64::INFINITY;
        }
        sum += (v - y) * (v - y);
    }
    let rmse = (sum / data.len() as f64).sqrt();
    if rmse.is_finite() {
        rmse
    } else {
        f64::INFINITY
    }
}

fn evaluate_genomes(
    genomes: Vec<Genome>,
    grammar: &Grammar,
    data: &RegressionDataset,
) -> Vec<Candidate> {
    let eval = |g: Genome| {
        let expr = grammar.decode(&g).expect("genomes are valid by construction");
        let rmse = fitness(&expr, data);
        Candidate::new(expr, Some(g), rmse)
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        genomes.into_par_iter().map(eval).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        genomes.into_iter().map(eval).collect()
    }
}

/// One generation: the top `⌈N·selection_fraction⌉` candidates survive
/// unchanged and the remaining slots are filled with one mutant per survivor,
/// in rank order.
pub fn step(
    pop: &[Candidate],
    config: &GaConfig,
    data: &RegressionDataset,
    grammar: &Grammar,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Candidate>, GaError> {
    let mut order: Vec<usize> = (0..pop.len()).collect();
    order.sort_by(|a, b| pop[*a].rank_cmp(&pop[*b]).then(a.cmp(b)));
    let keep = config.survivors().min(pop.len());
    let survivors: Vec<Candidate> = order[..keep].iter().map(|i| pop[*i].clone()).collect();

    let slots = pop.len().saturating_sub(keep);
    let mut mutants = Vec::with_capacity(slots);
    for k in 0..slots {
        let parent = &survivors[k % keep];
        let g = parent
            .genome
            .as_ref()
            .ok_or(GaError::MissingGenome(order[k % keep]))?;
        mutants.push(genome::mutate(
            g,
            config.mutation_rate,
            rng,
            grammar,
            config.max_attempts,
        )?);
    }
    let mut next = survivors;
    next.extend(evaluate_genomes(mutants, grammar, data));
    Ok(next)
}

#[derive(Debug, Clone)]
pub struct GaOutcome {
    pub best: Candidate,
    /// Best fitness after each generation.
    pub history: Vec<f64>,
}

pub fn run(config: &GaConfig, data: &RegressionDataset, grammar: &Grammar) -> Result<GaOutcome, GaError> {
    run_with(config, data, grammar, |_, _| {})
}

/// Like [`run`], calling `observe(generation, population)` on the initial
/// population (generation 0) and after every generation.
pub fn run_with<F>(
    config: &GaConfig,
    data: &RegressionDataset,
    grammar: &Grammar,
    mut observe: F,
) -> Result<GaOutcome, GaError>
where
    F: FnMut(usize, &[Candidate]),
{
    config.validate()?;
    grammar.validate_for_search()?;
    if data.is_empty() {
        return Err(GaError::EmptyData);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let genomes = (0..config.population_size)
        .map(|_| {
            genome::random_genome(
                config.bitstring_length,
                &mut rng,
                grammar,
                config.max_attempts,
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut pop = evaluate_genomes(genomes, grammar, data);
    observe(0, &pop);
    let mut best = best_of(&pop).clone();
    let mut history = Vec::with_capacity(config.iterations);
    for generation in 1..=config.iterations {
        pop = step(&pop, config, data, grammar, &mut rng)?;
        observe(generation, &pop);
        let gen_best = best_of(&pop);
        if gen_best.rank_cmp(&best) == Ordering::Less {
            best = gen_best.clone();
        }
        history.push(best.train_rmse);
        log::debug!("generation {generation}: best rmse {}", best.train_rmse);
    }
    Ok(GaOutcome { best, history })
}

fn best_of(pop: &[Candidate]) -> &Candidate {
    pop.iter()
        .reduce(|a, b| if b.rank_cmp(a) == Ordering::Less { b } else { a })
        .expect("population is non-empty")
}
