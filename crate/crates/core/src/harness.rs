//! Test error, hybrid rollouts and benchmark sweeps.

use std::fmt;
use std::io::{self, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{BenchConfig, ConfigError, ResolvedSystem};
use crate::dataset::{self, DatasetError, RegressionDataset, Split};
use crate::dynamics::SystemSpec;
use crate::expr::Expr;
use crate::feynman::{self, FeynmanError};
use crate::ga::{self, Candidate, GaError};
use crate::sindy::{self, SindyError};
use crate::solver::{self, fmt_sig17, IntegratorConfig, SolverError, Trajectory};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Ga(#[from] GaError),
    #[error(transparent)]
    Sindy(#[from] SindyError),
    #[error(transparent)]
    Feynman(#[from] FeynmanError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("expression uses variable {index} but the system has {dim} dimensions")]
    ExprDimension { index: usize, dim: usize },
    #[error("repetitions must be at least 1")]
    NoRepetitions,
    #[error("unknown method '{0}' (expected ga, sindy or feynman)")]
    UnknownMethod(String),
    #[error("system '{0}' has no SINDy basis")]
    MissingBasis(String),
    #[error("io: {0}")]
    Io(#[from] io::Error),
}

impl HarnessError {
    /// Argument and configuration problems, as opposed to numerical failures.
    pub fn is_usage_error(&self) -> bool {
        matches!(
            self,
            HarnessError::Config(_)
                | HarnessError::ExprDimension { .. }
                | HarnessError::NoRepetitions
                | HarnessError::UnknownMethod(_)
                | HarnessError::MissingBasis(_)
                | HarnessError::Ga(GaError::InvalidConfig(_))
                | HarnessError::Sindy(SindyError::InvalidConfig(_))
                | HarnessError::Feynman(FeynmanError::InvalidConfig(_))
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Ga,
    Sindy,
    Feynman,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Ga, Method::Sindy, Method::Feynman];

    pub fn name(self) -> &'static str {
        match self {
            Method::Ga => "ga",
            Method::Sindy => "sindy",
            Method::Feynman => "feynman",
        }
    }

    /// Seed-independent methods are run once per system.
    pub fn is_deterministic(self) -> bool {
        !matches!(self, Method::Ga)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Method, HarnessError> {
        match s {
            "ga" => Ok(Method::Ga),
            "sindy" => Ok(Method::Sindy),
            "feynman" | "aifeynman" => Ok(Method::Feynman),
            other => Err(HarnessError::UnknownMethod(other.to_string())),
        }
    }
}

/// Test inputs `(τᵢ, x(τᵢ))` with the ground-truth target derivative.
pub fn test_dataset(
    system: &SystemSpec,
    config: &IntegratorConfig,
) -> Result<RegressionDataset, HarnessError> {
    Ok(dataset::make_exact_dataset(system, Split::Test, config)?)
}

/// RMSE between `expr` and the targets of `data`; `+∞` when non-finite.
pub fn test_error_on(expr: &Expr, data: &RegressionDataset) -> f64 {
    ga::fitness(expr, data)
}

/// RMSE between `expr` and the ground-truth target right-hand side along
/// the sampled test trajectory.
pub fn test_error(
    expr: &Expr,
    system: &SystemSpec,
    config: &IntegratorConfig,
) -> Result<f64, HarnessError> {
    check_dim(expr, system)?;
    let data = test_dataset(system, config)?;
    Ok(test_error_on(expr, &data))
}

fn check_dim(expr: &Expr, system: &SystemSpec) -> Result<(), HarnessError> {
    match expr.max_var_index() {
        Some(i) if i >= system.dim() => Err(HarnessError::ExprDimension {
            index: i,
            dim: system.dim(),
        }),
        _ => Ok(()),
    }
}

/// Ground truth next to the hybrid system driven by an estimate.
#[derive(Debug, Clone)]
pub struct Rollout {
    pub truth: Trajectory,
    pub hybrid: Trajectory,
    /// Time of the last good hybrid step when the hybrid integration failed.
    pub divergence_time: Option<f64>,
}

impl Rollout {
    /// Columns `t, <names>, <names>_hat`; hybrid cells past divergence stay empty.
    pub fn write_csv<W: Write>(&self, names: &crate::expr::VarNames, mut out: W) -> io::Result<()> {
        write!(out, "t")?;
        for n in names.names() {
            write!(out, ",{n}")?;
        }
        for n in names.names() {
            write!(out, ",{n}_hat")?;
        }
        writeln!(out)?;
        for (i, (t, x)) in self.truth.times.iter().zip(&self.truth.states).enumerate() {
            write!(out, "{}", fmt_sig17(*t))?;
            for v in x {
                write!(out, ",{}", fmt_sig17(*v))?;
            }
            match self.hybrid.states.get(i) {
                Some(h) => {
                    for v in h {
                        write!(out, ",{}", fmt_sig17(*v))?;
                    }
                }
                None => {
                    for _ in x {
                        write!(out, ",")?;
                    }
                }
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Integrates the system with the target dimension's right-hand side replaced
/// by `expr`, alongside the ground truth, from the system's initial state.
pub fn rollout_with_estimate(
    expr: &Expr,
    system: &SystemSpec,
    span: (f64, f64),
    config: &IntegratorConfig,
) -> Result<Rollout, HarnessError> {
    check_dim(expr, system)?;
    let truth = solver::integrate(&*system.rhs_fn(), &system.initial_state, span, config)?;
    let hybrid_system = system.hybrid(expr.clone());
    let (hybrid, failure) = solver::integrate_partial(
        &*hybrid_system.rhs_fn(),
        &system.initial_state,
        span,
        config,
    )?;
    let divergence_time = failure.and_then(|e| {
        log::warn!("hybrid rollout stopped: {e}");
        e.last_good_time()
    });
    Ok(Rollout {
        truth,
        hybrid,
        divergence_time,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoPoint {
    pub complexity: usize,
    pub train_rmse: f64,
    pub expression: String,
}

/// Outcome of one method on one system with one seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub method: Method,
    pub system: String,
    pub seed: u64,
    pub expression: String,
    pub train_rmse: f64,
    pub test_error: f64,
    pub complexity: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub pareto: Option<Vec<ParetoPoint>>,
    pub warnings: Vec<String>,
    /// Seconds; not written to benchmark files.
    #[serde(skip)]
    pub wall_time: f64,
    /// Best fitness per generation, GA only.
    #[serde(skip)]
    pub history: Vec<f64>,
}

struct Stopwatch {
    #[cfg(not(target_arch = "wasm32"))]
    start: std::time::Instant,
}

impl Stopwatch {
    fn start() -> Stopwatch {
        Stopwatch {
            #[cfg(not(target_arch = "wasm32"))]
            start: std::time::Instant::now(),
        }
    }

    fn seconds(&self) -> f64 {
        #[cfg(not(target_arch = "wasm32"))]
        {
            self.start.elapsed().as_secs_f64()
        }
        #[cfg(target_arch = "wasm32")]
        {
            0.0
        }
    }
}

/// Fits one method on the finite-difference training data of `system`.
pub fn fit_method(
    method: Method,
    system: &ResolvedSystem,
    seed: u64,
    integrator: &IntegratorConfig,
) -> Result<FitRecord, HarnessError> {
    let clock = Stopwatch::start();
    let spec = &system.spec;
    let train = dataset::make_dataset(spec, Split::Train, integrator)?;
    let mut warnings = Vec::new();
    let mut pareto = None;
    let mut history = Vec::new();
    let best: Candidate = match method {
        Method::Ga => {
            let cfg = system.ga.clone().with_seed(seed);
            let out = ga::run(&cfg, &train, &system.grammar)?;
            history = out.history;
            out.best
        }
        Method::Sindy => {
            let basis = system
                .basis
                .as_ref()
                .ok_or_else(|| HarnessError::MissingBasis(spec.name.clone()))?;
            let fit = sindy::fit(basis, &train, &system.sparse)?;
            warnings.extend(fit.warnings);
            fit.candidate
        }
        Method::Feynman => {
            let out = feynman::run_pipeline(&train, &system.feynman)?;
            warnings.push(format!("method: {}", feynman::METHOD_LABEL));
            warnings.extend(out.warnings);
            pareto = Some(
                out.front
                    .candidates
                    .iter()
                    .map(|c| ParetoPoint {
                        complexity: c.complexity,
                        train_rmse: c.train_rmse,
                        expression: spec.variable_names.print(&c.expr),
                    })
                    .collect(),
            );
            out.best
        }
    };
    let test_error = test_error(&best.expr, spec, integrator)?;
    Ok(FitRecord {
        method,
        system: spec.name.clone(),
        seed,
        expression: spec.variable_names.print(&best.expr),
        train_rmse: best.train_rmse,
        test_error,
        complexity: best.complexity,
        pareto,
        warnings,
        wall_time: clock.seconds(),
        history,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkResult {
    pub method: Method,
    pub system: String,
    pub runs: Vec<FitRecord>,
    pub failures: Vec<RunFailure>,
    /// Over `runs`; NaN when every run failed.
    pub mean_test_error: f64,
    /// Population standard deviation over `runs`.
    pub std_test_error: f64,
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Runs every method on every system, repeating seeded methods with seeds
/// `base_seed .. base_seed + repetitions`. Individual run failures are
/// recorded, not raised.
pub fn run_benchmark(
    methods: &[Method],
    systems: &[String],
    repetitions: usize,
    base_seed: u64,
    config: &BenchConfig,
) -> Result<Vec<BenchmarkResult>, HarnessError> {
    if repetitions == 0 {
        return Err(HarnessError::NoRepetitions);
    }
    let resolved = systems
        .iter()
        .map(|s| config.resolve(s))
        .collect::<Result<Vec<_>, _>>()?;
    let mut cells = Vec::new();
    for m in methods {
        for (si, _) in resolved.iter().enumerate() {
            let reps = if m.is_deterministic() { 1 } else { repetitions };
            for r in 0..reps {
                cells.push((*m, si, base_seed + r as u64));
            }
        }
    }
    let run_cell = |&(m, si, seed): &(Method, usize, u64)| {
        log::info!("{} on {} (seed {seed})", m, resolved[si].spec.name);
        fit_method(m, &resolved[si], seed, &config.integrator).map_err(|e| e.to_string())
    };
    #[cfg(feature = "parallel")]
    let outcomes: Vec<_> = {
        use rayon::prelude::*;
        cells.par_iter().map(run_cell).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let outcomes: Vec<_> = cells.iter().map(run_cell).collect();

    let mut results: Vec<BenchmarkResult> = Vec::new();
    for ((m, si, seed), outcome) in cells.into_iter().zip(outcomes) {
        let name = &resolved[si].spec.name;
        if results.last().map_or(true, |r| r.method != m || &r.system != name) {
            results.push(BenchmarkResult {
                method: m,
                system: name.clone(),
                runs: Vec::new(),
                failures: Vec::new(),
                mean_test_error: f64::NAN,
                std_test_error: f64::NAN,
            });
        }
        let r = results.last_mut().expect("just pushed");
        match outcome {
            Ok(rec) => r.runs.push(rec),
            Err(error) => {
                log::warn!("{m} on {name} seed {seed} failed: {error}");
                r.failures.push(RunFailure { seed, error });
            }
        }
    }
    for r in &mut results {
        let errs: Vec<f64> = r.runs.iter().map(|x| x.test_error).collect();
        (r.mean_test_error, r.std_test_error) = mean_std(&errs);
    }
    Ok(results)
}

/// `method,system,mean,std,runs,failures`.
pub fn write_table<W: Write>(results: &[BenchmarkResult], mut out: W) -> io::Result<()> {
    writeln!(out, "method,system,mean,std,runs,failures")?;
    for r in results {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.method,
            r.system,
            fmt_sig17(r.mean_test_error),
            fmt_sig17(r.std_test_error),
            r.runs.len(),
            r.failures.len()
        )?;
    }
    Ok(())
}

/// Writes `table.csv`, one JSON per run and one per benchmark cell into `dir`.
pub fn write_bench_outputs(results: &[BenchmarkResult], dir: &Path) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir)?;
    write_table(results, io::BufWriter::new(std::fs::File::create(dir.join("table.csv"))?))?;
    for r in results {
        for run in &r.runs {
            let path = dir.join(format!("{}_{}_seed{}.json", r.method, r.system, run.seed));
            let text = serde_json::to_string_pretty(run).expect("serializable");
            std::fs::write(path, text + "\n")?;
        }
        let path = dir.join(format!("{}_{}.json", r.method, r.system));
        let text = serde_json::to_string_pretty(r).expect("serializable");
        std::fs::write(path, text + "\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics;

    #[test]
    fn stats() {
        let (m, s) = mean_std(&[1.0, 3.0]);
        assert_eq!((m, s), (2.0, 1.0));
        assert_eq!(mean_std(&[5.0]), (5.0, 0.0));
        assert!(mean_std(&[]).0.is_nan());
    }

    #[test]
    fn method_names() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("nn".parse::<Method>().is_err());
    }

    #[test]
    fn zero_repetitions_is_rejected() {
        let err = run_benchmark(
            &[Method::Sindy],
            &["lotka_volterra".into()],
            0,
            0,
            &BenchConfig::default(),
        )
        .unwrap_err();
        assert!(matches!(err, HarnessError::NoRepetitions));
        assert!(err.is_usage_error());
    }

    #[test]
    fn wrong_dimension_expression() {
        let lv = dynamics::lotka_volterra();
        let err = test_error(&Expr::Var(3), &lv, &IntegratorConfig::default()).unwrap_err();
        assert!(matches!(err, HarnessError::ExprDimension { index: 3, dim: 2 }));
    }

    #[test]
    fn frozen_dimension_rollout() {
        let lv = dynamics::lotka_volterra();
        let r = rollout_with_estimate(&Expr::Const(0.0), &lv, (0.0, 10.0), &IntegratorConfig::default())
            .unwrap();
        assert!(r.hybrid.states.iter().all(|x| x[1] == 1.0));
        assert!(r.divergence_time.is_none());
    }
}
