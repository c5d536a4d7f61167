//! Sparse regression over a fixed library of basis functions.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::RegressionDataset;
use crate::expr::{Expr, ParseError, VarNames};
use crate::ga::{fitness, Candidate};
use crate::linalg::{self, Matrix};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SindyError {
    #[error("basis function '{function}' is not finite at sample {sample}")]
    NonFinite { function: String, sample: usize },
    #[error("basis set is empty")]
    EmptyBasis,
    #[error("duplicate basis function name '{0}'")]
    DuplicateName(String),
    #[error("unknown basis preset '{0}'")]
    UnknownPreset(String),
    #[error("basis function '{name}': {source}")]
    Parse { name: String, source: ParseError },
    #[error("invalid basis JSON: {0}")]
    Json(String),
    #[error("invalid sparse solver configuration: {0}")]
    InvalidConfig(String),
    #[error("empty dataset")]
    EmptyData,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BasisFunction {
    pub name: String,
    pub expr: Expr,
}

/// Ordered library of candidate terms.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisSet {
    functions: Vec<BasisFunction>,
}

const PENDULUM: [&str; 8] = [
    "theta1",
    "theta2",
    "sin(theta1)",
    "cos(theta2)",
    "cos(theta1)",
    "sin(theta2)",
    "cos(theta1)*sin(theta2)",
    "1.0",
];

const LOTKA_VOLTERRA: [&str; 9] = [
    "x",
    "y",
    "x*y",
    "sin(x)",
    "sin(y)",
    "cos(x)",
    "cos(y)",
    "1.0",
    "1.5*x + -1*x*y",
];

const CART_POLE: [&str; 27] = [
    "1.0",
    "w",
    "x",
    "y",
    "z",
    "y^2",
    "z^2",
    "y^3",
    "z^3",
    "y^4",
    "z^4",
    "sin(w)",
    "cos(w)",
    "sin(w)*y",
    "sin(w)*z",
    "sin(w)*y^2",
    "sin(w)*z^2",
    "cos(w)^2",
    "cos(w)*sin(w)",
    "cos(w)*sin(w)*y",
    "cos(w)*sin(w)*z",
    "cos(w)*sin(w)*y^2",
    "cos(w)*sin(w)*z^2",
    "-0.2 + 0.5*sin(6.0*t)",
    "cos(w)*(-0.2 + 0.5*sin(6.0*t))",
    "sin(w)*(-0.2 + 0.5*sin(6.0*t))",
    "-1*(cos(w)*(-0.2 + 0.5*sin(6.0*t)) + 19.62*sin(w) - cos(w)*sin(w)*y^2) / (2 + -1*cos(w)^2)",
];

impl BasisSet {
    pub fn new(functions: Vec<BasisFunction>) -> Result<BasisSet, SindyError> {
        if functions.is_empty() {
            return Err(SindyError::EmptyBasis);
        }
        for (i, f) in functions.iter().enumerate() {
            if functions[..i].iter().any(|g| g.name == f.name) {
                return Err(SindyError::DuplicateName(f.name.clone()));
            }
        }
        Ok(BasisSet { functions })
    }

    /// Parses each string as one basis function named `f1, f2, ...`.
    pub fn from_strings<S: AsRef<str>>(
        names: &VarNames,
        exprs: &[S],
    ) -> Result<BasisSet, SindyError> {
        let functions = exprs
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let name = format!("f{}", i + 1);
                names
                    .parse(s.as_ref())
                    .map(|expr| BasisFunction {
                        name: name.clone(),
                        expr,
                    })
                    .map_err(|source| SindyError::Parse { name, source })
            })
            .collect::<Result<Vec<_>, _>>()?;
        BasisSet::new(functions)
    }

    /// Loads a JSON array of expression strings.
    pub fn from_json(names: &VarNames, json: &str) -> Result<BasisSet, SindyError> {
        let exprs: Vec<String> =
            serde_json::from_str(json).map_err(|e| SindyError::Json(e.to_string()))?;
        BasisSet::from_strings(names, &exprs)
    }

    /// Built-in library for `pendulum`, `lotka_volterra` or `cartpole`.
    pub fn preset(system: &str) -> Result<BasisSet, SindyError> {
        match system {
            "pendulum" => BasisSet::from_strings(&VarNames::new(["theta1", "theta2"]), &PENDULUM),
            "lotka_volterra" => BasisSet::from_strings(&VarNames::new(["x", "y"]), &LOTKA_VOLTERRA),
            "cartpole" => {
                BasisSet::from_strings(&VarNames::new(["w", "x", "y", "z"]), &CART_POLE)
            }
            other => Err(SindyError::UnknownPreset(other.to_string())),
        }
    }

    pub fn functions(&self) -> &[BasisFunction] {
        &self.functions
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum SparseConfig {
    Stlsq {
        #[serde(default = "default_threshold")]
        threshold: f64,
        #[serde(default = "default_stlsq_iterations")]
        max_iterations: usize,
    },
    /// `lambda: None` selects λ by a sweep over the training data.
    Lasso {
        #[serde(default)]
        lambda: Option<f64>,
        #[serde(default = "default_lasso_iterations")]
        max_iterations: usize,
        #[serde(default = "default_tolerance")]
        tolerance: f64,
    },
}

fn default_threshold() -> f64 {
    0.05
}

fn default_stlsq_iterations() -> usize {
    50
}

fn default_lasso_iterations() -> usize {
    10_000
}

fn default_tolerance() -> f64 {
    1e-10
}

impl Default for SparseConfig {
    fn default() -> SparseConfig {
        SparseConfig::Stlsq {
            threshold: default_threshold(),
            max_iterations: default_stlsq_iterations(),
        }
    }
}

impl SparseConfig {
    pub fn lasso_sweep() -> SparseConfig {
        SparseConfig::Lasso {
            lambda: None,
            max_iterations: default_lasso_iterations(),
            tolerance: default_tolerance(),
        }
    }

    pub fn validate(&self) -> Result<(), SindyError> {
        let bad = |m: &str| Err(SindyError::InvalidConfig(m.to_string()));
        match *self {
            SparseConfig::Stlsq {
                threshold,
                max_iterations,
            } => {
                if !(threshold > 0.0) {
                    return bad("threshold must be positive");
                }
                if max_iterations == 0 {
                    return bad("max_iterations must be at least 1");
                }
            }
            SparseConfig::Lasso {
                lambda,
                max_iterations,
                tolerance,
            } => {
                if lambda.is_some_and(|l| !(l >= 0.0)) {
                    return bad("lambda must be non-negative");
                }
                if max_iterations == 0 {
                    return bad("max_iterations must be at least 1");
                }
                if !(tolerance > 0.0) {
                    return bad("tolerance must be positive");
                }
            }
        }
        Ok(())
    }
}

/// `A[i][j] = basis_j(t_i, x(t_i))`.
pub fn build_design_matrix(
    basis: &BasisSet,
    data: &RegressionDataset,
) -> Result<Matrix, SindyError> {
    let n = data.len();
    let column = |f: &BasisFunction| -> Result<Vec<f64>, SindyError> {
        data.times
            .iter()
            .zip(&data.states)
            .enumerate()
            .map(|(i, (t, x))| {
                f.expr.eval(*t, x).ok_or_else(|| SindyError::NonFinite {
                    function: f.name.clone(),
                    sample: i,
                })
            })
            .collect()
    };
    #[cfg(feature = "parallel")]
    let columns: Vec<_> = {
        use rayon::prelude::*;
        basis.functions.par_iter().map(column).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let columns: Vec<_> = basis.functions.iter().map(column).collect();
    let columns = columns.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(Matrix::from_columns(n, columns))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseFit {
    pub weights: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Some active set was linearly dependent; dependent columns were dropped.
    pub rank_deficient: bool,
    /// LASSO objective after each sweep.
    pub objective: Vec<f64>,
}

/// Sequentially thresholded least squares.
///
/// Columns are solved in order, so an exactly dependent column loses to the
/// earlier columns spanning it.
pub fn stlsq(a: &Matrix, b: &[f64], threshold: f64, max_iterations: usize) -> SparseFit {
    let p = a.cols();
    let mut active: Vec<usize> = (0..p).collect();
    let mut weights = vec![0.0; p];
    let mut rank_deficient = false;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iterations && !active.is_empty() {
        iterations += 1;
        let ls = linalg::least_squares(a, b, &active);
        rank_deficient = ls.rank_deficient();
        weights.iter_mut().for_each(|w| *w = 0.0);
        for (j, c) in active.iter().zip(&ls.coefficients) {
            weights[*j] = *c;
        }
        let next: Vec<usize> = active
            .iter()
            .copied()
            .filter(|j| weights[*j].abs() >= threshold)
            .collect();
        for j in &active {
            if !next.contains(j) {
                weights[*j] = 0.0;
            }
        }
        if next == active {
            converged = true;
            break;
        }
        active = next;
    }
    if active.is_empty() {
        converged = true;
    }
    if rank_deficient {
        log::warn!("stlsq: linearly dependent basis columns were dropped");
    }
    SparseFit {
        weights,
        iterations,
        converged,
        rank_deficient,
        objective: Vec::new(),
    }
}

fn column_norms(a: &Matrix) -> Vec<f64> {
    (0..a.cols()).map(|j| linalg::norm(a.column(j))).collect()
}

/// Smallest λ for which the LASSO solution (on unit-norm columns) is zero.
pub fn lambda_max(a: &Matrix, b: &[f64]) -> f64 {
    let n = a.rows() as f64;
    column_norms(a)
        .iter()
        .enumerate()
        .filter(|(_, s)| **s > 0.0)
        .map(|(j, s)| linalg::dot(a.column(j), b).abs() / s / n)
        .fold(0.0, f64::max)
}

fn soft_threshold(x: f64, k: f64) -> f64 {
    if x > k {
        x - k
    } else if x < -k {
        x + k
    } else {
        0.0
    }
}

/// Cyclic coordinate descent for `(1/2N)‖Ãv − b‖² + λ‖v‖₁`, where `Ã` is `A`
/// with unit-norm columns; the returned weights are rescaled to `A`.
pub fn lasso_cd(
    a: &Matrix,
    b: &[f64],
    lambda: f64,
    max_iterations: usize,
    tolerance: f64,
) -> SparseFit {
    let (n, p) = (a.rows(), a.cols());
    let nf = n as f64;
    let scales = column_norms(a);
    let cols: Vec<Vec<f64>> = (0..p)
        .map(|j| {
            let s = scales[j];
            a.column(j).iter().map(|v| if s > 0.0 { v / s } else { 0.0 }).collect()
        })
        .collect();
    let mut v = vec![0.0; p];
    let mut residual = b.to_vec();
    let objective_of = |r: &[f64], v: &[f64]| {
        linalg::dot(r, r) / (2.0 * nf) + lambda * v.iter().map(|x| x.abs()).sum::<f64>()
    };
    let mut objective = vec![objective_of(&residual, &v)];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iterations {
        iterations += 1;
        let mut max_change = 0.0f64;
        for j in 0..p {
            if scales[j] == 0.0 {
                continue;
            }
            let col = &cols[j];
            let rho = linalg::dot(col, &residual) + v[j];
            let new = soft_threshold(rho, nf * lambda);
            let delta = new - v[j];
            if delta != 0.0 {
                for (r, c) in residual.iter_mut().zip(col) {
                    *r -= delta * c;
                }
                v[j] = new;
                max_change = max_change.max(delta.abs());
            }
        }
        objective.push(objective_of(&residual, &v));
        if max_change < tolerance {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("lasso_cd: no convergence after {max_iterations} sweeps");
    }
    let weights = v
        .iter()
        .zip(&scales)
        .map(|(v, s)| if *s > 0.0 { v / s } else { 0.0 })
        .collect();
    SparseFit {
        weights,
        iterations,
        converged,
        rank_deficient: false,
        objective,
    }
}

pub const LAMBDA_SWEEP_POINTS: usize = 10;
const LAMBDA_SWEEP_DECADES: f64 = 4.0;
const LAMBDA_SWEEP_SLACK: f64 = 1.01;

fn rmse_of(a: &Matrix, b: &[f64], w: &[f64]) -> f64 {
    let pred = a.mul_vec(w);
    let sse: f64 = pred.iter().zip(b).map(|(p, y)| (p - y) * (p - y)).sum();
    (sse / b.len() as f64).sqrt()
}

/// Runs LASSO on a logarithmic λ grid below `lambda_max` and returns the
/// sparsest fit whose training RMSE is within 1% of the best, with its λ.
pub fn lasso_sweep(
    a: &Matrix,
    b: &[f64],
    max_iterations: usize,
    tolerance: f64,
) -> (f64, SparseFit) {
    let top = lambda_max(a, b);
    let fits: Vec<(f64, SparseFit, f64)> = (0..LAMBDA_SWEEP_POINTS)
        .map(|i| {
            let e = -LAMBDA_SWEEP_DECADES * (1.0 - i as f64 / (LAMBDA_SWEEP_POINTS - 1) as f64);
            let lambda = top * 10f64.powf(e);
            let fit = lasso_cd(a, b, lambda, max_iterations, tolerance);
            let rmse = rmse_of(a, b, &fit.weights);
            (lambda, fit, rmse)
        })
        .collect();
    let best = fits.iter().map(|f| f.2).fold(f64::INFINITY, f64::min);
    let support = |w: &[f64]| w.iter().filter(|v| **v != 0.0).count();
    let (lambda, fit, _) = fits
        .into_iter()
        .filter(|f| f.2 <= best * LAMBDA_SWEEP_SLACK)
        .min_by(|x, y| {
            support(&x.1.weights)
                .cmp(&support(&y.1.weights))
                .then(x.2.total_cmp(&y.2))
        })
        .expect("sweep is non-empty");
    (lambda, fit)
}

#[derive(Debug, Clone)]
pub struct SindyFit {
    pub candidate: Candidate,
    pub weights: Vec<f64>,
    /// λ actually used by a LASSO fit.
    pub lambda: Option<f64>,
    pub warnings: Vec<String>,
}

/// `Σ wⱼ·basisⱼ` over the nonzero weights, or `0` when none remain.
pub fn assemble(basis: &BasisSet, weights: &[f64]) -> Expr {
    basis
        .functions
        .iter()
        .zip(weights)
        .filter(|(_, w)| **w != 0.0)
        .map(|(f, w)| Expr::mul(Expr::Const(*w), f.expr.clone()))
        .reduce(Expr::add)
        .unwrap_or(Expr::Const(0.0))
}

pub fn fit(
    basis: &BasisSet,
    data: &RegressionDataset,
    config: &SparseConfig,
) -> Result<SindyFit, SindyError> {
    config.validate()?;
    if data.is_empty() {
        return Err(SindyError::EmptyData);
    }
    let a = build_design_matrix(basis, data)?;
    let b = &data.targets;
    let (sparse, lambda) = match *config {
        SparseConfig::Stlsq {
            threshold,
            max_iterations,
        } => (stlsq(&a, b, threshold, max_iterations), None),
        SparseConfig::Lasso {
            lambda: Some(lambda),
            max_iterations,
            tolerance,
        } => (lasso_cd(&a, b, lambda, max_iterations, tolerance), Some(lambda)),
        SparseConfig::Lasso {
            lambda: None,
            max_iterations,
            tolerance,
        } => {
            let (l, f) = lasso_sweep(&a, b, max_iterations, tolerance);
            (f, Some(l))
        }
    };
    let mut warnings = Vec::new();
    if sparse.rank_deficient {
        warnings.push("linearly dependent basis columns were dropped".to_string());
    }
    if !sparse.converged {
        warnings.push(format!(
            "sparse solver did not converge in {} iterations",
            sparse.iterations
        ));
    }
    let expr = assemble(basis, &sparse.weights);
    let rmse = fitness(&expr, data);
    Ok(SindyFit {
        candidate: Candidate::new(expr, None, rmse),
        weights: sparse.weights,
        lambda,
        warnings,
    })
}
