//! DynAIFeynman-lite: polynomial fits, brute-force skeleton search with a
//! fitted scalar multiplier, additive separability on a polynomial surrogate,
//! and a Pareto front over (complexity, error).

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::RegressionDataset;
use crate::expr::{BinaryOp, Expr, UnaryOp};
use crate::ga::{fitness, Candidate};
use crate::linalg::{self, Matrix};

pub const METHOD_LABEL: &str = "DynAIFeynman-lite";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FeynmanError {
    #[error(
        "degree-{degree} polynomial in {variables} variables needs more than {required} samples, got {available}"
    )]
    Underdetermined {
        degree: usize,
        variables: usize,
        required: usize,
        available: usize,
    },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("empty dataset")]
    EmptyData,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeynmanConfig {
    pub max_poly_degree: usize,
    pub max_brute_nodes: usize,
    pub unary_ops: Vec<UnaryOp>,
    pub binary_ops: Vec<BinaryOp>,
    /// Wall-clock budget in seconds per brute-force search; ignored on wasm.
    pub time_budget: Option<f64>,
    /// Brute-force candidates kept by error, in addition to the best per size.
    pub top_k: usize,
    /// Relative weight of mixed terms below which a split is accepted.
    pub separability_tolerance: f64,
}

impl Default for FeynmanConfig {
    fn default() -> FeynmanConfig {
        FeynmanConfig {
            max_poly_degree: 4,
            max_brute_nodes: 7,
            unary_ops: vec![UnaryOp::Sin, UnaryOp::Cos, UnaryOp::Log, UnaryOp::Exp],
            binary_ops: BinaryOp::ALL.to_vec(),
            time_budget: None,
            top_k: 50,
            separability_tolerance: 1e-2,
        }
    }
}

impl FeynmanConfig {
    pub fn validate(&self) -> Result<(), FeynmanError> {
        let bad = |m: &str| Err(FeynmanError::InvalidConfig(m.to_string()));
        if self.max_poly_degree == 0 {
            return bad("max_poly_degree must be at least 1");
        }
        if self.max_brute_nodes == 0 {
            return bad("max_brute_nodes must be at least 1");
        }
        if self.time_budget.is_some_and(|b| !(b > 0.0)) {
            return bad("time_budget must be positive");
        }
        if !(self.separability_tolerance > 0.0) {
            return bad("separability_tolerance must be positive");
        }
        Ok(())
    }
}

/// Exponent vectors of all monomials in `k` variables of total degree
/// `≤ degree`, graded by degree and lexicographically descending within one.
pub fn monomials(k: usize, degree: usize) -> Vec<Vec<u32>> {
    fn fill(k: usize, left: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if prefix.len() == k - 1 {
            prefix.push(left);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for e in (0..=left).rev() {
            prefix.push(e);
            fill(k, left - e, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if k == 0 {
        out.push(Vec::new());
        return out;
    }
    for d in 0..=degree as u32 {
        fill(k, d, &mut Vec::with_capacity(k), &mut out);
    }
    out
}

fn monomial_value(exps: &[u32], vars: &[usize], x: &[f64]) -> f64 {
    exps.iter()
        .zip(vars)
        .map(|(e, v)| x[*v].powi(*e as i32))
        .product()
}

fn monomial_expr(exps: &[u32], vars: &[usize]) -> Option<Expr> {
    exps.iter()
        .zip(vars)
        .filter(|(e, _)| **e > 0)
        .map(|(e, v)| {
            if *e == 1 {
                Expr::Var(*v)
            } else {
                Expr::pow(Expr::Var(*v), Expr::Const(*e as f64))
            }
        })
        .reduce(Expr::mul)
}

/// Least-squares polynomial fit.
#[derive(Debug, Clone)]
pub struct PolyFit {
    pub candidate: Candidate,
    pub monomials: Vec<Vec<u32>>,
    /// One coefficient per monomial.
    pub coefficients: Vec<f64>,
    /// Variables the exponents refer to.
    pub variables: Vec<usize>,
}

fn poly_matrix(data: &RegressionDataset, monos: &[Vec<u32>], vars: &[usize]) -> Matrix {
    let n = data.len();
    let cols = monos
        .iter()
        .map(|m| data.states.iter().map(|x| monomial_value(m, vars, x)).collect())
        .collect();
    Matrix::from_columns(n, cols)
}

fn poly_expr(monos: &[Vec<u32>], coefficients: &[f64], vars: &[usize]) -> Expr {
    monos
        .iter()
        .zip(coefficients)
        .filter(|(_, c)| **c != 0.0)
        .map(|(m, c)| match monomial_expr(m, vars) {
            Some(e) => Expr::mul(Expr::Const(*c), e),
            None => Expr::Const(*c),
        })
        .reduce(Expr::add)
        .unwrap_or(Expr::Const(0.0))
}

/// Fits all monomials of total degree `≤ degree` in every state variable.
pub fn polyfit(data: &RegressionDataset, degree: usize) -> Result<PolyFit, FeynmanError> {
    let vars: Vec<usize> = (0..data.dim()).collect();
    polyfit_vars(data, degree, &vars)
}

/// Like [`polyfit`], restricted to the variables in `vars`.
pub fn polyfit_vars(
    data: &RegressionDataset,
    degree: usize,
    vars: &[usize],
) -> Result<PolyFit, FeynmanError> {
    if data.is_empty() {
        return Err(FeynmanError::EmptyData);
    }
    let monos = monomials(vars.len(), degree);
    if data.len() <= monos.len() {
        return Err(FeynmanError::Underdetermined {
            degree,
            variables: vars.len(),
            required: monos.len(),
            available: data.len(),
        });
    }
    let a = poly_matrix(data, &monos, vars);
    let cols: Vec<usize> = (0..monos.len()).collect();
    let ls = linalg::least_squares(&a, &data.targets, &cols);
    let expr = poly_expr(&monos, &ls.coefficients, vars);
    let rmse = fitness(&expr, data);
    Ok(PolyFit {
        candidate: Candidate::new(expr, None, rmse),
        monomials: monos,
        coefficients: ls.coefficients,
        variables: vars.to_vec(),
    })
}

#[derive(Debug, Clone, Copy)]
enum Node {
    Var(usize),
    Unary(UnaryOp, u32),
    Binary(BinaryOp, (u8, u32), (u8, u32)),
}

struct Level {
    nodes: Vec<Node>,
    values: Vec<f64>,
}

struct Arena {
    n: usize,
    /// `levels[s]` holds the finite skeletons with `s` nodes.
    levels: Vec<Level>,
}

impl Arena {
    fn values(&self, size: usize, idx: u32) -> &[f64] {
        let i = idx as usize * self.n;
        &self.levels[size].values[i..i + self.n]
    }

    fn eval_into(&self, node: &Node, data: &RegressionDataset, out: &mut [f64]) {
        match *node {
            Node::Var(v) => {
                for (o, x) in out.iter_mut().zip(&data.states) {
                    *o = x[v];
                }
            }
            Node::Unary(op, child) => {
                // the child level is always the one just below
                let size = self.levels.len() - 1;
                let c = self.values(size, child);
                for (o, x) in out.iter_mut().zip(c) {
                    *o = op.apply(*x);
                }
            }
            Node::Binary(op, (sl, il), (sr, ir)) => {
                let l = self.values(sl as usize, il);
                let r = self.values(sr as usize, ir);
                for ((o, a), b) in out.iter_mut().zip(l).zip(r) {
                    *o = op.apply(*a, *b);
                }
            }
        }
    }

    fn expr(&self, size: usize, node: &Node) -> Expr {
        match *node {
            Node::Var(v) => Expr::Var(v),
            Node::Unary(op, c) => {
                Expr::unary(op, self.expr(size - 1, &self.levels[size - 1].nodes[c as usize]))
            }
            Node::Binary(op, (sl, il), (sr, ir)) => Expr::binary(
                op,
                self.expr(sl as usize, &self.levels[sl as usize].nodes[il as usize]),
                self.expr(sr as usize, &self.levels[sr as usize].nodes[ir as usize]),
            ),
        }
    }
}

#[derive(Clone, Copy)]
struct Scored {
    sse: f64,
    size: usize,
    seq: u64,
    c: f64,
    node: Node,
}

fn scored_cmp(a: &Scored, b: &Scored) -> Ordering {
    a.sse
        .total_cmp(&b.sse)
        .then(a.size.cmp(&b.size))
        .then(a.seq.cmp(&b.seq))
}

const BLOCK: usize = 4096;

struct Deadline {
    #[cfg(not(target_arch = "wasm32"))]
    at: Option<std::time::Instant>,
}

impl Deadline {
    #[allow(unused_variables)]
    fn new(budget: Option<f64>) -> Deadline {
        Deadline {
            #[cfg(not(target_arch = "wasm32"))]
            at: budget.map(|b| std::time::Instant::now() + std::time::Duration::from_secs_f64(b)),
        }
    }

    fn passed(&self) -> bool {
        #[cfg(not(target_arch = "wasm32"))]
        {
            self.at.is_some_and(|at| std::time::Instant::now() >= at)
        }
        #[cfg(target_arch = "wasm32")]
        {
            false
        }
    }
}

fn candidates_for_level(
    size: usize,
    vars: &[usize],
    config: &FeynmanConfig,
    arena: &Arena,
) -> Vec<Node> {
    let mut out = Vec::new();
    if size == 1 {
        out.extend(vars.iter().map(|v| Node::Var(*v)));
        return out;
    }
    let unary: Vec<UnaryOp> = config
        .unary_ops
        .iter()
        .copied()
        .filter(|op| *op != UnaryOp::Identity)
        .collect();
    let below = arena.levels[size - 1].nodes.len() as u32;
    let children = &arena.levels[size - 1].nodes;
    for op in &unary {
        // log(exp(g)) is g wherever it is finite
        out.extend(
            (0..below)
                .filter(|i| {
                    !(*op == UnaryOp::Log
                        && matches!(children[*i as usize], Node::Unary(UnaryOp::Exp, _)))
                })
                .map(|i| Node::Unary(*op, i)),
        );
    }
    for op in &config.binary_ops {
        for sl in 1..size - 1 {
            let sr = size - 1 - sl;
            if op.is_commutative() && sl > sr {
                continue;
            }
            let nl = arena.levels[sl].nodes.len() as u32;
            let nr = arena.levels[sr].nodes.len() as u32;
            for il in 0..nl {
                let start = if op.is_commutative() && sl == sr { il } else { 0 };
                for ir in start..nr {
                    out.push(Node::Binary(*op, (sl as u8, il), (sr as u8, ir)));
                }
            }
        }
    }
    out
}

fn score(values: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    if values.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let gg = linalg::dot(values, values);
    if !(gg > 0.0) || !gg.is_finite() {
        return None;
    }
    let c = linalg::dot(y, values) / gg;
    if !c.is_finite() {
        return None;
    }
    let sse: f64 = values.iter().zip(y).map(|(g, t)| (t - c * g) * (t - c * g)).sum();
    sse.is_finite().then_some((c, sse))
}

/// Enumerates skeletons over all state variables; see [`brute_force_vars`].
pub fn brute_force(data: &RegressionDataset, config: &FeynmanConfig) -> Vec<Candidate> {
    let vars: Vec<usize> = (0..data.dim()).collect();
    brute_force_vars(data, config, &vars)
}

/// Enumerates every operator skeleton over `vars` with at most
/// `max_brute_nodes` nodes, fits `c·g` in closed form, and returns the
/// `top_k` lowest-error fits plus the best fit of each size, ordered by error.
pub fn brute_force_vars(
    data: &RegressionDataset,
    config: &FeynmanConfig,
    vars: &[usize],
) -> Vec<Candidate> {
    let n = data.len();
    if n == 0 || vars.is_empty() {
        return Vec::new();
    }
    let deadline = Deadline::new(config.time_budget);
    let y = &data.targets;
    let mut arena = Arena {
        n,
        levels: vec![Level {
            nodes: Vec::new(),
            values: Vec::new(),
        }],
    };
    let mut top: Vec<Scored> = Vec::new();
    let mut best_per_size: Vec<Option<Scored>> = vec![None; config.max_brute_nodes + 1];
    let mut seq = 0u64;
    'sizes: for size in 1..=config.max_brute_nodes {
        let nodes = candidates_for_level(size, vars, config, &arena);
        let keep_values = size < config.max_brute_nodes;
        let mut level = Level {
            nodes: Vec::new(),
            values: Vec::new(),
        };
        for block in nodes.chunks(BLOCK) {
            if deadline.passed() {
                log::info!("brute force stopped by time budget at size {size}");
                arena.levels.push(level);
                break 'sizes;
            }
            let mut buf = vec![0.0; block.len() * n];
            let fill = |(node, out): (&Node, &mut [f64])| arena.eval_into(node, data, out);
            #[cfg(feature = "parallel")]
            {
                use rayon::prelude::*;
                block.par_iter().zip(buf.par_chunks_mut(n)).for_each(fill);
            }
            #[cfg(not(feature = "parallel"))]
            block.iter().zip(buf.chunks_mut(n)).for_each(fill);

            for (node, vals) in block.iter().zip(buf.chunks(n)) {
                let this = seq;
                seq += 1;
                if vals.iter().any(|v| !v.is_finite()) {
                    continue;
                }
                if keep_values {
                    level.nodes.push(*node);
                    level.values.extend_from_slice(vals);
                }
                let Some((c, sse)) = score(vals, y) else {
                    continue;
                };
                let s = Scored {
                    sse,
                    size,
                    seq: this,
                    c,
                    node: *node,
                };
                let slot = &mut best_per_size[size];
                if slot.map_or(true, |b| scored_cmp(&s, &b) == Ordering::Less) {
                    *slot = Some(s);
                }
                top.push(s);
            }
            if top.len() > 4 * config.top_k.max(1) {
                top.sort_by(scored_cmp);
                top.truncate(config.top_k);
            }
        }
        arena.levels.push(level);
    }
    top.sort_by(scored_cmp);
    top.truncate(config.top_k);
    let mut chosen: Vec<Scored> = top;
    for s in best_per_size.into_iter().flatten() {
        if !chosen.iter().any(|c| c.seq == s.seq) {
            chosen.push(s);
        }
    }
    chosen.sort_by(scored_cmp);

    let mut seen = std::collections::HashSet::new();
    let names = crate::expr::VarNames::indexed(data.dim());
    chosen
        .into_iter()
        .filter_map(|s| {
            let g = arena.expr(s.size, &s.node);
            let expr = Expr::mul(Expr::Const(s.c), g).canonical(&names);
            if !seen.insert(names.print(&expr)) {
                return None;
            }
            let rmse = fitness(&expr, data);
            Some(Candidate::new(expr, None, rmse))
        })
        .collect()
}

/// Variable partition accepted by the separability test.
#[derive(Debug, Clone, PartialEq)]
pub struct Separation {
    pub left: Vec<usize>,
    pub right: Vec<usize>,
    /// Relative weight of the mixed terms.
    pub mixed_ratio: f64,
    pub left_data: RegressionDataset,
    pub right_data: RegressionDataset,
}

/// Tests every bipartition of the state variables for additive
/// separability using a polynomial surrogate. The surrogate uses the largest
/// degree `≤ 4` the sample count supports.
pub fn separability_split(data: &RegressionDataset, tolerance: f64) -> Option<Separation> {
    let k = data.dim();
    if k < 2 || data.is_empty() {
        return None;
    }
    let degree = (1..=4)
        .rev()
        .find(|d| monomials(k, *d).len() < data.len())?;
    let vars: Vec<usize> = (0..k).collect();
    let fit = polyfit_vars(data, degree, &vars).ok()?;
    let a = poly_matrix(data, &fit.monomials, &vars);
    // weight of a term = |coefficient| · ‖column‖
    let weights: Vec<f64> = (0..fit.monomials.len())
        .map(|j| (fit.coefficients[j] * linalg::norm(a.column(j))).powi(2))
        .collect();
    let total: f64 = weights
        .iter()
        .zip(&fit.monomials)
        .filter(|(_, m)| m.iter().any(|e| *e > 0))
        .map(|(w, _)| w)
        .sum();
    if !(total > 0.0) {
        return None;
    }
    let mut best: Option<(f64, u64)> = None;
    // variable 0 always on the left so each partition appears once
    for mask in 0..(1u64 << (k - 1)) - 1 {
        let in_left = |v: usize| v == 0 || mask & (1 << (v - 1)) != 0;
        let mixed: f64 = weights
            .iter()
            .zip(&fit.monomials)
            .filter(|(_, m)| {
                let l = m.iter().enumerate().any(|(v, e)| *e > 0 && in_left(v));
                let r = m.iter().enumerate().any(|(v, e)| *e > 0 && !in_left(v));
                l && r
            })
            .map(|(w, _)| w)
            .sum();
        let ratio = (mixed / total).sqrt();
        if ratio < tolerance && best.map_or(true, |(r, _)| ratio < r) {
            best = Some((ratio, mask));
        }
    }
    let (ratio, mask) = best?;
    let in_left = |v: usize| v == 0 || mask & (1 << (v - 1)) != 0;
    let left: Vec<usize> = (0..k).filter(|v| in_left(*v)).collect();
    let right: Vec<usize> = (0..k).filter(|v| !in_left(*v)).collect();
    let left_targets: Vec<f64> = data
        .states
        .iter()
        .map(|x| {
            fit.monomials
                .iter()
                .zip(&fit.coefficients)
                .filter(|(m, _)| m.iter().enumerate().all(|(v, e)| *e == 0 || in_left(v)))
                .map(|(m, c)| c * monomial_value(m, &vars, x))
                .sum()
        })
        .collect();
    let right_targets: Vec<f64> = data
        .targets
        .iter()
        .zip(&left_targets)
        .map(|(y, l)| y - l)
        .collect();
    Some(Separation {
        left,
        right,
        mixed_ratio: ratio,
        left_data: data.with_targets(left_targets),
        right_data: data.with_targets(right_targets),
    })
}

/// Non-dominated candidates ordered by complexity, with strictly decreasing error.
#[derive(Debug, Clone, Default)]
pub struct ParetoFront {
    pub candidates: Vec<Candidate>,
}

impl ParetoFront {
    /// Rows of `(complexity, train_rmse, expression)`.
    pub fn write_csv<W: std::io::Write>(
        &self,
        names: &crate::expr::VarNames,
        mut out: W,
    ) -> std::io::Result<()> {
        writeln!(out, "complexity,train_rmse,expression")?;
        for c in &self.candidates {
            let text = names.print(&c.expr).replace('"', "\"\"");
            writeln!(
                out,
                "{},{},\"{}\"",
                c.complexity,
                crate::solver::fmt_sig17(c.train_rmse),
                text
            )?;
        }
        Ok(())
    }
}

fn front_order(a: &Candidate, b: &Candidate) -> Ordering {
    a.complexity
        .cmp(&b.complexity)
        .then(a.train_rmse.total_cmp(&b.train_rmse))
        .then_with(|| a.expr.to_text().cmp(&b.expr.to_text()))
}

pub fn pareto_front(candidates: &[Candidate]) -> ParetoFront {
    let mut sorted: Vec<&Candidate> = candidates.iter().collect();
    sorted.sort_by(|a, b| front_order(a, b));
    let mut out: Vec<Candidate> = Vec::new();
    for c in sorted {
        if out.last().map_or(true, |last| c.train_rmse < last.train_rmse) {
            out.push(c.clone());
        }
    }
    ParetoFront { candidates: out }
}

#[derive(Debug, Clone)]
pub struct FeynmanResult {
    pub best: Candidate,
    pub front: ParetoFront,
    pub candidates: Vec<Candidate>,
    pub separation: Option<(Vec<usize>, Vec<usize>)>,
    pub warnings: Vec<String>,
}

fn search_block(
    data: &RegressionDataset,
    config: &FeynmanConfig,
    vars: &[usize],
    warnings: &mut Vec<String>,
) -> Vec<Candidate> {
    let mut out = Vec::new();
    for degree in 1..=config.max_poly_degree {
        match polyfit_vars(data, degree, vars) {
            Ok(p) => out.push(p.candidate),
            Err(e) => {
                warnings.push(e.to_string());
                break;
            }
        }
    }
    out.extend(brute_force_vars(data, config, vars));
    out
}

fn best_cmp(a: &Candidate, b: &Candidate) -> Ordering {
    a.train_rmse
        .total_cmp(&b.train_rmse)
        .then(a.complexity.cmp(&b.complexity))
        .then_with(|| a.expr.to_text().cmp(&b.expr.to_text()))
}

/// Polynomial fits of every degree, brute force, and one level of additive
/// separation; the best candidate is the one with the lowest training error.
pub fn run_pipeline(
    data: &RegressionDataset,
    config: &FeynmanConfig,
) -> Result<FeynmanResult, FeynmanError> {
    config.validate()?;
    if data.is_empty() {
        return Err(FeynmanError::EmptyData);
    }
    let vars: Vec<usize> = (0..data.dim()).collect();
    let mut warnings = Vec::new();
    let mut candidates = search_block(data, config, &vars, &mut warnings);

    let split = separability_split(data, config.separability_tolerance);
    if let Some(sep) = &split {
        let mut block_warnings = Vec::new();
        let pick = |d: &RegressionDataset, v: &[usize], w: &mut Vec<String>| {
            search_block(d, config, v, w).into_iter().min_by(best_cmp)
        };
        let left = pick(&sep.left_data, &sep.left, &mut block_warnings);
        let right = pick(&sep.right_data, &sep.right, &mut block_warnings);
        if let (Some(l), Some(r)) = (left, right) {
            let expr = Expr::add(l.expr, r.expr);
            let rmse = fitness(&expr, data);
            candidates.push(Candidate::new(expr, None, rmse));
        }
        warnings.extend(block_warnings);
    }
    warnings.dedup();

    let best = candidates
        .iter()
        .min_by(|a, b| best_cmp(a, b))
        .cloned()
        .ok_or(FeynmanError::EmptyData)?;
    let front = pareto_front(&candidates);
    Ok(FeynmanResult {
        best,
        front,
        candidates,
        separation: split.map(|s| (s.left, s.right)),
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(states: Vec<Vec<f64>>, f: impl Fn(&[f64]) -> f64) -> RegressionDataset {
        let targets = states.iter().map(|x| f(x)).collect();
        RegressionDataset {
            times: (0..states.len()).map(|i| i as f64 * 0.1).collect(),
            states,
            targets,
            dt: 0.1,
            target_dim: 0,
        }
    }

    #[test]
    fn monomial_counts() {
        assert_eq!(monomials(2, 2), vec![
            vec![0, 0],
            vec![1, 0],
            vec![0, 1],
            vec![2, 0],
            vec![1, 1],
            vec![0, 2]
        ]);
        // C(k + d, d)
        assert_eq!(monomials(4, 4).len(), 70);
        assert_eq!(monomials(2, 3).len(), 10);
    }

    #[test]
    fn underdetermined_polyfit() {
        let ds = synthetic(vec![vec![1.0, 2.0]; 6], |_| 0.0);
        match polyfit(&ds, 2) {
            Err(FeynmanError::Underdetermined { required, .. }) => assert_eq!(required, 6),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn single_node_brute_force_is_scaled_variables() {
        let states: Vec<Vec<f64>> = (1..20).map(|i| vec![i as f64, (i * i) as f64]).collect();
        let ds = synthetic(states, |x| x[0] + 1.0);
        let cfg = FeynmanConfig {
            max_brute_nodes: 1,
            ..FeynmanConfig::default()
        };
        let out = brute_force(&ds, &cfg);
        assert_eq!(out.len(), 2);
        assert!(out.iter().all(|c| c.complexity == 3));
    }

    #[test]
    fn zero_budget_like_budget_yields_possibly_empty_list() {
        let ds = synthetic(vec![vec![1.0]; 10], |_| 1.0);
        let cfg = FeynmanConfig {
            time_budget: Some(1e-12),
            ..FeynmanConfig::default()
        };
        assert!(brute_force(&ds, &cfg).len() <= 1);
    }

    #[test]
    fn pareto_by_hand() {
        let mk = |c: usize, e: f64| Candidate {
            expr: Expr::Const(c as f64),
            genome: None,
            train_rmse: e,
            complexity: c,
        };
        let front = pareto_front(&[mk(1, 5.0), mk(2, 3.0), mk(3, 4.0)]);
        let pairs: Vec<_> = front.candidates.iter().map(|c| (c.complexity, c.train_rmse)).collect();
        assert_eq!(pairs, vec![(1, 5.0), (2, 3.0)]);
        assert_eq!(pareto_front(&[mk(4, 1.0)]).candidates.len(), 1);
    }

    #[test]
    fn config_validation() {
        assert!(FeynmanConfig::default().validate().is_ok());
        assert!(FeynmanConfig { max_poly_degree: 0, ..Default::default() }.validate().is_err());
        assert!(FeynmanConfig { max_brute_nodes: 0, ..Default::default() }.validate().is_err());
    }
}
