//! Expression trees over constants, state variables and time.
//!
//! An [`Expr`] is the common currency of every search method in this crate:
//! the genetic algorithm decodes genomes into it, sparse regression assembles
//! weighted sums of basis expressions, and the brute-force search enumerates
//! skeletons of it. Evaluation never panics on domain errors; it yields `None`
//! so that callers can assign an infinite loss.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest integer exponent evaluated by repeated multiplication.
const MAX_EXACT_EXPONENT: i64 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnaryOp {
    Sin,
    Cos,
    Log,
    Exp,
    Identity,
}

impl UnaryOp {
    pub const ALL: [UnaryOp; 5] = [
        UnaryOp::Sin,
        UnaryOp::Cos,
        UnaryOp::Log,
        UnaryOp::Exp,
        UnaryOp::Identity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            UnaryOp::Sin => "sin",
            UnaryOp::Cos => "cos",
            UnaryOp::Log => "log",
            UnaryOp::Exp => "exp",
            UnaryOp::Identity => "identity",
        }
    }

    pub fn from_name(name: &str) -> Option<UnaryOp> {
        UnaryOp::ALL.into_iter().find(|op| op.name() == name)
    }

    /// Applies the operator; the result may be non-finite.
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            UnaryOp::Sin => x.sin(),
            UnaryOp::Cos => x.cos(),
            UnaryOp::Log => {
                if x > 0.0 {
                    x.ln()
                } else {
                    f64::NAN
                }
            }
            UnaryOp::Exp => x.exp(),
            UnaryOp::Identity => x,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinaryOp {
    pub const ALL: [BinaryOp; 5] = [
        BinaryOp::Add,
        BinaryOp::Sub,
        BinaryOp::Mul,
        BinaryOp::Div,
        BinaryOp::Pow,
    ];

    pub fn symbol(self) -> char {
        match self {
            BinaryOp::Add => '+',
            BinaryOp::Sub => '-',
            BinaryOp::Mul => '*',
            BinaryOp::Div => '/',
            BinaryOp::Pow => '^',
        }
    }

    pub fn is_commutative(self) -> bool {
        matches!(self, BinaryOp::Add | BinaryOp::Mul)
    }

    /// Applies the operator; the result may be non-finite.
    #[inline]
    pub fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            BinaryOp::Add => a + b,
            BinaryOp::Sub => a - b,
            BinaryOp::Mul => a * b,
            BinaryOp::Div => {
                if b == 0.0 {
                    f64::NAN
                } else {
                    a / b
                }
            }
            BinaryOp::Pow => pow(a, b),
        }
    }
}

/// Real power with exact integer exponents. Domain violations give NaN.
fn pow(base: f64, exponent: f64) -> f64 {
    if exponent.fract() == 0.0 && exponent.abs() <= MAX_EXACT_EXPONENT as f64 {
        let n = exponent as i64;
        if n < 0 && base == 0.0 {
            return f64::NAN;
        }
        let mut acc = 1.0;
        for _ in 0..n.unsigned_abs() {
            acc *= base;
        }
        return if n < 0 { 1.0 / acc } else { acc };
    }
    if base < 0.0 && exponent.fract() != 0.0 {
        return f64::NAN;
    }
    if base == 0.0 && exponent < 0.0 {
        return f64::NAN;
    }
    base.powf(exponent)
}

/// An immutable expression tree.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    /// 0-based index into the state vector.
    Var(usize),
    Time,
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn constant(value: f64) -> Expr {
        Expr::Const(value)
    }

    pub fn var(index: usize) -> Expr {
        Expr::Var(index)
    }

    pub fn unary(op: UnaryOp, child: Expr) -> Expr {
        Expr::Unary(op, Box::new(child))
    }

    pub fn binary(op: BinaryOp, left: Expr, right: Expr) -> Expr {
        Expr::Binary(op, Box::new(left), Box::new(right))
    }

    pub fn add(left: Expr, right: Expr) -> Expr {
        Expr::binary(BinaryOp::Add, left, right)
    }

    pub fn sub(left: Expr, right: Expr) -> Expr {
        Expr::binary(BinaryOp::Sub, left, right)
    }

    pub fn mul(left: Expr, right: Expr) -> Expr {
        Expr::binary(BinaryOp::Mul, left, right)
    }

    pub fn div(left: Expr, right: Expr) -> Expr {
        Expr::binary(BinaryOp::Div, left, right)
    }

    pub fn pow(left: Expr, right: Expr) -> Expr {
        Expr::binary(BinaryOp::Pow, left, right)
    }

    /// Evaluates the expression at time `t` and state `state`.
    ///
    /// Returns `None` for any domain violation (log of a non-positive number,
    /// division by zero, invalid powers, overflow) and for variable indices
    /// outside `state`.
    pub fn eval(&self, t: f64, state: &[f64]) -> Option<f64> {
        let v = self.eval_raw(t, state);
        v.is_finite().then_some(v)
    }

    /// Like [`Expr::eval`] but returns the raw IEEE value; non-finite means invalid.
    pub fn eval_raw(&self, t: f64, state: &[f64]) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Var(i) => state.get(*i).copied().unwrap_or(f64::NAN),
            Expr::Time => t,
            Expr::Unary(op, child) => {
                let x = child.eval_raw(t, state);
                if !x.is_finite() {
                    return f64::NAN;
                }
                op.apply(x)
            }
            Expr::Binary(op, left, right) => {
                let a = left.eval_raw(t, state);
                if !a.is_finite() {
                    return f64::NAN;
                }
                let b = right.eval_raw(t, state);
                if !b.is_finite() {
                    return f64::NAN;
                }
                op.apply(a, b)
            }
        }
    }

    /// Description length: the node count, where `identity` nodes count zero.
    pub fn complexity(&self) -> usize {
        match self {
            Expr::Const(_) | Expr::Var(_) | Expr::Time => 1,
            Expr::Unary(UnaryOp::Identity, child) => child.complexity(),
            Expr::Unary(_, child) => 1 + child.complexity(),
            Expr::Binary(_, l, r) => 1 + l.complexity() + r.complexity(),
        }
    }

    /// Total node count, identity included.
    pub fn node_count(&self) -> usize {
        match self {
            Expr::Const(_) | Expr::Var(_) | Expr::Time => 1,
            Expr::Unary(_, child) => 1 + child.node_count(),
            Expr::Binary(_, l, r) => 1 + l.node_count() + r.node_count(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Expr::Const(_) | Expr::Var(_) | Expr::Time => 1,
            Expr::Unary(_, child) => 1 + child.depth(),
            Expr::Binary(_, l, r) => 1 + l.depth().max(r.depth()),
        }
    }

    /// Largest variable index referenced, if any.
    pub fn max_var_index(&self) -> Option<usize> {
        match self {
            Expr::Var(i) => Some(*i),
            Expr::Const(_) | Expr::Time => None,
            Expr::Unary(_, child) => child.max_var_index(),
            Expr::Binary(_, l, r) => match (l.max_var_index(), r.max_var_index()) {
                (Some(a), Some(b)) => Some(a.max(b)),
                (a, b) => a.or(b),
            },
        }
    }

    pub fn uses_time(&self) -> bool {
        match self {
            Expr::Time => true,
            Expr::Const(_) | Expr::Var(_) => false,
            Expr::Unary(_, child) => child.uses_time(),
            Expr::Binary(_, l, r) => l.uses_time() || r.uses_time(),
        }
    }

    /// Checks that all variable indices are below `dim` and all constants are finite.
    pub fn validate(&self, dim: usize) -> Result<(), ExprError> {
        match self {
            Expr::Const(c) if !c.is_finite() => Err(ExprError::NonFiniteConstant),
            Expr::Var(i) if *i >= dim => Err(ExprError::VariableOutOfRange { index: *i, dim }),
            Expr::Const(_) | Expr::Var(_) | Expr::Time => Ok(()),
            Expr::Unary(_, child) => child.validate(dim),
            Expr::Binary(_, l, r) => {
                l.validate(dim)?;
                r.validate(dim)
            }
        }
    }

    /// Returns a copy where the operands of commutative operators are ordered
    /// by their printed form, so that `x + y` and `y + x` print identically.
    pub fn canonical(&self, names: &VarNames) -> Expr {
        match self {
            Expr::Const(_) | Expr::Var(_) | Expr::Time => self.clone(),
            Expr::Unary(op, child) => Expr::unary(*op, child.canonical(names)),
            Expr::Binary(op, l, r) => {
                let l = l.canonical(names);
                let r = r.canonical(names);
                if op.is_commutative() && names.print(&r) < names.print(&l) {
                    Expr::binary(*op, r, l)
                } else {
                    Expr::binary(*op, l, r)
                }
            }
        }
    }

    /// Prints with the default `x1 .. xk` variable names.
    pub fn to_text(&self) -> String {
        let dim = self.max_var_index().map_or(0, |i| i + 1);
        VarNames::indexed(dim).print(self)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("variable index {index} out of range for a {dim}-dimensional state")]
    VariableOutOfRange { index: usize, dim: usize },
    #[error("constant is not finite")]
    NonFiniteConstant,
}

/// Variable naming used when printing and parsing expressions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VarNames {
    names: Vec<String>,
}

impl VarNames {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> VarNames {
        VarNames {
            names: names.into_iter().map(Into::into).collect(),
        }
    }

    /// `x1, x2, ..., xk`.
    pub fn indexed(dim: usize) -> VarNames {
        VarNames::new((1..=dim).map(|i| format!("x{i}")))
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Fully parenthesized infix form.
    pub fn print(&self, expr: &Expr) -> String {
        let mut out = String::new();
        self.write(expr, &mut out);
        out
    }

    pub fn parse(&self, text: &str) -> Result<Expr, ParseError> {
        crate::parse::parse(text, self)
    }

    fn write(&self, expr: &Expr, out: &mut String) {
        match expr {
            Expr::Const(c) => write_const(*c, out),
            Expr::Var(i) => match self.names.get(*i) {
                Some(name) => out.push_str(name),
                None => {
                    out.push('x');
                    out.push_str(&(i + 1).to_string());
                }
            },
            Expr::Time => out.push('t'),
            Expr::Unary(op, child) => {
                out.push_str(op.name());
                out.push('(');
                self.write(child, out);
                out.push(')');
            }
            Expr::Binary(op, l, r) => {
                out.push('(');
                self.write(l, out);
                out.push(' ');
                out.push(op.symbol());
                out.push(' ');
                self.write(r, out);
                out.push(')');
            }
        }
    }
}

/// Shortest representation that parses back to the same `f64`, always with a
/// decimal point or exponent; negative values are parenthesized.
fn write_const(c: f64, out: &mut String) {
    let negative = c.is_sign_negative();
    let mut text = format!("{:?}", c.abs());
    if !text.contains(['.', 'e', 'E']) {
        text.push_str(".0");
    }
    if negative {
        out.push_str("(-");
        out.push_str(&text);
        out.push(')');
    } else {
        out.push_str(&text);
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

pub use crate::parse::ParseError;

#[cfg(test)]
mod tests {
    use super::*;

    fn names2() -> VarNames {
        VarNames::new(["theta1", "theta2"])
    }

    #[test]
    fn ga_pendulum_expression_at_rest() {
        let e = names2().parse("(-1.0) + theta2*(-9.81)").unwrap();
        assert_eq!(e.eval(0.0, &[0.3, 0.0]), Some(-1.0));
    }

    #[test]
    fn identity_is_transparent() {
        let e = Expr::unary(UnaryOp::Identity, Expr::var(0));
        assert_eq!(e.eval(0.0, &[7.25]), Some(7.25));
    }

    #[test]
    fn log_domain_violation_is_non_finite() {
        let e = Expr::unary(UnaryOp::Log, Expr::mul(Expr::constant(-1.0), Expr::var(0)));
        assert_eq!(e.eval(0.0, &[2.0]), None);
    }

    #[test]
    fn domain_violations() {
        let x = [0.0, -2.0];
        let div0 = Expr::div(Expr::constant(1.0), Expr::var(0));
        let zero_neg = Expr::pow(Expr::var(0), Expr::constant(-2.0));
        let neg_frac = Expr::pow(Expr::var(1), Expr::constant(0.5));
        let overflow = Expr::unary(UnaryOp::Exp, Expr::constant(1000.0));
        for e in [div0, zero_neg, neg_frac, overflow] {
            assert_eq!(e.eval(0.0, &x), None, "{e}");
        }
        // negative base, integer exponent is fine
        let ok = Expr::pow(Expr::var(1), Expr::constant(3.0));
        assert_eq!(ok.eval(0.0, &x), Some(-8.0));
        let out_of_range = Expr::var(5);
        assert_eq!(out_of_range.eval(0.0, &x), None);
    }

    #[test]
    fn integer_powers_are_repeated_products() {
        let base: f64 = 1.1;
        let e = Expr::pow(Expr::constant(base), Expr::constant(3.0));
        assert_eq!(e.eval(0.0, &[]), Some(base * base * base));
        let inv = Expr::pow(Expr::constant(2.0), Expr::constant(-2.0));
        assert_eq!(inv.eval(0.0, &[]), Some(0.25));
    }

    #[test]
    fn complexity_examples() {
        assert_eq!(Expr::constant(3.0).complexity(), 1);
        let e = names2().parse("(-1.0) + theta2*(-9.81)").unwrap();
        assert_eq!(e.complexity(), 5);
        let wrapped = Expr::unary(UnaryOp::Identity, Expr::unary(UnaryOp::Sin, Expr::var(0)));
        assert_eq!(wrapped.complexity(), 2);
        assert_eq!(wrapped.node_count(), 3);
    }

    #[test]
    fn print_leaves() {
        let n = VarNames::indexed(1);
        assert_eq!(n.print(&Expr::constant(2.0)), "2.0");
        assert_eq!(n.print(&Expr::constant(-9.81)), "(-9.81)");
        assert_eq!(n.print(&Expr::constant(1e-12)), "1e-12");
        assert_eq!(n.print(&Expr::Time), "t");
    }

    #[test]
    fn print_is_fully_parenthesized() {
        let n = VarNames::new(["x", "y"]);
        let e = Expr::mul(Expr::var(0), Expr::sub(Expr::constant(1.5), Expr::var(1)));
        assert_eq!(n.print(&e), "(x * (1.5 - y))");
        let s = Expr::unary(UnaryOp::Sin, Expr::var(1));
        assert_eq!(n.print(&s), "sin(y)");
    }

    #[test]
    fn canonical_orders_commutative_operands() {
        let n = VarNames::new(["x", "y"]);
        let a = Expr::add(Expr::var(1), Expr::var(0));
        let b = Expr::add(Expr::var(0), Expr::var(1));
        assert_eq!(n.print(&a.canonical(&n)), n.print(&b.canonical(&n)));
        let c = Expr::sub(Expr::var(1), Expr::var(0));
        assert_eq!(c.canonical(&n), c);
    }

    #[test]
    fn validate_checks_dimension() {
        let e = Expr::add(Expr::var(0), Expr::var(2));
        assert!(e.validate(3).is_ok());
        assert_eq!(
            e.validate(2),
            Err(ExprError::VariableOutOfRange { index: 2, dim: 2 })
        );
    }
}
