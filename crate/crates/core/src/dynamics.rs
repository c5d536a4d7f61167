//! Ground-truth benchmark systems.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::expr::{Expr, VarNames};

/// Right-hand side `(t, x, dx)`; writes the derivative of `x` into `dx`.
pub type RhsFn = Arc<dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync>;

#[derive(Debug, Error, PartialEq)]
pub enum SystemError {
    #[error("unknown system '{0}' (expected lotka_volterra, pendulum or cartpole)")]
    Unknown(String),
    #[error("invalid system '{name}': {reason}")]
    Invalid { name: String, reason: String },
}

/// A benchmark ODE together with its data-generation protocol.
#[derive(Clone)]
pub struct SystemSpec {
    pub name: String,
    pub params: BTreeMap<String, f64>,
    pub initial_state: Vec<f64>,
    pub train_span: (f64, f64),
    pub test_span: (f64, f64),
    /// The component whose right-hand side is inferred.
    pub target_dim: usize,
    pub variable_names: VarNames,
    rhs: RhsFn,
    target_expr: Option<Expr>,
}

impl fmt::Debug for SystemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SystemSpec")
            .field("name", &self.name)
            .field("dim", &self.dim())
            .field("params", &self.params)
            .field("initial_state", &self.initial_state)
            .field("train_span", &self.train_span)
            .field("test_span", &self.test_span)
            .field("target_dim", &self.target_dim)
            .finish()
    }
}

impl SystemSpec {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: impl Into<String>,
        params: BTreeMap<String, f64>,
        variable_names: VarNames,
        initial_state: Vec<f64>,
        train_span: (f64, f64),
        test_span: (f64, f64),
        target_dim: usize,
        rhs: RhsFn,
        target_expr: Option<Expr>,
    ) -> Result<SystemSpec, SystemError> {
        let spec = SystemSpec {
            name: name.into(),
            params,
            initial_state,
            train_span,
            test_span,
            target_dim,
            variable_names,
            rhs,
            target_expr,
        };
        spec.check()?;
        Ok(spec)
    }

    /// A system whose right-hand side is given as one expression per dimension.
    pub fn from_exprs(
        name: impl Into<String>,
        variable_names: VarNames,
        equations: Vec<Expr>,
        initial_state: Vec<f64>,
        train_span: (f64, f64),
        test_span: (f64, f64),
        target_dim: usize,
    ) -> Result<SystemSpec, SystemError> {
        let name = name.into();
        let dim = variable_names.len();
        if equations.len() != dim {
            return Err(SystemError::Invalid {
                name,
                reason: format!("{} equations for {dim} variables", equations.len()),
            });
        }
        for e in &equations {
            e.validate(dim).map_err(|err| SystemError::Invalid {
                name: name.clone(),
                reason: err.to_string(),
            })?;
        }
        let target_expr = equations.get(target_dim).cloned();
        let eqs = Arc::new(equations);
        let rhs: RhsFn = Arc::new(move |t, x, dx| {
            for (d, e) in dx.iter_mut().zip(eqs.iter()) {
                *d = e.eval_raw(t, x);
            }
        });
        SystemSpec::new(
            name,
            BTreeMap::new(),
            variable_names,
            initial_state,
            train_span,
            test_span,
            target_dim,
            rhs,
            target_expr,
        )
    }

    fn check(&self) -> Result<(), SystemError> {
        let invalid = |reason: String| SystemError::Invalid {
            name: self.name.clone(),
            reason,
        };
        let k = self.dim();
        if k == 0 {
            return Err(invalid("no state variables".into()));
        }
        if self.initial_state.len() != k {
            return Err(invalid(format!(
                "initial state has {} entries, expected {k}",
                self.initial_state.len()
            )));
        }
        if self.initial_state.iter().any(|v| !v.is_finite()) {
            return Err(invalid("initial state is not finite".into()));
        }
        if self.target_dim >= k {
            return Err(invalid(format!("target dimension {} >= {k}", self.target_dim)));
        }
        let (a, b) = self.train_span;
        let (c, d) = self.test_span;
        if !(a < b) || !(c < d) {
            return Err(invalid("spans must be proper intervals".into()));
        }
        if c < b {
            return Err(invalid("test span must follow the training span".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.variable_names.len()
    }

    pub fn rhs(&self, t: f64, x: &[f64], dx: &mut [f64]) {
        (self.rhs)(t, x, dx)
    }

    pub fn rhs_fn(&self) -> RhsFn {
        Arc::clone(&self.rhs)
    }

    pub fn derivative(&self, t: f64, x: &[f64]) -> Vec<f64> {
        let mut dx = vec![0.0; self.dim()];
        self.rhs(t, x, &mut dx);
        dx
    }

    /// Ground-truth right-hand side of the target dimension.
    pub fn target_rhs(&self, t: f64, x: &[f64]) -> f64 {
        self.derivative(t, x)[self.target_dim]
    }

    /// The target dimension's right-hand side as an expression, when known.
    pub fn target_expr(&self) -> Option<&Expr> {
        self.target_expr.as_ref()
    }

    /// Same system with the target dimension replaced by `estimate`.
    pub fn hybrid(&self, estimate: Expr) -> SystemSpec {
        let inner = self.rhs_fn();
        let target = self.target_dim;
        let est = Arc::new(estimate.clone());
        let rhs: RhsFn = Arc::new(move |t, x, dx| {
            inner(t, x, dx);
            dx[target] = est.eval_raw(t, x);
        });
        SystemSpec {
            name: format!("{}+estimate", self.name),
            rhs,
            target_expr: Some(estimate),
            ..self.clone()
        }
    }

    pub fn with_target_dim(mut self, target_dim: usize) -> Result<SystemSpec, SystemError> {
        self.target_dim = target_dim;
        self.target_expr = None;
        self.check()?;
        Ok(self)
    }
}

/// Looks up a built-in system by name.
pub fn by_name(name: &str) -> Result<SystemSpec, SystemError> {
    match name {
        "lotka_volterra" | "lv" => Ok(lotka_volterra()),
        "pendulum" | "simple_pendulum" => Ok(simple_pendulum()),
        "cartpole" | "cart_pole" => Ok(cart_pole()),
        other => Err(SystemError::Unknown(other.to_string())),
    }
}

pub const SYSTEM_NAMES: [&str; 3] = ["lotka_volterra", "pendulum", "cartpole"];

fn params(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

/// ẋ = x(1.5 − y), ẏ = −y(3 − x), from (1, 1).
pub fn lotka_volterra() -> SystemSpec {
    let (e1, e2) = (1.5, 3.0);
    let names = VarNames::new(["x", "y"]);
    let target = names
        .parse(&format!("-y*({e2:?} - x)"))
        .expect("valid expression");
    SystemSpec::new(
        "lotka_volterra",
        params(&[("eps1", e1), ("eps2", e2)]),
        names,
        vec![1.0, 1.0],
        (0.0, 10.0),
        (10.0, 15.0),
        1,
        Arc::new(move |_t, s, d| {
            d[0] = s[0] * (e1 - s[1]);
            d[1] = -s[1] * (e2 - s[0]);
        }),
        Some(target),
    )
    .expect("built-in system is valid")
}

/// Damped pendulum with b = 1, m = 10, l = 1, g = 9.81, from (0.4π, 1).
pub fn simple_pendulum() -> SystemSpec {
    pendulum_with(1.0, 10.0, 1.0, 9.81)
}

pub fn pendulum_with(b: f64, m: f64, l: f64, g: f64) -> SystemSpec {
    let damping = b / m;
    let stiffness = g / l;
    let names = VarNames::new(["theta1", "theta2"]);
    let target = Expr::sub(
        Expr::mul(Expr::Const(-damping), Expr::var(1)),
        Expr::mul(
            Expr::Const(stiffness),
            Expr::unary(crate::expr::UnaryOp::Sin, Expr::var(0)),
        ),
    );
    SystemSpec::new(
        "pendulum",
        params(&[("b", b), ("m", m), ("l", l), ("g", g)]),
        names,
        vec![0.4 * PI, 1.0],
        (0.0, 10.0),
        (10.0, 15.0),
        1,
        Arc::new(move |_t, s, d| {
            d[0] = s[1];
            d[1] = -damping * s[1] - stiffness * s[0].sin();
        }),
        Some(target),
    )
    .expect("built-in system is valid")
}

/// Cart-pole with m = M = l = 1, g = 9.81 and control F(t) = −0.2 + 0.5 sin(6t).
///
/// State order is (w, x, y, z) = (θ, x, θ̇, ẋ); the target is θ̈.
pub fn cart_pole() -> SystemSpec {
    cart_pole_with(1.0, 1.0, 1.0, 9.81)
}

pub fn cart_pole_force(t: f64) -> f64 {
    -0.2 + 0.5 * (6.0 * t).sin()
}

pub fn cart_pole_with(m: f64, big_m: f64, l: f64, g: f64) -> SystemSpec {
    let names = VarNames::new(["w", "x", "y", "z"]);
    let total = big_m + m;
    let target = names
        .parse(&format!(
            "(-{a:?}*sin(w) - (-0.2 + 0.5*sin(6.0*t))*{l:?}*cos(w) + {b:?}*sin(w)*cos(w)*y^2) \
             / ({l2:?}*({total:?} - {m:?}*cos(w)^2))",
            a = total * g,
            b = m * l * l,
            l2 = l * l,
        ))
        .expect("valid expression");
    SystemSpec::new(
        "cartpole",
        params(&[("m", m), ("M", big_m), ("l", l), ("g", g)]),
        names,
        vec![0.3, 0.0, 1.0, 0.0],
        (0.0, 10.0),
        (10.0, 15.0),
        2,
        Arc::new(move |t, s, d| {
            let (w, y) = (s[0], s[2]);
            let f = cart_pole_force(t);
            let (sw, cw) = w.sin_cos();
            let denom = total - m * cw * cw;
            d[0] = y;
            d[1] = s[3];
            d[2] = (-total * g * sw - f * l * cw + m * l * l * sw * cw * y * y) / (l * l * denom);
            d[3] = (m * l * l * sw * y * y + f * l + m * g * sw * cw) / (l * denom);
        }),
        Some(target),
    )
    .expect("built-in system is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn lotka_volterra_values() {
        let lv = lotka_volterra();
        assert_eq!(lv.derivative(0.0, &[1.0, 1.0]), vec![0.5, -2.0]);
        assert_eq!(lv.derivative(0.0, &[3.0, 1.5]), vec![0.0, 0.0]);
        assert!(close(&lv.derivative(0.0, &[0.0, 0.0]), &[0.0, 0.0], 0.0));
        assert_eq!(lv.dim(), 2);
        assert_eq!(lv.target_dim, 1);
    }

    #[test]
    fn pendulum_values() {
        let p = simple_pendulum();
        assert!(close(&p.derivative(0.0, &[0.0, 0.0]), &[0.0, 0.0], 0.0));
        assert!(close(&p.derivative(0.0, &[PI / 2.0, 0.0]), &[0.0, -9.81], 1e-15));
        assert!(close(&p.derivative(0.0, &[0.0, 1.0]), &[1.0, -0.1], 1e-15));
    }

    #[test]
    fn cart_pole_values() {
        let c = cart_pole();
        // F(0) = -0.2, numerator -F l, denominator 1
        assert!((c.target_rhs(0.0, &[0.0, 0.0, 0.0, 0.0]) - 0.2).abs() < 1e-15);
        // F(t) = 0 when sin(6t) = 0.4
        let t = (0.4f64).asin() / 6.0;
        assert!(c.target_rhs(t, &[0.0, 0.5, 0.0, -0.3]).abs() < 1e-15);
    }

    #[test]
    fn target_expressions_match_closures() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for sys in [lotka_volterra(), simple_pendulum(), cart_pole()] {
            let e = sys.target_expr().unwrap().clone();
            for _ in 0..200 {
                let t = rng.gen_range(0.0..15.0);
                let x: Vec<f64> = (0..sys.dim()).map(|_| rng.gen_range(-3.0..3.0)).collect();
                let want = sys.target_rhs(t, &x);
                let got = e.eval(t, &x).unwrap();
                assert!((want - got).abs() < 1e-12 * (1.0 + want.abs()), "{}", sys.name);
            }
        }
    }

    #[test]
    fn lv_first_integral_is_conserved_analytically() {
        let lv = lotka_volterra();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let x = rng.gen_range(0.05..6.0);
            let y = rng.gen_range(0.05..6.0);
            let d = lv.derivative(0.0, &[x, y]);
            // C = 3 ln x - x + 1.5 ln y - y
            let grad = [3.0 / x - 1.0, 1.5 / y - 1.0];
            let rate = grad[0] * d[0] + grad[1] * d[1];
            assert!(rate.abs() < 1e-12, "{rate}");
        }
    }

    #[test]
    fn cart_pole_denominator_is_bounded() {
        for i in 0..=1000 {
            let w = -10.0 + 20.0 * i as f64 / 1000.0;
            let denom = 2.0 - w.cos().powi(2);
            assert!((1.0..=2.0).contains(&denom));
        }
    }

    #[test]
    fn undamped_pendulum_energy_rate_vanishes() {
        let p = pendulum_with(0.0, 10.0, 1.0, 9.81);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..500 {
            let s = [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
            let d = p.derivative(0.0, &s);
            // E = ½ m l² θ₂² + m g l (1 − cos θ₁)
            let rate = 10.0 * s[1] * d[1] + 10.0 * 9.81 * s[0].sin() * d[0];
            assert!(rate.abs() < 1e-12);
        }
    }

    #[test]
    fn lookup_and_hybrid() {
        assert!(matches!(by_name("nope"), Err(SystemError::Unknown(_))));
        let lv = by_name("lotka_volterra").unwrap();
        let h = lv.hybrid(Expr::Const(0.0));
        assert_eq!(h.derivative(0.0, &[1.0, 1.0]), vec![0.5, 0.0]);
    }

    #[test]
    fn custom_system_from_expressions() {
        let names = VarNames::new(["a", "b"]);
        let eqs = vec![names.parse("b").unwrap(), names.parse("-a").unwrap()];
        let sys = SystemSpec::from_exprs("osc", names, eqs, vec![1.0, 0.0], (0.0, 1.0), (1.0, 2.0), 1)
            .unwrap();
        assert_eq!(sys.derivative(0.0, &[2.0, 3.0]), vec![3.0, -2.0]);
        let bad = SystemSpec::from_exprs(
            "bad",
            VarNames::new(["a"]),
            vec![Expr::var(3)],
            vec![0.0],
            (0.0, 1.0),
            (1.0, 2.0),
            0,
        );
        assert!(bad.is_err());
    }
}
