//! Benchmark configuration file.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{self, SystemError, SystemSpec};
use crate::expr::VarNames;
use crate::feynman::FeynmanConfig;
use crate::ga::GaConfig;
use crate::genome::Grammar;
use crate::sindy::{BasisSet, SindyError, SparseConfig};
use crate::solver::IntegratorConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(transparent)]
    Basis(#[from] SindyError),
    #[error("system '{0}' has no SINDy basis; set systems.{0}.basis")]
    MissingBasis(String),
    #[error("custom system '{name}': {reason}")]
    Custom { name: String, reason: String },
}

/// Per-system method settings; missing fields fall back to the built-in defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemSettings {
    pub ga: Option<GaConfig>,
    pub constant_pool: Option<Vec<f64>>,
    pub sindy: Option<SparseConfig>,
    /// Basis expressions over the system's variable names.
    pub basis: Option<Vec<String>>,
    pub feynman: Option<FeynmanConfig>,
}

/// A system given by its equations in text form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomSystem {
    pub name: String,
    pub variables: Vec<String>,
    /// One right-hand side per variable, may use `t`.
    pub equations: Vec<String>,
    pub initial_state: Vec<f64>,
    pub train_span: (f64, f64),
    pub test_span: (f64, f64),
    pub target_dim: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub integrator: IntegratorConfig,
    pub systems: BTreeMap<String, SystemSettings>,
    pub custom_systems: Vec<CustomSystem>,
}

/// Everything needed to run every method on one system.
#[derive(Debug, Clone)]
pub struct ResolvedSystem {
    pub spec: SystemSpec,
    pub ga: GaConfig,
    pub grammar: Grammar,
    pub sparse: SparseConfig,
    pub basis: Option<BasisSet>,
    pub feynman: FeynmanConfig,
}

/// Terminal constants of the GA grammar for the built-in systems.
pub fn default_constant_pool(system: &str) -> Option<Vec<f64>> {
    match system {
        "lotka_volterra" => Some(vec![1.0, 1.5, -3.0, -1.0]),
        "pendulum" => Some(vec![-9.81, -0.1, -1.0, 1.0]),
        "cartpole" => Some(vec![-1.0, 0.5, 2.0, 6.0, 1.0, 9.81, 19.62]),
        _ => None,
    }
}

const FALLBACK_POOL: [f64; 2] = [-1.0, 1.0];

impl BenchConfig {
    pub fn from_json(text: &str) -> Result<BenchConfig, ConfigError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn system_spec(&self, name: &str) -> Result<SystemSpec, ConfigError> {
        if let Some(c) = self.custom_systems.iter().find(|c| c.name == name) {
            let custom = |reason: String| ConfigError::Custom {
                name: c.name.clone(),
                reason,
            };
            let names = VarNames::new(c.variables.iter().cloned());
            let equations = c
                .equations
                .iter()
                .map(|e| names.parse(e).map_err(|err| custom(format!("'{e}': {err}"))))
                .collect::<Result<Vec<_>, _>>()?;
            return Ok(SystemSpec::from_exprs(
                c.name.clone(),
                names,
                equations,
                c.initial_state.clone(),
                c.train_span,
                c.test_span,
                c.target_dim,
            )?);
        }
        let spec = dynamics::by_name(name)?;
        Ok(spec)
    }

    pub fn resolve(&self, name: &str) -> Result<ResolvedSystem, ConfigError> {
        let spec = self.system_spec(name)?;
        let key = spec.name.clone();
        let settings = self.systems.get(&key).cloned().unwrap_or_default();
        let ga = settings
            .ga
            .or_else(|| GaConfig::preset(&key))
            .unwrap_or_default();
        let pool = settings
            .constant_pool
            .or_else(|| default_constant_pool(&key))
            .unwrap_or_else(|| FALLBACK_POOL.to_vec());
        let grammar = Grammar::new(spec.dim(), pool);
        let basis = match settings.basis {
            Some(list) => Some(BasisSet::from_strings(&spec.variable_names, &list)?),
            None => BasisSet::preset(&key).ok(),
        };
        Ok(ResolvedSystem {
            ga,
            grammar,
            sparse: settings.sindy.unwrap_or_default(),
            basis,
            feynman: settings.feynman.unwrap_or_default(),
            spec,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_resolve_every_builtin_system() {
        let cfg = BenchConfig::default();
        for name in dynamics::SYSTEM_NAMES {
            let r = cfg.resolve(name).unwrap();
            assert!(r.basis.is_some());
            assert_eq!(r.grammar.variable_count, r.spec.dim());
        }
        assert_eq!(cfg.resolve("pendulum").unwrap().ga.iterations, 40);
    }

    #[test]
    fn json_overrides() {
        let cfg = BenchConfig::from_json(
            r#"{
                "integrator": {"rtol": 1e-6},
                "systems": {"pendulum": {"constant_pool": [2.0], "ga": {"iterations": 3}}},
                "custom_systems": [{
                    "name": "decay", "variables": ["u"], "equations": ["-0.5*u"],
                    "initial_state": [1.0], "train_span": [0, 10], "test_span": [10, 15],
                    "target_dim": 0
                }]
            }"#,
        )
        .unwrap();
        assert_eq!(cfg.integrator.rtol, 1e-6);
        assert_eq!(cfg.integrator.atol, IntegratorConfig::default().atol);
        let p = cfg.resolve("pendulum").unwrap();
        assert_eq!(p.grammar.constant_pool, vec![2.0]);
        assert_eq!(p.ga.iterations, 3);
        assert_eq!(p.ga.population_size, 70);
        let d = cfg.resolve("decay").unwrap();
        assert_eq!(d.spec.dim(), 1);
        assert!(d.basis.is_none());
        assert_eq!(d.grammar.constant_pool, FALLBACK_POOL.to_vec());
    }

    #[test]
    fn partial_solver_settings_take_defaults() {
        let cfg = BenchConfig::from_json(
            r#"{"systems": {"pendulum": {"sindy": {"method": "lasso"}},
                "lotka_volterra": {"sindy": {"method": "stlsq", "threshold": 0.1}}}}"#,
        )
        .unwrap();
        assert_eq!(cfg.resolve("pendulum").unwrap().sparse, SparseConfig::lasso_sweep());
        assert_eq!(
            cfg.resolve("lotka_volterra").unwrap().sparse,
            SparseConfig::Stlsq {
                threshold: 0.1,
                max_iterations: 50
            }
        );
    }

    #[test]
    fn bad_configs() {
        assert!(BenchConfig::from_json("{\"unknown\": 1}").is_err());
        assert!(BenchConfig::default().resolve("nope").is_err());
        let cfg = BenchConfig::from_json(
            r#"{"custom_systems": [{"name": "bad", "variables": ["u"], "equations": ["v"],
                "initial_state": [1.0], "train_span": [0, 1], "test_span": [1, 2], "target_dim": 0}]}"#,
        )
        .unwrap();
        assert!(matches!(cfg.resolve("bad"), Err(ConfigError::Custom { .. })));
    }
}
