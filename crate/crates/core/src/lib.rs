//! Symbolic regression of ODE right-hand sides from sampled trajectories.

pub mod config;
pub mod dataset;
pub mod dynamics;
pub mod expr;
pub mod feynman;
pub mod ga;
pub mod genome;
pub mod harness;
pub mod linalg;
pub mod parse;
pub mod sindy;
pub mod solver;

pub use config::BenchConfig;
pub use dataset::{RegressionDataset, Split};
pub use dynamics::SystemSpec;
pub use expr::{BinaryOp, Expr, UnaryOp, VarNames};
pub use ga::{Candidate, GaConfig};
pub use genome::{Genome, Grammar};
pub use harness::Method;
pub use solver::{IntegratorConfig, Trajectory};
