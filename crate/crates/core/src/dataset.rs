//! Regression datasets built from sampled trajectories.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::SystemSpec;
use crate::expr::VarNames;
use crate::solver::{self, fmt_sig17, IntegratorConfig, SolverError, Trajectory};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DatasetError {
    #[error("trajectory needs at least 2 samples, got {0}")]
    TooShort(usize),
    #[error("target dimension {target_dim} out of range for {dim}-dimensional state")]
    TargetOutOfRange { target_dim: usize, dim: usize },
    #[error(transparent)]
    Solver(#[from] SolverError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// Inputs `(tᵢ, x(tᵢ))` paired with derivative estimates of one component.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegressionDataset {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
    /// Nominal sample spacing.
    pub dt: f64,
    pub target_dim: usize,
}

impl RegressionDataset {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.states.first().map_or(0, Vec::len)
    }

    /// Same inputs with different targets.
    pub fn with_targets(&self, targets: Vec<f64>) -> RegressionDataset {
        assert_eq!(targets.len(), self.len());
        RegressionDataset {
            targets,
            ..self.clone()
        }
    }

    /// Root mean square of the targets.
    pub fn target_rms(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        (self.targets.iter().map(|v| v * v).sum::<f64>() / self.len() as f64).sqrt()
    }

    pub fn write_csv<W: Write>(&self, names: &VarNames, mut out: W) -> io::Result<()> {
        write!(out, "t")?;
        for n in names.names() {
            write!(out, ",{n}")?;
        }
        writeln!(out, ",target")?;
        for ((t, s), y) in self.times.iter().zip(&self.states).zip(&self.targets) {
            write!(out, "{}", fmt_sig17(*t))?;
            for v in s {
                write!(out, ",{}", fmt_sig17(*v))?;
            }
            writeln!(out, ",{}", fmt_sig17(*y))?;
        }
        Ok(())
    }
}

/// Forward differences `(x(tᵢ₊₁) − x(tᵢ)) / (tᵢ₊₁ − tᵢ)` of `target_dim`,
/// anchored at the inputs `(tᵢ, x(tᵢ))` for `i = 0 .. N−2`.
pub fn finite_differences(
    traj: &Trajectory,
    target_dim: usize,
) -> Result<RegressionDataset, DatasetError> {
    if traj.len() < 2 {
        return Err(DatasetError::TooShort(traj.len()));
    }
    let dim = traj.dim();
    if target_dim >= dim {
        return Err(DatasetError::TargetOutOfRange { target_dim, dim });
    }
    let n = traj.len() - 1;
    let targets = (0..n)
        .map(|i| {
            let dx = traj.states[i + 1][target_dim] - traj.states[i][target_dim];
            dx / (traj.times[i + 1] - traj.times[i])
        })
        .collect();
    let dt = (traj.times[n] - traj.times[0]) / n as f64;
    Ok(RegressionDataset {
        times: traj.times[..n].to_vec(),
        states: traj.states[..n].to_vec(),
        targets,
        dt,
        target_dim,
    })
}

/// Training and test trajectories; the test trajectory continues from the
/// state at the end of the training span.
pub fn simulate(
    system: &SystemSpec,
    config: &IntegratorConfig,
) -> Result<(Trajectory, Trajectory), SolverError> {
    for (a, b) in [system.train_span, system.test_span] {
        if !solver::divides(b - a, config.sample_dt) {
            return Err(SolverError::Divisibility {
                dt: config.sample_dt,
                length: b - a,
            });
        }
    }
    let rhs = system.rhs_fn();
    let train = solver::integrate(&*rhs, &system.initial_state, system.train_span, config)?;
    let start = if system.test_span.0 == system.train_span.1 {
        train.last_state().expect("non-empty").to_vec()
    } else {
        let bridge = solver::integrate(
            &*rhs,
            train.last_state().expect("non-empty"),
            (system.train_span.1, system.test_span.0),
            &IntegratorConfig {
                sample_dt: system.test_span.0 - system.train_span.1,
                ..*config
            },
        )?;
        bridge.last_state().expect("non-empty").to_vec()
    };
    let test = solver::integrate(&*rhs, &start, system.test_span, config)?;
    Ok((train, test))
}

pub fn trajectory(
    system: &SystemSpec,
    which: Split,
    config: &IntegratorConfig,
) -> Result<Trajectory, SolverError> {
    let (train, test) = simulate(system, config)?;
    Ok(match which {
        Split::Train => train,
        Split::Test => test,
    })
}

/// Integrates `system` and returns finite-difference targets for its target dimension.
pub fn make_dataset(
    system: &SystemSpec,
    which: Split,
    config: &IntegratorConfig,
) -> Result<RegressionDataset, DatasetError> {
    let traj = trajectory(system, which, config)?;
    finite_differences(&traj, system.target_dim)
}

/// Dataset over the same inputs as [`make_dataset`] whose targets are the
/// exact ground-truth derivative instead of finite differences.
pub fn make_exact_dataset(
    system: &SystemSpec,
    which: Split,
    config: &IntegratorConfig,
) -> Result<RegressionDataset, DatasetError> {
    let fd = make_dataset(system, which, config)?;
    let exact = fd
        .times
        .iter()
        .zip(&fd.states)
        .map(|(t, s)| system.target_rhs(*t, s))
        .collect();
    Ok(fd.with_targets(exact))
}
