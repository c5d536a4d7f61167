use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use odesr::dataset;
use odesr::harness::{self, HarnessError, Method};
use odesr::solver::fmt_sig17;
use odesr::{BenchConfig, Expr, SystemSpec};

#[derive(Parser)]
#[command(name = "odesr", version, about = "Symbolic regression of ODE right-hand sides")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Emit train/test trajectories and finite-difference datasets.
    Generate {
        #[command(flatten)]
        common: Common,
        /// Sampling interval.
        #[arg(long)]
        dt: Option<f64>,
        /// Output stem; `.csv` is stripped if present.
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit one method on one system.
    Fit {
        #[arg(long)]
        method: Method,
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// GA best fitness per generation as CSV.
        #[arg(long)]
        history: Option<PathBuf>,
        /// Pareto front as CSV.
        #[arg(long)]
        pareto: Option<PathBuf>,
    },
    /// Test error of a given expression.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        expr: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Ground-truth and hybrid trajectories for plotting.
    Rollout {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        expr: String,
        /// Start time; defaults to the start of the training span.
        #[arg(long)]
        t0: Option<f64>,
        /// End time; defaults to the end of the test span.
        #[arg(long)]
        t1: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the benchmark sweep.
    Bench {
        #[arg(long, value_delimiter = ',', num_args = 1.., default_values = ["ga", "sindy", "feynman"])]
        methods: Vec<Method>,
        #[arg(long, value_delimiter = ',', num_args = 1.., default_values = ["lotka_volterra", "pendulum", "cartpole"])]
        systems: Vec<String>,
        #[arg(long, default_value_t = 5)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    system: String,
    /// Benchmark config JSON.
    #[arg(long)]
    config: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Numerical(String),
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Failure {
        if e.is_usage_error() {
            Failure::Usage(e.to_string())
        } else {
            Failure::Numerical(e.to_string())
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Failure {
        Failure::Usage(format!("io: {e}"))
    }
}

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure::Usage(e.to_string())
}

fn numerical(e: impl std::fmt::Display) -> Failure {
    Failure::Numerical(e.to_string())
}

fn load_config(path: Option<&Path>) -> Result<BenchConfig, Failure> {
    match path {
        None => Ok(BenchConfig::default()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| usage(format!("{}: {e}", p.display())))?;
            BenchConfig::from_json(&text).map_err(|e| usage(format!("{}: {e}", p.display())))
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(usage)?;
    writeln!(w)?;
    Ok(w.flush()?)
}

fn parse_expr(spec: &SystemSpec, text: &str) -> Result<Expr, Failure> {
    spec.variable_names
        .parse(text)
        .map_err(|e| usage(format!("expression '{text}': {e}")))
}

fn stem(out: &Path) -> String {
    let s = out.to_string_lossy();
    s.strip_suffix(".csv").unwrap_or(&s).to_string()
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Generate { common, dt, out } => {
            let mut cfg = load_config(common.config.as_deref())?;
            if let Some(dt) = dt {
                cfg.integrator.sample_dt = dt;
            }
            cfg.integrator.validate().map_err(usage)?;
            let spec = cfg.system_spec(&common.system).map_err(usage)?;
            let (train, test) = dataset::simulate(&spec, &cfg.integrator).map_err(numerical)?;
            let base = stem(&out);
            let names = &spec.variable_names;
            for (split, traj) in [("train", &train), ("test", &test)] {
                let mut w = create(Path::new(&format!("{base}_{split}.csv")))?;
                traj.write_csv(names, &mut w)?;
                w.flush()?;
                let data = dataset::finite_differences(traj, spec.target_dim).map_err(numerical)?;
                let mut w = create(Path::new(&format!("{base}_{split}_dataset.csv")))?;
                data.write_csv(names, &mut w)?;
                w.flush()?;
            }
            Ok(())
        }
        Command::Fit {
            method,
            common,
            seed,
            out,
            history,
            pareto,
        } => {
            let cfg = load_config(common.config.as_deref())?;
            let system = cfg.resolve(&common.system).map_err(usage)?;
            let record = harness::fit_method(method, &system, seed, &cfg.integrator)?;
            for w in &record.warnings {
                log::warn!("{w}");
            }
            write_json(&out, &record)?;
            if let Some(path) = history {
                let mut w = create(&path)?;
                writeln!(w, "generation,best_fitness")?;
                for (i, f) in record.history.iter().enumerate() {
                    writeln!(w, "{},{}", i + 1, fmt_sig17(*f))?;
                }
                w.flush()?;
            }
            if let Some(path) = pareto {
                let mut w = create(&path)?;
                writeln!(w, "complexity,train_rmse,expression")?;
                for p in record.pareto.iter().flatten() {
                    let text = p.expression.replace('"', "\"\"");
                    writeln!(w, "{},{},\"{}\"", p.complexity, fmt_sig17(p.train_rmse), text)?;
                }
                w.flush()?;
            }
            Ok(())
        }
        Command::Eval { common, expr, out } => {
            let cfg = load_config(common.config.as_deref())?;
            let spec = cfg.system_spec(&common.system).map_err(usage)?;
            let e = parse_expr(&spec, &expr)?;
            let err = harness::test_error(&e, &spec, &cfg.integrator)?;
            write_json(
                &out,
                &serde_json::json!({
                    "system": spec.name,
                    "expression": spec.variable_names.print(&e),
                    "test_error": err,
                }),
            )
        }
        Command::Rollout {
            common,
            expr,
            t0,
            t1,
            out,
        } => {
            let cfg = load_config(common.config.as_deref())?;
            let spec = cfg.system_spec(&common.system).map_err(usage)?;
            let e = parse_expr(&spec, &expr)?;
            let span = (t0.unwrap_or(spec.train_span.0), t1.unwrap_or(spec.test_span.1));
            if !(span.1 > span.0) {
                return Err(usage(format!("empty span ({}, {})", span.0, span.1)));
            }
            let r = harness::rollout_with_estimate(&e, &spec, span, &cfg.integrator)?;
            if let Some(t) = r.divergence_time {
                eprintln!("hybrid trajectory diverged after t = {t}");
            }
            let mut w = create(&out)?;
            r.write_csv(&spec.variable_names, &mut w)?;
            Ok(w.flush()?)
        }
        Command::Bench {
            methods,
            systems,
            reps,
            seed,
            config,
            out,
        } => {
            let cfg = load_config(config.as_deref())?;
            let results = harness::run_benchmark(&methods, &systems, reps, seed, &cfg)?;
            harness::write_bench_outputs(&results, &out)?;
            harness::write_table(&results, std::io::stdout().lock())?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            ExitCode::from(2)
        }
    }
}
