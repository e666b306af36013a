use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use curvflow::config::{build_shape, check_initial};
use curvflow::flow::{containment_monotone, sandwich_check, volume_decay_check};
use curvflow::io::{analyze, diagnose, load_trajectory, timeseries_rows, write_analysis, write_timeseries, write_trajectory};
use curvflow::speeds::{check_conditions, estimate_mu, verify_derivative_bounds};
use curvflow::verify::{all_suites, curve_evolution_residual, gradient_inequality_monitor, Quantity};
use curvflow::{Error, ExperimentConfig, Flow, RunStatus, Snapshot, SpeedSpec, SphereGrid};

/// Nonzero exit for a suite or monitor that found a violation.
const EXIT_VIOLATION: u8 = 1;
const EXIT_PRECONDITION: u8 = 2;
const EXIT_CONE: u8 = 3;
const EXIT_NUMERICAL: u8 = 4;
const EXIT_IO: u8 = 5;

/// Relative slack on the lifetime sandwich; `T̂` is an extrapolation.
const SANDWICH_SLACK: f64 = 0.02;

#[derive(Parser)]
#[command(name = "curvflow", version, about = "Contracting curvature flows of convex hypersurfaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build an initial body from a shape spec and save it as a snapshot.
    Shape {
        /// `sphere r`, `ellipsoid a b [c]`, with optional `+ Y(l,m)*amp` terms.
        spec: String,
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long, default_value_t = 16)]
        degree: usize,
        /// Speed whose cone the body must lie in.
        #[arg(long, default_value = "pow_mean,alpha=2")]
        speed: String,
        #[arg(short, long, default_value = "shape.json")]
        output: PathBuf,
    },
    /// Run the flow for one or more experiment configs.
    Simulate {
        #[arg(required = true)]
        configs: Vec<PathBuf>,
        /// Configs run concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Run verification suites.
    Verify {
        #[command(subcommand)]
        scope: Scope,
    },
    /// Integral-geometry tables and fitted constants for a trajectory.
    Analyze {
        dir: PathBuf,
        /// Overrides the config's ρ grid.
        #[arg(long, value_delimiter = ',')]
        rho: Option<Vec<f64>>,
        /// Overrides the config's ε grid.
        #[arg(long, value_delimiter = ',')]
        epsilon: Option<Vec<f64>>,
    },
}

#[derive(Subcommand)]
enum Scope {
    /// Pointwise curvature inequalities on random cone samples.
    Lemmas {
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_delimiter = ',', default_value = "2,3,4")]
        dims: Vec<usize>,
    },
    /// Structural conditions and derivative bounds of a speed.
    Speeds {
        spec: String,
        #[arg(long, default_value_t = 20_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_delimiter = ',', default_value = "2,3")]
        dims: Vec<usize>,
    },
    /// Monitors along a stored trajectory.
    Flow { dir: PathBuf },
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Io(_) | Error::Csv(_) | Error::Json(_) => EXIT_IO,
            Error::Solver(_) => EXIT_NUMERICAL,
            _ => EXIT_PRECONDITION,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

type Outcome = std::result::Result<u8, Failure>;

fn print_json<T: Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("reports serialize"));
}

fn cmd_shape(spec: &str, dim: usize, degree: usize, speed: &str, output: &Path) -> Outcome {
    let speed = SpeedSpec::parse(speed)?;
    speed.validate_for(dim)?;
    let grid = Arc::new(SphereGrid::new(dim, degree)?);
    let body = build_shape(spec, grid, Path::new("."))?;
    let status = check_initial(&body, &speed)?;
    Snapshot::capture(&body, 0.0).save(output)?;
    let delta0 = speed.delta0(dim);
    print_json(&json!({
        "output": output,
        "pinch_max": status.max_ratio,
        "worst_node": status.worst_node,
        "delta0": delta0,
        "cone_margin": delta0 - status.max_ratio,
        "inside": status.inside,
    }));
    Ok(0)
}

fn simulate_one(path: &Path) -> Outcome {
    let config = ExperimentConfig::load(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let out = base.join(&config.output);
    let speed = config.speed_spec()?;
    let initial = config.initial_body(base)?;
    check_initial(&initial, &speed)?;
    let flow = Flow::new(config.flow_config()?, config.dimension)?;
    let traj = flow.run(&initial)?;
    let diag = if config.monitors.enabled {
        match diagnose(&traj, &config.monitors) {
            Ok(d) => Some(d),
            Err(e) => {
                eprintln!("{}: monitors skipped: {e}", path.display());
                None
            }
        }
    } else {
        None
    };
    write_trajectory(&out, &config, &traj, diag.as_ref())?;
    println!(
        "{}",
        json!({
            "config": path,
            "output": out,
            "status": traj.status,
            "steps": traj.steps,
            "snapshots": traj.snapshots.len(),
            "t_hat": traj.t_hat,
        })
    );
    Ok(match traj.status {
        RunStatus::Threshold | RunStatus::Budget | RunStatus::EndTime => 0,
        RunStatus::ConeExit { .. } => EXIT_CONE,
        RunStatus::StepFailure { .. } => EXIT_NUMERICAL,
    })
}

fn cmd_simulate(configs: &[PathBuf], jobs: usize) -> Outcome {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Failure {
            code: EXIT_PRECONDITION,
            message: e.to_string(),
        })?;
    let results: Vec<Outcome> = pool.install(|| configs.par_iter().map(|c| simulate_one(c)).collect());
    let mut code = 0;
    for (path, r) in configs.iter().zip(results) {
        let c = match r {
            Ok(c) => c,
            Err(f) => {
                eprintln!("{}: {}", path.display(), f.message);
                f.code
            }
        };
        if code == 0 {
            code = c;
        }
    }
    Ok(code)
}

fn cmd_verify_lemmas(samples: usize, seed: u64, dims: &[usize]) -> Outcome {
    let mut reports = Vec::new();
    for &n in dims {
        reports.extend(all_suites(n, samples, seed)?);
    }
    let passed = reports.iter().all(|r| r.passed());
    print_json(&json!({ "scope": "lemmas", "passed": passed, "reports": reports }));
    Ok(if passed { 0 } else { EXIT_VIOLATION })
}

fn cmd_verify_speeds(spec: &str, samples: usize, seed: u64, dims: &[usize]) -> Outcome {
    let speed = SpeedSpec::parse(spec)?;
    let mut entries = Vec::new();
    let mut passed = true;
    for &n in dims {
        speed.validate_for(n)?;
        let conditions = check_conditions(&speed, n, samples, seed);
        let mu = estimate_mu(&speed, n, samples, seed.wrapping_add(1));
        let bounds = verify_derivative_bounds(&speed, n, mu.mu, samples, seed.wrapping_add(2));
        let ok = conditions.passed() && conditions.max_gradient_error <= 1e-5 && bounds.passed();
        passed &= ok;
        entries.push(json!({ "n": n, "passed": ok, "conditions": conditions, "mu_hat": mu, "bounds": bounds }));
    }
    print_json(&json!({ "scope": "speeds", "speed": speed.describe(), "passed": passed, "reports": entries }));
    Ok(if passed { 0 } else { EXIT_VIOLATION })
}

#[derive(Serialize)]
struct Check {
    name: &'static str,
    /// `None` for informational entries.
    passed: Option<bool>,
    value: serde_json::Value,
}

fn cmd_verify_flow(dir: &Path) -> Outcome {
    let (config, traj) = load_trajectory(dir)?;
    let mut checks = Vec::new();
    let diag = diagnose(&traj, &config.monitors)?;
    write_timeseries(&dir.join("diagnostics.csv"), traj.dim, &timeseries_rows(&traj, Some(&diag)))?;
    let scale = traj.snapshots[0].radii.r_plus;
    checks.push(Check {
        name: "pinching_preserved",
        passed: Some(diag.pinching.z_violations == 0),
        value: json!({ "sigma": diag.pinching.sigma, "violations": diag.pinching.z_violations }),
    });
    checks.push(Check {
        name: "tso_bound",
        passed: Some(diag.tso.violations == 0),
        value: json!({ "checked": diag.tso.checked, "violations": diag.tso.violations, "worst_ratio": diag.tso.worst_ratio }),
    });
    checks.push(Check {
        name: "smoczyk_margin",
        passed: Some(diag.smoczyk.min_margin >= -1e-8 * scale),
        value: json!(diag.smoczyk.min_margin),
    });
    let (r_dec, v_dec) = containment_monotone(&traj);
    checks.push(Check {
        name: "containment_monotone",
        passed: Some(r_dec && v_dec),
        value: json!({ "r_plus": r_dec, "volume": v_dec }),
    });
    let sandwich = sandwich_check(&traj, SANDWICH_SLACK);
    checks.push(Check {
        name: "lifetime_sandwich",
        passed: Some(sandwich.passed),
        value: json!({ "t_hat": traj.t_hat, "slack": sandwich.slack }),
    });
    match volume_decay_check(&traj) {
        Ok(v) => checks.push(Check {
            name: "volume_decay",
            passed: Some(v.max_relative <= 0.01),
            value: json!(v.max_relative),
        }),
        Err(Error::Insufficient(m)) => checks.push(Check {
            name: "volume_decay",
            passed: None,
            value: json!(m),
        }),
        Err(e) => return Err(e.into()),
    }
    if traj.dim == 1 && traj.snapshots.len() >= 3 {
        for q in [Quantity::Speed, Quantity::Curvature] {
            let r = curve_evolution_residual(&traj, q)?;
            checks.push(Check {
                name: "evolution_residual",
                passed: None,
                value: json!({ "quantity": q, "max_residual": r.max_residual, "max_rhs": r.max_rhs, "inconclusive": r.inconclusive }),
            });
        }
    }
    if traj.dim == 2 {
        let g = gradient_inequality_monitor(&traj.last().body)?;
        checks.push(Check {
            name: "gradient_inequalities",
            passed: (!g.inconclusive).then(|| g.passed()),
            value: json!(g),
        });
    }
    let passed = checks.iter().all(|c| c.passed != Some(false));
    print_json(&json!({ "scope": "flow", "dir": dir, "passed": passed, "checks": checks }));
    Ok(if passed { 0 } else { EXIT_VIOLATION })
}

fn cmd_analyze(dir: &Path, rho: Option<Vec<f64>>, epsilon: Option<Vec<f64>>) -> Outcome {
    let (config, traj) = load_trajectory(dir)?;
    let mut monitors = config.monitors.clone();
    if let Some(r) = rho {
        monitors.rhos = r;
    }
    if let Some(e) = epsilon {
        monitors.epsilons = e;
    }
    let analysis = analyze(&traj, &monitors)?;
    write_analysis(dir, &traj, &analysis)?;
    print_json(&analysis);
    Ok(0)
}

fn thread_cap() -> Result<(), Failure> {
    let Ok(text) = std::env::var("CURVFLOW_THREADS") else {
        return Ok(());
    };
    let n: usize = text.trim().parse().map_err(|_| Failure {
        code: EXIT_PRECONDITION,
        message: format!("CURVFLOW_THREADS = '{text}' is not a thread count"),
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure {
            code: EXIT_PRECONDITION,
            message: e.to_string(),
        })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = thread_cap().and_then(|_| match &cli.command {
        Command::Shape {
            spec,
            dim,
            degree,
            speed,
            output,
        } => cmd_shape(spec, *dim, *degree, speed, output),
        Command::Simulate { configs, jobs } => cmd_simulate(configs, *jobs),
        Command::Verify { scope } => match scope {
            Scope::Lemmas { samples, seed, dims } => cmd_verify_lemmas(*samples, *seed, dims),
            Scope::Speeds {
                spec,
                samples,
                seed,
                dims,
            } => cmd_verify_speeds(spec, *samples, *seed, dims),
            Scope::Flow { dir } => cmd_verify_flow(dir),
        },
        Command::Analyze { dir, rho, epsilon } => cmd_analyze(dir, rho.clone(), epsilon.clone()),
    });
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
