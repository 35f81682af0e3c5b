//! `tracksim` — run tracking-strategy experiments from scenario configs.
//!
//! Exit codes: 0 success, 2 scenario validation failure, 3 estimator
//! consistency alarm, 1 any other error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;

use tracksim_core::experiments::{
    presets, run_strategy, run_sweep, suboptimality_report, validate_scenario, EstimatorKind,
    Scenario,
};
use tracksim_core::stationary::{empirical_occupation, GridSpec};
use tracksim_core::{Error, StrategySpec};

#[derive(Parser)]
#[command(
    name = "tracksim",
    about = "Feedback tracking strategies: simulation, limits, sweeps",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the admissibility / homogeneity / exponent checks of a scenario.
    Validate(ConfigArg),
    /// Simulate one controlled path and dump it as CSV
    /// (time, deviation, control, cumulative phi, jump marker).
    Simulate {
        #[command(flatten)]
        config: ConfigArg,
        /// Scale parameter of the run.
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
        /// Replication index (seeds are derived deterministically).
        #[arg(long, default_value_t = 0)]
        rep: u64,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate the stationary occupation pair at unit scale and dump the
    /// histograms as CSV (bin center, mass).
    Occupation {
        #[command(flatten)]
        config: ConfigArg,
        /// Unit-scale horizon (defaults to the scenario's solver option).
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the theoretical limit `∫ c dt` of the scenario's strategy.
    Limit {
        #[command(flatten)]
        config: ConfigArg,
        /// Estimator backing the stationary pair.
        #[arg(long, value_enum, default_value_t = EstimatorArg::Auto)]
        estimator: EstimatorArg,
    },
    /// Run the ε-sweep and write CSV / JSON / plot-data files.
    Sweep {
        #[command(flatten)]
        config: ConfigArg,
        /// Output directory for <name>.csv, <name>.json, <name>.dat.
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
        /// Override the scenario's replication count.
        #[arg(long)]
        replications: Option<usize>,
    },
    /// Report the suboptimality ratio c/I against the closed-form bound.
    Report(ConfigArg),
    /// Solve the impulse matrix equation and print B, Tr(aB), the weighted
    /// bound and the optimal domain.
    SolveB {
        /// Diffusion matrix, rows separated by ';' (e.g. "1,0;0,1").
        #[arg(long)]
        a: String,
        /// Deviation cost matrix Σ^D.
        #[arg(long)]
        sigma_d: String,
        #[arg(long, default_value_t = 1.0)]
        r: f64,
        #[arg(long, default_value_t = 1.0)]
        k: f64,
    },
    /// Solve the LQ feedback problem and print G, the gain, Tr(aG) and the
    /// stationary covariance.
    SolveLq {
        #[arg(long)]
        a: String,
        /// Deviation cost matrix D.
        #[arg(long)]
        d_mat: String,
        /// Control cost matrix Q.
        #[arg(long)]
        q_mat: String,
        #[arg(long, default_value_t = 1.0)]
        r: f64,
        #[arg(long, default_value_t = 1.0)]
        l: f64,
    },
    /// List the built-in scenario presets, or write them out as JSON configs.
    Preset {
        /// Write this preset (or all of them) instead of listing.
        #[arg(long)]
        name: Option<String>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ConfigArg {
    /// Scenario config file (JSON).
    #[arg(long)]
    config: PathBuf,
}

#[derive(Copy, Clone, ValueEnum)]
enum EstimatorArg {
    Auto,
    Oracle,
    Simulation,
    ClosedForm,
    Cross,
}

impl From<EstimatorArg> for EstimatorKind {
    fn from(v: EstimatorArg) -> Self {
        match v {
            EstimatorArg::Auto => EstimatorKind::Auto,
            EstimatorArg::Oracle => EstimatorKind::Oracle,
            EstimatorArg::Simulation => EstimatorKind::Simulation,
            EstimatorArg::ClosedForm => EstimatorKind::ClosedForm,
            EstimatorArg::Cross => EstimatorKind::Cross,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::ValidationFailed(_) => ExitCode::from(2),
                Error::EstimatorDisagreement { .. } => ExitCode::from(3),
                _ => ExitCode::FAILURE,
            }
        }
    }
}

fn load(path: &Path) -> Result<Scenario, Error> {
    let text = fs::read_to_string(path)?;
    Scenario::from_json(&text)
}

fn parse_matrix(text: &str) -> Result<DMatrix<f64>, Error> {
    let rows: Vec<Vec<f64>> = text
        .split(';')
        .map(|row| {
            row.split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<Result<Vec<f64>, _>>()
        })
        .collect::<Result<_, _>>()
        .map_err(|e| Error::InvalidSpec(format!("bad matrix '{text}': {e}")))?;
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidSpec(format!(
            "matrix '{text}' must be square"
        )));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn print_matrix(name: &str, m: &DMatrix<f64>) {
    println!("{name}:");
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols())
            .map(|j| format!("{:>12.6}", m[(i, j)]))
            .collect();
        println!("  [{}]", row.join(", "));
    }
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Validate(cfg) => {
            let sc = load(&cfg.config)?;
            let report = validate_scenario(&sc);
            print!("{report}");
            if report.pass() {
                println!("scenario '{}' is valid", sc.name);
                Ok(ExitCode::SUCCESS)
            } else {
                Err(Error::ValidationFailed(format!("scenario '{}'", sc.name)))
            }
        }
        Command::Simulate {
            config,
            eps,
            rep,
            out,
        } => {
            let sc = load(&config.config)?;
            let seed = tracksim_core::mix_seed(sc.base_seed, 0x51a, rep);
            let path = run_strategy(&sc, eps, seed)?;
            let file = fs::File::create(&out)?;
            path.write_csv(file)?;
            println!(
                "wrote {} ({} steps, {} jumps, phi = {:.6})",
                out.display(),
                path.grid.n_steps,
                path.jumps.len(),
                path.phi_total()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Occupation {
            config,
            horizon,
            out,
        } => {
            let sc = load(&config.config)?;
            let mut unit = sc.clone();
            unit.horizon = horizon.unwrap_or(sc.solver.unit_horizon);
            let seed = tracksim_core::mix_seed(sc.base_seed, 0x0cc, 0);
            let path = run_strategy(&unit, 1.0, seed)?;
            let domain = sc.strategy.domain().cloned();
            let grid = match &domain {
                Some(d) => {
                    GridSpec::for_domain(d, 0.0, sc.solver.occupation_bins, sc.solver.boundary_bins)
                }
                None => {
                    return Err(Error::Unsupported(
                        "occupation dump needs a bounded-domain strategy".into(),
                    ))
                }
            };
            let pair = empirical_occupation(&path, sc.solver.burn_in, &grid, domain.as_ref())?;
            let file = fs::File::create(&out)?;
            pair.write_csv(file)?;
            println!(
                "wrote {} (boundary intensity {:.6})",
                out.display(),
                pair.total_boundary_mass
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Limit { config, estimator } => {
            let mut sc = load(&config.config)?;
            sc.solver.limit_estimator = estimator.into();
            let est = sc.limit_estimator();
            let c = tracksim_core::stationary::integrate_limit_over_time(
                &sc.target,
                &sc.strategy,
                &sc.cost,
                sc.horizon,
                sc.solver.limit_time_points,
                &est,
            )?;
            println!("{}", serde_json::to_string_pretty(&c)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep {
            config,
            out_dir,
            replications,
        } => {
            let mut sc = load(&config.config)?;
            if let Some(r) = replications {
                sc.replications = r;
            }
            let out = run_sweep(&sc)?;
            fs::create_dir_all(&out_dir)?;
            let base = out_dir.join(&sc.name);
            let csv_path = base.with_extension("csv");
            out.write_csv(fs::File::create(&csv_path)?)?;
            fs::write(base.with_extension("json"), out.to_json()?)?;
            let mut plot = Vec::new();
            out.write_plot_data(&mut plot)?;
            fs::write(base.with_extension("dat"), plot)?;
            println!("eps      mean_total   se_total");
            for row in &out.rows {
                println!(
                    "{:<8} {:<12.6} {:<12.6}",
                    row.eps, row.mean_total, row.se_total
                );
            }
            if let Some(limit) = &out.limit {
                println!("limit    {:<12.6}", limit.total);
            }
            if let Some(cf) = &out.closed_form {
                println!("closed   {:<12.6}", cf.total);
            }
            if let Some(ratio) = out.suboptimality_ratio {
                println!("ratio    {ratio:<12.6}");
            }
            println!("wrote {}.{{csv,json,dat}}", base.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Report(cfg) => {
            let sc = load(&cfg.config)?;
            let rep = suboptimality_report(&sc)?;
            println!("{}", serde_json::to_string_pretty(&rep)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::SolveB { a, sigma_d, r, k } => {
            let a = parse_matrix(&a)?;
            let sd = parse_matrix(&sigma_d)?;
            let lb = tracksim_core::closed_form::impulse_lower_bound(&a, &sd, r, k)?;
            let json = serde_json::json!({
                "b": matrix_rows(&lb.solution.b),
                "residual": lb.solution.residual,
                "trace_ab": lb.solution.trace_ab,
                "i_value": lb.i_value,
                "optimal_domain_matrix": matrix_rows(&lb.domain_matrix),
            });
            println!("{}", serde_json::to_string_pretty(&json)?);
            print_matrix("B", &lb.solution.b);
            println!("residual:  {:.3e}", lb.solution.residual);
            println!("Tr(aB):    {:.9}", lb.solution.trace_ab);
            println!("I = Tr(aB)·sqrt(rk): {:.9}", lb.i_value);
            print_matrix("optimal domain {x: x'Mx < 1} with M", &lb.domain_matrix);
            Ok(ExitCode::SUCCESS)
        }
        Command::SolveLq {
            a,
            d_mat,
            q_mat,
            r,
            l,
        } => {
            let a = parse_matrix(&a)?;
            let d = parse_matrix(&d_mat)?;
            let q = parse_matrix(&q_mat)?;
            let sol = tracksim_core::closed_form::solve_lq(&a, &d, &q, r, l)?;
            let json = serde_json::json!({
                "g": matrix_rows(&sol.g),
                "feedback": matrix_rows(&sol.feedback),
                "i_value": sol.i_value,
                "stationary_covariance": sol.stationary_covariance.as_ref().map(matrix_rows),
                "degenerate": sol.degenerate,
                "residual": sol.residual,
            });
            println!("{}", serde_json::to_string_pretty(&json)?);
            print_matrix("G", &sol.g);
            print_matrix("feedback gain", &sol.feedback);
            println!("I^V = Tr(aG): {:.9}", sol.i_value);
            if let Some(c) = &sol.stationary_covariance {
                print_matrix("stationary covariance", c);
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Preset { name, out_dir } => {
            let list = presets::all();
            match (name, out_dir) {
                (None, None) => {
                    for sc in &list {
                        let family = match &sc.strategy {
                            StrategySpec::Impulse(_) => "impulse",
                            StrategySpec::Singular(_) => "singular",
                            StrategySpec::Regular(_) => "regular",
                        };
                        println!(
                            "{:<24} {family:<9} d={} T={}",
                            sc.name, sc.target.dim, sc.horizon
                        );
                    }
                    Ok(ExitCode::SUCCESS)
                }
                (name, out_dir) => {
                    let dir = out_dir.unwrap_or_else(|| PathBuf::from("scenarios"));
                    fs::create_dir_all(&dir)?;
                    let chosen: Vec<Scenario> = match name {
                        Some(n) => list.into_iter().filter(|s| s.name == n).collect(),
                        None => list,
                    };
                    if chosen.is_empty() {
                        return Err(Error::InvalidSpec("no preset with that name".into()));
                    }
                    for sc in chosen {
                        let path = dir.join(format!("{}.json", sc.name));
                        fs::write(&path, sc.to_json()?)?;
                        println!("wrote {}", path.display());
                    }
                    Ok(ExitCode::SUCCESS)
                }
            }
        }
    }
}
