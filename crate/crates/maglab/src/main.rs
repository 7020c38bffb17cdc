use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use maglab::fem::eval::{cell_fields, coenergy_total, weak_divergence};
use maglab::fem::{Formulation, Problem};
use maglab::harness::{run_compare, run_solve, run_sweep, DEFAULT_EPSILONS};
use maglab::io::{load_bh, load_config, write_vtk, Diagnostic};
use maglab::material::MaterialLaw;
use maglab::solve::SolveError;

/// 2D nonlinear magnetostatics: regularized, potential, and limit solvers.
#[derive(Parser)]
#[command(name = "maglab", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one formulation and write fields_<formulation>.vtk,
    /// trace_<formulation>.csv, summary.json.
    Solve {
        /// Case description (JSON).
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum, default_value_t = Formulation::Penalty)]
        formulation: Formulation,
        /// Dimensionless regularization parameter (regularized solver only);
        /// defaults to the config's solver.epsilon0.
        #[arg(long)]
        epsilon0: Option<f64>,
        /// Output directory (created if missing).
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the ε₀ ladder against the limit reference; write report.csv and
    /// summary.json.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Descending comma-separated ladder, e.g. 1e-1,1e-2,1e-3.
        #[arg(long, value_delimiter = ',')]
        epsilons: Option<Vec<f64>>,
        /// Start each ladder point from the previous solution.
        #[arg(long)]
        warm_start: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve all four formulations on the same mesh and report their pairwise
    /// field differences.
    Compare {
        #[arg(long)]
        config: PathBuf,
        /// ε₀ for the regularized member; defaults to the config's
        /// solver.epsilon0.
        #[arg(long)]
        epsilon0: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a measured B–H curve for admissibility and print its monotonicity
    /// and Lipschitz constants.
    Certify {
        /// CSV with header `h_A_per_m,b_T`.
        #[arg(long)]
        bh: PathBuf,
    },
}

const EXIT_CONFIG: u8 = 2;
const EXIT_SOLVE: u8 = 3;

fn report_diagnostics(diags: &[Diagnostic]) -> ExitCode {
    for d in diags {
        eprintln!("{d}");
    }
    ExitCode::from(EXIT_CONFIG)
}

fn report_solve_error(err: &SolveError) -> ExitCode {
    eprintln!("error: {err}");
    ExitCode::from(EXIT_SOLVE)
}

fn load_problem(config: &Path) -> Result<Problem, ExitCode> {
    let setup = load_config(config).map_err(|d| report_diagnostics(&d))?;
    Problem::from_setup(&setup).map_err(|e| {
        eprintln!("{}: error: {e}", config.display());
        ExitCode::from(EXIT_CONFIG)
    })
}

fn write_json(path: &Path, value: &serde_json::Value) -> std::io::Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("json serialization");
    text.push('\n');
    std::fs::write(path, text)
}

fn cmd_solve(
    config: &Path,
    formulation: Formulation,
    epsilon0: Option<f64>,
    out: &Path,
) -> Result<(), ExitCode> {
    let problem = load_problem(config)?;
    let epsilon0 = epsilon0.unwrap_or(problem.settings.epsilon0);
    std::fs::create_dir_all(out).map_err(|e| {
        eprintln!("{}: error: {e}", out.display());
        ExitCode::FAILURE
    })?;
    let start = Instant::now();
    let sol = run_solve(&problem, formulation, epsilon0).map_err(|e| report_solve_error(&e))?;
    let wall = start.elapsed().as_secs_f64();

    let fields = cell_fields(&problem, &sol);
    let region: Vec<f64> = fields.region.iter().map(|&t| f64::from(t)).collect();
    let io_err = |e: std::io::Error| {
        eprintln!("{}: error: {e}", out.display());
        ExitCode::FAILURE
    };
    write_vtk(
        &out.join(format!("fields_{formulation}.vtk")),
        &problem.mesh,
        &[("h_field", &fields.h), ("b_field", &fields.b)],
        &[("curl_defect", &fields.curl_minus_j), ("region", &region)],
    )
    .map_err(io_err)?;
    sol.trace.write_csv(&out.join(format!("trace_{formulation}.csv"))).map_err(io_err)?;

    let summary = serde_json::json!({
        "kind": "solve",
        "formulation": formulation,
        "epsilon": sol.epsilon,
        "converged": sol.trace.converged,
        "newton_iters": sol.trace.iterations(),
        "final_residual": sol.trace.final_residual(),
        "coenergy": coenergy_total(&problem, &sol),
        "weak_divergence": weak_divergence(&problem, &sol),
        "mesh": {
            "vertices": problem.mesh.n_vertices(),
            "edges": problem.mesh.n_edges(),
            "triangles": problem.mesh.n_triangles(),
        },
        "wall_seconds": wall,
    });
    write_json(&out.join("summary.json"), &summary).map_err(io_err)?;
    println!(
        "{formulation}: {} iterations, residual {:e}",
        sol.trace.iterations(),
        sol.trace.final_residual()
    );
    Ok(())
}

fn cmd_sweep(
    config: &Path,
    epsilons: Option<Vec<f64>>,
    warm_start: bool,
    out: &Path,
) -> Result<(), ExitCode> {
    let problem = load_problem(config)?;
    let ladder = epsilons.unwrap_or_else(|| DEFAULT_EPSILONS.to_vec());
    if !ladder.windows(2).all(|w| w[0] > w[1]) || ladder.iter().any(|&e| !(e > 0.0)) {
        eprintln!("error: --epsilons must be positive and strictly descending");
        return Err(ExitCode::from(EXIT_CONFIG));
    }
    std::fs::create_dir_all(out).map_err(|e| {
        eprintln!("{}: error: {e}", out.display());
        ExitCode::FAILURE
    })?;
    let start = Instant::now();
    let report = run_sweep(&problem, &ladder, warm_start).map_err(|e| report_solve_error(&e))?;
    let wall = start.elapsed().as_secs_f64();
    let io_err = |e: std::io::Error| {
        eprintln!("{}: error: {e}", out.display());
        ExitCode::FAILURE
    };
    report.write_csv(&out.join("report.csv")).map_err(io_err)?;
    write_json(&out.join("summary.json"), &report.summary_json(wall)).map_err(io_err)?;
    println!(
        "fit over last points: h slope {:.4} (R² {:.6}), b slope {:.4}, curl slope {:.4}",
        report.fit_h.slope, report.fit_h.r2, report.fit_b.slope, report.fit_curl.slope
    );
    Ok(())
}

fn cmd_compare(config: &Path, epsilon0: Option<f64>, out: &Path) -> Result<(), ExitCode> {
    let problem = load_problem(config)?;
    let epsilon0 = epsilon0.unwrap_or(problem.settings.epsilon0);
    std::fs::create_dir_all(out).map_err(|e| {
        eprintln!("{}: error: {e}", out.display());
        ExitCode::FAILURE
    })?;
    let start = Instant::now();
    let report = run_compare(&problem, epsilon0).map_err(|e| report_solve_error(&e))?;
    let wall = start.elapsed().as_secs_f64();
    write_json(&out.join("summary.json"), &report.summary_json(wall)).map_err(|e| {
        eprintln!("{}: error: {e}", out.display());
        ExitCode::FAILURE
    })?;
    for pair in &report.pairs {
        println!(
            "{} vs {}: h {:.3e}, b {:.3e}",
            pair.left, pair.right, pair.h_rel_diff, pair.b_rel_diff
        );
    }
    Ok(())
}

fn cmd_certify(bh: &Path) -> Result<(), ExitCode> {
    let table = load_bh(bh).map_err(|d| report_diagnostics(&d))?;
    let law = MaterialLaw::Tabulated { table, mu_ext: maglab::MU0 };
    match law.certify() {
        Ok((gamma, lipschitz)) => {
            println!(
                "{}",
                serde_json::json!({
                    "admissible": true,
                    "monotonicity": gamma,
                    "lipschitz": lipschitz,
                })
            );
            Ok(())
        }
        Err(e) => {
            eprintln!("{}: error: {e}", bh.display());
            Err(ExitCode::from(EXIT_CONFIG))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve { config, formulation, epsilon0, out } => {
            cmd_solve(&config, formulation, epsilon0, &out)
        }
        Command::Sweep { config, epsilons, warm_start, out } => {
            cmd_sweep(&config, epsilons, warm_start, &out)
        }
        Command::Compare { config, epsilon0, out } => cmd_compare(&config, epsilon0, &out),
        Command::Certify { bh } => cmd_certify(&bh),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(code) => code,
    }
}
