//! Benchmark driver: runs the regularized solver across a descending ε₀
//! ladder, measures each solution against the decomposed ε = 0 reference, and
//! fits the convergence order on the log-log error curve.
//!
//! Everything written to `report.csv` is deterministic; wall time lives only
//! in the JSON summary so repeated runs produce byte-identical reports.

use std::path::Path;

use serde::Serialize;

use crate::fem::eval::{
    coenergy_total, curl_l2_norm, curl_residual_norm, l2_error_b, l2_error_h, l2_norm_b,
    l2_norm_h, weak_divergence,
};
use crate::fem::problems::{
    solve_penalty, solve_penalty_with, solve_scalar, solve_vector, PenaltyProblem, PenaltyState,
};
use crate::fem::{FieldRep, FieldSolution, Formulation, Problem};
use crate::limit::{solve_limit, LimitSolution};
use crate::solve::{cg_solve, NonlinearProblem, SolveError};
use crate::sparse::norm2;

/// Regularization ladder used when the caller doesn't supply one.
pub const DEFAULT_EPSILONS: [f64; 5] = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5];

/// Number of trailing ladder points entering the least-squares order fit.
pub const FIT_TAIL: usize = 4;

/// One ladder point of a sweep.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub epsilon0: f64,
    /// ‖h_ε − h_0‖ / ‖h_0‖ in L².
    pub err_h_rel: f64,
    /// ‖b_ε − b_0‖ / ‖b_0‖ in L².
    pub err_b_rel: f64,
    /// ‖curl h_ε − j‖ / ‖j‖ in L².
    pub curl_residual_rel: f64,
    pub newton_iters: usize,
    pub final_residual: f64,
    pub coenergy: f64,
    /// (‖h_ε‖² + ‖curl h_ε‖²)^½ — stays bounded as ε shrinks. Summary-only;
    /// the CSV keeps its fixed column set.
    pub h_hcurl_norm: f64,
    /// Unpreconditioned CG iteration count on the final Jacobian — an
    /// observational conditioning probe, not part of the solve path.
    pub cg_iters: usize,
}

/// Least-squares line through log-log points.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct FitLine {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub fit_h: FitLine,
    pub fit_b: FitLine,
    pub fit_curl: FitLine,
    /// Relative residuals the reference solve achieved on its two blocks.
    pub limit_kkt_residuals: (f64, f64),
    pub limit_coenergy: f64,
}

/// Fit `ln y = intercept + slope · ln x` over the last `tail` points by
/// ordinary least squares. R² is reported against the mean of ln y; a flat
/// set of points fits its own mean perfectly, so R² degenerates to 1 there.
pub fn fit_loglog(points: &[(f64, f64)], tail: usize) -> FitLine {
    let start = points.len().saturating_sub(tail);
    let pts = &points[start..];
    let n = pts.len() as f64;
    let xs: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let xm = xs.iter().sum::<f64>() / n;
    let ym = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - xm) * (x - xm)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let e = y - (intercept + slope * x);
            e * e
        })
        .sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - ym) * (y - ym)).sum();
    let r2 = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    FitLine { slope, intercept, r2 }
}

/// L² norm of the source current over the whole domain.
pub fn source_norm(problem: &Problem) -> f64 {
    let mesh = &problem.mesh;
    let mut s = 0.0;
    for t in 0..mesh.n_triangles() {
        let j = problem.current(t);
        s += mesh.area(t) * j * j;
    }
    s.sqrt()
}

/// Unpreconditioned CG on the final-state Jacobian against the (negated)
/// final residual; all-ones right-hand side if the residual is exactly zero.
/// Returns the iteration count, capped at 10·n.
fn conditioning_probe(pen: &PenaltyProblem, x: &[f64]) -> usize {
    let a = pen.jacobian(x);
    let n = pen.dim();
    let mut r = vec![0.0; n];
    pen.residual(x, &mut r);
    let b: Vec<f64> = if norm2(&r) == 0.0 {
        vec![1.0; n]
    } else {
        r.iter().map(|v| -v).collect()
    };
    let cap = 10 * n;
    cg_solve(&a, &b, None, 1e-12, cap, None).iters.min(cap)
}

/// Solve one formulation. `epsilon0` only matters for the regularized one.
pub fn run_solve(
    problem: &Problem,
    formulation: Formulation,
    epsilon0: f64,
) -> Result<FieldSolution, SolveError> {
    match formulation {
        Formulation::Penalty => solve_penalty(problem, epsilon0, None).map(|(sol, _)| sol),
        Formulation::Scalar => solve_scalar(problem),
        Formulation::Vector => solve_vector(problem),
        Formulation::Limit => solve_limit(problem).map(|(sol, _)| sol),
    }
}

/// Full sweep output: the report plus everything it was computed from, for
/// callers that want to inspect the per-rung fields or Newton traces.
pub struct SweepData {
    pub report: SweepReport,
    /// The ε = 0 reference the errors are measured against.
    pub reference: FieldSolution,
    pub limit_parts: LimitSolution,
    /// Regularized solutions, one per ladder point, in ladder order.
    pub solutions: Vec<FieldSolution>,
}

/// Run the ε₀ ladder (descending) against the ε = 0 reference.
pub fn run_sweep_detailed(
    problem: &Problem,
    epsilons: &[f64],
    warm_start: bool,
) -> Result<SweepData, SolveError> {
    assert!(
        epsilons.windows(2).all(|w| w[0] > w[1]),
        "sweep ladder must descend"
    );
    let (reference, parts) = solve_limit(problem)?;
    let norm_h = l2_norm_h(problem, &reference);
    let norm_b = l2_norm_b(problem, &reference);
    let norm_j = source_norm(problem);

    let mut rows = Vec::with_capacity(epsilons.len());
    let mut solutions = Vec::with_capacity(epsilons.len());
    let mut previous: Option<PenaltyState> = None;
    for &eps0 in epsilons {
        let (sol, state) = solve_penalty_with(problem, eps0, &parts.z, previous.as_ref())?;
        let coeffs = match &sol.rep {
            FieldRep::Edge(c) => c.clone(),
            _ => unreachable!("regularized solutions are edge fields"),
        };
        let pen = PenaltyProblem::new(problem, problem.epsilon(eps0));
        rows.push(SweepRow {
            epsilon0: eps0,
            err_h_rel: l2_error_h(problem, &sol, &reference) / norm_h,
            err_b_rel: l2_error_b(problem, &sol, &reference) / norm_b,
            curl_residual_rel: curl_residual_norm(problem, &coeffs) / norm_j,
            newton_iters: sol.trace.iterations(),
            final_residual: sol.trace.final_residual(),
            coenergy: coenergy_total(problem, &sol),
            h_hcurl_norm: l2_norm_h(problem, &sol)
                .hypot(curl_l2_norm(problem, &coeffs)),
            cg_iters: conditioning_probe(&pen, &coeffs),
        });
        solutions.push(sol);
        if warm_start {
            previous = Some(state);
        }
    }

    let pick = |f: fn(&SweepRow) -> f64| -> Vec<(f64, f64)> {
        rows.iter().map(|r| (r.epsilon0, f(r))).collect()
    };
    let report = SweepReport {
        fit_h: fit_loglog(&pick(|r| r.err_h_rel), FIT_TAIL),
        fit_b: fit_loglog(&pick(|r| r.err_b_rel), FIT_TAIL),
        fit_curl: fit_loglog(&pick(|r| r.curl_residual_rel), FIT_TAIL),
        limit_kkt_residuals: parts.kkt_residuals,
        limit_coenergy: coenergy_total(problem, &reference),
        rows,
    };
    Ok(SweepData { report, reference, limit_parts: parts, solutions })
}

/// Run the ε₀ ladder and keep only the report.
pub fn run_sweep(
    problem: &Problem,
    epsilons: &[f64],
    warm_start: bool,
) -> Result<SweepReport, SolveError> {
    run_sweep_detailed(problem, epsilons, warm_start).map(|d| d.report)
}

pub const REPORT_HEADER: &str =
    "epsilon0,err_h_rel,err_b_rel,curl_residual_rel,newton_iters,final_residual,coenergy,cg_iters";

impl SweepReport {
    /// Deterministic CSV: one row per ladder point, floats in scientific
    /// notation via the shortest-roundtrip formatter.
    pub fn write_csv(&self, path: &Path) -> std::io::Result<()> {
        let rows: Vec<String> = self
            .rows
            .iter()
            .map(|r| {
                format!(
                    "{:e},{:e},{:e},{:e},{},{:e},{:e},{}",
                    r.epsilon0,
                    r.err_h_rel,
                    r.err_b_rel,
                    r.curl_residual_rel,
                    r.newton_iters,
                    r.final_residual,
                    r.coenergy,
                    r.cg_iters
                )
            })
            .collect();
        crate::io::write_csv(path, REPORT_HEADER, &rows)
    }

    /// JSON summary; the only place wall time appears.
    pub fn summary_json(&self, wall_seconds: f64) -> serde_json::Value {
        serde_json::json!({
            "kind": "sweep",
            "rows": self.rows,
            "fit_h": self.fit_h,
            "fit_b": self.fit_b,
            "fit_curl": self.fit_curl,
            "limit_kkt_residuals": [self.limit_kkt_residuals.0, self.limit_kkt_residuals.1],
            "limit_coenergy": self.limit_coenergy,
            "wall_seconds": wall_seconds,
        })
    }
}

/// Per-formulation figures in a comparison run.
#[derive(Debug, Clone, Serialize)]
pub struct CompareSolve {
    pub formulation: Formulation,
    pub newton_iters: usize,
    pub final_residual: f64,
    pub coenergy: f64,
    pub weak_divergence: f64,
}

/// One pairwise difference, measured relative to the `right` member.
#[derive(Debug, Clone, Serialize)]
pub struct ComparePair {
    pub left: Formulation,
    pub right: Formulation,
    /// ‖h_L − h_R‖ / ‖h_R‖ in L².
    pub h_rel_diff: f64,
    /// ‖b_L − b_R‖ / ‖b_R‖ in L².
    pub b_rel_diff: f64,
}

/// All four formulations solved on one mesh, with every pairwise field
/// difference. The limit-vs-scalar pair isolates how much the two source
/// representations disagree; anything vs vector estimates discretization
/// error, since the vector potential discretizes the complementary energy.
#[derive(Debug, Clone, Serialize)]
pub struct CompareReport {
    pub epsilon0: f64,
    pub solves: Vec<CompareSolve>,
    pub pairs: Vec<ComparePair>,
}

/// Order in which comparison solves run; pairs are (earlier, later), with the
/// later member serving as the denominator of the relative difference.
const COMPARE_ORDER: [Formulation; 4] =
    [Formulation::Penalty, Formulation::Scalar, Formulation::Limit, Formulation::Vector];

pub fn run_compare(problem: &Problem, epsilon0: f64) -> Result<CompareReport, SolveError> {
    let mut solutions = Vec::with_capacity(COMPARE_ORDER.len());
    let mut solves = Vec::with_capacity(COMPARE_ORDER.len());
    for &formulation in &COMPARE_ORDER {
        let sol = run_solve(problem, formulation, epsilon0)?;
        solves.push(CompareSolve {
            formulation,
            newton_iters: sol.trace.iterations(),
            final_residual: sol.trace.final_residual(),
            coenergy: coenergy_total(problem, &sol),
            weak_divergence: weak_divergence(problem, &sol),
        });
        solutions.push(sol);
    }
    let mut pairs = Vec::new();
    for i in 0..solutions.len() {
        for j in i + 1..solutions.len() {
            let (l, r) = (&solutions[i], &solutions[j]);
            pairs.push(ComparePair {
                left: l.formulation,
                right: r.formulation,
                h_rel_diff: l2_error_h(problem, l, r) / l2_norm_h(problem, r),
                b_rel_diff: l2_error_b(problem, l, r) / l2_norm_b(problem, r),
            });
        }
    }
    Ok(CompareReport { epsilon0, solves, pairs })
}

impl CompareReport {
    pub fn summary_json(&self, wall_seconds: f64) -> serde_json::Value {
        serde_json::json!({
            "kind": "compare",
            "epsilon0": self.epsilon0,
            "solves": self.solves,
            "pairs": self.pairs,
            "wall_seconds": wall_seconds,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loglog_fit_recovers_exact_power_law() {
        let pts: Vec<(f64, f64)> = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5]
            .iter()
            .map(|&e: &f64| (e, 3.7 * e.powf(1.25)))
            .collect();
        let fit = fit_loglog(&pts, 4);
        assert!((fit.slope - 1.25).abs() < 1e-12, "slope {}", fit.slope);
        assert!((fit.intercept - 3.7f64.ln()).abs() < 1e-12);
        assert!((fit.r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn loglog_fit_matches_hand_computed_least_squares() {
        // ln-pairs (0,1), (1,2), (2,2), (3,4): slope 0.9, intercept 0.9,
        // R² = 1 − 0.70/4.75 (worked by hand from the normal equations).
        let pts: Vec<(f64, f64)> = [(0.0f64, 1.0f64), (1.0, 2.0), (2.0, 2.0), (3.0, 4.0)]
            .iter()
            .map(|&(x, y)| (x.exp(), y.exp()))
            .collect();
        let fit = fit_loglog(&pts, 4);
        assert!((fit.slope - 0.9).abs() < 1e-12);
        assert!((fit.intercept - 0.9).abs() < 1e-12);
        assert!((fit.r2 - (1.0 - 0.70 / 4.75)).abs() < 1e-12);
    }

    #[test]
    fn loglog_fit_uses_only_the_tail() {
        // First point is garbage; the tail fit must ignore it.
        let mut pts: Vec<(f64, f64)> =
            [1e-2, 1e-3, 1e-4, 1e-5].iter().map(|&e: &f64| (e, 2.0 * e)).collect();
        pts.insert(0, (1e-1, 1.0e3));
        let fit = fit_loglog(&pts, 4);
        assert!((fit.slope - 1.0).abs() < 1e-12);
        assert!((fit.r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sweep_report_csv_is_deterministic_and_excludes_wall_time() {
        let report = SweepReport {
            rows: vec![SweepRow {
                epsilon0: 1e-1,
                err_h_rel: 0.25,
                err_b_rel: 0.5,
                curl_residual_rel: 0.125,
                newton_iters: 7,
                final_residual: 1e-11,
                coenergy: 3.5,
                h_hcurl_norm: 2.75,
                cg_iters: 42,
            }],
            fit_h: FitLine { slope: 1.0, intercept: 0.0, r2: 1.0 },
            fit_b: FitLine { slope: 1.0, intercept: 0.0, r2: 1.0 },
            fit_curl: FitLine { slope: 1.0, intercept: 0.0, r2: 1.0 },
            limit_kkt_residuals: (1e-12, 1e-13),
            limit_coenergy: 3.25,
        };
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("a.csv");
        let p2 = dir.path().join("b.csv");
        report.write_csv(&p1).unwrap();
        report.write_csv(&p2).unwrap();
        let a = std::fs::read(&p1).unwrap();
        assert_eq!(a, std::fs::read(&p2).unwrap());
        let text = String::from_utf8(a).unwrap();
        assert_eq!(
            text,
            format!("{REPORT_HEADER}\n1e-1,2.5e-1,5e-1,1.25e-1,7,1e-11,3.5e0,42\n")
        );
        assert!(!text.contains("wall"));
        let summary = report.summary_json(12.5);
        assert_eq!(summary["wall_seconds"], 12.5);
        assert_eq!(summary["fit_h"]["slope"], 1.0);
        // Field norms go to the summary, not the byte-stable CSV.
        assert!(!text.contains("2.75"));
        assert_eq!(summary["rows"][0]["h_hcurl_norm"], 2.75);
    }

    #[test]
    fn sweep_field_norms_stay_bounded_as_epsilon_shrinks() {
        // The regularized solutions approach the constrained one, so their
        // H(curl) norms must hold within a narrow band while ε drops decades.
        let setup = crate::io::CaseSetup {
            geometry: crate::mesh::GeometrySpec {
                bbox: crate::mesh::Rect::new(0.0, 0.0, 1.0, 1.0),
                regions: vec![
                    crate::mesh::Region {
                        name: "coil".into(),
                        tag: 1,
                        rect: crate::mesh::Rect::new(0.0, 0.0, 0.5, 1.0),
                        mesh_size: 0.25,
                    },
                    crate::mesh::Region {
                        name: "iron".into(),
                        tag: 2,
                        rect: crate::mesh::Rect::new(0.5, 0.0, 1.0, 1.0),
                        mesh_size: 0.25,
                    },
                ],
            },
            materials: std::collections::BTreeMap::from([
                (1, crate::material::MaterialLaw::Linear { mu: crate::material::MU0 }),
                (2, crate::material::MaterialLaw::default_nonlinear()),
            ]),
            currents: std::collections::BTreeMap::from([(1, 1.0e3)]),
            solver: crate::io::SolverSettings::default(),
        };
        let problem = Problem::from_setup(&setup).unwrap();
        let report = run_sweep(&problem, &[1e-1, 1e-2, 1e-3], false).unwrap();
        let max = report.rows.iter().map(|r| r.h_hcurl_norm).fold(0.0, f64::max);
        let min = report.rows.iter().map(|r| r.h_hcurl_norm).fold(f64::INFINITY, f64::min);
        assert!(min > 0.0 && max / min < 2.0, "norms range [{min}, {max}]");
    }
}
