//! Nonlinear and linear solver drivers: damped Newton with an Armijo line
//! search, preconditioned conjugate gradients, and a checked direct solve.
//!
//! Newton works against [`NonlinearProblem`], whose `residual` must be the
//! exact gradient of its `energy` — the line search relies on that pairing.

use crate::io;
use crate::sparse::{dot, norm2, Csr, DirectSolver, LinearError};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    Linear(#[from] LinearError),
    #[error("Newton did not converge: residual {residual:.3e} after {iters} iterations")]
    NonConvergence {
        residual: f64,
        iters: usize,
        /// Best iterate and its trace, for post-mortem output.
        result: Box<NewtonResult>,
    },
    #[error("line search failed below the minimum step at iteration {iter}")]
    LineSearchFailure { iter: usize, result: Box<NewtonResult> },
}

#[derive(Debug, Clone, Copy)]
pub struct NewtonConfig {
    /// Convergence when ‖r‖ ≤ max(rel_tol·‖r₀‖, abs_tol).
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_iters: usize,
    /// Armijo sufficient-decrease constant.
    pub c1: f64,
    /// Step-length shrink factor per backtrack.
    pub backtrack: f64,
    /// Give up when the step length falls below this.
    pub min_step: f64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig {
            rel_tol: 1e-10,
            abs_tol: 1e-14,
            max_iters: 50,
            c1: 1e-4,
            backtrack: 0.5,
            min_step: (2.0f64).powi(-30),
        }
    }
}

/// One Newton iteration as recorded in the trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    pub residual: f64,
    pub energy: f64,
    /// Accepted line-search step (0 for the initial row).
    pub step: f64,
    /// Inner linear-solver iterations (refinement sweeps for direct solves).
    pub linear_iters: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveTrace {
    pub rows: Vec<TraceRow>,
    pub converged: bool,
}

impl SolveTrace {
    pub fn iterations(&self) -> usize {
        self.rows.last().map_or(0, |r| r.iter)
    }

    pub fn final_residual(&self) -> f64 {
        self.rows.last().map_or(f64::NAN, |r| r.residual)
    }

    pub fn write_csv(&self, path: &Path) -> std::io::Result<()> {
        let rows: Vec<String> = self
            .rows
            .iter()
            .map(|r| {
                format!("{},{:e},{:e},{:e},{}", r.iter, r.residual, r.energy, r.step, r.linear_iters)
            })
            .collect();
        io::write_csv(path, "iter,residual,energy,step,linear_iters", &rows)
    }
}

/// A smooth unconstrained minimization problem. `residual` is the gradient of
/// `energy` and `jacobian` its (symmetric positive definite) Hessian, all in
/// one consistent scaling.
pub trait NonlinearProblem {
    fn dim(&self) -> usize;
    fn energy(&self, x: &[f64]) -> f64;
    fn residual(&self, x: &[f64], out: &mut [f64]);
    fn jacobian(&self, x: &[f64]) -> Csr;
}

#[derive(Debug, Clone)]
pub struct NewtonResult {
    pub x: Vec<f64>,
    pub trace: SolveTrace,
}

/// Damped Newton iteration: factor the Jacobian, take the Newton step under
/// an Armijo backtracking line search, stop on the residual criterion.
pub fn newton<P: NonlinearProblem>(
    problem: &P,
    x0: Vec<f64>,
    cfg: &NewtonConfig,
) -> Result<NewtonResult, SolveError> {
    let n = problem.dim();
    assert_eq!(x0.len(), n);
    let mut x = x0;
    let mut r = vec![0.0; n];
    problem.residual(&x, &mut r);
    let r0 = norm2(&r);
    let tol = (cfg.rel_tol * r0).max(cfg.abs_tol);

    let mut trace = SolveTrace::default();
    trace.rows.push(TraceRow {
        iter: 0,
        residual: r0,
        energy: problem.energy(&x),
        step: 0.0,
        linear_iters: 0,
    });

    let mut rnorm = r0;
    for iter in 1..=cfg.max_iters {
        if rnorm <= tol {
            trace.converged = true;
            return Ok(NewtonResult { x, trace });
        }
        let jac = problem.jacobian(&x);
        let solver = DirectSolver::factor(&jac)?;
        let minus_r: Vec<f64> = r.iter().map(|&v| -v).collect();
        // Tight inner tolerance: regularization sweeps difference solutions
        // down to ~1e-12 of the field norms, so the steps that produce them
        // must not carry more inner-solver error than that.
        let (d, _) = solver.solve_refined(&jac, &minus_r, 1e-12)?;
        let mut gd = dot(&r, &d);
        let d = if gd < 0.0 {
            d
        } else {
            // Defensive: fall back to steepest descent if the factorization
            // lost definiteness.
            gd = -rnorm * rnorm;
            minus_r
        };

        let e0 = problem.energy(&x);
        let mut t = 1.0;
        let mut xt = vec![0.0; n];
        let mut rt = vec![0.0; n];
        // Near the minimum the true decrease per step falls below the
        // rounding noise of the energy evaluation itself; without this
        // allowance the search would reject exact Newton steps and grind
        // t to zero instead of letting the residual reach its floor.
        let fnoise = 16.0 * f64::EPSILON * e0.abs();
        let mut accepted_rnorm = None;
        loop {
            for i in 0..n {
                xt[i] = x[i] + t * d[i];
            }
            let et = problem.energy(&xt);
            if et <= e0 + cfg.c1 * t * gd + fnoise {
                break;
            }
            // Assembled energies carry evaluation noise well above fnoise
            // (long sums with cancelling field differences), so once even the
            // predicted decrease drops below that scale the Armijo comparison
            // is meaningless and would veto exact Newton steps. The gradient
            // keeps its signal much further down: accept on decisive gradient
            // contraction instead — but only in that regime, so a genuinely
            // overshooting step still gets damped on the energy's say-so.
            if -t * gd <= 1024.0 * fnoise {
                problem.residual(&xt, &mut rt);
                let rtn = norm2(&rt);
                if rtn <= 0.5 * rnorm {
                    accepted_rnorm = Some(rtn);
                    break;
                }
            }
            t *= cfg.backtrack;
            if t < cfg.min_step {
                trace.converged = false;
                return Err(SolveError::LineSearchFailure {
                    iter,
                    result: Box::new(NewtonResult { x, trace }),
                });
            }
        }
        x.copy_from_slice(&xt);
        match accepted_rnorm {
            Some(rtn) => {
                r.copy_from_slice(&rt);
                rnorm = rtn;
            }
            None => {
                problem.residual(&x, &mut r);
                rnorm = norm2(&r);
            }
        }
        trace.rows.push(TraceRow {
            iter,
            residual: rnorm,
            energy: problem.energy(&x),
            step: t,
            linear_iters: 0,
        });
    }
    if rnorm <= tol {
        trace.converged = true;
        return Ok(NewtonResult { x, trace });
    }
    trace.converged = false;
    Err(SolveError::NonConvergence {
        residual: rnorm,
        iters: cfg.max_iters,
        result: Box::new(NewtonResult { x, trace }),
    })
}

/// Outcome of a conjugate-gradient solve.
#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    pub iters: usize,
    pub converged: bool,
    /// True if a search direction exposed non-positive curvature (the matrix
    /// is not positive definite); iteration stops immediately.
    pub curvature_failure: bool,
}

/// Preconditioned conjugate gradients with an optional diagonal (Jacobi)
/// preconditioner. Converges when ‖b − Ax‖ ≤ tol·‖b‖; hard cap on iterations.
pub fn cg_solve(
    a: &Csr,
    b: &[f64],
    x0: Option<&[f64]>,
    tol: f64,
    max_iters: usize,
    jacobi: Option<&[f64]>,
) -> CgOutcome {
    let n = a.n();
    assert_eq!(b.len(), n);
    let apply_m = |r: &[f64], z: &mut Vec<f64>| match jacobi {
        Some(d) => {
            z.clear();
            z.extend(r.iter().zip(d).map(|(&ri, &di)| if di != 0.0 { ri / di } else { ri }));
        }
        None => {
            z.clear();
            z.extend_from_slice(r);
        }
    };

    let norm_b = norm2(b);
    let mut x = match x0 {
        Some(v) => {
            assert_eq!(v.len(), n);
            v.to_vec()
        }
        None => vec![0.0; n],
    };
    if norm_b == 0.0 {
        return CgOutcome { x: vec![0.0; n], iters: 0, converged: true, curvature_failure: false };
    }
    let mut r = a.matvec_alloc(&x);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let mut z = Vec::with_capacity(n);
    apply_m(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut q = vec![0.0; n];
    for k in 0..max_iters {
        if norm2(&r) <= tol * norm_b {
            return CgOutcome { x, iters: k, converged: true, curvature_failure: false };
        }
        a.matvec(&p, &mut q);
        let pq = dot(&p, &q);
        if pq <= 0.0 {
            return CgOutcome { x, iters: k, converged: false, curvature_failure: true };
        }
        let alpha = rz / pq;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        apply_m(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let converged = norm2(&r) <= tol * norm_b;
    CgOutcome { x, iters: max_iters, converged, curvature_failure: false }
}

/// Central finite-difference verification of a problem's derivative chain at
/// `x`: is the residual the gradient of the energy, and the Jacobian the
/// derivative of the residual? Returns the max relative errors
/// (gradient, Jacobian), scaled by the largest residual/Jacobian entry.
/// Exploits Jacobian symmetry, so it only applies to our self-adjoint
/// problems. O(n) energy/residual evaluations — small test meshes only.
pub fn finite_difference_check<P: NonlinearProblem>(
    p: &P,
    x: &[f64],
    step_rel: f64,
) -> (f64, f64) {
    let n = p.dim();
    assert_eq!(x.len(), n);
    let xmax = x.iter().fold(0.0f64, |m, &v| m.max(v.abs())).max(1.0);
    let d = step_rel * xmax;

    let mut r = vec![0.0; n];
    p.residual(x, &mut r);
    let rscale = r.iter().fold(0.0f64, |m, &v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let mut xp = x.to_vec();
    let mut grad_err = 0.0f64;
    for i in 0..n {
        xp[i] = x[i] + d;
        let ep = p.energy(&xp);
        xp[i] = x[i] - d;
        let em = p.energy(&xp);
        xp[i] = x[i];
        let fd = (ep - em) / (2.0 * d);
        grad_err = grad_err.max((fd - r[i]).abs() / rscale);
    }

    let jac = p.jacobian(x);
    let mut jscale = f64::MIN_POSITIVE;
    for i in 0..n {
        for (_, v) in jac.row(i) {
            jscale = jscale.max(v.abs());
        }
    }
    let mut jac_err = 0.0f64;
    let (mut rp, mut rm) = (vec![0.0; n], vec![0.0; n]);
    for i in 0..n {
        xp[i] = x[i] + d;
        p.residual(&xp, &mut rp);
        xp[i] = x[i] - d;
        p.residual(&xp, &mut rm);
        xp[i] = x[i];
        // column i of J == row i by symmetry
        let mut dense = vec![0.0; n];
        for (j, v) in jac.row(i) {
            dense[j] = v;
        }
        for j in 0..n {
            let fd = (rp[j] - rm[j]) / (2.0 * d);
            jac_err = jac_err.max((fd - dense[j]).abs() / jscale);
        }
    }
    (grad_err, jac_err)
}

/// Factor, solve and verify: the returned solution satisfies
/// ‖b − Ax‖ ≤ 1e-10·‖b‖ or the call fails.
pub fn direct_solve(a: &Csr, b: &[f64]) -> Result<Vec<f64>, LinearError> {
    let solver = DirectSolver::factor(a)?;
    let (x, _) = solver.solve_refined(a, b, 1e-10)?;
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::Coo;

    /// Separable strictly convex test problem: Σᵢ cosh(xᵢ − cᵢ), minimized at c.
    struct CoshWell {
        c: Vec<f64>,
    }

    impl NonlinearProblem for CoshWell {
        fn dim(&self) -> usize {
            self.c.len()
        }
        fn energy(&self, x: &[f64]) -> f64 {
            x.iter().zip(&self.c).map(|(&x, &c)| (x - c).cosh()).sum()
        }
        fn residual(&self, x: &[f64], out: &mut [f64]) {
            for i in 0..x.len() {
                out[i] = (x[i] - self.c[i]).sinh();
            }
        }
        fn jacobian(&self, x: &[f64]) -> Csr {
            let mut coo = Coo::new(x.len());
            for i in 0..x.len() {
                coo.push(i, i, (x[i] - self.c[i]).cosh());
            }
            coo.to_csr()
        }
    }

    #[test]
    fn newton_converges_superlinearly_with_monotone_energy() {
        let p = CoshWell { c: vec![0.3, -1.2, 2.0, 0.0, 5.0] };
        let res = newton(&p, vec![0.0; 5], &NewtonConfig::default()).unwrap();
        assert!(res.trace.converged);
        for (x, c) in res.x.iter().zip(&p.c) {
            assert!((x - c).abs() <= 1e-10);
        }
        let rows = &res.trace.rows;
        for w in rows.windows(2) {
            assert!(w[1].energy <= w[0].energy + 1e-12, "energy must not increase");
        }
        // Superlinear tail: log-residual gaps grow once the residual is small.
        let logs: Vec<f64> = rows.iter().map(|r| r.residual.max(1e-300).ln()).collect();
        let tail: Vec<f64> = logs.windows(2).map(|w| w[0] - w[1]).collect();
        assert!(tail.last().unwrap() > &1.0);
    }

    #[test]
    fn newton_is_one_step_on_quadratics() {
        struct Quad;
        impl NonlinearProblem for Quad {
            fn dim(&self) -> usize {
                2
            }
            fn energy(&self, x: &[f64]) -> f64 {
                x[0] * x[0] + 0.5 * x[1] * x[1] - x[0] - x[1]
            }
            fn residual(&self, x: &[f64], out: &mut [f64]) {
                out[0] = 2.0 * x[0] - 1.0;
                out[1] = x[1] - 1.0;
            }
            fn jacobian(&self, _x: &[f64]) -> Csr {
                let mut coo = Coo::new(2);
                coo.push(0, 0, 2.0);
                coo.push(1, 1, 1.0);
                coo.to_csr()
            }
        }
        let res = newton(&Quad, vec![10.0, -7.0], &NewtonConfig::default()).unwrap();
        assert!(res.trace.converged);
        assert_eq!(res.trace.iterations(), 1);
        assert!((res.x[0] - 0.5).abs() < 1e-14 && (res.x[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn newton_reports_non_convergence_with_trace() {
        let p = CoshWell { c: vec![30.0] };
        let cfg = NewtonConfig { max_iters: 2, ..Default::default() };
        match newton(&p, vec![0.0], &cfg) {
            Err(SolveError::NonConvergence { result, iters, .. }) => {
                assert_eq!(iters, 2);
                assert_eq!(result.trace.rows.len(), 3); // initial + 2 iterations
                assert!(!result.trace.converged);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn cg_matches_direct_solve() {
        let n = 40;
        let mut coo = Coo::new(n);
        for i in 0..n {
            coo.push(i, i, 4.0 + (i as f64 % 3.0));
            if i + 1 < n {
                coo.push_sym(i, i + 1, -1.0);
            }
        }
        let a = coo.to_csr();
        let b: Vec<f64> = (0..n).map(|i| ((i * i) as f64).cos()).collect();
        let exact = direct_solve(&a, &b).unwrap();
        let out = cg_solve(&a, &b, None, 1e-12, 10 * n, None);
        assert!(out.converged);
        for i in 0..n {
            assert!((out.x[i] - exact[i]).abs() <= 1e-8 * (1.0 + exact[i].abs()));
        }
        // Jacobi preconditioning should not hurt on a scaled system.
        let diag = a.diag();
        let pre = cg_solve(&a, &b, None, 1e-12, 10 * n, Some(&diag));
        assert!(pre.converged);
        assert!(pre.iters <= out.iters + 2);
    }

    #[test]
    fn cg_flags_indefinite_matrices() {
        let mut coo = Coo::new(2);
        coo.push(0, 0, 1.0);
        coo.push(1, 1, -1.0);
        let a = coo.to_csr();
        let out = cg_solve(&a, &[0.0, 1.0], None, 1e-12, 20, None);
        assert!(out.curvature_failure);
        assert!(!out.converged);
    }

    #[test]
    fn direct_solve_handles_small_saddle_system() {
        // [[1, 1], [1, 0]] x = (2, 1) → x = (1, 1); indefinite but factorable.
        let mut coo = Coo::new(2);
        coo.push(0, 0, 1.0);
        coo.push_sym(0, 1, 1.0);
        let a = coo.to_csr();
        let x = direct_solve(&a, &[2.0, 1.0]).unwrap();
        assert!((x[0] - 1.0).abs() <= 1e-12 && (x[1] - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn trace_csv_format() {
        let trace = SolveTrace {
            rows: vec![
                TraceRow { iter: 0, residual: 1.0, energy: 2.0, step: 0.0, linear_iters: 0 },
                TraceRow { iter: 1, residual: 0.5, energy: 1.0, step: 1.0, linear_iters: 3 },
            ],
            converged: true,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        trace.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "iter,residual,energy,step,linear_iters\n0,1e0,2e0,0e0,0\n1,5e-1,1e0,1e0,3\n");
    }
}
