//! Evaluation of solved fields and the solution-quality metrics: L² norms and
//! errors between formulations, the strong curl residual, the weak-divergence
//! residual, and the penalty multiplier reconstruction.

use super::basis::ElementGeom;
use super::quadrature::{QuadRule, TRI_3, TRI_7};
use super::{DofMap, FieldRep, FieldSolution, Problem, SpaceKind};
use crate::material::Vec2;

/// h at a barycentric point of triangle `t`, whatever the representation.
pub fn h_at(
    problem: &Problem,
    sol: &FieldSolution,
    geom: &ElementGeom,
    t: usize,
    bary: (f64, f64, f64),
) -> Vec2 {
    match &sol.rep {
        FieldRep::Edge(coeffs) => geom.edge_field(coeffs, bary),
        FieldRep::ScalarPotential(psi) => {
            let hs = problem.source.eval(geom.point_at(bary));
            hs - geom.p1_gradient(&problem.mesh, t, psi)
        }
        FieldRep::VectorPotential(a) => {
            let b = geom.p1_curl(&problem.mesh, t, a);
            problem.law(t).field_from_flux(b).expect("finite flux state")
        }
    }
}

/// b at a barycentric point of triangle `t`. For vector-potential solutions
/// this is curl a directly; otherwise the material law maps h.
pub fn b_at(
    problem: &Problem,
    sol: &FieldSolution,
    geom: &ElementGeom,
    t: usize,
    bary: (f64, f64, f64),
) -> Vec2 {
    match &sol.rep {
        FieldRep::VectorPotential(a) => geom.p1_curl(&problem.mesh, t, a),
        _ => problem.law(t).flux_from_field(h_at(problem, sol, geom, t, bary)),
    }
}

fn integrate_sq<F: FnMut(&ElementGeom, usize, (f64, f64, f64)) -> Vec2>(
    problem: &Problem,
    rule: QuadRule,
    mut f: F,
) -> f64 {
    let mesh = &problem.mesh;
    let mut acc = 0.0;
    for t in 0..mesh.n_triangles() {
        let geom = ElementGeom::new(mesh, t);
        for &(l0, l1, l2, w) in rule {
            let v = f(&geom, t, (l0, l1, l2));
            acc += 2.0 * geom.area * w * v.dot(v);
        }
    }
    acc.sqrt()
}

/// ‖h‖_L² with the degree-5 rule (representations are not polynomial in
/// general, so this is a metric, not an exact integral).
pub fn l2_norm_h(problem: &Problem, sol: &FieldSolution) -> f64 {
    integrate_sq(problem, TRI_7, |geom, t, bary| h_at(problem, sol, geom, t, bary))
}

pub fn l2_error_h(problem: &Problem, a: &FieldSolution, b: &FieldSolution) -> f64 {
    integrate_sq(problem, TRI_7, |geom, t, bary| {
        h_at(problem, a, geom, t, bary) - h_at(problem, b, geom, t, bary)
    })
}

pub fn l2_norm_b(problem: &Problem, sol: &FieldSolution) -> f64 {
    integrate_sq(problem, TRI_7, |geom, t, bary| b_at(problem, sol, geom, t, bary))
}

pub fn l2_error_b(problem: &Problem, a: &FieldSolution, b: &FieldSolution) -> f64 {
    integrate_sq(problem, TRI_7, |geom, t, bary| {
        b_at(problem, a, geom, t, bary) - b_at(problem, b, geom, t, bary)
    })
}

/// ‖curl h − j‖_L² for an edge-represented field; curl is constant per
/// element, so this sum is exact.
pub fn curl_residual_norm(problem: &Problem, h_edge: &[f64]) -> f64 {
    let mesh = &problem.mesh;
    let mut acc = 0.0;
    for t in 0..mesh.n_triangles() {
        let geom = ElementGeom::new(mesh, t);
        let r = geom.edge_field_curl(h_edge) - problem.current(t);
        acc += geom.area * r * r;
    }
    acc.sqrt()
}

/// L² norm of the (piecewise-constant) curl of an edge field.
pub fn curl_l2_norm(problem: &Problem, h_edge: &[f64]) -> f64 {
    let mesh = &problem.mesh;
    let mut acc = 0.0;
    for t in 0..mesh.n_triangles() {
        let geom = ElementGeom::new(mesh, t);
        let c = geom.edge_field_curl(h_edge);
        acc += geom.area * c * c;
    }
    acc.sqrt()
}

/// Per-element multiplier of the regularized problem: the piecewise-constant
/// field a with curl h + ε·a = j, i.e. a = (j − curl h)/ε.
pub fn reconstruct_multiplier(problem: &Problem, h_edge: &[f64], eps: f64) -> Vec<f64> {
    let mesh = &problem.mesh;
    (0..mesh.n_triangles())
        .map(|t| {
            let geom = ElementGeom::new(mesh, t);
            (problem.current(t) - geom.edge_field_curl(h_edge)) / eps
        })
        .collect()
}

/// L² norm of a piecewise-constant cell field.
pub fn cell_l2_norm(problem: &Problem, cells: &[f64]) -> f64 {
    let mesh = &problem.mesh;
    assert_eq!(cells.len(), mesh.n_triangles());
    (0..mesh.n_triangles()).map(|t| mesh.area(t) * cells[t] * cells[t]).sum::<f64>().sqrt()
}

/// Normalized weak-divergence residual of the flux:
/// ‖⟨b, ∇φ_v⟩_v‖₂ / ‖Σ |b||∇φ_v|‖₂ over the free vertices of the pinned
/// nodal space. Uses the same quadrature as the solvers, so for potential
/// formulations this is exactly the converged Newton residual rescaled.
pub fn weak_divergence(problem: &Problem, sol: &FieldSolution) -> f64 {
    let mesh = &problem.mesh;
    let map = DofMap::new(mesh, SpaceKind::NodalPinned);
    let mut r = vec![0.0; map.len()];
    let mut scale = vec![0.0; map.len()];
    for t in 0..mesh.n_triangles() {
        let geom = ElementGeom::new(mesh, t);
        let tri = mesh.triangle(t);
        for &(l0, l1, l2, w) in TRI_3 {
            let b = b_at(problem, sol, &geom, t, (l0, l1, l2));
            for vloc in 0..3 {
                if let Some(dof) = map.dof(tri[vloc]) {
                    let g = geom.grad[vloc];
                    r[dof] += 2.0 * geom.area * w * b.dot(g);
                    scale[dof] += 2.0 * geom.area * w * b.norm() * g.norm();
                }
            }
        }
    }
    let rn = crate::sparse::norm2(&r);
    let sn = crate::sparse::norm2(&scale);
    if sn > 0.0 {
        rn / sn
    } else {
        rn
    }
}

/// Total stored coenergy ∫ w̃*(|h|), with the solver quadrature.
pub fn coenergy_total(problem: &Problem, sol: &FieldSolution) -> f64 {
    let mesh = &problem.mesh;
    let mut acc = 0.0;
    for t in 0..mesh.n_triangles() {
        let geom = ElementGeom::new(mesh, t);
        let law = problem.law(t);
        for &(l0, l1, l2, w) in TRI_3 {
            let h = h_at(problem, sol, &geom, t, (l0, l1, l2));
            acc += 2.0 * geom.area * w * law.coenergy(h.norm()).unwrap_or(f64::NAN);
        }
    }
    acc
}

/// Centroid values per cell for export: h, b, curl h − j (edge reps only,
/// zero otherwise), and the region tag.
pub struct CellFields {
    pub h: Vec<Vec2>,
    pub b: Vec<Vec2>,
    pub curl_minus_j: Vec<f64>,
    pub region: Vec<f64>,
}

pub fn cell_fields(problem: &Problem, sol: &FieldSolution) -> CellFields {
    let mesh = &problem.mesh;
    let nt = mesh.n_triangles();
    let center = (1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0);
    let mut out = CellFields {
        h: Vec::with_capacity(nt),
        b: Vec::with_capacity(nt),
        curl_minus_j: Vec::with_capacity(nt),
        region: Vec::with_capacity(nt),
    };
    for t in 0..nt {
        let geom = ElementGeom::new(mesh, t);
        out.h.push(h_at(problem, sol, &geom, t, center));
        out.b.push(b_at(problem, sol, &geom, t, center));
        let cr = match &sol.rep {
            FieldRep::Edge(coeffs) => geom.edge_field_curl(coeffs) - problem.current(t),
            _ => 0.0,
        };
        out.curl_minus_j.push(cr);
        out.region.push(mesh.tag(t) as f64);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::assemble::tests::uniform_problem;
    use crate::fem::Formulation;
    use crate::solve::SolveTrace;

    fn edge_solution(problem: &Problem, coeffs: Vec<f64>) -> FieldSolution {
        assert_eq!(coeffs.len(), problem.mesh.n_edges());
        FieldSolution {
            formulation: Formulation::Limit,
            rep: FieldRep::Edge(coeffs),
            trace: SolveTrace::default(),
            epsilon: None,
        }
    }

    #[test]
    fn norm_of_uniform_field_on_unit_square() {
        // h = (0, 1): edge coefficient = ∫ h·t along lo→hi = Δy of the edge.
        let p = uniform_problem(4, 0.0);
        let mesh = &p.mesh;
        let coeffs: Vec<f64> = (0..mesh.n_edges())
            .map(|e| {
                let (lo, hi) = mesh.edge(e);
                mesh.vertex(hi).y - mesh.vertex(lo).y
            })
            .collect();
        let sol = edge_solution(&p, coeffs);
        // Interpolating a constant field is exact for edge elements.
        assert!((l2_norm_h(&p, &sol) - 1.0).abs() <= 1e-12);
        let geom = ElementGeom::new(mesh, 3);
        let h = h_at(&p, &sol, &geom, 3, (0.4, 0.3, 0.3));
        assert!((h - Vec2::new(0.0, 1.0)).norm() <= 1e-12);
        // Constant fields are curl-free: ‖curl h − 0‖ = 0.
        let sol_curl = curl_residual_norm(&p, match &sol.rep {
            FieldRep::Edge(c) => c,
            _ => unreachable!(),
        });
        assert!(sol_curl <= 1e-12);
    }

    #[test]
    fn multiplier_norm_identity() {
        let p = uniform_problem(3, 2.0);
        let mesh = &p.mesh;
        let coeffs: Vec<f64> = (0..mesh.n_edges()).map(|e| (e as f64 * 0.37).sin()).collect();
        let eps = 1e-4;
        let a = reconstruct_multiplier(&p, &coeffs, eps);
        // ‖curl h − j‖ computed independently must equal ε·‖a‖.
        let lhs = curl_residual_norm(&p, &coeffs);
        let rhs = eps * cell_l2_norm(&p, &a);
        assert!((lhs - rhs).abs() <= 1e-12 * lhs.max(rhs));
    }

    #[test]
    fn weak_divergence_flags_divergent_fields() {
        let p = uniform_problem(4, 0.0);
        let mesh = &p.mesh;
        // Radial-ish field h = (x, y): strongly divergent.
        let coeffs: Vec<f64> = (0..mesh.n_edges())
            .map(|e| {
                let (lo, hi) = mesh.edge(e);
                let (a, b) = (mesh.vertex(lo), mesh.vertex(hi));
                // edge moment of (x, y) along the segment = ½(|b|² − |a|²)
                0.5 * (b.dot(b) - a.dot(a))
            })
            .collect();
        let sol = edge_solution(&p, coeffs);
        assert!(weak_divergence(&p, &sol) > 0.1);

        // A uniform field has zero weak divergence against interior bumps but
        // boundary vertices see the flux: still small is not expected; use a
        // gradient-free check instead: h = (0,1) on the *free* rows of a
        // pinned map is not divergence-free discretely, so just verify the
        // metric is finite and smaller than the divergent case.
        let uniform: Vec<f64> = (0..mesh.n_edges())
            .map(|e| {
                let (lo, hi) = mesh.edge(e);
                mesh.vertex(hi).y - mesh.vertex(lo).y
            })
            .collect();
        let sol_u = edge_solution(&p, uniform);
        assert!(weak_divergence(&p, &sol_u) < weak_divergence(&p, &sol));
    }

    #[test]
    fn coenergy_total_of_uniform_field() {
        let p = uniform_problem(2, 0.0);
        let mesh = &p.mesh;
        let coeffs: Vec<f64> = (0..mesh.n_edges())
            .map(|e| {
                let (lo, hi) = mesh.edge(e);
                mesh.vertex(hi).y - mesh.vertex(lo).y
            })
            .collect();
        let sol = edge_solution(&p, coeffs.iter().map(|v| v * 100.0).collect());
        let law = crate::material::MaterialLaw::default_nonlinear();
        let expect = law.coenergy(100.0).unwrap(); // area 1 × uniform density
        let got = coenergy_total(&p, &sol);
        assert!((got - expect).abs() <= 1e-10 * expect);
        let _ = coeffs;
    }
}
