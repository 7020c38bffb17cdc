//! Assembly of the mesh-level discrete operators that do not depend on the
//! field state: the curl-curl matrix, the edge mass matrix, the source
//! functional, the vertex-edge constraint matrix, and the signed incidence
//! (discrete gradient) operator.

use super::basis::ElementGeom;
use super::quadrature::TRI_3;
use super::{DofMap, Problem, SpaceKind};
use crate::mesh::Mesh2D;
use crate::sparse::{Coo, Csr};

/// K[e,g] = ∫ (curl W_e)(curl W_g): the curl-curl operator on the edge space.
pub fn curl_curl(mesh: &Mesh2D) -> Csr {
    let mut coo = Coo::new(mesh.n_edges());
    for t in 0..mesh.n_triangles() {
        let geom = ElementGeom::new(mesh, t);
        let curls: Vec<f64> = (0..3).map(|k| geom.edge_curl(k)).collect();
        for k in 0..3 {
            for l in k..3 {
                let v = geom.area * curls[k] * curls[l];
                let (e, g) = (geom.edges[k].id, geom.edges[l].id);
                coo.push_sym(e, g, v);
            }
        }
    }
    coo.to_csr()
}

/// f_e = ∫ j · curl W_e with piecewise-constant j.
pub fn curl_rhs(problem: &Problem) -> Vec<f64> {
    let mesh = &problem.mesh;
    let mut f = vec![0.0; mesh.n_edges()];
    for t in 0..mesh.n_triangles() {
        let j = problem.current(t);
        if j == 0.0 {
            continue;
        }
        let geom = ElementGeom::new(mesh, t);
        for k in 0..3 {
            f[geom.edges[k].id] += j * geom.area * geom.edge_curl(k);
        }
    }
    f
}

/// M[e,g] = ∫ W_e · W_g, the unweighted edge mass matrix. The degree-2 rule
/// integrates the quadratic entries exactly.
pub fn edge_mass(mesh: &Mesh2D) -> Csr {
    let mut coo = Coo::new(mesh.n_edges());
    for t in 0..mesh.n_triangles() {
        let geom = ElementGeom::new(mesh, t);
        for k in 0..3 {
            for l in k..3 {
                let mut v = 0.0;
                for &(l0, l1, l2, w) in TRI_3 {
                    let wk = geom.edge_basis(k, (l0, l1, l2));
                    let wl = geom.edge_basis(l, (l0, l1, l2));
                    v += 2.0 * geom.area * w * wk.dot(wl);
                }
                coo.push_sym(geom.edges[k].id, geom.edges[l].id, v);
            }
        }
    }
    coo.to_csr()
}

/// G[v,e] = ∫ W_e · ∇φ_v over the free vertices of `map` — the rows that
/// express L²-orthogonality of an edge field to discrete gradients.
pub fn grad_constraint(mesh: &Mesh2D, map: &DofMap) -> Csr {
    assert_eq!(map.kind(), SpaceKind::NodalPinned);
    let mut coo = Coo::rect(map.len(), mesh.n_edges());
    for t in 0..mesh.n_triangles() {
        let geom = ElementGeom::new(mesh, t);
        let tri = mesh.triangle(t);
        for vloc in 0..3 {
            let Some(row) = map.dof(tri[vloc]) else { continue };
            for k in 0..3 {
                let mut v = 0.0;
                for &(l0, l1, l2, w) in TRI_3 {
                    let wk = geom.edge_basis(k, (l0, l1, l2));
                    v += 2.0 * geom.area * w * wk.dot(geom.grad[vloc]);
                }
                coo.push(row, geom.edges[k].id, v);
            }
        }
    }
    coo.to_csr()
}

/// Discrete gradient: (Dψ)_e = ψ_hi − ψ_lo for edge e = (lo, hi). Its range
/// is exactly the curl-free subspace of the edge space.
pub fn apply_incidence(mesh: &Mesh2D, psi: &[f64]) -> Vec<f64> {
    assert_eq!(psi.len(), mesh.n_vertices());
    (0..mesh.n_edges())
        .map(|e| {
            let (lo, hi) = mesh.edge(e);
            psi[hi] - psi[lo]
        })
        .collect()
}

/// Transpose of the discrete gradient: (Dᵀy)_v = Σ_{e: hi=v} y_e − Σ_{e: lo=v} y_e.
pub fn apply_incidence_t(mesh: &Mesh2D, y: &[f64]) -> Vec<f64> {
    assert_eq!(y.len(), mesh.n_edges());
    let mut out = vec![0.0; mesh.n_vertices()];
    for e in 0..mesh.n_edges() {
        let (lo, hi) = mesh.edge(e);
        out[hi] += y[e];
        out[lo] -= y[e];
    }
    out
}

/// S = base + w·GᵀG with w a power of two chosen so the augmentation matches
/// the diagonal scale of `base`. Returns (S, w).
pub fn augment_with_constraint(base: &Csr, g: &Csr) -> (Csr, f64) {
    assert_eq!(base.n(), g.ncols());
    let n = base.n();
    let mut gtg_diag = vec![0.0f64; n];
    for v in 0..g.nrows() {
        for (e, a) in g.row(v) {
            gtg_diag[e] += a * a;
        }
    }
    let max_base = base.diag().iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    let max_gtg = gtg_diag.iter().fold(0.0f64, |m, &v| m.max(v));
    let w = if max_gtg > 0.0 && max_base > 0.0 {
        (max_base / max_gtg).log2().round().exp2()
    } else {
        1.0
    };

    let mut coo = Coo::new(n);
    for i in 0..n {
        for (j, v) in base.row(i) {
            coo.push(i, j, v);
        }
    }
    for v in 0..g.nrows() {
        let row: Vec<(usize, f64)> = g.row(v).collect();
        for &(e, a) in &row {
            for &(h, b) in &row {
                coo.push(e, h, w * a * b);
            }
        }
    }
    (coo.to_csr(), w)
}
