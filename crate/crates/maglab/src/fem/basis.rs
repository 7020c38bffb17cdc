//! Per-element geometry and the two element bases: continuous piecewise-linear
//! (P1, one function per vertex) and lowest-order edge elements (one per edge).
//!
//! The edge function attached to the global edge (v_lo, v_hi), v_lo < v_hi, is
//! W = λ_lo ∇λ_hi − λ_hi ∇λ_lo. Its tangential moment is +1 along its own
//! edge traversed lo → hi and 0 along every other edge, so no per-element sign
//! flips are needed anywhere in assembly.

use crate::material::Vec2;
use crate::mesh::Mesh2D;

/// Local view of one local edge: its global id and which local vertices are
/// the globally lower/higher endpoints.
#[derive(Debug, Clone, Copy)]
pub struct LocalEdge {
    pub id: usize,
    pub lo: usize,
    pub hi: usize,
}

/// Constant per-element geometry: vertex positions, barycentric gradients and
/// area, plus the local ↔ global edge correspondence.
#[derive(Debug, Clone, Copy)]
pub struct ElementGeom {
    pub p: [Vec2; 3],
    pub grad: [Vec2; 3],
    pub area: f64,
    pub edges: [LocalEdge; 3],
}

impl ElementGeom {
    pub fn new(mesh: &Mesh2D, t: usize) -> Self {
        let tri = mesh.triangle(t);
        let p = [mesh.vertex(tri[0]), mesh.vertex(tri[1]), mesh.vertex(tri[2])];
        let two_a = (p[1] - p[0]).cross(p[2] - p[0]);
        debug_assert!(two_a > 0.0);
        let rot90 = |v: Vec2| Vec2::new(-v.y, v.x);
        let grad = [
            rot90(p[2] - p[1]).scale(1.0 / two_a),
            rot90(p[0] - p[2]).scale(1.0 / two_a),
            rot90(p[1] - p[0]).scale(1.0 / two_a),
        ];
        let ids = mesh.tri_edges(t);
        let mut edges = [LocalEdge { id: 0, lo: 0, hi: 0 }; 3];
        for k in 0..3 {
            let (a, b) = (k, (k + 1) % 3); // local traversal v_a → v_b
            let (lo, hi) = if tri[a] < tri[b] { (a, b) } else { (b, a) };
            edges[k] = LocalEdge { id: ids[k], lo, hi };
        }
        ElementGeom { p, grad, area: 0.5 * two_a, edges }
    }

    pub fn point_at(&self, bary: (f64, f64, f64)) -> Vec2 {
        Vec2::new(
            bary.0 * self.p[0].x + bary.1 * self.p[1].x + bary.2 * self.p[2].x,
            bary.0 * self.p[0].y + bary.1 * self.p[1].y + bary.2 * self.p[2].y,
        )
    }

    /// Edge function of local edge `k` at a barycentric point.
    pub fn edge_basis(&self, k: usize, bary: (f64, f64, f64)) -> Vec2 {
        let LocalEdge { lo, hi, .. } = self.edges[k];
        let l = [bary.0, bary.1, bary.2];
        self.grad[hi].scale(l[lo]) - self.grad[lo].scale(l[hi])
    }

    /// Scalar curl of the edge function of local edge `k` (constant).
    pub fn edge_curl(&self, k: usize) -> f64 {
        let LocalEdge { lo, hi, .. } = self.edges[k];
        2.0 * self.grad[lo].cross(self.grad[hi])
    }

    /// Evaluate an edge-coefficient field (global coefficient vector).
    pub fn edge_field(&self, coeffs: &[f64], bary: (f64, f64, f64)) -> Vec2 {
        let mut h = Vec2::ZERO;
        for k in 0..3 {
            h = h + self.edge_basis(k, bary).scale(coeffs[self.edges[k].id]);
        }
        h
    }

    /// Scalar curl of an edge-coefficient field on this element (constant).
    pub fn edge_field_curl(&self, coeffs: &[f64]) -> f64 {
        (0..3).map(|k| coeffs[self.edges[k].id] * self.edge_curl(k)).sum()
    }

    /// Gradient of a vertex-coefficient P1 field (constant).
    pub fn p1_gradient(&self, mesh: &Mesh2D, t: usize, values: &[f64]) -> Vec2 {
        let tri = mesh.triangle(t);
        let mut g = Vec2::ZERO;
        for k in 0..3 {
            g = g + self.grad[k].scale(values[tri[k]]);
        }
        g
    }

    /// In-plane curl of an out-of-plane P1 field a₃: (∂_y a, −∂_x a), constant.
    pub fn p1_curl(&self, mesh: &Mesh2D, t: usize, values: &[f64]) -> Vec2 {
        let g = self.p1_gradient(mesh, t, values);
        Vec2::new(g.y, -g.x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::quadrature::TRI_3;
    use crate::mesh::{GeometrySpec, Rect, Region};

    fn unit_square_mesh() -> Mesh2D {
        Mesh2D::generate(&GeometrySpec {
            bbox: Rect::new(0.0, 0.0, 1.0, 1.0),
            regions: vec![Region {
                name: "all".into(),
                tag: 0,
                rect: Rect::new(0.0, 0.0, 1.0, 1.0),
                mesh_size: 1.0,
            }],
        })
        .unwrap()
    }

    /// 5-point Gauss–Legendre on [0, 1].
    const GAUSS_5: [(f64, f64); 5] = [
        (0.5, 0.28444444444444444),
        (0.7692346550528415, 0.23931433524968324),
        (0.23076534494715845, 0.23931433524968324),
        (0.953089922969332, 0.11846344252809454),
        (0.04691007703066802, 0.11846344252809454),
    ];

    #[test]
    fn tangential_edge_moments_are_kronecker() {
        let mesh = unit_square_mesh();
        for t in 0..mesh.n_triangles() {
            let geom = ElementGeom::new(&mesh, t);
            let tri = mesh.triangle(t);
            for k in 0..3 {
                // Integrate W_k · t̂ along each local edge m, traversed from the
                // globally lower to the globally higher endpoint.
                for m in 0..3 {
                    let LocalEdge { lo, hi, .. } = geom.edges[m];
                    let (a, b) = (geom.p[lo], geom.p[hi]);
                    let tangent = b - a;
                    let mut moment = 0.0;
                    for (s, w) in GAUSS_5 {
                        // barycentric point on the segment lo→hi
                        let mut l = [0.0; 3];
                        l[lo] = 1.0 - s;
                        l[hi] = s;
                        let wk = geom.edge_basis(k, (l[0], l[1], l[2]));
                        moment += w * wk.dot(tangent);
                    }
                    let expect = if m == k { 1.0 } else { 0.0 };
                    assert!(
                        (moment - expect).abs() <= 1e-13,
                        "t={t} tri={tri:?} basis {k} on edge {m}: {moment}"
                    );
                }
            }
        }
    }

    #[test]
    fn curl_integrates_to_signed_unity() {
        let mesh = unit_square_mesh();
        for t in 0..mesh.n_triangles() {
            let geom = ElementGeom::new(&mesh, t);
            let signs = mesh.tri_edge_signs(t);
            for k in 0..3 {
                let integral = geom.area * geom.edge_curl(k);
                assert!(
                    (integral - signs[k] as f64).abs() <= 1e-13,
                    "t={t} edge {k}: ∫curl = {integral}, sign {}",
                    signs[k]
                );
            }
        }
    }

    #[test]
    fn gradient_inclusion_identity() {
        // ∇φ_v = Σ_e ±W_e pointwise: + where v is the higher endpoint,
        // − where it is the lower.
        let mesh = unit_square_mesh();
        for t in 0..mesh.n_triangles() {
            let geom = ElementGeom::new(&mesh, t);
            for v in 0..3 {
                for &(l0, l1, l2, _) in TRI_3 {
                    let mut s = Vec2::ZERO;
                    for k in 0..3 {
                        let LocalEdge { lo, hi, .. } = geom.edges[k];
                        if hi == v {
                            s = s + geom.edge_basis(k, (l0, l1, l2));
                        } else if lo == v {
                            s = s - geom.edge_basis(k, (l0, l1, l2));
                        }
                    }
                    assert!((s - geom.grad[v]).norm() <= 1e-13);
                }
            }
        }
    }

    #[test]
    fn diagonal_edge_mass_is_one_third() {
        // On the two-triangle unit square, ∫ |W_diag|² = 1/3 (hand value).
        let mesh = unit_square_mesh();
        let diag = (0..mesh.n_edges()).find(|&e| !mesh.is_boundary_edge(e)).unwrap();
        assert_eq!(mesh.edge(diag), (0, 3));
        let mut mass = 0.0;
        for t in 0..mesh.n_triangles() {
            let geom = ElementGeom::new(&mesh, t);
            for k in 0..3 {
                if geom.edges[k].id == diag {
                    for &(l0, l1, l2, w) in TRI_3 {
                        let wk = geom.edge_basis(k, (l0, l1, l2));
                        mass += 2.0 * geom.area * w * wk.dot(wk);
                    }
                }
            }
        }
        assert!((mass - 1.0 / 3.0).abs() <= 1e-14, "got {mass}");
    }

    #[test]
    fn p1_curl_is_perp_gradient() {
        let mesh = unit_square_mesh();
        let vals: Vec<f64> = (0..mesh.n_vertices()).map(|v| (v as f64) * 0.7 - 1.0).collect();
        for t in 0..mesh.n_triangles() {
            let geom = ElementGeom::new(&mesh, t);
            let g = geom.p1_gradient(&mesh, t, &vals);
            let c = geom.p1_curl(&mesh, t, &vals);
            assert!((c.dot(g)).abs() <= 1e-13 * g.norm() * g.norm().max(1.0));
            assert!((c.norm() - g.norm()).abs() <= 1e-13);
        }
    }

    #[test]
    fn point_at_maps_vertices() {
        let mesh = unit_square_mesh();
        let geom = ElementGeom::new(&mesh, 0);
        assert!((geom.point_at((1.0, 0.0, 0.0)) - geom.p[0]).norm() == 0.0);
        let mid = geom.point_at((0.5, 0.5, 0.0));
        assert!((mid - (geom.p[0] + geom.p[1]).scale(0.5)).norm() <= 1e-15);
    }
}
