//! Finite-element layer: function spaces and DOF maps over [`Mesh2D`],
//! element quadrature and bases, assembly of the discrete operators, field
//! evaluation, and the per-formulation nonlinear problems.
//!
//! Two spaces are in play. The field space is lowest-order edge elements,
//! one DOF per mesh edge, oriented low-index → high-index vertex. Potentials
//! live in continuous piecewise-linears, one DOF per vertex, with either one
//! pinned vertex (scalar potentials, fixed to remove the constant) or the
//! whole boundary removed (the out-of-plane vector potential).

pub mod assemble;
pub mod basis;
pub mod eval;
pub mod problems;
pub mod quadrature;
pub mod source;

use crate::io::{CaseSetup, SolverSettings};
use crate::material::MaterialLaw;
use crate::mesh::{GeometrySpec, Mesh2D, MeshError};
use crate::solve::SolveTrace;
use source::SourceSpec;
use std::collections::BTreeMap;
use std::sync::Arc;

/// Which discrete problem is being solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Formulation {
    /// Regularized field formulation: minimize ∫w*(h) + ‖curl h − j‖²/(2ε)
    /// over the full edge space.
    Penalty,
    /// Reduced scalar potential: h = h_s − ∇ψ with an analytic source field.
    Scalar,
    /// Out-of-plane vector potential: b = curl a, a = 0 on the boundary.
    Vector,
    /// The ε → 0 limit: constrained curl projection, then a potential solve.
    Limit,
}

impl std::fmt::Display for Formulation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Formulation::Penalty => "penalty",
            Formulation::Scalar => "scalar",
            Formulation::Vector => "vector",
            Formulation::Limit => "limit",
        };
        write!(f, "{s}")
    }
}

/// The unknown-numbering kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpaceKind {
    /// One DOF per edge (tangential moment along lo → hi).
    Edge,
    /// One DOF per vertex.
    Nodal,
    /// One DOF per vertex except the pinned one (lowest-index boundary
    /// vertex), which is fixed to zero.
    NodalPinned,
    /// One DOF per interior vertex; the whole boundary is fixed to zero.
    NodalInterior,
}

/// Maps mesh entities (edges or vertices) to contiguous unknown indices.
#[derive(Debug, Clone)]
pub struct DofMap {
    kind: SpaceKind,
    to_dof: Vec<Option<usize>>,
    to_entity: Vec<usize>,
}

impl DofMap {
    pub fn new(mesh: &Mesh2D, kind: SpaceKind) -> Self {
        let keep: Vec<bool> = match kind {
            SpaceKind::Edge => vec![true; mesh.n_edges()],
            SpaceKind::Nodal => vec![true; mesh.n_vertices()],
            SpaceKind::NodalPinned => {
                let pin = mesh.pinned_vertex();
                (0..mesh.n_vertices()).map(|v| v != pin).collect()
            }
            SpaceKind::NodalInterior => {
                (0..mesh.n_vertices()).map(|v| !mesh.is_boundary_vertex(v)).collect()
            }
        };
        let mut to_dof = Vec::with_capacity(keep.len());
        let mut to_entity = Vec::new();
        for (ent, &k) in keep.iter().enumerate() {
            if k {
                to_dof.push(Some(to_entity.len()));
                to_entity.push(ent);
            } else {
                to_dof.push(None);
            }
        }
        DofMap { kind, to_dof, to_entity }
    }

    pub fn kind(&self) -> SpaceKind {
        self.kind
    }

    /// Number of unknowns.
    pub fn len(&self) -> usize {
        self.to_entity.len()
    }

    pub fn is_empty(&self) -> bool {
        self.to_entity.is_empty()
    }

    /// Unknown index of an entity, `None` if it is constrained.
    pub fn dof(&self, entity: usize) -> Option<usize> {
        self.to_dof[entity]
    }

    pub fn entity(&self, dof: usize) -> usize {
        self.to_entity[dof]
    }

    /// Expand unknowns to an all-entity vector, zeros on constrained entities.
    pub fn scatter(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.len());
        let mut full = vec![0.0; self.to_dof.len()];
        for (d, &ent) in self.to_entity.iter().enumerate() {
            full[ent] = x[d];
        }
        full
    }
}

/// A ready-to-solve case: mesh, material per region tag, source current per
/// region tag, and solver settings.
#[derive(Debug, Clone)]
pub struct Problem {
    pub mesh: Arc<Mesh2D>,
    pub geometry: GeometrySpec,
    pub materials: BTreeMap<u32, MaterialLaw>,
    pub currents: BTreeMap<u32, f64>,
    pub settings: SolverSettings,
    pub source: SourceSpec,
}

impl Problem {
    pub fn from_setup(setup: &CaseSetup) -> Result<Self, MeshError> {
        let mesh = Mesh2D::generate(&setup.geometry)?;
        for t in 0..mesh.n_triangles() {
            let tag = mesh.tag(t);
            if !setup.materials.contains_key(&tag) {
                return Err(MeshError::Topology(format!("no material assigned to tag {tag}")));
            }
        }
        let source = SourceSpec::from_regions(&setup.geometry, &setup.currents);
        Ok(Problem {
            mesh: Arc::new(mesh),
            geometry: setup.geometry.clone(),
            materials: setup.materials.clone(),
            currents: setup.currents.clone(),
            settings: setup.solver,
            source,
        })
    }

    pub fn law(&self, tri: usize) -> &MaterialLaw {
        &self.materials[&self.mesh.tag(tri)]
    }

    /// Out-of-plane current density on a triangle (0 where none declared).
    pub fn current(&self, tri: usize) -> f64 {
        self.currents.get(&self.mesh.tag(tri)).copied().unwrap_or(0.0)
    }

    /// Characteristic length: the longer bounding-box side.
    pub fn char_length(&self) -> f64 {
        let b = self.geometry.bbox;
        (b.x1 - b.x0).max(b.y1 - b.y0)
    }

    /// Physical regularization parameter for a dimensionless ε₀:
    /// ε = ε₀ · ℓ²/μ₀.
    pub fn epsilon(&self, epsilon0: f64) -> f64 {
        let l = self.char_length();
        epsilon0 * l * l / crate::material::MU0
    }
}

/// How a solved field is represented; evaluation goes through
/// [`eval::h_at`]/[`eval::b_at`] so the representations stay comparable.
#[derive(Debug, Clone)]
pub enum FieldRep {
    /// Edge-element coefficients of h (penalty and limit solutions).
    Edge(Vec<f64>),
    /// Scalar potential ψ on all vertices (pinned entry zero);
    /// h = h_s − ∇ψ with the analytic source field h_s.
    ScalarPotential(Vec<f64>),
    /// Out-of-plane vector potential a₃ on all vertices (boundary zero);
    /// b = (∂_y a₃, −∂_x a₃), h recovered through the material law.
    VectorPotential(Vec<f64>),
}

/// A converged solve of one formulation.
#[derive(Debug, Clone)]
pub struct FieldSolution {
    pub formulation: Formulation,
    pub rep: FieldRep,
    pub trace: SolveTrace,
    /// Physical ε for penalty runs; `None` otherwise.
    pub epsilon: Option<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{Rect, Region};

    fn square_mesh(cells: usize) -> Mesh2D {
        Mesh2D::generate(&GeometrySpec {
            bbox: Rect::new(0.0, 0.0, 1.0, 1.0),
            regions: vec![Region {
                name: "all".into(),
                tag: 0,
                rect: Rect::new(0.0, 0.0, 1.0, 1.0),
                mesh_size: 1.0 / cells as f64,
            }],
        })
        .unwrap()
    }

    #[test]
    fn dof_maps_cover_expected_counts() {
        let mesh = square_mesh(2); // V=9, E=16, 8 boundary vertices
        assert_eq!(DofMap::new(&mesh, SpaceKind::Edge).len(), 16);
        assert_eq!(DofMap::new(&mesh, SpaceKind::Nodal).len(), 9);
        let pinned = DofMap::new(&mesh, SpaceKind::NodalPinned);
        assert_eq!(pinned.len(), 8);
        assert_eq!(pinned.dof(mesh.pinned_vertex()), None);
        let interior = DofMap::new(&mesh, SpaceKind::NodalInterior);
        assert_eq!(interior.len(), 1);
        assert_eq!(interior.entity(0), 4); // the center vertex
    }

    #[test]
    fn scatter_roundtrip() {
        let mesh = square_mesh(2);
        let map = DofMap::new(&mesh, SpaceKind::NodalPinned);
        let x: Vec<f64> = (0..map.len()).map(|i| i as f64 + 1.0).collect();
        let full = map.scatter(&x);
        assert_eq!(full[mesh.pinned_vertex()], 0.0);
        for d in 0..map.len() {
            assert_eq!(full[map.entity(d)], x[d]);
        }
    }

    #[test]
    fn pinned_vertex_is_lowest_boundary_index() {
        let mesh = square_mesh(3);
        assert_eq!(mesh.pinned_vertex(), 0);
    }
}
