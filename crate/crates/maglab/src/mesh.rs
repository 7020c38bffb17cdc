//! Conforming triangular meshes of multi-region rectangular geometries.
//!
//! Meshes come from a structured grid with a fixed diagonal split (lower-left
//! to upper-right), so runs are deterministic and region boundaries land on
//! mesh lines. Edges carry a global orientation (low vertex index → high),
//! which fixes the sign conventions of the edge-element DOFs.

use crate::io::{Diagnostic, Severity};
use crate::material::Vec2;
use thiserror::Error;

/// Relative slack for grid-alignment and area checks.
const ALIGN_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("mesh size {0} must be positive and finite")]
    BadMeshSize(f64),
    #[error("bounding box is degenerate: [{x0}, {x1}] × [{y0}, {y1}]")]
    BadBox { x0: f64, x1: f64, y0: f64, y1: f64 },
    #[error("region `{0}` does not align with the structured grid (size {1})")]
    Misaligned(String, f64),
    #[error("region `{0}` extends outside the bounding box")]
    OutOfBox(String),
    #[error("regions `{0}` and `{1}` overlap")]
    Overlap(String, String),
    #[error("cell centroid ({0}, {1}) is not covered by any region (regions must tile the box)")]
    Uncovered(f64, f64),
    #[error("geometry has no regions")]
    NoRegions,
    #[error("duplicate region tag {tag} used by `{a}` and `{b}` with different names")]
    TagClash { tag: u32, a: String, b: String },
    #[error("non-conforming mesh: {0}")]
    Topology(String),
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{}", format_diagnostics(.0))]
    Parse(Vec<Diagnostic>),
}

fn format_diagnostics(diags: &[Diagnostic]) -> String {
    match diags.first() {
        Some(d) => format!("{} (+{} more)", d, diags.len().saturating_sub(1)),
        None => "parse error".into(),
    }
}

/// Axis-aligned rectangle [x0, x1] × [y0, y1] in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Rect { x0, y0, x1, y1 }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x0 && x <= self.x1 && y >= self.y0 && y <= self.y1
    }

    fn overlaps_interior(&self, o: &Rect) -> bool {
        self.x0 < o.x1 && o.x0 < self.x1 && self.y0 < o.y1 && o.y0 < self.y1
    }
}

/// One named rectangular region with a material tag and a target mesh size.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub name: String,
    pub tag: u32,
    pub rect: Rect,
    pub mesh_size: f64,
}

/// Multi-region rectangular geometry; the regions must be disjoint and tile
/// the bounding box, with all region boundaries on grid lines of the
/// effective (smallest requested) mesh size.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometrySpec {
    pub bbox: Rect,
    pub regions: Vec<Region>,
}

impl GeometrySpec {
    /// Effective structured-grid cell size: the smallest region target.
    pub fn effective_mesh_size(&self) -> Result<f64, MeshError> {
        let mut h = f64::INFINITY;
        for r in &self.regions {
            if !(r.mesh_size > 0.0) || !r.mesh_size.is_finite() {
                return Err(MeshError::BadMeshSize(r.mesh_size));
            }
            h = h.min(r.mesh_size);
        }
        if self.regions.is_empty() {
            return Err(MeshError::NoRegions);
        }
        Ok(h)
    }
}

/// Immutable triangulation with globally oriented edges.
///
/// Triangles are counterclockwise; every undirected edge appears once as
/// (v_lo, v_hi) with v_lo < v_hi, and each element records which of its three
/// traversal directions agrees with that global orientation (+1) or not (−1).
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh2D {
    vertices: Vec<Vec2>,
    triangles: Vec<[usize; 3]>,
    tri_tag: Vec<u32>,
    edges: Vec<(usize, usize)>,
    tri_edges: Vec<[usize; 3]>,
    tri_edge_signs: Vec<[i8; 3]>,
    boundary_edge: Vec<bool>,
    boundary_vertex: Vec<bool>,
}

impl Mesh2D {
    /// Build the edge enumeration, incidence tables and boundary flags from
    /// raw vertices/triangles. Fails on non-conforming input.
    pub fn from_parts(
        vertices: Vec<Vec2>,
        triangles: Vec<[usize; 3]>,
        tri_tag: Vec<u32>,
    ) -> Result<Self, MeshError> {
        assert_eq!(triangles.len(), tri_tag.len());
        for (t, tri) in triangles.iter().enumerate() {
            for &v in tri {
                if v >= vertices.len() {
                    return Err(MeshError::Topology(format!(
                        "triangle {t} references vertex {v} out of range"
                    )));
                }
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(MeshError::Topology(format!("triangle {t} repeats a vertex")));
            }
            if signed_area(&vertices, tri) <= 0.0 {
                return Err(MeshError::Topology(format!(
                    "triangle {t} has non-positive area (vertices must be counterclockwise)"
                )));
            }
        }

        let mut edges: Vec<(usize, usize)> = Vec::with_capacity(3 * triangles.len());
        for tri in &triangles {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                edges.push((a.min(b), a.max(b)));
            }
        }
        edges.sort_unstable();
        edges.dedup();

        let mut tri_edges = Vec::with_capacity(triangles.len());
        let mut tri_edge_signs = Vec::with_capacity(triangles.len());
        let mut incidence = vec![0u8; edges.len()];
        let mut sign_sum = vec![0i8; edges.len()];
        for tri in &triangles {
            let mut ids = [0usize; 3];
            let mut signs = [0i8; 3];
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                let key = (a.min(b), a.max(b));
                let e = edges.binary_search(&key).expect("edge present by construction");
                ids[k] = e;
                signs[k] = if a < b { 1 } else { -1 };
                incidence[e] = incidence[e].saturating_add(1);
                sign_sum[e] += signs[k];
            }
            tri_edges.push(ids);
            tri_edge_signs.push(signs);
        }

        let mut boundary_edge = vec![false; edges.len()];
        for e in 0..edges.len() {
            match incidence[e] {
                1 => boundary_edge[e] = true,
                2 => {
                    if sign_sum[e] != 0 {
                        return Err(MeshError::Topology(format!(
                            "interior edge {:?} traversed twice in the same direction",
                            edges[e]
                        )));
                    }
                }
                n => {
                    return Err(MeshError::Topology(format!(
                        "edge {:?} shared by {n} triangles",
                        edges[e]
                    )))
                }
            }
        }
        let mut boundary_vertex = vec![false; vertices.len()];
        for (e, &(a, b)) in edges.iter().enumerate() {
            if boundary_edge[e] {
                boundary_vertex[a] = true;
                boundary_vertex[b] = true;
            }
        }

        Ok(Mesh2D {
            vertices,
            triangles,
            tri_tag,
            edges,
            tri_edges,
            tri_edge_signs,
            boundary_edge,
            boundary_vertex,
        })
    }

    /// Structured-grid triangulation of a multi-region geometry. Every cell is
    /// split along its lower-left → upper-right diagonal; triangle tags come
    /// from the region containing the cell centroid.
    pub fn generate(spec: &GeometrySpec) -> Result<Self, MeshError> {
        let h = spec.effective_mesh_size()?;
        let bb = spec.bbox;
        let (w, ht) = (bb.x1 - bb.x0, bb.y1 - bb.y0);
        if !(w > 0.0) || !(ht > 0.0) || !w.is_finite() || !ht.is_finite() {
            return Err(MeshError::BadBox { x0: bb.x0, x1: bb.x1, y0: bb.y0, y1: bb.y1 });
        }

        let steps = |len: f64| -> Option<usize> {
            let n = len / h;
            let r = n.round();
            (r >= 1.0 && (n - r).abs() <= ALIGN_TOL * n.max(1.0)).then_some(r as usize)
        };
        let nx = steps(w).ok_or_else(|| MeshError::Misaligned("bounding box".into(), h))?;
        let ny = steps(ht).ok_or_else(|| MeshError::Misaligned("bounding box".into(), h))?;

        // Every region boundary must sit on a grid line of the effective size.
        let on_grid = |c: f64, origin: f64| {
            let n = (c - origin) / h;
            (n - n.round()).abs() <= ALIGN_TOL * n.abs().max(1.0)
        };
        let mut seen_tags: Vec<(u32, &str)> = Vec::new();
        for r in &spec.regions {
            let rc = r.rect;
            if !(rc.x0 < rc.x1 && rc.y0 < rc.y1) {
                return Err(MeshError::BadBox { x0: rc.x0, x1: rc.x1, y0: rc.y0, y1: rc.y1 });
            }
            if rc.x0 < bb.x0 - ALIGN_TOL * w || rc.x1 > bb.x1 + ALIGN_TOL * w
                || rc.y0 < bb.y0 - ALIGN_TOL * ht || rc.y1 > bb.y1 + ALIGN_TOL * ht
            {
                return Err(MeshError::OutOfBox(r.name.clone()));
            }
            if !(on_grid(rc.x0, bb.x0) && on_grid(rc.x1, bb.x0)
                && on_grid(rc.y0, bb.y0) && on_grid(rc.y1, bb.y0))
            {
                return Err(MeshError::Misaligned(r.name.clone(), h));
            }
            if let Some(&(_, other)) = seen_tags.iter().find(|&&(t, n)| t == r.tag && n != r.name) {
                return Err(MeshError::TagClash {
                    tag: r.tag,
                    a: other.to_string(),
                    b: r.name.clone(),
                });
            }
            seen_tags.push((r.tag, &r.name));
        }
        for i in 0..spec.regions.len() {
            for j in i + 1..spec.regions.len() {
                if spec.regions[i].rect.overlaps_interior(&spec.regions[j].rect) {
                    return Err(MeshError::Overlap(
                        spec.regions[i].name.clone(),
                        spec.regions[j].name.clone(),
                    ));
                }
            }
        }

        let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            for i in 0..=nx {
                vertices.push(Vec2::new(
                    bb.x0 + w * (i as f64) / (nx as f64),
                    bb.y0 + ht * (j as f64) / (ny as f64),
                ));
            }
        }
        let vid = |i: usize, j: usize| j * (nx + 1) + i;

        let mut triangles = Vec::with_capacity(2 * nx * ny);
        let mut tri_tag = Vec::with_capacity(2 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let (v00, v10) = (vid(i, j), vid(i + 1, j));
                let (v01, v11) = (vid(i, j + 1), vid(i + 1, j + 1));
                for tri in [[v00, v10, v11], [v00, v11, v01]] {
                    let cx = (vertices[tri[0]].x + vertices[tri[1]].x + vertices[tri[2]].x) / 3.0;
                    let cy = (vertices[tri[0]].y + vertices[tri[1]].y + vertices[tri[2]].y) / 3.0;
                    let region = spec
                        .regions
                        .iter()
                        .find(|r| r.rect.contains(cx, cy))
                        .ok_or(MeshError::Uncovered(cx, cy))?;
                    triangles.push(tri);
                    tri_tag.push(region.tag);
                }
            }
        }

        Self::from_parts(vertices, triangles, tri_tag)
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn vertex(&self, v: usize) -> Vec2 {
        self.vertices[v]
    }

    pub fn triangle(&self, t: usize) -> [usize; 3] {
        self.triangles[t]
    }

    pub fn tag(&self, t: usize) -> u32 {
        self.tri_tag[t]
    }

    /// Endpoints (v_lo, v_hi) of edge `e`, with v_lo < v_hi.
    pub fn edge(&self, e: usize) -> (usize, usize) {
        self.edges[e]
    }

    /// Global edge ids of element `t`, ordered as the local traversals
    /// (v0→v1, v1→v2, v2→v0).
    pub fn tri_edges(&self, t: usize) -> [usize; 3] {
        self.tri_edges[t]
    }

    /// +1 where the local traversal runs from the lower to the higher vertex
    /// index, −1 otherwise.
    pub fn tri_edge_signs(&self, t: usize) -> [i8; 3] {
        self.tri_edge_signs[t]
    }

    pub fn is_boundary_edge(&self, e: usize) -> bool {
        self.boundary_edge[e]
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.boundary_vertex[v]
    }

    pub fn area(&self, t: usize) -> f64 {
        0.5 * signed_area(&self.vertices, &self.triangles[t])
    }

    pub fn centroid(&self, t: usize) -> Vec2 {
        let [a, b, c] = self.triangles[t];
        Vec2::new(
            (self.vertices[a].x + self.vertices[b].x + self.vertices[c].x) / 3.0,
            (self.vertices[a].y + self.vertices[b].y + self.vertices[c].y) / 3.0,
        )
    }

    /// Lowest-index boundary vertex; the designated pin for potential spaces.
    pub fn pinned_vertex(&self) -> usize {
        self.boundary_vertex
            .iter()
            .position(|&b| b)
            .expect("a conforming mesh of a bounded domain has a boundary")
    }

    /// ASCII export: `maglab-mesh v1` header, counts, vertices, triangles.
    /// Edges are rebuilt on load, so only their count is stored (as a check).
    pub fn save(&self, path: &std::path::Path) -> Result<(), MeshError> {
        let mut out = String::new();
        out.push_str("maglab-mesh v1\n");
        out.push_str(&format!(
            "{} {} {}\n",
            self.n_vertices(),
            self.n_edges(),
            self.n_triangles()
        ));
        for v in &self.vertices {
            out.push_str(&format!("{} {}\n", v.x, v.y));
        }
        for (tri, tag) in self.triangles.iter().zip(&self.tri_tag) {
            out.push_str(&format!("{} {} {} {}\n", tri[0], tri[1], tri[2], tag));
        }
        std::fs::write(path, out).map_err(|source| MeshError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &std::path::Path) -> Result<Self, MeshError> {
        let text = std::fs::read_to_string(path).map_err(|source| MeshError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Parse the ASCII format; every malformed input yields diagnostics with
    /// line numbers rather than a panic.
    pub fn parse(text: &str, path: &str) -> Result<Self, MeshError> {
        let diag = |line: usize, message: String| {
            MeshError::Parse(vec![Diagnostic {
                path: path.to_string(),
                line,
                message,
                severity: Severity::Error,
            }])
        };
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, "maglab-mesh v1")) => {}
            Some((_, other)) => {
                return Err(diag(1, format!("expected magic line `maglab-mesh v1`, got `{other}`")))
            }
            None => return Err(diag(1, "empty file".into())),
        }
        let (_, counts) = lines.next().ok_or_else(|| diag(2, "missing counts line".into()))?;
        let counts: Vec<&str> = counts.split_whitespace().collect();
        if counts.len() != 3 {
            return Err(diag(2, format!("counts line must be `V E T`, got `{}`", counts.join(" "))));
        }
        let parse_count = |s: &str| s.parse::<usize>().ok().filter(|&n| n <= 100_000_000);
        let nv = parse_count(counts[0]).ok_or_else(|| diag(2, format!("bad vertex count `{}`", counts[0])))?;
        let ne = parse_count(counts[1]).ok_or_else(|| diag(2, format!("bad edge count `{}`", counts[1])))?;
        let nt = parse_count(counts[2]).ok_or_else(|| diag(2, format!("bad triangle count `{}`", counts[2])))?;

        let mut vertices = Vec::new();
        for k in 0..nv {
            let (idx, line) =
                lines.next().ok_or_else(|| diag(3 + k, format!("missing vertex {k}")))?;
            let parts: Vec<&str> = line.split_whitespace().collect();
            let bad = || diag(idx + 1, format!("vertex line must be `x y`, got `{line}`"));
            if parts.len() != 2 {
                return Err(bad());
            }
            let x: f64 = parts[0].parse().map_err(|_| bad())?;
            let y: f64 = parts[1].parse().map_err(|_| bad())?;
            if !x.is_finite() || !y.is_finite() {
                return Err(diag(idx + 1, format!("non-finite vertex coordinate `{line}`")));
            }
            vertices.push(Vec2::new(x, y));
        }
        let mut triangles = Vec::new();
        let mut tri_tag = Vec::new();
        for k in 0..nt {
            let (idx, line) =
                lines.next().ok_or_else(|| diag(3 + nv + k, format!("missing triangle {k}")))?;
            let parts: Vec<&str> = line.split_whitespace().collect();
            let bad = || diag(idx + 1, format!("triangle line must be `v0 v1 v2 tag`, got `{line}`"));
            if parts.len() != 4 {
                return Err(bad());
            }
            let mut tri = [0usize; 3];
            for (slot, s) in tri.iter_mut().zip(&parts[..3]) {
                *slot = s.parse().map_err(|_| bad())?;
                if *slot >= nv {
                    return Err(diag(idx + 1, format!("vertex index {slot} out of range (V = {nv})")));
                }
            }
            let tag: u32 = parts[3].parse().map_err(|_| bad())?;
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(diag(idx + 1, format!("triangle {k} repeats a vertex")));
            }
            if signed_area(&vertices, &tri) <= 0.0 {
                return Err(diag(idx + 1, format!("triangle {k} has non-positive area")));
            }
            triangles.push(tri);
            tri_tag.push(tag);
        }
        if let Some((idx, line)) = lines.next() {
            if !line.trim().is_empty() {
                return Err(diag(idx + 1, format!("unexpected trailing content `{line}`")));
            }
        }
        let mesh = Self::from_parts(vertices, triangles, tri_tag).map_err(|e| match e {
            MeshError::Topology(msg) => diag(2, format!("non-conforming mesh: {msg}")),
            other => other,
        })?;
        if mesh.n_edges() != ne {
            return Err(diag(
                2,
                format!("edge count {} does not match rebuilt topology ({})", ne, mesh.n_edges()),
            ));
        }
        Ok(mesh)
    }
}

/// Twice the signed area of a triangle (positive for counterclockwise).
fn signed_area(vertices: &[Vec2], tri: &[usize; 3]) -> f64 {
    let (a, b, c) = (vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
    (b - a).cross(c - a)
}
