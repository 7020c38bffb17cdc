//! File formats: problem configs (JSON), B-H curves (CSV), VTK legacy output,
//! and small CSV helpers for reports and traces.
//!
//! Loaders are total: any input, however mangled, comes back as `Ok` or as a
//! list of [`Diagnostic`]s with file/line positions — never a panic.

use crate::material::{BHTable, MaterialError, MaterialLaw, MU0};
use crate::mesh::{GeometrySpec, Rect, Region};
use serde::Deserialize;
use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Severity::Error => write!(f, "error"),
            Severity::Warning => write!(f, "warning"),
        }
    }
}

/// A positioned message about an input file. `line == 0` means the problem is
/// with the file as a whole (or spans several lines).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub path: String,
    pub line: usize,
    pub message: String,
    pub severity: Severity,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line > 0 {
            write!(f, "{}:{}: {}: {}", self.path, self.line, self.severity, self.message)
        } else {
            write!(f, "{}: {}: {}", self.path, self.severity, self.message)
        }
    }
}

fn error(path: &str, line: usize, message: String) -> Diagnostic {
    Diagnostic { path: path.to_string(), line, message, severity: Severity::Error }
}

/// Everything a run needs that comes from the config file.
#[derive(Debug, Clone)]
pub struct CaseSetup {
    pub geometry: GeometrySpec,
    /// Material law per region tag.
    pub materials: BTreeMap<u32, MaterialLaw>,
    /// Out-of-plane current density (A/m²) per region tag; absent tags carry none.
    pub currents: BTreeMap<u32, f64>,
    pub solver: SolverSettings,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSettings {
    pub newton_tol: f64,
    pub newton_max_iters: usize,
    pub epsilon0: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings { newton_tol: 1e-10, newton_max_iters: 50, epsilon0: 1e-5 }
    }
}

const CONFIG_MAGIC: &str = "maglab-config v1";

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    format: String,
    bbox: [f64; 4],
    regions: Vec<RegionEntry>,
    #[serde(default)]
    solver: SolverSettings,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RegionEntry {
    name: String,
    tag: u32,
    rect: [f64; 4],
    mesh_size: f64,
    material: MaterialEntry,
    #[serde(default)]
    current_density: f64,
}

#[derive(Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum MaterialEntry {
    /// Linear with relative permeability `mu_r` (defaults to vacuum).
    Linear {
        #[serde(default = "one")]
        mu_r: f64,
    },
    AtanSaturation {
        #[serde(default = "mu0")]
        mu0: f64,
        b_sat: f64,
        h0: f64,
    },
    /// Piecewise-linear curve loaded from a CSV next to the config file.
    BhTable {
        path: String,
        #[serde(default = "mu0")]
        mu_ext: f64,
    },
}

fn one() -> f64 {
    1.0
}

fn mu0() -> f64 {
    MU0
}

pub fn load_config(path: &Path) -> Result<CaseSetup, Vec<Diagnostic>> {
    let shown = path.display().to_string();
    let text = std::fs::read_to_string(path)
        .map_err(|e| vec![error(&shown, 0, format!("cannot read config: {e}"))])?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_config(&text, &shown, base)
}

/// Parse and validate a config. `base` anchors relative B-H table paths.
pub fn parse_config(text: &str, path: &str, base: &Path) -> Result<CaseSetup, Vec<Diagnostic>> {
    let file: ConfigFile = serde_json::from_str(text)
        .map_err(|e| vec![error(path, e.line(), format!("invalid config JSON: {e}"))])?;

    let mut diags = Vec::new();
    if file.format != CONFIG_MAGIC {
        diags.push(error(
            path,
            0,
            format!("format must be `{CONFIG_MAGIC}`, got `{}`", file.format),
        ));
    }
    let [x0, y0, x1, y1] = file.bbox;
    if !(file.bbox.iter().all(|v| v.is_finite()) && x0 < x1 && y0 < y1) {
        diags.push(error(path, 0, format!("bad bounding box {:?}", file.bbox)));
    }
    if file.regions.is_empty() {
        diags.push(error(path, 0, "config declares no regions".into()));
    }
    let s = file.solver;
    if !(s.newton_tol > 0.0 && s.newton_tol.is_finite()) {
        diags.push(error(path, 0, format!("newton_tol must be positive, got {}", s.newton_tol)));
    }
    if !(s.epsilon0 > 0.0 && s.epsilon0.is_finite()) {
        diags.push(error(path, 0, format!("epsilon0 must be positive, got {}", s.epsilon0)));
    }
    if s.newton_max_iters == 0 {
        diags.push(error(path, 0, "newton_max_iters must be at least 1".into()));
    }

    let mut geometry = GeometrySpec { bbox: Rect::new(x0, y0, x1, y1), regions: Vec::new() };
    let mut materials = BTreeMap::new();
    let mut currents = BTreeMap::new();
    for entry in &file.regions {
        let [rx0, ry0, rx1, ry1] = entry.rect;
        let bad_rect = !(entry.rect.iter().all(|v| v.is_finite()) && rx0 < rx1 && ry0 < ry1);
        if bad_rect {
            diags.push(error(path, 0, format!("region `{}` has bad rect {:?}", entry.name, entry.rect)));
        }
        if !(entry.mesh_size > 0.0 && entry.mesh_size.is_finite()) {
            diags.push(error(
                path,
                0,
                format!("region `{}` has bad mesh_size {}", entry.name, entry.mesh_size),
            ));
        }
        if !entry.current_density.is_finite() {
            diags.push(error(
                path,
                0,
                format!("region `{}` has non-finite current_density", entry.name),
            ));
        }
        match resolve_material(&entry.material, base) {
            Ok(law) => {
                if let Err(e) = law.certify() {
                    diags.push(error(
                        path,
                        0,
                        format!("region `{}` material is not admissible: {e}", entry.name),
                    ));
                } else if let Some(prev) = materials.insert(entry.tag, law) {
                    // Same tag twice is fine only if the laws agree.
                    if format!("{prev:?}") != format!("{:?}", materials[&entry.tag]) {
                        diags.push(error(
                            path,
                            0,
                            format!("tag {} is assigned two different materials", entry.tag),
                        ));
                    }
                }
            }
            Err(mut more) => {
                for d in &mut more {
                    d.message = format!("region `{}`: {}", entry.name, d.message);
                }
                diags.extend(more);
            }
        }
        if entry.current_density != 0.0 {
            currents.insert(entry.tag, entry.current_density);
        }
        geometry.regions.push(Region {
            name: entry.name.clone(),
            tag: entry.tag,
            rect: Rect::new(rx0, ry0, rx1, ry1),
            mesh_size: entry.mesh_size,
        });
    }

    if diags.is_empty() {
        Ok(CaseSetup { geometry, materials, currents, solver: file.solver })
    } else {
        Err(diags)
    }
}

fn resolve_material(entry: &MaterialEntry, base: &Path) -> Result<MaterialLaw, Vec<Diagnostic>> {
    match entry {
        MaterialEntry::Linear { mu_r } => Ok(MaterialLaw::Linear { mu: mu_r * MU0 }),
        MaterialEntry::AtanSaturation { mu0, b_sat, h0 } => {
            Ok(MaterialLaw::AtanSaturation { mu0: *mu0, b_s: *b_sat, h0: *h0 })
        }
        MaterialEntry::BhTable { path, mu_ext } => {
            let full = base.join(path);
            let table = load_bh(&full)?;
            Ok(MaterialLaw::Tabulated { table, mu_ext: *mu_ext })
        }
    }
}

const BH_HEADER: &str = "h_A_per_m,b_T";

/// Load a B-H curve from CSV: a fixed header, then `h,b` rows starting at the
/// origin with both columns strictly increasing.
pub fn load_bh(path: &Path) -> Result<BHTable, Vec<Diagnostic>> {
    let shown = path.display().to_string();
    let text = std::fs::read_to_string(path)
        .map_err(|e| vec![error(&shown, 0, format!("cannot read B-H table: {e}"))])?;
    parse_bh(&text, &shown)
}

pub fn parse_bh(text: &str, path: &str) -> Result<BHTable, Vec<Diagnostic>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, l)) if l.trim() == BH_HEADER => {}
        Some((_, l)) => {
            return Err(vec![error(path, 1, format!("header must be `{BH_HEADER}`, got `{l}`"))])
        }
        None => return Err(vec![error(path, 1, "empty file".into())]),
    }
    let mut samples = Vec::new();
    let mut diags = Vec::new();
    let mut row_line = Vec::new();
    for (idx, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 2 {
            diags.push(error(path, idx + 1, format!("row must be `h,b`, got `{line}`")));
            continue;
        }
        match (parts[0].trim().parse::<f64>(), parts[1].trim().parse::<f64>()) {
            (Ok(hv), Ok(bv)) => {
                samples.push((hv, bv));
                row_line.push(idx + 1);
            }
            _ => diags.push(error(path, idx + 1, format!("row has non-numeric values `{line}`"))),
        }
    }
    if !diags.is_empty() {
        return Err(diags);
    }
    BHTable::new(&samples).map_err(|e| {
        // Point at the offending row where the error names one.
        let line = match &e {
            MaterialError::NonMonotone { index, .. } => row_line.get(index + 1).copied().unwrap_or(0),
            MaterialError::NonFiniteSample(index) => row_line.get(*index).copied().unwrap_or(0),
            _ => row_line.first().copied().unwrap_or(0),
        };
        vec![error(path, line, format!("invalid B-H table: {e}"))]
    })
}

/// Write per-cell fields on a mesh as a legacy ASCII VTK unstructured grid.
/// Vector fields are padded with a zero z-component.
pub fn write_vtk(
    path: &Path,
    mesh: &crate::mesh::Mesh2D,
    cell_vectors: &[(&str, &[crate::material::Vec2])],
    cell_scalars: &[(&str, &[f64])],
) -> std::io::Result<()> {
    for (name, data) in cell_vectors {
        assert_eq!(data.len(), mesh.n_triangles(), "vector field `{name}` length");
    }
    for (name, data) in cell_scalars {
        assert_eq!(data.len(), mesh.n_triangles(), "scalar field `{name}` length");
    }
    let mut out = String::new();
    out.push_str("# vtk DataFile Version 3.0\n");
    out.push_str("maglab fields\n");
    out.push_str("ASCII\n");
    out.push_str("DATASET UNSTRUCTURED_GRID\n");
    out.push_str(&format!("POINTS {} double\n", mesh.n_vertices()));
    for v in 0..mesh.n_vertices() {
        let p = mesh.vertex(v);
        out.push_str(&format!("{} {} 0\n", p.x, p.y));
    }
    let nt = mesh.n_triangles();
    out.push_str(&format!("CELLS {} {}\n", nt, 4 * nt));
    for t in 0..nt {
        let [a, b, c] = mesh.triangle(t);
        out.push_str(&format!("3 {a} {b} {c}\n"));
    }
    out.push_str(&format!("CELL_TYPES {nt}\n"));
    for _ in 0..nt {
        out.push_str("5\n");
    }
    out.push_str(&format!("CELL_DATA {nt}\n"));
    for (name, data) in cell_vectors {
        out.push_str(&format!("VECTORS {name} double\n"));
        for v in *data {
            out.push_str(&format!("{} {} 0\n", v.x, v.y));
        }
    }
    for (name, data) in cell_scalars {
        out.push_str(&format!("SCALARS {name} double 1\nLOOKUP_TABLE default\n"));
        for s in *data {
            out.push_str(&format!("{s}\n"));
        }
    }
    std::fs::write(path, out)
}

/// Write a CSV file from preformatted rows. Formatting is left to callers so
/// outputs stay byte-stable.
pub fn write_csv(path: &Path, header: &str, rows: &[String]) -> std::io::Result<()> {
    let mut out = String::with_capacity(header.len() + rows.iter().map(|r| r.len() + 1).sum::<usize>() + 1);
    out.push_str(header);
    out.push('\n');
    for row in rows {
        out.push_str(row);
        out.push('\n');
    }
    std::fs::write(path, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const VALID_CONFIG: &str = r#"{
  "format": "maglab-config v1",
  "bbox": [0.0, 0.0, 1.0, 1.0],
  "regions": [
    {
      "name": "core",
      "tag": 1,
      "rect": [0.0, 0.0, 0.5, 1.0],
      "mesh_size": 0.25,
      "material": { "type": "atan_saturation", "b_sat": 1.8, "h0": 500.0 },
      "current_density": 0.0
    },
    {
      "name": "air",
      "tag": 0,
      "rect": [0.5, 0.0, 1.0, 1.0],
      "mesh_size": 0.25,
      "material": { "type": "linear" },
      "current_density": 1.0e7
    }
  ],
  "solver": { "newton_tol": 1.0e-10, "newton_max_iters": 50, "epsilon0": 1.0e-5 }
}"#;

    #[test]
    fn parses_valid_config() {
        let setup = parse_config(VALID_CONFIG, "cfg", Path::new(".")).unwrap();
        assert_eq!(setup.geometry.regions.len(), 2);
        assert_eq!(setup.currents.get(&0), Some(&1.0e7));
        assert!(setup.currents.get(&1).is_none());
        assert!(matches!(setup.materials[&1], MaterialLaw::AtanSaturation { .. }));
        assert!(matches!(setup.materials[&0], MaterialLaw::Linear { mu } if (mu - MU0).abs() < 1e-18));
        assert_eq!(setup.solver.newton_max_iters, 50);
    }

    #[test]
    fn rejects_unknown_fields_and_bad_values() {
        let text = VALID_CONFIG.replace("\"newton_tol\"", "\"newton_tolerance\"");
        assert!(parse_config(&text, "cfg", Path::new(".")).is_err());

        let text = VALID_CONFIG.replace("maglab-config v1", "maglab-config v2");
        let diags = parse_config(&text, "cfg", Path::new(".")).unwrap_err();
        assert!(diags[0].message.contains("format"));

        let text = VALID_CONFIG.replace("\"mesh_size\": 0.25", "\"mesh_size\": -0.25");
        let diags = parse_config(&text, "cfg", Path::new(".")).unwrap_err();
        assert!(diags.iter().any(|d| d.message.contains("mesh_size")));

        let text = VALID_CONFIG.replace("\"h0\": 500.0", "\"h0\": 0.0");
        let diags = parse_config(&text, "cfg", Path::new(".")).unwrap_err();
        assert!(diags.iter().any(|d| d.message.contains("not admissible")));
    }

    #[test]
    fn bh_round_trip_and_errors() {
        let table = parse_bh("h_A_per_m,b_T\n0,0\n100,0.5\n1000,1.5\n", "bh").unwrap();
        let law = MaterialLaw::Tabulated { table, mu_ext: MU0 };
        assert!(law.certify().is_ok());

        let diags = parse_bh("wrong\n0,0\n", "bh").unwrap_err();
        assert_eq!(diags[0].line, 1);

        let diags = parse_bh("h_A_per_m,b_T\n0,0\n100,abc\n", "bh").unwrap_err();
        assert_eq!(diags[0].line, 3);

        // Non-monotone b column: named row.
        let diags = parse_bh("h_A_per_m,b_T\n0,0\n100,0.5\n200,0.4\n", "bh").unwrap_err();
        assert_eq!(diags[0].line, 4);
    }

    #[test]
    fn loader_survives_mutated_configs() {
        // Deterministic byte-level mutations: flips, deletions, insertions,
        // truncations. The loader must return Ok or diagnostics, never panic.
        let base = VALID_CONFIG.as_bytes();
        let mut state = 0x2545F4914F6CDD1Du64;
        let mut rng = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            state
        };
        for _ in 0..1000 {
            let mut bytes = base.to_vec();
            for _ in 0..(rng() % 8 + 1) {
                match rng() % 4 {
                    0 => {
                        let i = (rng() as usize) % bytes.len();
                        bytes[i] = (rng() % 256) as u8;
                    }
                    1 => {
                        let i = (rng() as usize) % bytes.len();
                        bytes.remove(i);
                    }
                    2 => {
                        let i = (rng() as usize) % (bytes.len() + 1);
                        bytes.insert(i, (rng() % 256) as u8);
                    }
                    _ => {
                        let i = (rng() as usize) % bytes.len();
                        bytes.truncate(i);
                        if bytes.is_empty() {
                            bytes.push(b'{');
                        }
                    }
                }
            }
            let text = String::from_utf8_lossy(&bytes);
            let _ = parse_config(&text, "fuzz", Path::new("."));
        }
    }

    #[test]
    fn mesh_loader_survives_mutated_inputs() {
        let mesh = crate::mesh::Mesh2D::generate(&crate::mesh::GeometrySpec {
            bbox: crate::mesh::Rect::new(0.0, 0.0, 1.0, 1.0),
            regions: vec![crate::mesh::Region {
                name: "all".into(),
                tag: 0,
                rect: crate::mesh::Rect::new(0.0, 0.0, 1.0, 1.0),
                mesh_size: 0.5,
            }],
        })
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.txt");
        mesh.save(&path).unwrap();
        let base = std::fs::read(&path).unwrap();
        let mut state = 0x9E3779B97F4A7C15u64;
        let mut rng = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            state
        };
        for _ in 0..1000 {
            let mut bytes = base.clone();
            for _ in 0..(rng() % 6 + 1) {
                let i = (rng() as usize) % bytes.len();
                match rng() % 3 {
                    0 => bytes[i] = (rng() % 256) as u8,
                    1 => {
                        bytes.remove(i);
                    }
                    _ => bytes.insert(i, b"0123456789 .-\n"[(rng() % 14) as usize]),
                }
            }
            let text = String::from_utf8_lossy(&bytes);
            let _ = crate::mesh::Mesh2D::parse(&text, "fuzz");
        }
    }

    #[test]
    fn vtk_output_shape() {
        let mesh = crate::mesh::Mesh2D::generate(&crate::mesh::GeometrySpec {
            bbox: crate::mesh::Rect::new(0.0, 0.0, 1.0, 1.0),
            regions: vec![crate::mesh::Region {
                name: "all".into(),
                tag: 0,
                rect: crate::mesh::Rect::new(0.0, 0.0, 1.0, 1.0),
                mesh_size: 1.0,
            }],
        })
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.vtk");
        let h = vec![crate::material::Vec2::new(1.0, 2.0); 2];
        let region = vec![0.0, 0.0];
        write_vtk(&path, &mesh, &[("h", &h)], &[("region", &region)]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("# vtk DataFile Version 3.0\n"));
        assert!(text.contains("POINTS 4 double"));
        assert!(text.contains("CELLS 2 8"));
        assert!(text.contains("CELL_TYPES 2"));
        assert!(text.contains("VECTORS h double"));
        assert!(text.contains("SCALARS region double 1"));
    }
}
