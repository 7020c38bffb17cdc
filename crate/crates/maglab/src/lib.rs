//! 2D nonlinear magnetostatics on triangular meshes.
//!
//! Four formulations of the same field problem, sharing one mesh and one
//! material model:
//!
//! * `penalty` — H(curl) edge elements minimizing ∫w*(h) + 1/(2ε)‖curl h − j‖²,
//!   assembled in ε-rescaled form,
//! * `limit` — the decomposed ε = 0 reference system (orthogonality-constrained
//!   curl problem + nodal potential), used as ground truth for ε-sweeps,
//! * `scalar_potential` — reduced potential h = h_s − ∇ψ on P1 elements,
//! * `vector_potential` — nodal a₃ with b = curl a₃ and the inverted law.
//!
//! The `harness` module drives benchmark sweeps verifying the O(ε) convergence
//! of the penalty solutions toward the limit solution.

pub mod fem;
pub mod harness;
pub mod io;
pub mod limit;
pub mod material;
pub mod mesh;
pub mod solve;
pub mod sparse;

pub use material::{MaterialLaw, Vec2, MU0};
pub use mesh::Mesh2D;
