//! Triangle quadrature in barycentric coordinates.
//!
//! Weights sum to ½, so ∫_T f = 2|T| Σ_q w_q f(ξ_q). The 3-point rule is
//! degree-2 exact, which makes every edge-element mass integral (quadratic
//! integrands) exact. All nonlinear functionals, residuals and Jacobians use
//! this same rule so that the assembled residual is the exact gradient of the
//! assembled energy — the line search depends on that. The 7-point rule is
//! degree-5 exact and is reserved for error metrics between solutions.

/// (λ₀, λ₁, λ₂, weight) rows; weights sum to ½.
pub type QuadRule = &'static [(f64, f64, f64, f64)];

/// Degree-2 rule: edge midpoint images (2/3, 1/6, 1/6), strictly interior.
pub const TRI_3: QuadRule = &[
    (2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0),
    (1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0),
    (1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0),
];

// Radon's degree-5 rule: centroid + two symmetric orbits.
const A1: f64 = 0.059_715_871_789_769_82;
const B1: f64 = 0.470_142_064_105_115_1;
const A2: f64 = 0.797_426_985_353_087_4;
const B2: f64 = 0.101_286_507_323_456_34;
const W0: f64 = 0.9 / 8.0; // 0.1125 = ½·(9/40)
const W1: f64 = 0.066_197_076_394_253_09; // ½·(155+√15)/1200
const W2: f64 = 0.062_969_590_272_413_58; // ½·(155−√15)/1200

/// Degree-5 rule (7 points), for integrating non-polynomial error densities.
pub const TRI_7: QuadRule = &[
    (1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, W0),
    (A1, B1, B1, W1),
    (B1, A1, B1, W1),
    (B1, B1, A1, W1),
    (A2, B2, B2, W2),
    (B2, A2, B2, W2),
    (B2, B2, A2, W2),
];
