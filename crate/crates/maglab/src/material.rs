//! Isotropic anhysteretic material laws.
//!
//! Every law is a scalar coenergy profile w̃*(s) with s = |h|, from which the
//! vector relations follow: b = w̃*′(|h|)·h/|h|, the differential permeability
//! tensor ∂b/∂h, and the inverse map h(b) used by the vector-potential
//! formulation. Strong convexity and Lipschitz bounds (γ, L) are certified
//! per law so the Newton solvers can rely on SPD Jacobians.

use thiserror::Error;

/// Vacuum permeability μ₀ = 4π·10⁻⁷ H/m.
pub const MU0: f64 = 4.0e-7 * std::f64::consts::PI;

/// Relative tolerance for the scalar root-find in `field_from_flux`.
const INVERT_REL_TOL: f64 = 1e-12;

/// s_min = SMIN_FACTOR · h_scale: below this magnitude the h/|h| direction is
/// replaced by the linearization b ≈ w̃*′′(0⁺)·h (removable singularity).
const SMIN_FACTOR: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum MaterialError {
    #[error("field magnitude must be non-negative, got {0}")]
    NegativeMagnitude(f64),
    #[error("non-finite input component")]
    NonFinite,
    #[error("B-H table needs at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("B-H table must start at (0, 0), got ({0}, {1})")]
    MissingOrigin(f64, f64),
    #[error("B-H table not strictly increasing in {column} between samples {index} and {}", index + 1)]
    NonMonotone { column: &'static str, index: usize },
    #[error("non-finite B-H sample at index {0}")]
    NonFiniteSample(usize),
    #[error("law is not strongly convex: slope {gamma} ≤ 0 on interval {interval}")]
    NotStronglyConvex { gamma: f64, interval: String },
    #[error("extrapolation slope mu_ext = {0} must be positive")]
    BadExtrapolation(f64),
    #[error("law parameter out of range: {0}")]
    BadParameter(String),
}

/// Plane vector; carries h (A/m) or b (T) components depending on context.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    /// z-component of the cross product, the 2D "scalar cross".
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn scale(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl std::ops::Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl std::ops::Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

/// Symmetric 2×2 tensor, e.g. the differential permeability ∂b/∂h.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymTensor2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl SymTensor2 {
    pub fn isotropic(a: f64) -> Self {
        SymTensor2 { xx: a, xy: 0.0, yy: a }
    }

    pub fn apply(&self, v: Vec2) -> Vec2 {
        Vec2::new(self.xx * v.x + self.xy * v.y, self.xy * v.x + self.yy * v.y)
    }

    /// Eigenvalues in ascending order (always real for symmetric tensors).
    pub fn eigenvalues(&self) -> (f64, f64) {
        let mean = 0.5 * (self.xx + self.yy);
        let r = (0.25 * (self.xx - self.yy).powi(2) + self.xy * self.xy).sqrt();
        (mean - r, mean + r)
    }
}

/// Sampled B-H curve through the origin, strictly increasing in both columns.
/// Interpolated piecewise linearly; coenergy is its exact piecewise-quadratic
/// integral (cached cumulative values at the knots).
#[derive(Debug, Clone, PartialEq)]
pub struct BHTable {
    h: Vec<f64>,
    b: Vec<f64>,
    /// w̃*(h_i): cumulative trapezoid integral of b over h, exact for the
    /// piecewise-linear interpolant.
    w: Vec<f64>,
}

impl BHTable {
    pub fn new(samples: &[(f64, f64)]) -> Result<Self, MaterialError> {
        if samples.len() < 2 {
            return Err(MaterialError::TooFewSamples(samples.len()));
        }
        if samples[0] != (0.0, 0.0) {
            return Err(MaterialError::MissingOrigin(samples[0].0, samples[0].1));
        }
        for (i, &(h, b)) in samples.iter().enumerate() {
            if !h.is_finite() || !b.is_finite() {
                return Err(MaterialError::NonFiniteSample(i));
            }
        }
        for i in 0..samples.len() - 1 {
            if samples[i + 1].0 <= samples[i].0 {
                return Err(MaterialError::NonMonotone { column: "h", index: i });
            }
            if samples[i + 1].1 <= samples[i].1 {
                return Err(MaterialError::NonMonotone { column: "b", index: i });
            }
        }
        let h: Vec<f64> = samples.iter().map(|s| s.0).collect();
        let b: Vec<f64> = samples.iter().map(|s| s.1).collect();
        let mut w = vec![0.0; h.len()];
        for i in 1..h.len() {
            w[i] = w[i - 1] + 0.5 * (b[i - 1] + b[i]) * (h[i] - h[i - 1]);
        }
        Ok(BHTable { h, b, w })
    }

    pub fn len(&self) -> usize {
        self.h.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h.is_empty()
    }

    pub fn samples(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.h.iter().copied().zip(self.b.iter().copied())
    }

    /// Index of the segment [h_i, h_{i+1}] containing s, or len-1 if beyond.
    fn segment(&self, s: f64) -> usize {
        match self.h.binary_search_by(|x| x.partial_cmp(&s).unwrap()) {
            Ok(i) => i.min(self.h.len() - 2),
            Err(0) => 0,
            Err(i) => (i - 1).min(self.h.len() - 2),
        }
    }

    fn slope(&self, seg: usize) -> f64 {
        (self.b[seg + 1] - self.b[seg]) / (self.h[seg + 1] - self.h[seg])
    }
}

/// Material law kinds. All are isotropic and expressed through the scalar
/// coenergy profile w̃*(s); see module docs.
#[derive(Debug, Clone, PartialEq)]
pub enum MaterialLaw {
    /// w̃*(s) = μ/2·s², constant permeability.
    Linear { mu: f64 },
    /// w̃*′(s) = μ₀·s + (2 b_s/π)·atan(s/h₀): smooth saturation at flux b_s
    /// with knee scale h₀. Closed-form derivatives and coenergy.
    AtanSaturation { mu0: f64, b_s: f64, h0: f64 },
    /// Piecewise-linear b(h) from a sample table; beyond the last sample the
    /// slope is the constant `mu_ext` (keeps Lipschitz/convexity bounds global).
    Tabulated { table: BHTable, mu_ext: f64 },
}

impl MaterialLaw {
    /// Shipped default nonlinear law: smooth atan saturation with
    /// μ₀ = 4π·10⁻⁷ H/m, b_s = 1.8 T, h₀ = 500 A/m.
    pub fn default_nonlinear() -> Self {
        MaterialLaw::AtanSaturation { mu0: MU0, b_s: 1.8, h0: 500.0 }
    }

    /// Characteristic field magnitude: sets the s_min linearization cutoff.
    pub fn h_scale(&self) -> f64 {
        match self {
            MaterialLaw::Linear { .. } => 1.0,
            MaterialLaw::AtanSaturation { h0, .. } => *h0,
            MaterialLaw::Tabulated { table, .. } => table.h[1],
        }
    }

    /// Magnitude below which the law is evaluated in linearized form.
    pub fn s_min(&self) -> f64 {
        SMIN_FACTOR * self.h_scale()
    }

    /// Coenergy density w̃*(s) in J/m³.
    pub fn coenergy(&self, s: f64) -> Result<f64, MaterialError> {
        if s < 0.0 {
            return Err(MaterialError::NegativeMagnitude(s));
        }
        Ok(match self {
            MaterialLaw::Linear { mu } => 0.5 * mu * s * s,
            MaterialLaw::AtanSaturation { mu0, b_s, h0 } => {
                // ∫ atan(t/h₀) dt = s·atan(s/h₀) − (h₀/2)·ln(1 + s²/h₀²)
                let u = s / h0;
                0.5 * mu0 * s * s
                    + (2.0 * b_s / std::f64::consts::PI)
                        * (s * u.atan() - 0.5 * h0 * u.mul_add(u, 1.0).ln())
            }
            MaterialLaw::Tabulated { table, mu_ext } => {
                let n = table.len() - 1;
                if s >= table.h[n] {
                    let t = s - table.h[n];
                    table.w[n] + table.b[n] * t + 0.5 * mu_ext * t * t
                } else {
                    let seg = table.segment(s);
                    let t = s - table.h[seg];
                    table.w[seg] + table.b[seg] * t + 0.5 * table.slope(seg) * t * t
                }
            }
        })
    }

    /// w̃*′(s) = |b| at field magnitude s.
    pub fn dcoenergy(&self, s: f64) -> f64 {
        match self {
            MaterialLaw::Linear { mu } => mu * s,
            MaterialLaw::AtanSaturation { mu0, b_s, h0 } => {
                mu0 * s + (2.0 * b_s / std::f64::consts::PI) * (s / h0).atan()
            }
            MaterialLaw::Tabulated { table, mu_ext } => {
                let n = table.len() - 1;
                if s >= table.h[n] {
                    table.b[n] + mu_ext * (s - table.h[n])
                } else {
                    let seg = table.segment(s);
                    table.b[seg] + table.slope(seg) * (s - table.h[seg])
                }
            }
        }
    }

    /// w̃*′′(s); for tabulated laws the right slope at knots.
    pub fn d2coenergy(&self, s: f64) -> f64 {
        match self {
            MaterialLaw::Linear { mu } => *mu,
            MaterialLaw::AtanSaturation { mu0, b_s, h0 } => {
                let u = s / h0;
                mu0 + (2.0 * b_s / (std::f64::consts::PI * h0)) / u.mul_add(u, 1.0)
            }
            MaterialLaw::Tabulated { table, mu_ext } => {
                let n = table.len() - 1;
                if s >= table.h[n] {
                    *mu_ext
                } else {
                    table.slope(table.segment(s))
                }
            }
        }
    }

    /// Chord (secant) permeability w̃*′(s)/s, with the s → 0 limit w̃*′′(0⁺).
    pub fn chord_permeability(&self, s: f64) -> f64 {
        if s < self.s_min() {
            self.d2coenergy(0.0)
        } else {
            self.dcoenergy(s) / s
        }
    }

    /// b = ∂_h w*(h) = w̃*′(|h|)·h/|h|; linearized below s_min.
    pub fn flux_from_field(&self, h: Vec2) -> Vec2 {
        h.scale(self.chord_permeability(h.norm()))
    }

    /// Jacobian ∂b/∂h: w̃*′′(s)·P_h + (w̃*′(s)/s)·(I − P_h) with P_h = h⊗h/s².
    /// SPD with eigenvalues in [γ, L]; isotropic w̃*′′(0⁺)·I below s_min.
    pub fn differential_permeability(&self, h: Vec2) -> SymTensor2 {
        let s = h.norm();
        if s < self.s_min() {
            return SymTensor2::isotropic(self.d2coenergy(0.0));
        }
        let along = self.d2coenergy(s);
        let across = self.dcoenergy(s) / s;
        let (nx, ny) = (h.x / s, h.y / s);
        SymTensor2 {
            xx: across + (along - across) * nx * nx,
            xy: (along - across) * nx * ny,
            yy: across + (along - across) * ny * ny,
        }
    }

    /// Inverse law h(b): solves w̃*′(s) = |b| for s (monotone scalar equation)
    /// and returns s·b/|b|. Exact for linear and tabulated kinds; guarded
    /// Newton/bisection to relative 1e-12 otherwise.
    pub fn field_from_flux(&self, b: Vec2) -> Result<Vec2, MaterialError> {
        if !b.is_finite() {
            return Err(MaterialError::NonFinite);
        }
        let m = b.norm();
        let bmin = self.dcoenergy(self.s_min());
        if m <= bmin {
            // Linearized regime: invert b = w̃*′′(0⁺)·h.
            return Ok(b.scale(1.0 / self.d2coenergy(0.0)));
        }
        let s = match self {
            MaterialLaw::Linear { mu } => m / mu,
            MaterialLaw::Tabulated { table, mu_ext } => {
                // Piecewise-linear profile inverts exactly per segment.
                let n = table.len() - 1;
                if m >= table.b[n] {
                    table.h[n] + (m - table.b[n]) / mu_ext
                } else {
                    let seg = match table.b.binary_search_by(|x| x.partial_cmp(&m).unwrap()) {
                        Ok(i) => i.min(n - 1),
                        Err(0) => 0,
                        Err(i) => (i - 1).min(n - 1),
                    };
                    table.h[seg] + (m - table.b[seg]) / table.slope(seg)
                }
            }
            MaterialLaw::AtanSaturation { mu0, .. } => {
                // Root of f(s) = w̃*′(s) − m. f′ ≥ μ₀ > 0 and w̃*′(s) ≥ μ₀ s
                // bracket the root in [0, m/μ₀].
                let mut lo = 0.0_f64;
                let mut hi = m / mu0;
                let mut s = hi;
                for _ in 0..200 {
                    let f = self.dcoenergy(s) - m;
                    if f > 0.0 {
                        hi = s;
                    } else {
                        lo = s;
                    }
                    let step = f / self.d2coenergy(s);
                    let mut next = s - step;
                    if !(next > lo && next < hi) {
                        next = 0.5 * (lo + hi); // Newton left the bracket: bisect
                    }
                    if (next - s).abs() <= INVERT_REL_TOL * next.abs() {
                        s = next;
                        break;
                    }
                    s = next;
                }
                s
            }
        };
        Ok(b.scale(s / m))
    }

    /// Jacobian ∂h/∂b of the inverse law at b — the inverse tensor of
    /// `differential_permeability` evaluated at h(b): 1/w̃*′′(s) along b and
    /// s/|b| across it; isotropic 1/w̃*′′(0⁺) in the linearized regime.
    pub fn inverse_differential_permeability(&self, b: Vec2) -> Result<SymTensor2, MaterialError> {
        if !b.is_finite() {
            return Err(MaterialError::NonFinite);
        }
        let m = b.norm();
        if m <= self.dcoenergy(self.s_min()) {
            return Ok(SymTensor2::isotropic(1.0 / self.d2coenergy(0.0)));
        }
        let s = self.field_from_flux(b)?.norm();
        let along = 1.0 / self.d2coenergy(s);
        let across = s / m;
        let (nx, ny) = (b.x / m, b.y / m);
        Ok(SymTensor2 {
            xx: across + (along - across) * nx * nx,
            xy: (along - across) * nx * ny,
            yy: across + (along - across) * ny * ny,
        })
    }

    /// Tightest (γ, L) with γ|u−v|² ≤ ⟨flux(u)−flux(v), u−v⟩ and
    /// |flux(u)−flux(v)| ≤ L|u−v|: the extrema of w̃*′′ over [0, ∞),
    /// including the extrapolation region. Fails unless γ > 0.
    pub fn certify(&self) -> Result<(f64, f64), MaterialError> {
        let (gamma, ell) = match self {
            MaterialLaw::Linear { mu } => {
                if *mu <= 0.0 {
                    return Err(MaterialError::NotStronglyConvex {
                        gamma: *mu,
                        interval: "constant slope".into(),
                    });
                }
                (*mu, *mu)
            }
            MaterialLaw::AtanSaturation { mu0, b_s, h0 } => {
                if *h0 <= 0.0 {
                    return Err(MaterialError::BadParameter(format!("h0 = {h0} must be positive")));
                }
                if *b_s < 0.0 {
                    return Err(MaterialError::BadParameter(format!(
                        "b_s = {b_s} must be non-negative"
                    )));
                }
                // w̃*′′ decreases monotonically from μ₀ + 2b_s/(πh₀) at s = 0 to μ₀.
                let ell = mu0 + 2.0 * b_s / (std::f64::consts::PI * h0);
                if *mu0 <= 0.0 {
                    return Err(MaterialError::NotStronglyConvex {
                        gamma: *mu0,
                        interval: "s → ∞ limit".into(),
                    });
                }
                (*mu0, ell)
            }
            MaterialLaw::Tabulated { table, mu_ext } => {
                if *mu_ext <= 0.0 {
                    return Err(MaterialError::BadExtrapolation(*mu_ext));
                }
                let mut gamma = *mu_ext;
                let mut ell = *mu_ext;
                let mut worst = (f64::INFINITY, String::new());
                for seg in 0..table.len() - 1 {
                    let sl = table.slope(seg);
                    if sl < worst.0 {
                        worst = (sl, format!("[{}, {}]", table.h[seg], table.h[seg + 1]));
                    }
                    gamma = gamma.min(sl);
                    ell = ell.max(sl);
                }
                if gamma <= 0.0 {
                    return Err(MaterialError::NotStronglyConvex {
                        gamma: worst.0,
                        interval: worst.1,
                    });
                }
                (gamma, ell)
            }
        };
        Ok((gamma, ell))
    }

    /// Dual (energy) density w(b) = sup_h [h·b − w*(h)], via the inverse law.
    pub fn energy_from_flux(&self, b: Vec2) -> Result<f64, MaterialError> {
        let h = self.field_from_flux(b)?;
        Ok(h.dot(b) - self.coenergy(h.norm())?)
    }
}
