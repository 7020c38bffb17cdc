//! Analytic source field h_s with curl h_s = j.
//!
//! Each rectangular region carrying a current density j contributes a purely
//! vertical field h_s = (0, H) with H(x, y) = j · clamp(x − x₀, 0, x₁ − x₀)
//! for y inside the region's vertical band, so ∂H/∂x = j exactly inside the
//! rectangle and 0 elsewhere. Bands are half-open [y₀, y₁) so that vertically
//! stacked regions never double-count a shared horizontal boundary.

use crate::material::Vec2;
use crate::mesh::{GeometrySpec, Rect};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Band {
    rect: Rect,
    j: f64,
}

/// The analytic source field of all current-carrying regions.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SourceSpec {
    bands: Vec<Band>,
}

impl SourceSpec {
    pub fn from_regions(geometry: &GeometrySpec, currents: &BTreeMap<u32, f64>) -> Self {
        let mut bands = Vec::new();
        for r in &geometry.regions {
            if let Some(&j) = currents.get(&r.tag) {
                if j != 0.0 {
                    bands.push(Band { rect: r.rect, j });
                }
            }
        }
        SourceSpec { bands }
    }

    pub fn is_empty(&self) -> bool {
        self.bands.is_empty()
    }

    /// h_s at a point.
    pub fn eval(&self, p: Vec2) -> Vec2 {
        let mut hy = 0.0;
        for b in &self.bands {
            if p.y >= b.rect.y0 && p.y < b.rect.y1 {
                hy += b.j * (p.x - b.rect.x0).clamp(0.0, b.rect.x1 - b.rect.x0);
            }
        }
        Vec2::new(0.0, hy)
    }
}
