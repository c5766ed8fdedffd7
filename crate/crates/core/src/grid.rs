//! Regular k-space grids and scalar fields sampled on them.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{KPoint, B1, B2};

/// Axis-aligned k-window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Window {
    pub kx_min: f64,
    pub kx_max: f64,
    pub ky_min: f64,
    pub ky_max: f64,
}

impl Window {
    pub fn new(kx_min: f64, kx_max: f64, ky_min: f64, ky_max: f64) -> Result<Self> {
        let ok = [kx_min, kx_max, ky_min, ky_max].iter().all(|v| v.is_finite()) && kx_max > kx_min && ky_max > ky_min;
        if !ok {
            return Err(Error::InvalidParameter(format!(
                "window must satisfy kx0 < kx1 and ky0 < ky1, got {kx_min},{kx_max},{ky_min},{ky_max}"
            )));
        }
        Ok(Window { kx_min, kx_max, ky_min, ky_max })
    }

    /// Bounding box of the first Brillouin-zone hexagon with a 10% margin.
    pub fn brillouin_zone() -> Self {
        let kx = 1.1 * KPoint::K.kx;
        let ky = 1.1 * 2.0 * std::f64::consts::PI / 3.0;
        Window { kx_min: -kx, kx_max: kx, ky_min: -ky, ky_max: ky }
    }

    pub fn centered(c: KPoint, half_x: f64, half_y: f64) -> Self {
        Window { kx_min: c.kx - half_x, kx_max: c.kx + half_x, ky_min: c.ky - half_y, ky_max: c.ky + half_y }
    }
}

/// Nodes `origin + i·step_a + j·step_b` for `i < na`, `j < nb`.
///
/// Storage order is `j * na + i`, so rectangular grids are written row by
/// row in ky with kx varying fastest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KGrid {
    pub origin: KPoint,
    pub step_a: KPoint,
    pub step_b: KPoint,
    pub na: usize,
    pub nb: usize,
}

impl KGrid {
    pub fn rect(window: Window, nx: usize, ny: usize) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(Error::InvalidParameter(format!("grid needs at least 2x2 nodes, got {nx}x{ny}")));
        }
        Ok(KGrid {
            origin: KPoint::new(window.kx_min, window.ky_min),
            step_a: KPoint::new((window.kx_max - window.kx_min) / (nx - 1) as f64, 0.0),
            step_b: KPoint::new(0.0, (window.ky_max - window.ky_min) / (ny - 1) as f64),
            na: nx,
            nb: ny,
        })
    }

    /// `n × n` plaquettes tiling the cell spanned by b1, b2 from `origin`.
    /// The closing edge is included, giving `(n + 1)²` nodes.
    pub fn primitive_cell(origin: KPoint, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParameter(format!("cell grid needs n >= 2, got {n}")));
        }
        let s = 1.0 / n as f64;
        Ok(KGrid { origin, step_a: B1 * s, step_b: B2 * s, na: n + 1, nb: n + 1 })
    }

    pub fn len(&self) -> usize {
        self.na * self.nb
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.na + i
    }

    pub fn node(&self, i: usize, j: usize) -> KPoint {
        self.origin + self.step_a * i as f64 + self.step_b * j as f64
    }

    pub fn node_at(&self, index: usize) -> KPoint {
        self.node(index % self.na, index / self.na)
    }

    /// Signed area of one grid cell (positive for a counter-clockwise basis).
    pub fn signed_cell_area(&self) -> f64 {
        self.step_a.kx * self.step_b.ky - self.step_a.ky * self.step_b.kx
    }

    /// Grid of plaquette centres.
    pub fn plaquette_centers(&self) -> KGrid {
        KGrid { origin: self.origin + (self.step_a + self.step_b) * 0.5, na: self.na - 1, nb: self.nb - 1, ..*self }
    }

    /// Evaluates `f` at every node in parallel; output is in storage order.
    pub fn map<T, F>(&self, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(KPoint) -> T + Sync,
    {
        (0..self.len()).into_par_iter().map(|idx| f(self.node_at(idx))).collect()
    }

    /// Spacing used to judge sub-grid tolerances.
    pub fn max_spacing(&self) -> f64 {
        self.step_a.norm().max(self.step_b.norm())
    }
}

/// What a [`CurvatureGrid`] holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GridKind {
    Exact,
    TwoBand,
    Plaquette,
    Mapped,
    RelativeError,
    Displacement,
    Dispersion,
}

/// Scalar field on a [`KGrid`]. Nodes flagged invalid hold NaN and are
/// skipped by every reduction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvatureGrid {
    pub grid: KGrid,
    pub kind: GridKind,
    pub values: Vec<f64>,
    pub valid: Vec<bool>,
}

impl CurvatureGrid {
    pub fn from_results(grid: KGrid, kind: GridKind, values: Vec<Option<f64>>) -> Self {
        let valid: Vec<bool> = values.iter().map(|v| v.is_some()).collect();
        let values = values.into_iter().map(|v| v.unwrap_or(f64::NAN)).collect();
        CurvatureGrid { grid, kind, values, valid }
    }

    pub fn invalid_count(&self) -> usize {
        self.valid.iter().filter(|v| !**v).count()
    }

    pub fn iter_valid(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.values.iter().zip(&self.valid).enumerate().filter(|(_, (_, ok))| **ok).map(|(i, (v, _))| (i, *v))
    }

    pub fn max(&self) -> Option<(usize, f64)> {
        self.iter_valid().fold(None, |acc, (i, v)| match acc {
            Some((_, best)) if best >= v => acc,
            _ => Some((i, v)),
        })
    }

    pub fn min(&self) -> Option<(usize, f64)> {
        self.iter_valid().fold(None, |acc, (i, v)| match acc {
            Some((_, best)) if best <= v => acc,
            _ => Some((i, v)),
        })
    }

    /// Deterministic sum of the valid values.
    pub fn sum(&self) -> f64 {
        let v: Vec<f64> = self.iter_valid().map(|(_, v)| v).collect();
        pairwise_sum(&v)
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        let idx = self.grid.index(i, j);
        self.valid[idx].then(|| self.values[idx])
    }
}

/// Fixed-shape tree reduction; the result does not depend on thread count.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    const LEAF: usize = 64;
    if v.len() <= LEAF {
        return v.iter().sum();
    }
    let (a, b) = v.split_at(v.len() / 2);
    if v.len() > 1 << 14 {
        let (x, y) = rayon::join(|| pairwise_sum(a), || pairwise_sum(b));
        x + y
    } else {
        pairwise_sum(a) + pairwise_sum(b)
    }
}

/// Area of the reciprocal primitive cell.
pub fn reciprocal_cell_area() -> f64 {
    B1.kx * B2.ky - B1.ky * B2.kx
}

/// Vertices of the first Brillouin-zone hexagon, counter-clockwise from K.
pub fn brillouin_zone_hexagon() -> [KPoint; 6] {
    let r = KPoint::K.kx;
    let mut out = [KPoint::GAMMA; 6];
    for (n, p) in out.iter_mut().enumerate() {
        let a = n as f64 * std::f64::consts::PI / 3.0;
        *p = KPoint::new(r * a.cos(), r * a.sin());
    }
    out
}
