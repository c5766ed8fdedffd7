//! Berry connection and curvature of the two-band honeycomb model.
//!
//! Sign convention: curvature is positive at K for `Δ > 0` in the upper
//! band. The closed forms, the `h·σ` formula and the plaquette field all
//! follow it. The connection returned by [`berry_connection`] is
//! `i⟨u|∇u⟩` in the fixed gauge; its curl is the *negative* of the
//! curvature in this convention.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{pairwise_sum, CurvatureGrid, GridKind, KGrid};
use crate::model::{bond_difference, BandIndex, KPoint, LatticeModel, A1, A2, DEGENERACY_TOL, SQRT3};

/// Below this `|f|²` the strained closed form loses more than ~1e-12 of
/// relative accuracy to cancellation and the `h·σ` formula is used instead.
const STRAINED_FORM_MIN_F2: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConnectionVector {
    pub ax: f64,
    pub ay: f64,
}

/// Which closed form to evaluate on a grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CurvatureFormula {
    /// Biased form for unstrained models, strained form otherwise.
    Exact,
    TwoBand,
}

fn check_gap(model: &LatticeModel, k: KPoint) -> Result<f64> {
    let e = model.abs_energy(k);
    if e < DEGENERACY_TOL {
        return Err(Error::DegeneratePoint { kx: k.kx, ky: k.ky });
    }
    Ok(e)
}

/// `sin²(β/2) = (|ε| - Δ) / (2|ε|)`, evaluated without cancellation.
fn sin2_half_beta(delta: f64, abs_f2: f64, abs_eps: f64) -> f64 {
    if delta > 0.0 {
        abs_f2 / (2.0 * abs_eps * (abs_eps + delta))
    } else {
        (abs_eps - delta) / (2.0 * abs_eps)
    }
}

/// `A_α = -α sin²(β/2) ∇θ`, with `∇θ = -Im(f* ∇f) / |f|²`.
pub fn berry_connection(model: &LatticeModel, k: KPoint, band: BandIndex) -> Result<ConnectionVector> {
    let f = model.structure_factor(k);
    let abs_f2 = f.norm_sqr();
    if abs_f2.sqrt() <= DEGENERACY_TOL {
        return Err(Error::UndefinedPhase { kx: k.kx, ky: k.ky, abs_f: abs_f2.sqrt() });
    }
    let g = model.structure_factor_gradient(k);
    let grad_theta = [-(f.conj() * g[0]).im / abs_f2, -(f.conj() * g[1]).im / abs_f2];
    let abs_eps = abs_f2.sqrt().hypot(model.delta());
    let w = -band.sign() * sin2_half_beta(model.delta(), abs_f2, abs_eps);
    Ok(ConnectionVector { ax: w * grad_theta[0], ay: w * grad_theta[1] })
}

/// `Ω = α √3 Δ |ε|⁻³ sin(k·d23/2) sin(k·d31/2) sin(k·d12/2)` for the
/// unstrained lattice.
pub fn curvature_biased_exact(model: &LatticeModel, k: KPoint, band: BandIndex) -> Result<f64> {
    if !model.is_unstrained() {
        return Err(Error::RequiresUnstrained(model.strain()));
    }
    let e = check_gap(model, k)?;
    let s = |i, j| (0.5 * k.dot(bond_difference(i, j))).sin();
    Ok(band.sign() * SQRT3 * model.delta() / (e * e * e) * s(1, 2) * s(2, 0) * s(0, 1))
}

/// Brace of the strained closed form, shared by both prefactor signs.
fn strained_brace(x: f64, k: KPoint) -> f64 {
    let (s12, c12) = k.dot(bond_difference(0, 1)).sin_cos();
    let (s23, c23) = k.dot(bond_difference(1, 2)).sin_cos();
    let (s31, c31) = k.dot(bond_difference(2, 0)).sin_cos();
    let first = (-SQRT3 * s12 + 0.5 * SQRT3 * x * s23 + 0.5 * SQRT3 * x * s31)
        * ((1.0 - x * x) + c12 - 0.5 * x * c31 - 0.5 * x * c23);
    let second = 0.75 * SQRT3 * x * x * (-s23 + s31) * (c31 - c23);
    first - second
}

/// Strained closed form with prefactor `-αΔ / (2|ε|³|f|²)`.
///
/// This has the opposite overall sign to [`curvature_two_band`] and is kept
/// only for comparison; use [`curvature_strained_exact`].
pub fn curvature_strained_negated(model: &LatticeModel, k: KPoint, band: BandIndex) -> Result<f64> {
    let e = check_gap(model, k)?;
    let f2 = model.squared_structure_factor(k);
    if f2.sqrt() <= DEGENERACY_TOL {
        return Err(Error::UndefinedPhase { kx: k.kx, ky: k.ky, abs_f: f2.sqrt() });
    }
    Ok(-band.sign() * model.delta() / (2.0 * e * e * e * f2) * strained_brace(model.strain(), k))
}

/// Strained closed form with prefactor `+αΔ / (2|ε|³|f|²)`.
///
/// Near zeros of `f` the brace and `|f|²` vanish together; there the
/// `h·σ` formula is returned instead.
pub fn curvature_strained_exact(model: &LatticeModel, k: KPoint, band: BandIndex) -> Result<f64> {
    let e = check_gap(model, k)?;
    let f2 = model.squared_structure_factor(k);
    if f2 < STRAINED_FORM_MIN_F2 {
        return curvature_two_band(model, k, band);
    }
    Ok(band.sign() * model.delta() / (2.0 * e * e * e * f2) * strained_brace(model.strain(), k))
}

/// `Ω = α h·(∂x h × ∂y h) / (2|h|³)` with `h = (Re f, -Im f, Δ)`.
pub fn curvature_two_band(model: &LatticeModel, k: KPoint, band: BandIndex) -> Result<f64> {
    let e = check_gap(model, k)?;
    let g = model.structure_factor_gradient(k);
    let triple = model.delta() * (g[0] * g[1].conj()).im;
    Ok(band.sign() * triple / (2.0 * e * e * e))
}

/// Eq.-level closed form appropriate to the model's strain.
pub fn curvature_exact(model: &LatticeModel, k: KPoint, band: BandIndex) -> Result<f64> {
    if model.is_unstrained() {
        curvature_biased_exact(model, k, band)
    } else {
        curvature_strained_exact(model, k, band)
    }
}

/// Closed-form curvature on every node; degenerate nodes are marked invalid.
pub fn curvature_grid(model: &LatticeModel, band: BandIndex, grid: &KGrid, formula: CurvatureFormula) -> CurvatureGrid {
    let (kind, values) = match formula {
        CurvatureFormula::Exact => (GridKind::Exact, grid.map(|k| curvature_exact(model, k, band).ok())),
        CurvatureFormula::TwoBand => (GridKind::TwoBand, grid.map(|k| curvature_two_band(model, k, band).ok())),
    };
    CurvatureGrid::from_results(*grid, kind, values)
}

/// Band energy on every node.
pub fn dispersion_grid(model: &LatticeModel, band: BandIndex, grid: &KGrid) -> CurvatureGrid {
    CurvatureGrid::from_results(*grid, GridKind::Dispersion, grid.map(|k| Some(model.dispersion(k, band))))
}

/// Lattice-gauge curvature: for each plaquette, the phase of the product of
/// normalised overlaps around it divided by its signed area. Values sit on
/// the plaquette-centre grid.
pub fn curvature_plaquette(model: &LatticeModel, band: BandIndex, grid: &KGrid) -> Result<CurvatureGrid> {
    let states = grid.map(|k| model.bloch_state(k, band).map(|s| s.spinor));
    let mut spinors = Vec::with_capacity(states.len());
    for (index, s) in states.into_iter().enumerate() {
        match s {
            Ok(s) => spinors.push(s),
            Err(_) => {
                let k = grid.node_at(index);
                return Err(Error::DegenerateNode { index, kx: k.kx, ky: k.ky });
            }
        }
    }
    plaquette_field(grid, &spinors)
}

/// Plaquette curvature from externally supplied node spinors (in grid
/// storage order). Any node-wise phase convention gives the same field.
pub fn plaquette_field(grid: &KGrid, spinors: &[[Complex64; 2]]) -> Result<CurvatureGrid> {
    if spinors.len() != grid.len() {
        return Err(Error::InvalidParameter(format!("{} spinors for {} nodes", spinors.len(), grid.len())));
    }
    if grid.na < 3 || grid.nb < 3 {
        return Err(Error::InvalidParameter("plaquette grid needs at least 3x3 nodes".into()));
    }
    let link = |p: usize, q: usize| {
        let (a, b) = (&spinors[p], &spinors[q]);
        let z = a[0].conj() * b[0] + a[1].conj() * b[1];
        z / z.norm()
    };
    let area = grid.signed_cell_area();
    let centers = grid.plaquette_centers();
    let values: Vec<Option<f64>> = centers.map_indexed(|i, j| {
        let n00 = grid.index(i, j);
        let n10 = grid.index(i + 1, j);
        let n11 = grid.index(i + 1, j + 1);
        let n01 = grid.index(i, j + 1);
        let w = link(n00, n10) * link(n10, n11) * link(n11, n01) * link(n01, n00);
        let phase = w.arg();
        phase.is_finite().then_some(phase / area)
    });
    Ok(CurvatureGrid::from_results(centers, GridKind::Plaquette, values))
}

impl KGrid {
    pub(crate) fn map_indexed<T: Send, F: Fn(usize, usize) -> T + Sync>(&self, f: F) -> Vec<T> {
        use rayon::prelude::*;
        let na = self.na;
        (0..self.len()).into_par_iter().map(|idx| f(idx % na, idx / na)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChernNumber {
    pub value: i64,
    /// Plaquette phase sum divided by 2π.
    pub raw: f64,
}

/// Integer Chern number from a plaquette field tiling one primitive cell.
pub fn chern_number(field: &CurvatureGrid) -> Result<ChernNumber> {
    if field.kind != GridKind::Plaquette {
        return Err(Error::NotACell(format!("expected a plaquette field, got {:?}", field.kind)));
    }
    let g = &field.grid;
    let span_a = g.step_a * g.na as f64;
    let span_b = g.step_b * g.nb as f64;
    // Integer coordinates of the spanning vectors in the (b1, b2) basis.
    let coords = |v: KPoint| [v.dot(A1) / std::f64::consts::TAU, v.dot(A2) / std::f64::consts::TAU];
    let (ca, cb) = (coords(span_a), coords(span_b));
    let integral = ca.iter().chain(&cb).all(|c| (c - c.round()).abs() < 1e-9);
    let det = ca[0].round() * cb[1].round() - ca[1].round() * cb[0].round();
    if !integral || det.abs() != 1.0 {
        return Err(Error::NotACell(format!("spanning vectors have reciprocal coordinates {ca:?}, {cb:?}")));
    }
    if field.invalid_count() > 0 {
        return Err(Error::NotACell(format!("{} plaquettes are undefined", field.invalid_count())));
    }
    let area = g.signed_cell_area();
    let phases: Vec<f64> = field.values.iter().map(|v| v * area).collect();
    let raw = pairwise_sum(&phases) / std::f64::consts::TAU;
    let value = raw.round();
    if (raw - value).abs() > 1e-6 {
        return Err(Error::NonIntegerChern(raw));
    }
    Ok(ChernNumber { value: value as i64, raw })
}
