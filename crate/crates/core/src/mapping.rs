//! Forward/backward difference measurement of the Berry curvature, maps of
//! the mapped curvature over the zone, and the strain scans.
//!
//! A packet starts at `(r0, k0)` and is propagated twice for the same time
//! `t`, once under `+F` and once under `-F`. With `ê⊥` the perpendicular of
//! the forward force,
//!
//! ```text
//! Ω_m = (r⁺ - r⁻)·ê⊥ / (2 F t)        ∇ε ≈ (r⁺ + r⁻ - 2 r0) / (2 t)
//! ```

use serde::Serialize;

use crate::berry::{curvature_exact, curvature_grid, dispersion_grid, CurvatureFormula};
use crate::error::{Error, Result};
use crate::grid::{CurvatureGrid, GridKind, KGrid, Window};
use crate::model::{high_symmetry_path, BandIndex, KPoint, LatticeModel, A1, A2, B1, B2};
use crate::quadrature;
use crate::semiclassics::{propagate_endpoint, BandField, ForceSpec, ModelBand};

/// Relative errors are only formed where `|Ω_exact|` reaches this floor.
pub const ERROR_MASK_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProtocolConfig {
    pub force: ForceSpec,
    pub duration: f64,
    pub dt: f64,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig { force: ForceSpec { magnitude: 1.0, angle: 0.0 }, duration: 0.2, dt: 1e-4 }
    }
}

impl ProtocolConfig {
    pub fn new(force: ForceSpec, duration: f64, dt: f64) -> Result<Self> {
        let cfg = ProtocolConfig { force, duration, dt };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.force.magnitude > 0.0 && self.force.magnitude.is_finite()) {
            return Err(Error::InvalidParameter(format!("protocol needs F > 0, got {}", self.force.magnitude)));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::InvalidParameter(format!("protocol needs t > 0, got {}", self.duration)));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("protocol needs dt > 0, got {}", self.dt)));
        }
        Ok(())
    }

    /// Half-length `F t` of the k-segment swept by the two runs.
    pub fn reach(&self) -> f64 {
        self.force.magnitude * self.duration
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Measurement {
    pub omega_m: f64,
    pub grad_eps: [f64; 2],
    /// `(r⁺ - r⁻)·ê⊥`.
    pub displacement: f64,
    pub r_plus: [f64; 2],
    pub r_minus: [f64; 2],
}

/// Two independent propagations from `k0` at the origin, under `±F`.
pub fn difference_measurement<B: BandField + ?Sized>(
    field: &B,
    k0: KPoint,
    cfg: &ProtocolConfig,
) -> Result<Measurement> {
    cfg.validate()?;
    let r0 = [0.0, 0.0];
    let t = cfg.duration;
    let r_plus = propagate_endpoint(field, k0, r0, cfg.force, t, cfg.dt)?;
    let r_minus = propagate_endpoint(field, k0, r0, cfg.force.reversed(), t, cfg.dt)?;
    let p = cfg.force.perpendicular();
    let displacement = (r_plus[0] - r_minus[0]) * p[0] + (r_plus[1] - r_minus[1]) * p[1];
    let grad_eps =
        [(r_plus[0] + r_minus[0] - 2.0 * r0[0]) / (2.0 * t), (r_plus[1] + r_minus[1] - 2.0 * r0[1]) / (2.0 * t)];
    Ok(Measurement { omega_m: displacement / (2.0 * cfg.force.magnitude * t), grad_eps, displacement, r_plus, r_minus })
}

/// Mean of the closed-form curvature over the segment `k0 ± F t ê∥`, by
/// adaptive quadrature.
pub fn segment_average(model: &LatticeModel, band: BandIndex, k0: KPoint, cfg: &ProtocolConfig) -> Result<f64> {
    let e = cfg.force.parallel();
    let reach = cfg.reach();
    let at = |s: f64| KPoint::new(k0.kx + s * e[0], k0.ky + s * e[1]);
    let failed = std::cell::Cell::new(false);
    let q = quadrature::integrate(
        |s| match curvature_exact(model, at(s), band) {
            Ok(v) => v,
            Err(_) => {
                failed.set(true);
                0.0
            }
        },
        -reach,
        reach,
        1e-13,
        1e-13,
    );
    if failed.get() {
        let k = at(0.0);
        return Err(Error::DegenerateOnPath { kx: k.kx, ky: k.ky });
    }
    Ok(q.value / (2.0 * reach))
}

/// What the protocol reads out beyond the segment average: the part of
/// `∂⊥ε` that is odd along the segment, `(1/(2F²t)) ∫_0^{Ft} [∂⊥ε(k0+sê) - ∂⊥ε(k0-sê)] ds`.
pub fn dispersion_leakage(model: &LatticeModel, band: BandIndex, k0: KPoint, cfg: &ProtocolConfig) -> Result<f64> {
    let e = cfg.force.parallel();
    let p = cfg.force.perpendicular();
    let field = ModelBand { model: *model, band };
    let perp = |s: f64| {
        let k = KPoint::new(k0.kx + s * e[0], k0.ky + s * e[1]);
        field.gradient(k).map(|g| g[0] * p[0] + g[1] * p[1]).unwrap_or(f64::NAN)
    };
    let q = quadrature::integrate(|s| perp(s) - perp(-s), 0.0, cfg.reach(), 1e-13, 1e-13);
    if !q.value.is_finite() {
        return Err(Error::DegenerateOnPath { kx: k0.kx, ky: k0.ky });
    }
    Ok(q.value / (2.0 * cfg.force.magnitude * cfg.force.magnitude * cfg.duration))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeStatus {
    Ok,
    /// Measured, but `|Ω_exact|` is below [`ERROR_MASK_FLOOR`].
    Masked,
    Failed(String),
}

impl NodeStatus {
    pub fn label(&self) -> &'static str {
        match self {
            NodeStatus::Ok => "ok",
            NodeStatus::Masked => "masked",
            NodeStatus::Failed(_) => "failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MappingResult {
    pub config: ProtocolConfig,
    pub mapped: CurvatureGrid,
    pub exact: CurvatureGrid,
    pub relative_error: CurvatureGrid,
    pub displacement: CurvatureGrid,
    pub gradient: Vec<Option<[f64; 2]>>,
    pub status: Vec<NodeStatus>,
}

impl MappingResult {
    pub fn masked_count(&self) -> usize {
        self.status.iter().filter(|s| **s == NodeStatus::Masked).count()
    }

    pub fn failed_count(&self) -> usize {
        self.status.iter().filter(|s| matches!(s, NodeStatus::Failed(_))).count()
    }
}

/// Runs the difference measurement at every node of `grid`.
pub fn map_curvature(
    model: &LatticeModel,
    band: BandIndex,
    cfg: &ProtocolConfig,
    grid: &KGrid,
) -> Result<MappingResult> {
    cfg.validate()?;
    let field = ModelBand { model: *model, band };
    let nodes = grid.map(|k| (difference_measurement(&field, k, cfg), curvature_exact(model, k, band)));
    let n = nodes.len();
    let (mut mapped, mut exact, mut rel, mut disp) =
        (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    let mut gradient = Vec::with_capacity(n);
    let mut status = Vec::with_capacity(n);
    for (m, e) in nodes {
        match (m, e) {
            (Ok(m), Ok(e)) => {
                mapped.push(Some(m.omega_m));
                exact.push(Some(e));
                disp.push(Some(m.displacement));
                gradient.push(Some(m.grad_eps));
                if e.abs() >= ERROR_MASK_FLOOR {
                    rel.push(Some(((m.omega_m - e) / e).abs()));
                    status.push(NodeStatus::Ok);
                } else {
                    rel.push(None);
                    status.push(NodeStatus::Masked);
                }
            }
            (m, e) => {
                let msg = m.err().or(e.err()).map(|e| e.to_string()).unwrap_or_default();
                mapped.push(None);
                exact.push(None);
                rel.push(None);
                disp.push(None);
                gradient.push(None);
                status.push(NodeStatus::Failed(msg));
            }
        }
    }
    Ok(MappingResult {
        config: *cfg,
        mapped: CurvatureGrid::from_results(*grid, GridKind::Mapped, mapped),
        exact: CurvatureGrid::from_results(*grid, GridKind::Exact, exact),
        relative_error: CurvatureGrid::from_results(*grid, GridKind::RelativeError, rel),
        displacement: CurvatureGrid::from_results(*grid, GridKind::Displacement, disp),
        gradient,
        status,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProfileRow {
    pub arc: f64,
    pub k: KPoint,
    pub displacement: f64,
    pub relative_error: Option<f64>,
    pub omega_m: f64,
    pub omega_exact: f64,
}

/// Difference measurement along Γ → K → K′ (`samples` per segment).
pub fn path_profile(
    model: &LatticeModel,
    band: BandIndex,
    cfg: &ProtocolConfig,
    samples: usize,
) -> Result<Vec<ProfileRow>> {
    cfg.validate()?;
    let path = high_symmetry_path(&[KPoint::GAMMA, KPoint::K, KPoint::K_PRIME], samples)?;
    let field = ModelBand { model: *model, band };
    let rows: Vec<Result<ProfileRow>> = {
        use rayon::prelude::*;
        path.par_iter()
            .map(|p| {
                let m = difference_measurement(&field, p.k, cfg)?;
                let e = curvature_exact(model, p.k, band)?;
                Ok(ProfileRow {
                    arc: p.arc,
                    k: p.k,
                    displacement: m.displacement,
                    relative_error: (e.abs() >= ERROR_MASK_FLOOR).then(|| ((m.omega_m - e) / e).abs()),
                    omega_m: m.omega_m,
                    omega_exact: e,
                })
            })
            .collect()
    };
    rows.into_iter().collect()
}

/// Centre of the reciprocal cell used by the strain scans; the zeros of
/// `f` lie on the line `ky = 2π/3` through it.
pub const MERGE_CENTER: KPoint = KPoint { kx: 0.0, ky: 2.0 * std::f64::consts::PI / 3.0 };

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MergeRow {
    pub strain: f64,
    /// Local minima of `|f|` in the cell centred on [`MERGE_CENTER`].
    pub minima: Vec<KPoint>,
    /// kx distance between the two minima; 0 once merged.
    pub separation: f64,
    /// `(4/√3) arccos(x′/2)` for `x′ < 2`, else 0.
    pub closed_form_separation: f64,
    pub min_abs_f: f64,
    /// Smallest upper-band energy, `√(min|f|² + Δ²)`.
    pub band_minimum: f64,
}

fn fold_into_cell(k: KPoint) -> KPoint {
    let d = k - MERGE_CENTER;
    let tau = std::f64::consts::TAU;
    let c1 = d.dot(A1) / tau;
    let c2 = d.dot(A2) / tau;
    let w = |c: f64| c - (c + 0.5).floor();
    MERGE_CENTER + B1 * w(c1) + B2 * w(c2)
}

/// Compass search on a continuous function, from `start` with initial step
/// `step`, until the step falls below `tol`.
fn pattern_search(f: impl Fn(KPoint) -> f64, start: KPoint, mut step: f64, tol: f64) -> KPoint {
    let mut best = start;
    let mut best_val = f(start);
    let dirs = [KPoint::new(1.0, 0.0), KPoint::new(-1.0, 0.0), KPoint::new(0.0, 1.0), KPoint::new(0.0, -1.0)];
    while step > tol {
        let mut moved = false;
        for d in dirs {
            let cand = best + d * step;
            let v = f(cand);
            if v < best_val {
                best = cand;
                best_val = v;
                moved = true;
                break;
            }
        }
        if !moved {
            step *= 0.5;
        }
    }
    best
}

/// Minima of `|f|` over one reciprocal cell, refined from a coarse
/// `resolution²` scan.
pub fn structure_factor_minima(model: &LatticeModel, resolution: usize) -> Result<Vec<KPoint>> {
    if resolution < 4 {
        return Err(Error::InvalidParameter(format!("scan resolution must be >= 4, got {resolution}")));
    }
    let n = resolution;
    let node = |i: usize, j: usize| MERGE_CENTER + B1 * (i as f64 / n as f64 - 0.5) + B2 * (j as f64 / n as f64 - 0.5);
    let abs_f = |k: KPoint| model.structure_factor(k).norm();
    let values: Vec<f64> = (0..n * n).map(|idx| abs_f(node(idx % n, idx / n))).collect();
    let at = |i: isize, j: isize| values[(j.rem_euclid(n as isize) as usize) * n + i.rem_euclid(n as isize) as usize];
    let spacing = B1.norm() / n as f64;
    let mut found: Vec<KPoint> = Vec::new();
    for j in 0..n as isize {
        for i in 0..n as isize {
            let v = at(i, j);
            let is_min = (-1..=1).all(|dj| (-1..=1).all(|di| (di == 0 && dj == 0) || at(i + di, j + dj) >= v));
            if !is_min {
                continue;
            }
            let k = pattern_search(abs_f, node(i as usize, j as usize), spacing, 1e-14);
            let k = fold_into_cell(k);
            if !found.iter().any(|q| (*q - k).norm() < 1e-6) {
                found.push(k);
            }
        }
    }
    found.sort_by(|a, b| a.kx.total_cmp(&b.kx).then(a.ky.total_cmp(&b.ky)));
    Ok(found)
}

/// Locates the Dirac points (gap minima for `Δ ≠ 0`) as the strain varies.
pub fn dirac_merging_scan(delta: f64, strains: &[f64], resolution: usize) -> Result<Vec<MergeRow>> {
    strains
        .iter()
        .map(|&x| {
            let model = LatticeModel::new(delta, x)?;
            let minima = structure_factor_minima(&model, resolution)?;
            let separation = match minima.as_slice() {
                [a, b] if (a.ky - b.ky).abs() < 1e-6 => (a.kx - b.kx).abs(),
                [_] => 0.0,
                _ => {
                    return Err(Error::InvalidParameter(format!(
                        "expected one or two minima of |f| at strain {x}, found {}",
                        minima.len()
                    )))
                }
            };
            let min_abs_f = minima.iter().map(|k| model.structure_factor(*k).norm()).fold(f64::INFINITY, f64::min);
            let closed_form_separation = if x < 2.0 { 4.0 / crate::model::SQRT3 * (0.5 * x).acos() } else { 0.0 };
            Ok(MergeRow {
                strain: x,
                minima,
                separation,
                closed_form_separation,
                min_abs_f,
                band_minimum: min_abs_f.hypot(delta),
            })
        })
        .collect()
}

/// Window used by [`curvature_persistence_report`]: the strip around
/// `ky = 2π/3` holding one K-type and one K′-type corner.
pub fn persistence_window() -> Window {
    Window::centered(MERGE_CENTER, 2.0, 0.9)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Peak {
    pub k: KPoint,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PersistenceEntry {
    pub strain: f64,
    pub dispersion: CurvatureGrid,
    pub curvature: CurvatureGrid,
    pub positive_peak: Peak,
    pub negative_peak: Peak,
    pub peak_separation: f64,
    pub dispersion_minima: Vec<KPoint>,
    pub dispersion_merged: bool,
}

/// Extremum position refined by a parabola through the node and its two
/// neighbours along each grid axis.
fn refine_extremum(g: &CurvatureGrid, index: usize) -> Peak {
    let grid = &g.grid;
    let (i, j) = (index % grid.na, index / grid.na);
    let v0 = g.values[index];
    let offset = |lo: Option<f64>, hi: Option<f64>| match (lo, hi) {
        (Some(l), Some(h)) => {
            let curv = l - 2.0 * v0 + h;
            if curv != 0.0 {
                let o = 0.5 * (l - h) / curv;
                (o.clamp(-0.5, 0.5), v0 - 0.25 * (l - h) * o)
            } else {
                (0.0, v0)
            }
        }
        _ => (0.0, v0),
    };
    let get = |ii: isize, jj: isize| {
        (ii >= 0 && jj >= 0 && (ii as usize) < grid.na && (jj as usize) < grid.nb)
            .then(|| g.get(ii as usize, jj as usize))
            .flatten()
    };
    let (oa, va) = offset(get(i as isize - 1, j as isize), get(i as isize + 1, j as isize));
    let (ob, vb) = offset(get(i as isize, j as isize - 1), get(i as isize, j as isize + 1));
    let k = grid.node(i, j) + grid.step_a * oa + grid.step_b * ob;
    Peak { k, value: va + vb - v0 }
}

/// Upper-band dispersion and curvature on `grid` for each strain, with the
/// curvature extrema and the fate of the Dirac points.
pub fn curvature_persistence_report(delta: f64, strains: &[f64], grid: &KGrid) -> Result<Vec<PersistenceEntry>> {
    if delta == 0.0 {
        return Err(Error::InvalidParameter("curvature persistence needs delta != 0".into()));
    }
    strains
        .iter()
        .map(|&x| {
            let model = LatticeModel::new(delta, x)?;
            let band = BandIndex::Upper;
            let dispersion = dispersion_grid(&model, band, grid);
            let curvature = curvature_grid(&model, band, grid, CurvatureFormula::Exact);
            let (imax, _) = curvature.max().ok_or_else(|| Error::InvalidParameter("empty curvature grid".into()))?;
            let (imin, _) = curvature.min().ok_or_else(|| Error::InvalidParameter("empty curvature grid".into()))?;
            let positive_peak = refine_extremum(&curvature, imax);
            let negative_peak = refine_extremum(&curvature, imin);
            let dispersion_minima = structure_factor_minima(&model, 64)?;
            Ok(PersistenceEntry {
                strain: x,
                peak_separation: (positive_peak.k - negative_peak.k).norm(),
                positive_peak,
                negative_peak,
                dispersion_merged: dispersion_minima.len() == 1,
                dispersion_minima,
                dispersion,
                curvature,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::berry::curvature_biased_exact;
    use crate::model::SQRT3;
    use crate::semiclassics::{FlatBand, UniformCurvature};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn biased() -> LatticeModel {
        LatticeModel::biased(0.1).unwrap()
    }

    #[test]
    fn constant_curvature_is_read_back_exactly() {
        let f = UniformCurvature { base: FlatBand, omega: 3.25 };
        for phi in [0.0, 0.4, 2.0] {
            let cfg = ProtocolConfig::new(ForceSpec::new(1.0, phi).unwrap(), 0.2, 1e-3).unwrap();
            let m = difference_measurement(&f, KPoint::new(0.3, -1.1), &cfg).unwrap();
            assert!((m.omega_m - 3.25).abs() < 1e-12, "{phi}: {}", m.omega_m);
        }
    }

    #[test]
    fn nodal_ray_reads_zero() {
        let phi = PI / 6.0;
        let cfg = ProtocolConfig::new(ForceSpec::new(1.0, phi).unwrap(), 0.2, 1e-4).unwrap();
        let f = ModelBand { model: biased(), band: BandIndex::Upper };
        for s in [0.4, 1.5, 3.0] {
            let k0 = KPoint::new(s * phi.cos(), s * phi.sin());
            assert!(difference_measurement(&f, k0, &cfg).unwrap().omega_m.abs() < 1e-10);
        }
    }

    #[test]
    fn at_k_matches_segment_average() {
        let cfg = ProtocolConfig::default();
        let f = ModelBand { model: biased(), band: BandIndex::Upper };
        let m = difference_measurement(&f, KPoint::K, &cfg).unwrap();
        let avg = segment_average(&biased(), BandIndex::Upper, KPoint::K, &cfg).unwrap();
        assert!((m.omega_m - avg).abs() < 1e-6, "{} vs {avg}", m.omega_m);
        assert!((10.0..=100.0).contains(&m.displacement), "{}", m.displacement);
    }

    #[test]
    fn segment_average_quadrature_against_closed_form_antiderivative_free_check() {
        // On the nodal ray the integrand vanishes identically.
        let cfg = ProtocolConfig::new(ForceSpec::new(1.0, PI / 6.0).unwrap(), 0.2, 1e-4).unwrap();
        let k0 = KPoint::new(0.5 * (PI / 6.0).cos(), 0.5 * (PI / 6.0).sin());
        assert!(segment_average(&biased(), BandIndex::Upper, k0, &cfg).unwrap().abs() < 1e-14);
    }

    #[test]
    fn protocol_equals_average_plus_dispersion_leakage() {
        let m = LatticeModel::new(0.1, 1.3).unwrap();
        let f = ModelBand { model: m, band: BandIndex::Upper };
        let cfg = ProtocolConfig::new(ForceSpec::new(1.0, 0.7).unwrap(), 0.2, 1e-4).unwrap();
        for k0 in [KPoint::new(0.3, 0.9), KPoint::new(-1.7, 0.2), KPoint::new(2.1, -1.4)] {
            let got = difference_measurement(&f, k0, &cfg).unwrap().omega_m;
            let want = segment_average(&m, BandIndex::Upper, k0, &cfg).unwrap()
                + dispersion_leakage(&m, BandIndex::Upper, k0, &cfg).unwrap();
            assert!((got - want).abs() < 1e-8, "{k0:?}: {got} vs {want}");
        }
    }

    #[test]
    fn gradient_estimate_is_second_order_in_reach() {
        let m = biased();
        let f = ModelBand { model: m, band: BandIndex::Upper };
        let k0 = KPoint::new(0.7, -0.4);
        let v = f.gradient(k0).unwrap();
        let err = |t: f64| {
            let cfg = ProtocolConfig::new(ForceSpec::new(1.0, 0.3).unwrap(), t, t / 2000.0).unwrap();
            let g = difference_measurement(&f, k0, &cfg).unwrap().grad_eps;
            (g[0] - v[0]).hypot(g[1] - v[1])
        };
        let ratio = err(0.2) / err(0.02);
        assert!((ratio / 100.0 - 1.0).abs() < 0.1, "{ratio}");
    }

    #[test]
    fn reversing_force_flips_separation_vector_only() {
        let f = ModelBand { model: LatticeModel::new(0.1, 1.5).unwrap(), band: BandIndex::Upper };
        let cfg = ProtocolConfig::new(ForceSpec::new(1.0, 0.9).unwrap(), 0.2, 1e-4).unwrap();
        let rev = ProtocolConfig { force: cfg.force.reversed(), ..cfg };
        let k0 = KPoint::new(1.0, 0.5);
        let a = difference_measurement(&f, k0, &cfg).unwrap();
        let b = difference_measurement(&f, k0, &rev).unwrap();
        let close = |u: [f64; 2], v: [f64; 2]| (u[0] - v[0]).hypot(u[1] - v[1]) < 1e-12;
        assert!(close(a.r_plus, b.r_minus) && close(a.r_minus, b.r_plus));
        // The separation vector r⁺ - r⁻ flips with the force, and so does
        // ê⊥, so the projected displacement and Ω_m are unchanged.
        assert!((a.displacement - b.displacement).abs() < 1e-12);
        assert!((a.omega_m - b.omega_m).abs() < 1e-12 * a.omega_m.abs().max(1.0));
    }

    #[test]
    fn map_is_deterministic_and_masks_small_curvature() {
        let w = Window::brillouin_zone();
        let g = KGrid::rect(w, 21, 21).unwrap();
        let cfg = ProtocolConfig { dt: 1e-3, ..ProtocolConfig::default() };
        let a = map_curvature(&biased(), BandIndex::Upper, &cfg, &g).unwrap();
        let b = map_curvature(&biased(), BandIndex::Upper, &cfg, &g).unwrap();
        let bits = |g: &CurvatureGrid| g.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a.mapped), bits(&b.mapped));
        assert_eq!(bits(&a.relative_error), bits(&b.relative_error));
        assert_eq!(a.status, b.status);
        assert!(a.masked_count() > 0);
        assert_eq!(a.failed_count(), 0);
        for (i, s) in a.status.iter().enumerate() {
            assert_eq!(*s == NodeStatus::Masked, a.exact.values[i].abs() < ERROR_MASK_FLOOR);
            assert_eq!(a.relative_error.valid[i], *s == NodeStatus::Ok);
        }
        // Ω_m is Δr / (2Ft) by definition.
        for (i, d) in a.displacement.iter_valid() {
            assert!((a.mapped.values[i] - d / 0.4).abs() <= 1e-15 * d.abs().max(1.0));
        }
    }

    #[test]
    fn degenerate_paths_are_recorded_per_node() {
        let m = LatticeModel::biased(0.0).unwrap();
        let g = KGrid::rect(Window::centered(KPoint::K, 0.1, 0.1), 3, 3).unwrap();
        let r = map_curvature(&m, BandIndex::Upper, &ProtocolConfig { dt: 1e-3, ..Default::default() }, &g).unwrap();
        assert!(r.failed_count() >= 1);
        assert!(r.mapped.invalid_count() == r.failed_count());
    }

    #[test]
    fn profile_shape() {
        let rows =
            path_profile(&biased(), BandIndex::Upper, &ProtocolConfig { dt: 1e-3, ..Default::default() }, 21).unwrap();
        assert_eq!(rows.len(), 41);
        assert!(rows[0].displacement.abs() < 1e-10);
        assert_eq!(rows[20].k, KPoint::K);
        assert!(rows[20].displacement > 10.0);
        assert!(rows[40].displacement < -10.0);
    }

    #[test]
    fn merging_scan_matches_closed_form() {
        let strains = [0.5, 1.0, 1.5, 1.9, 1.99, 2.0, 2.3];
        let rows = dirac_merging_scan(0.0, &strains, 48).unwrap();
        for r in &rows {
            assert!((r.separation - r.closed_form_separation).abs() < 1e-6, "{r:?}");
            if r.strain < 2.0 {
                assert_eq!(r.minima.len(), 2);
                assert!(r.min_abs_f < 1e-10);
                for k in &r.minima {
                    assert!((k.ky - 2.0 * PI / 3.0).abs() < 1e-8);
                }
            } else {
                assert_eq!(r.minima.len(), 1);
                assert!((r.minima[0] - MERGE_CENTER).norm() < 1e-6);
                assert!((r.min_abs_f - (r.strain - 2.0)).abs() < 1e-10);
            }
        }
        assert!((rows[1].separation - (KPoint::K_PRIME.kx - KPoint::K.kx)).abs() < 1e-8);
        assert!(rows.windows(2).all(|w| w[1].separation <= w[0].separation));
        let kx = 2.0 / SQRT3 * 0.75f64.acos();
        assert!((rows[2].minima[1].kx - kx).abs() < 1e-8);
    }

    #[test]
    fn bias_keeps_minima_and_lifts_gap() {
        let rows = dirac_merging_scan(0.1, &[1.0, 2.5], 32).unwrap();
        assert!((rows[0].band_minimum - 0.1).abs() < 1e-10);
        assert!((rows[1].band_minimum - 0.5f64.hypot(0.1)).abs() < 1e-10);
    }

    #[test]
    fn persistence_at_three_strains() {
        let g = KGrid::rect(persistence_window(), 161, 73).unwrap();
        let report = curvature_persistence_report(0.1, &[1.0, 1.5, 2.0], &g).unwrap();
        let k_like = KPoint::new(-KPoint::K.kx / 2.0, 2.0 * PI / 3.0);
        let kp_like = KPoint::new(KPoint::K.kx / 2.0, 2.0 * PI / 3.0);
        assert!(curvature_biased_exact(&biased(), k_like, BandIndex::Upper).unwrap() > 100.0);
        assert!((report[0].positive_peak.k - k_like).norm() < 0.02);
        assert!((report[0].negative_peak.k - kp_like).norm() < 0.02);
        let gap = |e: &PersistenceEntry| (e.positive_peak.k.kx - e.negative_peak.k.kx).abs();
        assert!(gap(&report[1]) < gap(&report[0]));
        assert!(report[2].peak_separation > 0.1);
        assert!(report[2].dispersion_merged && !report[0].dispersion_merged);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(20))]

        #[test]
        fn mapped_sign_follows_valleys(dx in -0.15..0.15f64, dy in -0.15..0.15f64) {
            let f = ModelBand { model: biased(), band: BandIndex::Upper };
            let cfg = ProtocolConfig { dt: 1e-3, ..Default::default() };
            let near_k = KPoint::new(KPoint::K.kx + dx, dy);
            let near_kp = KPoint::new(-KPoint::K.kx + dx, dy);
            prop_assert!(difference_measurement(&f, near_k, &cfg).unwrap().omega_m > 0.0);
            prop_assert!(difference_measurement(&f, near_kp, &cfg).unwrap().omega_m < 0.0);
        }
    }
}
