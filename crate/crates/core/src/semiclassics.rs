//! Semiclassical wave-packet dynamics under a uniform force:
//!
//! ```text
//! k(t) = k0 + F t ê∥
//! dr/dt = ∇ε(k) + F Ω(k) ê⊥,     ê⊥ = ẑ × ê∥
//! ```
//!
//! Because k(t) is known in closed form the right-hand side depends on t
//! alone, and classical RK4 collapses to composite Simpson's rule with two
//! field evaluations per step.

use std::f64::consts::{PI, TAU};

use serde::Serialize;

use crate::berry::curvature_two_band;
use crate::error::{Error, Result};
use crate::model::{BandIndex, KPoint, LatticeModel, B1, B2};

/// Allowed change of the final position when the step is halved.
pub const STEP_CHECK_LIMIT: f64 = 1e-6;

/// Uniform force of magnitude `magnitude` along angle `angle` from +x,
/// with the angle kept in `[0, 2π)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ForceSpec {
    pub magnitude: f64,
    pub angle: f64,
}

impl ForceSpec {
    pub fn new(magnitude: f64, angle: f64) -> Result<Self> {
        if !(magnitude.is_finite() && magnitude >= 0.0 && angle.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "force needs finite magnitude >= 0 and finite angle, got {magnitude}, {angle}"
            )));
        }
        Ok(ForceSpec { magnitude, angle: angle.rem_euclid(TAU) })
    }

    pub fn parallel(&self) -> [f64; 2] {
        [self.angle.cos(), self.angle.sin()]
    }

    pub fn perpendicular(&self) -> [f64; 2] {
        [-self.angle.sin(), self.angle.cos()]
    }

    /// Same magnitude, opposite direction. The perpendicular flips too.
    pub fn reversed(&self) -> Self {
        ForceSpec { magnitude: self.magnitude, angle: (self.angle + PI).rem_euclid(TAU) }
    }

    pub fn k_at(&self, k0: KPoint, t: f64) -> KPoint {
        let e = self.parallel();
        let s = self.magnitude * t;
        KPoint::new(k0.kx + s * e[0], k0.ky + s * e[1])
    }
}

/// Band gradient and curvature seen by a packet.
pub trait BandField: Sync {
    fn gradient(&self, k: KPoint) -> Result<[f64; 2]>;
    fn curvature(&self, k: KPoint) -> Result<f64>;
}

/// One band of a [`LatticeModel`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelBand {
    pub model: LatticeModel,
    pub band: BandIndex,
}

impl BandField for ModelBand {
    fn gradient(&self, k: KPoint) -> Result<[f64; 2]> {
        group_velocity(&self.model, k, self.band)
    }

    fn curvature(&self, k: KPoint) -> Result<f64> {
        curvature_two_band(&self.model, k, self.band)
    }
}

/// Dispersion of `base` with a constant curvature `omega`.
#[derive(Debug, Clone, Copy)]
pub struct UniformCurvature<B> {
    pub base: B,
    pub omega: f64,
}

impl<B: BandField> BandField for UniformCurvature<B> {
    fn gradient(&self, k: KPoint) -> Result<[f64; 2]> {
        self.base.gradient(k)
    }

    fn curvature(&self, _k: KPoint) -> Result<f64> {
        Ok(self.omega)
    }
}

/// Dispersionless band with no curvature; a base for synthetic fields.
#[derive(Debug, Clone, Copy, Default)]
pub struct FlatBand;

impl BandField for FlatBand {
    fn gradient(&self, _k: KPoint) -> Result<[f64; 2]> {
        Ok([0.0, 0.0])
    }

    fn curvature(&self, _k: KPoint) -> Result<f64> {
        Ok(0.0)
    }
}

/// `∇ε_α = α Re(f* ∇f) / |ε|`.
pub fn group_velocity(model: &LatticeModel, k: KPoint, band: BandIndex) -> Result<[f64; 2]> {
    let e = model.abs_energy(k);
    if e < crate::model::DEGENERACY_TOL {
        return Err(Error::DegeneratePoint { kx: k.kx, ky: k.ky });
    }
    let f = model.structure_factor(k);
    let g = model.structure_factor_gradient(k);
    let s = band.sign() / e;
    Ok([s * (f.conj() * g[0]).re, s * (f.conj() * g[1]).re])
}

fn velocity<B: BandField + ?Sized>(field: &B, force: &ForceSpec, k0: KPoint, t: f64) -> Result<[f64; 2]> {
    let k = force.k_at(k0, t);
    let on_path = |_| Error::DegenerateOnPath { kx: k.kx, ky: k.ky };
    let g = field.gradient(k).map_err(on_path)?;
    if force.magnitude == 0.0 {
        return Ok(g);
    }
    let w = force.magnitude * field.curvature(k).map_err(on_path)?;
    let p = force.perpendicular();
    Ok([g[0] + w * p[0], g[1] + w * p[1]])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub r: [f64; 2],
    pub k: KPoint,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub force: ForceSpec,
    pub dt: f64,
    pub samples: Vec<TrajectorySample>,
}

impl Trajectory {
    pub fn last(&self) -> &TrajectorySample {
        self.samples.last().expect("trajectory has at least the initial sample")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntegratorOptions {
    pub dt: f64,
    /// Re-run at `dt/2` and fail if the endpoint moves by more than
    /// [`STEP_CHECK_LIMIT`].
    pub check_step: bool,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        IntegratorOptions { dt: 1e-4, check_step: true }
    }
}

fn step_count(t_final: f64, dt: f64) -> Result<usize> {
    if !(t_final.is_finite() && t_final >= 0.0) {
        return Err(Error::InvalidParameter(format!("duration must be finite and >= 0, got {t_final}")));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidParameter(format!("time step must be positive, got {dt}")));
    }
    Ok(((t_final / dt) - 1e-9).ceil().max(0.0) as usize)
}

/// Runs `n` Simpson steps of width `t_final / n`, calling `visit` after each.
fn simpson<B: BandField + ?Sized>(
    field: &B,
    force: &ForceSpec,
    k0: KPoint,
    r0: [f64; 2],
    t_final: f64,
    n: usize,
    mut visit: impl FnMut(f64, [f64; 2]),
) -> Result<[f64; 2]> {
    let mut r = r0;
    if n == 0 {
        return Ok(r);
    }
    let h = t_final / n as f64;
    let mut v0 = velocity(field, force, k0, 0.0)?;
    for i in 0..n {
        let t = i as f64 * h;
        let t1 = if i + 1 == n { t_final } else { (i + 1) as f64 * h };
        let vm = velocity(field, force, k0, 0.5 * (t + t1))?;
        let v1 = velocity(field, force, k0, t1)?;
        let w = (t1 - t) / 6.0;
        for c in 0..2 {
            r[c] += w * (v0[c] + 4.0 * vm[c] + v1[c]);
        }
        v0 = v1;
        visit(t1, r);
    }
    Ok(r)
}

/// Integrates the equations of motion from `(r0, k0)` to `t_final`.
pub fn integrate_eom<B: BandField + ?Sized>(
    field: &B,
    k0: KPoint,
    r0: [f64; 2],
    force: ForceSpec,
    t_final: f64,
    options: IntegratorOptions,
) -> Result<Trajectory> {
    let n = step_count(t_final, options.dt)?;
    let mut samples = Vec::with_capacity(n + 1);
    samples.push(TrajectorySample { t: 0.0, r: r0, k: k0 });
    let end = simpson(field, &force, k0, r0, t_final, n, |t, r| {
        samples.push(TrajectorySample { t, r, k: force.k_at(k0, t) });
    })?;
    if options.check_step && n > 0 {
        let fine = simpson(field, &force, k0, r0, t_final, 2 * n, |_, _| {})?;
        let change = (fine[0] - end[0]).hypot(fine[1] - end[1]);
        if change > STEP_CHECK_LIMIT {
            return Err(Error::StepTooLarge { change, limit: STEP_CHECK_LIMIT });
        }
    }
    Ok(Trajectory { force, dt: options.dt, samples })
}

/// Endpoint only, without storing samples or checking the step.
pub fn propagate_endpoint<B: BandField + ?Sized>(
    field: &B,
    k0: KPoint,
    r0: [f64; 2],
    force: ForceSpec,
    t_final: f64,
    dt: f64,
) -> Result<[f64; 2]> {
    let n = step_count(t_final, dt)?;
    simpson(field, &force, k0, r0, t_final, n, |_, _| {})
}

/// Shortest nonzero reciprocal-lattice vector parallel to `angle`, if one
/// exists with small integer coordinates.
pub fn reciprocal_period(angle: f64) -> Option<f64> {
    let e = [angle.cos(), angle.sin()];
    let mut best: Option<f64> = None;
    for m1 in -6i32..=6 {
        for m2 in -6i32..=6 {
            if m1 == 0 && m2 == 0 {
                continue;
            }
            let g = B1 * m1 as f64 + B2 * m2 as f64;
            let along = g.kx * e[0] + g.ky * e[1];
            let across = g.kx * e[1] - g.ky * e[0];
            if along > 0.0 && across.abs() < 1e-9 * g.norm() {
                best = Some(best.map_or(along, |b: f64| b.min(along)));
            }
        }
    }
    best
}

/// Duration of one sweep in the trajectory suite: one reciprocal period
/// along the force where there is one, else `4π/√3` (the period along x).
pub fn sweep_duration(angle: f64, magnitude: f64) -> f64 {
    let fallback = 4.0 * PI / crate::model::SQRT3;
    reciprocal_period(angle).unwrap_or(fallback) / magnitude
}

/// Force angles of the standard trajectory suite.
pub const SUITE_ANGLES: [f64; 3] = [0.0, PI / 6.0, PI / 4.0];

/// Trajectories from Γ at the origin for each angle in [`SUITE_ANGLES`]
/// with unit force, one sweep each.
pub fn trajectory_suite(model: &LatticeModel, band: BandIndex, dt: f64) -> Result<Vec<Trajectory>> {
    let field = ModelBand { model: *model, band };
    SUITE_ANGLES
        .iter()
        .map(|&phi| {
            let force = ForceSpec::new(1.0, phi)?;
            integrate_eom(
                &field,
                KPoint::GAMMA,
                [0.0, 0.0],
                force,
                sweep_duration(phi, 1.0),
                IntegratorOptions { dt, check_step: true },
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SQRT3;
    use proptest::prelude::*;

    fn field() -> ModelBand {
        ModelBand { model: LatticeModel::biased(0.1).unwrap(), band: BandIndex::Upper }
    }

    #[test]
    fn group_velocity_matches_finite_differences() {
        let m = LatticeModel::new(0.2, 1.4).unwrap();
        for k in [KPoint::new(0.3, 0.7), KPoint::new(-2.0, 1.1)] {
            for band in [BandIndex::Upper, BandIndex::Lower] {
                let v = group_velocity(&m, k, band).unwrap();
                let h = 1e-6;
                let dx = (m.dispersion(k + KPoint::new(h, 0.0), band) - m.dispersion(k - KPoint::new(h, 0.0), band))
                    / (2.0 * h);
                let dy = (m.dispersion(k + KPoint::new(0.0, h), band) - m.dispersion(k - KPoint::new(0.0, h), band))
                    / (2.0 * h);
                assert!((v[0] - dx).abs() < 1e-8 && (v[1] - dy).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn zero_force_is_ballistic() {
        let f = field();
        let k0 = KPoint::new(0.5, 0.2);
        let tr =
            integrate_eom(&f, k0, [0.0, 0.0], ForceSpec::new(0.0, 0.0).unwrap(), 1.0, IntegratorOptions::default())
                .unwrap();
        let v = f.gradient(k0).unwrap();
        let end = tr.last();
        assert_eq!(end.k, k0);
        assert!((end.r[0] - v[0]).abs() < 1e-12 && (end.r[1] - v[1]).abs() < 1e-12);
    }

    #[test]
    fn sweep_along_zero_curvature_ray_stays_on_it() {
        let phi = PI / 6.0;
        let tr = integrate_eom(
            &field(),
            KPoint::GAMMA,
            [0.0, 0.0],
            ForceSpec::new(1.0, phi).unwrap(),
            4.0 * PI / 3.0,
            IntegratorOptions::default(),
        )
        .unwrap();
        for s in &tr.samples {
            let across = -s.r[0] * phi.sin() + s.r[1] * phi.cos();
            assert!(across.abs() < 1e-10, "{s:?}");
        }
    }

    #[test]
    fn sweep_along_x_reverses_transverse_motion() {
        let tr = integrate_eom(
            &field(),
            KPoint::GAMMA,
            [0.0, 0.0],
            ForceSpec::new(1.0, 0.0).unwrap(),
            4.0 * PI / SQRT3,
            IntegratorOptions::default(),
        )
        .unwrap();
        let k_time = KPoint::K.kx;
        let kp_time = KPoint::K_PRIME.kx;
        let y_at = |t: f64| tr.samples.iter().min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs())).unwrap().r[1];
        let h = 0.02;
        assert!(y_at(k_time + h) - y_at(k_time - h) > 0.5);
        assert!(y_at(kp_time + h) - y_at(kp_time - h) < -0.5);
        // Net transverse drift over a full period is the zone integral along
        // the line, which vanishes by the K/K' symmetry.
        assert!(tr.last().r[1].abs() < 1e-8);
    }

    #[test]
    fn k_path_is_closed_form() {
        let force = ForceSpec::new(0.7, 0.3).unwrap();
        let k0 = KPoint::new(0.1, -0.2);
        let tr = integrate_eom(&field(), k0, [0.0, 0.0], force, 2.0, IntegratorOptions { dt: 1e-3, check_step: false })
            .unwrap();
        for s in &tr.samples {
            let want = KPoint::new(k0.kx + 0.7 * s.t * 0.3f64.cos(), k0.ky + 0.7 * s.t * 0.3f64.sin());
            assert!((s.k - want).norm() < 1e-14);
        }
        assert_eq!(tr.last().t, 2.0);
    }

    #[test]
    fn converges_at_fourth_order() {
        let f = field();
        let force = ForceSpec::new(1.0, 0.4).unwrap();
        let k0 = KPoint::new(0.3, 0.1);
        let reference = propagate_endpoint(&f, k0, [0.0, 0.0], force, 2.0, 1e-4).unwrap();
        let err = |dt| {
            let r = propagate_endpoint(&f, k0, [0.0, 0.0], force, 2.0, dt).unwrap();
            (r[0] - reference[0]).hypot(r[1] - reference[1])
        };
        let ratio = err(0.02) / err(0.01);
        assert!((ratio - 16.0).abs() < 2.0, "{ratio}");
    }

    #[test]
    fn coarse_step_is_rejected() {
        let r = integrate_eom(
            &field(),
            KPoint::GAMMA,
            [0.0, 0.0],
            ForceSpec::new(1.0, 0.0).unwrap(),
            3.0,
            IntegratorOptions { dt: 0.1, check_step: true },
        );
        assert!(matches!(r, Err(Error::StepTooLarge { .. })));
    }

    #[test]
    fn degenerate_path_is_reported() {
        let f = ModelBand { model: LatticeModel::biased(0.0).unwrap(), band: BandIndex::Upper };
        let r = integrate_eom(
            &f,
            KPoint::GAMMA,
            [0.0, 0.0],
            ForceSpec::new(1.0, 0.0).unwrap(),
            2.0 * KPoint::K.kx,
            IntegratorOptions { dt: KPoint::K.kx / 1000.0, check_step: false },
        );
        assert!(matches!(r, Err(Error::DegenerateOnPath { .. })));
    }

    #[test]
    fn uniform_curvature_gives_linear_drift() {
        let f = UniformCurvature { base: FlatBand, omega: 2.5 };
        let force = ForceSpec::new(0.5, 1.0).unwrap();
        let plus = propagate_endpoint(&f, KPoint::new(0.2, 0.3), [0.0, 0.0], force, 1.5, 1e-3).unwrap();
        let minus = propagate_endpoint(&f, KPoint::new(0.2, 0.3), [0.0, 0.0], force.reversed(), 1.5, 1e-3).unwrap();
        let p = force.perpendicular();
        let sep = (plus[0] - minus[0]) * p[0] + (plus[1] - minus[1]) * p[1];
        assert!((sep - 2.0 * 0.5 * 2.5 * 1.5).abs() < 1e-12);
    }

    #[test]
    fn suite_periods() {
        assert!((sweep_duration(0.0, 1.0) - 4.0 * PI / SQRT3).abs() < 1e-12);
        assert!((sweep_duration(PI / 6.0, 1.0) - 4.0 * PI / 3.0).abs() < 1e-12);
        assert!(reciprocal_period(PI / 4.0).is_none());
        assert!((sweep_duration(PI / 4.0, 2.0) - 2.0 * PI / SQRT3).abs() < 1e-12);
    }

    #[test]
    fn suite_runs_and_closes_on_commensurate_angles() {
        let m = LatticeModel::biased(0.1).unwrap();
        let suite = trajectory_suite(&m, BandIndex::Upper, 1e-4).unwrap();
        assert_eq!(suite.len(), 3);
        for tr in &suite[..2] {
            let end = tr.last();
            let start = tr.samples[0];
            let g = end.k - start.k;
            let c = [g.dot(crate::model::A1) / (2.0 * PI), g.dot(crate::model::A2) / (2.0 * PI)];
            assert!(c.iter().all(|x| (x - x.round()).abs() < 1e-9));
            assert!(m.abs_energy(end.k) - m.abs_energy(start.k) < 1e-9);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn reversing_force_and_band_mirrors_anomalous_drift(
            kx in -3.0..3.0f64, ky in -3.0..3.0f64, phi in 0.0..std::f64::consts::TAU, d in 0.2..1.0f64
        ) {
            // Upper band under F and lower band under -F share Ω·F but have
            // opposite gradients, so the drifts are exact negatives.
            let m = LatticeModel::biased(d).unwrap();
            let up = ModelBand { model: m, band: BandIndex::Upper };
            let lo = ModelBand { model: m, band: BandIndex::Lower };
            let force = ForceSpec::new(0.8, phi).unwrap();
            let k0 = KPoint::new(kx, ky);
            let a = propagate_endpoint(&up, k0, [0.0, 0.0], force, 0.5, 1e-3).unwrap();
            let b = propagate_endpoint(&lo, k0, [0.0, 0.0], force, 0.5, 1e-3).unwrap();
            let p = force.perpendicular();
            let along = |r: [f64; 2]| r[0] * force.parallel()[0] + r[1] * force.parallel()[1];
            let across = |r: [f64; 2]| r[0] * p[0] + r[1] * p[1];
            prop_assert!((along(a) + along(b)).abs() < 1e-12);
            prop_assert!((across(a) + across(b)).abs() < 1e-12);
        }
    }
}
