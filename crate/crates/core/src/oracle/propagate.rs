//! Time evolution under `H + V`, `V_j = -F·(R_j - r_ref)`, by Chebyshev
//! expansion of `e^{-i(H+V)dt}` on each step.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::oracle::bessel::bessel_j_sequence;
use crate::oracle::lattice::SiteLattice;
use crate::oracle::packet::{center_of_mass, WavePacket};
use crate::semiclassics::ForceSpec;

/// Allowed change of the norm over a run.
pub const NORM_DRIFT_LIMIT: f64 = 1e-10;
/// Required clearance between the centre of mass and the edge, in widths.
pub const PROPAGATE_CLEARANCE: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PropagationConfig {
    pub force: ForceSpec,
    pub t_final: f64,
    pub dt: f64,
    /// Record the centre of mass every this many steps (and at the end).
    pub sample_every: usize,
}

impl PropagationConfig {
    pub fn new(force: ForceSpec, t_final: f64, dt: f64) -> Result<Self> {
        if !(t_final >= 0.0 && t_final.is_finite() && dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("need t_final >= 0 and dt > 0, got {t_final}, {dt}")));
        }
        Ok(PropagationConfig { force, t_final, dt, sample_every: 1 })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComSample {
    pub t: f64,
    pub r: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropagationResult {
    pub packet: WavePacket,
    pub com: Vec<ComSample>,
    pub norm_drift: f64,
    /// Closest approach of the centre of mass to the edge.
    pub min_boundary_distance: f64,
    pub steps: usize,
    pub chebyshev_order: usize,
}

/// Chebyshev coefficients `c_n J_n(a dt)` with `c_0 = 1`, `c_n = 2(-i)^n`,
/// truncated once the terms fall below machine precision.
fn chebyshev_coefficients(a_dt: f64) -> Vec<Complex64> {
    let n_max = (a_dt.ceil() as usize) * 2 + 40;
    let j = bessel_j_sequence(a_dt, n_max);
    let mut last = 0;
    for (n, v) in j.iter().enumerate() {
        if n as f64 > a_dt && v.abs() < 1e-17 {
            break;
        }
        last = n;
    }
    let mut minus_i = Complex64::new(1.0, 0.0);
    (0..=last)
        .map(|n| {
            let c = if n == 0 { Complex64::new(1.0, 0.0) } else { minus_i * 2.0 };
            minus_i *= Complex64::new(0.0, -1.0);
            c * j[n]
        })
        .collect()
}

/// Evolves `packet` for `cfg.t_final`, checking unitarity and edge clearance.
pub fn propagate_packet(
    lattice: &SiteLattice,
    packet: &WavePacket,
    cfg: &PropagationConfig,
) -> Result<PropagationResult> {
    if packet.amplitudes.len() != lattice.len() {
        return Err(Error::InvalidParameter("packet does not belong to this lattice".into()));
    }
    let f = cfg.force.parallel();
    let fm = cfg.force.magnitude;
    let potential: Vec<f64> = lattice
        .sites
        .iter()
        .map(|s| -fm * (f[0] * (s.position[0] - packet.origin[0]) + f[1] * (s.position[1] - packet.origin[1])))
        .collect();
    let (lo, hi) = lattice.spectral_bounds(Some(&potential));
    // Pad the interval so rounding cannot push eigenvalues outside [-1, 1].
    let half = 0.5 * (hi - lo) * (1.0 + 1e-9) + 1e-12;
    let mid = 0.5 * (hi + lo);
    let steps = ((cfg.t_final / cfg.dt) - 1e-9).ceil().max(0.0) as usize;
    let h = if steps > 0 { cfg.t_final / steps as f64 } else { 0.0 };
    let coeffs = chebyshev_coefficients(half * h);
    let global = Complex64::from_polar(1.0, -mid * h);
    // Scaled operator (H + V - mid) / half.
    let scaled: Vec<f64> = potential.iter().map(|v| v - mid).collect();
    let n = lattice.len();
    let mut psi = packet.amplitudes.clone();
    let (mut t_prev, mut t_cur, mut t_next, mut acc) = (
        vec![Complex64::default(); n],
        vec![Complex64::default(); n],
        vec![Complex64::default(); n],
        vec![Complex64::default(); n],
    );
    let apply_scaled = |x: &[Complex64], y: &mut [Complex64]| {
        lattice.apply(x, Some(&scaled), y);
        y.iter_mut().for_each(|v| *v /= half);
    };

    let required = PROPAGATE_CLEARANCE * packet.sigma;
    let mut com = Vec::new();
    let mut min_dist = f64::INFINITY;
    let mut record = |t: f64, psi: &[Complex64], com: &mut Vec<ComSample>| -> Result<()> {
        let p = WavePacket { amplitudes: psi.to_vec(), ..packet.clone() };
        let r = center_of_mass(lattice, &p);
        let d = lattice.boundary_distance(r);
        min_dist = min_dist.min(d);
        com.push(ComSample { t, r });
        if d < required {
            return Err(Error::BoundaryContact { t, distance: d, required });
        }
        Ok(())
    };
    record(0.0, &psi, &mut com)?;
    let norm0: f64 = psi.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();

    for step in 0..steps {
        t_prev.copy_from_slice(&psi);
        apply_scaled(&t_prev, &mut t_cur);
        for i in 0..n {
            acc[i] = t_prev[i] * coeffs[0];
        }
        if coeffs.len() > 1 {
            for i in 0..n {
                acc[i] += t_cur[i] * coeffs[1];
            }
        }
        for c in coeffs.iter().skip(2) {
            apply_scaled(&t_cur, &mut t_next);
            for i in 0..n {
                t_next[i] = t_next[i] * 2.0 - t_prev[i];
                acc[i] += t_next[i] * *c;
            }
            std::mem::swap(&mut t_prev, &mut t_cur);
            std::mem::swap(&mut t_cur, &mut t_next);
        }
        for i in 0..n {
            psi[i] = acc[i] * global;
        }
        let t = if step + 1 == steps { cfg.t_final } else { (step + 1) as f64 * h };
        if (step + 1) % cfg.sample_every.max(1) == 0 || step + 1 == steps {
            record(t, &psi, &mut com)?;
        }
    }

    let norm: f64 = psi.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    let drift = (norm - norm0).abs();
    if drift > NORM_DRIFT_LIMIT {
        return Err(Error::NormDrift { drift, limit: NORM_DRIFT_LIMIT });
    }
    Ok(PropagationResult {
        packet: WavePacket { amplitudes: psi, ..packet.clone() },
        com,
        norm_drift: drift,
        min_boundary_distance: min_dist,
        steps,
        chebyshev_order: coeffs.len() - 1,
    })
}
