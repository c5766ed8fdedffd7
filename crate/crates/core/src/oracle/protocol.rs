//! The forward/backward difference measurement run on the finite flake.

use serde::Serialize;

use crate::error::Result;
use crate::mapping::{difference_measurement, ProtocolConfig};
use crate::model::{BandIndex, KPoint, LatticeModel};
use crate::oracle::lattice::{build_finite_lattice, SiteLattice};
use crate::oracle::packet::{band_purity, prepare_packet};
use crate::oracle::propagate::{propagate_packet, ComSample, PropagationConfig};
use crate::semiclassics::ModelBand;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleConfig {
    pub n1: usize,
    pub n2: usize,
    pub sigma: f64,
    /// Chebyshev step.
    pub dt: f64,
    pub band: BandIndex,
    pub protocol: ProtocolConfig,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            n1: 80,
            n2: 80,
            sigma: 10.0,
            dt: 5e-3,
            band: BandIndex::Upper,
            protocol: ProtocolConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuantumProbe {
    pub k0: KPoint,
    /// `(r⁺ - r⁻)·ê⊥` of the lattice centres of mass.
    pub displacement_quantum: f64,
    pub displacement_semiclassical: f64,
    pub omega_m_quantum: f64,
    pub omega_m_semiclassical: f64,
    /// `|Ω_q - Ω_sc| / |Ω_sc|`.
    pub relative_deviation: f64,
    /// Larger norm drift of the two runs.
    pub norm_drift: f64,
    pub initial_purity: f64,
    /// Weight found in the other band after the runs (larger of the two).
    pub leakage: f64,
}

/// Five probes at distance `radius` around K, the first one on the `-kx` side.
pub fn probe_points(radius: f64) -> Vec<KPoint> {
    (0..5)
        .map(|j| {
            let a = std::f64::consts::PI + std::f64::consts::TAU * j as f64 / 5.0;
            KPoint::new(KPoint::K.kx + radius * a.cos(), radius * a.sin())
        })
        .collect()
}

pub fn oracle_lattice(model: &LatticeModel, cfg: &OracleConfig) -> Result<SiteLattice> {
    build_finite_lattice(model, cfg.n1, cfg.n2)
}

/// Prepares a packet at the flake centre and runs it under `+F` and `-F`.
pub fn quantum_difference_measurement(
    lattice: &SiteLattice,
    model: &LatticeModel,
    cfg: &OracleConfig,
    k0: KPoint,
) -> Result<QuantumProbe> {
    quantum_difference_run(lattice, model, cfg, k0, usize::MAX).map(|r| r.probe)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantumRun {
    pub probe: QuantumProbe,
    pub com_plus: Vec<ComSample>,
    pub com_minus: Vec<ComSample>,
}

/// As [`quantum_difference_measurement`], keeping the centre of mass of
/// both runs every `sample_every` Chebyshev steps.
pub fn quantum_difference_run(
    lattice: &SiteLattice,
    model: &LatticeModel,
    cfg: &OracleConfig,
    k0: KPoint,
    sample_every: usize,
) -> Result<QuantumRun> {
    let p = &cfg.protocol;
    p.validate()?;
    let packet = prepare_packet(lattice, model, cfg.band, k0, lattice.center(), cfg.sigma)?;
    let initial_purity = band_purity(lattice, model, &packet, cfg.band);
    let run = |force| {
        let pc = PropagationConfig {
            sample_every: sample_every.max(1),
            ..PropagationConfig::new(force, p.duration, cfg.dt)?
        };
        propagate_packet(lattice, &packet, &pc)
    };
    let plus = run(p.force)?;
    let minus = run(p.force.reversed())?;
    let (a, b) = (plus.com.last().expect("final sample").r, minus.com.last().expect("final sample").r);
    let e = p.force.perpendicular();
    let displacement_quantum = (a[0] - b[0]) * e[0] + (a[1] - b[1]) * e[1];
    let omega_m_quantum = displacement_quantum / (2.0 * p.force.magnitude * p.duration);
    let sc = difference_measurement(&ModelBand { model: *model, band: cfg.band }, k0, p)?;
    let leakage =
        [&plus, &minus].iter().map(|r| band_purity(lattice, model, &r.packet, cfg.band.other())).fold(0.0, f64::max);
    let probe = QuantumProbe {
        k0,
        displacement_quantum,
        displacement_semiclassical: sc.displacement,
        omega_m_quantum,
        omega_m_semiclassical: sc.omega_m,
        relative_deviation: ((omega_m_quantum - sc.omega_m) / sc.omega_m).abs(),
        norm_drift: plus.norm_drift.max(minus.norm_drift),
        initial_purity,
        leakage,
    };
    Ok(QuantumRun { probe, com_plus: plus.com, com_minus: minus.com })
}
