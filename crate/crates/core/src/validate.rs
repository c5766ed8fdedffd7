//! Self-check suite: closed forms against each other and against the
//! plaquette field, integrator order, the protocol identity, the strain
//! scans and the lattice oracle. Each check reports its own tolerance.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::berry::{
    chern_number, curvature_biased_exact, curvature_plaquette, curvature_strained_exact, curvature_two_band,
};
use crate::error::Result;
use crate::grid::{KGrid, Window};
use crate::mapping::{
    curvature_persistence_report, difference_measurement, dirac_merging_scan, dispersion_leakage, persistence_window,
    segment_average, ProtocolConfig,
};
use crate::model::{BandIndex, KPoint, LatticeModel};
use crate::oracle::protocol::{oracle_lattice, quantum_difference_measurement, OracleConfig};
use crate::semiclassics::{propagate_endpoint, ForceSpec, ModelBand};

/// Deliberate defects used to confirm the suite can fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fault {
    /// Flip the sign of the biased closed form.
    BiasedSign,
}

impl std::str::FromStr for Fault {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "biased-sign" => Ok(Fault::BiasedSign),
            other => Err(format!("unknown fault '{other}' (known: biased-sign)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ValidationOptions {
    pub fault: Option<Fault>,
    /// Include the finite-lattice check (a few seconds).
    pub include_oracle: bool,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        ValidationOptions { fault: None, include_oracle: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub measured: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn below(name: &str, measured: f64, tolerance: f64, detail: impl Into<String>) -> Self {
        CheckResult { name: name.into(), measured, tolerance, passed: measured <= tolerance, detail: detail.into() }
    }

    fn failed(name: &str, tolerance: f64, err: impl std::fmt::Display) -> Self {
        CheckResult { name: name.into(), measured: f64::NAN, tolerance, passed: false, detail: format!("error: {err}") }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub options: ValidationOptions,
    pub checks: Vec<CheckResult>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn random_k(rng: &mut ChaCha8Rng) -> KPoint {
    KPoint::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0))
}

pub fn run_validation(options: ValidationOptions) -> ValidationReport {
    let sign = if options.fault == Some(Fault::BiasedSign) { -1.0 } else { 1.0 };
    let biased_form = |m: &LatticeModel, k: KPoint, b: BandIndex| curvature_biased_exact(m, k, b).map(|v| sign * v);
    let biased = LatticeModel::biased(0.1).expect("valid model");
    let up = BandIndex::Upper;
    let mut checks = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);

    checks.push(match biased_form(&biased, KPoint::K, up) {
        Ok(v) => CheckResult::below("peak value at K", (v - 112.5).abs(), 1e-9, format!("Omega(K) = {v}")),
        Err(e) => CheckResult::failed("peak value at K", 1e-9, e),
    });

    let worst = (0..1000)
        .map(|_| {
            let k = random_k(&mut rng);
            match (biased_form(&biased, k, up), curvature_two_band(&biased, k, up)) {
                (Ok(a), Ok(b)) => (a - b).abs(),
                _ => f64::INFINITY,
            }
        })
        .fold(0.0, f64::max);
    checks.push(CheckResult::below("biased closed form vs two-band", worst, 1e-10, "1000 random k, absolute"));

    let worst = (0..1000)
        .map(|_| {
            let m = LatticeModel::new(rng.gen_range(-0.5..0.5), rng.gen_range(0.5..2.5)).expect("valid model");
            let k = random_k(&mut rng);
            match (curvature_strained_exact(&m, k, up), curvature_two_band(&m, k, up)) {
                (Ok(a), Ok(b)) => (a - b).abs() / b.abs().max(1.0),
                _ => f64::INFINITY,
            }
        })
        .fold(0.0, f64::max);
    checks.push(CheckResult::below(
        "strained closed form vs two-band",
        worst,
        1e-9,
        "1000 random (delta, strain, k), relative",
    ));

    checks.push(plaquette_check(&biased, &biased_form));

    let mut chern_worst: f64 = 0.0;
    let mut chern_detail = String::new();
    for x in [1.0, 1.5, 2.0] {
        for band in [BandIndex::Upper, BandIndex::Lower] {
            let m = LatticeModel::new(0.1, x).expect("valid model");
            let r = KGrid::primitive_cell(KPoint::new(1e-3, -2e-3), 300)
                .and_then(|g| curvature_plaquette(&m, band, &g))
                .and_then(|p| chern_number(&p));
            match r {
                Ok(c) => {
                    chern_worst = chern_worst.max(c.raw.abs() + c.value.abs() as f64);
                    chern_detail += &format!("x'={x} {band:?}: {} ({:.1e}); ", c.value, c.raw);
                }
                Err(e) => {
                    chern_worst = f64::INFINITY;
                    chern_detail += &format!("x'={x} {band:?}: {e}; ");
                }
            }
        }
    }
    checks.push(CheckResult::below("Chern number is zero", chern_worst, 1e-6, chern_detail));

    checks.push(integrator_order_check(&biased));
    checks.push(protocol_identity_check(&biased, &mut rng));
    checks.push(small_time_check(&biased, &biased_form));

    let strains: Vec<f64> = (0..=15).map(|i| 0.5 + 0.1 * i as f64).collect();
    checks.push(match dirac_merging_scan(0.0, &strains, 48) {
        Ok(rows) => {
            let worst = rows.iter().map(|r| (r.separation - r.closed_form_separation).abs()).fold(0.0, f64::max);
            let last = rows.last().map(|r| r.separation).unwrap_or(f64::NAN);
            CheckResult::below(
                "Dirac point separation vs closed form",
                worst,
                1e-4,
                format!("separation at x'=2: {last:e}"),
            )
        }
        Err(e) => CheckResult::failed("Dirac point separation vs closed form", 1e-4, e),
    });

    let grid = KGrid::rect(persistence_window(), 161, 73).expect("valid grid");
    checks.push(match curvature_persistence_report(0.1, &[2.0], &grid) {
        Ok(r) => {
            let e = &r[0];
            CheckResult {
                name: "curvature peaks stay apart at x'=2".into(),
                measured: e.peak_separation,
                tolerance: 0.1,
                passed: e.peak_separation > 0.1 && e.dispersion_merged,
                detail: format!("dispersion minima merged: {}", e.dispersion_merged),
            }
        }
        Err(e) => CheckResult::failed("curvature peaks stay apart at x'=2", 0.1, e),
    });

    if options.include_oracle {
        checks.push(oracle_check(&biased));
    }
    ValidationReport { options, checks }
}

fn plaquette_check(
    model: &LatticeModel,
    biased_form: &impl Fn(&LatticeModel, KPoint, BandIndex) -> Result<f64>,
) -> CheckResult {
    let name = "plaquette field vs biased closed form";
    let n = 1200;
    let r = KGrid::primitive_cell(KPoint::GAMMA, n).and_then(|g| curvature_plaquette(model, BandIndex::Upper, &g));
    match r {
        Ok(p) => {
            let worst = p
                .iter_valid()
                .filter_map(|(i, v)| {
                    let e = biased_form(model, p.grid.node_at(i), BandIndex::Upper).ok()?;
                    (e.abs() > 1e-2).then(|| ((v - e) / e).abs())
                })
                .fold(0.0, f64::max);
            CheckResult::below(name, worst, 1e-3, format!("{n}x{n} cell grid, relative where |Omega| > 1e-2"))
        }
        Err(e) => CheckResult::failed(name, 1e-3, e),
    }
}

fn integrator_order_check(model: &LatticeModel) -> CheckResult {
    let name = "integrator is fourth order";
    let f = ModelBand { model: *model, band: BandIndex::Upper };
    let force = ForceSpec { magnitude: 1.0, angle: 0.4 };
    let k0 = KPoint::new(0.3, 0.1);
    let end = |dt| propagate_endpoint(&f, k0, [0.0, 0.0], force, 2.0, dt);
    match (end(1e-4), end(0.02), end(0.01)) {
        (Ok(r), Ok(a), Ok(b)) => {
            let ratio = (a[0] - r[0]).hypot(a[1] - r[1]) / (b[0] - r[0]).hypot(b[1] - r[1]);
            CheckResult::below(name, (ratio - 16.0).abs(), 2.0, format!("error ratio on halving dt: {ratio:.3}"))
        }
        _ => CheckResult::failed(name, 2.0, "propagation failed"),
    }
}

/// Ω_m against the segment average plus the odd part of ∂⊥ε, both by
/// adaptive quadrature.
fn protocol_identity_check(model: &LatticeModel, rng: &mut ChaCha8Rng) -> CheckResult {
    let name = "protocol identity (with dispersion term)";
    let cfg = ProtocolConfig::default();
    let f = ModelBand { model: *model, band: BandIndex::Upper };
    let w = Window::brillouin_zone();
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let k0 = KPoint::new(rng.gen_range(w.kx_min..w.kx_max), rng.gen_range(w.ky_min..w.ky_max));
        let r = difference_measurement(&f, k0, &cfg).and_then(|m| {
            let want = segment_average(model, BandIndex::Upper, k0, &cfg)?
                + dispersion_leakage(model, BandIndex::Upper, k0, &cfg)?;
            Ok((m.omega_m - want).abs())
        });
        match r {
            Ok(d) => worst = worst.max(d),
            Err(e) => return CheckResult::failed(name, 1e-8, e),
        }
    }
    CheckResult::below(name, worst, 1e-8, "50 random k0, F=1, t=0.2")
}

fn small_time_check(
    model: &LatticeModel,
    biased_form: &impl Fn(&LatticeModel, KPoint, BandIndex) -> Result<f64>,
) -> CheckResult {
    let name = "small-t limit at K";
    let cfg = ProtocolConfig { duration: 0.002, ..ProtocolConfig::default() };
    let f = ModelBand { model: *model, band: BandIndex::Upper };
    match (difference_measurement(&f, KPoint::K, &cfg), biased_form(model, KPoint::K, BandIndex::Upper)) {
        (Ok(m), Ok(e)) => CheckResult::below(name, ((m.omega_m - e) / e).abs(), 1e-3, "t = 0.002, relative"),
        (Err(e), _) | (_, Err(e)) => CheckResult::failed(name, 1e-3, e),
    }
}

/// Lattice packets against the semiclassical protocol in the adiabatic
/// regime (weak force, same k-segment as the default protocol).
fn oracle_check(model: &LatticeModel) -> CheckResult {
    let name = "lattice oracle vs semiclassics (F=0.03)";
    let force = 0.03;
    let cfg = OracleConfig {
        dt: 1e-3,
        protocol: ProtocolConfig { force: ForceSpec { magnitude: force, angle: 0.0 }, duration: 0.2 / force, dt: 1e-3 },
        ..OracleConfig::default()
    };
    let k0 = KPoint::new(KPoint::K.kx + 0.4, 0.0);
    let r = oracle_lattice(model, &cfg).and_then(|l| quantum_difference_measurement(&l, model, &cfg, k0));
    match r {
        Ok(p) => CheckResult {
            name: name.into(),
            measured: p.relative_deviation,
            tolerance: 0.15,
            passed: p.relative_deviation <= 0.15 && p.norm_drift < 1e-10,
            detail: format!(
                "k0 = K + (0.4, 0): quantum {:.4}, semiclassical {:.4}, norm drift {:.1e}",
                p.omega_m_quantum, p.omega_m_semiclassical, p.norm_drift
            ),
        },
        Err(e) => CheckResult::failed(name, 0.15, e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes_and_catches_sign_fault() {
        let quick = ValidationOptions { fault: None, include_oracle: false };
        let ok = run_validation(quick);
        for c in &ok.checks {
            assert!(c.passed, "{c:?}");
        }
        let bad = run_validation(ValidationOptions { fault: Some(Fault::BiasedSign), ..quick });
        assert!(!bad.passed());
        let failed: Vec<_> = bad.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
        assert!(failed.contains(&"peak value at K"));
        assert!(failed.contains(&"plaquette field vs biased closed form"));
    }

    #[test]
    fn fault_names_parse() {
        assert_eq!("biased-sign".parse::<Fault>(), Ok(Fault::BiasedSign));
        assert!("nope".parse::<Fault>().is_err());
    }
}
