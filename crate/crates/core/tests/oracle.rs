use honeycomb_berry::mapping::ProtocolConfig;
use honeycomb_berry::oracle::lattice::build_finite_lattice;
use honeycomb_berry::oracle::protocol::{oracle_lattice, quantum_difference_measurement, OracleConfig};
use honeycomb_berry::oracle::spectrum::{count_in, eigenpairs_in};
use honeycomb_berry::semiclassics::ForceSpec;
use honeycomb_berry::{KPoint, LatticeModel};

#[test]
fn weak_force_packets_follow_semiclassics() {
    let m = LatticeModel::biased(0.1).unwrap();
    let force = 0.03;
    let cfg = OracleConfig {
        dt: 1e-3,
        protocol: ProtocolConfig { force: ForceSpec { magnitude: force, angle: 0.0 }, duration: 0.2 / force, dt: 1e-3 },
        ..OracleConfig::default()
    };
    let lattice = oracle_lattice(&m, &cfg).unwrap();
    let p = quantum_difference_measurement(&lattice, &m, &cfg, KPoint::new(KPoint::K.kx + 0.4, 0.0)).unwrap();
    assert!(p.relative_deviation < 0.15, "{p:?}");
    assert!(p.norm_drift < 1e-10);
    assert!(p.initial_purity > 0.98);
}

#[test]
fn strong_force_reads_far_below_semiclassics() {
    let m = LatticeModel::biased(0.1).unwrap();
    let cfg = OracleConfig::default();
    let lattice = oracle_lattice(&m, &cfg).unwrap();
    let p = quantum_difference_measurement(&lattice, &m, &cfg, KPoint::new(KPoint::K.kx - 0.3, 0.0)).unwrap();
    assert!(p.omega_m_semiclassical > 2.0);
    assert!(p.omega_m_quantum.abs() < 0.5, "{p:?}");
}

#[test]
fn biased_flake_has_no_states_inside_the_gap() {
    let m = LatticeModel::biased(0.1).unwrap();
    let l = build_finite_lattice(&m, 80, 80).unwrap();
    assert_eq!(count_in(&l, -0.08, 0.08).unwrap(), 0);
    assert!(eigenpairs_in(&l, -0.08, 0.08).unwrap().is_empty());
    // The band edges at ±Δ are populated.
    assert!(count_in(&l, 0.1, 0.2).unwrap() > 0);
}
