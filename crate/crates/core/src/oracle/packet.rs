use std::f64::consts::TAU;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::model::{BandIndex, KPoint, LatticeModel, B1, B2, NN_VECTORS};
use crate::oracle::lattice::{SiteLattice, Sublattice};

/// Smallest packet width accepted by [`prepare_packet`].
pub const MIN_SIGMA: f64 = 3.0;
/// Required clearance between the packet centre and the edge, in widths.
pub const PREPARE_CLEARANCE: f64 = 5.0;

#[derive(Debug, Clone, PartialEq)]
pub struct WavePacket {
    pub amplitudes: Vec<Complex64>,
    pub sigma: f64,
    /// Centre the packet was prepared at.
    pub origin: [f64; 2],
}

impl WavePacket {
    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// Gaussian envelope of width `sigma` around `center`, carrying the
/// plane wave `e^{ik0·R}` and the band spinor on each sublattice.
pub fn prepare_packet(
    lattice: &SiteLattice,
    model: &LatticeModel,
    band: BandIndex,
    k0: KPoint,
    center: [f64; 2],
    sigma: f64,
) -> Result<WavePacket> {
    if !(sigma >= MIN_SIGMA && sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!("packet width must be >= {MIN_SIGMA}, got {sigma}")));
    }
    let distance = lattice.boundary_distance(center);
    let required = PREPARE_CLEARANCE * sigma;
    if distance < required {
        return Err(Error::TooCloseToBoundary { distance, required });
    }
    let spinor = model.bloch_state(-k0, band)?.spinor;
    let mut amplitudes: Vec<Complex64> = lattice
        .sites
        .iter()
        .map(|s| {
            let dx = s.position[0] - center[0];
            let dy = s.position[1] - center[1];
            let env = (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp();
            let phase = Complex64::from_polar(env, k0.dot(s.position));
            phase * spinor[matches!(s.sublattice, Sublattice::B) as usize]
        })
        .collect();
    let n = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    amplitudes.iter_mut().for_each(|a| *a /= n);
    Ok(WavePacket { amplitudes, sigma, origin: center })
}

/// `Σ_j |ψ_j|² R_j` (the packet is assumed normalised).
pub fn center_of_mass(lattice: &SiteLattice, packet: &WavePacket) -> [f64; 2] {
    let mut r = [0.0; 2];
    let mut w = 0.0;
    for (s, a) in lattice.sites.iter().zip(&packet.amplitudes) {
        let p = a.norm_sqr();
        r[0] += p * s.position[0];
        r[1] += p * s.position[1];
        w += p;
    }
    [r[0] / w, r[1] / w]
}

/// `⟨ψ|H|ψ⟩` for the lattice Hamiltonian without external potential.
pub fn energy_expectation(lattice: &SiteLattice, packet: &WavePacket) -> f64 {
    let mut h = vec![Complex64::new(0.0, 0.0); lattice.len()];
    lattice.apply(&packet.amplitudes, None, &mut h);
    packet.amplitudes.iter().zip(&h).map(|(a, b)| (a.conj() * b).re).sum()
}

/// Sublattice amplitudes Fourier-transformed over cells, `c_s(k_mn) =
/// Σ_R ψ_s(R + τ_s) e^{-ik·(R + τ_s)}` with `k_mn = (m/n1) b1 + (n/n2) b2`.
struct Spectrum {
    a: Vec<Complex64>,
    b: Vec<Complex64>,
    n1: usize,
    n2: usize,
}

impl Spectrum {
    fn new(lattice: &SiteLattice, packet: &WavePacket) -> Self {
        let (n1, n2) = (lattice.n1, lattice.n2);
        let mut a: Vec<Complex64> = (0..n1 * n2).map(|c| packet.amplitudes[2 * c]).collect();
        let mut b: Vec<Complex64> = (0..n1 * n2).map(|c| packet.amplitudes[2 * c + 1]).collect();
        fft2(&mut a, n1, n2);
        fft2(&mut b, n1, n2);
        let mut s = Spectrum { a, b, n1, n2 };
        for m in 0..n1 {
            for n in 0..n2 {
                let k = s.k(m, n);
                s.b[m * n2 + n] *= Complex64::from_polar(1.0, -k.dot(NN_VECTORS[2]));
            }
        }
        s
    }

    fn k(&self, m: usize, n: usize) -> KPoint {
        B1 * (m as f64 / self.n1 as f64) + B2 * (n as f64 / self.n2 as f64)
    }
}

/// Row-major `n1 × n2` forward transform, `Σ x e^{-2πi(mi/n1 + nj/n2)}`.
fn fft2(data: &mut [Complex64], n1: usize, n2: usize) {
    let mut planner = FftPlanner::new();
    let rows = planner.plan_fft_forward(n2);
    for row in data.chunks_mut(n2) {
        rows.process(row);
    }
    let cols = planner.plan_fft_forward(n1);
    let mut col = vec![Complex64::new(0.0, 0.0); n1];
    for j in 0..n2 {
        for i in 0..n1 {
            col[i] = data[i * n2 + j];
        }
        cols.process(&mut col);
        for i in 0..n1 {
            data[i * n2 + j] = col[i];
        }
    }
}

/// Power-weighted mean crystal momentum of the A-sublattice amplitudes,
/// each transform point taken at its reciprocal-lattice image nearest to
/// `reference`.
pub fn mean_momentum(lattice: &SiteLattice, packet: &WavePacket, reference: KPoint) -> KPoint {
    let s = Spectrum::new(lattice, packet);
    let mut acc = KPoint::GAMMA;
    let mut w = 0.0;
    for m in 0..s.n1 {
        for n in 0..s.n2 {
            let p = s.a[m * s.n2 + n].norm_sqr();
            let k = nearest_image(s.k(m, n), reference);
            acc = acc + k * p;
            w += p;
        }
    }
    acc * (1.0 / w)
}

fn nearest_image(k: KPoint, reference: KPoint) -> KPoint {
    let d = k - reference;
    let c1 = (d.dot(crate::model::A1) / TAU).round();
    let c2 = (d.dot(crate::model::A2) / TAU).round();
    let mut best = k - B1 * c1 - B2 * c2;
    for di in -1..=1 {
        for dj in -1..=1 {
            let cand = k - B1 * (c1 + di as f64) - B2 * (c2 + dj as f64);
            if (cand - reference).norm() < (best - reference).norm() {
                best = cand;
            }
        }
    }
    best
}

/// Weight of the packet in band `band`, resolved in k.
pub fn band_purity(lattice: &SiteLattice, model: &LatticeModel, packet: &WavePacket, band: BandIndex) -> f64 {
    let s = Spectrum::new(lattice, packet);
    let mut inside = 0.0;
    let mut total = 0.0;
    for m in 0..s.n1 {
        for n in 0..s.n2 {
            let i = m * s.n2 + n;
            let c = [s.a[i], s.b[i]];
            let weight = c[0].norm_sqr() + c[1].norm_sqr();
            total += weight;
            let k = s.k(m, n);
            let proj = match model.bloch_state(-k, band) {
                Ok(u) => (u.spinor[0].conj() * c[0] + u.spinor[1].conj() * c[1]).norm_sqr(),
                // Degenerate point: split the weight evenly.
                Err(_) => 0.5 * weight,
            };
            inside += proj;
        }
    }
    inside / total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::lattice::build_finite_lattice;

    fn setup(n: usize) -> (LatticeModel, SiteLattice) {
        let m = LatticeModel::biased(0.1).unwrap();
        let l = build_finite_lattice(&m, n, n).unwrap();
        (m, l)
    }

    #[test]
    fn normalised_and_centred() {
        let (m, l) = setup(40);
        let c = l.center();
        let p = prepare_packet(&l, &m, BandIndex::Upper, KPoint::new(0.4, 0.1), c, 5.0).unwrap();
        assert!((p.norm() - 1.0).abs() < 1e-12);
        let com = center_of_mass(&l, &p);
        assert!((com[0] - c[0]).hypot(com[1] - c[1]) < 0.2);
    }

    #[test]
    fn com_is_translation_covariant() {
        let (m, l) = setup(50);
        let c = l.center();
        let k0 = KPoint::new(0.6, -0.2);
        let a = prepare_packet(&l, &m, BandIndex::Upper, k0, c, 4.0).unwrap();
        let shifted = [c[0] + crate::model::A1[0], c[1] + crate::model::A1[1]];
        let b = prepare_packet(&l, &m, BandIndex::Upper, k0, shifted, 4.0).unwrap();
        let (ra, rb) = (center_of_mass(&l, &a), center_of_mass(&l, &b));
        assert!((rb[0] - ra[0] - crate::model::A1[0]).abs() < 1e-6);
        assert!((rb[1] - ra[1] - crate::model::A1[1]).abs() < 1e-6);
    }

    #[test]
    fn single_site_com() {
        let (_, l) = setup(4);
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); l.len()];
        amplitudes[9] = Complex64::new(0.0, 1.0);
        let p = WavePacket { amplitudes, sigma: 3.0, origin: [0.0, 0.0] };
        assert_eq!(center_of_mass(&l, &p), l.sites[9].position);
    }

    #[test]
    fn rejects_narrow_or_edge_packets() {
        let (m, l) = setup(40);
        let c = l.center();
        assert!(prepare_packet(&l, &m, BandIndex::Upper, KPoint::GAMMA, c, 2.0).is_err());
        assert!(matches!(
            prepare_packet(&l, &m, BandIndex::Upper, KPoint::GAMMA, [c[0], 10.0], 5.0),
            Err(Error::TooCloseToBoundary { .. })
        ));
    }

    #[test]
    fn energy_momentum_and_purity() {
        let (m, l) = setup(80);
        let k0 = KPoint::K * 0.5;
        for band in [BandIndex::Upper, BandIndex::Lower] {
            let p = prepare_packet(&l, &m, band, k0, l.center(), 10.0).unwrap();
            let e = energy_expectation(&l, &p);
            assert!((e - m.dispersion(k0, band)).abs() < 0.02, "{e}");
            let k = mean_momentum(&l, &p, k0);
            assert!((k - k0).norm() < 0.005, "{k:?}");
            assert!(band_purity(&l, &m, &p, band) > 0.99);
            assert!(band_purity(&l, &m, &p, band.other()) < 0.01);
        }
    }
}
