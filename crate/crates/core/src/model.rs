//! Two-band tight-binding model of the honeycomb lattice with a sublattice
//! bias and uniaxial strain on one bond direction.
//!
//! Units: energies in the nearest-neighbour transfer amplitude, lengths in
//! the nearest-neighbour distance, wave vectors in the inverse of that.
//!
//! The Bloch Hamiltonian is
//!
//! ```text
//! H(k) = [ Δ      f(k) ]      f(k) = -e^{-ik·δ1} - e^{-ik·δ2} - x' e^{-ik·δ3}
//!        [ f*(k)  -Δ   ]
//! ```
//!
//! and is parametrised as `|ε| (cos β σz + sin β (cos θ σx + sin θ σy))`
//! with `e^{-iθ} = f/|f|`, `cos β = Δ/|ε|`.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};

pub const SQRT3: f64 = 1.732_050_807_568_877_2;

/// Nearest-neighbour vectors δ1, δ2, δ3 (A to B).
pub const NN_VECTORS: [[f64; 2]; 3] = [[SQRT3 / 2.0, 0.5], [-SQRT3 / 2.0, 0.5], [0.0, -1.0]];

/// Bravais vectors a1 = δ1 - δ3, a2 = δ2 - δ3.
pub const A1: [f64; 2] = [SQRT3 / 2.0, 1.5];
pub const A2: [f64; 2] = [-SQRT3 / 2.0, 1.5];

/// Reciprocal vectors dual to [`A1`], [`A2`].
pub const B1: KPoint = KPoint { kx: 2.0 * PI / SQRT3, ky: 2.0 * PI / 3.0 };
pub const B2: KPoint = KPoint { kx: -2.0 * PI / SQRT3, ky: 2.0 * PI / 3.0 };

/// A point counts as Dirac-degenerate when `|ε|` falls below this.
pub const DEGENERACY_TOL: f64 = 1e-12;

/// Bond difference vector d_ij = δ_i - δ_j (zero-based indices).
pub fn bond_difference(i: usize, j: usize) -> [f64; 2] {
    [NN_VECTORS[i][0] - NN_VECTORS[j][0], NN_VECTORS[i][1] - NN_VECTORS[j][1]]
}

/// A wave vector. No Brillouin-zone folding is applied.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct KPoint {
    pub kx: f64,
    pub ky: f64,
}

impl KPoint {
    pub const GAMMA: KPoint = KPoint { kx: 0.0, ky: 0.0 };
    pub const K: KPoint = KPoint { kx: 4.0 * PI / (3.0 * SQRT3), ky: 0.0 };
    /// The inequivalent corner reached after K when sweeping along +kx.
    pub const K_PRIME: KPoint = KPoint { kx: 8.0 * PI / (3.0 * SQRT3), ky: 0.0 };

    pub const fn new(kx: f64, ky: f64) -> Self {
        KPoint { kx, ky }
    }

    pub fn dot(self, v: [f64; 2]) -> f64 {
        self.kx * v[0] + self.ky * v[1]
    }

    pub fn norm(self) -> f64 {
        self.kx.hypot(self.ky)
    }

    pub fn to_array(self) -> [f64; 2] {
        [self.kx, self.ky]
    }
}

impl Add for KPoint {
    type Output = KPoint;
    fn add(self, o: KPoint) -> KPoint {
        KPoint::new(self.kx + o.kx, self.ky + o.ky)
    }
}

impl Sub for KPoint {
    type Output = KPoint;
    fn sub(self, o: KPoint) -> KPoint {
        KPoint::new(self.kx - o.kx, self.ky - o.ky)
    }
}

impl Mul<f64> for KPoint {
    type Output = KPoint;
    fn mul(self, s: f64) -> KPoint {
        KPoint::new(self.kx * s, self.ky * s)
    }
}

impl Neg for KPoint {
    type Output = KPoint;
    fn neg(self) -> KPoint {
        KPoint::new(-self.kx, -self.ky)
    }
}

/// Band label α = ±1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum BandIndex {
    Upper,
    Lower,
}

impl BandIndex {
    pub fn sign(self) -> f64 {
        match self {
            BandIndex::Upper => 1.0,
            BandIndex::Lower => -1.0,
        }
    }

    pub fn from_sign(alpha: i32) -> Result<Self> {
        match alpha {
            1 => Ok(BandIndex::Upper),
            -1 => Ok(BandIndex::Lower),
            other => Err(Error::InvalidParameter(format!("band index must be +1 or -1, got {other}"))),
        }
    }

    pub fn other(self) -> Self {
        match self {
            BandIndex::Upper => BandIndex::Lower,
            BandIndex::Lower => BandIndex::Upper,
        }
    }
}

/// Sublattice bias and strain; the single source of model parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LatticeModel {
    delta: f64,
    strain: f64,
}

/// Parametrisation of H(k) at one wave vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochDecomposition {
    pub f: Complex64,
    pub abs_f: f64,
    /// `None` where `|f|` vanishes and the phase is undefined.
    pub theta: Option<f64>,
    pub beta: f64,
    pub abs_eps: f64,
}

/// Normalised eigenvector of H(k) in the fixed gauge, with its energy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochState {
    pub spinor: [Complex64; 2],
    pub energy: f64,
}

impl LatticeModel {
    pub fn new(delta: f64, strain: f64) -> Result<Self> {
        if !delta.is_finite() {
            return Err(Error::InvalidParameter(format!("delta must be finite, got {delta}")));
        }
        if !(strain.is_finite() && strain > 0.0) {
            return Err(Error::InvalidParameter(format!("strain must be positive, got {strain}")));
        }
        Ok(LatticeModel { delta, strain })
    }

    /// Unstrained lattice with sublattice bias `delta`.
    pub fn biased(delta: f64) -> Result<Self> {
        Self::new(delta, 1.0)
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn strain(&self) -> f64 {
        self.strain
    }

    pub fn is_unstrained(&self) -> bool {
        self.strain == 1.0
    }

    /// Hopping amplitude magnitudes on δ1, δ2, δ3.
    pub fn hoppings(&self) -> [f64; 3] {
        [1.0, 1.0, self.strain]
    }

    pub fn structure_factor(&self, k: KPoint) -> Complex64 {
        let t = self.hoppings();
        NN_VECTORS.iter().zip(t).map(|(d, t)| -t * Complex64::from_polar(1.0, -k.dot(*d))).sum()
    }

    /// ∂f/∂kx, ∂f/∂ky.
    pub fn structure_factor_gradient(&self, k: KPoint) -> [Complex64; 2] {
        let t = self.hoppings();
        let mut g = [Complex64::new(0.0, 0.0); 2];
        for (d, t) in NN_VECTORS.iter().zip(t) {
            let e = Complex64::i() * t * Complex64::from_polar(1.0, -k.dot(*d));
            g[0] += e * d[0];
            g[1] += e * d[1];
        }
        g
    }

    /// |f(k)|² from the complex product.
    pub fn squared_structure_factor(&self, k: KPoint) -> f64 {
        self.structure_factor(k).norm_sqr()
    }

    /// |f(k)|² from the cosine expansion
    /// `2 + x'² + 2cos(k·d12) + 2x' cos(k·d23) + 2x' cos(k·d31)`.
    /// Only used as a cross-check of [`Self::squared_structure_factor`].
    pub fn squared_structure_factor_expansion(&self, k: KPoint) -> f64 {
        let x = self.strain;
        2.0 + x * x
            + 2.0 * k.dot(bond_difference(0, 1)).cos()
            + 2.0 * x * k.dot(bond_difference(1, 2)).cos()
            + 2.0 * x * k.dot(bond_difference(2, 0)).cos()
    }

    pub fn abs_energy(&self, k: KPoint) -> f64 {
        self.structure_factor(k).norm().hypot(self.delta)
    }

    pub fn dispersion(&self, k: KPoint, band: BandIndex) -> f64 {
        band.sign() * self.abs_energy(k)
    }

    pub fn hamiltonian(&self, k: KPoint) -> [[Complex64; 2]; 2] {
        let f = self.structure_factor(k);
        let d = Complex64::new(self.delta, 0.0);
        [[d, f], [f.conj(), -d]]
    }

    pub fn decompose(&self, k: KPoint) -> BlochDecomposition {
        let f = self.structure_factor(k);
        let abs_f = f.norm();
        let abs_eps = abs_f.hypot(self.delta);
        let theta = (abs_f > DEGENERACY_TOL).then(|| {
            let t = -f.arg();
            if t <= -PI {
                t + 2.0 * PI
            } else {
                t
            }
        });
        BlochDecomposition { f, abs_f, theta, beta: abs_f.atan2(self.delta), abs_eps }
    }

    /// Eigenvector in the gauge `(cos β/2, sin β/2 e^{iθ})` for the upper band
    /// and `(-sin β/2 e^{-iθ}, cos β/2)` for the lower band.
    pub fn bloch_state(&self, k: KPoint, band: BandIndex) -> Result<BlochState> {
        let dec = self.decompose(k);
        if dec.abs_eps < DEGENERACY_TOL {
            return Err(Error::DegeneratePoint { kx: k.kx, ky: k.ky });
        }
        let (s, c) = (0.5 * dec.beta).sin_cos();
        let phase = Complex64::from_polar(1.0, dec.theta.unwrap_or(0.0));
        let spinor = match band {
            BandIndex::Upper => [Complex64::new(c, 0.0), phase * s],
            BandIndex::Lower => [-phase.conj() * s, Complex64::new(c, 0.0)],
        };
        Ok(BlochState { spinor, energy: band.sign() * dec.abs_eps })
    }
}

impl BlochDecomposition {
    /// H rebuilt from `|ε|, β, θ`.
    pub fn reconstruct_hamiltonian(&self) -> [[Complex64; 2]; 2] {
        let theta = self.theta.unwrap_or(0.0);
        let (sb, cb) = self.beta.sin_cos();
        let off = Complex64::from_polar(self.abs_eps * sb, -theta);
        let diag = Complex64::new(self.abs_eps * cb, 0.0);
        [[diag, off], [off.conj(), -diag]]
    }
}

/// A sample along a piecewise-linear k-path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PathPoint {
    /// Accumulated path length from the first vertex.
    pub arc: f64,
    pub k: KPoint,
}

/// Evenly spaced points along straight segments joining `vertices`,
/// `samples` points per segment including both ends. Shared vertices are
/// emitted once and the endpoints are exact.
pub fn high_symmetry_path(vertices: &[KPoint], samples: usize) -> Result<Vec<PathPoint>> {
    if samples < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 samples per segment, got {samples}")));
    }
    if vertices.len() < 2 {
        return Err(Error::InvalidParameter("a path needs at least two vertices".into()));
    }
    let mut out = vec![PathPoint { arc: 0.0, k: vertices[0] }];
    let mut arc0 = 0.0;
    for seg in vertices.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        let len = (b - a).norm();
        let last = samples - 1;
        for i in 1..=last {
            let (k, s) = if i == last {
                (b, 1.0)
            } else {
                let s = i as f64 / last as f64;
                (a + (b - a) * s, s)
            };
            out.push(PathPoint { arc: arc0 + s * len, k });
        }
        arc0 += len;
    }
    Ok(out)
}
