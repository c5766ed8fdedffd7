//! Spectral checks on the finite flake without forming a dense matrix:
//! eigenvalue counting by Sylvester inertia of a banded LDLᵀ factorisation,
//! and shift-invert subspace iteration for the few states in a window.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::oracle::lattice::SiteLattice;

/// `LDLᵀ` of `H - σ` in band storage. `l[i * (bw + 1) + c]` holds
/// `L[i][i - bw + c]`; the diagonal of `L` is implicit.
struct BandLdl {
    n: usize,
    bw: usize,
    l: Vec<f64>,
    d: Vec<f64>,
}

impl BandLdl {
    fn factor(lattice: &SiteLattice, shift: f64) -> Result<Self> {
        let n = lattice.len();
        let bw = lattice.bandwidth();
        let w = bw + 1;
        let mut a = vec![0.0; n * w];
        for i in 0..n {
            a[i * w + bw] = lattice.onsite[i] - shift;
            for &(j, t) in lattice.neighbors(i) {
                if j < i {
                    a[i * w + bw - (i - j)] = t;
                }
            }
        }
        let mut l = vec![0.0; n * w];
        let mut d = vec![0.0; n];
        let tiny = 1e-14 * lattice.spectral_bounds(None).1.abs().max(1.0);
        for i in 0..n {
            let first = i.saturating_sub(bw);
            for j in first..i {
                let kmin = first.max(j.saturating_sub(bw));
                let mut s = a[i * w + bw - (i - j)];
                for k in kmin..j {
                    s -= l[i * w + bw - (i - k)] * l[j * w + bw - (j - k)] * d[k];
                }
                l[i * w + bw - (i - j)] = s / d[j];
            }
            let mut s = a[i * w + bw];
            for k in first..i {
                let lik = l[i * w + bw - (i - k)];
                s -= lik * lik * d[k];
            }
            if !s.is_finite() {
                return Err(Error::Singular(format!("non-finite pivot at row {i} for shift {shift}")));
            }
            d[i] = if s.abs() < tiny { tiny } else { s };
        }
        Ok(BandLdl { n, bw, l, d })
    }

    fn negative_pivots(&self) -> usize {
        self.d.iter().filter(|v| **v < 0.0).count()
    }

    /// Solves `(H - σ) x = b` in place.
    #[allow(clippy::needless_range_loop)]
    fn solve(&self, x: &mut [f64]) {
        let w = self.bw + 1;
        for i in 0..self.n {
            let first = i.saturating_sub(self.bw);
            let mut s = x[i];
            for k in first..i {
                s -= self.l[i * w + self.bw - (i - k)] * x[k];
            }
            x[i] = s;
        }
        for i in 0..self.n {
            x[i] /= self.d[i];
        }
        for i in (0..self.n).rev() {
            let last = (i + self.bw).min(self.n - 1);
            let mut s = x[i];
            for k in i + 1..=last {
                s -= self.l[k * w + self.bw - (k - i)] * x[k];
            }
            x[i] = s;
        }
    }
}

/// Number of eigenvalues of the flake Hamiltonian below `energy`.
pub fn count_below(lattice: &SiteLattice, energy: f64) -> Result<usize> {
    Ok(BandLdl::factor(lattice, energy)?.negative_pivots())
}

/// Number of eigenvalues in `[lo, hi)`.
pub fn count_in(lattice: &SiteLattice, lo: f64, hi: f64) -> Result<usize> {
    Ok(count_below(lattice, hi)? - count_below(lattice, lo)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Eigenpair {
    pub energy: f64,
    #[serde(skip)]
    pub vector: Vec<f64>,
    /// `1 / (N Σ|ψ|⁴)`: 1 for a uniform state, ~1/N for a single site.
    pub participation_ratio: f64,
    /// Weight on sites within [`EDGE_STRIP`] of the flake edge.
    pub edge_weight: f64,
}

/// Width of the strip counted by [`Eigenpair::edge_weight`], in NN distances.
pub const EDGE_STRIP: f64 = 6.0;

impl Eigenpair {
    pub fn is_edge_localized(&self) -> bool {
        self.edge_weight > 0.5
    }
}

fn describe(lattice: &SiteLattice, energy: f64, vector: Vec<f64>) -> Eigenpair {
    let n = vector.len() as f64;
    let p4: f64 = vector.iter().map(|v| v.powi(4)).sum();
    let edge: f64 = lattice
        .sites
        .iter()
        .zip(&vector)
        .filter(|(s, _)| lattice.boundary_distance(s.position) < EDGE_STRIP)
        .map(|(_, v)| v * v)
        .sum();
    Eigenpair { energy, participation_ratio: 1.0 / (n * p4), edge_weight: edge, vector }
}

fn orthonormalize(cols: &mut [Vec<f64>]) {
    for i in 0..cols.len() {
        for _ in 0..2 {
            for j in 0..i {
                let dot: f64 = cols[i].iter().zip(&cols[j]).map(|(a, b)| a * b).sum();
                let (head, tail) = cols.split_at_mut(i);
                tail[0].iter_mut().zip(&head[j]).for_each(|(a, b)| *a -= dot * b);
            }
        }
        let nrm = cols[i].iter().map(|a| a * a).sum::<f64>().sqrt();
        cols[i].iter_mut().for_each(|a| *a /= nrm);
    }
}

/// All eigenpairs with energy in `(lo, hi)`, by shift-invert subspace
/// iteration about the window centre.
pub fn eigenpairs_in(lattice: &SiteLattice, lo: f64, hi: f64) -> Result<Vec<Eigenpair>> {
    let want = count_in(lattice, lo, hi)?;
    if want == 0 {
        return Ok(Vec::new());
    }
    let n = lattice.len();
    let p = (want + 8).min(n);
    let ldl = BandLdl::factor(lattice, 0.5 * (lo + hi))?;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut cols: Vec<Vec<f64>> = (0..p).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    orthonormalize(&mut cols);
    let mut hx = vec![0.0; n];
    for _ in 0..500 {
        cols.iter_mut().for_each(|c| ldl.solve(c));
        orthonormalize(&mut cols);
        // Rayleigh–Ritz on span(cols).
        let hcols: Vec<Vec<f64>> = cols
            .iter()
            .map(|c| {
                lattice.apply(c, None, &mut hx);
                hx.clone()
            })
            .collect();
        let t = DMatrix::<f64>::from_fn(p, p, |i, j| cols[i].iter().zip(&hcols[j]).map(|(a, b)| a * b).sum::<f64>());
        let eig = SymmetricEigen::new(t);
        let rotate = |src: &[Vec<f64>]| -> Vec<Vec<f64>> {
            (0..p)
                .map(|k| {
                    let mut v = vec![0.0; n];
                    for (j, s) in src.iter().enumerate() {
                        let c: f64 = eig.eigenvectors[(j, k)];
                        v.iter_mut().zip(s).for_each(|(a, b)| *a += c * b);
                    }
                    v
                })
                .collect()
        };
        cols = rotate(&cols);
        let hrot = rotate(&hcols);
        let mut inside = Vec::new();
        let mut converged = true;
        for k in 0..p {
            let e: f64 = eig.eigenvalues[k];
            if e > lo && e < hi {
                let r = cols[k].iter().zip(&hrot[k]).map(|(x, y)| (*y - e * *x).powi(2)).sum::<f64>().sqrt();
                converged &= r < 1e-9;
                inside.push(k);
            }
        }
        if converged && inside.len() == want {
            let mut out: Vec<Eigenpair> =
                inside.into_iter().map(|k| describe(lattice, eig.eigenvalues[k], cols[k].clone())).collect();
            out.sort_by(|a, b| a.energy.total_cmp(&b.energy));
            return Ok(out);
        }
    }
    Err(Error::Singular(format!("subspace iteration did not converge for {want} states in ({lo}, {hi})")))
}
