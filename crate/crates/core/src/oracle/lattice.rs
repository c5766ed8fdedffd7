use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{LatticeModel, A1, A2, NN_VECTORS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Sublattice {
    A,
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Site {
    pub position: [f64; 2],
    pub sublattice: Sublattice,
    pub cell: (usize, usize),
}

/// Nearest-neighbour bond from an A site to a B site.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    /// Which of δ1, δ2, δ3 points from `a` to `b`.
    pub direction: usize,
    pub amplitude: f64,
}

/// `n1 × n2` cells spanned by a1, a2, two sites each, open edges.
///
/// Site `2 (i n2 + j) + s` is sublattice `s` (0 = A, 1 = B) of cell
/// `(i, j)`; A sits at `i a1 + j a2`, B at that plus δ3.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteLattice {
    pub n1: usize,
    pub n2: usize,
    pub sites: Vec<Site>,
    pub bonds: Vec<Bond>,
    pub onsite: Vec<f64>,
    neighbors: Vec<Vec<(usize, f64)>>,
}

pub fn build_finite_lattice(model: &LatticeModel, n1: usize, n2: usize) -> Result<SiteLattice> {
    if n1 < 2 || n2 < 2 {
        return Err(Error::InvalidParameter(format!("lattice needs at least 2x2 cells, got {n1}x{n2}")));
    }
    let idx = |i: usize, j: usize, s: usize| 2 * (i * n2 + j) + s;
    let mut sites = Vec::with_capacity(2 * n1 * n2);
    let mut onsite = Vec::with_capacity(2 * n1 * n2);
    for i in 0..n1 {
        for j in 0..n2 {
            let r = [i as f64 * A1[0] + j as f64 * A2[0], i as f64 * A1[1] + j as f64 * A2[1]];
            sites.push(Site { position: r, sublattice: Sublattice::A, cell: (i, j) });
            onsite.push(model.delta());
            let d = NN_VECTORS[2];
            sites.push(Site { position: [r[0] + d[0], r[1] + d[1]], sublattice: Sublattice::B, cell: (i, j) });
            onsite.push(-model.delta());
        }
    }
    let t = model.hoppings();
    let mut bonds = Vec::new();
    for i in 0..n1 {
        for j in 0..n2 {
            let a = idx(i, j, 0);
            // A(i,j) + δ1 = B(i+1,j), + δ2 = B(i,j+1), + δ3 = B(i,j).
            let targets = [(i + 1, j, 0), (i, j + 1, 1), (i, j, 2)];
            for (bi, bj, dir) in targets {
                if bi < n1 && bj < n2 {
                    bonds.push(Bond { a, b: idx(bi, bj, 1), direction: dir, amplitude: -t[dir] });
                }
            }
        }
    }
    let mut neighbors = vec![Vec::with_capacity(3); sites.len()];
    for b in &bonds {
        neighbors[b.a].push((b.b, b.amplitude));
        neighbors[b.b].push((b.a, b.amplitude));
    }
    Ok(SiteLattice { n1, n2, sites, bonds, onsite, neighbors })
}

impl SiteLattice {
    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn site_index(&self, i: usize, j: usize, sub: Sublattice) -> usize {
        2 * (i * self.n2 + j) + matches!(sub, Sublattice::B) as usize
    }

    pub fn neighbors(&self, site: usize) -> &[(usize, f64)] {
        &self.neighbors[site]
    }

    /// Largest index distance between coupled sites.
    pub fn bandwidth(&self) -> usize {
        self.bonds.iter().map(|b| b.a.abs_diff(b.b)).max().unwrap_or(0)
    }

    /// Coordinates of `r` in the (a1, a2) basis.
    pub fn fractional(&self, r: [f64; 2]) -> [f64; 2] {
        // a1 = (√3/2, 3/2), a2 = (-√3/2, 3/2): u + v = 2y/3, u - v = 2x/√3.
        let s = 2.0 * r[1] / 3.0;
        let d = 2.0 * r[0] / crate::model::SQRT3;
        [0.5 * (s + d), 0.5 * (s - d)]
    }

    /// Distance from `r` to the nearest edge of the A-site parallelogram.
    /// The spacing between lines of constant `u` is `|a1| sin 60° = 3/2`.
    pub fn boundary_distance(&self, r: [f64; 2]) -> f64 {
        let [u, v] = self.fractional(r);
        let umax = (self.n1 - 1) as f64;
        let vmax = (self.n2 - 1) as f64;
        1.5 * u.min(umax - u).min(v).min(vmax - v)
    }

    /// Geometric centre of the flake.
    pub fn center(&self) -> [f64; 2] {
        let u = 0.5 * (self.n1 - 1) as f64;
        let v = 0.5 * (self.n2 - 1) as f64;
        [u * A1[0] + v * A2[0], u * A1[1] + v * A2[1]]
    }

    /// `y = (H + diag(extra)) x` for a real-symmetric hopping matrix.
    pub fn apply<T>(&self, x: &[T], extra: Option<&[f64]>, y: &mut [T])
    where
        T: Copy + Send + Sync + std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T>,
    {
        use rayon::prelude::*;
        y.par_iter_mut().enumerate().with_min_len(512).for_each(|(i, yi)| {
            let d = self.onsite[i] + extra.map_or(0.0, |e| e[i]);
            let mut acc = x[i] * d;
            for &(j, t) in &self.neighbors[i] {
                acc = acc + x[j] * t;
            }
            *yi = acc;
        });
    }

    /// Gershgorin bounds on the spectrum of `H + diag(extra)`.
    pub fn spectral_bounds(&self, extra: Option<&[f64]>) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..self.len() {
            let d = self.onsite[i] + extra.map_or(0.0, |e| e[i]);
            let r: f64 = self.neighbors[i].iter().map(|(_, t)| t.abs()).sum();
            lo = lo.min(d - r);
            hi = hi.max(d + r);
        }
        (lo, hi)
    }
}
