//! Berry curvature of biased and strained honeycomb lattices, its
//! semiclassical wave-packet readout, and a finite-lattice quantum check.

pub mod berry;
pub mod error;
pub mod grid;
pub mod mapping;
pub mod model;
pub mod oracle;
pub mod quadrature;
pub mod semiclassics;
pub mod validate;

pub use error::{Error, Result};
pub use grid::{CurvatureGrid, GridKind, KGrid, Window};
pub use model::{BandIndex, KPoint, LatticeModel};
