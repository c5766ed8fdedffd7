//! Finite honeycomb flake with open edges, used as a quantum check of the
//! semiclassical equations of motion.
//!
//! Bloch phases are attached to true site positions. With bonds running
//! from A along δ1, δ2, δ3, a plane wave `e^{ik·R}` on this lattice sees the
//! Bloch matrix `H(-k)` of the model, whose eigenvectors are the complex
//! conjugates of those at `k`. Packets are therefore built from the
//! spinor of the model evaluated at `-k0`.

pub mod bessel;
pub mod lattice;
pub mod packet;
pub mod propagate;
pub mod protocol;
pub mod spectrum;

pub use lattice::{build_finite_lattice, SiteLattice, Sublattice};
pub use packet::{band_purity, center_of_mass, energy_expectation, mean_momentum, prepare_packet, WavePacket};
pub use propagate::{propagate_packet, PropagationConfig, PropagationResult};
