//! Synchronization certificates for first-order non-uniform Kuramoto
//! oscillators and lossless power networks.
//!
//! The dynamics are
//!
//! ```text
//! d_i θ̇_i = p_i(t) − Σ_j a_ij sin(θ_i − θ_j)
//! ```
//!
//! written in deviation coordinates `δ = θ − θ_o` around a power-flow
//! equilibrium `θ_o`. The crate provides
//!
//! - [`network`]: incidence matrices, Laplacian, `Q = A_v Bᵀ D⁻¹ B A_v` and
//!   their spectral quantities,
//! - [`equilibrium`]: a damped Newton power-flow solver and angle spreads,
//! - [`rplf`]: the region-parametrized Lyapunov machinery (κ(γ), window
//!   search, energy and state windows),
//! - [`certificates`]: the two synchronization criteria, the θ-coordinate
//!   variant, region-of-attraction estimates and the KYP check,
//! - [`energy`]: the quadratic and potential energy functions,
//! - [`simulate`]: a fixed-step RK4 integrator with disturbance and line-trip
//!   scenarios.
//!
//! The crate is `no_std` and only needs `alloc`.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod certificates;
pub mod energy;
pub mod equilibrium;
pub mod ieee9;
pub mod linalg;
pub mod network;
pub mod rplf;
pub mod simulate;

mod roots;

pub use certificates::{CertificateReport, Criterion, DisturbanceBound, RoaEstimate};
pub use equilibrium::{Equilibrium, Spreads};
pub use network::{Edge, IncidencePair, PowerNetwork, Spectrum};
pub use rplf::{RegionBounds, Window};
pub use simulate::{Dynamics, Trajectory};
