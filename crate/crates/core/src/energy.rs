//! The two energy functions, their RPLF bounds and their time derivatives
//! along the deviation dynamics.
//!
//! - `V_quad = ½ δᵀ(D − D eₙeₙᵀ D/d)δ`, the quadratic energy of criterion I,
//! - `V_pot = Σ_edges a_ij [cos θᵒ_ij − cos(u + θᵒ_ij) − u sin θᵒ_ij]` with
//!   `u = δ_i − δ_j`, the coupling potential of criterion II.

use alloc::vec::Vec;

use crate::equilibrium::Equilibrium;
use crate::linalg::norm2;
use crate::network::{IncidencePair, PowerNetwork};
use crate::rplf::{kappa_limit, kappa_unchecked, sinc};
use crate::simulate::Dynamics;

/// A deviation `δ` with its edge and all-pair differences.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub delta: Vec<f64>,
    /// `Bᵀδ`.
    pub delta_l: Vec<f64>,
    /// `B_cᵀδ`.
    pub delta_c: Vec<f64>,
}

impl State {
    pub fn new(delta: Vec<f64>, pair: &IncidencePair) -> Self {
        Self {
            delta_l: pair.edge_differences(&delta),
            delta_c: pair.pair_differences(&delta),
            delta,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum EnergyKind {
    Quadratic,
    Potential,
}

fn weighted_mean(net: &PowerNetwork, delta: &[f64]) -> f64 {
    let s: f64 = delta.iter().zip(net.damping()).map(|(x, d)| x * d).sum();
    s / net.total_damping()
}

/// `½ δᵀ(D − D eₙeₙᵀ D/d)δ`, evaluated as `½ Σ d_i (δ_i − δ̂)²` with the
/// damping-weighted mean `δ̂` so shifts along `eₙ` cancel exactly.
pub fn v_quadratic(net: &PowerNetwork, delta: &[f64]) -> f64 {
    let m = weighted_mean(net, delta);
    0.5 * delta
        .iter()
        .zip(net.damping())
        .map(|(x, d)| d * (x - m) * (x - m))
        .sum::<f64>()
}

/// Coupling potential relative to `θ_o`. Each edge term is written as
/// `cos θ·2sin²(u/2) + sin θ·(sin u − u)` to limit cancellation near 𝔼.
pub fn v_potential(net: &PowerNetwork, theta_o: &[f64], delta: &[f64]) -> f64 {
    net.edges()
        .iter()
        .map(|e| {
            let u = delta[e.i] - delta[e.j];
            let th = theta_o[e.i] - theta_o[e.j];
            let s = libm::sin(0.5 * u);
            e.weight * (libm::cos(th) * 2.0 * s * s + libm::sin(th) * (libm::sin(u) - u))
        })
        .sum()
}

pub fn energy(kind: EnergyKind, net: &PowerNetwork, theta_o: &[f64], delta: &[f64]) -> f64 {
    match kind {
        EnergyKind::Quadratic => v_quadratic(net, delta),
        EnergyKind::Potential => v_potential(net, theta_o, delta),
    }
}

/// `∇V_quad = (D − D eₙeₙᵀ D/d)δ = D(δ − δ̂ eₙ)`.
pub fn grad_quadratic(net: &PowerNetwork, delta: &[f64]) -> Vec<f64> {
    let m = weighted_mean(net, delta);
    delta
        .iter()
        .zip(net.damping())
        .map(|(x, d)| d * (x - m))
        .collect()
}

/// `∇V_pot = B A_v (sin(Bᵀ(δ + θ_o)) − sin(Bᵀθ_o))`.
pub fn grad_potential(net: &PowerNetwork, theta_o: &[f64], delta: &[f64]) -> Vec<f64> {
    let mut g = alloc::vec![0.0; net.n()];
    for e in net.edges() {
        let u = delta[e.i] - delta[e.j];
        let th = theta_o[e.i] - theta_o[e.j];
        let f = e.weight * 2.0 * libm::cos(0.5 * u + th) * libm::sin(0.5 * u);
        g[e.i] += f;
        g[e.j] -= f;
    }
    g
}

/// `V̇ = ∇V · δ̇` along the intact dynamics with disturbance `p`.
pub fn vdot(
    kind: EnergyKind,
    net: &PowerNetwork,
    theta_o: &[f64],
    delta: &[f64],
    p: &[f64],
) -> f64 {
    let rate = Dynamics::new(net, theta_o).rhs(delta, p);
    let grad = match kind {
        EnergyKind::Quadratic => grad_quadratic(net, delta),
        EnergyKind::Potential => grad_potential(net, theta_o, delta),
    };
    grad.iter().zip(&rate).map(|(g, r)| g * r).sum()
}

/// Diagonal of `A_p`: `(sin(u + θᵒ_ij) − sin θᵒ_ij)/u` per edge in the
/// column order of `B`, equal to `cos θᵒ_ij` at `u = 0`.
pub fn difference_quotients(pair: &IncidencePair, theta_o: &[f64], delta: &[f64]) -> Vec<f64> {
    pair.edge_nodes
        .iter()
        .map(|&(i, j)| {
            let u = delta[i] - delta[j];
            let th = theta_o[i] - theta_o[j];
            libm::cos(0.5 * u + th) * sinc(0.5 * u)
        })
        .collect()
}

/// Outcome of checking `κ(γ)·min a/2·‖δ_l‖² ≤ V_pot ≤ max a/2·‖δ_l‖²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundCheck {
    Holds { lower: f64, value: f64, upper: f64 },
    Violated { lower: f64, value: f64, upper: f64 },
    /// Some edge deviation exceeds γ, or γ is outside κ's domain.
    Skipped { max_edge_deviation: f64 },
}

impl BoundCheck {
    pub fn holds(&self) -> bool {
        matches!(self, Self::Holds { .. })
    }
}

/// Quadratic bounds of the potential energy on the region where every edge
/// deviation is at most γ.
pub fn check_bounds(
    net: &PowerNetwork,
    pair: &IncidencePair,
    eq: &Equilibrium,
    delta: &[f64],
    gamma: f64,
) -> BoundCheck {
    let delta_l = pair.edge_differences(delta);
    let max_edge_deviation = delta_l.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let delta_bar = eq.spreads.edge;
    if max_edge_deviation > gamma || !(gamma < kappa_limit(delta_bar)) {
        return BoundCheck::Skipped { max_edge_deviation };
    }
    let nl = norm2(&delta_l);
    let sq = nl * nl;
    let lower = kappa_unchecked(gamma, delta_bar) * net.min_weight() / 2.0 * sq;
    let upper = net.max_weight() / 2.0 * sq;
    let value = v_potential(net, &eq.theta, delta);
    let slack = 1e-12 * upper.max(1e-300);
    if lower <= value + slack && value <= upper + slack {
        BoundCheck::Holds { lower, value, upper }
    } else {
        BoundCheck::Violated { lower, value, upper }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{build_incidence, Edge};
    use alloc::vec;
    use core::f64::consts::FRAC_PI_2;

    fn single_edge() -> PowerNetwork {
        PowerNetwork::new(2, vec![Edge::new(0, 1, 1.0)], vec![1.0, 1.0], vec![0]).unwrap()
    }

    #[test]
    fn quadratic_two_node() {
        assert!((v_quadratic(&single_edge(), &[1.0, 0.0]) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn quadratic_vanishes_on_equilibrium_subspace() {
        assert_eq!(v_quadratic(&single_edge(), &[0.7, 0.7]), 0.0);
    }

    #[test]
    fn potential_quarter_turn() {
        let v = v_potential(&single_edge(), &[0.0, 0.0], &[FRAC_PI_2, 0.0]);
        assert!((v - 1.0).abs() < 1e-15);
    }

    #[test]
    fn quotient_at_zero_is_cosine() {
        let net = single_edge();
        let pair = build_incidence(&net);
        let q = difference_quotients(&pair, &[0.3, 0.0], &[0.0, 0.0]);
        assert!((q[0] - libm::cos(0.3)).abs() < 1e-15);
    }

    #[test]
    fn vdot_vanishes_at_origin() {
        let net = single_edge();
        for kind in [EnergyKind::Quadratic, EnergyKind::Potential] {
            assert_eq!(vdot(kind, &net, &[0.2, 0.0], &[0.0, 0.0], &[0.5, -0.1]), 0.0);
        }
    }
}
