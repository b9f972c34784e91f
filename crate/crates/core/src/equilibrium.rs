//! Lossless power flow `B A_v sin(Bᵀθ) = p_o` and the angle-spread
//! constants of an operating point.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::FRAC_PI_2;

use thiserror::Error;

use crate::linalg::{norm2, norm_inf, solve_with_pivot_floor, Matrix};
use crate::network::{IncidencePair, PowerNetwork};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PowerFlowError {
    #[error("power profile is unbalanced: sum = {0:e}")]
    Unbalanced(f64),
    #[error("power profile has {got} entries, network has {expected} nodes")]
    ProfileLength { expected: usize, got: usize },
    #[error("reference node {0} out of range")]
    BadReference(usize),
    #[error("near-critical loading: power-flow Jacobian is singular at iteration {iteration}")]
    SingularJacobian { iteration: usize },
    #[error("power flow did not converge in {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
}

/// Largest equilibrium angle differences: across physical edges (`δ̄_l`),
/// across all node pairs (`δ̄_c`) and `δ̄_m = max{2δ̄_l, δ̄_c}`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Spreads {
    pub edge: f64,
    pub all_pairs: f64,
    pub combined: f64,
}

impl Spreads {
    pub fn zero() -> Self {
        Self {
            edge: 0.0,
            all_pairs: 0.0,
            combined: 0.0,
        }
    }

    /// Every line angle stays below π/2 at the operating point.
    pub fn edge_spread_secure(&self) -> bool {
        self.edge < FRAC_PI_2
    }
}

pub fn spreads(theta: &[f64], pair: &IncidencePair) -> Spreads {
    let edge = norm_inf(&pair.edge_differences(theta));
    let all_pairs = norm_inf(&pair.pair_differences(theta));
    Spreads {
        edge,
        all_pairs,
        combined: (2.0 * edge).max(all_pairs),
    }
}

/// An operating point: angles, the power profile it balances and its
/// spreads.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Equilibrium {
    pub theta: Vec<f64>,
    pub power: Vec<f64>,
    pub spreads: Spreads,
    pub residual_inf: f64,
    /// All line angles strictly inside (−π/2, π/2).
    pub secure: bool,
    pub iterations: usize,
    /// 2-norm of the residual after each accepted Newton step, starting
    /// with the initial guess.
    pub residual_history: Vec<f64>,
}

impl Equilibrium {
    /// Wraps given angles (for instance tabulated ones) without solving.
    pub fn from_angles(net: &PowerNetwork, pair: &IncidencePair, theta: Vec<f64>, power: Vec<f64>) -> Self {
        let report = verify_equilibrium(net, &theta, &power);
        let spreads = spreads(&theta, pair);
        Self {
            secure: spreads.edge_spread_secure(),
            spreads,
            residual_inf: report.max_abs,
            iterations: 0,
            residual_history: vec![norm2(&report.per_node)],
            theta,
            power,
        }
    }

    /// `θ_o = 0`, `p_o = 0`: the operating point of the original θ-coordinate
    /// model.
    pub fn flat(n: usize) -> Self {
        Self {
            theta: vec![0.0; n],
            power: vec![0.0; n],
            spreads: Spreads::zero(),
            residual_inf: 0.0,
            secure: true,
            iterations: 0,
            residual_history: vec![0.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerFlowOptions {
    pub reference_node: usize,
    pub reference_angle: f64,
    pub warm_start: Option<Vec<f64>>,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub max_halvings: usize,
}

impl PowerFlowOptions {
    pub fn with_reference(reference_node: usize, reference_angle: f64) -> Self {
        Self {
            reference_node,
            reference_angle,
            ..Self::default()
        }
    }
}

impl Default for PowerFlowOptions {
    fn default() -> Self {
        Self {
            reference_node: 0,
            reference_angle: 0.0,
            warm_start: None,
            tolerance: 1e-10,
            max_iterations: 50,
            max_halvings: 6,
        }
    }
}

/// Per-node mismatch `B A_v sin(Bᵀθ) − p`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ResidualReport {
    pub per_node: Vec<f64>,
    pub max_abs: f64,
}

pub fn verify_equilibrium(net: &PowerNetwork, theta: &[f64], power: &[f64]) -> ResidualReport {
    let per_node = mismatch(net, theta, power);
    ResidualReport {
        max_abs: norm_inf(&per_node),
        per_node,
    }
}

fn mismatch(net: &PowerNetwork, theta: &[f64], power: &[f64]) -> Vec<f64> {
    let mut r: Vec<f64> = power.iter().map(|p| -p).collect();
    for e in net.edges() {
        let flow = e.weight * libm::sin(theta[e.i] - theta[e.j]);
        r[e.i] += flow;
        r[e.j] -= flow;
    }
    r
}

/// Newton iteration on the `n − 1` non-reference angles with step halving.
///
/// A step is accepted only if it lowers the residual 2-norm; after
/// `max_halvings` unsuccessful halvings the solve stops with
/// [`PowerFlowError::NoConvergence`]. Solutions with a line angle at or
/// beyond π/2 are returned with `secure = false`.
pub fn solve_power_flow(
    net: &PowerNetwork,
    pair: &IncidencePair,
    power: &[f64],
    opts: &PowerFlowOptions,
) -> Result<Equilibrium, PowerFlowError> {
    let n = net.n();
    if power.len() != n {
        return Err(PowerFlowError::ProfileLength {
            expected: n,
            got: power.len(),
        });
    }
    let imbalance: f64 = power.iter().sum();
    if imbalance.abs() > 1e-9 {
        return Err(PowerFlowError::Unbalanced(imbalance));
    }
    let reference = opts.reference_node;
    if reference >= n {
        return Err(PowerFlowError::BadReference(reference));
    }

    let mut theta = match &opts.warm_start {
        Some(w) if w.len() == n => w.clone(),
        _ => vec![0.0; n],
    };
    let shift = opts.reference_angle - theta[reference];
    theta.iter_mut().for_each(|t| *t += shift);

    // Pivots are compared against the network's total line weight.
    let pivot_floor = 1e-10 * net.weights().iter().sum::<f64>();
    let free: Vec<usize> = (0..n).filter(|&i| i != reference).collect();
    let mut residual = mismatch(net, &theta, power);
    let mut history = vec![norm2(&residual)];
    let mut iterations = 0;

    while norm_inf(&residual) > opts.tolerance {
        if iterations >= opts.max_iterations {
            return Err(PowerFlowError::NoConvergence {
                iterations,
                residual: norm_inf(&residual),
            });
        }
        iterations += 1;

        let jac = reduced_jacobian(net, &theta, &free);
        let rhs: Vec<f64> = free.iter().map(|&i| -residual[i]).collect();
        let step = solve_with_pivot_floor(jac, rhs, pivot_floor).ok_or(PowerFlowError::SingularJacobian { iteration: iterations })?;

        let current = *history.last().unwrap();
        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let mut trial = theta.clone();
            for (&i, s) in free.iter().zip(&step) {
                trial[i] += scale * s;
            }
            let r = mismatch(net, &trial, power);
            let norm = norm2(&r);
            if norm < current {
                accepted = Some((trial, r, norm));
                break;
            }
            scale *= 0.5;
        }
        match accepted {
            Some((t, r, norm)) => {
                theta = t;
                residual = r;
                history.push(norm);
            }
            None => {
                return Err(PowerFlowError::NoConvergence {
                    iterations,
                    residual: norm_inf(&residual),
                })
            }
        }
    }

    let spreads = spreads(&theta, pair);
    Ok(Equilibrium {
        secure: spreads.edge_spread_secure(),
        spreads,
        residual_inf: norm_inf(&residual),
        iterations,
        residual_history: history,
        theta,
        power: power.to_vec(),
    })
}

/// `B A_v diag(cos Bᵀθ) Bᵀ` restricted to the free nodes.
fn reduced_jacobian(net: &PowerNetwork, theta: &[f64], free: &[usize]) -> Matrix {
    let n = net.n();
    let mut full = Matrix::zeros(n, n);
    for e in net.edges() {
        let g = e.weight * libm::cos(theta[e.i] - theta[e.j]);
        full[(e.i, e.i)] += g;
        full[(e.j, e.j)] += g;
        full[(e.i, e.j)] -= g;
        full[(e.j, e.i)] -= g;
    }
    let m = free.len();
    let mut jac = Matrix::zeros(m, m);
    for (r, &i) in free.iter().enumerate() {
        for (c, &j) in free.iter().enumerate() {
            jac[(r, c)] = full[(i, j)];
        }
    }
    jac
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{build_incidence, Edge};

    fn two_node() -> (PowerNetwork, IncidencePair) {
        let net = PowerNetwork::new(2, vec![Edge::new(0, 1, 2.0)], vec![1.0, 1.0], vec![]).unwrap();
        let pair = build_incidence(&net);
        (net, pair)
    }

    #[test]
    fn two_node_closed_form() {
        let (net, pair) = two_node();
        let eq = solve_power_flow(&net, &pair, &[1.0, -1.0], &PowerFlowOptions::with_reference(1, 0.0)).unwrap();
        assert!((eq.theta[0] - libm::asin(0.5)).abs() < 1e-10);
        assert_eq!(eq.theta[1], 0.0);
        assert!(eq.secure);
        let r = verify_equilibrium(&net, &eq.theta, &eq.power);
        assert!(r.max_abs < 1e-12);
    }

    #[test]
    fn zero_profile_gives_flat_angles() {
        let (net, pair) = two_node();
        let eq = solve_power_flow(&net, &pair, &[0.0, 0.0], &PowerFlowOptions::with_reference(0, 0.3)).unwrap();
        assert_eq!(eq.theta, vec![0.3, 0.3]);
        assert_eq!(eq.iterations, 0);
    }

    #[test]
    fn unbalanced_profile_is_rejected() {
        let (net, pair) = two_node();
        assert!(matches!(
            solve_power_flow(&net, &pair, &[1.0, 0.0], &PowerFlowOptions::default()),
            Err(PowerFlowError::Unbalanced(_))
        ));
    }

    #[test]
    fn overloaded_line_fails() {
        // Transfer above the line capacity has no solution.
        let (net, pair) = two_node();
        let err = solve_power_flow(&net, &pair, &[2.5, -2.5], &PowerFlowOptions::default()).unwrap_err();
        assert!(matches!(
            err,
            PowerFlowError::NoConvergence { .. } | PowerFlowError::SingularJacobian { .. }
        ));
    }

    #[test]
    fn critical_loading_jacobian_is_singular() {
        // Warm start exactly at π/2 across the line: cos = 0.
        let (net, pair) = two_node();
        let opts = PowerFlowOptions {
            reference_node: 1,
            warm_start: Some(vec![FRAC_PI_2, 0.0]),
            ..PowerFlowOptions::default()
        };
        let err = solve_power_flow(&net, &pair, &[1.9, -1.9], &opts).unwrap_err();
        assert_eq!(err, PowerFlowError::SingularJacobian { iteration: 1 });
    }

    #[test]
    fn insecure_branch_is_flagged() {
        let (net, pair) = two_node();
        let opts = PowerFlowOptions {
            reference_node: 1,
            warm_start: Some(vec![2.5, 0.0]),
            ..PowerFlowOptions::default()
        };
        let eq = solve_power_flow(&net, &pair, &[1.0, -1.0], &opts).unwrap();
        assert!((eq.theta[0] - (core::f64::consts::PI - libm::asin(0.5))).abs() < 1e-9);
        assert!(!eq.secure);
    }

    #[test]
    fn spreads_of_flat_angles() {
        let (_, pair) = two_node();
        assert_eq!(spreads(&[0.0, 0.0], &pair), Spreads::zero());
    }
}
