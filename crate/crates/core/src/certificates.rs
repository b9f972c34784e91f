//! Synchronization certificates and region-of-attraction estimates built on
//! the RPLF engine, plus a numeric check of the KYP equalities behind the
//! energy functions.
//!
//! Criterion I uses the quadratic energy and measures cohesiveness over all
//! node pairs (`‖B_cᵀδ‖`); criterion II uses the potential energy and
//! measures it over physical edges (`‖Bᵀδ‖`).

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI};

use thiserror::Error;

use crate::equilibrium::{Equilibrium, Spreads};
use crate::linalg::{norm2, Matrix};
use crate::network::{
    algebraic_connectivity, laplacian, q_matrix, smallest_nonzero_eigenvalue, IncidencePair, PowerNetwork,
    SpectralError,
};
use crate::rplf::{self, kappa_unchecked, RegionBounds, RplfError, Window};

/// Largest disturbance support for the exhaustive sign-vertex search.
pub const MAX_SUPPORT: usize = 12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CertificateError {
    #[error("edge spread {0} violates δ̄_l < π/2")]
    EdgeSpread(f64),
    #[error("spread gap δ̄_c − δ̄_l = {0} violates δ̄_c − δ̄_l < π/2")]
    SpreadGap(f64),
    #[error("disturbance bound {0} is negative or not finite")]
    BadMagnitude(f64),
    #[error("disturbance support is empty while the bound is positive")]
    EmptySupport,
    #[error("disturbance support has {0} nodes; at most {MAX_SUPPORT} are supported")]
    SupportTooLarge(usize),
    #[error("disturbance node {node} out of range for {n} nodes")]
    SupportOutOfRange { node: usize, n: usize },
    #[error("nominal injection has {got} entries, expected {expected}")]
    NominalLength { expected: usize, got: usize },
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Rplf(#[from] RplfError),
}

/// Sup-norms of the weighted disturbance terms measured along a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RealizedNorms {
    /// `sup_t ‖diag{d_i d_j} B_cᵀ D⁻¹ p(t)‖`.
    pub complete: f64,
    /// `sup_t ‖A_v Bᵀ D⁻¹ p(t)‖`.
    pub edge: f64,
}

/// `|p_i(t) − nominal_i| ≤ magnitude` on `support`, `p_i = nominal_i`
/// elsewhere. An empty `nominal` means zero.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DisturbanceBound {
    pub magnitude: f64,
    pub support: Vec<usize>,
    pub nominal: Vec<f64>,
    pub realized: Option<RealizedNorms>,
}

impl DisturbanceBound {
    pub fn new(magnitude: f64, support: Vec<usize>) -> Self {
        Self {
            magnitude,
            support,
            nominal: Vec::new(),
            realized: None,
        }
    }

    pub fn zero() -> Self {
        Self::new(0.0, Vec::new())
    }

    /// Centres the box on `nominal`. The θ-coordinate criterion treats the
    /// whole profile `p_f = p_o + p(t)` as the disturbance, so it takes the
    /// bound centred on `p_o`.
    pub fn with_nominal(mut self, nominal: Vec<f64>) -> Self {
        self.nominal = nominal;
        self
    }

    pub fn with_realized(mut self, realized: RealizedNorms) -> Self {
        self.realized = Some(realized);
        self
    }

    fn validate(&self, n: usize) -> Result<(), CertificateError> {
        if !(self.magnitude >= 0.0 && self.magnitude.is_finite()) {
            return Err(CertificateError::BadMagnitude(self.magnitude));
        }
        if self.magnitude > 0.0 && self.support.is_empty() {
            return Err(CertificateError::EmptySupport);
        }
        if self.support.len() > MAX_SUPPORT {
            return Err(CertificateError::SupportTooLarge(self.support.len()));
        }
        if let Some(&node) = self.support.iter().find(|&&v| v >= n) {
            return Err(CertificateError::SupportOutOfRange { node, n });
        }
        if !self.nominal.is_empty() && self.nominal.len() != n {
            return Err(CertificateError::NominalLength {
                expected: n,
                got: self.nominal.len(),
            });
        }
        Ok(())
    }

    /// Worst case of `weighted(p)` over the sign vertices of the bound box.
    /// The weighted norms are convex in `p`, so a vertex attains the maximum.
    fn worst_case(&self, n: usize, weighted: impl Fn(&[f64]) -> f64) -> f64 {
        let mut p = if self.nominal.is_empty() {
            vec![0.0; n]
        } else {
            self.nominal.clone()
        };
        if self.magnitude == 0.0 {
            return if self.nominal.is_empty() { 0.0 } else { weighted(&p) };
        }
        let mut best = 0.0_f64;
        for mask in 0u32..(1u32 << self.support.len()) {
            for (bit, &node) in self.support.iter().enumerate() {
                let base = self.nominal.get(node).copied().unwrap_or(0.0);
                p[node] = base
                    + if mask >> bit & 1 == 1 {
                        -self.magnitude
                    } else {
                        self.magnitude
                    };
            }
            best = best.max(weighted(&p));
        }
        best
    }
}

/// `‖diag{d_i d_j} B_cᵀ D⁻¹ p‖`.
pub fn complete_weighted_norm(net: &PowerNetwork, pair: &IncidencePair, p: &[f64]) -> f64 {
    let d = net.damping();
    let scaled: Vec<f64> = p.iter().zip(d).map(|(v, di)| v / di).collect();
    let terms: Vec<f64> = pair
        .pair_nodes
        .iter()
        .map(|&(i, j)| d[i] * d[j] * (scaled[i] - scaled[j]))
        .collect();
    norm2(&terms)
}

/// `‖A_v Bᵀ D⁻¹ p‖`.
pub fn edge_weighted_norm(net: &PowerNetwork, pair: &IncidencePair, p: &[f64]) -> f64 {
    let d = net.damping();
    let terms: Vec<f64> = pair
        .edge_nodes
        .iter()
        .zip(net.edges())
        .map(|(&(i, j), e)| e.weight * (p[i] / d[i] - p[j] / d[j]))
        .collect();
    norm2(&terms)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Criterion {
    /// Quadratic energy, all-pairs cohesiveness, deviation coordinates.
    I,
    /// Criterion I in the original θ-coordinates (`θ_o = 0`).
    IOriginal,
    /// Potential energy, per-edge cohesiveness.
    II,
    RoaI,
    RoaII,
}

impl Criterion {
    pub fn label(self) -> &'static str {
        match self {
            Self::I => "I",
            Self::IOriginal => "I-original",
            Self::II => "II",
            Self::RoaI => "roa_I",
            Self::RoaII => "roa_II",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CertificateReport {
    pub criterion: Criterion,
    /// `λ₂` for criterion I, `λ_s(Q)` for criterion II.
    pub lambda_value: f64,
    pub lambda_cr: f64,
    pub gamma_star: f64,
    pub gamma_m: f64,
    pub delta_l: f64,
    /// Disturbance sup-norm entering σ(γ).
    pub disturbance_norm: f64,
    pub window: Option<Window>,
    pub passed: bool,
    /// Coarse frequency bound `max_i (2Σ_j a_ij + |nominal_i| + p_d)/d_i`.
    pub varpi_bound: Option<f64>,
    pub gamma_s: Option<f64>,
}

/// RPLF bounds of the quadratic energy:
/// `α̲ = min d_i d_j/(2d)`, `ᾱ = max d_i d_j/(2d)`,
/// `μ(γ) = n‖diag{d_i d_j}B_cᵀD⁻¹p‖/(κ(γ)λ₂d)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticBounds {
    pub alpha_lower: f64,
    pub alpha_upper: f64,
    /// `n‖diag{d_i d_j}B_cᵀD⁻¹p‖/(λ₂d)`, so that `μ = mu_scale/κ`.
    pub mu_scale: f64,
    pub delta_l: f64,
    pub gamma_m: f64,
}

impl QuadraticBounds {
    pub fn new(net: &PowerNetwork, lambda2: f64, disturbance_norm: f64, delta_l: f64, gamma_m: f64) -> Self {
        let d = net.total_damping();
        let (lo, hi) = net.damping_product_range();
        Self {
            alpha_lower: lo / (2.0 * d),
            alpha_upper: hi / (2.0 * d),
            mu_scale: net.n() as f64 * disturbance_norm / (lambda2 * d),
            delta_l,
            gamma_m,
        }
    }
}

impl RegionBounds for QuadraticBounds {
    fn alpha_lower(&self, _gamma: f64) -> f64 {
        self.alpha_lower
    }
    fn alpha_upper(&self, _gamma: f64) -> f64 {
        self.alpha_upper
    }
    fn mu(&self, gamma: f64) -> f64 {
        if self.mu_scale == 0.0 {
            0.0
        } else {
            self.mu_scale / kappa_unchecked(gamma, self.delta_l)
        }
    }
    fn gamma_m(&self) -> f64 {
        self.gamma_m
    }
}

/// RPLF bounds of the potential energy:
/// `α̲(γ) = κ(γ) min a/2`, `ᾱ = max a/2`,
/// `μ(γ) = ‖A_vBᵀD⁻¹p‖ max a/(λ_s(Q) κ²(γ) min a)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialBounds {
    pub min_weight: f64,
    pub max_weight: f64,
    /// `‖A_vBᵀD⁻¹p‖ max a/(λ_s(Q) min a)`, so that `μ = mu_scale/κ²`.
    pub mu_scale: f64,
    pub delta_l: f64,
}

impl PotentialBounds {
    pub fn new(net: &PowerNetwork, lambda_s: f64, disturbance_norm: f64, delta_l: f64) -> Self {
        let (lo, hi) = (net.min_weight(), net.max_weight());
        Self {
            min_weight: lo,
            max_weight: hi,
            mu_scale: disturbance_norm * hi / (lambda_s * lo),
            delta_l,
        }
    }
}

impl RegionBounds for PotentialBounds {
    fn alpha_lower(&self, gamma: f64) -> f64 {
        kappa_unchecked(gamma, self.delta_l).max(0.0) * self.min_weight / 2.0
    }
    fn alpha_upper(&self, _gamma: f64) -> f64 {
        self.max_weight / 2.0
    }
    fn mu(&self, gamma: f64) -> f64 {
        if self.mu_scale == 0.0 {
            0.0
        } else {
            let k = kappa_unchecked(gamma, self.delta_l);
            self.mu_scale / (k * k)
        }
    }
    fn gamma_m(&self) -> f64 {
        rplf::kappa_limit(self.delta_l)
    }
}

fn check_spreads(s: &Spreads) -> Result<(), CertificateError> {
    if !(s.edge < FRAC_PI_2) {
        return Err(CertificateError::EdgeSpread(s.edge));
    }
    Ok(())
}

fn varpi_bound(net: &PowerNetwork, bound: &DisturbanceBound) -> f64 {
    let mut strength = vec![0.0; net.n()];
    for e in net.edges() {
        strength[e.i] += e.weight;
        strength[e.j] += e.weight;
    }
    strength.iter().zip(net.damping()).enumerate().fold(0.0, |m, (i, (s, d))| {
        let nominal = bound.nominal.get(i).map_or(0.0, |v| libm::fabs(*v));
        m.max((2.0 * s + nominal + bound.magnitude) / d)
    })
}

/// Criterion I on the network around `eq`: certified when
/// `λ₂ > λ_cr = σ(π/2 − δ̄_l)`.
pub fn criterion_i(
    net: &PowerNetwork,
    pair: &IncidencePair,
    eq: &Equilibrium,
    bound: &DisturbanceBound,
) -> Result<CertificateReport, CertificateError> {
    check_spreads(&eq.spreads)?;
    let gap = eq.spreads.all_pairs - eq.spreads.edge;
    if !(gap < FRAC_PI_2) {
        return Err(CertificateError::SpreadGap(gap));
    }
    quadratic_certificate(net, pair, eq.spreads, bound, Criterion::I)
}

/// Criterion I in θ-coordinates: `δ̄_l = 0`, `κ = sin γ/γ`, `γ* = π/2`,
/// `γ_m = π`. Here the whole injection `p_o + p(t)` is the disturbance, so
/// `bound` should be centred with [`DisturbanceBound::with_nominal`].
pub fn criterion_i_original(
    net: &PowerNetwork,
    pair: &IncidencePair,
    bound: &DisturbanceBound,
) -> Result<CertificateReport, CertificateError> {
    quadratic_certificate(net, pair, Spreads::zero(), bound, Criterion::IOriginal)
}

fn quadratic_certificate(
    net: &PowerNetwork,
    pair: &IncidencePair,
    spreads: Spreads,
    bound: &DisturbanceBound,
    criterion: Criterion,
) -> Result<CertificateReport, CertificateError> {
    bound.validate(net.n())?;
    let lambda2 = algebraic_connectivity(&laplacian(net))?;
    let w = match bound.realized {
        Some(r) => r.complete,
        None => bound.worst_case(net.n(), |p| complete_weighted_norm(net, pair, p)),
    };
    let delta_l = spreads.edge;
    let gamma_m = PI - spreads.combined;
    let gamma_star = FRAC_PI_2 - delta_l;
    let bounds = QuadraticBounds::new(net, lambda2, w, delta_l, gamma_m);

    // σ(γ) = √(max dd/min dd)·n·w/(γκ(γ)d) = λ₂/g(γ).
    let ratio = libm::sqrt(bounds.alpha_upper / bounds.alpha_lower);
    let sigma = |g: f64| ratio * bounds.mu_scale * lambda2 / (g * kappa_unchecked(g, delta_l));
    let lambda_cr = sigma(gamma_star);
    let passed = lambda2 > lambda_cr;
    let window = if passed { rplf::certify(&bounds, gamma_star)? } else { None };
    Ok(CertificateReport {
        criterion,
        lambda_value: lambda2,
        lambda_cr,
        gamma_star,
        gamma_m,
        delta_l,
        disturbance_norm: w,
        window,
        passed,
        varpi_bound: passed.then(|| varpi_bound(net, bound)),
        gamma_s: None,
    })
}

/// Criterion II: certified when `λ_s(Q) > λ_cr = σ(γ*)` with
/// `κ(γ*) = (5/3) cos(γ* + δ̄_l)`.
pub fn criterion_ii(
    net: &PowerNetwork,
    pair: &IncidencePair,
    eq: &Equilibrium,
    bound: &DisturbanceBound,
) -> Result<CertificateReport, CertificateError> {
    check_spreads(&eq.spreads)?;
    bound.validate(net.n())?;
    let lambda_s = smallest_nonzero_eigenvalue(&q_matrix(net, pair))?;
    let w = match bound.realized {
        Some(r) => r.edge,
        None => bound.worst_case(net.n(), |p| edge_weighted_norm(net, pair, p)),
    };
    let delta_l = eq.spreads.edge;
    let gamma_star = rplf::solve_gamma_star(2.5, 1.0, delta_l)?;
    let gamma_s = rplf::solve_gamma_s(delta_l)?;
    let bounds = PotentialBounds::new(net, lambda_s, w, delta_l);

    let ratio = libm::pow(bounds.max_weight / bounds.min_weight, 1.5);
    let sigma = |g: f64| w * ratio / (g * libm::pow(kappa_unchecked(g, delta_l), 2.5));
    let lambda_cr = sigma(gamma_star);
    let passed = lambda_s > lambda_cr;
    let window = if passed { rplf::certify(&bounds, gamma_star)? } else { None };
    Ok(CertificateReport {
        criterion: Criterion::II,
        lambda_value: lambda_s,
        lambda_cr,
        gamma_star,
        gamma_m: bounds.gamma_m(),
        delta_l,
        disturbance_norm: w,
        window,
        passed,
        varpi_bound: passed.then(|| varpi_bound(net, bound)),
        gamma_s: Some(gamma_s),
    })
}

/// Region-of-attraction estimate for `p ≡ 0`: `W(f_r,max)` is invariant and
/// contains the ball of radius `gamma_r`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RoaEstimate {
    pub criterion: Criterion,
    pub f_r_max: f64,
    pub gamma_r: f64,
    pub gamma_m: f64,
    pub gamma_s: Option<f64>,
}

/// Ball `‖B_cᵀδ‖ ≤ γ_r` from the quadratic energy.
pub fn roa_i(net: &PowerNetwork, eq: &Equilibrium) -> Result<RoaEstimate, CertificateError> {
    check_spreads(&eq.spreads)?;
    let d = net.total_damping();
    let (lo, hi) = net.damping_product_range();
    let gamma_m = PI - eq.spreads.combined;
    Ok(RoaEstimate {
        criterion: Criterion::RoaI,
        f_r_max: gamma_m * gamma_m * lo / (2.0 * d),
        gamma_r: gamma_m * libm::sqrt(lo / hi),
        gamma_m,
        gamma_s: None,
    })
}

/// Ball `‖Bᵀδ‖ ≤ γ_r` from the potential energy, with γ_s the maximizer of
/// `γ²κ(γ)`.
pub fn roa_ii(net: &PowerNetwork, eq: &Equilibrium) -> Result<RoaEstimate, CertificateError> {
    check_spreads(&eq.spreads)?;
    let delta_l = eq.spreads.edge;
    let gamma_s = rplf::solve_gamma_s(delta_l)?;
    let k = kappa_unchecked(gamma_s, delta_l);
    let (lo, hi) = (net.min_weight(), net.max_weight());
    Ok(RoaEstimate {
        criterion: Criterion::RoaII,
        f_r_max: gamma_s * gamma_s * k * lo / 2.0,
        gamma_r: gamma_s * libm::sqrt(k * lo / hi),
        gamma_m: rplf::kappa_limit(delta_l),
        gamma_s: Some(gamma_s),
    })
}

/// Residuals of the KYP equalities for `F = 0`, `G = D⁻¹`, `H = I` and the
/// scaled matrix `αP`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct KypReport {
    pub alpha: f64,
    pub beta: f64,
    /// `‖PF + FᵀP + LᵀL‖` with `L = 0`.
    pub lyapunov: f64,
    /// `‖PG − αI − Xeₙᵀ‖` with `X = −αDeₙ/d`.
    pub output: f64,
    /// `‖WᵀW − 2βD⁻¹‖` with `W = √(2β)D^{−1/2}`.
    pub feedthrough: f64,
    pub failed: Vec<&'static str>,
}

impl KypReport {
    pub fn passed(&self) -> bool {
        self.failed.is_empty()
    }
}

pub const KYP_TOL: f64 = 1e-10;

/// `D − D eₙ eₙᵀ D/d`.
pub fn kyp_p(net: &PowerNetwork) -> Matrix {
    let d = net.damping();
    let total = net.total_damping();
    let n = net.n();
    let mut p = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            p[(i, j)] = if i == j { d[i] } else { 0.0 } - d[i] * d[j] / total;
        }
    }
    p
}

pub fn verify_kyp(net: &PowerNetwork, alpha: f64, beta: f64) -> KypReport {
    verify_kyp_with(net, &kyp_p(net), alpha, beta)
}

/// As [`verify_kyp`] with a caller-supplied (unscaled) `P`.
pub fn verify_kyp_with(net: &PowerNetwork, p: &Matrix, alpha: f64, beta: f64) -> KypReport {
    let n = net.n();
    let d = net.damping();
    let total = net.total_damping();

    let f = Matrix::zeros(n, n);
    let lyapunov = p.matmul(&f).add(&f.transpose().matmul(p)).max_abs();

    let mut output = 0.0_f64;
    for i in 0..n {
        for j in 0..n {
            let pg = alpha * p[(i, j)] / d[j];
            let x_i = -alpha * d[i] / total;
            let rhs = if i == j { alpha } else { 0.0 } + x_i;
            output = output.max((pg - rhs).abs());
        }
    }

    let mut feedthrough = 0.0_f64;
    for i in 0..n {
        let w = libm::sqrt(2.0 * beta / d[i]);
        feedthrough = feedthrough.max((w * w - 2.0 * beta / d[i]).abs());
    }

    let mut failed = Vec::new();
    if !(lyapunov <= KYP_TOL) {
        failed.push("PF + FᵀP = −LᵀL");
    }
    if !(output <= KYP_TOL) {
        failed.push("PG = αI + Xeₙᵀ");
    }
    if !(feedthrough <= KYP_TOL) {
        failed.push("WᵀW = 2βG");
    }
    KypReport {
        alpha,
        beta,
        lyapunov,
        output,
        feedthrough,
        failed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::spreads;
    use crate::network::{build_incidence, Edge};

    fn two_node(a: f64, d: [f64; 2]) -> (PowerNetwork, IncidencePair) {
        let net = PowerNetwork::new(2, vec![Edge::new(0, 1, a)], d.to_vec(), vec![0]).unwrap();
        let pair = build_incidence(&net);
        (net, pair)
    }

    #[test]
    fn zero_disturbance_always_passes() {
        let (net, pair) = two_node(1.0, [1.0, 2.0]);
        let eq = Equilibrium::flat(2);
        let r = criterion_i(&net, &pair, &eq, &DisturbanceBound::zero()).unwrap();
        assert!(r.passed);
        assert_eq!(r.lambda_cr, 0.0);
        let w = r.window.unwrap();
        assert_eq!(w.gamma_min, 0.0);
        assert_eq!(w.gamma_max, PI);
        let r2 = criterion_ii(&net, &pair, &eq, &DisturbanceBound::zero()).unwrap();
        assert!(r2.passed);
        assert_eq!(r2.window.unwrap().gamma_min, 0.0);
    }

    #[test]
    fn lambda_cr_scales_linearly() {
        let (net, pair) = two_node(1.0, [1.0, 1.5]);
        let eq = Equilibrium::flat(2);
        let r1 = criterion_i(&net, &pair, &eq, &DisturbanceBound::new(0.1, vec![0])).unwrap();
        let r2 = criterion_i(&net, &pair, &eq, &DisturbanceBound::new(0.2, vec![0])).unwrap();
        assert!((r2.lambda_cr / r1.lambda_cr - 2.0).abs() < 1e-12);
    }

    #[test]
    fn original_matches_flat_deviation() {
        let (net, pair) = two_node(2.0, [0.8, 0.9]);
        let b = DisturbanceBound::new(0.3, vec![1]);
        let a = criterion_i(&net, &pair, &Equilibrium::flat(2), &b).unwrap();
        let o = criterion_i_original(&net, &pair, &b).unwrap();
        assert_eq!(a.lambda_cr, o.lambda_cr);
        assert_eq!(a.window, o.window);
    }

    #[test]
    fn original_window_is_symmetric() {
        let (net, pair) = two_node(2.0, [1.0, 1.0]);
        let r = criterion_i_original(&net, &pair, &DisturbanceBound::new(0.5, vec![0])).unwrap();
        let w = r.window.unwrap();
        assert!((w.gamma_min + w.gamma_max - PI).abs() < 1e-9);
    }

    #[test]
    fn single_node_support_is_exact() {
        let (net, pair) = two_node(1.0, [1.0, 3.0]);
        // diag{d1 d2}·(p1/d1) = 3·0.5
        let b = DisturbanceBound::new(0.5, vec![0]);
        let w = b.worst_case(2, |p| complete_weighted_norm(&net, &pair, p));
        assert!((w - 1.5).abs() < 1e-15);
    }

    #[test]
    fn spread_gap_is_checked() {
        let net = PowerNetwork::new(
            4,
            vec![Edge::new(0, 1, 1.0), Edge::new(1, 2, 1.0), Edge::new(2, 3, 1.0)],
            vec![1.0; 4],
            vec![0],
        )
        .unwrap();
        let pair = build_incidence(&net);
        let theta = vec![0.0, 0.9, 1.8, 2.7];
        let mut eq = Equilibrium::flat(4);
        eq.spreads = spreads(&theta, &pair);
        eq.theta = theta;
        assert!(matches!(
            criterion_i(&net, &pair, &eq, &DisturbanceBound::zero()),
            Err(CertificateError::SpreadGap(_))
        ));
    }

    #[test]
    fn roa_uniform_flat_is_pi() {
        let (net, _) = two_node(1.0, [0.9, 0.9]);
        let r = roa_i(&net, &Equilibrium::flat(2)).unwrap();
        assert!((r.gamma_r - PI).abs() < 1e-15);
    }

    #[test]
    fn roa_ii_gamma_s_flat() {
        let (net, _) = two_node(1.0, [1.0, 1.0]);
        let r = roa_ii(&net, &Equilibrium::flat(2)).unwrap();
        assert!((r.gamma_s.unwrap() - 2.028_757_838_110_434_5).abs() < 1e-9);
    }

    #[test]
    fn kyp_both_choices_pass() {
        let (net, _) = two_node(1.0, [0.7, 1.3]);
        assert!(verify_kyp(&net, 1.0, 0.0).passed());
        assert!(verify_kyp(&net, 0.0, 1.0).passed());
    }

    #[test]
    fn kyp_detects_perturbed_p() {
        let (net, _) = two_node(1.0, [0.7, 1.3]);
        let mut p = kyp_p(&net);
        p[(0, 1)] += 1e-3;
        p[(1, 0)] += 1e-3;
        let r = verify_kyp_with(&net, &p, 1.0, 0.0);
        assert!(!r.passed());
        assert!((r.output - 1e-3 / 0.7).abs() < 1e-12);
    }
}
