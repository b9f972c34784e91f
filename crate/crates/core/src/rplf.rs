//! Region-parametrized Lyapunov functions (RPLFs).
//!
//! An RPLF `V` on `‖x‖ ≤ γ_m` comes with bounds
//!
//! ```text
//! α̲(γ)‖x‖² ≤ V(x) ≤ ᾱ(γ)‖x‖²      for ‖x‖ ≤ γ
//! V̇ < 0                            for ‖x‖ ≥ μ(γ)
//! ```
//!
//! and the margin `g(γ) = γ/μ(γ)·√(α̲/ᾱ)`. Wherever `g > 1` the sublevel set
//! `W(χ)` is positively invariant for `χ ∈ [f_l(γ), f_r(γ)]` with
//! `f_l = ᾱμ²` and `f_r = γ²α̲`. This module locates the window
//! `[γ_min, γ_max]` where `g ≥ 1`, the energy range `[f_l,min, f_r,max]` and
//! the balls `B(γ_l)`, `B(γ_r)` that sandwich the invariant sets.
//!
//! All transcendental equations are solved by bisection to `1e-10`, bracketed
//! by a 10³-point scan; maximizations use the same grid plus golden-section
//! refinement.

use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI};

use thiserror::Error;

use crate::roots::{bisect, grid_golden_max, golden_max, scan_bracket, SCAN_POINTS};

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum RplfError {
    #[error("γ = {gamma} lies outside the domain [0, {limit}]")]
    Domain { gamma: f64, limit: f64 },
    #[error("edge spread {0} must lie in [0, π/2)")]
    BadSpread(f64),
    #[error("exponents p = {p}, q = {q} need p ≥ q ≥ 0")]
    BadExponents { p: f64, q: f64 },
    #[error("stationarity residual has no sign change for p = {p}, q = {q}")]
    NoSignChange { p: f64, q: f64 },
    #[error("f_l must increase monotonically on the window; it decreases near γ = {gamma}")]
    FlNotMonotone { gamma: f64 },
    #[error("no γ in [{lo}, {hi}] satisfies the ball-inclusion constraint")]
    Infeasible { lo: f64, hi: f64 },
}

fn check_spread(delta_l: f64) -> Result<(), RplfError> {
    if (0.0..FRAC_PI_2).contains(&delta_l) {
        Ok(())
    } else {
        Err(RplfError::BadSpread(delta_l))
    }
}

/// Upper end of κ's domain, `π − 2δ̄_l`, where κ vanishes.
pub fn kappa_limit(delta_l: f64) -> f64 {
    PI - 2.0 * delta_l
}

pub(crate) fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        libm::sin(x) / x
    }
}

pub(crate) fn kappa_unchecked(gamma: f64, delta_l: f64) -> f64 {
    sinc(0.5 * gamma) * libm::cos(0.5 * gamma + delta_l)
}

/// `κ(γ) = sinc(γ/2)·cos(γ/2 + δ̄_l)`, the smallest value of the sine
/// difference quotient over a region of size γ around an equilibrium with
/// edge spread `δ̄_l`. Defined on `[0, π − 2δ̄_l]`.
pub fn kappa(gamma: f64, delta_l: f64) -> Result<f64, RplfError> {
    check_spread(delta_l)?;
    let limit = kappa_limit(delta_l);
    if !(gamma >= 0.0 && gamma <= limit + 1e-12) {
        return Err(RplfError::Domain { gamma, limit });
    }
    Ok(kappa_unchecked(gamma.min(limit), delta_l).max(0.0))
}

/// `f(γ) = γ^q κ(γ)^p`, quasi-sinusoidal on `[0, π − 2δ̄_l]`.
pub fn f_pq(gamma: f64, p: f64, q: f64, delta_l: f64) -> Result<f64, RplfError> {
    if !(p >= q && q >= 0.0) {
        return Err(RplfError::BadExponents { p, q });
    }
    let k = kappa(gamma, delta_l)?;
    Ok(libm::pow(gamma, q) * libm::pow(k, p))
}

/// Interior stationary point of `γ^q κ^p`, i.e. the root of
/// `p cos(γ + δ̄_l) − (p − q) κ(γ)` on `(0, π − 2δ̄_l)`.
fn stationary_point(p: f64, q: f64, delta_l: f64) -> Result<f64, RplfError> {
    check_spread(delta_l)?;
    let residual = |g: f64| p * libm::cos(g + delta_l) - (p - q) * kappa_unchecked(g, delta_l);
    let (a, b) =
        scan_bracket(&residual, 0.0, kappa_limit(delta_l)).ok_or(RplfError::NoSignChange { p, q })?;
    Ok(bisect(residual, a, b))
}

/// Maximizer γ* of `γ^q κ^p`. For `p > q` it lies below `π/2 − δ̄_l`; for
/// `p = q` it is exactly `π/2 − δ̄_l`.
pub fn solve_gamma_star(p: f64, q: f64, delta_l: f64) -> Result<f64, RplfError> {
    if !(p >= q && q >= 0.0 && p > 0.0) {
        return Err(RplfError::BadExponents { p, q });
    }
    stationary_point(p, q, delta_l)
}

/// Maximizer γ_s of `γ² κ(γ)`, the root of `cos(γ + δ̄_l) = −κ(γ)`.
pub fn solve_gamma_s(delta_l: f64) -> Result<f64, RplfError> {
    stationary_point(1.0, 2.0, delta_l)
}

/// The triple `(α̲(γ), ᾱ(γ), μ(γ))` on `[0, γ_m]`.
pub trait RegionBounds {
    fn alpha_lower(&self, gamma: f64) -> f64;
    fn alpha_upper(&self, gamma: f64) -> f64;
    fn mu(&self, gamma: f64) -> f64;
    fn gamma_m(&self) -> f64;

    /// `g(γ) = γ/μ(γ)·√(α̲/ᾱ)`; infinite where `μ = 0`.
    fn margin(&self, gamma: f64) -> f64 {
        let mu = self.mu(gamma);
        if mu == 0.0 {
            return f64::INFINITY;
        }
        gamma / mu * libm::sqrt(self.alpha_lower(gamma) / self.alpha_upper(gamma))
    }

    fn f_l(&self, gamma: f64) -> f64 {
        let mu = self.mu(gamma);
        self.alpha_upper(gamma) * mu * mu
    }

    fn f_r(&self, gamma: f64) -> f64 {
        gamma * gamma * self.alpha_lower(gamma)
    }
}

/// Closure-backed [`RegionBounds`].
pub struct FnBounds<L, U, M> {
    pub lower: L,
    pub upper: U,
    pub mu: M,
    pub gamma_m: f64,
}

impl<L, U, M> RegionBounds for FnBounds<L, U, M>
where
    L: Fn(f64) -> f64,
    U: Fn(f64) -> f64,
    M: Fn(f64) -> f64,
{
    fn alpha_lower(&self, gamma: f64) -> f64 {
        (self.lower)(gamma)
    }
    fn alpha_upper(&self, gamma: f64) -> f64 {
        (self.upper)(gamma)
    }
    fn mu(&self, gamma: f64) -> f64 {
        (self.mu)(gamma)
    }
    fn gamma_m(&self) -> f64 {
        self.gamma_m
    }
}

/// Everything the window search produces.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Window {
    pub gamma_star: f64,
    pub gamma_min: f64,
    pub gamma_max: f64,
    pub f_l_min: f64,
    pub f_r_max: f64,
    pub gamma_l: f64,
    pub gamma_r: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Crossings {
    /// `g ≥ 1` on `[gamma_min, gamma_max]`; the interval collapses to γ* at
    /// tangency.
    Window { gamma_min: f64, gamma_max: f64 },
    /// `g(γ*) < 1`: the certificate fails.
    Fails { peak: f64 },
}

/// Solves `g(γ_min) = g(γ_max) = 1` around the peak of a quasi-sinusoidal
/// `g`. Where `g` is still at least 1 at an end of `[0, γ_m]`, that end is
/// returned.
pub fn solve_crossings(g: impl Fn(f64) -> f64, gamma_star: f64, gamma_m: f64) -> Crossings {
    let peak = g(gamma_star);
    if peak < 1.0 {
        return Crossings::Fails { peak };
    }
    if peak == 1.0 {
        return Crossings::Window {
            gamma_min: gamma_star,
            gamma_max: gamma_star,
        };
    }
    let shifted = |x: f64| g(x) - 1.0;
    let gamma_min = if g(0.0) < 1.0 {
        bisect(shifted, 0.0, gamma_star)
    } else {
        0.0
    };
    let gamma_max = if g(gamma_m) < 1.0 {
        bisect(shifted, gamma_star, gamma_m)
    } else {
        gamma_m
    };
    Crossings::Window {
        gamma_min,
        gamma_max,
    }
}

/// `(f_l,min, f_r,max)` over `[gamma_min, gamma_max]`.
///
/// Requires `f_l` to be non-decreasing on the window, checked on a 10³-point
/// grid.
pub fn energy_window(
    bounds: &impl RegionBounds,
    gamma_min: f64,
    gamma_max: f64,
) -> Result<(f64, f64), RplfError> {
    let step = (gamma_max - gamma_min) / SCAN_POINTS as f64;
    if step > 0.0 {
        let mut prev = bounds.f_l(gamma_min);
        for k in 1..=SCAN_POINTS {
            let x = gamma_min + step * k as f64;
            let v = bounds.f_l(x);
            if v < prev - 1e-12 * prev.abs() {
                return Err(RplfError::FlNotMonotone { gamma: x });
            }
            prev = v;
        }
    }
    let f_l_min = bounds.f_l(gamma_min);
    let (_, f_r_max) = grid_golden_max(&|x| bounds.f_r(x), gamma_min, gamma_max);
    Ok((f_l_min, f_r_max))
}

/// `(γ_l, γ_r)`: the smallest ball containing `W(f_l,min)` and the largest
/// ball inside `W(f_r,max)`, each searched over `γ ∈ [gamma_min, gamma_max]`
/// subject to the ball radius not exceeding γ.
pub fn state_window(
    bounds: &impl RegionBounds,
    f_l_min: f64,
    f_r_max: f64,
    gamma_min: f64,
    gamma_max: f64,
) -> Result<(f64, f64), RplfError> {
    let infeasible = RplfError::Infeasible {
        lo: gamma_min,
        hi: gamma_max,
    };
    let gamma_l = constrained_radius(|g| f_l_min / bounds.alpha_lower(g), gamma_min, gamma_max, false)
        .ok_or(infeasible)?;
    let gamma_r = constrained_radius(|g| f_r_max / bounds.alpha_upper(g), gamma_min, gamma_max, true)
        .ok_or(infeasible)?;
    Ok((gamma_l, gamma_r))
}

/// Region-of-attraction variant for `μ ≡ 0`: `f_r,max` over all of
/// `[0, γ_m]` and the largest ball inside `W(f_r,max)`.
pub fn roa_window(bounds: &impl RegionBounds) -> Result<(f64, f64), RplfError> {
    let gamma_m = bounds.gamma_m();
    let (_, f_r_max) = grid_golden_max(&|x| bounds.f_r(x), 0.0, gamma_m);
    let gamma_r = constrained_radius(|g| f_r_max / bounds.alpha_upper(g), 0.0, gamma_m, true)
        .ok_or(RplfError::Infeasible { lo: 0.0, hi: gamma_m })?;
    Ok((f_r_max, gamma_r))
}

/// Window search for a set of bounds with margin peak at `gamma_star`.
/// `Ok(None)` means the margin never reaches 1.
pub fn certify(bounds: &impl RegionBounds, gamma_star: f64) -> Result<Option<Window>, RplfError> {
    let (gamma_min, gamma_max) =
        match solve_crossings(|g| bounds.margin(g), gamma_star, bounds.gamma_m()) {
            Crossings::Fails { .. } => return Ok(None),
            Crossings::Window {
                gamma_min,
                gamma_max,
            } => (gamma_min, gamma_max),
        };
    let (f_l_min, f_r_max) = energy_window(bounds, gamma_min, gamma_max)?;
    let (gamma_l, gamma_r) = state_window(bounds, f_l_min, f_r_max, gamma_min, gamma_max)?;
    Ok(Some(Window {
        gamma_star,
        gamma_min,
        gamma_max,
        f_l_min,
        f_r_max,
        gamma_l,
        gamma_r,
    }))
}

const FEASIBILITY_SLACK: f64 = 1e-12;

/// Optimizes `√h(γ)` over `[lo, hi]` subject to `h(γ) ≤ γ²`.
fn constrained_radius(h: impl Fn(f64) -> f64, lo: f64, hi: f64, maximize: bool) -> Option<f64> {
    let feasible = |g: f64| h(g) <= g * g * (1.0 + FEASIBILITY_SLACK);
    let objective = |g: f64| {
        let r = libm::sqrt(h(g));
        if maximize {
            r
        } else {
            -r
        }
    };
    if hi <= lo {
        return feasible(lo).then(|| libm::sqrt(h(lo)));
    }

    let step = (hi - lo) / SCAN_POINTS as f64;
    let xs: Vec<f64> = (0..=SCAN_POINTS).map(|k| lo + step * k as f64).collect();
    let ok: Vec<bool> = xs.iter().map(|&x| feasible(x)).collect();
    let mut best: Option<(f64, f64)> = None;
    let consider = |best: &mut Option<(f64, f64)>, x: f64| {
        if feasible(x) {
            let v = objective(x);
            if best.map_or(true, |(_, b)| v > b) {
                *best = Some((x, v));
            }
        }
    };
    for (k, &x) in xs.iter().enumerate() {
        consider(&mut best, x);
        if k > 0 && ok[k] != ok[k - 1] {
            // Feasibility boundary: keep the feasible end of the bracket.
            let (mut a, mut b) = if ok[k] { (xs[k], xs[k - 1]) } else { (xs[k - 1], xs[k]) };
            for _ in 0..200 {
                if (a - b).abs() <= 1e-12 {
                    break;
                }
                let m = 0.5 * (a + b);
                if feasible(m) {
                    a = m;
                } else {
                    b = m;
                }
            }
            consider(&mut best, a);
        }
    }
    if let Some((x, _)) = best {
        let k = ((x - lo) / step) as usize;
        if k > 0 && k < SCAN_POINTS && ok[k - 1] && ok[k + 1] {
            let (xr, _) = golden_max(&objective, xs[k - 1], xs[k + 1]);
            consider(&mut best, xr);
        }
    }
    best.map(|(x, _)| libm::sqrt(h(x)))
}

/// Result of replaying the nested invariant-set search.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainOutcome {
    /// `(γ₁, χ)` pairs visited, starting from the initial level.
    pub steps: Vec<(f64, f64)>,
    pub final_level: f64,
    pub converged: bool,
}

/// Replays the nested search that shrinks an invariant level set: from `χ`,
/// take the smallest `γ₁` in the window with `f_r(γ₁) = χ`, move to
/// `χ' = f_l(γ₁)` and repeat. The chain should settle at `f_l(γ_min)`.
pub fn invariant_chain(
    bounds: &impl RegionBounds,
    window: &Window,
    chi: f64,
    max_steps: usize,
) -> ChainOutcome {
    let target = window.f_l_min;
    let tol = 1e-9 * target.abs().max(f64::MIN_POSITIVE);
    let (peak, _) = grid_golden_max(&|x| bounds.f_r(x), window.gamma_min, window.gamma_max);
    let mut level = chi.min(window.f_r_max);
    let mut steps = alloc::vec![(window.gamma_max, level)];
    for _ in 0..max_steps {
        if level - target <= tol {
            return ChainOutcome {
                steps,
                final_level: level,
                converged: true,
            };
        }
        let gamma_1 = if bounds.f_r(peak) <= level {
            peak
        } else {
            bisect(|g| bounds.f_r(g) - level, window.gamma_min, peak)
        };
        let next = bounds.f_l(gamma_1).max(target);
        if next >= level {
            break;
        }
        level = next;
        steps.push((gamma_1, level));
    }
    ChainOutcome {
        converged: level - target <= tol,
        steps,
        final_level: level,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::FRAC_PI_6;

    #[test]
    fn kappa_at_zero_is_cos_spread() {
        assert_eq!(kappa(0.0, 0.0).unwrap(), 1.0);
        assert!((kappa(0.0, 0.3).unwrap() - libm::cos(0.3)).abs() < 1e-15);
    }

    #[test]
    fn kappa_at_half_pi() {
        assert!((kappa(FRAC_PI_2, 0.0).unwrap() - 2.0 / PI).abs() < 1e-15);
    }

    #[test]
    fn kappa_matches_sin_over_gamma_when_flat() {
        for k in 1..50 {
            let g = k as f64 * 0.06;
            assert!((kappa(g, 0.0).unwrap() - libm::sin(g) / g).abs() < 1e-14);
        }
    }

    #[test]
    fn kappa_domain_errors() {
        assert!(matches!(kappa(-0.1, 0.0), Err(RplfError::Domain { .. })));
        assert!(matches!(kappa(3.0, 0.2), Err(RplfError::Domain { .. })));
        assert!(matches!(kappa(0.5, 1.7), Err(RplfError::BadSpread(_))));
    }

    #[test]
    fn f_pq_unit_exponents_is_sine() {
        for k in 0..40 {
            let g = k as f64 * 0.075;
            assert!((f_pq(g, 1.0, 1.0, 0.0).unwrap() - libm::sin(g)).abs() < 1e-14);
        }
    }

    #[test]
    fn f_pq_vanishes_at_ends() {
        for &(p, q) in &[(1.0, 1.0), (2.5, 1.0), (3.0, 2.0)] {
            assert_eq!(f_pq(0.0, p, q, 0.2).unwrap(), 0.0);
            assert!(f_pq(kappa_limit(0.2), p, q, 0.2).unwrap().abs() < 1e-15);
        }
    }

    #[test]
    fn f_pq_direct_evaluation() {
        let expected = libm::pow(libm::sin(1.0), 2.5);
        assert!((f_pq(1.0, 2.5, 1.0, 0.0).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn f_pq_rejects_bad_exponents() {
        assert!(matches!(f_pq(1.0, 1.0, 2.0, 0.0), Err(RplfError::BadExponents { .. })));
    }

    #[test]
    fn gamma_star_equal_exponents_is_quarter_turn() {
        assert!((solve_gamma_star(1.0, 1.0, 0.0).unwrap() - FRAC_PI_2).abs() < 1e-10);
        assert!((solve_gamma_star(2.0, 2.0, 0.2).unwrap() - (FRAC_PI_2 - 0.2)).abs() < 1e-10);
    }

    #[test]
    fn gamma_star_without_gamma_factor_has_no_root() {
        assert!(matches!(
            solve_gamma_star(1.0, 0.0, 0.0),
            Err(RplfError::NoSignChange { .. })
        ));
    }

    #[test]
    fn crossings_of_scaled_sine() {
        match solve_crossings(|g| libm::sin(g) / 0.5, FRAC_PI_2, PI) {
            Crossings::Window {
                gamma_min,
                gamma_max,
            } => {
                assert!((gamma_min - FRAC_PI_6).abs() < 1e-9);
                assert!((gamma_max - 5.0 * FRAC_PI_6).abs() < 1e-9);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn crossings_tangency_is_degenerate() {
        assert_eq!(
            solve_crossings(libm::sin, FRAC_PI_2, PI),
            Crossings::Window {
                gamma_min: FRAC_PI_2,
                gamma_max: FRAC_PI_2
            }
        );
    }

    #[test]
    fn crossings_below_one_fail() {
        assert!(matches!(
            solve_crossings(|g| 0.5 * libm::sin(g), FRAC_PI_2, PI),
            Crossings::Fails { .. }
        ));
    }

    #[test]
    fn constant_bounds_state_window() {
        let b = FnBounds {
            lower: |_| 2.0,
            upper: |_| 2.0,
            mu: |g| 0.5 * libm::sin(g).max(0.0) + 0.1,
            gamma_m: PI,
        };
        let (gl, gr) = state_window(&b, 2.0 * 0.4 * 0.4, 2.0 * 1.9 * 1.9, 0.4, 1.9).unwrap();
        assert!((gl - 0.4).abs() < 1e-12);
        assert!((gr - 1.9).abs() < 1e-12);
    }

    #[test]
    fn energy_window_rejects_decreasing_f_l() {
        let b = FnBounds {
            lower: |_| 1.0,
            upper: |_| 1.0,
            mu: |g: f64| 1.0 / (1.0 + g),
            gamma_m: 2.0,
        };
        assert!(matches!(
            energy_window(&b, 0.5, 1.5),
            Err(RplfError::FlNotMonotone { .. })
        ));
    }

    #[test]
    fn roa_window_constant_lower_bound() {
        let b = FnBounds {
            lower: |_| 0.3,
            upper: |_| 0.5,
            mu: |_| 0.0,
            gamma_m: 2.5,
        };
        let (f, gr) = roa_window(&b).unwrap();
        assert!((f - 2.5 * 2.5 * 0.3).abs() < 1e-12);
        assert!((gr - 2.5 * libm::sqrt(0.3 / 0.5)).abs() < 1e-10);
    }
}
