//! Brute-force validators for the test suite. Nothing here calls the
//! bisection, golden-section or Jacobi kernels of the core crate; scans,
//! sorting and nalgebra's dense eigensolver are the whole toolbox.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use syncert_core::certificates::{CertificateReport, Criterion, DisturbanceBound};
use syncert_core::equilibrium::Equilibrium;
use syncert_core::network::PowerNetwork;

/// Dense scan of `f` on `points + 1` nodes of `[lo, hi]`, refined by the
/// parabola through the best node and its neighbours.
pub fn grid_extremum(f: impl Fn(f64) -> f64, lo: f64, hi: f64, points: usize) -> (f64, f64) {
    let points = points.max(2);
    let step = (hi - lo) / points as f64;
    let values: Vec<f64> = (0..=points).map(|k| f(lo + step * k as f64)).collect();
    let (best, &fmax) = values
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_finite())
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("at least one finite sample");
    let x = lo + step * best as f64;
    if best == 0 || best == points {
        return (x, fmax);
    }
    let (fm, fp) = (values[best - 1], values[best + 1]);
    let curvature = fm - 2.0 * fmax + fp;
    if !(curvature < 0.0) {
        return (x, fmax);
    }
    let offset = 0.5 * (fm - fp) / curvature;
    let xr = x + offset * step;
    (xr, fmax - 0.25 * (fm - fp) * offset)
}

/// First and last points where `g ≥ 1` on a dense grid of `[lo, hi]`, each
/// located by linear interpolation against the neighbouring sample.
pub fn grid_crossings(g: impl Fn(f64) -> f64, lo: f64, hi: f64, points: usize) -> Option<(f64, f64)> {
    let step = (hi - lo) / points as f64;
    let xs: Vec<f64> = (0..=points).map(|k| lo + step * k as f64).collect();
    let vs: Vec<f64> = xs.iter().map(|&x| g(x)).collect();
    let first = vs.iter().position(|&v| v >= 1.0)?;
    let last = vs.iter().rposition(|&v| v >= 1.0)?;
    let interp = |a: usize, b: usize| {
        let (x0, x1, v0, v1) = (xs[a], xs[b], vs[a], vs[b]);
        if v1 == v0 {
            x1
        } else {
            x0 + (1.0 - v0) / (v1 - v0) * (x1 - x0)
        }
    };
    let gmin = if first == 0 { xs[0] } else { interp(first - 1, first) };
    let gmax = if last == points { xs[points] } else { interp(last, last + 1) };
    Some((gmin, gmax))
}

fn kappa(gamma: f64, delta_l: f64) -> f64 {
    let half = 0.5 * gamma;
    let sinc = if half == 0.0 { 1.0 } else { half.sin() / half };
    sinc * (half + delta_l).cos()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DecreaseCheck {
    pub samples: usize,
    /// Samples where `V̇ ≥ 0`.
    pub violations: usize,
    /// Samples skipped because the annulus `μ(γ) < ‖·‖ ≤ γ` was empty.
    pub skipped: usize,
}

/// Energy, its gradient and the monitored norm of one criterion, written
/// from scratch.
struct Model<'a> {
    net: &'a PowerNetwork,
    theta: Vec<f64>,
    criterion: Criterion,
}

impl Model<'_> {
    fn rhs(&self, delta: &[f64], p: &[f64]) -> Vec<f64> {
        let mut flow = vec![0.0; delta.len()];
        for e in self.net.edges() {
            let now = (delta[e.i] + self.theta[e.i] - delta[e.j] - self.theta[e.j]).sin();
            let base = (self.theta[e.i] - self.theta[e.j]).sin();
            let f = e.weight * (now - base);
            flow[e.i] += f;
            flow[e.j] -= f;
        }
        flow.iter()
            .zip(p)
            .zip(self.net.damping())
            .map(|((f, pi), d)| -(f - pi) / d)
            .collect()
    }

    fn gradient(&self, delta: &[f64]) -> Vec<f64> {
        let n = delta.len();
        let d = self.net.damping();
        match self.criterion {
            Criterion::II => {
                let mut g = vec![0.0; n];
                for e in self.net.edges() {
                    let now = (delta[e.i] + self.theta[e.i] - delta[e.j] - self.theta[e.j]).sin();
                    let base = (self.theta[e.i] - self.theta[e.j]).sin();
                    g[e.i] += e.weight * (now - base);
                    g[e.j] -= e.weight * (now - base);
                }
                g
            }
            _ => {
                // (D − d dᵀ/Σd) δ
                let total: f64 = d.iter().sum();
                let dot: f64 = d.iter().zip(delta).map(|(a, b)| a * b).sum();
                (0..n).map(|i| d[i] * delta[i] - d[i] * dot / total).collect()
            }
        }
    }

    fn norm(&self, delta: &[f64]) -> f64 {
        let mut s = 0.0;
        match self.criterion {
            Criterion::II => {
                for e in self.net.edges() {
                    s += (delta[e.i] - delta[e.j]).powi(2);
                }
            }
            _ => {
                for i in 0..delta.len() {
                    for j in (i + 1)..delta.len() {
                        s += (delta[i] - delta[j]).powi(2);
                    }
                }
            }
        }
        s.sqrt()
    }

    /// `μ(γ)` from the report's λ-value and disturbance norm.
    fn mu(&self, report: &CertificateReport, gamma: f64) -> f64 {
        let k = kappa(gamma, report.delta_l);
        let w = report.disturbance_norm;
        match self.criterion {
            Criterion::II => {
                let (lo, hi) = (self.net.min_weight(), self.net.max_weight());
                w * hi / (report.lambda_value * lo * k * k)
            }
            _ => {
                let total: f64 = self.net.damping().iter().sum();
                self.net.n() as f64 * w / (report.lambda_value * total * k)
            }
        }
    }
}

/// Monte Carlo check of the decrease condition `V̇ < 0` on the annulus
/// `μ(γ) < ‖·‖ ≤ γ` for `γ` drawn uniformly from the certified window,
/// with disturbances at the sign vertices of `bound`.
pub fn mc_decrease_check(
    net: &PowerNetwork,
    eq: &Equilibrium,
    report: &CertificateReport,
    bound: &DisturbanceBound,
    samples: usize,
    seed: u64,
) -> DecreaseCheck {
    let w = report.window.expect("certificate must have passed");
    decrease_check(net, eq, report, bound, samples, seed, |rng| {
        let g = rng.random_range(w.gamma_min..=w.gamma_max);
        (g, g)
    })
}

/// Same check on the annulus `μ(mu_at) < ‖·‖ ≤ outer`. With `outer`
/// beyond the window's `γ_max` this is a negative control.
pub fn mc_decrease_check_annulus(
    net: &PowerNetwork,
    eq: &Equilibrium,
    report: &CertificateReport,
    bound: &DisturbanceBound,
    mu_at: f64,
    outer: f64,
    samples: usize,
    seed: u64,
) -> DecreaseCheck {
    decrease_check(net, eq, report, bound, samples, seed, |_| (mu_at, outer))
}

fn decrease_check(
    net: &PowerNetwork,
    eq: &Equilibrium,
    report: &CertificateReport,
    bound: &DisturbanceBound,
    samples: usize,
    seed: u64,
    mut pick: impl FnMut(&mut ChaCha8Rng) -> (f64, f64),
) -> DecreaseCheck {
    let n = net.n();
    let theta = match report.criterion {
        Criterion::IOriginal => vec![0.0; n],
        _ => eq.theta.clone(),
    };
    let model = Model {
        net,
        theta,
        criterion: report.criterion,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = (n - 1) as i32;
    let mut out = DecreaseCheck {
        samples,
        violations: 0,
        skipped: 0,
    };
    for _ in 0..samples {
        // γ at which μ is evaluated, and the outer radius.
        let (at, gamma) = pick(&mut rng);
        let mu = model.mu(report, at);
        if !(mu < gamma) {
            out.skipped += 1;
            continue;
        }
        // Radius uniform in (n−1)-dimensional volume over the annulus.
        let u: f64 = rng.random();
        let r = (mu.powi(dim) + u * (gamma.powi(dim) - mu.powi(dim))).powf(1.0 / dim as f64);
        let mut x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let scale = r / model.norm(&x);
        x.iter_mut().for_each(|v| *v *= scale);
        let mut p = if bound.nominal.is_empty() { vec![0.0; n] } else { bound.nominal.clone() };
        for &node in &bound.support {
            p[node] += if rng.random::<bool>() { bound.magnitude } else { -bound.magnitude };
        }
        let f = model.rhs(&x, &p);
        let vdot: f64 = model.gradient(&x).iter().zip(&f).map(|(a, b)| a * b).sum();
        if vdot >= 0.0 {
            out.violations += 1;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EigenInequalityReport {
    pub trials: usize,
    /// Index pairs `(i, j)` checked across all trials.
    pub checks: usize,
    pub violations: usize,
    /// Largest `λ_{i+j−1}(XY) − λ_j(X)λ_i(Y)` seen, relative to `λ_1(X)λ_1(Y)`.
    pub worst_excess: f64,
    /// Random network instances checked for `λ_s(Q̄) ≥ λ_s(Q)κ/max a`.
    pub q_trials: usize,
    pub q_violations: usize,
}

fn descending(m: DMatrix<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

fn random_psd(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let rank = rng.random_range(1..=n);
    let a = DMatrix::from_fn(n, rank, |_, _| rng.random_range(-1.0..1.0));
    &a * a.transpose()
}

/// Smallest eigenvalue above `1e-9` times the largest.
fn smallest_nonzero(m: DMatrix<f64>) -> f64 {
    let v = descending(m);
    let tol = 1e-9 * v[0].abs();
    v.into_iter().filter(|x| *x > tol).fold(f64::INFINITY, f64::min)
}

/// Checks `λ_{i+j−1}(XY) ≤ λ_j(X)λ_i(Y)` for random PSD pairs, and the bound
/// `λ_s(Q̄) ≥ λ_s(Q)κ/max a` for `Q̄ = (A_pA_v)^{1/2}BᵀD⁻¹B(A_vA_p)^{1/2}` on
/// random connected graphs with `A_p` entries in `[κ, 1]`.
pub fn eigen_inequality_check(trials: usize, n_max: usize, seed: u64) -> EigenInequalityReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = EigenInequalityReport {
        trials,
        checks: 0,
        violations: 0,
        worst_excess: f64::NEG_INFINITY,
        q_trials: trials,
        q_violations: 0,
    };
    for _ in 0..trials {
        let n = rng.random_range(1..=n_max.max(1));
        let x = random_psd(&mut rng, n);
        let y = random_psd(&mut rng, n);
        let lx = descending(x.clone());
        let ly = descending(y.clone());
        // XY is similar to Y^{1/2} X Y^{1/2}.
        let ys = SymmetricEigen::new(y);
        let half = &ys.eigenvectors
            * DMatrix::from_diagonal(&ys.eigenvalues.map(|v| v.max(0.0).sqrt()))
            * ys.eigenvectors.transpose();
        let lxy = descending(&half * x * &half);
        let scale = (lx[0] * ly[0]).max(f64::MIN_POSITIVE);
        for i in 1..=n {
            for j in 1..=(n + 1 - i) {
                let excess = (lxy[i + j - 2] - lx[j - 1] * ly[i - 1]) / scale;
                report.checks += 1;
                report.worst_excess = report.worst_excess.max(excess);
                if excess > 1e-9 {
                    report.violations += 1;
                }
            }
        }

        if !q_bar_bound_holds(&mut rng, n_max.max(3)) {
            report.q_violations += 1;
        }
    }
    report
}

fn q_bar_bound_holds(rng: &mut ChaCha8Rng, n_max: usize) -> bool {
    let n = rng.random_range(3..=n_max);
    // Spanning path plus random chords.
    let mut edges: Vec<(usize, usize)> = (0..n - 1).map(|i| (i, i + 1)).collect();
    for i in 0..n {
        for j in (i + 2)..n {
            if rng.random_bool(0.4) {
                edges.push((i, j));
            }
        }
    }
    let m = edges.len();
    let a: Vec<f64> = (0..m).map(|_| rng.random_range(0.2..5.0)).collect();
    let d: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..1.5)).collect();
    let kappa: f64 = rng.random_range(0.05..1.0);
    let ap: Vec<f64> = (0..m).map(|_| rng.random_range(kappa..=1.0)).collect();
    let mut b = DMatrix::zeros(n, m);
    for (k, &(i, j)) in edges.iter().enumerate() {
        b[(i, k)] = 1.0;
        b[(j, k)] = -1.0;
    }
    let dinv = DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 / d[i] } else { 0.0 });
    let core = b.transpose() * dinv * &b;
    let av = DMatrix::from_fn(m, m, |i, j| if i == j { a[i] } else { 0.0 });
    let root = DMatrix::from_fn(m, m, |i, j| if i == j { (a[i] * ap[i]).sqrt() } else { 0.0 });
    let q = &av * &core * &av;
    let q_bar = &root * &core * &root;
    let max_a = a.iter().copied().fold(0.0, f64::max);
    let lhs = smallest_nonzero(q_bar);
    let rhs = smallest_nonzero(q) * kappa / max_a;
    lhs >= rhs * (1.0 - 1e-9)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn sine_peak() {
        let (x, v) = grid_extremum(f64::sin, 0.0, PI, 1000);
        assert!((x - PI / 2.0).abs() < 1e-4);
        assert!((v - 1.0).abs() < 1e-4);
    }

    #[test]
    fn crossings_of_a_tent() {
        let (a, b) = grid_crossings(|x| 2.0 - (x - 1.0).abs() * 2.0, 0.0, 2.0, 1000).unwrap();
        assert!((a - 0.5).abs() < 1e-9 && (b - 1.5).abs() < 1e-9);
    }

    #[test]
    fn random_pairs_satisfy_both_bounds() {
        let r = eigen_inequality_check(50, 6, 1);
        assert_eq!(r.violations, 0);
        assert_eq!(r.q_violations, 0);
    }
}
