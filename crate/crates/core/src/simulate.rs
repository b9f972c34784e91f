//! Fixed-step RK4 integration of the deviation dynamics
//!
//! ```text
//! δ̇ = −D⁻¹(B A_v (sin(Bᵀ(δ + θ_o)) − sin(Bᵀθ_o)) − p(t))
//! ```
//!
//! with piecewise-constant random disturbances and line trips.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::ops::ControlFlow;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::certificates::RoaEstimate;
use crate::energy::v_quadratic;
use crate::linalg::norm_inf;
use crate::network::{connected_components, Edge, IncidencePair, PowerNetwork};

pub const DEFAULT_STEP: f64 = 1e-3;
pub const DEFAULT_HOLD_INTERVAL: f64 = 0.1;
/// `‖δ̇‖_∞` below which the pre-disturbance phase counts as settled.
pub const SETTLE_TOL: f64 = 1e-8;
/// `‖δ_c‖` below which a trajectory counts as back on 𝔼.
pub const CONVERGENCE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("step size {0} must be positive and finite")]
    BadStep(f64),
    #[error("{what} = {value} is not a whole number of steps of size {h}")]
    Misaligned { what: &'static str, value: f64, h: f64 },
    #[error("state became non-finite; last valid time {last_valid_time}")]
    NonFinite { last_valid_time: f64 },
    #[error("no line between nodes {0} and {1}")]
    UnknownEdge(usize, usize),
    #[error("disturbance node {node} out of range for {n} nodes")]
    NodeOutOfRange { node: usize, n: usize },
    #[error("disturbance bound {0} must be non-negative and finite")]
    BadMagnitude(f64),
    #[error("initial state has {got} entries, network has {expected} nodes")]
    StateLength { expected: usize, got: usize },
    #[error("trip time {trip} must precede the horizon {horizon}")]
    TripAfterHorizon { trip: f64, horizon: f64 },
}

/// Right-hand side of the deviation dynamics for a fixed topology.
///
/// The injection balancing `θ_o` is frozen at construction, so removing a
/// line afterwards leaves an unbalanced operating point and the state drifts
/// away from 𝔼.
#[derive(Debug, Clone, PartialEq)]
pub struct Dynamics {
    n: usize,
    edges: Vec<Edge>,
    damping: Vec<f64>,
    theta_o: Vec<f64>,
    /// `(B'A' sin(B'ᵀθ_o))_i − p_o,i` for the current topology; zero when
    /// intact.
    offset: Vec<f64>,
}

impl Dynamics {
    pub fn new(net: &PowerNetwork, theta_o: &[f64]) -> Self {
        assert_eq!(theta_o.len(), net.n(), "θ_o length must match the network");
        Self {
            n: net.n(),
            edges: net.edges().to_vec(),
            damping: net.damping().to_vec(),
            theta_o: theta_o.to_vec(),
            offset: vec![0.0; net.n()],
        }
    }

    /// The same dynamics with the line between `a` and `b` removed. The
    /// removed line's equilibrium flow stays in the injection balance.
    pub fn without_edge(&self, a: usize, b: usize) -> Option<Self> {
        let k = self.edges.iter().position(|e| e.connects(a, b))?;
        let mut out = self.clone();
        let e = out.edges.remove(k);
        let flow = e.weight * libm::sin(self.theta_o[e.i] - self.theta_o[e.j]);
        out.offset[e.i] -= flow;
        out.offset[e.j] += flow;
        Some(out)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Whether the current topology splits the nodes.
    pub fn is_disconnected(&self) -> bool {
        connected_components(self.n, &self.edges).len() > 1
    }

    pub fn rhs_into(&self, delta: &[f64], p: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.offset);
        for e in &self.edges {
            let u = delta[e.i] - delta[e.j];
            let th = self.theta_o[e.i] - self.theta_o[e.j];
            // sin(u + θ) − sin θ without cancellation.
            let f = e.weight * 2.0 * libm::cos(0.5 * u + th) * libm::sin(0.5 * u);
            out[e.i] += f;
            out[e.j] -= f;
        }
        for i in 0..self.n {
            out[i] = (p[i] - out[i]) / self.damping[i];
        }
    }

    pub fn rhs(&self, delta: &[f64], p: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        self.rhs_into(delta, p, &mut out);
        out
    }
}

/// `δ̇` of the intact network around `θ_o`.
pub fn rhs(net: &PowerNetwork, theta_o: &[f64], delta: &[f64], p: &[f64]) -> Vec<f64> {
    Dynamics::new(net, theta_o).rhs(delta, p)
}

/// Scratch buffers for [`rk4_step`].
#[derive(Debug, Clone)]
pub struct Workspace {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Workspace {
    pub fn new(n: usize) -> Self {
        Self {
            k1: vec![0.0; n],
            k2: vec![0.0; n],
            k3: vec![0.0; n],
            k4: vec![0.0; n],
            tmp: vec![0.0; n],
        }
    }
}

/// One classical RK4 step with `p` held constant over the step.
pub fn rk4_step(dynamics: &Dynamics, delta: &mut [f64], p: &[f64], h: f64, ws: &mut Workspace) {
    let n = delta.len();
    dynamics.rhs_into(delta, p, &mut ws.k1);
    for i in 0..n {
        ws.tmp[i] = delta[i] + 0.5 * h * ws.k1[i];
    }
    dynamics.rhs_into(&ws.tmp, p, &mut ws.k2);
    for i in 0..n {
        ws.tmp[i] = delta[i] + 0.5 * h * ws.k2[i];
    }
    dynamics.rhs_into(&ws.tmp, p, &mut ws.k3);
    for i in 0..n {
        ws.tmp[i] = delta[i] + h * ws.k3[i];
    }
    dynamics.rhs_into(&ws.tmp, p, &mut ws.k4);
    for i in 0..n {
        delta[i] += h / 6.0 * (ws.k1[i] + 2.0 * ws.k2[i] + 2.0 * ws.k3[i] + ws.k4[i]);
    }
}

fn check_step(h: f64) -> Result<(), SimError> {
    if h > 0.0 && h.is_finite() {
        Ok(())
    } else {
        Err(SimError::BadStep(h))
    }
}

/// `value / h` as a step count, provided it is (numerically) whole.
pub fn whole_steps(what: &'static str, value: f64, h: f64) -> Result<usize, SimError> {
    let steps = value / h;
    let rounded = libm::round(steps);
    if !(value >= 0.0) || (steps - rounded).abs() > 1e-6 * rounded.max(1.0) {
        return Err(SimError::Misaligned { what, value, h });
    }
    Ok(rounded as usize)
}

/// Integrates `steps` RK4 steps from `delta` at `t0`. `forcing(k, p)` fills
/// the disturbance held over step `k`; `observer(k, t, δ)` sees the state
/// after each step and may stop early. Returns the number of steps taken.
pub fn integrate_with(
    dynamics: &Dynamics,
    delta: &mut [f64],
    t0: f64,
    h: f64,
    steps: usize,
    mut forcing: impl FnMut(usize, &mut [f64]),
    mut observer: impl FnMut(usize, f64, &[f64]) -> ControlFlow<()>,
) -> Result<usize, SimError> {
    check_step(h)?;
    let mut ws = Workspace::new(delta.len());
    let mut p = vec![0.0; delta.len()];
    for k in 0..steps {
        forcing(k, &mut p);
        rk4_step(dynamics, delta, &p, h, &mut ws);
        let t = t0 + (k + 1) as f64 * h;
        if delta.iter().any(|v| !v.is_finite()) {
            return Err(SimError::NonFinite {
                last_valid_time: t - h,
            });
        }
        if observer(k + 1, t, delta).is_break() {
            return Ok(k + 1);
        }
    }
    Ok(steps)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum EventKind {
    Settled,
    DisturbanceOn,
    Trip,
    /// `‖B_cᵀδ‖` reached the criterion-I region-of-attraction radius.
    C1,
    /// `‖Bᵀδ‖` reached the criterion-II region-of-attraction radius.
    C2,
    Reclose,
    /// Some pair of nodes drifted more than π apart.
    Escape,
    /// The monitored norm entered the ultimate ball for good.
    EnterUltimateBall,
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Settled => "settled",
            Self::DisturbanceOn => "disturbance_on",
            Self::Trip => "trip",
            Self::C1 => "C1",
            Self::C2 => "C2",
            Self::Reclose => "reclose",
            Self::Escape => "escape",
            Self::EnterUltimateBall => "enter_ultimate_ball",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
}

/// Sampled states, rates and events on a uniform grid.
#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// `δ̇` at each sampled state, under the disturbance active there.
    pub freq: Vec<Vec<f64>>,
    pub events: Vec<Event>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    fn push(&mut self, t: f64, delta: &[f64], rate: Vec<f64>) {
        self.times.push(t);
        self.states.push(delta.to_vec());
        self.freq.push(rate);
    }

    fn event(&mut self, time: f64, kind: EventKind) {
        self.events.push(Event { time, kind });
    }

    fn sort_events(&mut self) {
        self.events.sort_by(|a, b| a.time.total_cmp(&b.time));
    }
}

/// Simple integration with a caller-supplied disturbance `p_of_step(k)`
/// held over step `k`, recording every `stride`-th step.
pub fn integrate(
    dynamics: &Dynamics,
    x0: &[f64],
    p_of_step: impl Fn(usize, &mut [f64]),
    t0: f64,
    t_end: f64,
    h: f64,
    stride: usize,
) -> Result<Trajectory, SimError> {
    check_step(h)?;
    let steps = whole_steps("t_end − t0", t_end - t0, h)?;
    let stride = stride.max(1);
    let mut traj = Trajectory::default();
    let mut delta = x0.to_vec();
    let mut p = vec![0.0; x0.len()];
    p_of_step(0, &mut p);
    traj.push(t0, &delta, dynamics.rhs(&delta, &p));
    let mut p_obs = p.clone();
    integrate_with(
        dynamics,
        &mut delta,
        t0,
        h,
        steps,
        &p_of_step,
        |k, t, d| {
            if k % stride == 0 || k == steps {
                p_obs.iter_mut().for_each(|v| *v = 0.0);
                p_of_step(k.min(steps.saturating_sub(1)), &mut p_obs);
                traj.push(t, d, dynamics.rhs(d, &p_obs));
            }
            ControlFlow::Continue(())
        },
    )?;
    Ok(traj)
}

/// Norms of `B_cᵀδ` and `Bᵀδ`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Norms {
    pub c: f64,
    pub l: f64,
    pub c_inf: f64,
    pub l_inf: f64,
}

/// `‖B_cᵀδ‖` via `n Σ (δ_i − mean)²`, which is exactly `Σ_{i<j} (δ_i − δ_j)²`.
pub fn complete_norm(delta: &[f64]) -> f64 {
    let n = delta.len() as f64;
    let mean = delta.iter().sum::<f64>() / n;
    libm::sqrt(n * delta.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>())
}

pub fn edge_norm(delta: &[f64], pair: &IncidencePair) -> f64 {
    libm::sqrt(
        pair.edge_nodes
            .iter()
            .map(|&(i, j)| (delta[i] - delta[j]) * (delta[i] - delta[j]))
            .sum(),
    )
}

pub fn norms(delta: &[f64], pair: &IncidencePair) -> Norms {
    let (lo, hi) = delta
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    Norms {
        c: complete_norm(delta),
        l: edge_norm(delta, pair),
        c_inf: hi - lo,
        l_inf: norm_inf(&pair.edge_differences(delta)),
    }
}

/// Piecewise-constant random injections: on each node of `nodes`, a value
/// uniform in `[−magnitude, magnitude]` held for `hold_interval`, switched on
/// at `start_time`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DisturbanceSpec {
    pub nodes: Vec<usize>,
    pub magnitude: f64,
    pub hold_interval: f64,
    pub seed: u64,
    pub start_time: f64,
}

impl DisturbanceSpec {
    pub fn new(nodes: Vec<usize>, magnitude: f64, seed: u64) -> Self {
        Self {
            nodes,
            magnitude,
            hold_interval: DEFAULT_HOLD_INTERVAL,
            seed,
            start_time: 0.0,
        }
    }

    /// Value on `node` during hold interval `interval`. Each node reads its
    /// own ChaCha8 stream at a fixed word position, so values do not depend
    /// on evaluation order.
    pub fn value(&self, node: usize, interval: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(node as u64);
        rng.set_word_pos(2 * interval as u128);
        let u: f64 = rng.random();
        self.magnitude * (2.0 * u - 1.0)
    }
}

/// A [`DisturbanceSpec`] laid onto a step grid.
#[derive(Debug, Clone)]
pub struct DisturbanceSchedule {
    spec: DisturbanceSpec,
    n: usize,
    start_step: usize,
    steps_per_hold: usize,
}

impl DisturbanceSchedule {
    pub fn new(spec: DisturbanceSpec, n: usize, h: f64) -> Result<Self, SimError> {
        check_step(h)?;
        if !(spec.magnitude >= 0.0 && spec.magnitude.is_finite()) {
            return Err(SimError::BadMagnitude(spec.magnitude));
        }
        if let Some(&node) = spec.nodes.iter().find(|&&v| v >= n) {
            return Err(SimError::NodeOutOfRange { node, n });
        }
        let steps_per_hold = whole_steps("hold_interval", spec.hold_interval, h)?;
        if steps_per_hold == 0 {
            return Err(SimError::Misaligned {
                what: "hold_interval",
                value: spec.hold_interval,
                h,
            });
        }
        let start_step = whole_steps("start_time", spec.start_time, h)?;
        Ok(Self {
            spec,
            n,
            start_step,
            steps_per_hold,
        })
    }

    pub fn spec(&self) -> &DisturbanceSpec {
        &self.spec
    }

    pub fn start_step(&self) -> usize {
        self.start_step
    }

    /// Hold interval covering global step `k`, if the disturbance is on.
    pub fn interval(&self, k: usize) -> Option<u64> {
        (k >= self.start_step).then(|| ((k - self.start_step) / self.steps_per_hold) as u64)
    }

    /// Fills `p` with the disturbance held over global step `k`.
    pub fn fill(&self, k: usize, p: &mut [f64]) {
        p.iter_mut().for_each(|v| *v = 0.0);
        if let Some(m) = self.interval(k) {
            for &node in &self.spec.nodes {
                p[node] = self.spec.value(node, m);
            }
        }
    }

    pub fn at_step(&self, k: usize) -> Vec<f64> {
        let mut p = vec![0.0; self.n];
        self.fill(k, &mut p);
        p
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SimOptions {
    pub h: f64,
    pub horizon: f64,
    /// Record every `record_stride`-th step into the trajectory.
    pub record_stride: usize,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            h: DEFAULT_STEP,
            horizon: 20.0,
            record_stride: 10,
        }
    }
}

/// Which norm an ultimate-bound check watches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Monitor {
    /// `‖B_cᵀδ‖`.
    Complete,
    /// `‖Bᵀδ‖`.
    Edge,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DisturbanceReport {
    pub settle_time: f64,
    /// `sup ‖diag{d_i d_j}B_cᵀD⁻¹p(t)‖` over the realized values.
    pub realized_complete: f64,
    /// `sup ‖A_vBᵀD⁻¹p(t)‖` over the realized values.
    pub realized_edge: f64,
    pub max_norm_c: f64,
    pub max_norm_l: f64,
    /// First time after which the monitored norm stays within the ultimate
    /// radius until the horizon.
    pub entry_time: Option<f64>,
    /// `sup ‖δ̇‖_∞` over `t > entry_time` (or over the disturbed phase when
    /// no ultimate ball is given).
    pub post_entry_freq_sup: Option<f64>,
    pub final_norm_c: f64,
    pub final_norm_l: f64,
    pub escape_time: Option<f64>,
}

/// Settles on `[0, start_time)` with `p = 0`, then injects the disturbance
/// until the horizon. With `ultimate = Some((monitor, radius))` the report
/// records when the monitored norm enters that ball for good and the
/// largest frequency deviation afterwards.
pub fn run_disturbance_scenario(
    net: &PowerNetwork,
    pair: &IncidencePair,
    theta_o: &[f64],
    spec: &DisturbanceSpec,
    x0: Option<&[f64]>,
    ultimate: Option<(Monitor, f64)>,
    opts: &SimOptions,
) -> Result<(Trajectory, DisturbanceReport), SimError> {
    let n = net.n();
    let h = opts.h;
    let schedule = DisturbanceSchedule::new(spec.clone(), n, h)?;
    let total = whole_steps("horizon", opts.horizon, h)?;
    let dynamics = Dynamics::new(net, theta_o);
    let mut delta = match x0 {
        Some(x) if x.len() != n => {
            return Err(SimError::StateLength {
                expected: n,
                got: x.len(),
            })
        }
        Some(x) => x.to_vec(),
        None => vec![0.0; n],
    };

    let realized = realized_norms(net, pair, &schedule, total);
    let stride = opts.record_stride.max(1);
    let mut traj = Trajectory::default();
    let mut p = schedule.at_step(0);
    traj.push(0.0, &delta, dynamics.rhs(&delta, &p));

    let mut settle_time: Option<f64> = None;
    let mut max_c = complete_norm(&delta);
    let mut max_l = edge_norm(&delta, pair);
    let mut escape_time = None;
    // Last time the monitored norm was outside the ultimate ball, and the
    // running sup of ‖δ̇‖_∞ since then.
    let mut last_outside: Option<f64> = None;
    let mut freq_sup_since = 0.0_f64;
    let start = schedule.start_step();

    let mut rate = vec![0.0; n];
    integrate_with(
        &dynamics,
        &mut delta,
        0.0,
        h,
        total,
        |k, buf| schedule.fill(k, buf),
        |k, t, d| {
            // Rate under the disturbance that applies from t onwards.
            schedule.fill(k.min(total - 1), &mut p);
            dynamics.rhs_into(d, &p, &mut rate);
            let r_inf = norm_inf(&rate);
            if settle_time.is_none() && k <= start && (r_inf < SETTLE_TOL || k == start) {
                settle_time = Some(t);
            }
            let c = complete_norm(d);
            let l = edge_norm(d, pair);
            max_c = max_c.max(c);
            max_l = max_l.max(l);
            if escape_time.is_none() && norms(d, pair).c_inf > core::f64::consts::PI {
                escape_time = Some(t);
            }
            if k > start {
                let outside = match ultimate {
                    Some((Monitor::Complete, r)) => c > r,
                    Some((Monitor::Edge, r)) => l > r,
                    None => false,
                };
                if outside {
                    last_outside = Some(t);
                    freq_sup_since = 0.0;
                } else {
                    freq_sup_since = freq_sup_since.max(r_inf);
                }
            }
            if k % stride == 0 || k == total {
                traj.push(t, d, rate.clone());
            }
            ControlFlow::Continue(())
        },
    )?;

    let start_time = start as f64 * h;
    let settle_time = settle_time.unwrap_or(start_time.min(opts.horizon));
    traj.event(settle_time, EventKind::Settled);
    if start < total {
        traj.event(start_time, EventKind::DisturbanceOn);
    }
    if let Some(t) = escape_time {
        traj.event(t, EventKind::Escape);
    }
    let horizon = total as f64 * h;
    let entry_time = match (ultimate, last_outside) {
        (None, _) => Some(start_time),
        (Some(_), None) => Some(start_time),
        (Some(_), Some(t)) if t < horizon => Some(t),
        _ => None,
    };
    if let (Some(_), Some(t)) = (ultimate, entry_time) {
        traj.event(t, EventKind::EnterUltimateBall);
    }
    traj.sort_events();
    let report = DisturbanceReport {
        settle_time,
        realized_complete: realized.0,
        realized_edge: realized.1,
        max_norm_c: max_c,
        max_norm_l: max_l,
        post_entry_freq_sup: entry_time.map(|_| freq_sup_since),
        entry_time,
        final_norm_c: complete_norm(&delta),
        final_norm_l: edge_norm(&delta, pair),
        escape_time,
    };
    Ok((traj, report))
}

/// Sup over the realized hold intervals of both weighted disturbance norms.
fn realized_norms(
    net: &PowerNetwork,
    pair: &IncidencePair,
    schedule: &DisturbanceSchedule,
    total_steps: usize,
) -> (f64, f64) {
    use crate::certificates::{complete_weighted_norm, edge_weighted_norm};
    let (mut c, mut l) = (0.0_f64, 0.0_f64);
    let mut k = schedule.start_step();
    while k < total_steps {
        let p = schedule.at_step(k);
        c = c.max(complete_weighted_norm(net, pair, &p));
        l = l.max(edge_weighted_norm(net, pair, &p));
        k += schedule.steps_per_hold;
    }
    (c, l)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum RecloseRule {
    /// Reclose at the first step where both C1 and C2 have been reached.
    OnC1AndC2,
    AtTime(f64),
    Never,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TripSpec {
    /// 0-based endpoints of the tripped line.
    pub edge: (usize, usize),
    pub trip_time: f64,
    pub reclose: RecloseRule,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TripReport {
    /// First time `‖B_cᵀδ‖ ≥ γ_r` of the criterion-I estimate.
    pub t1: Option<f64>,
    /// First time `‖Bᵀδ‖ ≥ γ_r` of the criterion-II estimate.
    pub t2: Option<f64>,
    pub reclose_time: Option<f64>,
    /// The tripped network has more than one component.
    pub islanded: bool,
    pub final_norm_c: f64,
    /// `‖B_cᵀδ‖ < 1e-6` at the horizon.
    pub converged: bool,
    /// `V_quad` never increased by more than `1e-9` per step after the
    /// reclose.
    pub energy_monotone_after_reclose: bool,
}

/// Trips a line of the intact network at `trip.trip_time`, monitors the
/// region-of-attraction balls of the intact system (with the intact
/// incidence matrices) and recloses per the rule.
pub fn run_line_trip_scenario(
    net: &PowerNetwork,
    pair: &IncidencePair,
    theta_o: &[f64],
    trip: &TripSpec,
    roa_i: &RoaEstimate,
    roa_ii: &RoaEstimate,
    opts: &SimOptions,
) -> Result<(Trajectory, TripReport), SimError> {
    let h = opts.h;
    let n = net.n();
    let total = whole_steps("horizon", opts.horizon, h)?;
    let trip_step = whole_steps("trip_time", trip.trip_time, h)?;
    if trip_step >= total {
        return Err(SimError::TripAfterHorizon {
            trip: trip.trip_time,
            horizon: opts.horizon,
        });
    }
    let fixed_reclose = match trip.reclose {
        RecloseRule::AtTime(t) => Some(whole_steps("reclose time", t, h)?.max(trip_step)),
        _ => None,
    };
    let intact = Dynamics::new(net, theta_o);
    let (a, b) = trip.edge;
    let tripped = intact
        .without_edge(a, b)
        .ok_or(SimError::UnknownEdge(a, b))?;
    let islanded = tripped.is_disconnected();

    let mut traj = Trajectory::default();
    let mut delta = vec![0.0; n];
    let zero = vec![0.0; n];
    let stride = opts.record_stride.max(1);
    traj.push(0.0, &delta, intact.rhs(&delta, &zero));
    traj.event(trip.trip_time, EventKind::Trip);

    let mut ws = Workspace::new(n);
    let mut rate = vec![0.0; n];
    let mut t1 = None;
    let mut t2 = None;
    let mut reclose_step: Option<usize> = None;
    let (mut prev_c, mut prev_l, mut prev_v) = (0.0, 0.0, 0.0);
    let mut monotone = true;

    for k in 0..total {
        if reclose_step.is_none() && fixed_reclose.is_some_and(|r| k >= r) {
            reclose_step = Some(k);
            traj.event(k as f64 * h, EventKind::Reclose);
        }
        let active = if k >= trip_step && reclose_step.is_none() {
            &tripped
        } else {
            &intact
        };
        rk4_step(active, &mut delta, &zero, h, &mut ws);
        let t = (k + 1) as f64 * h;
        if delta.iter().any(|v| !v.is_finite()) {
            return Err(SimError::NonFinite {
                last_valid_time: t - h,
            });
        }
        let c = complete_norm(&delta);
        let l = edge_norm(&delta, pair);
        if t1.is_none() && c >= roa_i.gamma_r {
            let tc = crossing_time(t - h, prev_c, t, c, roa_i.gamma_r);
            t1 = Some(tc);
            traj.event(tc, EventKind::C1);
        }
        if t2.is_none() && l >= roa_ii.gamma_r {
            let tc = crossing_time(t - h, prev_l, t, l, roa_ii.gamma_r);
            t2 = Some(tc);
            traj.event(tc, EventKind::C2);
        }
        let v = v_quadratic(net, &delta);
        if reclose_step.is_some() && v > prev_v + 1e-9 {
            monotone = false;
        }
        if reclose_step.is_none()
            && k + 1 > trip_step
            && trip.reclose == RecloseRule::OnC1AndC2
            && t1.is_some()
            && t2.is_some()
        {
            reclose_step = Some(k + 1);
            traj.event(t, EventKind::Reclose);
        }
        prev_c = c;
        prev_l = l;
        prev_v = v;
        if (k + 1) % stride == 0 || k + 1 == total {
            let next = if k + 1 >= trip_step && reclose_step.is_none() {
                &tripped
            } else {
                &intact
            };
            next.rhs_into(&delta, &zero, &mut rate);
            traj.push(t, &delta, rate.clone());
        }
    }
    traj.sort_events();
    let final_norm_c = complete_norm(&delta);
    let report = TripReport {
        t1,
        t2,
        reclose_time: reclose_step.map(|r| r as f64 * h),
        islanded,
        final_norm_c,
        converged: final_norm_c < CONVERGENCE_TOL,
        energy_monotone_after_reclose: reclose_step.is_some() && monotone,
    };
    Ok((traj, report))
}

/// Linear interpolation of the time where a sampled quantity reaches
/// `level` between `(t0, v0)` and `(t1, v1)`.
pub fn crossing_time(t0: f64, v0: f64, t1: f64, v1: f64, level: f64) -> f64 {
    if v1 == v0 {
        return t1;
    }
    (t0 + (level - v0) / (v1 - v0) * (t1 - t0)).clamp(t0, t1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::build_incidence;

    fn triangle() -> PowerNetwork {
        PowerNetwork::new(
            3,
            vec![Edge::new(0, 1, 1.0), Edge::new(1, 2, 2.0), Edge::new(0, 2, 1.5)],
            vec![1.0, 0.8, 0.9],
            vec![0],
        )
        .unwrap()
    }

    #[test]
    fn origin_is_an_equilibrium() {
        let net = triangle();
        let r = rhs(&net, &[0.1, 0.0, -0.05], &[0.0; 3], &[0.0; 3]);
        assert!(r.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn uniform_shift_is_an_equilibrium() {
        let net = triangle();
        let r = rhs(&net, &[0.1, 0.0, -0.05], &[0.4; 3], &[0.0; 3]);
        assert!(r.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn zero_start_stays_zero() {
        let net = triangle();
        let dynamics = Dynamics::new(&net, &[0.0; 3]);
        let traj = integrate(&dynamics, &[0.0; 3], |_, _| {}, 0.0, 1.0, 1e-3, 100).unwrap();
        assert_eq!(traj.len(), 11);
        assert!(traj.states.iter().flatten().all(|v| *v == 0.0));
    }

    #[test]
    fn norms_two_nodes() {
        let net = PowerNetwork::new(2, vec![Edge::new(0, 1, 1.0)], vec![1.0; 2], vec![0]).unwrap();
        let pair = build_incidence(&net);
        let r = norms(&[1.0, 0.0], &pair);
        for v in [r.c, r.l, r.c_inf, r.l_inf] {
            assert!((v - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn disturbance_values_are_bounded_and_reproducible() {
        let spec = DisturbanceSpec::new(vec![0, 2], 1.5, 7);
        for m in 0..200 {
            let v = spec.value(2, m);
            assert!(v.abs() <= 1.5);
            assert_eq!(v, spec.value(2, m));
        }
        assert_ne!(spec.value(0, 3), spec.value(2, 3));
    }

    #[test]
    fn misaligned_hold_interval_is_rejected() {
        let mut spec = DisturbanceSpec::new(vec![0], 1.0, 1);
        spec.hold_interval = 0.1005;
        assert!(matches!(
            DisturbanceSchedule::new(spec, 3, 1e-3),
            Err(SimError::Misaligned { .. })
        ));
    }

    #[test]
    fn removed_line_keeps_its_flow_in_the_balance() {
        let net = triangle();
        let theta = [0.2, 0.0, 0.1];
        let d = Dynamics::new(&net, &theta).without_edge(0, 1).unwrap();
        let r = d.rhs(&[0.0; 3], &[0.0; 3]);
        let flow = libm::sin(0.2);
        assert!((r[0] - flow / 1.0).abs() < 1e-15);
        assert!((r[1] + flow / 0.8).abs() < 1e-15);
        assert_eq!(r[2], 0.0);
    }

    #[test]
    fn crossing_interpolates() {
        assert!((crossing_time(1.0, 0.0, 2.0, 4.0, 1.0) - 1.25).abs() < 1e-15);
    }
}
