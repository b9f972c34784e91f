//! Executes a validated experiment and writes its artifacts.

use std::path::{Path, PathBuf};
use std::thread;

use log::{debug, info, warn};
use serde::Serialize;
use syncert_core::certificates::{
    criterion_i, criterion_i_original, criterion_ii, roa_i, roa_ii, CertificateError, CertificateReport,
    DisturbanceBound, RoaEstimate,
};
use syncert_core::equilibrium::{solve_power_flow, Equilibrium, PowerFlowError, PowerFlowOptions};
use syncert_core::network::{
    algebraic_connectivity, build_incidence, laplacian, IncidencePair, NetworkError, PowerNetwork,
};
use syncert_core::simulate::{
    run_disturbance_scenario, run_line_trip_scenario, DisturbanceReport, DisturbanceSpec, Monitor, SimError,
    SimOptions, Trajectory, TripReport, TripSpec,
};

use crate::config::{CertificateKind, ConfigError, Diagnostics, ExperimentConfig};
use crate::netfile::NetworkSpec;
use crate::output::{self, Context, WriteError};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("invalid configuration\n{0}")]
    Invalid(Diagnostics),
    #[error("building the network: {0}")]
    Network(#[from] NetworkError),
    #[error("solving the power flow: {0}")]
    PowerFlow(#[from] PowerFlowError),
    #[error("region-of-attraction estimate for the line-trip monitor: {0}")]
    Roa(#[source] CertificateError),
    #[error("{scenario} scenario: {source}")]
    Sim {
        scenario: &'static str,
        #[source]
        source: SimError,
    },
    #[error(transparent)]
    Write(#[from] WriteError),
    #[error("{0} scenario thread panicked")]
    Panicked(&'static str),
}

/// Flags that may override the config file.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub output: Option<PathBuf>,
    /// Replaces the damping draw seed and the disturbance seed.
    pub seed: Option<u64>,
}

impl ExperimentConfig {
    pub fn apply_seed(&mut self, seed: u64) {
        if self.damping.range.is_some() {
            self.damping.seed = Some(seed);
        }
        if let Some(d) = &mut self.disturbance {
            d.seed = seed;
        }
    }
}

/// Network, damping and equilibrium of an experiment.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub spec: NetworkSpec,
    pub net: PowerNetwork,
    pub pair: IncidencePair,
    pub eq: Equilibrium,
}

impl Prepared {
    pub fn bound(&self, cfg: &ExperimentConfig) -> DisturbanceBound {
        match &cfg.disturbance {
            Some(d) => DisturbanceBound::new(d.magnitude, d.buses.iter().map(|b| b - 1).collect()),
            None => DisturbanceBound::zero(),
        }
    }
}

/// Validates `cfg`, draws the damping and solves the power flow.
pub fn prepare(cfg: &ExperimentConfig, base: &Path) -> Result<Prepared, RunError> {
    let diagnostics = cfg.validate(base);
    if !diagnostics.is_empty() {
        return Err(RunError::Invalid(diagnostics));
    }
    let spec = cfg.network_spec(base)?.expect("validated network source");
    let n = spec.buses;
    let damping = match (&cfg.damping.values, cfg.damping.range) {
        (Some(v), _) => v.clone(),
        (None, Some([lo, hi])) => {
            syncert_core::network::uniform_damping(n, lo, hi, cfg.damping.seed.expect("validated seed"))
        }
        (None, None) => unreachable!("validated damping"),
    };
    let net = spec.network(damping)?;
    let pair = build_incidence(&net);
    let reference = cfg.power_flow.reference_bus.map_or(spec.reference_node(), |b| b - 1);
    let opts = PowerFlowOptions {
        tolerance: cfg.power_flow.tolerance,
        max_iterations: cfg.power_flow.max_iterations,
        ..PowerFlowOptions::with_reference(reference, cfg.power_flow.reference_angle)
    };
    let eq = solve_power_flow(&net, &pair, &spec.power, &opts)?;
    if !eq.secure {
        warn!("equilibrium has a line angle at or beyond π/2");
    }
    info!(
        "equilibrium: {} Newton steps, residual {:.2e}, spreads edge {:.4} all-pairs {:.4}",
        eq.iterations, eq.residual_inf, eq.spreads.edge, eq.spreads.all_pairs
    );
    Ok(Prepared { spec, net, pair, eq })
}

/// One requested certificate: either its report or why it could not be
/// evaluated.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateOutcome {
    Certificate(CertificateReport),
    Roa(RoaEstimate),
    Error { kind: CertificateKind, message: String },
}

impl CertificateOutcome {
    pub fn passed_report(&self) -> Option<&CertificateReport> {
        match self {
            Self::Certificate(r) if r.passed => Some(r),
            _ => None,
        }
    }
}

pub fn evaluate(kind: CertificateKind, p: &Prepared, bound: &DisturbanceBound) -> CertificateOutcome {
    let result = match kind {
        CertificateKind::I => criterion_i(&p.net, &p.pair, &p.eq, bound).map(CertificateOutcome::Certificate),
        CertificateKind::IOriginal => {
            let full = bound.clone().with_nominal(p.spec.power.clone());
            criterion_i_original(&p.net, &p.pair, &full).map(CertificateOutcome::Certificate)
        }
        CertificateKind::II => criterion_ii(&p.net, &p.pair, &p.eq, bound).map(CertificateOutcome::Certificate),
        CertificateKind::RoaI => roa_i(&p.net, &p.eq).map(CertificateOutcome::Roa),
        CertificateKind::RoaII => roa_ii(&p.net, &p.eq).map(CertificateOutcome::Roa),
    };
    result.unwrap_or_else(|e| CertificateOutcome::Error {
        kind,
        message: e.to_string(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct EquilibriumArtifact<'a> {
    pub damping: &'a [f64],
    pub lambda2: Option<f64>,
    #[serde(flatten)]
    pub eq: &'a Equilibrium,
}

#[derive(Debug, Clone, Serialize)]
pub struct CertificateLine {
    pub kind: CertificateKind,
    pub passed: Option<bool>,
    pub lambda_value: Option<f64>,
    pub lambda_cr: Option<f64>,
    pub gamma_r: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub name: Option<String>,
    pub output: PathBuf,
    pub equilibrium_secure: bool,
    pub certificates: Vec<CertificateLine>,
    pub disturbance: Option<DisturbanceReport>,
    pub trip: Option<TripReport>,
    pub artifacts: Vec<PathBuf>,
}

fn summarize(kind: CertificateKind, o: &CertificateOutcome) -> CertificateLine {
    let mut line = CertificateLine {
        kind,
        passed: None,
        lambda_value: None,
        lambda_cr: None,
        gamma_r: None,
        error: None,
    };
    match o {
        CertificateOutcome::Certificate(r) => {
            line.passed = Some(r.passed);
            line.lambda_value = Some(r.lambda_value);
            line.lambda_cr = Some(r.lambda_cr);
            line.gamma_r = r.window.map(|w| w.gamma_r);
        }
        CertificateOutcome::Roa(r) => line.gamma_r = Some(r.gamma_r),
        CertificateOutcome::Error { message, .. } => line.error = Some(message.clone()),
    }
    line
}

/// The ultimate ball a disturbance run is checked against: the first passing
/// δ-coordinate certificate's `γ_l`. The θ-coordinate ball bounds absolute
/// angles, not deviations, so it is skipped.
fn ultimate_ball(outcomes: &[CertificateOutcome]) -> Option<(Monitor, f64)> {
    use syncert_core::certificates::Criterion;
    outcomes.iter().filter_map(CertificateOutcome::passed_report).find_map(|r| {
        let w = r.window?;
        let monitor = match r.criterion {
            Criterion::II => Monitor::Edge,
            Criterion::I => Monitor::Complete,
            _ => return None,
        };
        Some((monitor, w.gamma_l))
    })
}

type ScenarioResult<R> = Result<(Trajectory, R), RunError>;

/// Runs the experiment and writes every artifact under the output directory.
pub fn run(mut cfg: ExperimentConfig, base: &Path, opts: &RunOptions) -> Result<RunSummary, RunError> {
    if let Some(seed) = opts.seed {
        cfg.apply_seed(seed);
    }
    let out_dir = opts.output.clone().unwrap_or_else(|| base.join(&cfg.output.directory));
    let p = prepare(&cfg, base)?;
    let mut artifacts = Vec::new();

    artifacts.push(output::write_file(&out_dir, "config.toml", |w| {
        std::io::Write::write_all(w, cfg.to_toml().as_bytes())
    })?);
    let lambda2 = algebraic_connectivity(&laplacian(&p.net)).ok();
    artifacts.push(output::write_json(
        &out_dir,
        "equilibrium.json",
        &EquilibriumArtifact {
            damping: p.net.damping(),
            lambda2,
            eq: &p.eq,
        },
    )?);

    let bound = p.bound(&cfg);
    let outcomes: Vec<CertificateOutcome> = cfg.certificates.iter().map(|&k| evaluate(k, &p, &bound)).collect();
    for (k, o) in cfg.certificates.iter().zip(&outcomes) {
        match o {
            CertificateOutcome::Certificate(r) => info!(
                "certificate {}: λ = {:.4}, λ_cr = {:.4} -> {}",
                r.criterion.label(),
                r.lambda_value,
                r.lambda_cr,
                if r.passed { "pass" } else { "fail" }
            ),
            CertificateOutcome::Roa(r) => info!("{}: γ_r = {:.4}", r.criterion.label(), r.gamma_r),
            CertificateOutcome::Error { message, .. } => warn!("certificate {k:?} not evaluated: {message}"),
        }
    }
    if !cfg.certificates.is_empty() {
        artifacts.push(output::write_json(&out_dir, "certificates.json", &outcomes)?);
    }

    let sim = SimOptions {
        h: cfg.sim.step,
        horizon: cfg.sim.horizon,
        record_stride: cfg.sim.record_stride,
    };
    let ctx = Context {
        net: &p.net,
        pair: &p.pair,
        theta_o: &p.eq.theta,
    };

    // The two scenarios are independent; each owns its state and output
    // subdirectory.
    let (dist, trip) = thread::scope(|s| {
        let dist = cfg.disturbance.as_ref().map(|d| {
            let spec = DisturbanceSpec {
                nodes: d.buses.iter().map(|b| b - 1).collect(),
                magnitude: d.magnitude,
                hold_interval: d.hold_interval,
                seed: d.seed,
                start_time: d.start_time,
            };
            let ultimate = ultimate_ball(&outcomes);
            let (p, sim) = (&p, &sim);
            s.spawn(move || -> ScenarioResult<DisturbanceReport> {
                debug!("disturbance scenario, ultimate ball {ultimate:?}");
                run_disturbance_scenario(&p.net, &p.pair, &p.eq.theta, &spec, None, ultimate, sim).map_err(
                    |source| RunError::Sim {
                        scenario: "disturbance",
                        source,
                    },
                )
            })
        });
        let trip = cfg.trip.as_ref().map(|t| {
            let (p, sim) = (&p, &sim);
            s.spawn(move || -> ScenarioResult<TripReport> {
                let ri = roa_i(&p.net, &p.eq).map_err(RunError::Roa)?;
                let rii = roa_ii(&p.net, &p.eq).map_err(RunError::Roa)?;
                let spec = TripSpec {
                    edge: (t.line[0] - 1, t.line[1] - 1),
                    trip_time: t.time,
                    reclose: t.rule(),
                };
                run_line_trip_scenario(&p.net, &p.pair, &p.eq.theta, &spec, &ri, &rii, sim).map_err(|source| {
                    RunError::Sim {
                        scenario: "line-trip",
                        source,
                    }
                })
            })
        });
        (
            dist.map(|h| h.join().map_err(|_| RunError::Panicked("disturbance"))),
            trip.map(|h| h.join().map_err(|_| RunError::Panicked("line-trip"))),
        )
    });

    let disturbance = match dist {
        Some(r) => {
            let (traj, report) = r??;
            let dir = out_dir.join("disturbance");
            artifacts.extend(output::write_scenario(&dir, &traj, &ctx)?);
            artifacts.push(output::write_json(&dir, "report.json", &report)?);
            info!(
                "disturbance: max ‖δ_c‖ = {:.4}, max ‖δ_l‖ = {:.4}, escape {:?}",
                report.max_norm_c, report.max_norm_l, report.escape_time
            );
            Some(report)
        }
        None => None,
    };
    let trip = match trip {
        Some(r) => {
            let (traj, report) = r??;
            let dir = out_dir.join("trip");
            artifacts.extend(output::write_scenario(&dir, &traj, &ctx)?);
            artifacts.push(output::write_json(&dir, "report.json", &report)?);
            info!(
                "line trip: T1 = {:?}, T2 = {:?}, reclose {:?}, converged {}",
                report.t1, report.t2, report.reclose_time, report.converged
            );
            Some(report)
        }
        None => None,
    };

    let summary = RunSummary {
        name: cfg.name.clone(),
        output: out_dir.clone(),
        equilibrium_secure: p.eq.secure,
        certificates: cfg
            .certificates
            .iter()
            .zip(&outcomes)
            .map(|(&k, o)| summarize(k, o))
            .collect(),
        disturbance,
        trip,
        artifacts,
    };
    let path = output::write_json(&out_dir, "summary.json", &summary)?;
    let mut summary = summary;
    summary.artifacts.push(path);
    Ok(summary)
}
