//! Experiment configuration. One TOML file describes a whole experiment;
//! bus numbers are 1-based throughout.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use syncert_core::certificates::MAX_SUPPORT;
use syncert_core::ieee9::ParameterSet;
use syncert_core::simulate::{self, RecloseRule};

use crate::netfile::NetworkSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default)]
    pub certificates: Vec<CertificateKind>,
    pub network: NetworkSource,
    #[serde(default)]
    pub damping: DampingConfig,
    #[serde(default)]
    pub power_flow: PowerFlowConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disturbance: Option<DisturbanceConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trip: Option<TripConfig>,
    #[serde(default)]
    pub sim: SimConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

/// Exactly one of the three sources must be set.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSource {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<Builtin>,
    /// Network file, relative to the config file's directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inline: Option<NetworkSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Builtin {
    #[serde(rename = "ieee9_set1")]
    Ieee9Set1,
    #[serde(rename = "ieee9_set2")]
    Ieee9Set2,
}

impl Builtin {
    pub fn parameter_set(self) -> ParameterSet {
        match self {
            Self::Ieee9Set1 => ParameterSet::One,
            Self::Ieee9Set2 => ParameterSet::Two,
        }
    }
}

/// Either explicit `values` or a uniform `range` drawn with `seed`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DampingConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerFlowConfig {
    /// Overrides the network's reference bus.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_bus: Option<usize>,
    #[serde(default)]
    pub reference_angle: f64,
    #[serde(default = "default_pf_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_pf_iterations")]
    pub max_iterations: usize,
}

fn default_pf_tolerance() -> f64 {
    1e-10
}

fn default_pf_iterations() -> usize {
    50
}

impl Default for PowerFlowConfig {
    fn default() -> Self {
        Self {
            reference_bus: None,
            reference_angle: 0.0,
            tolerance: default_pf_tolerance(),
            max_iterations: default_pf_iterations(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisturbanceConfig {
    pub buses: Vec<usize>,
    /// Bound `p_d` on `|p_i(t)|`.
    pub magnitude: f64,
    #[serde(default = "default_hold")]
    pub hold_interval: f64,
    pub seed: u64,
    #[serde(default)]
    pub start_time: f64,
}

fn default_hold() -> f64 {
    simulate::DEFAULT_HOLD_INTERVAL
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecloseMode {
    OnC1AndC2,
    AtTime,
    Never,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TripConfig {
    /// Endpoints of the tripped line, 1-based.
    pub line: [usize; 2],
    pub time: f64,
    #[serde(default = "default_reclose")]
    pub reclose: RecloseMode,
    /// Required with `reclose = "at_time"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reclose_time: Option<f64>,
}

fn default_reclose() -> RecloseMode {
    RecloseMode::OnC1AndC2
}

impl TripConfig {
    pub fn rule(&self) -> RecloseRule {
        match self.reclose {
            RecloseMode::OnC1AndC2 => RecloseRule::OnC1AndC2,
            RecloseMode::AtTime => RecloseRule::AtTime(self.reclose_time.unwrap_or(self.time)),
            RecloseMode::Never => RecloseRule::Never,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CertificateKind {
    I,
    #[serde(rename = "I-original")]
    IOriginal,
    II,
    #[serde(rename = "roa_I")]
    RoaI,
    #[serde(rename = "roa_II")]
    RoaII,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default = "default_stride")]
    pub record_stride: usize,
}

fn default_horizon() -> f64 {
    20.0
}

fn default_step() -> f64 {
    simulate::DEFAULT_STEP
}

fn default_stride() -> usize {
    10
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            horizon: default_horizon(),
            step: default_step(),
            record_stride: default_stride(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_directory")]
    pub directory: PathBuf,
}

fn default_directory() -> PathBuf {
    PathBuf::from("syncert-out")
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: default_directory(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    /// Dotted path of the offending field, e.g. `trip.line`.
    pub field: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Diagnostics(pub Vec<Diagnostic>);

impl Diagnostics {
    pub fn push(&mut self, field: impl Into<String>, message: impl Into<String>) {
        self.0.push(Diagnostic {
            field: field.into(),
            message: message.into(),
        });
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn has_errors_under(&self, prefix: &str) -> bool {
        self.0.iter().any(|d| d.field.starts_with(prefix))
    }

    pub fn iter(&self) -> impl Iterator<Item = &Diagnostic> {
        self.0.iter()
    }
}

impl fmt::Display for Diagnostics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for d in &self.0 {
            writeln!(f, "{d}")?;
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{path}: invalid configuration\n{diagnostics}")]
    Invalid {
        path: String,
        diagnostics: Diagnostics,
    },
    #[error(transparent)]
    NetFile(#[from] crate::netfile::NetFileError),
}

/// 1-based line and column of a byte span's start.
pub fn span_position(text: &str, span: Option<std::ops::Range<usize>>) -> (usize, usize) {
    let Some(span) = span else { return (0, 0) };
    let before = &text[..span.start.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rfind('\n').map_or(before.len(), |p| before.len() - p - 1) + 1;
    (line, column)
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Reads and parses a config file. Semantic validation is separate.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text).map_err(|e| {
            let (line, column) = span_position(&text, e.span());
            ConfigError::Parse {
                path: path.display().to_string(),
                line,
                column,
                message: e.message().trim().to_string(),
            }
        })
    }

    /// Resolves the network description. Relative files are taken from
    /// `base`, normally the config file's directory.
    pub fn network_spec(&self, base: &Path) -> Result<Option<NetworkSpec>, ConfigError> {
        let src = &self.network;
        Ok(match (&src.builtin, &src.file, &src.inline) {
            (Some(b), None, None) => Some(NetworkSpec::builtin(b.parameter_set())),
            (None, Some(f), None) => Some(NetworkSpec::load(&base.join(f))?),
            (None, None, Some(spec)) => Some(spec.clone()),
            _ => None,
        })
    }

    /// Structural and semantic validation without side effects.
    pub fn validate(&self, base: &Path) -> Diagnostics {
        let mut out = Diagnostics::default();
        let src = &self.network;
        let sources = [src.builtin.is_some(), src.file.is_some(), src.inline.is_some()]
            .iter()
            .filter(|&&b| b)
            .count();
        let spec = if sources != 1 {
            out.push("network", "set exactly one of `builtin`, `file` or `inline`");
            None
        } else {
            match self.network_spec(base) {
                Ok(spec) => spec,
                Err(e) => {
                    out.push("network.file", e.to_string());
                    None
                }
            }
        };
        if let Some(spec) = &spec {
            let prefix = if src.file.is_some() { "network.file" } else { "network.inline" };
            if src.builtin.is_none() {
                spec.validate(prefix, &mut out);
            }
        }
        let n = spec.as_ref().map(|s| s.buses);
        self.validate_damping(n, &mut out);
        self.validate_power_flow(n, &mut out);
        let step_ok = self.validate_sim(&mut out);
        if let Some(d) = &self.disturbance {
            validate_disturbance(d, n, step_ok.then_some(self.sim.step), &mut out);
        }
        if let (Some(t), Some(spec)) = (&self.trip, &spec) {
            self.validate_trip(t, spec, step_ok, &mut out);
        } else if let Some(t) = &self.trip {
            check_time("trip.time", t.time, step_ok.then_some(self.sim.step), &mut out);
        }
        let mut seen = std::collections::HashSet::new();
        for (k, c) in self.certificates.iter().enumerate() {
            if !seen.insert(*c) {
                out.push(format!("certificates[{k}]"), format!("{c:?} listed twice"));
            }
        }
        out
    }

    fn validate_damping(&self, n: Option<usize>, out: &mut Diagnostics) {
        let d = &self.damping;
        match (&d.values, &d.range) {
            (Some(_), Some(_)) => out.push("damping", "give either `values` or `range`, not both"),
            (None, None) => out.push("damping", "missing: give `values` or `range` with `seed`"),
            (Some(v), None) => {
                if let Some(n) = n {
                    if v.len() != n {
                        out.push("damping.values", format!("expected {n} coefficients, got {}", v.len()));
                    }
                }
                for (k, x) in v.iter().enumerate() {
                    if !(*x > 0.0 && x.is_finite()) {
                        out.push(format!("damping.values[{k}]"), format!("{x} must be positive and finite"));
                    }
                }
            }
            (None, Some([lo, hi])) => {
                if !(*lo > 0.0 && lo <= hi && hi.is_finite()) {
                    out.push("damping.range", format!("need 0 < lo <= hi, got [{lo}, {hi}]"));
                }
                if d.seed.is_none() {
                    out.push("damping.seed", "a random range needs a seed");
                }
            }
        }
    }

    fn validate_power_flow(&self, n: Option<usize>, out: &mut Diagnostics) {
        let pf = &self.power_flow;
        if let (Some(r), Some(n)) = (pf.reference_bus, n) {
            if r == 0 || r > n {
                out.push("power_flow.reference_bus", format!("bus {r} outside 1..={n}"));
            }
        }
        if !(pf.tolerance > 0.0) {
            out.push("power_flow.tolerance", "must be positive");
        }
        if !pf.reference_angle.is_finite() {
            out.push("power_flow.reference_angle", "must be finite");
        }
    }

    /// Returns whether the step is usable for alignment checks.
    fn validate_sim(&self, out: &mut Diagnostics) -> bool {
        let s = &self.sim;
        let mut ok = true;
        if !(s.step > 0.0 && s.step.is_finite()) {
            out.push("sim.step", format!("{} must be positive and finite", s.step));
            ok = false;
        }
        if !(s.horizon > 0.0 && s.horizon.is_finite()) {
            out.push("sim.horizon", format!("{} must be positive and finite", s.horizon));
        } else if ok && simulate::whole_steps("horizon", s.horizon, s.step).is_err() {
            out.push("sim.horizon", format!("{} is not a whole number of steps of {}", s.horizon, s.step));
        }
        if s.record_stride == 0 {
            out.push("sim.record_stride", "must be at least 1");
        }
        ok
    }

    fn validate_trip(&self, t: &TripConfig, spec: &NetworkSpec, step_ok: bool, out: &mut Diagnostics) {
        let [a, b] = t.line;
        if spec.line_index(a, b).is_none() {
            out.push("trip.line", format!("no line between buses {a} and {b}"));
        }
        let h = step_ok.then_some(self.sim.step);
        check_time("trip.time", t.time, h, out);
        if t.time >= self.sim.horizon {
            out.push("trip.time", format!("{} must precede sim.horizon = {}", t.time, self.sim.horizon));
        }
        match (t.reclose, t.reclose_time) {
            (RecloseMode::AtTime, None) => out.push("trip.reclose_time", "required with reclose = \"at_time\""),
            (RecloseMode::AtTime, Some(r)) => {
                check_time("trip.reclose_time", r, h, out);
                if r < t.time {
                    out.push("trip.reclose_time", format!("{r} precedes the trip at {}", t.time));
                }
            }
            (_, Some(_)) => out.push("trip.reclose_time", "only meaningful with reclose = \"at_time\""),
            _ => {}
        }
    }
}

fn check_time(field: &str, value: f64, h: Option<f64>, out: &mut Diagnostics) {
    if !(value >= 0.0 && value.is_finite()) {
        out.push(field, format!("{value} must be non-negative and finite"));
    } else if let Some(h) = h {
        if simulate::whole_steps("time", value, h).is_err() {
            out.push(field, format!("{value} is not a whole number of steps of {h}"));
        }
    }
}

fn validate_disturbance(d: &DisturbanceConfig, n: Option<usize>, h: Option<f64>, out: &mut Diagnostics) {
    if !(d.magnitude >= 0.0 && d.magnitude.is_finite()) {
        out.push("disturbance.magnitude", format!("{} must be non-negative and finite", d.magnitude));
    }
    if d.buses.is_empty() && d.magnitude > 0.0 {
        out.push("disturbance.buses", "a non-zero disturbance needs at least one bus");
    }
    if d.buses.len() > MAX_SUPPORT {
        out.push(
            "disturbance.buses",
            format!("{} buses exceed the worst-case enumeration limit of {MAX_SUPPORT}", d.buses.len()),
        );
    }
    if let Some(n) = n {
        for (k, &b) in d.buses.iter().enumerate() {
            if b == 0 || b > n {
                out.push(format!("disturbance.buses[{k}]"), format!("bus {b} outside 1..={n}"));
            }
        }
    }
    if !(d.hold_interval > 0.0 && d.hold_interval.is_finite()) {
        out.push("disturbance.hold_interval", format!("{} must be positive", d.hold_interval));
    } else if let Some(h) = h {
        let whole = simulate::whole_steps("hold_interval", d.hold_interval, h);
        if !matches!(whole, Ok(k) if k > 0) {
            out.push(
                "disturbance.hold_interval",
                format!("sim.step = {h} must divide hold_interval = {}", d.hold_interval),
            );
        }
    }
    check_time("disturbance.start_time", d.start_time, h, out);
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
certificates = ["I", "II"]

[network]
builtin = "ieee9_set1"

[damping]
range = [0.7, 1.0]
seed = 4
"#;

    #[test]
    fn minimal_builtin_validates() {
        let cfg = ExperimentConfig::parse(MINIMAL).unwrap();
        assert!(cfg.validate(Path::new(".")).is_empty());
        assert_eq!(cfg.sim, SimConfig::default());
    }

    #[test]
    fn range_without_seed_is_flagged() {
        let text = MINIMAL.replace("seed = 4\n", "");
        let diag = ExperimentConfig::parse(&text).unwrap().validate(Path::new("."));
        assert!(diag.iter().any(|d| d.field == "damping.seed"), "{diag}");
    }

    #[test]
    fn parse_error_has_line() {
        let text = "certificates = [\"III\"]\n[network]\nbuiltin = \"ieee9_set1\"\n";
        let err = ExperimentConfig::parse(text).unwrap_err();
        assert_eq!(span_position(text, err.span()).0, 1);
    }

    #[test]
    fn span_position_counts_from_one() {
        assert_eq!(span_position("ab\ncd", Some(4..5)), (2, 2));
    }
}
