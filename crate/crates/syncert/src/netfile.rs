//! Network description shared by inline configs and standalone network files.
//!
//! Buses are numbered from 1 in files, as in published test systems. Lines
//! are `[from, to, weight]` triples.
//!
//! ```toml
//! buses = 3
//! lines = [[1, 2, 1.5], [2, 3, 2.0], [1, 3, 0.8]]
//! power = [0.4, -0.1, -0.3]
//! disturbance_buses = [1]
//! reference_bus = 3
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use syncert_core::ieee9::{self, ParameterSet};
use syncert_core::network::{connected_components, Edge, NetworkError, PowerNetwork};

use crate::config::Diagnostics;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub buses: usize,
    /// `(from, to, a_ij)`, 1-based.
    pub lines: Vec<(usize, usize, f64)>,
    /// Nominal injections `p_o`, one per bus.
    pub power: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub disturbance_buses: Vec<usize>,
    /// Bus whose equilibrium angle is pinned; defaults to bus 1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_bus: Option<usize>,
}

#[derive(Debug, thiserror::Error)]
pub enum NetFileError {
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
}

/// Balance tolerance on `Σ p_o`.
pub const BALANCE_TOL: f64 = 1e-9;

impl NetworkSpec {
    pub fn builtin(set: ParameterSet) -> Self {
        Self {
            buses: ieee9::BUS_COUNT,
            lines: ieee9::LINES
                .iter()
                .zip(set.weights())
                .map(|(&(i, j), &w)| (i, j, w))
                .collect(),
            power: ieee9::POWER_PROFILE.to_vec(),
            disturbance_buses: vec![ieee9::DISTURBANCE_NODE + 1],
            reference_bus: Some(set.reference_node() + 1),
        }
    }

    pub fn load(path: &Path) -> Result<Self, NetFileError> {
        let text = fs::read_to_string(path).map_err(|source| NetFileError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text).map_err(|e| {
            let (line, column) = crate::config::span_position(&text, e.span());
            NetFileError::Parse {
                path: path.display().to_string(),
                line,
                column,
                message: e.message().to_string(),
            }
        })
    }

    pub fn parse(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("network spec serializes")
    }

    /// Structural checks, reported under `prefix`.
    pub fn validate(&self, prefix: &str, out: &mut Diagnostics) {
        let n = self.buses;
        if n < 2 {
            out.push(format!("{prefix}.buses"), format!("need at least 2 buses, got {n}"));
            return;
        }
        let mut seen = std::collections::HashSet::new();
        for (k, &(i, j, w)) in self.lines.iter().enumerate() {
            let field = format!("{prefix}.lines[{k}]");
            for b in [i, j] {
                if b == 0 || b > n {
                    out.push(field.clone(), format!("bus {b} outside 1..={n}"));
                }
            }
            if i == j {
                out.push(field.clone(), format!("self-loop at bus {i}"));
            }
            if !(w > 0.0 && w.is_finite()) {
                out.push(field.clone(), format!("weight {w} must be positive and finite"));
            }
            if !seen.insert((i.min(j), i.max(j))) {
                out.push(field, format!("duplicate line between buses {i} and {j}"));
            }
        }
        if self.power.len() != n {
            out.push(
                format!("{prefix}.power"),
                format!("expected {n} injections, got {}", self.power.len()),
            );
        } else {
            let total: f64 = self.power.iter().sum();
            if total.abs() > BALANCE_TOL {
                out.push(
                    format!("{prefix}.power"),
                    format!("injections sum to {total:e}; a lossless power flow needs Σ p_o = 0"),
                );
            }
        }
        for (k, &b) in self.disturbance_buses.iter().enumerate() {
            if b == 0 || b > n {
                out.push(format!("{prefix}.disturbance_buses[{k}]"), format!("bus {b} outside 1..={n}"));
            }
        }
        if let Some(r) = self.reference_bus {
            if r == 0 || r > n {
                out.push(format!("{prefix}.reference_bus"), format!("bus {r} outside 1..={n}"));
            }
        }
        if !out.has_errors_under(prefix) {
            let comps = connected_components(n, &self.edges());
            if comps.len() > 1 {
                let buses: Vec<Vec<usize>> =
                    comps.iter().map(|c| c.iter().map(|v| v + 1).collect()).collect();
                out.push(format!("{prefix}.lines"), format!("graph is disconnected; components {buses:?}"));
            }
        }
    }

    /// 0-based edges.
    pub fn edges(&self) -> Vec<Edge> {
        self.lines
            .iter()
            .map(|&(i, j, w)| Edge::new(i - 1, j - 1, w))
            .collect()
    }

    pub fn network(&self, damping: Vec<f64>) -> Result<PowerNetwork, NetworkError> {
        let nodes = self.disturbance_buses.iter().map(|b| b - 1).collect();
        PowerNetwork::new(self.buses, self.edges(), damping, nodes)
    }

    /// 0-based reference node.
    pub fn reference_node(&self) -> usize {
        self.reference_bus.map_or(0, |b| b - 1)
    }

    /// 0-based index of the line joining two 1-based buses.
    pub fn line_index(&self, a: usize, b: usize) -> Option<usize> {
        self.lines
            .iter()
            .position(|&(i, j, _)| (i, j) == (a, b) || (i, j) == (b, a))
    }
}
