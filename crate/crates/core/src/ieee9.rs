//! IEEE 9-bus test network with the two line-parameter sets, the tabulated
//! equilibrium angles and the nominal power profile.
//!
//! Bus numbers in the constants are 1-based as published; the accessors
//! return 0-based node indices.

use alloc::vec::Vec;

use crate::network::{Edge, NetworkError, PowerNetwork};

pub const BUS_COUNT: usize = 9;

/// Line endpoints (1-based), in the published column order.
pub const LINES: [(usize, usize); 9] = [
    (1, 4),
    (4, 5),
    (5, 6),
    (3, 6),
    (6, 7),
    (7, 8),
    (8, 2),
    (8, 9),
    (9, 4),
];

pub const WEIGHTS_SET1: [f64; 9] = [
    17.2376, 10.7036, 5.8484, 17.1069, 9.8343, 13.6459, 15.8972, 6.0142, 11.3837,
];

pub const WEIGHTS_SET2: [f64; 9] = [
    8.4148, 10.6607, 9.9044, 10.1356, 12.2033, 10.6274, 13.6683, 9.5708, 11.3565,
];

pub const ANGLES_SET1: [f64; 9] = [
    0.1162, 0.2195, 0.1406, 0.0483, 0.0089, 0.0909, 0.0634, 0.1168, 0.0,
];

pub const ANGLES_SET2: [f64; 9] = [
    0.1841, 0.1994, 0.1269, 0.0446, 0.0, 0.0429, 0.0163, 0.0799, 0.0009,
];

pub const POWER_PROFILE: [f64; 9] = [1.17, 1.63, 0.85, -0.2, -0.9, -0.1, -1.0, -0.2, -1.25];

/// Bus where the renewable disturbance enters (bus 1).
pub const DISTURBANCE_NODE: usize = 0;

/// Coefficient range used for the random `d_i` draw.
pub const DAMPING_RANGE: (f64, f64) = (0.7, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum ParameterSet {
    One,
    Two,
}

impl ParameterSet {
    pub fn weights(self) -> &'static [f64; 9] {
        match self {
            Self::One => &WEIGHTS_SET1,
            Self::Two => &WEIGHTS_SET2,
        }
    }

    pub fn table_angles(self) -> &'static [f64; 9] {
        match self {
            Self::One => &ANGLES_SET1,
            Self::Two => &ANGLES_SET2,
        }
    }

    /// 0-based node whose tabulated angle is zero: bus 9 for set 1, bus 5
    /// for set 2.
    pub fn reference_node(self) -> usize {
        match self {
            Self::One => 8,
            Self::Two => 4,
        }
    }

    pub fn edges(self) -> Vec<Edge> {
        LINES
            .iter()
            .zip(self.weights())
            .map(|(&(i, j), &w)| Edge::new(i - 1, j - 1, w))
            .collect()
    }

    pub fn network(self, damping: Vec<f64>) -> Result<PowerNetwork, NetworkError> {
        PowerNetwork::new(BUS_COUNT, self.edges(), damping, alloc::vec![DISTURBANCE_NODE])
    }
}

/// 0-based index of the line between buses 1 and 4, the one tripped in the
/// line-trip scenario.
pub const TRIPPED_LINE: (usize, usize) = (0, 3);

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_profile_is_balanced() {
        let s: f64 = POWER_PROFILE.iter().sum();
        assert!(s.abs() < 1e-9);
    }

    #[test]
    fn both_sets_build() {
        for set in [ParameterSet::One, ParameterSet::Two] {
            let net = set.network(alloc::vec![1.0; 9]).unwrap();
            assert_eq!(net.edges().len(), 9);
            assert!(net.weights().iter().all(|&w| w > 0.0));
            assert_eq!(set.table_angles()[set.reference_node()], 0.0);
        }
    }

    #[test]
    fn weight_ratio_matches_published() {
        let r1 = ParameterSet::One.network(alloc::vec![1.0; 9]).unwrap();
        let r2 = ParameterSet::Two.network(alloc::vec![1.0; 9]).unwrap();
        assert!((r1.max_weight() / r1.min_weight() - 2.9474).abs() < 1e-4);
        assert!((r2.max_weight() / r2.min_weight() - 1.6243).abs() < 1e-4);
    }
}
