//! Power reserve, energy reserve and the competition coefficient that ranks
//! droop nodes for a power correction.

use serde::{Deserialize, Serialize};

use crate::node::NodeState;
use crate::scenario::{GammaMode, Mode, NodeKind};

/// Which way the bus needs power to move.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// More power into the bus (undervoltage).
    Inject,
    /// Less power into the bus (overvoltage).
    Absorb,
}

impl Direction {
    pub fn of(requested: f64) -> Self {
        if requested < 0.0 {
            Direction::Absorb
        } else {
            Direction::Inject
        }
    }
}

/// `|p_rated - p| / p_rated`. Reverse flow (`p < 0`) gives values above 1.
pub fn power_reserve(p_rated: f64, p: f64) -> f64 {
    (p_rated - p).abs() / p_rated
}

/// Energy reserve normalised to [0, 1]; ports without storage always report 1.
pub fn energy_reserve(node: &NodeState, direction: Direction, mode: GammaMode) -> f64 {
    energy_reserve_for(node.kind(), node.soc_pct, direction, mode)
}

pub fn energy_reserve_for(
    kind: NodeKind,
    soc_pct: Option<f64>,
    direction: Direction,
    mode: GammaMode,
) -> f64 {
    if !kind.is_storage() {
        return 1.0;
    }
    let soc = soc_pct.unwrap_or(100.0).clamp(0.0, 100.0);
    match (mode, direction) {
        (GammaMode::DirectionAware, Direction::Absorb) => (100.0 - soc) / 100.0,
        _ => soc / 100.0,
    }
}

pub fn competition_coefficient(delta: f64, beta: f64, gamma: f64, locked: bool) -> f64 {
    if locked {
        0.0
    } else {
        delta * beta * gamma
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompetitionEntry {
    pub node: String,
    pub delta: f64,
    pub beta: f64,
    pub gamma: f64,
    pub coeff: f64,
    /// Power the node can still take on in the requested direction (kW, ≥ 0).
    pub headroom: f64,
    pub locked: bool,
}

/// Room left on a node's rating once the bus is back at `u_nominal`.
///
/// After restoration a droop node carries its curve's power at nominal
/// voltage, so that power (not the transient power during the sag) is what
/// a further curve shift adds to.
pub fn headroom(node: &NodeState, u_nominal: f64, direction: Direction) -> f64 {
    if node.locked || node.shed {
        return 0.0;
    }
    let p_nominal = node.curve.power_at(u_nominal);
    let room = match direction {
        Direction::Inject => node.spec.p_rated - p_nominal,
        Direction::Absorb => node.spec.p_rated + p_nominal,
    };
    room.max(0.0)
}

/// One entry per voltage-source node (locked ones included with a zero
/// coefficient), in input order.
pub fn competition_entries(
    nodes: &[NodeState],
    u_nominal: f64,
    direction: Direction,
    gamma_mode: GammaMode,
) -> Vec<CompetitionEntry> {
    nodes
        .iter()
        .filter(|n| n.mode == Mode::VoltageSource && !n.shed)
        .map(|n| {
            let delta = n.spec.weight;
            let beta = power_reserve(n.spec.p_rated, n.p_out);
            let gamma = energy_reserve(n, direction, gamma_mode);
            CompetitionEntry {
                node: n.id().to_string(),
                delta,
                beta,
                gamma,
                coeff: competition_coefficient(delta, beta, gamma, n.locked),
                headroom: headroom(n, u_nominal, direction),
                locked: n.locked,
            }
        })
        .collect()
}
