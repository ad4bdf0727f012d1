//! Quasi-static DC bus solution.
//!
//! Voltage-source ports act as parallel virtual impedances. Their droop
//! laws are linear, so the bus voltage balancing a given current-source
//! injection has a closed form:
//!
//! ```text
//! u = (Σ (u_ref_i / k_i + shift_i) + p_cs) / Σ (1 / k_i)
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::node::NodeState;

/// Relative margin before an on-curve power counts as beyond the rating.
const SATURATION_MARGIN: f64 = 1e-12;

/// Parallel combination of the active droop curves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemDroop {
    /// V per kW.
    pub k_sys: f64,
    /// Bus voltage at zero net current-source injection (V).
    pub u_ref_sys: f64,
    pub members: Vec<String>,
}

pub fn aggregate_droop(nodes: &[NodeState]) -> Result<SystemDroop> {
    let mut conductance = 0.0;
    let mut weighted = 0.0;
    let mut members = Vec::new();
    for n in nodes.iter().filter(|n| n.is_droop_member()) {
        conductance += 1.0 / n.curve.k;
        weighted += n.curve.no_load_voltage() / n.curve.k;
        members.push(n.id().to_string());
    }
    if members.is_empty() {
        return Err(Error::BusCollapse);
    }
    let k_sys = 1.0 / conductance;
    Ok(SystemDroop {
        k_sys,
        u_ref_sys: k_sys * weighted,
        members,
    })
}

/// Net injection of every port that is not holding the bus.
pub fn current_source_injection(nodes: &[NodeState]) -> f64 {
    nodes.iter().map(NodeState::fixed_injection).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BusSolution {
    pub u: f64,
    /// Equilibrium power per node, aligned with the solver input; `None`
    /// for nodes that are not droop members.
    pub node_powers: Vec<Option<f64>>,
    /// Indices of droop members pinned at their rating.
    pub saturated: Vec<usize>,
    pub p_cs: f64,
    /// Σ node_powers + p_cs.
    pub residual: f64,
}

impl BusSolution {
    pub fn power(&self, index: usize) -> Option<f64> {
        self.node_powers.get(index).copied().flatten()
    }
}

/// Solves the bus voltage for the given ports and current-source injection.
///
/// A droop member whose on-curve power would exceed its rating is pinned at
/// the limit and removed from the parallel set, and the balance is solved
/// again; this repeats until no new member saturates.
pub fn solve_bus(nodes: &[NodeState], p_cs: f64) -> Result<BusSolution> {
    let mut pinned: Vec<Option<f64>> = vec![None; nodes.len()];

    loop {
        let mut conductance = 0.0;
        let mut numerator = p_cs;
        let mut any_active = false;
        for (n, pin) in nodes.iter().zip(&pinned) {
            if !n.is_droop_member() {
                continue;
            }
            match pin {
                Some(p) => numerator += p,
                None => {
                    any_active = true;
                    conductance += 1.0 / n.curve.k;
                    numerator += n.curve.no_load_voltage() / n.curve.k;
                }
            }
        }
        if !any_active {
            return Err(Error::BusCollapse);
        }
        let u = numerator / conductance;

        let node_powers: Vec<Option<f64>> = nodes
            .iter()
            .zip(&pinned)
            .map(|(n, pin)| n.is_droop_member().then(|| pin.unwrap_or_else(|| n.curve.power_at(u))))
            .collect();

        let mut newly_saturated = false;
        for (i, n) in nodes.iter().enumerate() {
            if pinned[i].is_some() {
                continue;
            }
            if let Some(p) = node_powers[i] {
                let limit = n.spec.p_rated;
                if p.abs() > limit * (1.0 + SATURATION_MARGIN) {
                    pinned[i] = Some(limit.copysign(p));
                    newly_saturated = true;
                }
            }
        }
        if newly_saturated {
            continue;
        }

        let residual = node_powers.iter().flatten().sum::<f64>() + p_cs;
        let saturated = pinned
            .iter()
            .enumerate()
            .filter_map(|(i, p)| p.map(|_| i))
            .collect();
        return Ok(BusSolution {
            u,
            node_powers,
            saturated,
            p_cs,
            residual,
        });
    }
}
