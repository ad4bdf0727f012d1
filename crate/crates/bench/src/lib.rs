//! Fixtures shared by the criterion benches.

use flexbus_core::{Mode, NodeKind, NodeSpec, NodeState};

/// `n` voltage-source grid converters with spread droop coefficients and
/// rated voltages, deterministic across runs.
pub fn droop_roster(n: usize) -> Vec<NodeState> {
    (0..n)
        .map(|i| {
            let spec = NodeSpec {
                id: format!("n{i}"),
                kind: NodeKind::GridConverter,
                initial_mode: Mode::VoltageSource,
                u_ref: 748.0 + (i % 5) as f64,
                k: 0.5 + (i % 7) as f64 * 0.75,
                p_rated: 1000.0,
                p_set: 0.0,
                weight: 1.0,
                soc_pct: None,
                capacity: None,
                tau: 0.02,
            };
            NodeState::from_spec(&spec)
        })
        .collect()
}
