//! Independent oracles and random instance generators shared by the
//! integration and acceptance tests. Nothing here calls the solver or the
//! allocator it is used to check.

#![allow(dead_code)]

use flexbus_core::scenario::{CommsSpec, ControllerSpec};
use flexbus_core::{
    Action, BusSpec, CompetitionEntry, EventSpec, Mode, NodeKind, NodeSpec, NodeState, ScenarioSpec,
};
use rand::Rng;

/// Bus voltage zeroing the power balance, found by bisection over the
/// bracket `u_ref_sys ± (2 k_sys |p_cs| + 1)`.
pub fn bisect_bus_voltage(curves: &[(f64, f64, f64)], p_cs: f64) -> f64 {
    let balance = |u: f64| -> f64 {
        curves
            .iter()
            .map(|&(u_ref, k, shift)| (u_ref + k * shift - u) / k)
            .sum::<f64>()
            + p_cs
    };
    let conductance: f64 = curves.iter().map(|&(_, k, _)| 1.0 / k).sum();
    let k_sys = 1.0 / conductance;
    let u_ref_sys = k_sys * curves.iter().map(|&(u, k, s)| (u + k * s) / k).sum::<f64>();
    let half_width = k_sys * p_cs.abs() * 2.0 + 1.0;
    let (mut lo, mut hi) = (u_ref_sys - half_width, u_ref_sys + half_width);
    assert!(balance(lo) >= 0.0 && balance(hi) <= 0.0, "root not bracketed");
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if balance(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    0.5 * (lo + hi)
}

pub fn droop_node(id: &str, u_ref: f64, k: f64, shift: f64, p_rated: f64) -> NodeState {
    let spec = NodeSpec {
        id: id.to_string(),
        kind: NodeKind::GridConverter,
        initial_mode: Mode::VoltageSource,
        u_ref,
        k,
        p_rated,
        p_set: 0.0,
        weight: 1.0,
        soc_pct: None,
        capacity: None,
        tau: 0.02,
    };
    let mut n = NodeState::from_spec(&spec);
    n.curve.shift = shift;
    n
}

/// 1–8 unsaturable droop nodes with k in [0.1, 10] plus p_cs in [-100, 100].
pub fn random_roster<R: Rng>(rng: &mut R) -> (Vec<NodeState>, f64) {
    let n = rng.gen_range(1..=8);
    let nodes = (0..n)
        .map(|i| {
            droop_node(
                &format!("n{i}"),
                rng.gen_range(700.0..800.0),
                rng.gen_range(0.1..=10.0),
                rng.gen_range(-20.0..20.0),
                1e9,
            )
        })
        .collect();
    (nodes, rng.gen_range(-100.0..=100.0))
}

pub fn curves_of(nodes: &[NodeState]) -> Vec<(f64, f64, f64)> {
    nodes
        .iter()
        .map(|n| (n.curve.u_ref, n.curve.k, n.curve.shift))
        .collect()
}

/// Small allocation instance on a 0.5 kW grid: up to four entries with
/// headroom in [0, 6] kW and coefficients from a coarse set so exact ties
/// occur often.
pub fn random_allocation_instance<R: Rng>(rng: &mut R) -> (f64, Vec<CompetitionEntry>) {
    const COEFFS: [f64; 5] = [0.0, 0.1, 0.25, 0.5, 0.8];
    let n = rng.gen_range(1..=4);
    let entries = (0..n)
        .map(|i| {
            let locked = rng.gen_bool(0.2);
            let coeff = if locked { 0.0 } else { COEFFS[rng.gen_range(0..COEFFS.len())] };
            CompetitionEntry {
                node: format!("n{i}"),
                delta: 1.0,
                beta: coeff,
                gamma: 1.0,
                coeff,
                headroom: rng.gen_range(0..=12) as f64 * 0.5,
                locked,
            }
        })
        .collect();
    let magnitude = rng.gen_range(0..=40) as f64 * 0.5;
    let requested = if rng.gen_bool(0.5) { magnitude } else { -magnitude };
    (requested, entries)
}

/// Priority groups: distinct coefficients of unlocked entries in descending
/// order, each with the indices carrying exactly that coefficient.
pub fn priority_groups(entries: &[CompetitionEntry]) -> Vec<Vec<usize>> {
    let mut levels: Vec<f64> = entries.iter().filter(|e| !e.locked).map(|e| e.coeff).collect();
    levels.sort_by(|a, b| b.total_cmp(a));
    levels.dedup();
    levels
        .iter()
        .map(|&c| {
            (0..entries.len())
                .filter(|&i| !entries[i].locked && entries[i].coeff == c)
                .collect()
        })
        .collect()
}

/// Exhaustive search over every headroom-respecting allocation on the
/// 0.5 kW grid; returns the lexicographically largest vector of per-group
/// totals (kW magnitudes, priority order).
pub fn brute_force_group_totals(requested: f64, entries: &[CompetitionEntry]) -> Vec<f64> {
    let budget = (requested.abs() * 2.0).round() as i64;
    let caps: Vec<i64> = entries
        .iter()
        .map(|e| if e.locked { 0 } else { (e.headroom * 2.0).round() as i64 })
        .collect();
    let groups = priority_groups(entries);

    let mut best: Option<Vec<i64>> = None;
    let mut current = vec![0i64; entries.len()];
    loop {
        if current.iter().sum::<i64>() <= budget {
            let totals: Vec<i64> = groups
                .iter()
                .map(|g| g.iter().map(|&i| current[i]).sum())
                .collect();
            if best.as_ref().is_none_or(|b| totals > *b) {
                best = Some(totals);
            }
        }
        // odometer over 0..=cap per entry
        let mut i = 0;
        loop {
            if i == current.len() {
                return best
                    .unwrap_or_default()
                    .into_iter()
                    .map(|h| h as f64 * 0.5)
                    .collect();
            }
            if current[i] < caps[i] {
                current[i] += 1;
                break;
            }
            current[i] = 0;
            i += 1;
        }
    }
}

/// Level `λ` with `Σ min(cap_j, λ) = total`, by bisection.
pub fn water_level(caps: &[f64], total: f64) -> f64 {
    let filled = |l: f64| caps.iter().map(|&c| c.min(l)).sum::<f64>();
    let (mut lo, mut hi) = (0.0, caps.iter().cloned().fold(0.0, f64::max));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if filled(mid) < total {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Random roster of droop nodes plus one current-source load that steps at
/// 0.3 s. Ratings leave every node able to carry the whole disturbance, and
/// the step is large enough to leave the voltage band.
pub fn random_restoration_scenario<R: Rng>(rng: &mut R, index: usize) -> ScenarioSpec {
    let bus = BusSpec::default();
    let n = rng.gen_range(1..=4);
    let ks: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..8.0)).collect();
    let k_sys = 1.0 / ks.iter().map(|k| 1.0 / k).sum::<f64>();

    let min_step = 1.5 * 2.0 * bus.du_set / k_sys;
    let magnitude: f64 = rng.gen_range(5.0..40.0_f64).max(min_step);
    let step = if rng.gen_bool(0.5) { -magnitude } else { magnitude };

    let mut nodes: Vec<NodeSpec> = ks
        .iter()
        .enumerate()
        .map(|(i, &k)| {
            let kind = [NodeKind::GridConverter, NodeKind::Battery, NodeKind::EvCharger][rng.gen_range(0..3)];
            let storage = kind.is_storage();
            NodeSpec {
                id: format!("n{i}"),
                kind,
                initial_mode: Mode::VoltageSource,
                u_ref: bus.u_nominal + rng.gen_range(-0.5..0.5),
                k,
                p_rated: magnitude * (1.0 + rng.gen_range(0.0..1.0)) + 5.0,
                p_set: 0.0,
                weight: rng.gen_range(0.2..=1.0),
                soc_pct: storage.then(|| rng.gen_range(10.0..90.0)),
                capacity: storage.then(|| rng.gen_range(20.0..100.0)),
                tau: rng.gen_range(0.005..0.05),
            }
        })
        .collect();
    nodes.push(NodeSpec {
        id: "load".into(),
        kind: NodeKind::GridConverter,
        initial_mode: Mode::CurrentSource,
        u_ref: bus.u_nominal,
        k: 1.0,
        p_rated: magnitude + 1.0,
        p_set: 0.0,
        weight: 1.0,
        soc_pct: None,
        capacity: None,
        tau: 0.02,
    });

    ScenarioSpec {
        name: format!("restoration{index}"),
        t_end: 1.5,
        dt: 0.001,
        bus,
        controller: ControllerSpec::default(),
        comms: CommsSpec::default(),
        nodes,
        events: vec![EventSpec {
            t: 0.3,
            target: "load".into(),
            action: Action::SetPower(step),
        }],
        seed: index as u64,
    }
}
