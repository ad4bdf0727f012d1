//! Ranked, headroom-capped distribution of a power correction.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::competition::CompetitionEntry;

/// Relative tolerance under which two coefficients are treated as tied.
pub const TIE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub node: String,
    /// Curve shift assigned to the node, same sign as the request (kW).
    pub delta_p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationPlan {
    pub requested: f64,
    /// Nonzero allocations in priority order.
    pub allocations: Vec<Allocation>,
    /// Part of the request no node had room for.
    pub deficit: f64,
}

impl AllocationPlan {
    pub fn allocated(&self, node: &str) -> f64 {
        self.allocations
            .iter()
            .filter(|a| a.node == node)
            .map(|a| a.delta_p)
            .sum()
    }

    pub fn total_allocated(&self) -> f64 {
        self.allocations.iter().map(|a| a.delta_p).sum()
    }
}

fn by_priority(a: &CompetitionEntry, b: &CompetitionEntry) -> Ordering {
    b.coeff.total_cmp(&a.coeff).then_with(|| a.node.cmp(&b.node))
}

fn tied(a: f64, b: f64) -> bool {
    (a - b).abs() <= TIE_TOLERANCE * a.abs().max(b.abs())
}

/// Entries in descending coefficient order, node id breaking exact ties.
pub fn rank(entries: &[CompetitionEntry]) -> Vec<CompetitionEntry> {
    let mut ranked = entries.to_vec();
    ranked.sort_by(by_priority);
    ranked
}

/// Splits a ranked list into runs of tied coefficients. Each run is tied
/// to its first (highest) member, so ties do not chain.
pub fn tie_groups(ranked: &[CompetitionEntry]) -> Vec<&[CompetitionEntry]> {
    let mut groups = Vec::new();
    let mut start = 0;
    for i in 1..=ranked.len() {
        if i == ranked.len() || !tied(ranked[start].coeff, ranked[i].coeff) {
            groups.push(&ranked[start..i]);
            start = i;
        }
    }
    groups
}

/// Equal split of `amount` over members capped at `caps`, with any member's
/// overflow re-split across the rest. Returns shares in input order.
fn water_fill(amount: f64, caps: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..caps.len()).collect();
    order.sort_by(|&a, &b| caps[a].total_cmp(&caps[b]));

    let mut shares = vec![0.0; caps.len()];
    let mut left = amount.min(caps.iter().sum());
    for (done, &i) in order.iter().enumerate() {
        let share = left / (order.len() - done) as f64;
        let give = share.min(caps[i]);
        shares[i] = give;
        left -= give;
    }
    shares
}

/// Fills the request in descending coefficient order, capping every node at
/// its headroom. Tied nodes share their part equally. Locked entries take
/// nothing; whatever no node can absorb is reported as the deficit.
pub fn rank_and_allocate(requested: f64, entries: &[CompetitionEntry]) -> AllocationPlan {
    let sign = requested.signum();
    let mut remaining = requested.abs();
    let mut allocations = Vec::new();

    if requested != 0.0 && requested.is_finite() {
        let eligible: Vec<CompetitionEntry> = entries
            .iter()
            .filter(|e| !e.locked && e.headroom > 0.0)
            .cloned()
            .collect();
        let ranked = rank(&eligible);
        for group in tie_groups(&ranked) {
            if remaining <= 0.0 {
                break;
            }
            let caps: Vec<f64> = group.iter().map(|e| e.headroom).collect();
            for (entry, share) in group.iter().zip(water_fill(remaining, &caps)) {
                if share > 0.0 {
                    allocations.push(Allocation {
                        node: entry.node.clone(),
                        delta_p: sign * share,
                    });
                    remaining -= share;
                }
            }
        }
    }

    let total: f64 = allocations.iter().map(|a| a.delta_p).sum();
    AllocationPlan {
        requested,
        allocations,
        deficit: requested - total,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(node: &str, coeff: f64, headroom: f64) -> CompetitionEntry {
        CompetitionEntry {
            node: node.to_string(),
            delta: 1.0,
            beta: coeff,
            gamma: 1.0,
            coeff,
            headroom,
            locked: false,
        }
    }

    #[test]
    fn highest_coefficient_takes_all() {
        let plan = rank_and_allocate(15.0, &[entry("battery", 0.4, 12.0), entry("grid", 0.8, 48.0)]);
        assert_eq!(plan.allocated("grid"), 15.0);
        assert_eq!(plan.allocated("battery"), 0.0);
        assert_eq!(plan.deficit, 0.0);
        assert_eq!(plan.allocations.len(), 1);
    }

    #[test]
    fn equal_coefficients_split_evenly() {
        let plan = rank_and_allocate(15.0, &[entry("dcdc2", 0.5, 15.0), entry("dcdc1", 0.5, 15.0)]);
        assert_eq!(plan.allocated("dcdc1"), 7.5);
        assert_eq!(plan.allocated("dcdc2"), 7.5);
        assert_eq!(plan.deficit, 0.0);
    }

    #[test]
    fn zero_request() {
        let plan = rank_and_allocate(0.0, &[entry("a", 1.0, 5.0)]);
        assert!(plan.allocations.is_empty());
        assert_eq!(plan.deficit, 0.0);
    }

    #[test]
    fn request_beyond_headroom_leaves_deficit() {
        let plan = rank_and_allocate(100.0, &[entry("grid", 0.8, 48.0), entry("battery", 0.4, 12.0)]);
        assert_eq!(plan.allocated("grid"), 48.0);
        assert_eq!(plan.allocated("battery"), 12.0);
        assert_eq!(plan.deficit, 40.0);
    }

    #[test]
    fn empty_entries_is_full_deficit() {
        let plan = rank_and_allocate(-7.0, &[]);
        assert!(plan.allocations.is_empty());
        assert_eq!(plan.deficit, -7.0);
    }

    #[test]
    fn absorption_allocations_are_negative() {
        let plan = rank_and_allocate(-10.0, &[entry("a", 0.9, 4.0), entry("b", 0.2, 20.0)]);
        assert_eq!(plan.allocated("a"), -4.0);
        assert_eq!(plan.allocated("b"), -6.0);
        assert_eq!(plan.deficit, 0.0);
    }

    #[test]
    fn tie_overflow_is_resplit() {
        let plan = rank_and_allocate(
            12.0,
            &[entry("a", 0.5, 1.0), entry("b", 0.5, 10.0), entry("c", 0.5, 10.0), entry("d", 0.1, 10.0)],
        );
        assert_eq!(plan.allocated("a"), 1.0);
        assert_eq!(plan.allocated("b"), 5.5);
        assert_eq!(plan.allocated("c"), 5.5);
        assert_eq!(plan.allocated("d"), 0.0);
    }

    #[test]
    fn near_equal_coefficients_tie() {
        let a = entry("a", 0.5, 10.0);
        let b = entry("b", 0.5 * (1.0 + 1e-12), 10.0);
        let plan = rank_and_allocate(4.0, &[a, b]);
        assert_eq!(plan.allocated("a"), 2.0);
        assert_eq!(plan.allocated("b"), 2.0);
    }

    #[test]
    fn locked_and_full_entries_skipped() {
        let mut locked = entry("locked", 0.0, 0.0);
        locked.locked = true;
        let plan = rank_and_allocate(5.0, &[locked, entry("full", 0.9, 0.0), entry("z", 0.0, 8.0)]);
        assert_eq!(plan.allocations.len(), 1);
        assert_eq!(plan.allocated("z"), 5.0);
    }

    #[test]
    fn ranking_order() {
        let ranked = rank(&[entry("b", 0.4, 1.0), entry("a", 0.4, 1.0), entry("c", 0.9, 1.0)]);
        let ids: Vec<_> = ranked.iter().map(|e| e.node.as_str()).collect();
        assert_eq!(ids, ["c", "a", "b"]);
        let groups = tie_groups(&ranked);
        assert_eq!(groups.len(), 2);
        assert_eq!(groups[1].len(), 2);
    }
}
