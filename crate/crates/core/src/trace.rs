//! Time-stamped simulation record and end-of-run summary, with the CSV and
//! gnuplot renderings used by the command-line tool.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::controller::{Alarm, Dispatch, TripEvent};
use crate::scenario::{Mode, NodeKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSample {
    pub p_out: f64,
    /// Equilibrium the node was lagging toward at this step.
    pub p_target: f64,
    pub mode: Mode,
    pub soc_pct: Option<f64>,
    pub shift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: f64,
    pub bus_u: f64,
    /// Net current-source injection used by the bus solution (kW).
    pub p_cs: f64,
    pub nodes: Vec<NodeSample>,
    pub tripped: bool,
    pub dispatch_count: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trace {
    pub node_ids: Vec<String>,
    pub node_kinds: Vec<NodeKind>,
    pub rows: Vec<TraceRow>,
}

/// Fixed six-decimal rendering; negative zero is printed as zero.
fn fixed(out: &mut String, v: f64) {
    let start = out.len();
    write!(out, "{v:.6}").unwrap();
    if &out[start..] == "-0.000000" {
        out.replace_range(start..start + 1, "");
    }
}

impl Trace {
    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.node_ids.iter().position(|n| n == id)
    }

    /// Power series of one node.
    pub fn power_of(&self, id: &str) -> Vec<f64> {
        match self.node_index(id) {
            Some(i) => self.rows.iter().map(|r| r.nodes[i].p_out).collect(),
            None => Vec::new(),
        }
    }

    pub fn csv_header(&self) -> String {
        let mut h = String::from("t_s,bus_v");
        for id in &self.node_ids {
            write!(h, ",{id}_p_kw,{id}_mode,{id}_soc_pct,{id}_shift_kw").unwrap();
        }
        h.push_str(",tripped,dispatch_count");
        h
    }

    /// Wide CSV: one row per step, node columns in roster order, LF endings.
    /// SOC is left empty for nodes without storage.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.rows.len() + 1) * (1 + self.node_ids.len()));
        out.push_str(&self.csv_header());
        out.push('\n');
        for row in &self.rows {
            fixed(&mut out, row.t);
            out.push(',');
            fixed(&mut out, row.bus_u);
            for n in &row.nodes {
                out.push(',');
                fixed(&mut out, n.p_out);
                out.push(',');
                out.push_str(n.mode.code());
                out.push(',');
                if let Some(soc) = n.soc_pct {
                    fixed(&mut out, soc);
                }
                out.push(',');
                fixed(&mut out, n.shift);
            }
            write!(out, ",{},{}", u8::from(row.tripped), row.dispatch_count).unwrap();
            out.push('\n');
        }
        out
    }

    /// Whitespace-separated numeric columns: time, bus voltage, then each
    /// node's power.
    pub fn to_gnuplot(&self) -> String {
        let mut out = String::from("# t_s bus_v");
        for id in &self.node_ids {
            write!(out, " {id}_p_kw").unwrap();
        }
        out.push('\n');
        for row in &self.rows {
            fixed(&mut out, row.t);
            out.push(' ');
            fixed(&mut out, row.bus_u);
            for n in &row.nodes {
                out.push(' ');
                fixed(&mut out, n.p_out);
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodePower {
    pub node: String,
    pub p_kw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispatchLine {
    pub t_s: f64,
    pub node: String,
    pub delta_p_kw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub scenario: String,
    pub steps: usize,
    /// Bus voltage at the last recorded step; `None` if nothing was recorded.
    pub final_bus_v: Option<f64>,
    /// Current-source injection at the last recorded step.
    pub final_p_cs_kw: f64,
    /// Mean output over the final 10 % of recorded rows.
    pub steady_power: Vec<NodePower>,
    pub trips: Vec<TripEvent>,
    pub dispatches: Vec<DispatchLine>,
    pub decisions: Vec<Dispatch>,
    pub total_deficit_kw: f64,
    pub collapsed_at_s: Option<f64>,
    pub rejected_commands: Vec<String>,
    pub alarms: Vec<Alarm>,
    pub dropped_messages: u64,
}

impl Summary {
    pub fn steady_power_of(&self, node: &str) -> Option<f64> {
        self.steady_power.iter().find(|p| p.node == node).map(|p| p.p_kw)
    }

    pub fn is_collapsed(&self) -> bool {
        self.collapsed_at_s.is_some()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serialization is infallible")
    }
}

/// Mean of each node's power over the last tenth of the rows.
pub fn steady_state_powers(trace: &Trace) -> Vec<NodePower> {
    let n = trace.rows.len();
    if n == 0 {
        return trace
            .node_ids
            .iter()
            .map(|id| NodePower { node: id.clone(), p_kw: 0.0 })
            .collect();
    }
    let window = n.div_ceil(10).max(1);
    let tail = &trace.rows[n - window..];
    trace
        .node_ids
        .iter()
        .enumerate()
        .map(|(i, id)| NodePower {
            node: id.clone(),
            p_kw: tail.iter().map(|r| r.nodes[i].p_out).sum::<f64>() / window as f64,
        })
        .collect()
}
