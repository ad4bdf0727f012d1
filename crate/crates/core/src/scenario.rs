//! Declarative scenario description: bus parameters, node roster, controller
//! settings and timed events, plus the three built-in test cases.
//!
//! Power is injection-positive everywhere: a node delivering power into the
//! DC bus has a positive value, EV charging and export to the AC side are
//! negative.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rated DC bus voltage of the test system (V).
pub const DEFAULT_U_NOMINAL: f64 = 750.0;
/// Half-width of the voltage start band (V); the band is [748, 752] V.
pub const DEFAULT_DU_SET: f64 = 2.0;
pub const DEFAULT_TAU: f64 = 0.02;
pub const DEFAULT_WEIGHT: f64 = 1.0;
pub const DEFAULT_CAPACITY_KWH: f64 = 50.0;
pub const DEFAULT_CONTROL_PERIOD: f64 = 0.01;
pub const DEFAULT_DEBOUNCE_SAMPLES: u32 = 3;
pub const DEFAULT_INHIBIT_WINDOW: f64 = 0.2;
pub const DEFAULT_DT: f64 = 0.001;
pub const DEFAULT_T_END: f64 = 5.0;
pub const DEFAULT_LATENCY: f64 = 0.01;
/// Time of the single power step in the built-in cases (s).
pub const BUILTIN_EVENT_TIME: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    GridConverter,
    Battery,
    EvCharger,
}

impl NodeKind {
    /// Storage kinds carry a state of charge and an energy capacity.
    pub fn is_storage(self) -> bool {
        matches!(self, NodeKind::Battery | NodeKind::EvCharger)
    }

    pub fn label(self) -> &'static str {
        match self {
            NodeKind::GridConverter => "AC/DC",
            NodeKind::Battery => "BATTERY",
            NodeKind::EvCharger => "EV",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    VoltageSource,
    CurrentSource,
    Locked,
}

impl Mode {
    /// Short code used in trace files.
    pub fn code(self) -> &'static str {
        match self {
            Mode::VoltageSource => "VS",
            Mode::CurrentSource => "CS",
            Mode::Locked => "LK",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaMode {
    /// Energy reserve is the SOC fraction regardless of request direction.
    #[default]
    SocFraction,
    /// SOC fraction for injection requests, its complement for absorption.
    DirectionAware,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BusSpec {
    #[serde(rename = "u_nominal_v")]
    pub u_nominal: f64,
    #[serde(rename = "du_set_v")]
    pub du_set: f64,
}

impl Default for BusSpec {
    fn default() -> Self {
        Self {
            u_nominal: DEFAULT_U_NOMINAL,
            du_set: DEFAULT_DU_SET,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSpec {
    pub id: String,
    pub kind: NodeKind,
    pub initial_mode: Mode,
    #[serde(rename = "u_ref_v")]
    pub u_ref: f64,
    /// Droop coefficient in V per kW.
    #[serde(rename = "k_v_per_kw")]
    pub k: f64,
    #[serde(rename = "p_rated_kw")]
    pub p_rated: f64,
    /// Current-source setpoint, injection-positive.
    #[serde(rename = "p_set_kw", default)]
    pub p_set: f64,
    #[serde(default = "default_weight")]
    pub weight: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub soc_pct: Option<f64>,
    #[serde(rename = "capacity_kwh", default, skip_serializing_if = "Option::is_none")]
    pub capacity: Option<f64>,
    #[serde(rename = "tau_s", default = "default_tau")]
    pub tau: f64,
}

fn default_weight() -> f64 {
    DEFAULT_WEIGHT
}

fn default_tau() -> f64 {
    DEFAULT_TAU
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControllerSpec {
    #[serde(rename = "control_period_s")]
    pub control_period: f64,
    pub debounce_samples: u32,
    #[serde(rename = "inhibit_window_s")]
    pub inhibit_window: f64,
    pub gamma_mode: GammaMode,
}

impl Default for ControllerSpec {
    fn default() -> Self {
        Self {
            control_period: DEFAULT_CONTROL_PERIOD,
            debounce_samples: DEFAULT_DEBOUNCE_SAMPLES,
            inhibit_window: DEFAULT_INHIBIT_WINDOW,
            gamma_mode: GammaMode::SocFraction,
        }
    }
}

/// Field-bus link settings shared by the uplink and downlink channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CommsSpec {
    #[serde(rename = "latency_s")]
    pub latency: f64,
    pub drop_probability: f64,
}

impl Default for CommsSpec {
    fn default() -> Self {
        Self {
            latency: DEFAULT_LATENCY,
            drop_probability: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Action {
    #[serde(rename = "set_power_kw")]
    SetPower(f64),
    SetMode(Mode),
    Lock,
    Unlock,
    Shed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventSpec {
    #[serde(rename = "t_s")]
    pub t: f64,
    pub target: String,
    pub action: Action,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub name: String,
    #[serde(rename = "t_end_s", default = "default_t_end")]
    pub t_end: f64,
    #[serde(rename = "dt_s", default = "default_dt")]
    pub dt: f64,
    #[serde(default)]
    pub bus: BusSpec,
    #[serde(default)]
    pub controller: ControllerSpec,
    #[serde(default)]
    pub comms: CommsSpec,
    pub nodes: Vec<NodeSpec>,
    #[serde(default)]
    pub events: Vec<EventSpec>,
    #[serde(default)]
    pub seed: u64,
}

fn default_t_end() -> f64 {
    DEFAULT_T_END
}

fn default_dt() -> f64 {
    DEFAULT_DT
}

impl ScenarioSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serialization is infallible")
    }

    pub fn node(&self, id: &str) -> Option<&NodeSpec> {
        self.nodes.iter().find(|n| n.id == id)
    }

    /// Events in application order: by time, ties kept in file order.
    pub fn sorted_events(&self) -> Vec<EventSpec> {
        let mut events = self.events.clone();
        events.sort_by(|a, b| a.t.total_cmp(&b.t));
        events
    }
}

/// One failed invariant, located by a path such as `nodes[dcdc1].k_v_per_kw`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub locator: String,
    pub message: String,
}

impl Violation {
    fn new(locator: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            locator: locator.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.locator, self.message)
    }
}

fn positive(x: f64) -> bool {
    x.is_finite() && x > 0.0
}

/// Checks every scenario invariant. An empty list means the scenario is runnable.
///
/// Events need not be sorted; the engine applies them in time order.
pub fn validate_scenario(spec: &ScenarioSpec) -> Vec<Violation> {
    let mut out = Vec::new();

    if !positive(spec.t_end) {
        out.push(Violation::new("t_end_s", "must be > 0"));
    }
    if !positive(spec.dt) {
        out.push(Violation::new("dt_s", "must be > 0"));
    }

    if !positive(spec.bus.u_nominal) {
        out.push(Violation::new("bus.u_nominal_v", "must be > 0"));
    }
    if !positive(spec.bus.du_set) {
        out.push(Violation::new("bus.du_set_v", "must be > 0"));
    }

    let ctl = &spec.controller;
    if !positive(ctl.control_period) {
        out.push(Violation::new("controller.control_period_s", "must be > 0"));
    } else if positive(spec.dt) && spec.dt > ctl.control_period {
        out.push(Violation::new(
            "dt_s",
            format!("must not exceed control_period_s ({})", ctl.control_period),
        ));
    }
    if ctl.debounce_samples < 1 {
        out.push(Violation::new("controller.debounce_samples", "must be >= 1"));
    }
    if !(ctl.inhibit_window.is_finite() && ctl.inhibit_window >= 0.0) {
        out.push(Violation::new("controller.inhibit_window_s", "must be >= 0"));
    }

    if !(spec.comms.latency.is_finite() && spec.comms.latency >= 0.0) {
        out.push(Violation::new("comms.latency_s", "must be >= 0"));
    }
    if !(0.0..1.0).contains(&spec.comms.drop_probability) {
        out.push(Violation::new("comms.drop_probability", "must be in [0, 1)"));
    }

    if spec.nodes.is_empty() {
        out.push(Violation::new("nodes", "roster is empty"));
    }
    let mut seen = HashSet::new();
    for (i, node) in spec.nodes.iter().enumerate() {
        if !seen.insert(node.id.as_str()) {
            out.push(Violation::new(
                format!("nodes[{i}].id"),
                format!("duplicate node id `{}`", node.id),
            ));
        }
        validate_node(node, &mut out);
    }

    for (i, ev) in spec.events.iter().enumerate() {
        let at = format!("events[{i}]");
        if !(ev.t.is_finite() && ev.t >= 0.0) {
            out.push(Violation::new(format!("{at}.t_s"), "must be >= 0"));
        }
        match spec.node(&ev.target) {
            None => out.push(Violation::new(
                format!("{at}.target"),
                format!("unknown node `{}`", ev.target),
            )),
            Some(node) => {
                if let Action::SetPower(p) = ev.action {
                    if !p.is_finite() || p.abs() > node.p_rated {
                        out.push(Violation::new(
                            format!("{at}.action.set_power_kw"),
                            format!("|{p}| exceeds p_rated_kw {} of `{}`", node.p_rated, node.id),
                        ));
                    }
                }
            }
        }
    }

    out
}

fn validate_node(node: &NodeSpec, out: &mut Vec<Violation>) {
    let at = |field: &str| format!("nodes[{}].{field}", node.id);

    if node.id.trim().is_empty() {
        out.push(Violation::new(at("id"), "must not be empty"));
    }
    if !positive(node.u_ref) {
        out.push(Violation::new(at("u_ref_v"), "must be > 0"));
    }
    if !positive(node.k) {
        out.push(Violation::new(at("k_v_per_kw"), "droop coefficient must be > 0"));
    }
    if !positive(node.p_rated) {
        out.push(Violation::new(at("p_rated_kw"), "must be > 0"));
    }
    if !(0.0..=1.0).contains(&node.weight) {
        out.push(Violation::new(at("weight"), "must be in [0, 1]"));
    }
    if !positive(node.tau) {
        out.push(Violation::new(at("tau_s"), "must be > 0"));
    }
    if !node.p_set.is_finite() || (positive(node.p_rated) && node.p_set.abs() > node.p_rated) {
        out.push(Violation::new(at("p_set_kw"), "|p_set| must not exceed p_rated"));
    }

    if node.kind.is_storage() {
        match node.soc_pct {
            None => out.push(Violation::new(at("soc_pct"), "required for storage nodes")),
            Some(soc) if !(0.0..=100.0).contains(&soc) => {
                out.push(Violation::new(at("soc_pct"), "must be in [0, 100]"))
            }
            Some(_) => {}
        }
        match node.capacity {
            None => out.push(Violation::new(at("capacity_kwh"), "required for storage nodes")),
            Some(c) if !positive(c) => out.push(Violation::new(at("capacity_kwh"), "must be > 0")),
            Some(_) => {}
        }
    } else {
        if node.soc_pct.is_some() {
            out.push(Violation::new(at("soc_pct"), "only storage nodes carry a state of charge"));
        }
        if node.capacity.is_some() {
            out.push(Violation::new(at("capacity_kwh"), "only storage nodes carry a capacity"));
        }
    }
}

/// Returns the scenario unchanged if valid, or every violation as an error.
pub fn ensure_valid(spec: &ScenarioSpec) -> Result<()> {
    let violations = validate_scenario(spec);
    if violations.is_empty() {
        Ok(())
    } else {
        Err(Error::InvalidScenario(violations))
    }
}

pub const GRID_ID: &str = "acdc";
pub const BATTERY_ID: &str = "dcdc1";
pub const EV_ID: &str = "dcdc2";

fn table_node(kind: NodeKind, mode: Mode) -> NodeSpec {
    let (id, p_rated, k, soc, capacity) = match kind {
        NodeKind::GridConverter => (GRID_ID, 60.0, 1.0, None, None),
        NodeKind::Battery => (BATTERY_ID, 15.0, 4.0, Some(50.0), Some(DEFAULT_CAPACITY_KWH)),
        NodeKind::EvCharger => (EV_ID, 15.0, 4.0, Some(50.0), Some(DEFAULT_CAPACITY_KWH)),
    };
    NodeSpec {
        id: id.to_string(),
        kind,
        initial_mode: mode,
        u_ref: DEFAULT_U_NOMINAL,
        k,
        p_rated,
        p_set: 0.0,
        weight: DEFAULT_WEIGHT,
        soc_pct: soc,
        capacity,
        tau: DEFAULT_TAU,
    }
}

/// The minimum test system (grid converter, battery, EV charger) in the
/// operating modes of case `n`, with its single 15 kW power step.
pub fn builtin_case(n: u32) -> Result<ScenarioSpec> {
    use Mode::{CurrentSource as CS, VoltageSource as VS};

    let (modes, event_target) = match n {
        1 => ([VS, VS, CS], EV_ID),
        2 => ([CS, VS, CS], EV_ID),
        3 => ([CS, VS, VS], GRID_ID),
        _ => return Err(Error::InvalidCase(n)),
    };
    let kinds = [NodeKind::GridConverter, NodeKind::Battery, NodeKind::EvCharger];
    let nodes = kinds
        .iter()
        .zip(modes)
        .map(|(&kind, mode)| table_node(kind, mode))
        .collect();

    Ok(ScenarioSpec {
        name: format!("case{n}"),
        t_end: DEFAULT_T_END,
        dt: DEFAULT_DT,
        bus: BusSpec::default(),
        controller: ControllerSpec::default(),
        comms: CommsSpec::default(),
        nodes,
        events: vec![EventSpec {
            t: BUILTIN_EVENT_TIME,
            target: event_target.to_string(),
            action: Action::SetPower(-15.0),
        }],
        seed: 0,
    })
}

/// Human-readable description of a built-in case.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CaseInfo {
    pub number: u32,
    pub title: &'static str,
    pub conditions: &'static str,
    pub expected: &'static str,
}

pub const CASES: [CaseInfo; 3] = [
    CaseInfo {
        number: 1,
        title: "EV charging under grid connection",
        conditions: "AC/DC and battery hold the bus (voltage source), EV charger is a current \
                     source; EV starts charging at 15 kW at t = 0.5 s",
        expected: "bus sags to ~738 V, AC/DC ranks first and picks up the 15 kW; \
                   battery returns to 0 kW; bus back in [748, 752] V",
    },
    CaseInfo {
        number: 2,
        title: "Charge adjustment in off-grid state",
        conditions: "only the battery holds the bus; AC/DC is a current source at 0 kW; \
                     EV starts charging at 15 kW at t = 0.5 s",
        expected: "bus sags to ~690 V, battery curve shifted by +15 kW in one dispatch; \
                   battery supplies 15 kW; bus back in [748, 752] V",
    },
    CaseInfo {
        number: 3,
        title: "Support AC load in off-grid state",
        conditions: "battery and EV charger hold the bus; AC/DC is a current source and \
                     starts exporting 15 kW to the AC side at t = 0.5 s",
        expected: "bus sags to ~720 V, equal competition coefficients split the request: \
                   7.5 kW each; bus back in [748, 752] V",
    },
];
