//! Microgrid controller: start-up (trip) logic, system droop estimate of the
//! unbalanced power, and ranked allocation of curve shifts to droop nodes.

pub mod allocation;
pub mod competition;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::bus::{aggregate_droop, SystemDroop};
use crate::comms::{Message, Telemetry};
use crate::node::NodeState;
use crate::scenario::{BusSpec, ControllerSpec, Mode, NodeSpec};

pub use allocation::{rank, rank_and_allocate, tie_groups, Allocation, AllocationPlan, TIE_TOLERANCE};
pub use competition::{
    competition_coefficient, competition_entries, energy_reserve, energy_reserve_for, headroom,
    power_reserve, CompetitionEntry, Direction,
};

const TIME_EPS: f64 = 1e-9;

/// Returns `u - u_nominal` when the deviation leaves the band `±du_set`.
pub fn check_trip(u: f64, u_nominal: f64, du_set: f64) -> Option<f64> {
    let delta_u = u - u_nominal;
    (delta_u.abs() > du_set).then_some(delta_u)
}

/// Power the bus is short of, read off the system droop curve. Positive
/// means more injection is needed.
pub fn estimate_unbalance(delta_u: f64, sys: &SystemDroop) -> f64 {
    -delta_u / sys.k_sys
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripEvent {
    pub t: f64,
    pub u: f64,
    pub delta_u: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alarm {
    pub t: f64,
    pub text: String,
}

/// Everything the controller decided in one dispatch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dispatch {
    pub trip: TripEvent,
    pub system: SystemDroop,
    /// kW, positive = more injection needed.
    pub unbalance: f64,
    /// Competition entries in descending priority.
    pub ranking: Vec<CompetitionEntry>,
    pub plan: AllocationPlan,
}

impl Dispatch {
    pub fn t(&self) -> f64 {
        self.trip.t
    }

    pub fn commands(&self) -> Vec<Message> {
        self.plan
            .allocations
            .iter()
            .map(|a| Message::ShiftCommand {
                node: a.node.clone(),
                delta_p: a.delta_p,
            })
            .collect()
    }
}

/// Sequential supervisory state machine. Telemetry arrives through
/// [`receive`](Controller::receive); [`control_cycle`](Controller::control_cycle)
/// runs once per control period.
#[derive(Debug, Clone)]
pub struct Controller {
    bus: BusSpec,
    settings: ControllerSpec,
    roster: Vec<NodeSpec>,
    index: HashMap<String, usize>,
    latest: Vec<Option<Telemetry>>,
    out_of_band: u32,
    last_attempt: Option<f64>,
    tripped: bool,
    dispatch_count: usize,
    alarms: Vec<Alarm>,
}

impl Controller {
    pub fn new(bus: BusSpec, settings: ControllerSpec, roster: Vec<NodeSpec>) -> Self {
        let index = roster
            .iter()
            .enumerate()
            .map(|(i, n)| (n.id.clone(), i))
            .collect();
        let n = roster.len();
        Self {
            bus,
            settings,
            roster,
            index,
            latest: vec![None; n],
            out_of_band: 0,
            last_attempt: None,
            tripped: false,
            dispatch_count: 0,
            alarms: Vec::new(),
        }
    }

    pub fn receive(&mut self, now: f64, msg: Message) {
        match msg {
            Message::Telemetry(tel) => {
                if let Some(&i) = self.index.get(&tel.node) {
                    self.latest[i] = Some(tel);
                }
            }
            Message::LockNotice { node } => {
                if let Some(tel) = self.index.get(&node).and_then(|&i| self.latest[i].as_mut()) {
                    tel.locked = true;
                    tel.mode = Mode::Locked;
                }
            }
            Message::Alarm(text) => self.alarms.push(Alarm { t: now, text }),
            Message::ShiftCommand { .. } => {}
        }
    }

    /// Last sample was outside the voltage band.
    pub fn tripped(&self) -> bool {
        self.tripped
    }

    pub fn dispatch_count(&self) -> usize {
        self.dispatch_count
    }

    pub fn alarms(&self) -> &[Alarm] {
        &self.alarms
    }

    /// Node states as the controller sees them: static parameters from the
    /// roster, everything else from the latest telemetry. Nodes that have
    /// not reported are left out.
    pub fn snapshot(&self) -> Vec<NodeState> {
        self.roster
            .iter()
            .zip(&self.latest)
            .filter_map(|(spec, tel)| {
                let tel = tel.as_ref()?;
                let mut node = NodeState::from_spec(spec);
                match tel.mode {
                    Mode::Locked => node.locked = true,
                    m => {
                        node.mode = m;
                        node.locked = tel.locked;
                    }
                }
                node.p_out = tel.p;
                node.soc_pct = tel.soc_pct;
                node.curve.shift = tel.shift;
                Some(node)
            })
            .collect()
    }

    /// One sample of the bus voltage. Returns a dispatch when the debounced
    /// trip fires outside the inhibit window.
    pub fn control_cycle(&mut self, now: f64, measured_u: f64) -> Option<Dispatch> {
        let Some(delta_u) = check_trip(measured_u, self.bus.u_nominal, self.bus.du_set) else {
            self.out_of_band = 0;
            self.tripped = false;
            return None;
        };
        self.tripped = true;
        self.out_of_band = self.out_of_band.saturating_add(1);
        if self.out_of_band < self.settings.debounce_samples {
            return None;
        }
        if let Some(last) = self.last_attempt {
            if now - last + TIME_EPS < self.settings.inhibit_window {
                return None;
            }
        }
        self.out_of_band = 0;
        self.last_attempt = Some(now);

        let trip = TripEvent {
            t: now,
            u: measured_u,
            delta_u,
        };
        let snapshot = self.snapshot();
        let system = match aggregate_droop(&snapshot) {
            Ok(sys) => sys,
            Err(e) => {
                self.alarms.push(Alarm {
                    t: now,
                    text: format!("trip at {measured_u:.3} V ignored: {e}"),
                });
                return None;
            }
        };

        let unbalance = estimate_unbalance(delta_u, &system);
        let entries = competition_entries(
            &snapshot,
            self.bus.u_nominal,
            Direction::of(unbalance),
            self.settings.gamma_mode,
        );
        let plan = rank_and_allocate(unbalance, &entries);
        self.dispatch_count += 1;

        Some(Dispatch {
            trip,
            system,
            unbalance,
            ranking: rank(&entries),
            plan,
        })
    }
}
