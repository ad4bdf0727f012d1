//! Fixed-step simulation loop.
//!
//! Every step runs, in this order: due scenario events, due downlink
//! messages (curve shifts), the bus solution, the first-order update of
//! every node, the controller (once per control period), and the trace row.

use crate::bus::{current_source_injection, solve_bus};
use crate::comms::{Channel, ChannelConfig, Message, Telemetry};
use crate::controller::Controller;
use crate::error::{Error, Result};
use crate::node::NodeState;
use crate::scenario::{ensure_valid, Action, EventSpec, Mode, ScenarioSpec};
use crate::trace::{steady_state_powers, DispatchLine, NodeSample, Summary, Trace, TraceRow};

/// Applies one scenario event to the roster. Returns the notice the node
/// sends to the controller, if any.
pub fn apply_event(nodes: &mut [NodeState], event: &EventSpec) -> Result<Option<Message>> {
    let node = nodes
        .iter_mut()
        .find(|n| n.id() == event.target)
        .ok_or_else(|| Error::UnknownNode(event.target.clone()))?;
    if node.shed {
        return Ok(None);
    }
    let lock_notice = |n: &NodeState| Message::LockNotice { node: n.id().to_string() };

    match event.action {
        Action::SetPower(p) => {
            node.p_set = p;
            node.mode = Mode::CurrentSource;
        }
        Action::SetMode(Mode::Locked) | Action::Lock => {
            node.locked = true;
            return Ok(Some(lock_notice(node)));
        }
        Action::SetMode(mode) => {
            node.mode = mode;
            node.locked = false;
        }
        Action::Unlock => node.locked = false,
        Action::Shed => {
            node.shed = true;
            node.p_out = 0.0;
            node.p_target = 0.0;
            return Ok(Some(lock_notice(node)));
        }
    }
    Ok(None)
}

/// A scenario in progress. [`run`] drives one to completion.
#[derive(Debug)]
pub struct Simulation {
    spec: ScenarioSpec,
    nodes: Vec<NodeState>,
    controller: Controller,
    uplink: Channel,
    downlink: Channel,
    events: Vec<EventSpec>,
    next_event: usize,
    step: usize,
    last_step: usize,
    control_tick: u64,
    rows: Vec<TraceRow>,
    trips: Vec<crate::controller::TripEvent>,
    decisions: Vec<crate::controller::Dispatch>,
    rejected: Vec<String>,
    collapsed_at: Option<f64>,
}

impl Simulation {
    pub fn new(spec: &ScenarioSpec) -> Result<Self> {
        ensure_valid(spec)?;
        let nodes = spec.nodes.iter().map(NodeState::from_spec).collect();
        let channel = |seed| {
            Channel::new(ChannelConfig {
                latency: spec.comms.latency,
                drop_probability: spec.comms.drop_probability,
                seed,
            })
        };
        // a hair of slack so t_end/dt landing just under an integer still counts
        let last_step = (spec.t_end / spec.dt + 1e-9).floor() as usize;
        Ok(Self {
            controller: Controller::new(spec.bus.clone(), spec.controller.clone(), spec.nodes.clone()),
            uplink: channel(spec.seed),
            downlink: channel(spec.seed.wrapping_add(1)),
            events: spec.sorted_events(),
            spec: spec.clone(),
            nodes,
            next_event: 0,
            step: 0,
            last_step,
            control_tick: 0,
            rows: Vec::with_capacity(last_step + 1),
            trips: Vec::new(),
            decisions: Vec::new(),
            rejected: Vec::new(),
            collapsed_at: None,
        })
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.spec.dt
    }

    pub fn nodes(&self) -> &[NodeState] {
        &self.nodes
    }

    pub fn controller(&self) -> &Controller {
        &self.controller
    }

    pub fn is_finished(&self) -> bool {
        self.step > self.last_step || self.collapsed_at.is_some()
    }

    /// Runs one step and returns its trace row, or `None` once finished.
    /// A bus collapse ends the run without a row.
    pub fn step(&mut self) -> Option<&TraceRow> {
        if self.is_finished() {
            return None;
        }
        let t = self.time();
        let dt = self.spec.dt;
        let eps = 1e-6 * dt;

        while let Some(event) = self.events.get(self.next_event).filter(|e| e.t <= t + eps) {
            let notice = apply_event(&mut self.nodes, event).expect("event targets are validated");
            if let Some(msg) = notice {
                self.uplink.post(t, msg);
            }
            self.next_event += 1;
        }

        for msg in self.downlink.poll_due(t) {
            if let Message::ShiftCommand { node, delta_p } = msg {
                let Some(target) = self.nodes.iter_mut().find(|n| n.id() == node) else {
                    continue;
                };
                if let Err(e) = target.shift_curve(delta_p) {
                    let text = e.to_string();
                    self.rejected.push(text.clone());
                    self.uplink.post(t, Message::Alarm(text));
                }
            }
        }

        let p_cs = current_source_injection(&self.nodes);
        let solution = match solve_bus(&self.nodes, p_cs) {
            Ok(s) => s,
            Err(_) => {
                self.collapsed_at = Some(t);
                return None;
            }
        };

        for (i, node) in self.nodes.iter_mut().enumerate() {
            node.advance(solution.power(i).unwrap_or(0.0), dt);
        }

        let period = self.spec.controller.control_period;
        if t + eps >= self.control_tick as f64 * period {
            while self.control_tick as f64 * period <= t + eps {
                self.control_tick += 1;
            }
            self.control(t, solution.u);
        }

        self.rows.push(TraceRow {
            t,
            bus_u: solution.u,
            p_cs,
            nodes: self
                .nodes
                .iter()
                .map(|n| NodeSample {
                    p_out: n.p_out,
                    p_target: n.p_target,
                    mode: n.effective_mode(),
                    soc_pct: n.soc_pct,
                    shift: n.curve.shift,
                })
                .collect(),
            tripped: self.controller.tripped(),
            dispatch_count: self.controller.dispatch_count(),
        });
        self.step += 1;
        self.rows.last()
    }

    fn control(&mut self, t: f64, u: f64) {
        for n in self.nodes.iter().filter(|n| !n.shed) {
            self.uplink.post(
                t,
                Message::Telemetry(Telemetry {
                    node: n.id().to_string(),
                    u,
                    p: n.p_out,
                    mode: n.effective_mode(),
                    soc_pct: n.soc_pct,
                    locked: n.locked,
                    shift: n.curve.shift,
                }),
            );
        }
        for msg in self.uplink.poll_due(t) {
            self.controller.receive(t, msg);
        }
        let alarms_before = self.controller.alarms().len();
        if let Some(dispatch) = self.controller.control_cycle(t, u) {
            for cmd in dispatch.commands() {
                self.downlink.post(t, cmd);
            }
            self.trips.push(dispatch.trip.clone());
            self.decisions.push(dispatch);
        } else if self.controller.alarms().len() > alarms_before {
            // a trip that could not be acted on still counts as a trip
            if let Some(delta_u) =
                crate::controller::check_trip(u, self.spec.bus.u_nominal, self.spec.bus.du_set)
            {
                self.trips.push(crate::controller::TripEvent { t, u, delta_u });
            }
        }
    }

    pub fn finish(mut self) -> (Trace, Summary) {
        while !self.is_finished() {
            self.step();
        }
        let trace = Trace {
            node_ids: self.spec.nodes.iter().map(|n| n.id.clone()).collect(),
            node_kinds: self.spec.nodes.iter().map(|n| n.kind).collect(),
            rows: self.rows,
        };
        let dispatches = self
            .decisions
            .iter()
            .flat_map(|d| {
                d.plan.allocations.iter().map(move |a| DispatchLine {
                    t_s: d.t(),
                    node: a.node.clone(),
                    delta_p_kw: a.delta_p,
                })
            })
            .collect();
        let last = trace.rows.last();
        let summary = Summary {
            scenario: self.spec.name.clone(),
            steps: trace.rows.len(),
            final_bus_v: last.map(|r| r.bus_u),
            final_p_cs_kw: last.map_or(0.0, |r| r.p_cs),
            steady_power: steady_state_powers(&trace),
            trips: self.trips,
            dispatches,
            total_deficit_kw: self.decisions.iter().map(|d| d.plan.deficit.abs()).sum(),
            decisions: self.decisions,
            collapsed_at_s: self.collapsed_at,
            rejected_commands: self.rejected,
            alarms: self.controller.alarms().to_vec(),
            dropped_messages: self.uplink.dropped() + self.downlink.dropped(),
        };
        (trace, summary)
    }
}

/// Validates `spec` and simulates it from t = 0 to `t_end`.
pub fn run(spec: &ScenarioSpec) -> Result<(Trace, Summary)> {
    Ok(Simulation::new(spec)?.finish())
}
