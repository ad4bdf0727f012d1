//! Discrete-time simulator of the DC bus of an AC-DC hybrid microgrid under
//! multi-node droop flexible control.
//!
//! Converter ports ([`node`]) follow droop laws whose parallel combination
//! fixes the bus voltage ([`bus`]). A supervisory [`controller`] watches the
//! bus voltage, estimates the power shortfall from the system droop curve,
//! ranks the droop nodes by competition coefficient and shifts their curves
//! over a simulated field bus ([`comms`]). [`engine`] ties these together on
//! a fixed time step and records a [`trace`].

pub mod bus;
pub mod comms;
pub mod controller;
pub mod engine;
pub mod error;
pub mod node;
pub mod scenario;
pub mod trace;

pub use bus::{aggregate_droop, current_source_injection, solve_bus, BusSolution, SystemDroop};
pub use comms::{Channel, ChannelConfig, Envelope, Message, Telemetry};
pub use controller::{
    check_trip, competition_coefficient, energy_reserve, estimate_unbalance, power_reserve,
    rank_and_allocate, AllocationPlan, CompetitionEntry, Controller, Direction, Dispatch, TripEvent,
};
pub use engine::{apply_event, run, Simulation};
pub use error::{Error, Result};
pub use node::{droop_voltage, step_node, DroopCurve, NodeState};
pub use scenario::{
    builtin_case, validate_scenario, Action, BusSpec, CommsSpec, ControllerSpec, EventSpec,
    GammaMode, Mode, NodeKind, NodeSpec, ScenarioSpec, Violation,
};
pub use trace::{Summary, Trace, TraceRow};
