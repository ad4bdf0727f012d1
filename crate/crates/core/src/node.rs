//! Behavioral model of one converter port on the DC bus.
//!
//! A voltage-source port follows its droop law `u = u_ref - k (p - shift)`;
//! the inner converter loops are represented by a first-order lag of the
//! output power toward the power the bus solution assigns to the port.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{Mode, NodeKind, NodeSpec};

const SECONDS_PER_HOUR: f64 = 3600.0;

/// Voltage-power law of one port. `shift` is the cumulative curve
/// translation commanded by the controller.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DroopCurve {
    pub u_ref: f64,
    /// V per kW.
    pub k: f64,
    /// kW.
    pub shift: f64,
}

impl DroopCurve {
    pub fn new(u_ref: f64, k: f64) -> Self {
        Self { u_ref, k, shift: 0.0 }
    }

    pub fn voltage_at(&self, p_out: f64) -> f64 {
        self.u_ref - self.k * (p_out - self.shift)
    }

    /// Inverse of [`voltage_at`](Self::voltage_at).
    pub fn power_at(&self, u: f64) -> f64 {
        (self.no_load_voltage() - u) / self.k
    }

    /// Voltage at zero output power, shift included.
    pub fn no_load_voltage(&self) -> f64 {
        self.u_ref + self.k * self.shift
    }
}

/// Reference voltage of the port's voltage loop at output power `p_out`.
pub fn droop_voltage(curve: &DroopCurve, p_out: f64) -> f64 {
    curve.voltage_at(p_out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeState {
    pub spec: NodeSpec,
    /// Underlying operating mode; never [`Mode::Locked`], see `locked`.
    pub mode: Mode,
    pub locked: bool,
    /// Disconnected from the bus for the rest of the run.
    pub shed: bool,
    pub curve: DroopCurve,
    pub p_out: f64,
    /// Equilibrium the output power is currently lagging toward.
    pub p_target: f64,
    /// Current-source setpoint, injection-positive.
    pub p_set: f64,
    pub soc_pct: Option<f64>,
}

impl NodeState {
    pub fn from_spec(spec: &NodeSpec) -> Self {
        let (mode, locked) = match spec.initial_mode {
            Mode::Locked => (Mode::VoltageSource, true),
            m => (m, false),
        };
        Self {
            spec: spec.clone(),
            mode,
            locked,
            shed: false,
            curve: DroopCurve::new(spec.u_ref, spec.k),
            p_out: 0.0,
            p_target: 0.0,
            p_set: spec.p_set,
            soc_pct: spec.soc_pct,
        }
    }

    pub fn id(&self) -> &str {
        &self.spec.id
    }

    pub fn kind(&self) -> NodeKind {
        self.spec.kind
    }

    /// Mode as reported in telemetry and traces.
    pub fn effective_mode(&self) -> Mode {
        if self.locked || self.shed {
            Mode::Locked
        } else {
            self.mode
        }
    }

    /// Whether the port's virtual impedance takes part in holding the bus.
    pub fn is_droop_member(&self) -> bool {
        self.mode == Mode::VoltageSource && !self.locked && !self.shed
    }

    /// Power the port forces onto the bus when it is not a droop member.
    pub fn fixed_injection(&self) -> f64 {
        if self.locked || self.shed || self.mode != Mode::CurrentSource {
            0.0
        } else {
            self.p_set
        }
    }

    pub fn shift_curve(&mut self, delta_p: f64) -> Result<()> {
        let reason = if self.shed {
            "node is shed"
        } else if self.locked {
            "node is locked"
        } else if self.mode != Mode::VoltageSource {
            "node is not in voltage-source mode"
        } else if !delta_p.is_finite() {
            "shift is not finite"
        } else {
            self.curve.shift += delta_p;
            return Ok(());
        };
        Err(Error::RejectedCommand {
            node: self.spec.id.clone(),
            reason,
        })
    }

    /// Pure form of [`shift_curve`](Self::shift_curve).
    pub fn apply_shift(&self, delta_p: f64) -> Result<NodeState> {
        let mut next = self.clone();
        next.shift_curve(delta_p)?;
        Ok(next)
    }

    /// Advances the port by `dt` seconds. `p_equilibrium` is only used in
    /// voltage-source mode; current sources track `p_set` and locked ports
    /// decay toward zero.
    pub fn advance(&mut self, p_equilibrium: f64, dt: f64) {
        if self.shed {
            self.p_out = 0.0;
            self.p_target = 0.0;
            return;
        }
        let target = if self.locked {
            0.0
        } else if self.mode == Mode::CurrentSource {
            self.p_set
        } else {
            p_equilibrium
        };
        let alpha = 1.0 - (-dt / self.spec.tau).exp();
        let p_rated = self.spec.p_rated;
        self.p_out = (self.p_out + alpha * (target - self.p_out)).clamp(-p_rated, p_rated);
        self.p_target = target;

        if let (Some(soc), Some(capacity)) = (self.soc_pct, self.spec.capacity) {
            let used = 100.0 * self.p_out * dt / (SECONDS_PER_HOUR * capacity);
            self.soc_pct = Some((soc - used).clamp(0.0, 100.0));
        }
    }
}

/// Pure form of [`NodeState::advance`].
pub fn step_node(node: &NodeState, p_equilibrium: f64, dt: f64) -> NodeState {
    let mut next = node.clone();
    next.advance(p_equilibrium, dt);
    next
}
