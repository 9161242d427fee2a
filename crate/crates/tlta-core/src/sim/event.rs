//! Event queue and handler effects.

use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::geometry::CellId;
use crate::protocol::{EntityId, HandoverId, Message, MtId, Payload};
use crate::sim::log::RecordKind;
use crate::sim::SimTime;

/// Timers owned by one entity.
#[derive(Debug, Clone, PartialEq)]
pub enum TimerKind {
    /// The activation signal arrived but the policy download did not.
    PolicyTimeout { transaction: HandoverId },
    /// No deregistration acknowledgement yet; `attempt` counts sends so far.
    DeregTimeout { attempt: u8 },
    /// A triggered handover never concluded; re-arm the trigger.
    HoTimeout { epoch: u64 },
    /// The abstracted radio-layer handover command of a plain handover.
    PlainHoCommand { transaction: HandoverId, target: CellId },
    /// A scheduled service-access attempt on a device.
    ServiceAttempt { service: String },
}

/// Attack-schedule actions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttackPhase {
    ShieldOn,
    ShieldOff,
    SuppressOn,
    SuppressOff,
    SpoofOn,
    SpoofOff,
    ReplaySubmit,
}

/// Everything the engine can execute.
#[derive(Debug, Clone, PartialEq)]
pub enum EventKind {
    MessageDelivery(Message),
    LocationPoll { mt: MtId },
    /// Mobility advance for one terminal: either a configured waypoint or a
    /// subdivision tick between waypoints.
    TraceWaypoint { mt: MtId },
    TimerFire { entity: EntityId, timer: TimerKind },
    AttackAction { attack: usize, mt: MtId, phase: AttackPhase },
}

/// A queued event; executes in `(time, seq)` order, `seq` breaking ties
/// first-scheduled-first.
#[derive(Debug, Clone)]
pub struct ScheduledEvent {
    pub at: SimTime,
    pub seq: u64,
    pub kind: EventKind,
}

impl PartialEq for ScheduledEvent {
    fn eq(&self, other: &Self) -> bool {
        self.at == other.at && self.seq == other.seq
    }
}

impl Eq for ScheduledEvent {}

impl PartialOrd for ScheduledEvent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ScheduledEvent {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.at, self.seq).cmp(&(other.at, other.seq))
    }
}

/// What an entity handler wants done. The engine fills in the sender, draws
/// latencies, and owns the clock, so handlers stay pure state machines.
#[derive(Debug, Clone, PartialEq)]
pub enum Effect {
    /// Send a protocol message from the handling entity.
    Send { dst: EntityId, payload: Payload },
    /// Arm a timer on the handling entity.
    Timer { delay: SimTime, timer: TimerKind },
    /// Deliver the radio-layer handover command to a terminal after one
    /// radio hop (not a protocol message; plain handovers cost exactly five
    /// of those).
    RadioHoCommand { mt: MtId, transaction: HandoverId, target: CellId },
    /// Append a log record attributed to the handling entity.
    Log { kind: RecordKind, detail: String },
}

pub type Effects = Vec<Effect>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn events_order_by_time_then_seq() {
        let ev = |at, seq| ScheduledEvent {
            at: SimTime::from_micros(at),
            seq,
            kind: EventKind::LocationPoll { mt: "mt-1".into() },
        };
        assert!(ev(5, 1) < ev(5, 2));
        assert!(ev(5, 9) < ev(6, 0));
    }
}
