//! Aggregated counters for one scenario run.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::geometry::CellId;
use crate::protocol::{EntityId, MessageKind, MtId};
use crate::sim::SimTime;
use crate::trust::RejectReason;

/// Ground-truth policy violations seen by the omniscient observer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum ViolationKind {
    /// A terminal truly inside the protected zone kept a function that the
    /// zone policy disables.
    FunctionalEnforcement,
    /// Protected content stayed unlocked on a terminal that is outside the
    /// zone or unregistered.
    AccessControl,
}

impl core::fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(match self {
            ViolationKind::FunctionalEnforcement => "FunctionalEnforcement",
            ViolationKind::AccessControl => "AccessControl",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub time: SimTime,
    pub mt: MtId,
    pub kind: ViolationKind,
    pub detail: String,
}

/// Per-entity, per-kind message counters plus protocol-level tallies.
///
/// Conservation invariant: for every kind, `sent = delivered + dropped`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsReport {
    pub sent: BTreeMap<EntityId, BTreeMap<MessageKind, u64>>,
    pub received: BTreeMap<EntityId, BTreeMap<MessageKind, u64>>,
    pub sent_by_kind: BTreeMap<MessageKind, u64>,
    pub delivered_by_kind: BTreeMap<MessageKind, u64>,
    pub dropped_by_kind: BTreeMap<MessageKind, u64>,
    pub drop_reasons: BTreeMap<String, u64>,

    /// Fresh registrations (a refresh of a live registration counts
    /// separately).
    pub registrations: u64,
    pub registration_refreshes: u64,
    pub deregistrations: u64,

    pub attestations_accepted: u64,
    pub attestations_rejected: BTreeMap<RejectReason, u64>,
    /// How many packages each entity verified; the `c0` station must never
    /// appear here.
    pub verifications_by_entity: BTreeMap<EntityId, u64>,
    /// Attestation-stage messages per (source, target) station pair.
    pub attestation_by_pair: BTreeMap<(CellId, CellId), u64>,

    /// Completed register/deregister pairs per terminal.
    pub judder: BTreeMap<MtId, u64>,

    pub fixes_issued: u64,
    pub fixes_dropped: u64,
    pub suppressed_handovers: u64,

    pub violations: Vec<Violation>,
}

impl MetricsReport {
    pub fn count_sent(&mut self, entity: &EntityId, kind: MessageKind) {
        *self.sent.entry(entity.clone()).or_default().entry(kind).or_insert(0) += 1;
        *self.sent_by_kind.entry(kind).or_insert(0) += 1;
    }

    pub fn count_received(&mut self, entity: &EntityId, kind: MessageKind) {
        *self.received.entry(entity.clone()).or_default().entry(kind).or_insert(0) += 1;
        *self.delivered_by_kind.entry(kind).or_insert(0) += 1;
    }

    pub fn count_dropped(&mut self, kind: MessageKind, reason: &str) {
        *self.dropped_by_kind.entry(kind).or_insert(0) += 1;
        *self.drop_reasons.entry(String::from(reason)).or_insert(0) += 1;
    }

    pub fn sent_total(&self, entity: &EntityId) -> u64 {
        self.sent.get(entity).map(|m| m.values().sum()).unwrap_or(0)
    }

    pub fn violations_of(&self, kind: ViolationKind) -> usize {
        self.violations.iter().filter(|v| v.kind == kind).count()
    }

    /// Check `sent = delivered + dropped` per kind; returns the first
    /// violating kind.
    pub fn conservation_breach(&self) -> Option<MessageKind> {
        for kind in MessageKind::ALL {
            let sent = self.sent_by_kind.get(&kind).copied().unwrap_or(0);
            let delivered = self.delivered_by_kind.get(&kind).copied().unwrap_or(0);
            let dropped = self.dropped_by_kind.get(&kind).copied().unwrap_or(0);
            if sent != delivered + dropped {
                return Some(kind);
            }
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conservation_accounting() {
        let mut m = MetricsReport::default();
        let a = EntityId::Tltac;
        let b = EntityId::Agps;
        m.count_sent(&a, MessageKind::AgpsRegister);
        assert_eq!(m.conservation_breach(), Some(MessageKind::AgpsRegister));
        m.count_received(&b, MessageKind::AgpsRegister);
        assert_eq!(m.conservation_breach(), None);
        m.count_sent(&a, MessageKind::AgpsRegister);
        m.count_dropped(MessageKind::AgpsRegister, "channel");
        assert_eq!(m.conservation_breach(), None);
        assert_eq!(m.sent_total(&a), 2);
    }
}
