//! The structured event log.
//!
//! One record per line, tab-separated, stable field order:
//! `time<TAB>seq<TAB>kind<TAB>entity<TAB>detail`. Sequence numbers are
//! strictly increasing, so two runs are comparable byte for byte and a log
//! can be replayed for invariant checking.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use super::SimTime;

/// Record categories appearing in the log.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum RecordKind {
    /// A message left its sender.
    Send,
    /// A message reached its destination.
    Deliver,
    /// A message was lost; the detail names the reason.
    Drop,
    /// A device phase transition.
    Phase,
    /// A policy was applied on a device.
    Policy,
    /// An attestation package was verified.
    Attest,
    Register,
    Deregister,
    /// An attestation nonce was issued.
    Nonce,
    /// Setup and configuration notes.
    Config,
    Warn,
    /// An attack action fired.
    Attack,
    /// The omniscient observer recorded a policy violation.
    Violation,
    /// An authorisation decision.
    Authz,
    /// A location fix was unusable.
    Fix,
}

impl RecordKind {
    pub const ALL: [RecordKind; 15] = [
        RecordKind::Send,
        RecordKind::Deliver,
        RecordKind::Drop,
        RecordKind::Phase,
        RecordKind::Policy,
        RecordKind::Attest,
        RecordKind::Register,
        RecordKind::Deregister,
        RecordKind::Nonce,
        RecordKind::Config,
        RecordKind::Warn,
        RecordKind::Attack,
        RecordKind::Violation,
        RecordKind::Authz,
        RecordKind::Fix,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RecordKind::Send => "send",
            RecordKind::Deliver => "deliver",
            RecordKind::Drop => "drop",
            RecordKind::Phase => "phase",
            RecordKind::Policy => "policy",
            RecordKind::Attest => "attest",
            RecordKind::Register => "register",
            RecordKind::Deregister => "deregister",
            RecordKind::Nonce => "nonce",
            RecordKind::Config => "config",
            RecordKind::Warn => "warn",
            RecordKind::Attack => "attack",
            RecordKind::Violation => "violation",
            RecordKind::Authz => "authz",
            RecordKind::Fix => "fix",
        }
    }

    pub fn parse(s: &str) -> Option<RecordKind> {
        RecordKind::ALL.into_iter().find(|k| k.name() == s)
    }
}

impl fmt::Display for RecordKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventRecord {
    pub time: SimTime,
    pub seq: u64,
    pub kind: RecordKind,
    pub entity: String,
    pub detail: String,
}

impl EventRecord {
    pub fn line(&self) -> String {
        alloc::format!("{}\t{}\t{}\t{}\t{}", self.time, self.seq, self.kind, self.entity, self.detail)
    }
}

/// Append-only record list with its own sequence counter.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventLog {
    records: Vec<EventRecord>,
    next_seq: u64,
}

impl EventLog {
    pub fn push(&mut self, time: SimTime, kind: RecordKind, entity: impl fmt::Display, detail: String) {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.records.push(EventRecord { time, seq, kind, entity: alloc::format!("{entity}"), detail });
    }

    pub fn records(&self) -> &[EventRecord] {
        &self.records
    }

    pub fn lines(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&r.line());
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    #[test]
    fn lines_are_tab_separated_and_sequenced() {
        let mut log = EventLog::default();
        log.push(SimTime::from_secs_f64(1.5), RecordKind::Warn, "tltac", "hello".to_string());
        log.push(SimTime::from_secs_f64(2.0), RecordKind::Send, "mt-1", "#1 HoAck".to_string());
        let lines = log.lines();
        assert_eq!(lines, "1.500000\t0\twarn\ttltac\thello\n2.000000\t1\tsend\tmt-1\t#1 HoAck\n");
    }

    #[test]
    fn kind_names_roundtrip() {
        for k in RecordKind::ALL {
            assert_eq!(RecordKind::parse(k.name()), Some(k));
        }
    }
}
