//! Message vocabulary and network-side entities.
//!
//! The network side of a deployment consists of the authorisation centre
//! (TLTAC) holding the registry and policies, the access gateway fanning out
//! node configuration, the base stations (eNBs) of the `c0` and `c1` layers
//! running the trust-enhanced handover, and the assisted-GPS service gating
//! registrations. Entities are single-threaded state machines; everything
//! between them is message passing through the simulation transport.

mod entities;
mod message;

pub use entities::{Agps, AgpsRegistrar, Arming, Enb, NetCtx, ServiceState, Tltac};
pub use message::{EnbRole, Message, MessageKind, Payload};

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::geometry::{CellId, GeometryError, Polygon};
use crate::sim::{SimRng, SimTime};

/// Identifier of a mobile terminal, as named in the scenario.
pub type MtId = String;

/// Every addressable entity in a deployment.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum EntityId {
    Mt(MtId),
    Enb(CellId),
    Tltac,
    Agw,
    Agps,
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EntityId::Mt(id) => f.write_str(id),
            EntityId::Enb(c) => write!(f, "enb{c}"),
            EntityId::Tltac => f.write_str("tltac"),
            EntityId::Agw => f.write_str("agw"),
            EntityId::Agps => f.write_str("agps"),
        }
    }
}

/// Which of the two location policies is meant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum PolicyId {
    /// Enforced between the surveillance perimeter and the protected zone.
    Sp,
    /// Enforced inside the protected zone.
    Pz,
}

impl fmt::Display for PolicyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PolicyId::Sp => "P_sp",
            PolicyId::Pz => "P_pz",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum FunctionRule {
    Enable,
    Disable,
}

/// A location policy: per-function enable/disable rules plus the service
/// credentials the enforcer may release.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Policy {
    pub id: PolicyId,
    pub function_rules: BTreeMap<String, FunctionRule>,
    pub access_grants: BTreeSet<String>,
}

impl Policy {
    pub fn permissive(id: PolicyId, functions: &[&str]) -> Policy {
        Policy {
            id,
            function_rules: functions
                .iter()
                .map(|f| (String::from(*f), FunctionRule::Enable))
                .collect(),
            access_grants: BTreeSet::new(),
        }
    }
}

/// What a service requester hands to the authorisation centre: the zone
/// geometry and the two policies to enforce around it.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ServiceRequest {
    pub tltsr_id: String,
    pub pz: Polygon,
    pub p_sp: Policy,
    pub p_pz: Policy,
    pub op_scale: f64,
}

impl ServiceRequest {
    /// Structural checks: the policies carry the right ids and name the
    /// same function set. Returns a warning when the policies coincide (the
    /// zone would be vacuous).
    pub fn validate(&self) -> Result<Option<&'static str>, ProtocolError> {
        if self.p_sp.id != PolicyId::Sp || self.p_pz.id != PolicyId::Pz {
            return Err(ProtocolError::BadService("policy ids must be P_sp and P_pz"));
        }
        let sp_fns: Vec<&String> = self.p_sp.function_rules.keys().collect();
        let pz_fns: Vec<&String> = self.p_pz.function_rules.keys().collect();
        if sp_fns != pz_fns {
            return Err(ProtocolError::BadService("P_sp and P_pz must name the same functions"));
        }
        if self.p_sp.function_rules == self.p_pz.function_rules
            && self.p_sp.access_grants == self.p_pz.access_grants
        {
            return Ok(Some("P_sp and P_pz are identical; the protected zone changes nothing"));
        }
        Ok(None)
    }
}

/// One handover transaction between a source and a target base station.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct HandoverId(pub u64);

impl fmt::Display for HandoverId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "tx{}", self.0)
    }
}

/// A single-use attestation challenge bound to one handover transaction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Nonce {
    pub bytes: [u8; 16],
    pub issued_by: CellId,
    pub issued_at: SimTime,
    pub transaction: HandoverId,
}

/// Issues nonces and enforces one per transaction. Owns the nonce
/// substream so no other consumer can perturb the draw sequence.
#[derive(Debug)]
pub struct NonceLedger {
    rng: SimRng,
    by_transaction: BTreeMap<HandoverId, Nonce>,
}

impl NonceLedger {
    pub fn new(seed: u64) -> NonceLedger {
        NonceLedger { rng: SimRng::substream(seed, "nonces"), by_transaction: BTreeMap::new() }
    }

    /// Generate the attestation nonce for a transaction. A transaction can
    /// bear only one.
    pub fn generate(
        &mut self,
        issued_by: CellId,
        transaction: HandoverId,
        now: SimTime,
    ) -> Result<Nonce, ProtocolError> {
        if self.by_transaction.contains_key(&transaction) {
            return Err(ProtocolError::DuplicateTransaction(transaction));
        }
        let nonce = Nonce { bytes: self.rng.bytes16(), issued_by, issued_at: now, transaction };
        self.by_transaction.insert(transaction, nonce.clone());
        Ok(nonce)
    }

    pub fn lookup(&self, transaction: HandoverId) -> Option<&Nonce> {
        self.by_transaction.get(&transaction)
    }
}

/// Registry life-cycle events, one history line each.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum RegEvent {
    Registered,
    Refreshed,
    Deregistered,
    Expired,
}

impl fmt::Display for RegEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RegEvent::Registered => "registered",
            RegEvent::Refreshed => "refreshed",
            RegEvent::Deregistered => "deregistered",
            RegEvent::Expired => "expired",
        })
    }
}

/// A registered terminal: when, under which attestation nonce, and which
/// policy version it holds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegEntry {
    pub registered_at: SimTime,
    pub nonce: [u8; 16],
    pub policy_version: u32,
    pub tltsr_id: String,
}

/// The authorisation centre's terminal list. An entry exists only with a
/// verified attestation behind it; deregistration removes it.
#[derive(Debug, Clone, Default)]
pub struct Registry {
    registered: BTreeMap<MtId, RegEntry>,
    history: Vec<(MtId, RegEvent, SimTime)>,
}

impl Registry {
    pub fn contains(&self, mt: &str) -> bool {
        self.registered.contains_key(mt)
    }

    pub fn entry(&self, mt: &str) -> Option<&RegEntry> {
        self.registered.get(mt)
    }

    pub fn len(&self) -> usize {
        self.registered.len()
    }

    pub fn is_empty(&self) -> bool {
        self.registered.is_empty()
    }

    pub fn history(&self) -> &[(MtId, RegEvent, SimTime)] {
        &self.history
    }

    /// Insert or refresh; returns the event that happened.
    pub fn upsert(&mut self, mt: &str, entry: RegEntry, now: SimTime) -> RegEvent {
        let event = if self.registered.insert(String::from(mt), entry).is_some() {
            RegEvent::Refreshed
        } else {
            RegEvent::Registered
        };
        self.history.push((String::from(mt), event, now));
        event
    }

    /// Remove; returns false when the terminal was not registered.
    pub fn remove(&mut self, mt: &str, now: SimTime) -> bool {
        if self.registered.remove(mt).is_some() {
            self.history.push((String::from(mt), RegEvent::Deregistered, now));
            true
        } else {
            false
        }
    }

    /// Drop entries older than `max_age`; the self-healing path for
    /// terminals that vanished without deregistering.
    pub fn expire_stale(&mut self, now: SimTime, max_age: SimTime) -> Vec<MtId> {
        let stale: Vec<MtId> = self
            .registered
            .iter()
            .filter(|(_, e)| now.saturating_sub(e.registered_at) > max_age)
            .map(|(mt, _)| mt.clone())
            .collect();
        for mt in &stale {
            self.registered.remove(mt);
            self.history.push((mt.clone(), RegEvent::Expired, now));
        }
        stale
    }
}

/// Authorisation decision for a service access.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum AuthzDecision {
    Grant,
    Deny(DenyReason),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum DenyReason {
    NotRegistered,
    OutsidePz,
    NotGranted,
    LteInactive,
}

impl fmt::Display for AuthzDecision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AuthzDecision::Grant => f.write_str("grant"),
            AuthzDecision::Deny(r) => write!(f, "deny:{r}"),
        }
    }
}

impl fmt::Display for DenyReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DenyReason::NotRegistered => "NotRegistered",
            DenyReason::OutsidePz => "OutsidePz",
            DenyReason::NotGranted => "NotGranted",
            DenyReason::LteInactive => "LteInactive",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProtocolError {
    Geometry(GeometryError),
    /// The protected zone covers everything; there is no `c0` ring left to
    /// watch the perimeter from.
    NoPerimeter,
    DuplicateTransaction(HandoverId),
    BadService(&'static str),
    UnknownService(String),
    /// Registration attempted without an accepting attestation verdict.
    RegistrationDenied,
    NotRegistered(MtId),
}

impl fmt::Display for ProtocolError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProtocolError::Geometry(e) => write!(f, "{e}"),
            ProtocolError::NoPerimeter => f.write_str("protected zone leaves no perimeter cells"),
            ProtocolError::DuplicateTransaction(tx) => {
                write!(f, "transaction {tx} already carries a nonce")
            }
            ProtocolError::BadService(why) => write!(f, "invalid service request: {why}"),
            ProtocolError::UnknownService(id) => write!(f, "unknown service {id:?}"),
            ProtocolError::RegistrationDenied => {
                f.write_str("registration requires an accepting attestation")
            }
            ProtocolError::NotRegistered(mt) => write!(f, "{mt} is not registered"),
        }
    }
}

impl core::error::Error for ProtocolError {}

impl From<GeometryError> for ProtocolError {
    fn from(e: GeometryError) -> Self {
        ProtocolError::Geometry(e)
    }
}
