//! Typed protocol messages.

use alloc::format;
use alloc::string::String;
use core::fmt;

use crate::geometry::{CellId, Polygon};
use crate::protocol::{AuthzDecision, EntityId, HandoverId, MtId, Policy};
use crate::sim::SimTime;
use crate::trust::{AttestationPackage, Verdict};

/// Message kinds, used for metrics and conservation accounting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum MessageKind {
    MeasurementReport,
    HoRequest,
    HoResponse,
    AttestationRequest,
    NonceTransfer,
    HoExecute,
    HoAck,
    AttestationSubmit,
    AttestationAck,
    Register,
    RegisterAck,
    PolicyDownload,
    AgpsRegister,
    AgpsAssist,
    AuthzRequest,
    AuthzResponse,
    Deregister,
    DeregisterAck,
    NodeConfigure,
}

impl MessageKind {
    pub const ALL: [MessageKind; 19] = [
        MessageKind::MeasurementReport,
        MessageKind::HoRequest,
        MessageKind::HoResponse,
        MessageKind::AttestationRequest,
        MessageKind::NonceTransfer,
        MessageKind::HoExecute,
        MessageKind::HoAck,
        MessageKind::AttestationSubmit,
        MessageKind::AttestationAck,
        MessageKind::Register,
        MessageKind::RegisterAck,
        MessageKind::PolicyDownload,
        MessageKind::AgpsRegister,
        MessageKind::AgpsAssist,
        MessageKind::AuthzRequest,
        MessageKind::AuthzResponse,
        MessageKind::Deregister,
        MessageKind::DeregisterAck,
        MessageKind::NodeConfigure,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MessageKind::MeasurementReport => "MeasurementReport",
            MessageKind::HoRequest => "HoRequest",
            MessageKind::HoResponse => "HoResponse",
            MessageKind::AttestationRequest => "AttestationRequest",
            MessageKind::NonceTransfer => "NonceTransfer",
            MessageKind::HoExecute => "HoExecute",
            MessageKind::HoAck => "HoAck",
            MessageKind::AttestationSubmit => "AttestationSubmit",
            MessageKind::AttestationAck => "AttestationAck",
            MessageKind::Register => "Register",
            MessageKind::RegisterAck => "RegisterAck",
            MessageKind::PolicyDownload => "PolicyDownload",
            MessageKind::AgpsRegister => "AgpsRegister",
            MessageKind::AgpsAssist => "AgpsAssist",
            MessageKind::AuthzRequest => "AuthzRequest",
            MessageKind::AuthzResponse => "AuthzResponse",
            MessageKind::Deregister => "Deregister",
            MessageKind::DeregisterAck => "DeregisterAck",
            MessageKind::NodeConfigure => "NodeConfigure",
        }
    }

    pub fn parse(s: &str) -> Option<MessageKind> {
        MessageKind::ALL.into_iter().find(|k| k.name() == s)
    }

    /// Kinds that belong to the attestation stage of a handover.
    pub fn is_attestation(self) -> bool {
        matches!(
            self,
            MessageKind::AttestationRequest
                | MessageKind::NonceTransfer
                | MessageKind::AttestationSubmit
                | MessageKind::AttestationAck
        )
    }
}

impl fmt::Display for MessageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Which perimeter layer a configured base station serves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum EnbRole {
    C0,
    C1,
}

impl fmt::Display for EnbRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EnbRole::C0 => "c0",
            EnbRole::C1 => "c1",
        })
    }
}

/// Kind-specific payloads. The kind is derived from the variant, so a
/// payload can never disagree with its kind.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Payload {
    MeasurementReport { mt: MtId, current_cell: CellId, target_cell: CellId },
    HoRequest { mt: MtId, transaction: HandoverId, source_cell: CellId, target_cell: CellId },
    HoResponse { transaction: HandoverId, attestation_required: bool },
    AttestationRequest { transaction: HandoverId, nonce: [u8; 16], target_cell: CellId },
    NonceTransfer { transaction: HandoverId, mt: MtId, nonce: [u8; 16] },
    HoExecute { mt: MtId, transaction: HandoverId },
    HoAck { transaction: HandoverId },
    AttestationSubmit { transaction: HandoverId, package: AttestationPackage },
    AttestationAck { transaction: HandoverId, activate_lte: bool, verdict: Verdict },
    Register { mt: MtId, transaction: HandoverId, nonce: [u8; 16], verdict: Verdict, tltsr_id: String },
    RegisterAck { mt: MtId, accepted: bool },
    PolicyDownload {
        mt: MtId,
        tltsr_id: String,
        policy_version: u32,
        p_sp: Policy,
        p_pz: Policy,
        pz: Polygon,
        op: Polygon,
    },
    AgpsRegister { mt: MtId, active: bool },
    AgpsAssist { mt: MtId, request: bool },
    AuthzRequest { mt: MtId, service: String, in_pz: bool },
    AuthzResponse { mt: MtId, service: String, decision: AuthzDecision },
    Deregister { mt: MtId },
    DeregisterAck { mt: MtId, was_registered: bool },
    NodeConfigure {
        tltsr_id: String,
        role: EnbRole,
        /// For `c1` stations: handovers sourced from these cells demand
        /// attestation.
        armed_from: alloc::collections::BTreeSet<CellId>,
    },
}

impl Payload {
    pub fn kind(&self) -> MessageKind {
        match self {
            Payload::MeasurementReport { .. } => MessageKind::MeasurementReport,
            Payload::HoRequest { .. } => MessageKind::HoRequest,
            Payload::HoResponse { .. } => MessageKind::HoResponse,
            Payload::AttestationRequest { .. } => MessageKind::AttestationRequest,
            Payload::NonceTransfer { .. } => MessageKind::NonceTransfer,
            Payload::HoExecute { .. } => MessageKind::HoExecute,
            Payload::HoAck { .. } => MessageKind::HoAck,
            Payload::AttestationSubmit { .. } => MessageKind::AttestationSubmit,
            Payload::AttestationAck { .. } => MessageKind::AttestationAck,
            Payload::Register { .. } => MessageKind::Register,
            Payload::RegisterAck { .. } => MessageKind::RegisterAck,
            Payload::PolicyDownload { .. } => MessageKind::PolicyDownload,
            Payload::AgpsRegister { .. } => MessageKind::AgpsRegister,
            Payload::AgpsAssist { .. } => MessageKind::AgpsAssist,
            Payload::AuthzRequest { .. } => MessageKind::AuthzRequest,
            Payload::AuthzResponse { .. } => MessageKind::AuthzResponse,
            Payload::Deregister { .. } => MessageKind::Deregister,
            Payload::DeregisterAck { .. } => MessageKind::DeregisterAck,
            Payload::NodeConfigure { .. } => MessageKind::NodeConfigure,
        }
    }

    /// The handover transaction this payload belongs to, if any.
    pub fn transaction(&self) -> Option<HandoverId> {
        match self {
            Payload::HoRequest { transaction, .. }
            | Payload::HoResponse { transaction, .. }
            | Payload::AttestationRequest { transaction, .. }
            | Payload::NonceTransfer { transaction, .. }
            | Payload::HoExecute { transaction, .. }
            | Payload::HoAck { transaction, .. }
            | Payload::AttestationSubmit { transaction, .. }
            | Payload::AttestationAck { transaction, .. }
            | Payload::Register { transaction, .. } => Some(*transaction),
            _ => None,
        }
    }

    /// One-line payload summary for the event log.
    pub fn summary(&self) -> String {
        fn hex8(bytes: &[u8; 16]) -> String {
            let mut s = String::new();
            for b in &bytes[..4] {
                let _ = fmt::Write::write_fmt(&mut s, format_args!("{b:02x}"));
            }
            s
        }
        match self {
            Payload::MeasurementReport { mt, current_cell, target_cell } => {
                format!("mt={mt} from={current_cell} to={target_cell}")
            }
            Payload::HoRequest { mt, transaction, source_cell, target_cell } => {
                format!("{transaction} mt={mt} from={source_cell} to={target_cell}")
            }
            Payload::HoResponse { transaction, attestation_required } => {
                format!("{transaction} attestation_required={attestation_required}")
            }
            Payload::AttestationRequest { transaction, nonce, target_cell } => {
                format!("{transaction} nonce={} to={target_cell}", hex8(nonce))
            }
            Payload::NonceTransfer { transaction, mt, nonce } => {
                format!("{transaction} mt={mt} nonce={}", hex8(nonce))
            }
            Payload::HoExecute { mt, transaction } => format!("{transaction} mt={mt}"),
            Payload::HoAck { transaction } => format!("{transaction}"),
            Payload::AttestationSubmit { transaction, package } => {
                format!("{transaction} key={} entries={}", package.credential.key_id, package.log.entries.len())
            }
            Payload::AttestationAck { transaction, activate_lte, verdict } => {
                format!("{transaction} activate_lte={activate_lte} verdict={verdict}")
            }
            Payload::Register { mt, transaction, nonce, verdict, tltsr_id } => {
                format!("{transaction} mt={mt} nonce={} verdict={verdict} service={tltsr_id}", hex8(nonce))
            }
            Payload::RegisterAck { mt, accepted } => format!("mt={mt} accepted={accepted}"),
            Payload::PolicyDownload { mt, tltsr_id, policy_version, .. } => {
                format!("mt={mt} service={tltsr_id} version={policy_version}")
            }
            Payload::AgpsRegister { mt, active } => format!("mt={mt} active={active}"),
            Payload::AgpsAssist { mt, request } => format!("mt={mt} request={request}"),
            Payload::AuthzRequest { mt, service, in_pz } => {
                format!("mt={mt} service={service} in_pz={in_pz}")
            }
            Payload::AuthzResponse { mt, service, decision } => {
                format!("mt={mt} service={service} decision={decision}")
            }
            Payload::Deregister { mt } => format!("mt={mt}"),
            Payload::DeregisterAck { mt, was_registered } => {
                format!("mt={mt} was_registered={was_registered}")
            }
            Payload::NodeConfigure { tltsr_id, role, armed_from } => {
                format!("service={tltsr_id} role={role} armed_from={}", armed_from.len())
            }
        }
    }
}

/// A timestamped, addressed protocol message.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Message {
    pub id: u64,
    pub src: EntityId,
    pub dst: EntityId,
    pub sent_at: SimTime,
    pub payload: Payload,
}

impl Message {
    pub fn kind(&self) -> MessageKind {
        self.payload.kind()
    }
}
