//! The mobile terminal and its location trigger enforcer.
//!
//! The enforcer is a single state machine driven by totally ordered events:
//! protocol messages, GPS fixes, and timers. It holds the downloaded
//! policies and zone geometry, debounces fixes before switching policies,
//! and never deactivates between the protected zone and the outbound
//! perimeter — that hysteresis band is what keeps registration from
//! juddering at the boundary.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::geometry::{CellId, Point, Polygon};
use crate::protocol::{
    AuthzDecision, DenyReason, EntityId, HandoverId, MtId, Payload, Policy, PolicyId,
};
use crate::sim::event::{Effect, Effects, TimerKind};
use crate::sim::log::RecordKind;
use crate::sim::SimTime;
use crate::trust::{build_attestation_package, AiCredential, BootOutcome, Secret};

/// How long a triggered handover may stay unconcluded before the trigger
/// re-arms.
pub const HO_GUARD_TIMEOUT: SimTime = SimTime::from_micros(5_000_000);

/// Enforcement phase of a terminal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum DevicePhase {
    /// Enforcer inactive, all functions available.
    Normal,
    /// Crossed the surveillance perimeter; attestation or policy download
    /// still outstanding.
    AwaitingAttestation,
    /// Enforcer active between the surveillance perimeter and the zone.
    LteActiveSp,
    /// Inside the protected zone.
    EnforcingPz,
    /// Crossed the outbound perimeter; deregistration in flight.
    Deregistering,
}

impl fmt::Display for DevicePhase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DevicePhase::Normal => "Normal",
            DevicePhase::AwaitingAttestation => "AwaitingAttestation",
            DevicePhase::LteActiveSp => "LteActiveSp",
            DevicePhase::EnforcingPz => "EnforcingPz",
            DevicePhase::Deregistering => "Deregistering",
        })
    }
}

/// Who decides service-access requests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum AuthzMode {
    /// The enforcer decides alone.
    #[default]
    Local,
    /// The enforcer forwards the in-zone attribute and defers to the
    /// authorisation centre.
    Collaborative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FunctionMode {
    Enabled,
    Disabled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LockState {
    Locked,
    Unlocked,
}

/// Device functions and the credential vault, always coupled to the policy
/// implied by the phase.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionState {
    functions: BTreeMap<String, FunctionMode>,
    vault: BTreeMap<String, LockState>,
}

impl FunctionState {
    /// All functions enabled, every known credential locked.
    pub fn normal(functions: &[String], services: &[String]) -> FunctionState {
        FunctionState {
            functions: functions.iter().map(|f| (f.clone(), FunctionMode::Enabled)).collect(),
            vault: services.iter().map(|s| (s.clone(), LockState::Locked)).collect(),
        }
    }

    pub fn reset_normal(&mut self) {
        for mode in self.functions.values_mut() {
            *mode = FunctionMode::Enabled;
        }
        for lock in self.vault.values_mut() {
            *lock = LockState::Locked;
        }
    }

    /// Apply a policy: every named function set per its rule, credentials
    /// for the policy's grants unlocked, all others locked. Idempotent.
    pub fn apply_policy(&mut self, policy: &Policy) -> Result<(), String> {
        for (name, rule) in &policy.function_rules {
            let Some(mode) = self.functions.get_mut(name) else {
                return Err(format!("policy names unknown function {name:?}"));
            };
            *mode = match rule {
                crate::protocol::FunctionRule::Enable => FunctionMode::Enabled,
                crate::protocol::FunctionRule::Disable => FunctionMode::Disabled,
            };
        }
        for (service, lock) in self.vault.iter_mut() {
            *lock = if policy.access_grants.contains(service) {
                LockState::Unlocked
            } else {
                LockState::Locked
            };
        }
        Ok(())
    }

    pub fn function(&self, name: &str) -> Option<FunctionMode> {
        self.functions.get(name).copied()
    }

    pub fn functions(&self) -> impl Iterator<Item = (&String, FunctionMode)> {
        self.functions.iter().map(|(n, m)| (n, *m))
    }

    pub fn lock_state(&self, service: &str) -> Option<LockState> {
        self.vault.get(service).copied()
    }

    pub fn unlocked(&self) -> impl Iterator<Item = &String> {
        self.vault.iter().filter(|(_, l)| **l == LockState::Unlocked).map(|(s, _)| s)
    }
}

/// Everything a terminal holds after a policy download.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyBundle {
    pub tltsr_id: String,
    pub policy_version: u32,
    pub p_sp: Policy,
    pub p_pz: Policy,
    pub pz: Polygon,
    pub op: Polygon,
}

/// Enforcer runtime state.
#[derive(Debug, Clone, Default)]
pub struct LteState {
    pub active: bool,
    pub service: Option<PolicyBundle>,
    pub current_policy: Option<PolicyId>,
    consec_in_pz: u32,
    consec_out_pz: u32,
    consec_out_op: u32,
    /// Ring of recent fixes: (time, position, in-zone verdict).
    pub last_fixes: VecDeque<(SimTime, Point, bool)>,
}

impl LteState {
    fn reset(&mut self) {
        *self = LteState::default();
    }

    fn reset_debounce(&mut self) {
        self.consec_in_pz = 0;
        self.consec_out_pz = 0;
        self.consec_out_op = 0;
    }
}

#[derive(Debug, Clone)]
struct PendingAttestation {
    transaction: HandoverId,
    nonce: [u8; 16],
    target: CellId,
}

#[derive(Debug, Clone)]
struct Activation {
    transaction: HandoverId,
    ack: bool,
    download: Option<PolicyBundle>,
}

/// Per-device tuning, extracted from the engine parameters.
#[derive(Debug, Clone, Copy)]
pub struct DeviceCtx {
    pub now: SimTime,
    /// Consecutive fixes required before a zone transition.
    pub debounce_k: u32,
    pub t_pol: SimTime,
    pub t_dereg: SimTime,
    pub authz_mode: AuthzMode,
}

/// A mobile terminal.
#[derive(Debug, Clone)]
pub struct Mt {
    pub id: MtId,
    pub boot: BootOutcome,
    pub credential: AiCredential,
    secret: Secret,
    pub attached: Option<CellId>,
    pub phase: DevicePhase,
    pub lte: LteState,
    pub functions: FunctionState,

    // Radio / attack status, toggled by the engine.
    pub shielded: bool,
    pub suppress_sp_handover: bool,
    pub spoof_offset: Option<(f64, f64)>,
    /// Engine-managed: a location poll chain is scheduled.
    pub polling: bool,

    ho_guard: bool,
    ho_epoch: u64,
    pending_ho: Option<(HandoverId, CellId)>,
    pending_attestation: Option<PendingAttestation>,
    activation: Option<Activation>,
    dereg_attempts: u8,
}

impl Mt {
    pub fn new(
        id: MtId,
        boot: BootOutcome,
        credential: AiCredential,
        secret: Secret,
        functions: &[String],
        services: &[String],
    ) -> Mt {
        Mt {
            id,
            boot,
            credential,
            secret,
            attached: None,
            phase: DevicePhase::Normal,
            lte: LteState::default(),
            functions: FunctionState::normal(functions, services),
            shielded: false,
            suppress_sp_handover: false,
            spoof_offset: None,
            polling: false,
            ho_guard: false,
            ho_epoch: 0,
            pending_ho: None,
            pending_attestation: None,
            activation: None,
            dereg_attempts: 0,
        }
    }

    pub fn ho_in_progress(&self) -> bool {
        self.ho_guard
    }

    /// The network-side trigger noticed a cell change: file a measurement
    /// report with the serving station and guard against re-triggering.
    pub fn start_handover(&mut self, target: CellId) -> Effects {
        let Some(current) = self.attached else { return Vec::new() };
        self.ho_guard = true;
        self.ho_epoch += 1;
        let mut fx = Vec::new();
        fx.push(Effect::Send {
            dst: EntityId::Enb(current),
            payload: Payload::MeasurementReport {
                mt: self.id.clone(),
                current_cell: current,
                target_cell: target,
            },
        });
        fx.push(Effect::Timer {
            delay: HO_GUARD_TIMEOUT,
            timer: TimerKind::HoTimeout { epoch: self.ho_epoch },
        });
        fx
    }

    pub fn on_message(&mut self, payload: &Payload, ctx: &DeviceCtx) -> Effects {
        match payload {
            Payload::AttestationRequest { transaction, nonce, target_cell } => {
                self.on_attestation_request(*transaction, *nonce, *target_cell)
            }
            Payload::HoAck { transaction } => self.on_ho_ack(*transaction),
            Payload::AttestationAck { transaction, activate_lte, verdict } => {
                let verdict = *verdict;
                self.on_attestation_ack(*transaction, *activate_lte, verdict, ctx)
            }
            Payload::PolicyDownload { tltsr_id, policy_version, p_sp, p_pz, pz, op, .. } => {
                let bundle = PolicyBundle {
                    tltsr_id: tltsr_id.clone(),
                    policy_version: *policy_version,
                    p_sp: p_sp.clone(),
                    p_pz: p_pz.clone(),
                    pz: pz.clone(),
                    op: op.clone(),
                };
                self.on_policy_download(bundle)
            }
            Payload::DeregisterAck { .. } => self.on_deregister_ack(),
            Payload::AuthzResponse { service, decision, .. } => {
                alloc::vec![Effect::Log {
                    kind: RecordKind::Authz,
                    detail: format!("service={service} decision={decision} via=tltac"),
                }]
            }
            Payload::AgpsAssist { .. } | Payload::RegisterAck { .. } => Vec::new(),
            other => alloc::vec![Effect::Log {
                kind: RecordKind::Warn,
                detail: format!("unexpected {} at terminal", other.kind()),
            }],
        }
    }

    fn on_attestation_request(
        &mut self,
        transaction: HandoverId,
        nonce: [u8; 16],
        target: CellId,
    ) -> Effects {
        let mut fx = Vec::new();
        self.pending_attestation = Some(PendingAttestation { transaction, nonce, target });
        self.pending_ho = Some((transaction, target));
        if self.phase == DevicePhase::Normal {
            self.activation = Some(Activation { transaction, ack: false, download: None });
            self.set_phase(DevicePhase::AwaitingAttestation, &mut fx);
        }
        fx.push(Effect::Send {
            dst: EntityId::Enb(target),
            payload: Payload::HoExecute { mt: self.id.clone(), transaction },
        });
        fx
    }

    /// The radio-layer command of a plain (non-attesting) handover.
    pub fn on_plain_ho_command(&mut self, transaction: HandoverId, target: CellId) -> Effects {
        self.pending_ho = Some((transaction, target));
        alloc::vec![Effect::Send {
            dst: EntityId::Enb(target),
            payload: Payload::HoExecute { mt: self.id.clone(), transaction },
        }]
    }

    fn on_ho_ack(&mut self, transaction: HandoverId) -> Effects {
        let mut fx = Vec::new();
        let Some((tx, target)) = self.pending_ho else { return fx };
        if tx != transaction {
            return fx;
        }
        self.attached = Some(target);
        self.pending_ho = None;
        self.ho_guard = false;

        // Attestation concludes only after the handover: the package is
        // built and submitted strictly after the acknowledgement.
        if let Some(pending) = self.pending_attestation.take() {
            if pending.transaction == transaction {
                let package =
                    build_attestation_package(&self.boot, &self.credential, &self.secret, pending.nonce);
                fx.push(Effect::Send {
                    dst: EntityId::Enb(pending.target),
                    payload: Payload::AttestationSubmit { transaction, package },
                });
            } else {
                self.pending_attestation = Some(pending);
            }
        }
        fx
    }

    fn on_attestation_ack(
        &mut self,
        transaction: HandoverId,
        activate: bool,
        verdict: crate::trust::Verdict,
        ctx: &DeviceCtx,
    ) -> Effects {
        let mut fx = Vec::new();
        if !activate {
            if self.phase == DevicePhase::AwaitingAttestation {
                fx.push(Effect::Log {
                    kind: RecordKind::Warn,
                    detail: format!("attestation refused ({verdict}); enforcer stays off"),
                });
                self.activation = None;
                self.set_phase(DevicePhase::Normal, &mut fx);
            }
            return fx;
        }
        match self.activation.as_mut() {
            Some(act) if act.transaction == transaction => {
                act.ack = true;
                fx.push(Effect::Timer {
                    delay: ctx.t_pol,
                    timer: TimerKind::PolicyTimeout { transaction },
                });
                self.try_activate(&mut fx);
            }
            // Re-attestation while already active: nothing to switch.
            _ => {}
        }
        fx
    }

    fn on_policy_download(&mut self, bundle: PolicyBundle) -> Effects {
        let mut fx = Vec::new();
        if let Some(act) = self.activation.as_mut() {
            act.download = Some(bundle);
            self.try_activate(&mut fx);
        } else if self.lte.active {
            // Policy refresh on an already-active enforcer.
            let version = bundle.policy_version;
            self.lte.service = Some(bundle);
            self.reapply_current_policy(&mut fx);
            fx.push(Effect::Log {
                kind: RecordKind::Config,
                detail: format!("policies refreshed to version {version}"),
            });
        }
        fx
    }

    fn try_activate(&mut self, fx: &mut Effects) {
        let ready = matches!(&self.activation, Some(a) if a.ack && a.download.is_some());
        if !ready {
            return;
        }
        let act = self.activation.take().expect("checked above");
        self.lte.active = true;
        self.lte.service = act.download;
        self.lte.reset_debounce();
        self.set_phase(DevicePhase::LteActiveSp, fx);
    }

    pub fn on_policy_timeout(&mut self, transaction: HandoverId) -> Effects {
        let mut fx = Vec::new();
        let stalled = matches!(
            &self.activation,
            Some(a) if a.transaction == transaction && a.download.is_none()
        );
        if stalled && self.phase == DevicePhase::AwaitingAttestation {
            fx.push(Effect::Log {
                kind: RecordKind::Warn,
                detail: format!("no policy download for {transaction}; reverting to normal"),
            });
            self.activation = None;
            self.set_phase(DevicePhase::Normal, &mut fx);
        }
        fx
    }

    pub fn on_ho_timeout(&mut self, epoch: u64) -> Effects {
        let mut fx = Vec::new();
        if self.ho_guard && epoch == self.ho_epoch {
            self.ho_guard = false;
            self.pending_ho = None;
            fx.push(Effect::Log {
                kind: RecordKind::Warn,
                detail: String::from("handover unconcluded; trigger re-armed"),
            });
        }
        fx
    }

    /// Process one GPS fix. Transitions are debounced: `k` consecutive
    /// agreeing fixes switch the policy, and `k` consecutive fixes outside
    /// the outbound perimeter release the enforcer entirely.
    pub fn on_fix(&mut self, fix: Point, ctx: &DeviceCtx) -> Effects {
        let mut fx = Vec::new();
        if !self.lte.active {
            return fx;
        }
        if !matches!(self.phase, DevicePhase::LteActiveSp | DevicePhase::EnforcingPz) {
            return fx;
        }
        let Some(service) = self.lte.service.as_ref() else { return fx };
        let in_pz = service.pz.contains(fix);
        let in_op = service.op.contains(fix);

        self.lte.last_fixes.push_back((ctx.now, fix, in_pz));
        if self.lte.last_fixes.len() > 8 {
            self.lte.last_fixes.pop_front();
        }

        match self.phase {
            DevicePhase::LteActiveSp => {
                if in_pz {
                    self.lte.consec_in_pz += 1;
                } else {
                    self.lte.consec_in_pz = 0;
                }
                if !in_op {
                    self.lte.consec_out_op += 1;
                } else {
                    self.lte.consec_out_op = 0;
                }
                if self.lte.consec_in_pz >= ctx.debounce_k {
                    self.lte.reset_debounce();
                    self.set_phase(DevicePhase::EnforcingPz, &mut fx);
                } else if self.lte.consec_out_op >= ctx.debounce_k {
                    self.lte.reset_debounce();
                    self.set_phase(DevicePhase::Deregistering, &mut fx);
                    self.dereg_attempts = 1;
                    fx.push(Effect::Send {
                        dst: EntityId::Tltac,
                        payload: Payload::Deregister { mt: self.id.clone() },
                    });
                    fx.push(Effect::Timer {
                        delay: ctx.t_dereg,
                        timer: TimerKind::DeregTimeout { attempt: 1 },
                    });
                }
            }
            DevicePhase::EnforcingPz => {
                if !in_pz {
                    self.lte.consec_out_pz += 1;
                } else {
                    self.lte.consec_out_pz = 0;
                }
                if self.lte.consec_out_pz >= ctx.debounce_k {
                    self.lte.reset_debounce();
                    self.set_phase(DevicePhase::LteActiveSp, &mut fx);
                }
            }
            _ => {}
        }
        fx
    }

    fn on_deregister_ack(&mut self) -> Effects {
        let mut fx = Vec::new();
        if self.phase == DevicePhase::Deregistering {
            self.deactivate(&mut fx);
        }
        fx
    }

    pub fn on_dereg_timeout(&mut self, attempt: u8, ctx: &DeviceCtx) -> Effects {
        let mut fx = Vec::new();
        if self.phase != DevicePhase::Deregistering {
            return fx;
        }
        if attempt == 1 {
            // One retry, then give up locally; the terminal is leaving
            // coverage and the registry expires stale entries on its own.
            self.dereg_attempts = 2;
            fx.push(Effect::Log {
                kind: RecordKind::Warn,
                detail: String::from("deregister unacknowledged; retrying (attempt 2)"),
            });
            fx.push(Effect::Send {
                dst: EntityId::Tltac,
                payload: Payload::Deregister { mt: self.id.clone() },
            });
            fx.push(Effect::Timer { delay: ctx.t_dereg, timer: TimerKind::DeregTimeout { attempt: 2 } });
        } else {
            fx.push(Effect::Log {
                kind: RecordKind::Warn,
                detail: String::from("deregister unacknowledged; releasing locally"),
            });
            self.deactivate(&mut fx);
        }
        fx
    }

    fn deactivate(&mut self, fx: &mut Effects) {
        self.lte.reset();
        self.dereg_attempts = 0;
        self.set_phase(DevicePhase::Normal, fx);
    }

    /// Decide a service access. Local mode answers immediately; in
    /// collaborative mode the decision is deferred to the authorisation
    /// centre and `None` is returned.
    pub fn authorize_local(&mut self, service: &str, ctx: &DeviceCtx) -> (Option<AuthzDecision>, Effects) {
        let mut fx = Vec::new();
        if !self.lte.active {
            let d = AuthzDecision::Deny(DenyReason::LteInactive);
            fx.push(Effect::Log {
                kind: RecordKind::Authz,
                detail: format!("service={service} decision={d} via=local"),
            });
            return (Some(d), fx);
        }
        let in_pz = self.phase == DevicePhase::EnforcingPz;
        match ctx.authz_mode {
            AuthzMode::Local => {
                let granted = in_pz
                    && self
                        .lte
                        .service
                        .as_ref()
                        .map_or(false, |s| s.p_pz.access_grants.contains(service));
                let d = if granted {
                    AuthzDecision::Grant
                } else if !in_pz {
                    AuthzDecision::Deny(DenyReason::OutsidePz)
                } else {
                    AuthzDecision::Deny(DenyReason::NotGranted)
                };
                fx.push(Effect::Log {
                    kind: RecordKind::Authz,
                    detail: format!("service={service} decision={d} via=local"),
                });
                (Some(d), fx)
            }
            AuthzMode::Collaborative => {
                fx.push(Effect::Send {
                    dst: EntityId::Tltac,
                    payload: Payload::AuthzRequest {
                        mt: self.id.clone(),
                        service: String::from(service),
                        in_pz,
                    },
                });
                (None, fx)
            }
        }
    }

    fn reapply_current_policy(&mut self, fx: &mut Effects) {
        let Some(policy_id) = self.lte.current_policy else { return };
        let Some(service) = self.lte.service.as_ref() else { return };
        let policy = match policy_id {
            PolicyId::Sp => service.p_sp.clone(),
            PolicyId::Pz => service.p_pz.clone(),
        };
        self.apply_policy_logged(&policy, fx);
    }

    fn apply_policy_logged(&mut self, policy: &Policy, fx: &mut Effects) {
        match self.functions.apply_policy(policy) {
            Ok(()) => {
                self.lte.current_policy = Some(policy.id);
                let disabled =
                    self.functions.functions().filter(|(_, m)| *m == FunctionMode::Disabled).count();
                let unlocked = self.functions.unlocked().count();
                fx.push(Effect::Log {
                    kind: RecordKind::Policy,
                    detail: format!("{} disabled={disabled} unlocked={unlocked}", policy.id),
                });
            }
            Err(why) => fx.push(Effect::Log { kind: RecordKind::Warn, detail: why }),
        }
    }

    fn set_phase(&mut self, to: DevicePhase, fx: &mut Effects) {
        let from = self.phase;
        if from == to {
            return;
        }
        self.phase = to;
        match to {
            DevicePhase::Normal => {
                self.functions.reset_normal();
                self.lte.current_policy = None;
            }
            DevicePhase::LteActiveSp => {
                if let Some(p) = self.lte.service.as_ref().map(|s| s.p_sp.clone()) {
                    self.apply_policy_logged(&p, fx);
                }
            }
            DevicePhase::EnforcingPz => {
                if let Some(p) = self.lte.service.as_ref().map(|s| s.p_pz.clone()) {
                    self.apply_policy_logged(&p, fx);
                }
            }
            // Entry keeps whatever was enforced before.
            DevicePhase::AwaitingAttestation | DevicePhase::Deregistering => {}
        }
        let policy = match self.lte.current_policy {
            Some(p) => format!("{p}"),
            None => String::from("-"),
        };
        fx.push(Effect::Log { kind: RecordKind::Phase, detail: format!("{from}->{to} policy={policy}") });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point;
    use crate::protocol::{FunctionRule, Policy, PolicyId};
    use crate::trust::{pristine_boot, AiCredential};
    use alloc::collections::BTreeSet;
    use alloc::string::ToString;
    use alloc::vec;

    fn square(half: f64) -> Polygon {
        Polygon::new(vec![
            Point::new(-half, -half),
            Point::new(half, -half),
            Point::new(half, half),
            Point::new(-half, half),
        ])
        .unwrap()
    }

    fn policies() -> (Policy, Policy) {
        let mut p_sp = Policy::permissive(PolicyId::Sp, &["camera", "microphone"]);
        p_sp.access_grants = BTreeSet::new();
        let mut p_pz = Policy::permissive(PolicyId::Pz, &["camera", "microphone"]);
        p_pz.function_rules.insert("camera".to_string(), FunctionRule::Disable);
        p_pz.access_grants.insert("stadium-audio".to_string());
        (p_sp, p_pz)
    }

    fn bundle() -> PolicyBundle {
        let (p_sp, p_pz) = policies();
        PolicyBundle {
            tltsr_id: "svc".to_string(),
            policy_version: 1,
            p_sp,
            p_pz,
            pz: square(40.0),
            op: square(102.0),
        }
    }

    fn ctx(now_s: f64) -> DeviceCtx {
        DeviceCtx {
            now: SimTime::from_secs_f64(now_s),
            debounce_k: 2,
            t_pol: SimTime::from_secs_f64(10.0),
            t_dereg: SimTime::from_secs_f64(10.0),
            authz_mode: AuthzMode::Local,
        }
    }

    fn terminal() -> Mt {
        Mt::new(
            "mt-1".to_string(),
            pristine_boot(),
            AiCredential { mt_id: "mt-1".to_string(), key_id: "aik-0".to_string(), issuer: "root".to_string() },
            [0u8; 32],
            &["camera".to_string(), "microphone".to_string()],
            &["stadium-audio".to_string()],
        )
    }

    fn active_terminal() -> Mt {
        let mut mt = terminal();
        mt.lte.active = true;
        mt.lte.service = Some(bundle());
        mt.phase = DevicePhase::LteActiveSp;
        mt.functions.apply_policy(&bundle().p_sp).unwrap();
        mt.lte.current_policy = Some(PolicyId::Sp);
        mt
    }

    #[test]
    fn apply_policy_disables_and_unlocks() {
        let (p_sp, p_pz) = policies();
        let mut fs = FunctionState::normal(
            &["camera".to_string(), "microphone".to_string()],
            &["stadium-audio".to_string()],
        );
        fs.apply_policy(&p_pz).unwrap();
        assert_eq!(fs.function("camera"), Some(FunctionMode::Disabled));
        assert_eq!(fs.function("microphone"), Some(FunctionMode::Enabled));
        assert_eq!(fs.lock_state("stadium-audio"), Some(LockState::Unlocked));

        // Idempotent.
        let snapshot = fs.clone();
        fs.apply_policy(&p_pz).unwrap();
        assert_eq!(fs, snapshot);

        // Switching back re-locks the pz-only grants.
        fs.apply_policy(&p_sp).unwrap();
        assert_eq!(fs.function("camera"), Some(FunctionMode::Enabled));
        assert_eq!(fs.lock_state("stadium-audio"), Some(LockState::Locked));
    }

    #[test]
    fn apply_policy_rejects_unknown_function() {
        let mut fs = FunctionState::normal(&["camera".to_string()], &[]);
        let mut p = Policy::permissive(PolicyId::Pz, &["camera"]);
        p.function_rules.insert("jetpack".to_string(), FunctionRule::Disable);
        assert!(fs.apply_policy(&p).is_err());
    }

    #[test]
    fn activation_requires_ack_and_download() {
        let mut mt = terminal();
        mt.phase = DevicePhase::AwaitingAttestation;
        mt.activation = Some(Activation { transaction: HandoverId(1), ack: false, download: None });

        let fx = mt.on_attestation_ack(HandoverId(1), true, crate::trust::Verdict::Accept, &ctx(1.0));
        assert!(fx.iter().any(|e| matches!(e, Effect::Timer { .. })), "policy timeout armed");
        assert_eq!(mt.phase, DevicePhase::AwaitingAttestation, "still awaiting download");

        mt.on_policy_download(bundle());
        assert_eq!(mt.phase, DevicePhase::LteActiveSp);
        assert!(mt.lte.active);
        // P_sp applied: camera stays enabled.
        assert_eq!(mt.functions.function("camera"), Some(FunctionMode::Enabled));
    }

    #[test]
    fn download_before_ack_also_activates() {
        let mut mt = terminal();
        mt.phase = DevicePhase::AwaitingAttestation;
        mt.activation = Some(Activation { transaction: HandoverId(1), ack: false, download: None });
        mt.on_policy_download(bundle());
        assert_eq!(mt.phase, DevicePhase::AwaitingAttestation);
        mt.on_attestation_ack(HandoverId(1), true, crate::trust::Verdict::Accept, &ctx(1.0));
        assert_eq!(mt.phase, DevicePhase::LteActiveSp);
    }

    #[test]
    fn refused_attestation_returns_to_normal() {
        let mut mt = terminal();
        mt.phase = DevicePhase::AwaitingAttestation;
        mt.activation = Some(Activation { transaction: HandoverId(1), ack: false, download: None });
        let fx = mt.on_attestation_ack(
            HandoverId(1),
            false,
            crate::trust::Verdict::Reject(crate::trust::RejectReason::Untrusted),
            &ctx(1.0),
        );
        assert_eq!(mt.phase, DevicePhase::Normal);
        assert!(!mt.lte.active);
        assert!(fx.iter().any(|e| matches!(e, Effect::Log { kind: RecordKind::Warn, .. })));
    }

    #[test]
    fn policy_timeout_reverts_to_normal() {
        let mut mt = terminal();
        mt.phase = DevicePhase::AwaitingAttestation;
        mt.activation = Some(Activation { transaction: HandoverId(1), ack: true, download: None });
        let fx = mt.on_policy_timeout(HandoverId(1));
        assert_eq!(mt.phase, DevicePhase::Normal);
        assert!(fx.iter().any(|e| matches!(e, Effect::Log { kind: RecordKind::Warn, .. })));
    }

    #[test]
    fn debounced_zone_entry_and_exit() {
        let c = ctx(0.0);
        let mut mt = active_terminal();

        // Single in-zone fix is noise, not a transition.
        mt.on_fix(Point::new(0.0, 0.0), &c);
        assert_eq!(mt.phase, DevicePhase::LteActiveSp);
        mt.on_fix(Point::new(75.0, 0.0), &c);
        assert_eq!(mt.phase, DevicePhase::LteActiveSp);

        // Two consecutive fixes inside switch to the zone policy.
        mt.on_fix(Point::new(0.0, 0.0), &c);
        mt.on_fix(Point::new(1.0, 0.0), &c);
        assert_eq!(mt.phase, DevicePhase::EnforcingPz);
        assert_eq!(mt.functions.function("camera"), Some(FunctionMode::Disabled));
        assert_eq!(mt.functions.lock_state("stadium-audio"), Some(LockState::Unlocked));

        // Two consecutive fixes outside revert to P_sp.
        mt.on_fix(Point::new(75.0, 0.0), &c);
        mt.on_fix(Point::new(75.0, 0.0), &c);
        assert_eq!(mt.phase, DevicePhase::LteActiveSp);
        assert_eq!(mt.functions.function("camera"), Some(FunctionMode::Enabled));
        assert_eq!(mt.functions.lock_state("stadium-audio"), Some(LockState::Locked));
    }

    #[test]
    fn op_exit_deregisters() {
        let c = ctx(0.0);
        let mut mt = active_terminal();
        mt.on_fix(Point::new(200.0, 0.0), &c);
        assert_eq!(mt.phase, DevicePhase::LteActiveSp, "debounce holds after one fix");
        let fx = mt.on_fix(Point::new(200.0, 0.0), &c);
        assert_eq!(mt.phase, DevicePhase::Deregistering);
        assert!(fx.iter().any(|e| matches!(
            e,
            Effect::Send { dst: EntityId::Tltac, payload: Payload::Deregister { .. } }
        )));

        // Acknowledge: everything resets.
        mt.on_deregister_ack();
        assert_eq!(mt.phase, DevicePhase::Normal);
        assert!(!mt.lte.active);
        assert_eq!(mt.functions.lock_state("stadium-audio"), Some(LockState::Locked));
        assert_eq!(mt.functions.function("camera"), Some(FunctionMode::Enabled));
    }

    #[test]
    fn dereg_timeout_retries_once_then_releases() {
        let c = ctx(0.0);
        let mut mt = active_terminal();
        mt.on_fix(Point::new(200.0, 0.0), &c);
        mt.on_fix(Point::new(200.0, 0.0), &c);
        assert_eq!(mt.phase, DevicePhase::Deregistering);

        let fx = mt.on_dereg_timeout(1, &c);
        assert_eq!(mt.dereg_attempts, 2);
        assert!(fx.iter().any(|e| matches!(e, Effect::Send { payload: Payload::Deregister { .. }, .. })));
        assert_eq!(mt.phase, DevicePhase::Deregistering);

        mt.on_dereg_timeout(2, &c);
        assert_eq!(mt.phase, DevicePhase::Normal);
        assert!(!mt.lte.active);
    }

    #[test]
    fn local_authorization() {
        let c = ctx(0.0);
        let mut mt = active_terminal();
        let (d, _) = mt.authorize_local("stadium-audio", &c);
        assert_eq!(d, Some(AuthzDecision::Deny(DenyReason::OutsidePz)));

        mt.on_fix(Point::new(0.0, 0.0), &c);
        mt.on_fix(Point::new(0.0, 0.0), &c);
        assert_eq!(mt.phase, DevicePhase::EnforcingPz);
        let (d, _) = mt.authorize_local("stadium-audio", &c);
        assert_eq!(d, Some(AuthzDecision::Grant));
        let (d, _) = mt.authorize_local("other-service", &c);
        assert_eq!(d, Some(AuthzDecision::Deny(DenyReason::NotGranted)));

        let mut off = terminal();
        let (d, _) = off.authorize_local("stadium-audio", &c);
        assert_eq!(d, Some(AuthzDecision::Deny(DenyReason::LteInactive)));
    }

    #[test]
    fn collaborative_mode_matches_centre_decision() {
        use crate::geometry::HexGrid;
        use crate::protocol::{ServiceRequest, Tltac};
        use crate::sim::SimTime as T;

        let grid = HexGrid::new(100.0, Point::new(0.0, 0.0), 4).unwrap();
        let (p_sp, p_pz) = policies();
        let req = ServiceRequest {
            tltsr_id: "svc".to_string(),
            pz: square(40.0),
            p_sp,
            p_pz,
            op_scale: 1.3,
        };
        let mut tltac = Tltac::new();
        tltac
            .configure_service(&req, &grid, crate::geometry::OpMode::Scaled(1.3), 1)
            .unwrap();

        for registered in [false, true] {
            let mut tl = tltac.clone();
            if registered {
                tl.register_mt(
                    "mt-1",
                    [0u8; 16],
                    crate::trust::Verdict::Accept,
                    "svc",
                    T::ZERO,
                )
                .unwrap();
            }
            for in_pz in [false, true] {
                // Device-side view of the same situation.
                let mut mt = active_terminal();
                if in_pz {
                    mt.on_fix(Point::new(0.0, 0.0), &ctx(0.0));
                    mt.on_fix(Point::new(0.0, 0.0), &ctx(0.0));
                    assert_eq!(mt.phase, DevicePhase::EnforcingPz);
                }
                let collab = DeviceCtx { authz_mode: AuthzMode::Collaborative, ..ctx(0.0) };
                let (none_yet, fx) = mt.authorize_local("stadium-audio", &collab);
                assert_eq!(none_yet, None);
                let sent_in_pz = fx.iter().find_map(|e| match e {
                    Effect::Send { payload: Payload::AuthzRequest { in_pz, .. }, .. } => Some(*in_pz),
                    _ => None,
                });
                assert_eq!(sent_in_pz, Some(in_pz));

                // The centre's answer equals the purely local decision when
                // local state matches (registered devices with active LTE).
                let central = tl.authorize("mt-1", "stadium-audio", in_pz);
                let local_mode = DeviceCtx { authz_mode: AuthzMode::Local, ..ctx(0.0) };
                let (local, _) = mt.authorize_local("stadium-audio", &local_mode);
                if registered {
                    assert_eq!(Some(central), local, "registered in_pz={in_pz}");
                } else {
                    assert_eq!(central, AuthzDecision::Deny(DenyReason::NotRegistered));
                }
            }
        }
    }

    #[test]
    fn ho_ack_submits_attestation_after_handover() {
        let mut mt = terminal();
        mt.attached = Some(CellId::new(-1, 0));
        let fx = mt.start_handover(CellId::new(0, 0));
        assert!(fx.iter().any(|e| matches!(e, Effect::Send { payload: Payload::MeasurementReport { .. }, .. })));
        assert!(mt.ho_in_progress());

        mt.on_attestation_request(HandoverId(0), [9u8; 16], CellId::new(0, 0));
        assert_eq!(mt.phase, DevicePhase::AwaitingAttestation);

        let fx = mt.on_ho_ack(HandoverId(0));
        assert_eq!(mt.attached, Some(CellId::new(0, 0)));
        assert!(!mt.ho_in_progress());
        assert!(fx.iter().any(|e| matches!(e, Effect::Send { payload: Payload::AttestationSubmit { .. }, .. })));
    }

    #[test]
    fn stale_ho_timeout_is_ignored() {
        let mut mt = terminal();
        mt.attached = Some(CellId::new(-1, 0));
        mt.start_handover(CellId::new(0, 0));
        let epoch = mt.ho_epoch;
        mt.on_plain_ho_command(HandoverId(0), CellId::new(0, 0));
        mt.on_ho_ack(HandoverId(0));
        assert!(!mt.ho_in_progress());
        let fx = mt.on_ho_timeout(epoch);
        assert!(fx.is_empty(), "timeout for a concluded handover must be a no-op");

        // An unconcluded handover re-arms on timeout.
        mt.start_handover(CellId::new(1, 0));
        let fx = mt.on_ho_timeout(mt.ho_epoch);
        assert!(!mt.ho_in_progress());
        assert!(fx.iter().any(|e| matches!(e, Effect::Log { kind: RecordKind::Warn, .. })));
    }
}
