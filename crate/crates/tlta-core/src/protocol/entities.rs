//! Network-side entity state machines.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::geometry::{CellId, HexGrid, OpMode, ZoneMap};
use crate::protocol::message::EnbRole;
use crate::protocol::{
    AuthzDecision, DenyReason, EntityId, HandoverId, Message, MtId, NonceLedger, Payload, Policy,
    ProtocolError, RegEntry, RegEvent, Registry, ServiceRequest,
};
use crate::sim::event::{Effect, Effects};
use crate::sim::log::RecordKind;
use crate::sim::metrics::MetricsReport;
use crate::sim::SimTime;
use crate::trust::{verify_attestation, AttestationPackage, CredentialRegistry, RejectReason, RimStore, Verdict};

/// Which entity registers accepted terminals with the assisted-GPS service.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum AgpsRegistrar {
    #[default]
    Tltac,
    Enb1,
}

/// Shared references every network handler may need. The engine assembles
/// this per event; entities never reach into each other.
pub struct NetCtx<'a> {
    pub now: SimTime,
    pub rims: &'a RimStore,
    pub creds: &'a CredentialRegistry,
    pub nonces: &'a mut NonceLedger,
    pub next_transaction: &'a mut u64,
    pub metrics: &'a mut MetricsReport,
    pub agps_registrar: AgpsRegistrar,
    pub notify_tltsr_on_exit: bool,
}

/// One configured service at the authorisation centre.
#[derive(Debug, Clone)]
pub struct ServiceState {
    pub tltsr_id: String,
    pub p_sp: Policy,
    pub p_pz: Policy,
    pub zone: ZoneMap,
    pub version: u32,
}

/// The authorisation centre: registry, policies, zone maps.
#[derive(Debug, Clone, Default)]
pub struct Tltac {
    services: BTreeMap<String, ServiceState>,
    pub registry: Registry,
    next_version: u32,
}

impl Tltac {
    pub fn new() -> Tltac {
        Tltac { services: BTreeMap::new(), registry: Registry::default(), next_version: 1 }
    }

    /// Accept a service request: compile the zone geometry and produce the
    /// arming configuration for every `c0` and `c1` station. The gateway
    /// fans the returned payloads out as `NodeConfigure` messages.
    pub fn configure_service(
        &mut self,
        req: &ServiceRequest,
        grid: &HexGrid,
        op_mode: OpMode,
        n_outer_layers: usize,
    ) -> Result<(ZoneMap, Vec<(CellId, Payload)>), ProtocolError> {
        req.validate()?;
        let zone = crate::geometry::compile_zones_with(&req.pz, grid, op_mode, n_outer_layers)?;
        if zone.c0.is_empty() {
            return Err(ProtocolError::NoPerimeter);
        }
        let mut configs = Vec::new();
        for &cell in &zone.c1 {
            configs.push((
                cell,
                Payload::NodeConfigure {
                    tltsr_id: req.tltsr_id.clone(),
                    role: EnbRole::C1,
                    armed_from: zone.c0.clone(),
                },
            ));
        }
        for &cell in &zone.c0 {
            configs.push((
                cell,
                Payload::NodeConfigure {
                    tltsr_id: req.tltsr_id.clone(),
                    role: EnbRole::C0,
                    armed_from: BTreeSet::new(),
                },
            ));
        }
        let version = self.next_version;
        self.next_version += 1;
        self.services.insert(
            req.tltsr_id.clone(),
            ServiceState {
                tltsr_id: req.tltsr_id.clone(),
                p_sp: req.p_sp.clone(),
                p_pz: req.p_pz.clone(),
                zone: zone.clone(),
                version,
            },
        );
        Ok((zone, configs))
    }

    pub fn service(&self, tltsr_id: &str) -> Option<&ServiceState> {
        self.services.get(tltsr_id)
    }

    pub fn services(&self) -> impl Iterator<Item = &ServiceState> {
        self.services.values()
    }

    /// Register a terminal on a verified attestation record. Re-registration
    /// refreshes the existing entry.
    pub fn register_mt(
        &mut self,
        mt: &str,
        nonce: [u8; 16],
        verdict: Verdict,
        tltsr_id: &str,
        now: SimTime,
    ) -> Result<(RegEvent, u32), ProtocolError> {
        if !verdict.is_accept() {
            return Err(ProtocolError::RegistrationDenied);
        }
        let Some(service) = self.services.get(tltsr_id) else {
            return Err(ProtocolError::UnknownService(String::from(tltsr_id)));
        };
        let version = service.version;
        let event = self.registry.upsert(
            mt,
            RegEntry { registered_at: now, nonce, policy_version: version, tltsr_id: String::from(tltsr_id) },
            now,
        );
        Ok((event, version))
    }

    /// The policy download for a registered terminal.
    pub fn download_policy(&self, mt: &str) -> Result<Payload, ProtocolError> {
        let Some(entry) = self.registry.entry(mt) else {
            return Err(ProtocolError::NotRegistered(String::from(mt)));
        };
        let service = self
            .services
            .get(&entry.tltsr_id)
            .ok_or_else(|| ProtocolError::UnknownService(entry.tltsr_id.clone()))?;
        Ok(Payload::PolicyDownload {
            mt: String::from(mt),
            tltsr_id: service.tltsr_id.clone(),
            policy_version: entry.policy_version,
            p_sp: service.p_sp.clone(),
            p_pz: service.p_pz.clone(),
            pz: service.zone.pz.clone(),
            op: service.zone.op.clone(),
        })
    }

    /// Central authorisation: grant only to registered terminals that claim
    /// to stand inside the zone and ask for a granted service.
    pub fn authorize(&self, mt: &str, service_id: &str, in_pz: bool) -> AuthzDecision {
        let Some(entry) = self.registry.entry(mt) else {
            return AuthzDecision::Deny(DenyReason::NotRegistered);
        };
        if !in_pz {
            return AuthzDecision::Deny(DenyReason::OutsidePz);
        }
        let granted = self
            .services
            .get(&entry.tltsr_id)
            .map_or(false, |s| s.p_pz.access_grants.contains(service_id));
        if granted {
            AuthzDecision::Grant
        } else {
            AuthzDecision::Deny(DenyReason::NotGranted)
        }
    }

    /// Returns false when the terminal was not registered (duplicate
    /// outbound crossings are tolerated).
    pub fn deregister_mt(&mut self, mt: &str, now: SimTime) -> bool {
        self.registry.remove(mt, now)
    }

    pub fn on_message(&mut self, msg: &Message, ctx: &mut NetCtx) -> Effects {
        let mut fx = Vec::new();
        match &msg.payload {
            Payload::Register { mt, transaction, nonce, verdict, tltsr_id } => {
                match self.register_mt(mt, *nonce, *verdict, tltsr_id, ctx.now) {
                    Ok((event, version)) => {
                        if event == RegEvent::Registered {
                            ctx.metrics.registrations += 1;
                        } else {
                            ctx.metrics.registration_refreshes += 1;
                        }
                        fx.push(Effect::Log {
                            kind: RecordKind::Register,
                            detail: format!("mt={mt} {transaction} version={version} event={event}"),
                        });
                        match self.download_policy(mt) {
                            Ok(download) => fx.push(Effect::Send {
                                dst: EntityId::Mt(mt.clone()),
                                payload: download,
                            }),
                            Err(e) => fx.push(Effect::Log {
                                kind: RecordKind::Warn,
                                detail: format!("policy download failed: {e}"),
                            }),
                        }
                        if ctx.agps_registrar == AgpsRegistrar::Tltac {
                            fx.push(Effect::Send {
                                dst: EntityId::Agps,
                                payload: Payload::AgpsRegister { mt: mt.clone(), active: true },
                            });
                        }
                    }
                    Err(e) => {
                        fx.push(Effect::Log {
                            kind: RecordKind::Warn,
                            detail: format!("registration denied for {mt}: {e}"),
                        });
                        fx.push(Effect::Send {
                            dst: msg.src.clone(),
                            payload: Payload::RegisterAck { mt: mt.clone(), accepted: false },
                        });
                    }
                }
            }
            Payload::AuthzRequest { mt, service, in_pz } => {
                let decision = self.authorize(mt, service, *in_pz);
                fx.push(Effect::Log {
                    kind: RecordKind::Authz,
                    detail: format!("mt={mt} service={service} in_pz={in_pz} decision={decision}"),
                });
                fx.push(Effect::Send {
                    dst: EntityId::Mt(mt.clone()),
                    payload: Payload::AuthzResponse {
                        mt: mt.clone(),
                        service: service.clone(),
                        decision,
                    },
                });
            }
            Payload::Deregister { mt } => {
                let was_registered = self.deregister_mt(mt, ctx.now);
                if was_registered {
                    ctx.metrics.deregistrations += 1;
                    *ctx.metrics.judder.entry(mt.clone()).or_insert(0) += 1;
                    fx.push(Effect::Log {
                        kind: RecordKind::Deregister,
                        detail: format!("mt={mt}"),
                    });
                } else {
                    fx.push(Effect::Log {
                        kind: RecordKind::Warn,
                        detail: format!("deregister for unregistered mt={mt}"),
                    });
                }
                fx.push(Effect::Send {
                    dst: EntityId::Mt(mt.clone()),
                    payload: Payload::DeregisterAck { mt: mt.clone(), was_registered },
                });
                if was_registered {
                    fx.push(Effect::Send {
                        dst: EntityId::Agps,
                        payload: Payload::AgpsRegister { mt: mt.clone(), active: false },
                    });
                    if ctx.notify_tltsr_on_exit {
                        fx.push(Effect::Log {
                            kind: RecordKind::Config,
                            detail: format!("tltsr notified of exit mt={mt}"),
                        });
                    }
                }
            }
            other => fx.push(Effect::Log {
                kind: RecordKind::Warn,
                detail: format!("unexpected {} at tltac", other.kind()),
            }),
        }
        fx
    }
}

/// Arming state of a base station under one service.
#[derive(Debug, Clone, PartialEq)]
pub struct Arming {
    pub tltsr_id: String,
    pub role: EnbRole,
    /// For `c1` stations: source cells whose inbound handovers demand
    /// attestation.
    pub armed_from: BTreeSet<CellId>,
}

#[derive(Debug, Clone)]
struct OriginatedHo {
    mt: MtId,
    target: CellId,
}

#[derive(Debug, Clone)]
struct PendingHo {
    mt: MtId,
    source: CellId,
    attestation_required: bool,
    nonce: Option<[u8; 16]>,
    buffered_package: Option<AttestationPackage>,
    concluded: bool,
}

/// A base station serving exactly one cell.
#[derive(Debug, Clone)]
pub struct Enb {
    pub cell: CellId,
    pub arming: Option<Arming>,
    /// Handovers this station originated as the source side.
    originated: BTreeMap<HandoverId, OriginatedHo>,
    /// Handovers this station serves as the target side.
    pending: BTreeMap<HandoverId, PendingHo>,
}

impl Enb {
    pub fn new(cell: CellId) -> Enb {
        Enb { cell, arming: None, originated: BTreeMap::new(), pending: BTreeMap::new() }
    }

    pub fn on_message(&mut self, msg: &Message, ctx: &mut NetCtx) -> Effects {
        let mut fx = Vec::new();
        match &msg.payload {
            Payload::NodeConfigure { tltsr_id, role, armed_from } => {
                self.arming = Some(Arming {
                    tltsr_id: tltsr_id.clone(),
                    role: *role,
                    armed_from: armed_from.clone(),
                });
                fx.push(Effect::Log {
                    kind: RecordKind::Config,
                    detail: format!("armed role={role} service={tltsr_id}"),
                });
            }
            // Source side: a terminal reported a better cell.
            Payload::MeasurementReport { mt, target_cell, .. } => {
                let transaction = HandoverId(*ctx.next_transaction);
                *ctx.next_transaction += 1;
                self.originated.insert(transaction, OriginatedHo { mt: mt.clone(), target: *target_cell });
                fx.push(Effect::Send {
                    dst: EntityId::Enb(*target_cell),
                    payload: Payload::HoRequest {
                        mt: mt.clone(),
                        transaction,
                        source_cell: self.cell,
                        target_cell: *target_cell,
                    },
                });
            }
            // Target side: decide whether this crossing demands attestation.
            Payload::HoRequest { mt, transaction, source_cell, .. } => {
                let attestation_required = self
                    .arming
                    .as_ref()
                    .map_or(false, |a| a.role == EnbRole::C1 && a.armed_from.contains(source_cell));
                self.pending.insert(
                    *transaction,
                    PendingHo {
                        mt: mt.clone(),
                        source: *source_cell,
                        attestation_required,
                        nonce: None,
                        buffered_package: None,
                        concluded: false,
                    },
                );
                fx.push(Effect::Send {
                    dst: msg.src.clone(),
                    payload: Payload::HoResponse { transaction: *transaction, attestation_required },
                });
            }
            // Source side: the target answered. The whole job of the c0
            // station in a trust-enhanced handover is generating the nonce
            // and distributing it; it never verifies anything.
            Payload::HoResponse { transaction, attestation_required } => {
                let Some(ho) = self.originated.remove(transaction) else {
                    fx.push(Effect::Log {
                        kind: RecordKind::Warn,
                        detail: format!("response for unknown {transaction}"),
                    });
                    return fx;
                };
                if *attestation_required {
                    match ctx.nonces.generate(self.cell, *transaction, ctx.now) {
                        Ok(nonce) => {
                            fx.push(Effect::Log {
                                kind: RecordKind::Nonce,
                                detail: format!("{transaction} mt={}", ho.mt),
                            });
                            fx.push(Effect::Send {
                                dst: EntityId::Mt(ho.mt.clone()),
                                payload: Payload::AttestationRequest {
                                    transaction: *transaction,
                                    nonce: nonce.bytes,
                                    target_cell: ho.target,
                                },
                            });
                            fx.push(Effect::Send {
                                dst: EntityId::Enb(ho.target),
                                payload: Payload::NonceTransfer {
                                    transaction: *transaction,
                                    mt: ho.mt.clone(),
                                    nonce: nonce.bytes,
                                },
                            });
                        }
                        Err(e) => fx.push(Effect::Log {
                            kind: RecordKind::Warn,
                            detail: format!("nonce generation failed: {e}"),
                        }),
                    }
                } else {
                    fx.push(Effect::RadioHoCommand {
                        mt: ho.mt,
                        transaction: *transaction,
                        target: ho.target,
                    });
                }
            }
            Payload::NonceTransfer { transaction, nonce, .. } => {
                if let Some(p) = self.pending.get_mut(transaction) {
                    p.nonce = Some(*nonce);
                    if p.buffered_package.is_some() {
                        let package = p.buffered_package.take().expect("just checked");
                        fx.extend(self.conclude_attestation(*transaction, package, ctx));
                    }
                } else {
                    fx.push(Effect::Log {
                        kind: RecordKind::Warn,
                        detail: format!("nonce for unknown {transaction}"),
                    });
                }
            }
            Payload::HoExecute { transaction, .. } => {
                if self.pending.contains_key(transaction) {
                    fx.push(Effect::Send {
                        dst: msg.src.clone(),
                        payload: Payload::HoAck { transaction: *transaction },
                    });
                } else {
                    fx.push(Effect::Log {
                        kind: RecordKind::Warn,
                        detail: format!("execute for unknown {transaction}"),
                    });
                }
            }
            Payload::AttestationSubmit { transaction, package } => {
                let state = self.pending.get_mut(transaction);
                match state {
                    None => fx.extend(self.reject_replay(*transaction, ctx)),
                    Some(p) if p.concluded => fx.extend(self.reject_replay(*transaction, ctx)),
                    Some(p) if !p.attestation_required => {
                        fx.push(Effect::Log {
                            kind: RecordKind::Warn,
                            detail: format!("unsolicited attestation package for {transaction}"),
                        });
                    }
                    Some(p) => {
                        if p.nonce.is_some() {
                            let pkg = package.clone();
                            fx.extend(self.conclude_attestation(*transaction, pkg, ctx));
                        } else {
                            // The nonce transfer is still in flight; hold the
                            // package until it lands.
                            p.buffered_package = Some(package.clone());
                            fx.push(Effect::Log {
                                kind: RecordKind::Config,
                                detail: format!("package for {transaction} buffered awaiting nonce"),
                            });
                        }
                    }
                }
            }
            other => fx.push(Effect::Log {
                kind: RecordKind::Warn,
                detail: format!("unexpected {} at enb", other.kind()),
            }),
        }
        fx
    }

    /// A second submission on a consumed nonce: single-use is single-use.
    fn reject_replay(&mut self, transaction: HandoverId, ctx: &mut NetCtx) -> Effects {
        *ctx.metrics.verifications_by_entity.entry(EntityId::Enb(self.cell)).or_insert(0) += 1;
        *ctx.metrics.attestations_rejected.entry(RejectReason::Replay).or_insert(0) += 1;
        alloc::vec![Effect::Log {
            kind: RecordKind::Attest,
            detail: format!("{transaction} verdict=reject:Replay (nonce already consumed)"),
        }]
    }

    fn conclude_attestation(
        &mut self,
        transaction: HandoverId,
        package: AttestationPackage,
        ctx: &mut NetCtx,
    ) -> Effects {
        let mut fx = Vec::new();
        let Some(p) = self.pending.get_mut(&transaction) else { return fx };
        let nonce = p.nonce.expect("conclude only runs with a nonce present");
        p.concluded = true;

        let verdict = verify_attestation(&package, &nonce, ctx.rims, ctx.creds);
        *ctx.metrics.verifications_by_entity.entry(EntityId::Enb(self.cell)).or_insert(0) += 1;
        match verdict {
            Verdict::Accept => ctx.metrics.attestations_accepted += 1,
            Verdict::Reject(reason) => {
                *ctx.metrics.attestations_rejected.entry(reason).or_insert(0) += 1;
            }
        }
        fx.push(Effect::Log {
            kind: RecordKind::Attest,
            detail: format!("{transaction} mt={} from={} verdict={verdict}", p.mt, p.source),
        });
        fx.push(Effect::Send {
            dst: EntityId::Mt(p.mt.clone()),
            payload: Payload::AttestationAck {
                transaction,
                activate_lte: verdict.is_accept(),
                verdict,
            },
        });
        if verdict.is_accept() {
            let tltsr_id = self.arming.as_ref().map(|a| a.tltsr_id.clone()).unwrap_or_default();
            fx.push(Effect::Send {
                dst: EntityId::Tltac,
                payload: Payload::Register {
                    mt: p.mt.clone(),
                    transaction,
                    nonce,
                    verdict,
                    tltsr_id,
                },
            });
            if ctx.agps_registrar == AgpsRegistrar::Enb1 {
                fx.push(Effect::Send {
                    dst: EntityId::Agps,
                    payload: Payload::AgpsRegister { mt: p.mt.clone(), active: true },
                });
            }
        }
        fx
    }
}

/// The assisted-GPS service, modelled as a registration gate.
#[derive(Debug, Clone, Default)]
pub struct Agps {
    registered: BTreeSet<MtId>,
}

impl Agps {
    pub fn is_registered(&self, mt: &str) -> bool {
        self.registered.contains(mt)
    }

    pub fn on_message(&mut self, msg: &Message) -> Effects {
        let mut fx = Vec::new();
        match &msg.payload {
            Payload::AgpsRegister { mt, active } => {
                if *active {
                    self.registered.insert(mt.clone());
                } else {
                    self.registered.remove(mt);
                }
                fx.push(Effect::Log {
                    kind: RecordKind::Config,
                    detail: format!("agps mt={mt} active={active}"),
                });
            }
            Payload::AgpsAssist { .. } => {}
            other => fx.push(Effect::Log {
                kind: RecordKind::Warn,
                detail: format!("unexpected {} at agps", other.kind()),
            }),
        }
        fx
    }
}
