//! The deterministic event engine wiring every entity together.

use alloc::collections::{BTreeMap, BinaryHeap};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Reverse;

use crate::device::{DeviceCtx, DevicePhase, FunctionMode, Mt};
use crate::geometry::{CellId, HexGrid, Point, ZoneMap};
use crate::protocol::{
    Agps, Enb, EntityId, Message, MessageKind, MtId, NetCtx, NonceLedger, Payload, Policy, Tltac,
};
use crate::sim::event::{AttackPhase, Effect, EventKind, ScheduledEvent, TimerKind};
use crate::sim::log::{EventLog, RecordKind};
use crate::sim::metrics::{MetricsReport, Violation, ViolationKind};
use crate::sim::mobility::MobilityTrace;
use crate::sim::scenario::{AttackSpec, BootMode, EngineParams, Scenario, SimError};
use crate::sim::{SimRng, SimTime};
use crate::trust::{pristine_boot, secure_boot, CredentialRegistry, RimStore};

/// Result of one scenario run.
#[derive(Debug, Clone)]
pub struct SimReport {
    pub log: EventLog,
    pub metrics: MetricsReport,
    /// Every message sent, in send order (including dropped ones).
    pub messages: Vec<Message>,
    /// Phase history per terminal, starting at `Normal`.
    pub phase_sequences: BTreeMap<MtId, Vec<DevicePhase>>,
    pub zone: ZoneMap,
}

/// Execute a scenario under a seed. Pure: identical inputs produce a
/// byte-identical event log.
pub fn run_scenario(scenario: &Scenario, seed: u64) -> Result<SimReport, SimError> {
    let mut world = World::from_scenario(scenario, seed)?;
    world.run()?;
    if let Some(kind) = world.metrics.conservation_breach() {
        return Err(SimError::Internal(format!("message conservation broken for {kind}")));
    }
    Ok(SimReport {
        log: world.log,
        metrics: world.metrics,
        messages: world.messages,
        phase_sequences: world.phase_sequences,
        zone: world.zone,
    })
}

/// Run a scenario and return its protocol trace: every message except node
/// configuration, in send order. Convenient for inspecting handovers.
pub fn protocol_trace(scenario: &Scenario, seed: u64) -> Result<Vec<Message>, SimError> {
    let report = run_scenario(scenario, seed)?;
    Ok(report
        .messages
        .into_iter()
        .filter(|m| m.kind() != MessageKind::NodeConfigure)
        .collect())
}

#[derive(Debug, Clone, Default)]
struct MtObservation {
    fe_since: Option<SimTime>,
    fe_flagged: bool,
    ac_since: Option<SimTime>,
    ac_flagged: bool,
}

pub struct World {
    grid: HexGrid,
    zone: ZoneMap,
    params: EngineParams,
    p_pz_truth: Policy,

    tltac: Tltac,
    agps: Agps,
    enbs: BTreeMap<CellId, Enb>,
    mts: BTreeMap<MtId, Mt>,
    traces: BTreeMap<MtId, MobilityTrace>,
    attacks: Vec<AttackSpec>,

    rims: RimStore,
    creds: CredentialRegistry,
    nonces: NonceLedger,
    next_transaction: u64,
    tx_pairs: BTreeMap<u64, (CellId, CellId)>,

    clock: SimTime,
    horizon: SimTime,
    event_seq: u64,
    msg_seq: u64,
    heap: BinaryHeap<Reverse<ScheduledEvent>>,

    latency_rng: SimRng,
    drop_rng: SimRng,
    noise_rng: SimRng,

    log: EventLog,
    metrics: MetricsReport,
    messages: Vec<Message>,
    captured_submits: BTreeMap<MtId, Message>,
    observer: BTreeMap<MtId, MtObservation>,
    phase_sequences: BTreeMap<MtId, Vec<DevicePhase>>,
}

impl World {
    pub fn from_scenario(scenario: &Scenario, seed: u64) -> Result<World, SimError> {
        scenario.validate()?;
        let grid = HexGrid::new(
            scenario.grid.cell_radius,
            scenario.grid.origin,
            scenario.grid.extent,
        )?;

        let mut tltac = Tltac::new();
        let (zone, configs) =
            tltac.configure_service(&scenario.service, &grid, scenario.op_mode, scenario.n_outer_layers)?;

        let mut rims = RimStore::new(&scenario.trust_root);
        for cert in &scenario.rims {
            rims.add(cert.clone());
        }
        let mut cred_rng = SimRng::substream(seed, "credentials");

        let mut world = World {
            grid,
            zone: zone.clone(),
            params: scenario.params.clone(),
            p_pz_truth: scenario.service.p_pz.clone(),
            tltac,
            agps: Agps::default(),
            enbs: BTreeMap::new(),
            mts: BTreeMap::new(),
            traces: BTreeMap::new(),
            attacks: scenario.attacks.clone(),
            rims,
            creds: CredentialRegistry::new(&scenario.trust_root),
            nonces: NonceLedger::new(seed),
            next_transaction: 0,
            tx_pairs: BTreeMap::new(),
            clock: SimTime::ZERO,
            horizon: SimTime::ZERO,
            event_seq: 0,
            msg_seq: 0,
            heap: BinaryHeap::new(),
            latency_rng: SimRng::substream(seed, "latency"),
            drop_rng: SimRng::substream(seed, "drop"),
            noise_rng: SimRng::substream(seed, "noise"),
            log: EventLog::default(),
            metrics: MetricsReport::default(),
            messages: Vec::new(),
            captured_submits: BTreeMap::new(),
            observer: BTreeMap::new(),
            phase_sequences: BTreeMap::new(),
        };

        world.log.push(
            SimTime::ZERO,
            RecordKind::Config,
            "engine",
            format!("scenario={} seed={seed}", scenario.name),
        );
        world.log.push(
            SimTime::ZERO,
            RecordKind::Config,
            "tltac",
            format!(
                "service={} cover={} c1={} c0={} op_scale={:.2} (requested {:.2})",
                scenario.service.tltsr_id,
                zone.cover.len(),
                zone.c1.len(),
                zone.c0.len(),
                zone.op_scale,
                zone.op_scale_requested,
            ),
        );

        // Terminals: tamper, boot, enrol, place, schedule movement.
        let mut horizon = SimTime::ZERO;
        for spec in &scenario.mts {
            let mut manifest = spec.manifest.clone();
            let tampered = world
                .attacks
                .iter()
                .any(|a| matches!(a, AttackSpec::TamperedLte { mt } if *mt == spec.id));
            if tampered {
                let mut found = false;
                for (name, digest) in manifest.iter_mut() {
                    if name == crate::trust::LTE_COMPONENT {
                        for b in digest.0.iter_mut() {
                            *b ^= 0xff;
                        }
                        found = true;
                    }
                }
                world.log.push(
                    SimTime::ZERO,
                    RecordKind::Attack,
                    &spec.id,
                    format!("tampered_lte applied={found}"),
                );
            }
            let boot = match spec.boot {
                BootMode::Secure => secure_boot(&manifest, &world.rims)
                    .map_err(|e| SimError::Config(format!("mt {:?}: {e}", spec.id)))?,
                BootMode::Pristine => pristine_boot(),
            };
            world.log.push(
                SimTime::ZERO,
                RecordKind::Config,
                &spec.id,
                format!("boot state={} measured={}", boot.state, boot.log.entries.len()),
            );
            let credential = world
                .creds
                .issue(&spec.id, &mut cred_rng)
                .map_err(|e| SimError::Config(format!("{e}")))?;
            let secret = *world.creds.secret(&credential.key_id).expect("just issued");

            let (trace, warnings) = spec.trace.clone().clipped_to(&world.grid);
            for w in warnings {
                world.log.push(SimTime::ZERO, RecordKind::Warn, &spec.id, w);
            }

            let mut mt = Mt::new(
                spec.id.clone(),
                boot,
                credential,
                secret,
                &scenario.device_functions,
                &scenario.known_services,
            );
            let start_pos = trace.position_at(trace.start_time());
            mt.attached = world.grid.cell_of_position(start_pos).ok();

            // Movement: explicit waypoints plus subdivision ticks.
            let mut times: alloc::collections::BTreeSet<SimTime> =
                trace.waypoints().iter().map(|(t, _)| *t).collect();
            let tick = world.params.mobility_tick.micros().max(1);
            let mut t = trace.start_time().micros();
            while t < trace.end_time().micros() {
                times.insert(SimTime::from_micros(t));
                t += tick;
            }
            for t in times {
                world.schedule(t, EventKind::TraceWaypoint { mt: spec.id.clone() });
            }
            for (at, service) in &spec.service_requests {
                world.schedule(
                    *at,
                    EventKind::TimerFire {
                        entity: EntityId::Mt(spec.id.clone()),
                        timer: TimerKind::ServiceAttempt { service: service.clone() },
                    },
                );
            }

            horizon = horizon.max(trace.end_time());
            world.phase_sequences.insert(spec.id.clone(), alloc::vec![DevicePhase::Normal]);
            world.traces.insert(spec.id.clone(), trace);
            world.mts.insert(spec.id.clone(), mt);
        }
        world.horizon = horizon + scenario.params.quiescence;

        // Attack schedules.
        for (index, attack) in scenario.attacks.iter().enumerate() {
            let mt = attack.mt().clone();
            match attack {
                AttackSpec::ShieldedCrossing { from, until, .. } => {
                    world.schedule_attack(index, &mt, *from, AttackPhase::ShieldOn);
                    world.schedule_attack(index, &mt, *until, AttackPhase::ShieldOff);
                }
                AttackSpec::HandoverSuppression { from, until, .. } => {
                    world.schedule_attack(index, &mt, *from, AttackPhase::SuppressOn);
                    world.schedule_attack(index, &mt, *until, AttackPhase::SuppressOff);
                }
                AttackSpec::GpsSpoof { from, until, .. } => {
                    world.schedule_attack(index, &mt, *from, AttackPhase::SpoofOn);
                    world.schedule_attack(index, &mt, *until, AttackPhase::SpoofOff);
                }
                AttackSpec::NonceReplay { start, interval, repeats, .. } => {
                    for i in 0..*repeats {
                        let at = *start + SimTime::from_micros(interval.micros() * i as u64);
                        world.schedule_attack(index, &mt, at, AttackPhase::ReplaySubmit);
                    }
                }
                AttackSpec::TamperedLte { .. } => {} // consumed at boot
            }
        }

        // Node configuration fans out through the gateway.
        for (cell, payload) in configs {
            world.enbs.entry(cell).or_insert_with(|| Enb::new(cell));
            world.send(EntityId::Agw, EntityId::Enb(cell), payload);
        }

        Ok(world)
    }

    fn schedule_attack(&mut self, attack: usize, mt: &MtId, at: SimTime, phase: AttackPhase) {
        self.schedule(at, EventKind::AttackAction { attack, mt: mt.clone(), phase });
    }

    fn schedule(&mut self, at: SimTime, kind: EventKind) {
        // Causality: nothing may land before the present.
        let at = at.max(self.clock);
        let seq = self.event_seq;
        self.event_seq += 1;
        self.heap.push(Reverse(ScheduledEvent { at, seq, kind }));
    }

    pub fn run(&mut self) -> Result<(), SimError> {
        while let Some(Reverse(ev)) = self.heap.pop() {
            if ev.at < self.clock {
                return Err(SimError::Internal(String::from("event queue went backwards")));
            }
            self.clock = ev.at;
            self.dispatch(ev.kind);
        }
        Ok(())
    }

    fn dispatch(&mut self, kind: EventKind) {
        match kind {
            EventKind::MessageDelivery(msg) => self.deliver(msg),
            EventKind::LocationPoll { mt } => self.location_poll(mt),
            EventKind::TraceWaypoint { mt } => self.trace_waypoint(mt),
            EventKind::TimerFire { entity, timer } => self.timer_fire(entity, timer),
            EventKind::AttackAction { attack, mt, phase } => self.attack_action(attack, mt, phase),
        }
    }

    fn draw_latency(&mut self) -> SimTime {
        let min = self.params.latency_min.micros();
        let max = self.params.latency_max.micros();
        if max > min {
            let us = self.latency_rng.uniform_range(min as f64, max as f64);
            SimTime::from_micros(libm::round(us) as u64)
        } else {
            SimTime::from_micros(min)
        }
    }

    fn send(&mut self, src: EntityId, dst: EntityId, payload: Payload) {
        if let EntityId::Mt(id) = &src {
            if self.mts.get(id).map_or(false, |m| m.shielded) {
                self.log.push(
                    self.clock,
                    RecordKind::Warn,
                    &src,
                    format!("{} suppressed (radio shielded)", payload.kind()),
                );
                return;
            }
        }
        let id = self.msg_seq;
        self.msg_seq += 1;
        let kind = payload.kind();
        let msg = Message { id, src, dst, sent_at: self.clock, payload };

        if let Payload::HoRequest { transaction, source_cell, target_cell, .. } = &msg.payload {
            self.tx_pairs.insert(transaction.0, (*source_cell, *target_cell));
        }
        if kind.is_attestation() {
            if let Some(tx) = msg.payload.transaction() {
                if let Some(pair) = self.tx_pairs.get(&tx.0) {
                    *self.metrics.attestation_by_pair.entry(*pair).or_insert(0) += 1;
                }
            }
        }
        if kind == MessageKind::AttestationSubmit {
            if let EntityId::Mt(mt) = &msg.src {
                self.captured_submits.entry(mt.clone()).or_insert_with(|| msg.clone());
            }
        }

        self.metrics.count_sent(&msg.src, kind);
        self.log.push(
            self.clock,
            RecordKind::Send,
            &msg.src,
            format!("#{id} {kind} {}->{} {}", msg.src, msg.dst, msg.payload.summary()),
        );
        self.messages.push(msg.clone());

        if self.params.drop_probability > 0.0 && self.drop_rng.uniform() < self.params.drop_probability
        {
            self.metrics.count_dropped(kind, "channel");
            self.log.push(
                self.clock,
                RecordKind::Drop,
                &msg.dst,
                format!("#{id} {kind} {}->{} reason=channel", msg.src, msg.dst),
            );
            return;
        }
        let latency = self.draw_latency();
        let at = self.clock + latency;
        self.schedule(at, EventKind::MessageDelivery(msg));
    }

    fn deliver(&mut self, msg: Message) {
        if let EntityId::Mt(id) = &msg.dst {
            if self.mts.get(id).map_or(false, |m| m.shielded) {
                self.metrics.count_dropped(msg.kind(), "shielded");
                self.log.push(
                    self.clock,
                    RecordKind::Drop,
                    &msg.dst,
                    format!("#{} {} {}->{} reason=shielded", msg.id, msg.kind(), msg.src, msg.dst),
                );
                return;
            }
        }
        self.metrics.count_received(&msg.dst, msg.kind());
        self.log.push(
            self.clock,
            RecordKind::Deliver,
            &msg.dst,
            format!("#{} {} {}->{}", msg.id, msg.kind(), msg.src, msg.dst),
        );

        let owner = msg.dst.clone();
        let effects = match &msg.dst {
            EntityId::Enb(cell) => {
                let cell = *cell;
                let World {
                    enbs,
                    nonces,
                    next_transaction,
                    metrics,
                    rims,
                    creds,
                    params,
                    clock,
                    ..
                } = self;
                let mut ctx = NetCtx {
                    now: *clock,
                    rims,
                    creds,
                    nonces,
                    next_transaction,
                    metrics,
                    agps_registrar: params.agps_registrar,
                    notify_tltsr_on_exit: params.notify_tltsr_on_exit,
                };
                enbs.entry(cell).or_insert_with(|| Enb::new(cell)).on_message(&msg, &mut ctx)
            }
            EntityId::Tltac => {
                let World { tltac, nonces, next_transaction, metrics, rims, creds, params, clock, .. } =
                    self;
                let mut ctx = NetCtx {
                    now: *clock,
                    rims,
                    creds,
                    nonces,
                    next_transaction,
                    metrics,
                    agps_registrar: params.agps_registrar,
                    notify_tltsr_on_exit: params.notify_tltsr_on_exit,
                };
                tltac.on_message(&msg, &mut ctx)
            }
            EntityId::Agps => self.agps.on_message(&msg),
            EntityId::Mt(id) => {
                let ctx = self.device_ctx();
                match self.mts.get_mut(id) {
                    Some(mt) => mt.on_message(&msg.payload, &ctx),
                    None => Vec::new(),
                }
            }
            EntityId::Agw => Vec::new(),
        };
        self.apply_effects(owner.clone(), effects);
        if let EntityId::Mt(id) = owner {
            self.after_device_event(&id);
        }
    }

    fn device_ctx(&self) -> DeviceCtx {
        DeviceCtx {
            now: self.clock,
            debounce_k: self.params.debounce_k,
            t_pol: self.params.t_pol,
            t_dereg: self.params.t_dereg,
            authz_mode: self.params.authz_mode,
        }
    }

    fn apply_effects(&mut self, owner: EntityId, effects: Vec<Effect>) {
        for effect in effects {
            match effect {
                Effect::Send { dst, payload } => self.send(owner.clone(), dst, payload),
                Effect::Timer { delay, timer } => {
                    let at = self.clock + delay;
                    self.schedule(at, EventKind::TimerFire { entity: owner.clone(), timer });
                }
                Effect::RadioHoCommand { mt, transaction, target } => {
                    let latency = self.draw_latency();
                    let at = self.clock + latency;
                    self.schedule(
                        at,
                        EventKind::TimerFire {
                            entity: EntityId::Mt(mt),
                            timer: TimerKind::PlainHoCommand { transaction, target },
                        },
                    );
                }
                Effect::Log { kind, detail } => self.log.push(self.clock, kind, &owner, detail),
            }
        }
    }

    fn location_poll(&mut self, mt_id: MtId) {
        let active = match self.mts.get(&mt_id) {
            Some(mt) => mt.lte.active,
            None => return,
        };
        if !active {
            if let Some(mt) = self.mts.get_mut(&mt_id) {
                mt.polling = false;
            }
            return;
        }
        let true_pos = self.traces[&mt_id].position_at(self.clock);
        let (nx, ny) = self.noise_rng.gaussian_pair(self.params.gps_sigma);
        let offset = self.mts[&mt_id].spoof_offset.unwrap_or((0.0, 0.0));
        let fix = Point::new(true_pos.x + offset.0 + nx, true_pos.y + offset.1 + ny);
        self.metrics.fixes_issued += 1;

        if self.grid.cell_of_position(fix).is_err() {
            self.metrics.fixes_dropped += 1;
            self.log.push(
                self.clock,
                RecordKind::Fix,
                &EntityId::Mt(mt_id.clone()),
                format!("dropped out-of-grid fix {fix}"),
            );
        } else {
            let ctx = self.device_ctx();
            let fx = self.mts.get_mut(&mt_id).expect("checked above").on_fix(fix, &ctx);
            self.apply_effects(EntityId::Mt(mt_id.clone()), fx);
        }

        let next = self.clock + self.params.poll_period;
        if next <= self.horizon && self.mts[&mt_id].lte.active {
            self.schedule(next, EventKind::LocationPoll { mt: mt_id.clone() });
        } else if let Some(mt) = self.mts.get_mut(&mt_id) {
            mt.polling = false;
        }
        self.after_device_event(&mt_id);
    }

    fn trace_waypoint(&mut self, mt_id: MtId) {
        let pos = self.traces[&mt_id].position_at(self.clock);
        let Some(mt) = self.mts.get(&mt_id) else { return };
        let shielded = mt.shielded;
        let guarded = mt.ho_in_progress();
        let attached = mt.attached;
        let suppressed = mt.suppress_sp_handover;

        if !shielded && !guarded {
            if let Ok(cell) = self.grid.cell_of_position(pos) {
                match attached {
                    None => {
                        self.mts.get_mut(&mt_id).expect("present").attached = Some(cell);
                    }
                    Some(current) if current != cell => {
                        if self.zone.sp_inbound(current, cell) && suppressed {
                            self.metrics.suppressed_handovers += 1;
                            self.log.push(
                                self.clock,
                                RecordKind::Attack,
                                &EntityId::Mt(mt_id.clone()),
                                format!("handover trigger suppressed from={current} to={cell}"),
                            );
                        } else {
                            let fx =
                                self.mts.get_mut(&mt_id).expect("present").start_handover(cell);
                            self.apply_effects(EntityId::Mt(mt_id.clone()), fx);
                        }
                    }
                    _ => {}
                }
            }
        }
        self.check_violations(&mt_id);
    }

    fn timer_fire(&mut self, entity: EntityId, timer: TimerKind) {
        let EntityId::Mt(mt_id) = entity else {
            return;
        };
        let ctx = self.device_ctx();
        let Some(mt) = self.mts.get_mut(&mt_id) else { return };
        let fx = match timer {
            TimerKind::PolicyTimeout { transaction } => mt.on_policy_timeout(transaction),
            TimerKind::DeregTimeout { attempt } => mt.on_dereg_timeout(attempt, &ctx),
            TimerKind::HoTimeout { epoch } => mt.on_ho_timeout(epoch),
            TimerKind::PlainHoCommand { transaction, target } => {
                if mt.shielded {
                    Vec::new()
                } else {
                    mt.on_plain_ho_command(transaction, target)
                }
            }
            TimerKind::ServiceAttempt { service } => {
                let (_decision, fx) = mt.authorize_local(&service, &ctx);
                fx
            }
        };
        self.apply_effects(EntityId::Mt(mt_id.clone()), fx);
        self.after_device_event(&mt_id);
    }

    fn attack_action(&mut self, attack: usize, mt_id: MtId, phase: AttackPhase) {
        let label = self.attacks.get(attack).map(|a| a.kind_name()).unwrap_or("attack");
        let phase_name = match phase {
            AttackPhase::ShieldOn => "shield-on",
            AttackPhase::ShieldOff => "shield-off",
            AttackPhase::SuppressOn => "suppress-on",
            AttackPhase::SuppressOff => "suppress-off",
            AttackPhase::SpoofOn => "spoof-on",
            AttackPhase::SpoofOff => "spoof-off",
            AttackPhase::ReplaySubmit => "replay-submit",
        };
        self.log.push(
            self.clock,
            RecordKind::Attack,
            &EntityId::Mt(mt_id.clone()),
            format!("{label} {phase_name}"),
        );
        match phase {
            AttackPhase::ShieldOn => self.set_mt(&mt_id, |m| m.shielded = true),
            AttackPhase::ShieldOff => self.set_mt(&mt_id, |m| m.shielded = false),
            AttackPhase::SuppressOn => self.set_mt(&mt_id, |m| m.suppress_sp_handover = true),
            AttackPhase::SuppressOff => self.set_mt(&mt_id, |m| m.suppress_sp_handover = false),
            AttackPhase::SpoofOn => {
                let offset = match self.attacks.get(attack) {
                    Some(AttackSpec::GpsSpoof { offset, .. }) => Some(*offset),
                    _ => None,
                };
                self.set_mt(&mt_id, |m| m.spoof_offset = offset);
            }
            AttackPhase::SpoofOff => self.set_mt(&mt_id, |m| m.spoof_offset = None),
            AttackPhase::ReplaySubmit => match self.captured_submits.get(&mt_id).cloned() {
                Some(original) => self.send(original.src, original.dst, original.payload),
                None => self.log.push(
                    self.clock,
                    RecordKind::Warn,
                    &EntityId::Mt(mt_id.clone()),
                    String::from("no captured attestation submission to replay"),
                ),
            },
        }
        self.check_violations(&mt_id);
    }

    fn set_mt(&mut self, mt_id: &MtId, f: impl FnOnce(&mut Mt)) {
        if let Some(mt) = self.mts.get_mut(mt_id) {
            f(mt);
        }
    }

    /// Post-processing after any event that may have changed device state:
    /// track the phase history, start the poll chain on activation, and run
    /// the observer.
    fn after_device_event(&mut self, mt_id: &MtId) {
        let Some(mt) = self.mts.get(mt_id) else { return };
        let phase = mt.phase;
        let seq = self.phase_sequences.entry(mt_id.clone()).or_default();
        if seq.last() != Some(&phase) {
            seq.push(phase);
        }
        let needs_polling = mt.lte.active && !mt.polling;
        if needs_polling {
            let first = self.clock + self.params.poll_period;
            if first <= self.horizon {
                if let Some(m) = self.mts.get_mut(mt_id) {
                    m.polling = true;
                }
                self.schedule(first, EventKind::LocationPoll { mt: mt_id.clone() });
            }
        }
        self.check_violations(mt_id);
    }

    /// The omniscient observer: measures ground truth, not the modelled
    /// entities' beliefs. A condition must persist beyond the grace window
    /// (covering honest detection latency) before it counts as a violation.
    fn check_violations(&mut self, mt_id: &MtId) {
        let Some(mt) = self.mts.get(mt_id) else { return };
        let Some(trace) = self.traces.get(mt_id) else { return };
        let now = self.clock;
        let grace = self.params.effective_violation_grace();
        let truly_in = self.zone.pz.contains(trace.position_at(now));

        let fe_offender = if truly_in {
            self.p_pz_truth.function_rules.iter().find_map(|(name, rule)| {
                let enabled = mt.functions.function(name) == Some(FunctionMode::Enabled);
                (*rule == crate::protocol::FunctionRule::Disable && enabled).then(|| name.clone())
            })
        } else {
            None
        };
        let registered = self.tltac.registry.contains(mt_id);
        let ac_offender = if !truly_in || !registered {
            mt.functions.unlocked().next().cloned()
        } else {
            None
        };

        let obs = self.observer.entry(mt_id.clone()).or_default();
        match (&fe_offender, obs.fe_since) {
            (Some(_), None) => obs.fe_since = Some(now),
            (None, _) => {
                obs.fe_since = None;
                obs.fe_flagged = false;
            }
            _ => {}
        }
        let mut record: Option<(ViolationKind, String)> = None;
        if let (Some(function), Some(since)) = (&fe_offender, obs.fe_since) {
            if !obs.fe_flagged && now.saturating_sub(since) > grace {
                obs.fe_flagged = true;
                record = Some((
                    ViolationKind::FunctionalEnforcement,
                    format!("function {function} enabled inside pz since {since}"),
                ));
            }
        }
        if let Some((kind, detail)) = record.take() {
            self.push_violation(mt_id, kind, detail);
        }

        let obs = self.observer.entry(mt_id.clone()).or_default();
        match (&ac_offender, obs.ac_since) {
            (Some(_), None) => obs.ac_since = Some(now),
            (None, _) => {
                obs.ac_since = None;
                obs.ac_flagged = false;
            }
            _ => {}
        }
        if let (Some(service), Some(since)) = (&ac_offender, obs.ac_since) {
            if !obs.ac_flagged && now.saturating_sub(since) > grace {
                obs.ac_flagged = true;
                let why = if registered { "outside pz" } else { "unregistered" };
                record = Some((
                    ViolationKind::AccessControl,
                    format!("credential {service} unlocked while {why} since {since}"),
                ));
            }
        }
        if let Some((kind, detail)) = record {
            self.push_violation(mt_id, kind, detail);
        }
    }

    fn push_violation(&mut self, mt_id: &MtId, kind: ViolationKind, detail: String) {
        self.log.push(
            self.clock,
            RecordKind::Violation,
            &EntityId::Mt(mt_id.clone()),
            format!("{kind} {detail}"),
        );
        self.metrics.violations.push(Violation {
            time: self.clock,
            mt: mt_id.clone(),
            kind,
            detail,
        });
    }
}
