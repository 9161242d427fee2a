//! Scenario definition: everything a run needs besides the seed.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::device::AuthzMode;
use crate::geometry::OpMode;
use crate::protocol::{AgpsRegistrar, MtId, ServiceRequest};
use crate::sim::mobility::MobilityTrace;
use crate::sim::SimTime;
use crate::trust::{Digest, RimCert};

/// Engine tuning knobs with their defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct EngineParams {
    /// GPS poll period of an active enforcer.
    pub poll_period: SimTime,
    /// Consecutive agreeing fixes required for a zone transition.
    pub debounce_k: u32,
    /// Per-axis Gaussian GPS noise, metres.
    pub gps_sigma: f64,
    /// Uniform message latency range.
    pub latency_min: SimTime,
    pub latency_max: SimTime,
    /// Per-message drop probability.
    pub drop_probability: f64,
    /// Wait for the policy download after an activation signal.
    pub t_pol: SimTime,
    /// Wait for a deregistration acknowledgement.
    pub t_dereg: SimTime,
    /// Registry self-healing age for stale registrations.
    pub t_expire: SimTime,
    /// Mobility subdivision tick (cell-crossing detection granularity).
    pub mobility_tick: SimTime,
    /// Extra time after the last waypoint before recurring events stop.
    pub quiescence: SimTime,
    pub authz_mode: AuthzMode,
    pub agps_registrar: AgpsRegistrar,
    pub notify_tltsr_on_exit: bool,
    /// Observer grace before a ground-truth violation is recorded; defaults
    /// to `debounce_k * poll_period + latency_max`.
    pub violation_grace: Option<SimTime>,
}

impl Default for EngineParams {
    fn default() -> Self {
        EngineParams {
            poll_period: SimTime::from_secs_f64(1.0),
            debounce_k: 2,
            gps_sigma: 5.0,
            latency_min: SimTime::from_secs_f64(0.010),
            latency_max: SimTime::from_secs_f64(0.050),
            drop_probability: 0.0,
            t_pol: SimTime::from_secs_f64(10.0),
            t_dereg: SimTime::from_secs_f64(10.0),
            t_expire: SimTime::from_secs_f64(3600.0),
            mobility_tick: SimTime::from_secs_f64(0.1),
            quiescence: SimTime::from_secs_f64(30.0),
            authz_mode: AuthzMode::Local,
            agps_registrar: AgpsRegistrar::Tltac,
            notify_tltsr_on_exit: false,
            violation_grace: None,
        }
    }
}

impl EngineParams {
    pub fn effective_violation_grace(&self) -> SimTime {
        self.violation_grace.unwrap_or_else(|| {
            SimTime::from_micros(self.poll_period.micros() * self.debounce_k as u64)
                + self.latency_max
        })
    }
}

/// How a terminal boots at scenario start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum BootMode {
    #[default]
    Secure,
    Pristine,
}

/// One terminal: its measured components, boot mode, movement, and any
/// scheduled service-access attempts.
#[derive(Debug, Clone, PartialEq)]
pub struct MtSpec {
    pub id: MtId,
    pub manifest: Vec<(String, Digest)>,
    pub boot: BootMode,
    pub trace: MobilityTrace,
    pub service_requests: Vec<(SimTime, String)>,
}

/// Attack injections. Parameters are complete per kind.
#[derive(Debug, Clone, PartialEq)]
pub enum AttackSpec {
    /// Radio-shield the terminal during an interval: no messages in or out,
    /// no handovers, movement continues.
    ShieldedCrossing { mt: MtId, from: SimTime, until: SimTime },
    /// Suppress surveillance-perimeter handover triggers during an
    /// interval.
    HandoverSuppression { mt: MtId, from: SimTime, until: SimTime },
    /// Alter the boot manifest digest of the enforcer component before the
    /// terminal boots.
    TamperedLte { mt: MtId },
    /// Re-send the terminal's captured attestation submission.
    NonceReplay { mt: MtId, start: SimTime, interval: SimTime, repeats: u32 },
    /// Add a constant offset to every GPS fix during an interval.
    GpsSpoof { mt: MtId, offset: (f64, f64), from: SimTime, until: SimTime },
}

impl AttackSpec {
    pub fn mt(&self) -> &MtId {
        match self {
            AttackSpec::ShieldedCrossing { mt, .. }
            | AttackSpec::HandoverSuppression { mt, .. }
            | AttackSpec::TamperedLte { mt }
            | AttackSpec::NonceReplay { mt, .. }
            | AttackSpec::GpsSpoof { mt, .. } => mt,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            AttackSpec::ShieldedCrossing { .. } => "shielded_crossing",
            AttackSpec::HandoverSuppression { .. } => "handover_suppression",
            AttackSpec::TamperedLte { .. } => "tampered_lte",
            AttackSpec::NonceReplay { .. } => "nonce_replay",
            AttackSpec::GpsSpoof { .. } => "gps_spoof",
        }
    }
}

/// Grid parameters (cell radius in metres, origin, extent in cells).
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub cell_radius: f64,
    pub origin: crate::geometry::Point,
    pub extent: i32,
}

/// A complete scenario. `run_scenario(scenario, seed)` is a pure function.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub grid: GridSpec,
    pub service: ServiceRequest,
    pub op_mode: OpMode,
    pub n_outer_layers: usize,
    pub trust_root: String,
    pub rims: Vec<RimCert>,
    pub device_functions: Vec<String>,
    pub known_services: Vec<String>,
    pub mts: Vec<MtSpec>,
    pub attacks: Vec<AttackSpec>,
    pub params: EngineParams,
    pub default_seed: u64,
}

impl Scenario {
    /// Semantic validation beyond what the types enforce. Returns
    /// human-readable problems, each naming the offending element.
    pub fn validate(&self) -> Result<(), SimError> {
        let mut mt_ids = BTreeSet::new();
        for mt in &self.mts {
            if !mt_ids.insert(mt.id.clone()) {
                return Err(SimError::Config(alloc::format!("duplicate mt id {:?}", mt.id)));
            }
            let mut names = BTreeSet::new();
            for (name, _) in &mt.manifest {
                if !names.insert(name.clone()) {
                    return Err(SimError::Config(alloc::format!(
                        "mt {:?}: duplicate manifest component {name:?}",
                        mt.id
                    )));
                }
            }
            for (_, service) in &mt.service_requests {
                if !self.known_services.contains(service) {
                    return Err(SimError::Config(alloc::format!(
                        "mt {:?}: service request names unknown service {service:?}",
                        mt.id
                    )));
                }
            }
        }
        for attack in &self.attacks {
            if !mt_ids.contains(attack.mt()) {
                return Err(SimError::Config(alloc::format!(
                    "attack {} targets unknown mt {:?}",
                    attack.kind_name(),
                    attack.mt()
                )));
            }
        }
        for policy in [&self.service.p_sp, &self.service.p_pz] {
            for name in policy.function_rules.keys() {
                if !self.device_functions.contains(name) {
                    return Err(SimError::Config(alloc::format!(
                        "{} names unknown device function {name:?}",
                        policy.id
                    )));
                }
            }
            for grant in &policy.access_grants {
                if !self.known_services.contains(grant) {
                    return Err(SimError::Config(alloc::format!(
                        "{} grants unknown service {grant:?}",
                        policy.id
                    )));
                }
            }
        }
        if !(self.params.latency_min <= self.params.latency_max) {
            return Err(SimError::Config(String::from("latency_min must not exceed latency_max")));
        }
        if !(0.0..=1.0).contains(&self.params.drop_probability) {
            return Err(SimError::Config(String::from("drop_probability must lie in [0, 1]")));
        }
        if self.params.gps_sigma < 0.0 {
            return Err(SimError::Config(String::from("gps_sigma must be non-negative")));
        }
        if self.params.debounce_k == 0 {
            return Err(SimError::Config(String::from("debounce_k must be at least 1")));
        }
        Ok(())
    }
}

/// Errors surfaced by scenario construction and execution.
#[derive(Debug, Clone, PartialEq)]
pub enum SimError {
    /// The scenario is inconsistent; reported before any event executes.
    Config(String),
    /// An engine invariant broke mid-run.
    Internal(String),
}

impl fmt::Display for SimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimError::Config(why) => write!(f, "configuration error: {why}"),
            SimError::Internal(why) => write!(f, "internal invariant breach: {why}"),
        }
    }
}

impl core::error::Error for SimError {}

impl From<crate::protocol::ProtocolError> for SimError {
    fn from(e: crate::protocol::ProtocolError) -> Self {
        SimError::Config(alloc::format!("{e}"))
    }
}

impl From<crate::geometry::GeometryError> for SimError {
    fn from(e: crate::geometry::GeometryError) -> Self {
        SimError::Config(alloc::format!("{e}"))
    }
}
