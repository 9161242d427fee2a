//! Deterministic discrete-event simulation: clock, transport, mobility,
//! attack injection, metrics, and the scenario runner.

pub mod event;
pub mod log;
pub mod metrics;
pub mod mobility;
pub mod rng;
pub mod scenario;
pub mod time;
pub mod world;

pub use event::{AttackPhase, Effect, EventKind, ScheduledEvent, TimerKind};
pub use log::{EventLog, EventRecord, RecordKind};
pub use metrics::{MetricsReport, Violation, ViolationKind};
pub use mobility::MobilityTrace;
pub use rng::SimRng;
pub use scenario::{AttackSpec, BootMode, EngineParams, GridSpec, MtSpec, Scenario, SimError};
pub use time::SimTime;
pub use world::{protocol_trace, run_scenario, SimReport, World};
