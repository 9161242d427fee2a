//! Deterministic core for trusted location-triggered authorisation (TLTA).
//!
//! A TLTA deployment enforces location-dependent policies on mobile
//! terminals: zone geometry is compiled onto the cell grid of a mobile
//! network, base stations at the surveillance perimeter demand remote
//! attestation during handover, and an attested on-device enforcer switches
//! policies as the device moves between the surveillance perimeter, the
//! protected zone, and the outbound perimeter.
//!
//! This crate is `no_std` (with `alloc`) and holds everything that does not
//! touch the file system or a terminal:
//!
//! * [`geometry`] — hexagonal cell grid, polygon predicates, and the zone
//!   compiler producing cover / boundary / perimeter layers.
//! * [`trust`] — measured boot with reference-integrity checks, PCR banks,
//!   attestation packages, and their verification.
//! * [`protocol`] — message vocabulary and the network-side entities
//!   (authorisation centre, base stations, assisted-GPS service).
//! * [`device`] — the mobile terminal with its location trigger enforcer.
//! * [`sim`] — the deterministic discrete-event engine, mobility traces,
//!   attack injection, metrics, and the scenario runner.
//!
//! Everything is deterministic: a scenario plus a seed fully determines the
//! event log, byte for byte. IO, file formats, and the command line live in
//! the companion `tlta-cli` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod device;
pub mod geometry;
pub mod protocol;
pub mod sim;
pub mod trust;
