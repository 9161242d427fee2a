//! Model-level trusted platform: measured boot with reference-integrity
//! checks, PCR banks, attestation identities, and attestation packages.
//!
//! Cryptography is deliberately reduced to what the threat model needs
//! inside a simulation: digests are real SHA-256 so logs replay byte-exact,
//! but signatures are keyed digests whose secrets live in a
//! simulation-global credential registry standing in for a Privacy CA. A
//! package cannot be forged without the terminal's secret, and the tag binds
//! the actual PCR contents: a device can boot bad software, but it cannot
//! lie about having done so.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use sha2::{Digest as _, Sha256};

use crate::sim::SimRng;

/// Name of the measured component that must be present and reference-valid
/// for a terminal to count as running an untampered location trigger
/// enforcer.
pub const LTE_COMPONENT: &str = "LTE";

/// Number of platform configuration registers in a bank.
pub const PCR_COUNT: usize = 4;

/// Register index measured boot extends.
pub const BOOT_PCR: u8 = 0;

/// A 32-byte SHA-256 digest.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Digest(pub [u8; 32]);

impl Digest {
    pub const ZERO: Digest = Digest([0u8; 32]);

    /// Digest of a byte string.
    pub fn of(bytes: &[u8]) -> Digest {
        Digest(Sha256::digest(bytes).into())
    }

    pub fn to_hex(self) -> String {
        let mut s = String::with_capacity(64);
        for b in self.0 {
            let _ = fmt::Write::write_fmt(&mut s, format_args!("{b:02x}"));
        }
        s
    }

    pub fn from_hex(hex: &str) -> Option<Digest> {
        let hex = hex.trim();
        if hex.len() != 64 {
            return None;
        }
        let mut out = [0u8; 32];
        for (i, chunk) in hex.as_bytes().chunks(2).enumerate() {
            let hi = (chunk[0] as char).to_digit(16)?;
            let lo = (chunk[1] as char).to_digit(16)?;
            out[i] = (hi * 16 + lo) as u8;
        }
        Some(Digest(out))
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({}..)", &self.to_hex()[..8])
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

#[cfg(feature = "serde")]
impl serde::Serialize for Digest {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

#[cfg(feature = "serde")]
impl<'de> serde::Deserialize<'de> for Digest {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = <alloc::borrow::Cow<'de, str>>::deserialize(d)?;
        Digest::from_hex(&s).ok_or_else(|| serde::de::Error::custom("expected 64 hex characters"))
    }
}

/// A platform configuration register: the fold of all extends since reset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Pcr {
    pub index: u8,
    pub value: Digest,
}

impl Pcr {
    pub fn reset(index: u8) -> Pcr {
        Pcr { index, value: Digest::ZERO }
    }

    /// `new = H(old || d)`; order-sensitive by construction.
    pub fn extend(self, d: &Digest) -> Pcr {
        let mut h = Sha256::new();
        h.update(self.value.0);
        h.update(d.0);
        Pcr { index: self.index, value: Digest(h.finalize().into()) }
    }
}

/// A fixed bank of PCRs, all zero after reset.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PcrBank {
    pcrs: Vec<Pcr>,
}

impl Default for PcrBank {
    fn default() -> Self {
        PcrBank { pcrs: (0..PCR_COUNT as u8).map(Pcr::reset).collect() }
    }
}

impl PcrBank {
    pub fn extend(&mut self, index: u8, d: &Digest) {
        let pcr = &mut self.pcrs[index as usize];
        *pcr = pcr.extend(d);
    }

    pub fn pcrs(&self) -> &[Pcr] {
        &self.pcrs
    }

    pub fn value(&self, index: u8) -> Digest {
        self.pcrs[index as usize].value
    }
}

/// One measured component: name, digest, and the register it extended.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LogEntry {
    pub component: String,
    pub digest: Digest,
    pub pcr_index: u8,
}

/// Ordered record of everything measured since reset. Replaying it over a
/// zeroed bank reproduces the current PCR values exactly.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MeasurementLog {
    pub entries: Vec<LogEntry>,
}

impl MeasurementLog {
    pub fn replay(&self) -> PcrBank {
        let mut bank = PcrBank::default();
        for e in &self.entries {
            bank.extend(e.pcr_index, &e.digest);
        }
        bank
    }

    pub fn contains_component(&self, name: &str) -> bool {
        self.entries.iter().any(|e| e.component == name)
    }
}

/// Reference integrity measurement: the digest a component must have.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RimCert {
    pub component: String,
    pub expected: Digest,
    pub issuer: String,
}

/// The set of reference certificates rooted in one static trust anchor.
#[derive(Debug, Clone, Default)]
pub struct RimStore {
    trust_root: String,
    by_component: BTreeMap<String, RimCert>,
}

impl RimStore {
    pub fn new(trust_root: &str) -> RimStore {
        RimStore { trust_root: String::from(trust_root), by_component: BTreeMap::new() }
    }

    pub fn trust_root(&self) -> &str {
        &self.trust_root
    }

    pub fn add(&mut self, cert: RimCert) {
        self.by_component.insert(cert.component.clone(), cert);
    }

    /// The expected digest for a component; certificates from any issuer
    /// other than the trust root are unusable.
    pub fn expected(&self, component: &str) -> Option<&Digest> {
        self.by_component
            .get(component)
            .filter(|c| c.issuer == self.trust_root)
            .map(|c| &c.expected)
    }

    /// True if the (component, digest) pair matches a usable certificate.
    pub fn matches(&self, component: &str, digest: &Digest) -> bool {
        self.expected(component) == Some(digest)
    }
}

/// Boot outcome of a terminal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum BootState {
    PoweredOff,
    /// Measured boot completed and every component matched its reference.
    Booted,
    /// A measurement mismatched (or had no reference); boot halted there.
    Failed,
    /// Factory-default fallback: nothing measured, nothing trusted.
    Pristine,
}

impl fmt::Display for BootState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            BootState::PoweredOff => "powered-off",
            BootState::Booted => "booted",
            BootState::Failed => "failed",
            BootState::Pristine => "pristine",
        };
        f.write_str(s)
    }
}

/// State left behind by a boot attempt.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BootOutcome {
    pub state: BootState,
    pub log: MeasurementLog,
    pub pcrs: PcrBank,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TrustError {
    /// Component manifest names a component twice.
    InvalidManifest(String),
    /// An attestation identity was already issued for this terminal.
    AlreadyIssued(String),
}

impl fmt::Display for TrustError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrustError::InvalidManifest(name) => write!(f, "duplicate component {name:?} in manifest"),
            TrustError::AlreadyIssued(mt) => write!(f, "attestation identity already issued for {mt}"),
        }
    }
}

impl core::error::Error for TrustError {}

/// Measured boot: components are measured in execution order, each
/// measurement is extended into the boot PCR and recorded in the log, then
/// checked against its reference certificate. The first mismatch (or missing
/// certificate) halts the boot in `Failed` with the log truncated at the
/// failing component — the failing measurement itself is recorded, so a
/// later verifier sees exactly what ran.
pub fn secure_boot(
    components: &[(String, Digest)],
    rims: &RimStore,
) -> Result<BootOutcome, TrustError> {
    let mut seen = BTreeMap::new();
    for (name, _) in components {
        if seen.insert(name.clone(), ()).is_some() {
            return Err(TrustError::InvalidManifest(name.clone()));
        }
    }

    let mut log = MeasurementLog::default();
    let mut pcrs = PcrBank::default();
    for (name, digest) in components {
        pcrs.extend(BOOT_PCR, digest);
        log.entries.push(LogEntry { component: name.clone(), digest: *digest, pcr_index: BOOT_PCR });
        if !rims.matches(name, digest) {
            return Ok(BootOutcome { state: BootState::Failed, log, pcrs });
        }
    }
    Ok(BootOutcome { state: BootState::Booted, log, pcrs })
}

/// Factory-default fallback boot: empty log, zeroed PCRs. A pristine
/// terminal has no measured enforcer and cannot attest successfully.
pub fn pristine_boot() -> BootOutcome {
    BootOutcome { state: BootState::Pristine, log: MeasurementLog::default(), pcrs: PcrBank::default() }
}

/// An attestation identity, certified by the trust root.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AiCredential {
    pub mt_id: String,
    pub key_id: String,
    pub issuer: String,
}

pub type Secret = [u8; 32];

/// Holds attestation-identity secrets for the whole simulation; the stub
/// Privacy CA.
#[derive(Debug, Clone, Default)]
pub struct CredentialRegistry {
    trust_root: String,
    secrets: BTreeMap<String, Secret>,
    issued: BTreeMap<String, AiCredential>,
    next_key: u64,
}

impl CredentialRegistry {
    pub fn new(trust_root: &str) -> CredentialRegistry {
        CredentialRegistry {
            trust_root: String::from(trust_root),
            secrets: BTreeMap::new(),
            issued: BTreeMap::new(),
            next_key: 0,
        }
    }

    /// Issue a fresh attestation identity for a terminal, at most one each.
    pub fn issue(&mut self, mt_id: &str, rng: &mut SimRng) -> Result<AiCredential, TrustError> {
        if self.issued.contains_key(mt_id) {
            return Err(TrustError::AlreadyIssued(String::from(mt_id)));
        }
        let key_id = alloc::format!("aik-{}", self.next_key);
        self.next_key += 1;
        let cred = AiCredential {
            mt_id: String::from(mt_id),
            key_id: key_id.clone(),
            issuer: self.trust_root.clone(),
        };
        self.secrets.insert(key_id, rng.bytes32());
        self.issued.insert(String::from(mt_id), cred.clone());
        Ok(cred)
    }

    pub fn credential(&self, mt_id: &str) -> Option<&AiCredential> {
        self.issued.get(mt_id)
    }

    pub fn secret(&self, key_id: &str) -> Option<&Secret> {
        self.secrets.get(key_id)
    }
}

/// What a terminal submits for verification: challenge nonce, claimed PCR
/// values, the measurement log behind them, its identity, and a keyed tag
/// over all of it.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AttestationPackage {
    pub nonce: [u8; 16],
    pub pcr_values: Vec<Pcr>,
    pub log: MeasurementLog,
    pub credential: AiCredential,
    pub tag: Digest,
}

/// Canonical byte encoding fed to the tag: lengths are little-endian u32,
/// field order is fixed.
fn tag_over(secret: &Secret, nonce: &[u8; 16], pcrs: &[Pcr], log: &MeasurementLog) -> Digest {
    let mut h = Sha256::new();
    h.update(secret);
    h.update(nonce);
    h.update((pcrs.len() as u32).to_le_bytes());
    for pcr in pcrs {
        h.update([pcr.index]);
        h.update(pcr.value.0);
    }
    h.update((log.entries.len() as u32).to_le_bytes());
    for e in &log.entries {
        h.update((e.component.len() as u32).to_le_bytes());
        h.update(e.component.as_bytes());
        h.update(e.digest.0);
        h.update([e.pcr_index]);
    }
    Digest(h.finalize().into())
}

/// Build a package over the device's actual boot state. Any state may try —
/// tampered and pristine devices do — honesty is enforced at verification,
/// not construction.
pub fn build_attestation_package(
    boot: &BootOutcome,
    credential: &AiCredential,
    secret: &Secret,
    nonce: [u8; 16],
) -> AttestationPackage {
    let pcr_values: Vec<Pcr> = boot.pcrs.pcrs().to_vec();
    let tag = tag_over(secret, &nonce, &pcr_values, &boot.log);
    AttestationPackage { nonce, pcr_values, log: boot.log.clone(), credential: credential.clone(), tag }
}

/// Why a package was rejected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum RejectReason {
    /// Nonce does not match the challenge (stale or reused).
    Replay,
    /// Tag does not verify under the registered secret, or the identity is
    /// unknown or mis-rooted.
    Forged,
    /// Log replay does not reproduce the claimed PCR values.
    LogMismatch,
    /// A measured component has no matching reference certificate.
    Untrusted,
    /// No enforcer among the measured components.
    NoLte,
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RejectReason::Replay => "Replay",
            RejectReason::Forged => "Forged",
            RejectReason::LogMismatch => "LogMismatch",
            RejectReason::Untrusted => "Untrusted",
            RejectReason::NoLte => "NoLte",
        };
        f.write_str(s)
    }
}

/// Attestation verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Verdict {
    Accept,
    Reject(RejectReason),
}

impl Verdict {
    pub fn is_accept(self) -> bool {
        matches!(self, Verdict::Accept)
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Accept => f.write_str("accept"),
            Verdict::Reject(r) => write!(f, "reject:{r}"),
        }
    }
}

/// Verify a package against a challenge nonce, the reference measurements,
/// and the credential registry. Accept requires, in order: the expected
/// nonce, a tag that recomputes under the registered secret, a log that
/// replays to the claimed PCR values, a reference certificate matching every
/// log entry, and a measured enforcer.
pub fn verify_attestation(
    pkg: &AttestationPackage,
    expected_nonce: &[u8; 16],
    rims: &RimStore,
    registry: &CredentialRegistry,
) -> Verdict {
    if &pkg.nonce != expected_nonce {
        return Verdict::Reject(RejectReason::Replay);
    }
    let Some(secret) = registry.secret(&pkg.credential.key_id) else {
        return Verdict::Reject(RejectReason::Forged);
    };
    if pkg.credential.issuer != rims.trust_root() {
        return Verdict::Reject(RejectReason::Forged);
    }
    if tag_over(secret, &pkg.nonce, &pkg.pcr_values, &pkg.log) != pkg.tag {
        return Verdict::Reject(RejectReason::Forged);
    }
    let replayed = pkg.log.replay();
    if replayed.pcrs() != pkg.pcr_values.as_slice() {
        return Verdict::Reject(RejectReason::LogMismatch);
    }
    for e in &pkg.log.entries {
        if !rims.matches(&e.component, &e.digest) {
            return Verdict::Reject(RejectReason::Untrusted);
        }
    }
    if !pkg.log.contains_component(LTE_COMPONENT) {
        return Verdict::Reject(RejectReason::NoLte);
    }
    Verdict::Accept
}
