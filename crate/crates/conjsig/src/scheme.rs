//! The signature protocol: setup, factorization choice, signing,
//! verification, rekeying.
//!
//! Key setup fixes a platform element `g`, a secret conjugator `s`, and a
//! highly composite integer `n`, publishing only `x = (g^n)^s` (conjugation
//! is written as exponentiation, `a^b = b⁻¹ a b`). To sign a message `m`:
//!
//! ```text
//! t        random element
//! n_i·n_j  a fresh factorization of n
//! y   = (g^n_i)^t
//! h   = H(m || f(y))
//! α   = t⁻¹ · s · h · y
//! σ   = (y, α, n_j)
//! ```
//!
//! Verification accepts iff `(y^n_j)^α = x^(h'·y)` with `h'` recomputed from
//! the received message — an equation in public data only; neither `g`, `n`,
//! `n_i`, `s`, nor `t` appears.
//!
//! Publishing `σ` necessarily hands out an `n_j`-th root of `x` (see
//! [`crate::attack::extract_root`]), which is why a factorization must never
//! be used twice: `sign` consumes one unused divisor of `n` per signature
//! and records it in the ledger *before* releasing the signature, and a
//! ledgered verifier rejects any signature whose `(key_id, n_j)` entry was
//! recorded by a different signature event. When every admissible divisor
//! has been used the key is exhausted and [`rekey`] is the only way forward.

use crate::hashing::{self, HashError, HashParams, DIGEST_SHA256};
use crate::ledger::{FactorLedger, LedgerError, RecordOutcome};
use crate::platform::{GroupElement, PlatformDescriptor, PlatformError};
use crate::profile::Profile;
use crate::wire::{self, Reader, WireError};
use num_bigint::BigInt;
use num_traits::{One, Zero};
use rand::Rng;
use sha2::{Digest, Sha256};
use std::collections::BTreeSet;
use std::fmt;

/// Candidate base elements tried before setup gives up screening.
const SETUP_CANDIDATE_RETRIES: usize = 64;
/// Centralizer probe samples per candidate during setup screening.
const SETUP_PROBE_SAMPLES: usize = 128;

#[derive(Debug, thiserror::Error)]
pub enum SchemeError {
    #[error(transparent)]
    Platform(#[from] PlatformError),
    #[error(transparent)]
    Hash(#[from] HashError),
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error("ledger failure: {0}")]
    Ledger(#[from] LedgerError),
    #[error("no unused admissible factorization of n remains; rekey required")]
    FactorizationsExhausted,
    #[error("no candidate base element passed screening after {attempts} attempts")]
    ScreeningFailed { attempts: usize },
    #[error("private and public key do not belong together")]
    KeyMismatch,
    #[error("factor policy admits no factorization of n")]
    UnsatisfiablePolicy,
    #[error("n_j={n_j} was recorded by a concurrent signer; signature withheld")]
    LedgerConflict { n_j: BigInt },
    #[error("invalid {field}: {detail}")]
    InvalidKeyMaterial { field: &'static str, detail: String },
}

fn invalid(field: &'static str, detail: impl Into<String>) -> SchemeError {
    SchemeError::InvalidKeyMaterial {
        field,
        detail: detail.into(),
    }
}

/// Why a signature was rejected. The variants are part of the interface:
/// the CLI prints them verbatim and the attack lab asserts on them.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RejectReason {
    /// The verification equation does not hold.
    EquationFailed,
    /// The ledger holds this `(key_id, n_j)` from a different signature
    /// event, so this signature may be a root-reuse forgery.
    ReplayedFactor,
    /// The signature is structurally unusable under this public key.
    Malformed,
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RejectReason::EquationFailed => "EquationFailed",
            RejectReason::ReplayedFactor => "ReplayedFactor",
            RejectReason::Malformed => "Malformed",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum VerifyOutcome {
    Accept,
    Reject(RejectReason),
}

impl VerifyOutcome {
    pub fn is_accept(&self) -> bool {
        matches!(self, VerifyOutcome::Accept)
    }
}

impl fmt::Display for VerifyOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VerifyOutcome::Accept => f.write_str("accept"),
            VerifyOutcome::Reject(r) => write!(f, "reject({r})"),
        }
    }
}

/// Restrictions on which divisors of `n` may be published as `n_j`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FactorPolicy {
    excluded_primes: BTreeSet<BigInt>,
    max_exponent_in_nj: Option<u32>,
    max_uses: Option<u64>,
}

impl FactorPolicy {
    pub fn permissive() -> FactorPolicy {
        FactorPolicy::default()
    }

    /// Never let `prime` divide a published `n_j`.
    pub fn exclude_prime(mut self, prime: impl Into<BigInt>) -> FactorPolicy {
        self.excluded_primes.insert(prime.into());
        self
    }

    /// Cap the exponent of every prime inside published `n_j` values.
    pub fn max_exponent_in_nj(mut self, cap: u32) -> FactorPolicy {
        self.max_exponent_in_nj = Some(cap);
        self
    }

    /// Force a rekey after this many signatures even if divisors remain.
    pub fn max_uses(mut self, count: u64) -> FactorPolicy {
        self.max_uses = Some(count);
        self
    }

    pub fn excluded_primes(&self) -> impl Iterator<Item = &BigInt> {
        self.excluded_primes.iter()
    }

    pub fn max_exponent(&self) -> Option<u32> {
        self.max_exponent_in_nj
    }

    pub fn max_use_count(&self) -> Option<u64> {
        self.max_uses
    }

    /// Does this policy allow publishing `n_j`? `n_factorization` must be
    /// the factorization of the full protocol integer (every prime of `n_j`
    /// occurs in it, since `n_j | n`).
    pub fn admits(&self, n_j: &BigInt, n_factorization: &[(BigInt, u32)]) -> bool {
        for (p, _) in n_factorization {
            let mut multiplicity = 0u32;
            let mut rest = n_j.clone();
            while !rest.is_zero() && (&rest % p).is_zero() {
                rest /= p;
                multiplicity += 1;
            }
            if multiplicity > 0 && self.excluded_primes.contains(p) {
                return false;
            }
            if let Some(cap) = self.max_exponent_in_nj {
                if multiplicity > cap {
                    return false;
                }
            }
        }
        true
    }
}

/// Signing key. Every field stays private to the signer — including `g`,
/// which verification never needs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PrivateKey {
    s: GroupElement,
    g: GroupElement,
    n: BigInt,
    factorization: Vec<(BigInt, u32)>,
    policy: FactorPolicy,
    key_id: Vec<u8>,
}

/// Verification key: the published `x`, the platform it lives on, and the
/// hash parameters signatures were made with.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PublicKey {
    x: GroupElement,
    descriptor: PlatformDescriptor,
    hash_params: HashParams,
    key_id: Vec<u8>,
}

/// The published triple `σ = (y, α, n_j)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Signature {
    y: GroupElement,
    alpha: GroupElement,
    n_j: BigInt,
}

impl Signature {
    pub fn new(y: GroupElement, alpha: GroupElement, n_j: BigInt) -> Signature {
        Signature { y, alpha, n_j }
    }

    pub fn y(&self) -> &GroupElement {
        &self.y
    }

    pub fn alpha(&self) -> &GroupElement {
        &self.alpha
    }

    pub fn n_j(&self) -> &BigInt {
        &self.n_j
    }
}

impl PrivateKey {
    pub fn s(&self) -> &GroupElement {
        &self.s
    }

    pub fn g(&self) -> &GroupElement {
        &self.g
    }

    pub fn n(&self) -> &BigInt {
        &self.n
    }

    pub fn factorization(&self) -> &[(BigInt, u32)] {
        &self.factorization
    }

    pub fn policy(&self) -> &FactorPolicy {
        &self.policy
    }

    pub fn key_id(&self) -> &[u8] {
        &self.key_id
    }
}

impl PublicKey {
    pub fn x(&self) -> &GroupElement {
        &self.x
    }

    pub fn descriptor(&self) -> &PlatformDescriptor {
        &self.descriptor
    }

    pub fn hash_params(&self) -> &HashParams {
        &self.hash_params
    }

    pub fn key_id(&self) -> &[u8] {
        &self.key_id
    }
}

/// All divisors of the integer with this factorization, ascending.
pub fn divisors(factorization: &[(BigInt, u32)]) -> Vec<BigInt> {
    let mut divs = vec![BigInt::one()];
    for (p, e) in factorization {
        let mut next = Vec::with_capacity(divs.len() * (*e as usize + 1));
        let mut power = BigInt::one();
        for _ in 0..=*e {
            for d in &divs {
                next.push(d * &power);
            }
            power *= p;
        }
        divs = next;
    }
    divs.sort();
    divs
}

/// Divisors of `n` the policy admits and the ledger has not seen for this
/// key, ascending.
pub fn admissible_divisors(sk: &PrivateKey, ledger: &FactorLedger) -> Vec<BigInt> {
    divisors(&sk.factorization)
        .into_iter()
        .filter(|d| sk.policy.admits(d, &sk.factorization))
        .filter(|d| !ledger.is_used(&sk.key_id, d))
        .collect()
}

/// Generate a key pair on `desc` with the default (permissive) policy.
///
/// Samples the base element `g` until a centralizer probe finds no witness
/// against it, samples `s ≠ identity`, takes `n` from the profile, and
/// publishes `x = (g^n)^s`. Deterministic for a fixed RNG.
pub fn setup<R: Rng + ?Sized>(
    desc: &PlatformDescriptor,
    hash_params: &HashParams,
    profile: &Profile,
    rng: &mut R,
) -> Result<(PublicKey, PrivateKey), SchemeError> {
    setup_with_policy(desc, hash_params, profile, FactorPolicy::permissive(), rng)
}

pub fn setup_with_policy<R: Rng + ?Sized>(
    desc: &PlatformDescriptor,
    hash_params: &HashParams,
    profile: &Profile,
    policy: FactorPolicy,
    rng: &mut R,
) -> Result<(PublicKey, PrivateKey), SchemeError> {
    desc.validate()?;

    let n = profile.protocol_integer().clone();
    let factorization = profile.factorization().to_vec();
    validate_protocol_integer(&n, &factorization)?;
    if !divisors(&factorization)
        .iter()
        .any(|d| policy.admits(d, &factorization))
    {
        return Err(SchemeError::UnsatisfiablePolicy);
    }

    let mut g = None;
    for _ in 0..SETUP_CANDIDATE_RETRIES {
        let candidate = desc.random_element(rng);
        if candidate.is_identity() {
            continue;
        }
        if desc
            .centralizer_probe(&candidate, SETUP_PROBE_SAMPLES, rng)?
            .is_empty()
        {
            g = Some(candidate);
            break;
        }
    }
    let g = g.ok_or(SchemeError::ScreeningFailed {
        attempts: SETUP_CANDIDATE_RETRIES,
    })?;

    let s = loop {
        let candidate = desc.random_element(rng);
        if !candidate.is_identity() {
            break candidate;
        }
    };

    let x = desc.conjugate(&desc.power(&g, &n), &s);

    let mut key_id = vec![0u8; 16];
    rng.fill_bytes(&mut key_id);

    Ok((
        PublicKey {
            x,
            descriptor: desc.clone(),
            hash_params: hash_params.clone(),
            key_id: key_id.clone(),
        },
        PrivateKey {
            s,
            g,
            n,
            factorization,
            policy,
            key_id,
        },
    ))
}

/// Fresh keys after exhaustion (or on schedule). Carries the old policy
/// over; everything else — `g`, `s`, `n`, `key_id` — is drawn anew, and the
/// old key's ledger entries keep referring to the old `key_id` only.
pub fn rekey<R: Rng + ?Sized>(
    old_sk: &PrivateKey,
    desc: &PlatformDescriptor,
    profile: &Profile,
    rng: &mut R,
) -> Result<(PublicKey, PrivateKey), SchemeError> {
    loop {
        let (pk, sk) =
            setup_with_policy(desc, &profile.hash_params(), profile, old_sk.policy.clone(), rng)?;
        // 2^-128 event, but the ledger scoping depends on distinct ids
        if sk.key_id != old_sk.key_id {
            return Ok((pk, sk));
        }
    }
}

fn validate_protocol_integer(
    n: &BigInt,
    factorization: &[(BigInt, u32)],
) -> Result<(), SchemeError> {
    if n < &BigInt::from(4) {
        return Err(invalid("n", format!("must be at least 4, found {n}")));
    }
    let mut product = BigInt::one();
    let mut last: Option<&BigInt> = None;
    for (p, e) in factorization {
        if p < &BigInt::from(2) || *e == 0 {
            return Err(invalid("factorization", format!("bad factor {p}^{e}")));
        }
        if let Some(prev) = last {
            if prev >= p {
                return Err(invalid(
                    "factorization",
                    "primes must be strictly increasing",
                ));
            }
        }
        last = Some(p);
        product *= p.pow(*e);
    }
    if &product != n {
        return Err(invalid(
            "factorization",
            format!("product {product} does not equal n={n}"),
        ));
    }
    let divisor_count: u64 = factorization.iter().map(|&(_, e)| e as u64 + 1).product();
    if divisor_count < 3 {
        return Err(invalid(
            "n",
            "needs at least two distinct factorizations n = n_i·n_j",
        ));
    }
    Ok(())
}

/// Pick an unused admissible factorization `n = n_i · n_j`, uniform over
/// what remains. Does not touch the ledger; `sign` records the choice.
pub fn choose_factorization<R: Rng + ?Sized>(
    sk: &PrivateKey,
    ledger: &FactorLedger,
    rng: &mut R,
) -> Result<(BigInt, BigInt), SchemeError> {
    if let Some(max) = sk.policy.max_uses {
        if ledger.use_count(&sk.key_id) as u64 >= max {
            return Err(SchemeError::FactorizationsExhausted);
        }
    }
    let admissible = admissible_divisors(sk, ledger);
    if admissible.is_empty() {
        return Err(SchemeError::FactorizationsExhausted);
    }
    let n_j = admissible[rng.gen_range(0..admissible.len())].clone();
    let n_i = &sk.n / &n_j;
    Ok((n_i, n_j))
}

/// Digest binding a ledger entry to one concrete signature event.
pub fn signature_event_digest(key_id: &[u8], sig: &Signature) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b"conjsig-event-v1");
    h.update((key_id.len() as u32).to_be_bytes());
    h.update(key_id);
    h.update(sig.to_bytes());
    h.finalize().into()
}

/// Sign `message`. The consumed factor is recorded in the ledger before the
/// signature is returned: if recording fails, no signature exists.
pub fn sign<R: Rng + ?Sized>(
    sk: &PrivateKey,
    pk: &PublicKey,
    message: &[u8],
    ledger: &mut FactorLedger,
    rng: &mut R,
) -> Result<Signature, SchemeError> {
    if sk.key_id != pk.key_id {
        return Err(SchemeError::KeyMismatch);
    }
    let desc = &pk.descriptor;
    let t = desc.random_element(rng);
    let (n_i, n_j) = choose_factorization(sk, ledger, rng)?;
    let y = desc.conjugate(&desc.power(&sk.g, &n_i), &t);
    let h = hashing::hash_to_group(message, &y.encode(), desc, &pk.hash_params)?;
    let t_inv_s = desc.multiply(&desc.inverse(&t), &sk.s);
    let alpha = desc.multiply(&desc.multiply(&t_inv_s, &h), &y);
    let sig = Signature { y, alpha, n_j };

    let digest = signature_event_digest(&sk.key_id, &sig);
    match ledger.record_event(&sk.key_id, &sig.n_j, digest)? {
        RecordOutcome::Recorded => Ok(sig),
        // a concurrent signer on the same ledger file won the factor
        RecordOutcome::AlreadyUsed => Err(SchemeError::LedgerConflict {
            n_j: sig.n_j.clone(),
        }),
    }
}

/// Check `σ` against `pk` and `message`: accept iff `(y^n_j)^α = x^(h'·y)`.
///
/// With a ledger, additionally reject (`ReplayedFactor`) when the ledger's
/// `(key_id, n_j)` entry came from a different signature event than this
/// exact signature — the entry `sign` wrote for this very signature does
/// not count against it.
pub fn verify(
    pk: &PublicKey,
    message: &[u8],
    sig: &Signature,
    ledger: Option<&FactorLedger>,
) -> VerifyOutcome {
    let desc = &pk.descriptor;
    let dim = desc.dimension();
    if sig.y.dimension() != dim || sig.alpha.dimension() != dim || sig.n_j < BigInt::one() {
        return VerifyOutcome::Reject(RejectReason::Malformed);
    }
    let h = match hashing::hash_to_group(message, &sig.y.encode(), desc, &pk.hash_params) {
        Ok(h) => h,
        Err(_) => return VerifyOutcome::Reject(RejectReason::Malformed),
    };
    let lhs = desc.conjugate(&desc.power(&sig.y, &sig.n_j), &sig.alpha);
    let rhs = desc.conjugate(&pk.x, &desc.multiply(&h, &sig.y));
    if lhs != rhs {
        return VerifyOutcome::Reject(RejectReason::EquationFailed);
    }
    if let Some(ledger) = ledger {
        if let Some(entry) = ledger.entry(&pk.key_id, &sig.n_j) {
            let own = signature_event_digest(&pk.key_id, sig);
            if entry.event_digest != Some(own) {
                return VerifyOutcome::Reject(RejectReason::ReplayedFactor);
            }
        }
    }
    VerifyOutcome::Accept
}

/// True iff `sk` generates `pk`: same key id and `x` recomputes from
/// `(g, s, n)` exactly.
pub fn keys_match(pk: &PublicKey, sk: &PrivateKey) -> bool {
    if pk.key_id != sk.key_id
        || sk.g.dimension() != pk.descriptor.dimension()
        || sk.s.dimension() != pk.descriptor.dimension()
    {
        return false;
    }
    let desc = &pk.descriptor;
    desc.conjugate(&desc.power(&sk.g, &sk.n), &sk.s) == pk.x
}

// ---------------------------------------------------------------------------
// Wire formats
// ---------------------------------------------------------------------------

/// First line of every private key file.
pub const PRIVATE_KEY_WARNING: &str =
    "# conjsig PRIVATE key - keep this file secret; it signs on your behalf\n";

fn put_header(out: &mut Vec<u8>, record_type: u8) {
    out.extend_from_slice(&wire::FILE_MAGIC);
    out.push(record_type);
    out.push(wire::FILE_VERSION);
}

fn read_header(r: &mut Reader<'_>, record_type: u8) -> Result<(), WireError> {
    r.expect_magic(&wire::FILE_MAGIC)?;
    let offset = r.offset();
    let found = r.u8()?;
    if found != record_type {
        return Err(WireError::UnexpectedRecordType {
            offset,
            expected: record_type,
            found,
        });
    }
    r.expect_version(wire::FILE_VERSION)?;
    Ok(())
}

fn put_descriptor(out: &mut Vec<u8>, desc: &PlatformDescriptor) {
    out.extend_from_slice(&(desc.dimension() as u16).to_be_bytes());
    for row in desc.action_rows() {
        for entry in row {
            wire::put_int(out, &entry);
        }
    }
    wire::put_int(out, desc.sample_bound());
}

fn read_descriptor(r: &mut Reader<'_>) -> Result<PlatformDescriptor, SchemeError> {
    let dim = r.u16_be()? as usize;
    let mut rows = Vec::with_capacity(dim);
    for _ in 0..dim {
        let mut row = Vec::with_capacity(dim);
        for _ in 0..dim {
            row.push(r.int_record()?);
        }
        rows.push(row);
    }
    let sample_bound = r.int_record()?;
    Ok(PlatformDescriptor::new(&rows, sample_bound)?)
}

fn put_hash_params(out: &mut Vec<u8>, params: &HashParams) {
    out.push(params.digest_algorithm_id());
    wire::put_int(out, params.exponent_bound());
    wire::put_bytes(out, params.domain_tag());
}

fn read_hash_params(r: &mut Reader<'_>) -> Result<HashParams, SchemeError> {
    let id = r.u8()?;
    if id != DIGEST_SHA256 {
        return Err(SchemeError::Hash(HashError::UnsupportedDigest { id }));
    }
    let exponent_bound = r.int_record()?;
    let domain_tag = r.bytes_record()?.to_vec();
    Ok(HashParams::new(exponent_bound, domain_tag)?)
}

fn read_group_element(
    r: &mut Reader<'_>,
    expected_dim: Option<usize>,
) -> Result<GroupElement, WireError> {
    let (translation, shift) = wire::read_element(r, expected_dim)?;
    Ok(GroupElement::new(translation, shift))
}

impl PublicKey {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        put_header(&mut out, wire::FILE_TYPE_PUBLIC_KEY);
        wire::put_bytes(&mut out, &self.key_id);
        put_descriptor(&mut out, &self.descriptor);
        put_hash_params(&mut out, &self.hash_params);
        out.extend_from_slice(&self.x.encode());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<PublicKey, SchemeError> {
        let mut r = Reader::new(bytes);
        read_header(&mut r, wire::FILE_TYPE_PUBLIC_KEY)?;
        let key_id = r.bytes_record()?.to_vec();
        let descriptor = read_descriptor(&mut r)?;
        let hash_params = read_hash_params(&mut r)?;
        let x = read_group_element(&mut r, Some(descriptor.dimension()))?;
        r.finish()?;
        Ok(PublicKey {
            x,
            descriptor,
            hash_params,
            key_id,
        })
    }

    pub fn to_file_bytes(&self, hex_mode: bool) -> Vec<u8> {
        wrap_file(self.to_bytes(), hex_mode, None)
    }

    pub fn from_file_bytes(bytes: &[u8]) -> Result<PublicKey, SchemeError> {
        PublicKey::from_bytes(&unwrap_file(bytes)?)
    }
}

impl PrivateKey {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        put_header(&mut out, wire::FILE_TYPE_PRIVATE_KEY);
        wire::put_bytes(&mut out, &self.key_id);
        out.extend_from_slice(&self.g.encode());
        out.extend_from_slice(&self.s.encode());
        wire::put_int(&mut out, &self.n);
        out.extend_from_slice(&(self.factorization.len() as u32).to_be_bytes());
        for (p, e) in &self.factorization {
            wire::put_int(&mut out, p);
            out.extend_from_slice(&e.to_be_bytes());
        }
        let excluded: Vec<&BigInt> = self.policy.excluded_primes.iter().collect();
        out.extend_from_slice(&(excluded.len() as u32).to_be_bytes());
        for p in excluded {
            wire::put_int(&mut out, p);
        }
        match self.policy.max_exponent_in_nj {
            Some(cap) => {
                out.push(1);
                out.extend_from_slice(&cap.to_be_bytes());
            }
            None => out.push(0),
        }
        match self.policy.max_uses {
            Some(max) => {
                out.push(1);
                out.extend_from_slice(&max.to_be_bytes());
            }
            None => out.push(0),
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<PrivateKey, SchemeError> {
        let mut r = Reader::new(bytes);
        read_header(&mut r, wire::FILE_TYPE_PRIVATE_KEY)?;
        let key_id = r.bytes_record()?.to_vec();
        let g = read_group_element(&mut r, None)?;
        let s = read_group_element(&mut r, Some(g.dimension()))?;
        let n = r.int_record()?;
        let factor_count = r.u32_be()? as usize;
        let mut factorization = Vec::with_capacity(factor_count);
        for _ in 0..factor_count {
            let p = r.int_record()?;
            let e = r.u32_be()?;
            factorization.push((p, e));
        }
        let excluded_count = r.u32_be()? as usize;
        let mut policy = FactorPolicy::permissive();
        for _ in 0..excluded_count {
            policy.excluded_primes.insert(r.int_record()?);
        }
        policy.max_exponent_in_nj = match r.u8()? {
            0 => None,
            1 => Some(r.u32_be()?),
            flag => return Err(invalid("policy", format!("bad exponent-cap flag {flag}"))),
        };
        policy.max_uses = match r.u8()? {
            0 => None,
            1 => Some(r.u64_be()?),
            flag => return Err(invalid("policy", format!("bad max-uses flag {flag}"))),
        };
        r.finish()?;

        validate_protocol_integer(&n, &factorization)?;
        if g.is_identity() {
            return Err(invalid("g", "must not be the identity"));
        }
        if s.is_identity() {
            return Err(invalid("s", "must not be the identity"));
        }
        Ok(PrivateKey {
            s,
            g,
            n,
            factorization,
            policy,
            key_id,
        })
    }

    /// File form: plaintext warning line, then the record (hex or binary).
    pub fn to_file_bytes(&self, hex_mode: bool) -> Vec<u8> {
        wrap_file(self.to_bytes(), hex_mode, Some(PRIVATE_KEY_WARNING))
    }

    pub fn from_file_bytes(bytes: &[u8]) -> Result<PrivateKey, SchemeError> {
        PrivateKey::from_bytes(&unwrap_file(bytes)?)
    }
}

impl Signature {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        put_header(&mut out, wire::FILE_TYPE_SIGNATURE);
        out.extend_from_slice(&self.y.encode());
        out.extend_from_slice(&self.alpha.encode());
        wire::put_int(&mut out, &self.n_j);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Signature, SchemeError> {
        let mut r = Reader::new(bytes);
        read_header(&mut r, wire::FILE_TYPE_SIGNATURE)?;
        let y = read_group_element(&mut r, None)?;
        let alpha = read_group_element(&mut r, Some(y.dimension()))?;
        let n_j = r.int_record()?;
        r.finish()?;
        Ok(Signature { y, alpha, n_j })
    }

    pub fn to_file_bytes(&self, hex_mode: bool) -> Vec<u8> {
        wrap_file(self.to_bytes(), hex_mode, None)
    }

    pub fn from_file_bytes(bytes: &[u8]) -> Result<Signature, SchemeError> {
        Signature::from_bytes(&unwrap_file(bytes)?)
    }
}

fn wrap_file(body: Vec<u8>, hex_mode: bool, warning: Option<&str>) -> Vec<u8> {
    let mut out = Vec::new();
    if let Some(w) = warning {
        out.extend_from_slice(w.as_bytes());
    }
    if hex_mode {
        for b in &body {
            out.extend_from_slice(format!("{b:02x}").as_bytes());
        }
        out.push(b'\n');
    } else {
        out.extend_from_slice(&body);
    }
    out
}

/// Strip comment lines, then accept either the raw record or its hex form.
fn unwrap_file(bytes: &[u8]) -> Result<Vec<u8>, SchemeError> {
    let mut rest = bytes;
    while rest.first() == Some(&b'#') {
        match rest.iter().position(|&b| b == b'\n') {
            Some(nl) => rest = &rest[nl + 1..],
            None => rest = &[],
        }
    }
    if rest.starts_with(&wire::FILE_MAGIC) {
        return Ok(rest.to_vec());
    }
    let compact: Vec<u8> = rest
        .iter()
        .copied()
        .filter(|b| !b.is_ascii_whitespace())
        .collect();
    if compact.is_empty() {
        return Err(invalid("file", "empty after comments"));
    }
    decode_hex(&compact).ok_or_else(|| invalid("file", "neither binary record nor hex"))
}

fn decode_hex(text: &[u8]) -> Option<Vec<u8>> {
    if text.len() % 2 != 0 {
        return None;
    }
    let nibble = |b: u8| -> Option<u8> {
        match b {
            b'0'..=b'9' => Some(b - b'0'),
            b'a'..=b'f' => Some(b - b'a' + 10),
            b'A'..=b'F' => Some(b - b'A' + 10),
            _ => None,
        }
    };
    text.chunks(2)
        .map(|pair| Some(nibble(pair[0])? << 4 | nibble(pair[1])?))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ledger::Clock;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn toy_keys(seed: u64) -> (PublicKey, PrivateKey) {
        let profile = Profile::toy();
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        setup(
            &profile.descriptor(),
            &profile.hash_params(),
            &profile,
            &mut rng,
        )
        .unwrap()
    }

    #[test]
    fn setup_is_deterministic() {
        let (pk1, sk1) = toy_keys(100);
        let (pk2, sk2) = toy_keys(100);
        assert_eq!(pk1, pk2);
        assert_eq!(sk1, sk2);
        let (pk3, _) = toy_keys(101);
        assert_ne!(pk1.key_id(), pk3.key_id());
    }

    #[test]
    fn setup_screens_descriptor() {
        let profile = Profile::toy();
        let identity_action = vec![
            vec![BigInt::from(1), BigInt::from(0)],
            vec![BigInt::from(0), BigInt::from(1)],
        ];
        let flat = PlatformDescriptor::new_unchecked(&identity_action, BigInt::from(8));
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        let err = setup(&flat, &profile.hash_params(), &profile, &mut rng).unwrap_err();
        assert!(matches!(
            err,
            SchemeError::Platform(PlatformError::GrowthCheckFailed)
        ));
    }

    #[test]
    fn setup_invariants_hold() {
        let (pk, sk) = toy_keys(7);
        assert!(keys_match(&pk, &sk));
        assert!(!sk.s().is_identity());
        assert!(!sk.g().is_identity());
        assert_eq!(sk.n(), &BigInt::from(60));
        assert_eq!(pk.key_id(), sk.key_id());
        assert_eq!(pk.key_id().len(), 16);
        // x really is (g^n)^s
        let desc = pk.descriptor();
        assert_eq!(
            &desc.conjugate(&desc.power(sk.g(), sk.n()), sk.s()),
            pk.x()
        );
    }

    #[test]
    fn sign_verify_round_trip() {
        let (pk, sk) = toy_keys(8);
        let mut ledger = FactorLedger::in_memory(Clock::Fixed(0));
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        for i in 0..10 {
            let msg = format!("message number {i}");
            let sig = sign(&sk, &pk, msg.as_bytes(), &mut ledger, &mut rng).unwrap();
            assert_eq!(verify(&pk, msg.as_bytes(), &sig, None), VerifyOutcome::Accept);
            assert_eq!(
                verify(&pk, msg.as_bytes(), &sig, Some(&ledger)),
                VerifyOutcome::Accept,
                "a signature must pass against the ledger entry it wrote itself"
            );
        }
    }

    #[test]
    fn signing_is_deterministic_given_state() {
        let (pk, sk) = toy_keys(10);
        let sig_a = sign(
            &sk,
            &pk,
            b"fixed message",
            &mut FactorLedger::in_memory(Clock::Fixed(0)),
            &mut ChaCha20Rng::seed_from_u64(11),
        )
        .unwrap();
        let sig_b = sign(
            &sk,
            &pk,
            b"fixed message",
            &mut FactorLedger::in_memory(Clock::Fixed(0)),
            &mut ChaCha20Rng::seed_from_u64(11),
        )
        .unwrap();
        assert_eq!(sig_a, sig_b);
        assert_eq!(sig_a.to_bytes(), sig_b.to_bytes());
    }

    #[test]
    fn verify_only_uses_public_data() {
        // distinct t (same key, same message) must both verify
        let (pk, sk) = toy_keys(12);
        let mut ledger = FactorLedger::in_memory(Clock::Fixed(0));
        let mut rng = ChaCha20Rng::seed_from_u64(13);
        let s1 = sign(&sk, &pk, b"m", &mut ledger, &mut rng).unwrap();
        let s2 = sign(&sk, &pk, b"m", &mut ledger, &mut rng).unwrap();
        assert_ne!(s1, s2, "fresh t and factor make signatures distinct");
        assert_ne!(s1.n_j(), s2.n_j());
        assert!(verify(&pk, b"m", &s1, None).is_accept());
        assert!(verify(&pk, b"m", &s2, None).is_accept());
    }

    #[test]
    fn tampered_message_fails_equation() {
        let (pk, sk) = toy_keys(14);
        let mut ledger = FactorLedger::in_memory(Clock::Fixed(0));
        let mut rng = ChaCha20Rng::seed_from_u64(15);
        let sig = sign(&sk, &pk, b"pay alice 10", &mut ledger, &mut rng).unwrap();
        assert_eq!(
            verify(&pk, b"pay alice 90", &sig, None),
            VerifyOutcome::Reject(RejectReason::EquationFailed)
        );
    }

    #[test]
    fn malformed_signatures_are_rejected() {
        let (pk, sk) = toy_keys(16);
        let mut ledger = FactorLedger::in_memory(Clock::Fixed(0));
        let mut rng = ChaCha20Rng::seed_from_u64(17);
        let sig = sign(&sk, &pk, b"m", &mut ledger, &mut rng).unwrap();

        // wrong dimension
        let alien = GroupElement::new(vec![BigInt::one(); 3], BigInt::zero());
        let bad = Signature::new(alien.clone(), sig.alpha().clone(), sig.n_j().clone());
        assert_eq!(
            verify(&pk, b"m", &bad, None),
            VerifyOutcome::Reject(RejectReason::Malformed)
        );

        // non-positive n_j
        let bad = Signature::new(sig.y().clone(), sig.alpha().clone(), BigInt::zero());
        assert_eq!(
            verify(&pk, b"m", &bad, None),
            VerifyOutcome::Reject(RejectReason::Malformed)
        );
    }

    #[test]
    fn replayed_factor_detected_via_event_digest() {
        let (pk, sk) = toy_keys(18);
        let mut signer_ledger = FactorLedger::in_memory(Clock::Fixed(0));
        let mut rng = ChaCha20Rng::seed_from_u64(19);
        let sig = sign(&sk, &pk, b"m", &mut signer_ledger, &mut rng).unwrap();

        // a ledger that saw the same (key_id, n_j) from someone else
        let mut foreign = FactorLedger::in_memory(Clock::Fixed(0));
        foreign.record(pk.key_id(), sig.n_j()).unwrap();
        assert_eq!(
            verify(&pk, b"m", &sig, Some(&foreign)),
            VerifyOutcome::Reject(RejectReason::ReplayedFactor)
        );
        // the signer's own ledger accepts the same signature
        assert_eq!(verify(&pk, b"m", &sig, Some(&signer_ledger)), VerifyOutcome::Accept);
        // and an unledgered verify accepts too
        assert_eq!(verify(&pk, b"m", &sig, None), VerifyOutcome::Accept);
    }

    #[test]
    fn factorization_choice_properties() {
        let (_, sk) = toy_keys(20);
        let ledger = FactorLedger::in_memory(Clock::Fixed(0));
        let mut rng = ChaCha20Rng::seed_from_u64(21);
        let sixty = BigInt::from(60);
        for _ in 0..200 {
            let (n_i, n_j) = choose_factorization(&sk, &ledger, &mut rng).unwrap();
            assert_eq!(&n_i * &n_j, sixty);
            assert!((&sixty % &n_j).is_zero());
        }
    }

    #[test]
    fn exhaustion_after_twelve_and_rekey() {
        let profile = Profile::toy();
        let (pk, sk) = toy_keys(22);
        let mut ledger = FactorLedger::in_memory(Clock::Fixed(0));
        let mut rng = ChaCha20Rng::seed_from_u64(23);
        let mut seen = std::collections::HashSet::new();
        for i in 0..12 {
            let sig = sign(&sk, &pk, b"m", &mut ledger, &mut rng).unwrap();
            assert!(seen.insert(sig.n_j().clone()), "n_j reused at i={i}");
        }
        assert_eq!(seen.len(), 12);
        let err = sign(&sk, &pk, b"m", &mut ledger, &mut rng).unwrap_err();
        assert!(matches!(err, SchemeError::FactorizationsExhausted));

        // rekey and keep going; old signatures still verify under the old pk
        let (pk2, sk2) = rekey(&sk, pk.descriptor(), &profile, &mut rng).unwrap();
        assert_ne!(pk2.key_id(), pk.key_id());
        let sig = sign(&sk2, &pk2, b"m", &mut ledger, &mut rng).unwrap();
        assert!(verify(&pk2, b"m", &sig, Some(&ledger)).is_accept());
    }

    #[test]
    fn policy_excludes_primes() {
        let profile = Profile::toy();
        let mut rng = ChaCha20Rng::seed_from_u64(24);
        let (_, sk) = setup_with_policy(
            &profile.descriptor(),
            &profile.hash_params(),
            &profile,
            FactorPolicy::permissive().exclude_prime(5),
            &mut rng,
        )
        .unwrap();
        let ledger = FactorLedger::in_memory(Clock::Fixed(0));
        let five = BigInt::from(5);
        for _ in 0..1000 {
            let (_, n_j) = choose_factorization(&sk, &ledger, &mut rng).unwrap();
            assert!(!(&n_j % &five).is_zero(), "drew n_j={n_j} divisible by 5");
        }
        // six divisors of 60 are 5-free: 1, 2, 3, 4, 6, 12
        assert_eq!(admissible_divisors(&sk, &ledger).len(), 6);
    }

    #[test]
    fn policy_exponent_cap_and_max_uses() {
        let profile = Profile::toy();
        let mut rng = ChaCha20Rng::seed_from_u64(25);
        let (pk, sk) = setup_with_policy(
            &profile.descriptor(),
            &profile.hash_params(),
            &profile,
            FactorPolicy::permissive().max_exponent_in_nj(1).max_uses(3),
            &mut rng,
        )
        .unwrap();
        let mut ledger = FactorLedger::in_memory(Clock::Fixed(0));
        // exponent cap 1 kills 4, 12, 20, 60: eight divisors remain
        assert_eq!(admissible_divisors(&sk, &ledger).len(), 8);
        for _ in 0..3 {
            sign(&sk, &pk, b"m", &mut ledger, &mut rng).unwrap();
        }
        // max_uses cuts in before divisors run out
        assert!(matches!(
            sign(&sk, &pk, b"m", &mut ledger, &mut rng).unwrap_err(),
            SchemeError::FactorizationsExhausted
        ));
    }

    #[test]
    fn ledger_write_failure_withholds_signature() {
        let dir = tempfile::tempdir().unwrap();
        let sub = dir.path().join("sub");
        std::fs::create_dir(&sub).unwrap();
        let path = sub.join("l.ledger");
        let mut ledger = FactorLedger::open(&path, Clock::Fixed(0)).unwrap();
        std::fs::remove_dir_all(&sub).unwrap();

        let (pk, sk) = toy_keys(26);
        let mut rng = ChaCha20Rng::seed_from_u64(27);
        let err = sign(&sk, &pk, b"m", &mut ledger, &mut rng).unwrap_err();
        assert!(matches!(err, SchemeError::Ledger(LedgerError::Io(_))));
        assert_eq!(ledger.len(), 0, "failed write must not leave state behind");
    }

    #[test]
    fn key_mismatch_refuses_to_sign() {
        let (pk, _) = toy_keys(28);
        let (_, sk) = toy_keys(29);
        let mut ledger = FactorLedger::in_memory(Clock::Fixed(0));
        let mut rng = ChaCha20Rng::seed_from_u64(30);
        assert!(matches!(
            sign(&sk, &pk, b"m", &mut ledger, &mut rng).unwrap_err(),
            SchemeError::KeyMismatch
        ));
    }

    #[test]
    fn divisor_enumeration() {
        let f60 = vec![
            (BigInt::from(2), 2u32),
            (BigInt::from(3), 1),
            (BigInt::from(5), 1),
        ];
        let divs = divisors(&f60);
        let expect: Vec<BigInt> = [1, 2, 3, 4, 5, 6, 10, 12, 15, 20, 30, 60]
            .iter()
            .map(|&v| BigInt::from(v))
            .collect();
        assert_eq!(divs, expect);
    }

    #[test]
    fn masking_element_first_coordinate_is_uniform() {
        // t⁻¹·s over random t: first coordinate mod 17 must be uniform.
        // The toy box has width exactly 17, so the residue of each sampled
        // coordinate is exactly uniform and the unimodular action preserves
        // that mod 17 — 5σ banding as for random_element.
        let (_, sk) = toy_keys(31);
        let d = Profile::toy().descriptor();
        let mut rng = ChaCha20Rng::seed_from_u64(32);
        let trials = 1000;
        let mut counts = [0i64; 17];
        let seventeen = BigInt::from(17);
        for _ in 0..trials {
            let t = d.random_element(&mut rng);
            let masked = d.multiply(&d.inverse(&t), sk.s());
            let c = &masked.translation()[0];
            let residue = ((c % &seventeen) + &seventeen) % &seventeen;
            let idx: i64 = residue.try_into().unwrap();
            counts[idx as usize] += 1;
        }
        let expected = trials as f64 / 17.0;
        let sigma = (trials as f64 * (1.0 / 17.0) * (16.0 / 17.0)).sqrt();
        for (bucket, &c) in counts.iter().enumerate() {
            assert!(
                (c as f64 - expected).abs() <= 5.0 * sigma,
                "bucket {bucket}: count {c}, expected {expected:.1}"
            );
        }
    }

    #[test]
    fn public_key_round_trip() {
        let (pk, _) = toy_keys(33);
        let bytes = pk.to_bytes();
        assert_eq!(PublicKey::from_bytes(&bytes).unwrap(), pk);
        // hex and binary file wrappers
        assert_eq!(PublicKey::from_file_bytes(&pk.to_file_bytes(false)).unwrap(), pk);
        assert_eq!(PublicKey::from_file_bytes(&pk.to_file_bytes(true)).unwrap(), pk);
    }

    #[test]
    fn private_key_round_trip() {
        let profile = Profile::toy();
        let mut rng = ChaCha20Rng::seed_from_u64(34);
        let (_, sk) = setup_with_policy(
            &profile.descriptor(),
            &profile.hash_params(),
            &profile,
            FactorPolicy::permissive()
                .exclude_prime(5)
                .max_exponent_in_nj(2)
                .max_uses(9),
            &mut rng,
        )
        .unwrap();
        assert_eq!(PrivateKey::from_bytes(&sk.to_bytes()).unwrap(), sk);

        let file = sk.to_file_bytes(false);
        assert!(file.starts_with(PRIVATE_KEY_WARNING.as_bytes()));
        assert_eq!(PrivateKey::from_file_bytes(&file).unwrap(), sk);

        let hex_file = sk.to_file_bytes(true);
        assert!(hex_file.starts_with(PRIVATE_KEY_WARNING.as_bytes()));
        assert_eq!(PrivateKey::from_file_bytes(&hex_file).unwrap(), sk);
    }

    #[test]
    fn signature_round_trip() {
        let (pk, sk) = toy_keys(35);
        let mut ledger = FactorLedger::in_memory(Clock::Fixed(0));
        let mut rng = ChaCha20Rng::seed_from_u64(36);
        let sig = sign(&sk, &pk, b"m", &mut ledger, &mut rng).unwrap();
        assert_eq!(Signature::from_bytes(&sig.to_bytes()).unwrap(), sig);
        assert_eq!(Signature::from_file_bytes(&sig.to_file_bytes(true)).unwrap(), sig);
        assert_eq!(Signature::from_file_bytes(&sig.to_file_bytes(false)).unwrap(), sig);
    }

    #[test]
    fn wrong_record_type_is_rejected() {
        let (pk, sk) = toy_keys(37);
        match PrivateKey::from_bytes(&pk.to_bytes()).unwrap_err() {
            SchemeError::Wire(WireError::UnexpectedRecordType {
                offset: 2,
                expected,
                found,
            }) => {
                assert_eq!(expected, wire::FILE_TYPE_PRIVATE_KEY);
                assert_eq!(found, wire::FILE_TYPE_PUBLIC_KEY);
            }
            other => panic!("unexpected: {other:?}"),
        }
        assert!(PublicKey::from_bytes(&sk.to_bytes()).is_err());
    }

    #[test]
    fn corrupted_key_material_is_rejected() {
        let (pk, _) = toy_keys(38);
        let mut bytes = pk.to_bytes();
        bytes.push(0);
        assert!(matches!(
            PublicKey::from_bytes(&bytes).unwrap_err(),
            SchemeError::Wire(WireError::TrailingBytes { .. })
        ));
        // n inconsistent with its factorization must not load
        let (_, sk) = toy_keys(40);
        let mut parsed = PrivateKey::from_bytes(&sk.to_bytes()).unwrap();
        parsed.n += 1;
        assert!(matches!(
            PrivateKey::from_bytes(&parsed.to_bytes()).unwrap_err(),
            SchemeError::InvalidKeyMaterial { field: "factorization", .. }
        ));
    }

    #[test]
    fn unwrap_file_edge_cases() {
        assert!(matches!(
            PublicKey::from_file_bytes(b"# only a comment\n").unwrap_err(),
            SchemeError::InvalidKeyMaterial { field: "file", .. }
        ));
        assert!(matches!(
            PublicKey::from_file_bytes(b"zz not hex").unwrap_err(),
            SchemeError::InvalidKeyMaterial { field: "file", .. }
        ));
    }

    #[test]
    fn event_digest_binds_key_and_signature() {
        let (pk, sk) = toy_keys(41);
        let mut ledger = FactorLedger::in_memory(Clock::Fixed(0));
        let mut rng = ChaCha20Rng::seed_from_u64(42);
        let sig = sign(&sk, &pk, b"m", &mut ledger, &mut rng).unwrap();
        let d1 = signature_event_digest(pk.key_id(), &sig);
        assert_eq!(d1, signature_event_digest(pk.key_id(), &sig));
        assert_ne!(d1, signature_event_digest(b"other", &sig));
        let other = Signature::new(sig.y().clone(), sig.alpha().clone(), sig.n_j() + 60);
        assert_ne!(d1, signature_event_digest(pk.key_id(), &other));
    }
}
