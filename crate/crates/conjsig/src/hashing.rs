//! Hash-to-group: the map `H` taking `m || f(y)` to a group element.
//!
//! Construction: one SHA-256 digest over `domain_tag || message || y_encoded`,
//! then counter-mode expansion `SHA-256(D || BE32(i))` for `i = 0, 1, 2, …`
//! provides an unbounded deterministic byte stream. Each output integer is
//! drawn from 16 oversampled bytes beyond the width of its target range, so
//! the modular-reduction bias is below 2⁻¹²⁸.
//!
//! The element encoding `f` is prefix-free, so `m || f(y)` is unambiguous
//! without extra framing; the domain tag pins the protocol version.

use crate::platform::{GroupElement, PlatformDescriptor, SHIFT_SAMPLE_BOUND};
use crate::wire::WireError;
use num_bigint::{BigInt, BigUint};
use num_traits::{Signed, ToPrimitive};
use sha2::{Digest, Sha256};

/// The only digest algorithm this version speaks: SHA-256.
pub const DIGEST_SHA256: u8 = 0x01;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum HashError {
    #[error("unsupported digest algorithm id {id:#04x}")]
    UnsupportedDigest { id: u8 },
    #[error("exponent bound must be at least 2, found {bound}")]
    ExponentBoundTooSmall { bound: BigInt },
    #[error("domain tag must be non-empty")]
    EmptyDomainTag,
    #[error("malformed element encoding: {0}")]
    MalformedElement(#[from] WireError),
}

/// Parameters of `H`: digest choice, output coordinate range, domain tag.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HashParams {
    digest_algorithm_id: u8,
    exponent_bound: BigInt,
    domain_tag: Vec<u8>,
}

impl HashParams {
    /// `exponent_bound` is the half-width of the output coordinate range;
    /// must be ≥ 2. The domain tag must be non-empty.
    pub fn new(exponent_bound: BigInt, domain_tag: impl Into<Vec<u8>>) -> Result<Self, HashError> {
        let domain_tag = domain_tag.into();
        if exponent_bound < BigInt::from(2) {
            return Err(HashError::ExponentBoundTooSmall {
                bound: exponent_bound,
            });
        }
        if domain_tag.is_empty() {
            return Err(HashError::EmptyDomainTag);
        }
        Ok(HashParams {
            digest_algorithm_id: DIGEST_SHA256,
            exponent_bound,
            domain_tag,
        })
    }

    pub fn digest_algorithm_id(&self) -> u8 {
        self.digest_algorithm_id
    }

    pub fn exponent_bound(&self) -> &BigInt {
        &self.exponent_bound
    }

    pub fn domain_tag(&self) -> &[u8] {
        &self.domain_tag
    }

    /// Half-width of the range the *shift* coordinate is drawn from:
    /// `min(exponent_bound, SHIFT_SAMPLE_BOUND)`. The hash output gets
    /// multiplied into protocol elements, so its shift must stay small for
    /// the same reason sampled shifts do.
    pub fn shift_bound(&self) -> BigInt {
        self.exponent_bound
            .clone()
            .min(BigInt::from(SHIFT_SAMPLE_BOUND))
    }
}

/// Deterministic byte stream: `SHA-256(prefix || BE32(counter))` blocks.
struct CounterStream {
    prefix: Vec<u8>,
    counter: u32,
    block: [u8; 32],
    used: usize,
}

impl CounterStream {
    fn new(prefix: &[u8]) -> CounterStream {
        CounterStream {
            prefix: prefix.to_vec(),
            counter: 0,
            block: [0u8; 32],
            used: 32, // force a first block
        }
    }

    fn fill(&mut self, out: &mut [u8]) {
        let mut written = 0;
        while written < out.len() {
            if self.used == 32 {
                let mut h = Sha256::new();
                h.update(&self.prefix);
                h.update(self.counter.to_be_bytes());
                self.block = h.finalize().into();
                self.counter = self.counter.checked_add(1).expect("stream exhausted");
                self.used = 0;
            }
            let take = (out.len() - written).min(32 - self.used);
            out[written..written + take].copy_from_slice(&self.block[self.used..self.used + take]);
            written += take;
            self.used += take;
        }
    }

    /// One integer uniform (up to 2⁻¹²⁸ bias) in `[−bound, bound]`.
    fn draw(&mut self, bound: &BigInt) -> BigInt {
        assert!(!bound.is_negative(), "draw bound must be non-negative");
        let width: BigUint = (bound * BigInt::from(2) + BigInt::from(1))
            .to_biguint()
            .expect("width is positive");
        let nbytes = width.bits().div_ceil(8).to_usize().unwrap() + 16;
        let mut buf = vec![0u8; nbytes];
        self.fill(&mut buf);
        BigInt::from(BigUint::from_bytes_be(&buf) % width) - bound
    }
}

/// Expand a digest into `count` integers in `[−bound, bound]`.
///
/// Deterministic in all arguments. `digest` must be non-empty.
pub fn expand_digest(digest: &[u8], count: usize, bound: &BigInt) -> Vec<BigInt> {
    assert!(!digest.is_empty(), "digest must be non-empty");
    let mut stream = CounterStream::new(digest);
    (0..count).map(|_| stream.draw(bound)).collect()
}

/// `H(m || f(y))`: digest `domain_tag || message || y_encoded`, then expand
/// into a group element of `desc`'s dimension.
///
/// Translation coordinates land in `[−exponent_bound, exponent_bound]`; the
/// shift lands in the smaller box given by [`HashParams::shift_bound`].
pub fn hash_to_group(
    message: &[u8],
    y_encoded: &[u8],
    desc: &PlatformDescriptor,
    params: &HashParams,
) -> Result<GroupElement, HashError> {
    desc.decode_element(y_encoded)?;
    let mut h = Sha256::new();
    h.update(&params.domain_tag);
    h.update(message);
    h.update(y_encoded);
    let digest = h.finalize();
    let mut stream = CounterStream::new(&digest);
    let translation = (0..desc.dimension())
        .map(|_| stream.draw(&params.exponent_bound))
        .collect();
    let shift = stream.draw(&params.shift_bound());
    Ok(GroupElement::new(translation, shift))
}
