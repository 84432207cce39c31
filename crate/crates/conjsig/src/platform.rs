//! The platform group `Z^n ⋊_A Z` with exact normal-form arithmetic.
//!
//! An element is a pair `(translation, shift)`; the product
//!
//! ```text
//! (v1, k1) · (v2, k2) = (v1 + A^k1 · v2, k1 + k2)
//! ```
//!
//! keeps every element in normal form, so equality is field-wise comparison.
//! `A` must be unimodular (so the inverse action is again integral) and
//! hyperbolic: some entry of `A^k` must grow without bound, which gives the
//! group exponential growth — the property the whole scheme leans on.

use crate::matrix::{IntMatrix, PowerCache};
use crate::wire::{self, WireError};
use num_bigint::{BigInt, RandBigInt};
use num_traits::{One, Signed, Zero};
use rand::Rng;
use sha2::{Digest, Sha256};
use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;

/// Half-width of the box shifts are sampled from, regardless of the
/// translation bound. The shift of an element becomes a *matrix exponent*
/// under the group law, and coordinate bit-length grows linearly with that
/// exponent, so an element with a 2^64-scale shift would not fit in memory.
/// Translation coordinates carry the descriptor's full `sample_bound`; the
/// shift carries the mixing.
pub const SHIFT_SAMPLE_BOUND: u32 = 8;

/// Elements `g^e` with `|e|` up to this bound count as "trivially commuting"
/// during a centralizer probe.
pub const POWER_COMPARISON_BOUND: u32 = 16;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PlatformError {
    #[error("action matrix must be square and non-empty")]
    MalformedAction,
    #[error("action matrix must have determinant ±1, found {det}")]
    NotUnimodular { det: BigInt },
    #[error("action matrix fails the growth check (no expanding eigenvalue)")]
    GrowthCheckFailed,
    #[error("sample bound must be at least 2, found {bound}")]
    SampleBoundTooSmall { bound: BigInt },
    #[error("element dimension {found} does not match platform dimension {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("centralizer probe requires a non-identity element")]
    IdentityProbe,
}

/// One element of the platform group, in normal form.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct GroupElement {
    translation: Vec<BigInt>,
    shift: BigInt,
}

impl GroupElement {
    pub fn new(translation: Vec<BigInt>, shift: BigInt) -> GroupElement {
        GroupElement { translation, shift }
    }

    pub fn dimension(&self) -> usize {
        self.translation.len()
    }

    pub fn translation(&self) -> &[BigInt] {
        &self.translation
    }

    pub fn shift(&self) -> &BigInt {
        &self.shift
    }

    pub fn is_identity(&self) -> bool {
        self.shift.is_zero() && self.translation.iter().all(Zero::is_zero)
    }

    /// The canonical byte encoding (the map `f`). Injective; feeds both
    /// hashing and the wire formats.
    pub fn encode(&self) -> Vec<u8> {
        wire::encode_element(&self.translation, &self.shift)
    }
}

impl fmt::Display for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "((")?;
        for (i, c) in self.translation.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, "); {})", self.shift)
    }
}

/// Defines one concrete platform group and carries its shared power cache.
///
/// Cloning is cheap: clones share the memoized repeated-squaring chains of
/// the action matrix.
#[derive(Clone)]
pub struct PlatformDescriptor {
    dimension: usize,
    action: IntMatrix,
    sample_bound: BigInt,
    descriptor_id: [u8; 16],
    cache: Arc<PowerCache>,
}

impl PartialEq for PlatformDescriptor {
    fn eq(&self, other: &Self) -> bool {
        self.descriptor_id == other.descriptor_id
    }
}

impl Eq for PlatformDescriptor {}

impl fmt::Debug for PlatformDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PlatformDescriptor")
            .field("dimension", &self.dimension)
            .field("action", &self.action.rows())
            .field("sample_bound", &self.sample_bound)
            .field("descriptor_id", &hex_id(&self.descriptor_id))
            .finish()
    }
}

fn hex_id(id: &[u8]) -> String {
    id.iter().map(|b| format!("{b:02x}")).collect()
}

impl PlatformDescriptor {
    /// Validated constructor: requires a square unimodular action that
    /// passes the growth check, and `sample_bound ≥ 2`.
    pub fn new(action_rows: &[Vec<BigInt>], sample_bound: BigInt) -> Result<Self, PlatformError> {
        let desc = Self::build(action_rows, sample_bound)?;
        desc.validate()?;
        Ok(desc)
    }

    /// Constructor for screening tests and deliberately broken platforms.
    /// Skips the growth and sample-bound checks; the action must still be
    /// square and unimodular because the inverse action is load-bearing.
    pub fn new_unchecked(action_rows: &[Vec<BigInt>], sample_bound: BigInt) -> Self {
        Self::build(action_rows, sample_bound).expect("action must be square and unimodular")
    }

    fn build(action_rows: &[Vec<BigInt>], sample_bound: BigInt) -> Result<Self, PlatformError> {
        let action = IntMatrix::from_rows(action_rows).ok_or(PlatformError::MalformedAction)?;
        let det = action.determinant();
        if det.abs() != BigInt::one() {
            return Err(PlatformError::NotUnimodular { det });
        }
        let inverse = action
            .unimodular_inverse()
            .expect("unimodular matrix has an integer inverse");
        let descriptor_id = Self::compute_id(&action, &sample_bound);
        Ok(PlatformDescriptor {
            dimension: action.dim(),
            cache: Arc::new(PowerCache::new(action.clone(), inverse)),
            action,
            sample_bound,
            descriptor_id,
        })
    }

    /// Re-run the checks that [`new`](Self::new) enforces. Lets callers
    /// screen descriptors built with [`new_unchecked`](Self::new_unchecked).
    pub fn validate(&self) -> Result<(), PlatformError> {
        if self.sample_bound < BigInt::from(2) {
            return Err(PlatformError::SampleBoundTooSmall {
                bound: self.sample_bound.clone(),
            });
        }
        // Hyperbolicity proxy: entries of A^k grow iff A has an eigenvalue
        // of modulus > 1. Comparing A^8 against A^4 catches finite-order
        // and norm-preserving actions (identity, permutations, rotations).
        let p4 = self.action.pow(4).max_abs_entry();
        let p8 = self.action.pow(8).max_abs_entry();
        if p8 <= p4 {
            return Err(PlatformError::GrowthCheckFailed);
        }
        Ok(())
    }

    fn compute_id(action: &IntMatrix, sample_bound: &BigInt) -> [u8; 16] {
        let mut blob = Vec::new();
        blob.extend_from_slice(b"conjsig-descriptor-v1");
        blob.extend_from_slice(&(action.dim() as u16).to_be_bytes());
        for row in action.rows() {
            for entry in row {
                wire::put_int(&mut blob, &entry);
            }
        }
        wire::put_int(&mut blob, sample_bound);
        let digest = Sha256::digest(&blob);
        let mut id = [0u8; 16];
        id.copy_from_slice(&digest[..16]);
        id
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn sample_bound(&self) -> &BigInt {
        &self.sample_bound
    }

    /// The box half-width shifts are actually drawn from:
    /// `min(sample_bound, SHIFT_SAMPLE_BOUND)`.
    pub fn shift_sample_bound(&self) -> BigInt {
        self.sample_bound
            .clone()
            .min(BigInt::from(SHIFT_SAMPLE_BOUND))
    }

    pub fn action_rows(&self) -> Vec<Vec<BigInt>> {
        self.action.rows()
    }

    /// Stable 16-byte identifier of (action, sample_bound); binds keys to
    /// the exact platform they were generated on.
    pub fn descriptor_id(&self) -> &[u8; 16] {
        &self.descriptor_id
    }

    pub fn identity(&self) -> GroupElement {
        GroupElement {
            translation: vec![BigInt::zero(); self.dimension],
            shift: BigInt::zero(),
        }
    }

    fn check_dim(&self, g: &GroupElement) -> Result<(), PlatformError> {
        if g.dimension() == self.dimension {
            Ok(())
        } else {
            Err(PlatformError::DimensionMismatch {
                expected: self.dimension,
                found: g.dimension(),
            })
        }
    }

    /// `a · b`. Panics on dimension mismatch; use
    /// [`try_multiply`](Self::try_multiply) for untrusted elements.
    pub fn multiply(&self, a: &GroupElement, b: &GroupElement) -> GroupElement {
        self.try_multiply(a, b).expect("element dimension mismatch")
    }

    pub fn try_multiply(
        &self,
        a: &GroupElement,
        b: &GroupElement,
    ) -> Result<GroupElement, PlatformError> {
        self.check_dim(a)?;
        self.check_dim(b)?;
        let moved = self.cache.apply_power(&a.shift, &b.translation);
        let translation = a
            .translation
            .iter()
            .zip(moved)
            .map(|(x, y)| x + y)
            .collect();
        Ok(GroupElement {
            translation,
            shift: &a.shift + &b.shift,
        })
    }

    /// `a⁻¹ = (−A^(−k)·v, −k)`.
    pub fn inverse(&self, a: &GroupElement) -> GroupElement {
        self.check_dim(a).expect("element dimension mismatch");
        let neg_shift = -&a.shift;
        let moved = self.cache.apply_power(&neg_shift, &a.translation);
        GroupElement {
            translation: moved.into_iter().map(|c| -c).collect(),
            shift: neg_shift,
        }
    }

    /// `g^h = h⁻¹ · g · h` (conjugation written as exponentiation).
    pub fn conjugate(&self, g: &GroupElement, h: &GroupElement) -> GroupElement {
        let hg = self.multiply(&self.inverse(h), g);
        self.multiply(&hg, h)
    }

    /// `g^e` by square-and-multiply; `e` may be negative, `g^0` is the
    /// identity.
    pub fn power(&self, g: &GroupElement, e: &BigInt) -> GroupElement {
        self.check_dim(g).expect("element dimension mismatch");
        let mag = e.magnitude();
        let mut acc = self.identity();
        if !mag.is_zero() {
            let mut base = g.clone();
            let bits = mag.bits();
            for j in 0..bits {
                if mag.bit(j) {
                    acc = self.multiply(&acc, &base);
                }
                if j + 1 < bits {
                    base = self.multiply(&base, &base);
                }
            }
        }
        if e.is_negative() {
            self.inverse(&acc)
        } else {
            acc
        }
    }

    /// Uniform draw from the sampling box: each translation coordinate from
    /// `[−B, B]`, the shift from `[−min(B, SHIFT_SAMPLE_BOUND), +that]`.
    /// Deterministic for a fixed RNG state.
    pub fn random_element<R: Rng + ?Sized>(&self, rng: &mut R) -> GroupElement {
        let lo = -&self.sample_bound;
        let hi = &self.sample_bound + 1;
        let translation = (0..self.dimension)
            .map(|_| rng.gen_bigint_range(&lo, &hi))
            .collect();
        let ks = self.shift_sample_bound();
        let shift = rng.gen_bigint_range(&-&ks, &(ks + 1));
        GroupElement { translation, shift }
    }

    /// Inverse of [`GroupElement::encode`] with the dimension pinned to this
    /// platform.
    pub fn decode_element(&self, bytes: &[u8]) -> Result<GroupElement, WireError> {
        let (translation, shift) = wire::decode_element(bytes, Some(self.dimension))?;
        Ok(GroupElement { translation, shift })
    }

    /// Draw `samples` random elements and return every one that commutes
    /// with `g` yet is not a small power of `g`. An empty result is evidence
    /// (not proof) that the centralizer of `g` is just `⟨g⟩`.
    pub fn centralizer_probe<R: Rng + ?Sized>(
        &self,
        g: &GroupElement,
        samples: usize,
        rng: &mut R,
    ) -> Result<Vec<GroupElement>, PlatformError> {
        self.check_dim(g)?;
        if g.is_identity() {
            return Err(PlatformError::IdentityProbe);
        }
        let mut known_powers = HashSet::new();
        for e in -(POWER_COMPARISON_BOUND as i64)..=POWER_COMPARISON_BOUND as i64 {
            known_powers.insert(self.power(g, &BigInt::from(e)));
        }
        let mut offenders = Vec::new();
        for _ in 0..samples {
            let h = self.random_element(rng);
            if self.multiply(&h, g) == self.multiply(g, &h) && !known_powers.contains(&h) {
                offenders.push(h);
            }
        }
        Ok(offenders)
    }
}

/// The default action: hyperbolic, unimodular, and as small as such a matrix
/// gets.
pub fn default_action_rows() -> Vec<Vec<BigInt>> {
    vec![
        vec![BigInt::from(2), BigInt::from(1)],
        vec![BigInt::from(1), BigInt::from(1)],
    ]
}
