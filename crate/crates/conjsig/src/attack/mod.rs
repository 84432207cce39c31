//! What an adversary gets out of published material — and what they don't.
//!
//! Every signature `(y, α, n_j)` satisfies `(y^n_j)^α = x^(h·y)`, which
//! rearranges to `x = (y^(α·(h·y)⁻¹))^n_j`: the signature *is* an `n_j`-th
//! root of `x`, extractable by anyone ([`extract_root`]). That root forges
//! arbitrary messages for the *same* `n_j` ([`forge_with_reused_factor`]) —
//! exactly the attack the used-factor ledger exists to stop. What the root
//! does not give is signatures under any other divisor (the platform is
//! torsion-free, so an `n_j`-th root is no `n_j'`-th root), nor the message
//! binding (`h` re-randomizes per message), nor the secrets `g, s` without
//! solving conjugacy ([`brute_force_csp`] shows the search-space wall).
//!
//! [`demos`] packages these as named, self-checking demonstrations.

pub mod demos;

use crate::hashing;
use crate::ledger::FactorLedger;
use crate::platform::{GroupElement, PlatformDescriptor};
use crate::scheme::{verify, PublicKey, RejectReason, Signature, VerifyOutcome};
use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive};
use rand::Rng;

/// Candidate ceiling for [`brute_force_csp`].
pub const DEFAULT_CSP_BUDGET: u64 = 10_000_000;

#[derive(Debug, thiserror::Error)]
pub enum AttackError {
    #[error("signature does not verify ({reason}); it carries no root")]
    InvalidSignature { reason: RejectReason },
    #[error("claimed root does not satisfy root^n_j = x")]
    RootMismatch,
    #[error("box contains {candidates} candidates, over the budget of {budget}")]
    BudgetExceeded { budget: u64, candidates: BigInt },
}

/// Recover the `n_j`-th root of `x` that `sig` necessarily publishes.
///
/// Only a *valid* signature carries a root; an invalid one is refused.
/// The returned `r = y^(α·y⁻¹·h⁻¹)` satisfies `r^n_j = x` by the very
/// equation verification checked.
pub fn extract_root(
    pk: &PublicKey,
    message: &[u8],
    sig: &Signature,
) -> Result<GroupElement, AttackError> {
    match verify(pk, message, sig, None) {
        VerifyOutcome::Accept => Ok(extract_root_unchecked(pk, message, sig)),
        VerifyOutcome::Reject(reason) => Err(AttackError::InvalidSignature { reason }),
    }
}

/// The root formula applied blindly. On a signature that does not verify,
/// the result fails `r^n_j = x` — useful as a negative control.
pub fn extract_root_unchecked(
    pk: &PublicKey,
    message: &[u8],
    sig: &Signature,
) -> GroupElement {
    let desc = pk.descriptor();
    let h = hashing::hash_to_group(message, &sig.y().encode(), desc, pk.hash_params())
        .expect("signature y re-encodes to itself");
    let hy_inv = desc.inverse(&desc.multiply(&h, sig.y()));
    desc.conjugate(sig.y(), &desc.multiply(sig.alpha(), &hy_inv))
}

/// Build the signature a root-holder would publish for `forged_message`
/// under divisor `published_n_j`: conjugate the root away by a random `c`
/// and solve the verification equation for α.
///
/// With `published_n_j` equal to the root's true index the result passes
/// raw verification; with any other divisor it cannot (no torsion), which
/// makes this the negative control too.
pub fn build_reuse_forgery<R: Rng + ?Sized>(
    pk: &PublicKey,
    root: &GroupElement,
    published_n_j: &BigInt,
    forged_message: &[u8],
    rng: &mut R,
) -> Signature {
    let desc = pk.descriptor();
    let c = desc.random_element(rng);
    let y = desc.conjugate(root, &c);
    let h = hashing::hash_to_group(forged_message, &y.encode(), desc, pk.hash_params())
        .expect("freshly encoded element");
    // (y^n)^α = x^(h·y) needs c·α = h·y, as y^n = x^c when root^n = x
    let alpha = desc.multiply(&desc.multiply(&desc.inverse(&c), &h), &y);
    Signature::new(y, alpha, published_n_j.clone())
}

/// Outcome of replaying an extracted root against fresh message content.
#[derive(Clone, Debug)]
pub struct ForgeryResult {
    pub forged_signature: Signature,
    /// Verification without a ledger — the forgery's whole point.
    pub raw_verify: VerifyOutcome,
    /// Verification against the ledger that saw the original signature.
    pub ledgered_verify: VerifyOutcome,
}

/// Forge `forged_message` from an extracted `n_j`-th root and report how
/// both verifier modes receive it. Refuses a root that does not actually
/// power up to `x` (nothing would verify).
pub fn forge_with_reused_factor<R: Rng + ?Sized>(
    pk: &PublicKey,
    root: &GroupElement,
    n_j: &BigInt,
    forged_message: &[u8],
    ledger: &FactorLedger,
    rng: &mut R,
) -> Result<ForgeryResult, AttackError> {
    let desc = pk.descriptor();
    if &desc.power(root, n_j) != pk.x() {
        return Err(AttackError::RootMismatch);
    }
    let forged_signature = build_reuse_forgery(pk, root, n_j, forged_message, rng);
    let raw_verify = verify(pk, forged_message, &forged_signature, None);
    let ledgered_verify = verify(pk, forged_message, &forged_signature, Some(ledger));
    Ok(ForgeryResult {
        forged_signature,
        raw_verify,
        ledgered_verify,
    })
}

/// How one honest signature fares against the message it signed and a
/// substituted one.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TamperOutcome {
    pub original: VerifyOutcome,
    pub forged: VerifyOutcome,
}

/// Replay `sig` against substituted message content.
pub fn data_forge_attempt(
    pk: &PublicKey,
    sig: &Signature,
    original_message: &[u8],
    forged_message: &[u8],
) -> TamperOutcome {
    TamperOutcome {
        original: verify(pk, original_message, sig, None),
        forged: verify(pk, forged_message, sig, None),
    }
}

/// Result of an exhaustive conjugacy search over a coordinate box.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CspSearch {
    /// `g^witness = x`; `tested` candidates were tried before the hit.
    Found { witness: GroupElement, tested: u64 },
    /// No conjugator in the box.
    ExhaustedBox { tested: u64 },
}

/// Exhaustively search the box `[−box_bound, box_bound]^(n+1)` for `w` with
/// `g^w = x`, refusing boxes over [`DEFAULT_CSP_BUDGET`] candidates.
///
/// This is the generic conjugacy attack an adversary without structure
/// runs. The refusal arithmetic is the security statement: at realistic
/// coordinate bounds the candidate count dwarfs any budget.
pub fn brute_force_csp(
    desc: &PlatformDescriptor,
    g: &GroupElement,
    x: &GroupElement,
    box_bound: &BigInt,
) -> Result<CspSearch, AttackError> {
    brute_force_csp_with_budget(desc, g, x, box_bound, DEFAULT_CSP_BUDGET)
}

pub fn brute_force_csp_with_budget(
    desc: &PlatformDescriptor,
    g: &GroupElement,
    x: &GroupElement,
    box_bound: &BigInt,
    budget: u64,
) -> Result<CspSearch, AttackError> {
    assert!(!box_bound.is_negative(), "box bound must be non-negative");
    let digits = desc.dimension() + 1;
    let width = box_bound * BigInt::from(2) + BigInt::from(1);
    let candidates = width.pow(digits as u32);
    if candidates > BigInt::from(budget) {
        return Err(AttackError::BudgetExceeded { budget, candidates });
    }

    // budget check above guarantees these fit
    let b = box_bound.to_i64().expect("bound within budget");
    let mut coords = vec![-b; digits];
    let mut tested = 0u64;
    loop {
        let translation: Vec<BigInt> = coords[..digits - 1]
            .iter()
            .map(|&v| BigInt::from(v))
            .collect();
        let candidate = GroupElement::new(translation, BigInt::from(coords[digits - 1]));
        tested += 1;
        if &desc.conjugate(g, &candidate) == x {
            return Ok(CspSearch::Found {
                witness: candidate,
                tested,
            });
        }
        // lexicographic odometer, last coordinate fastest
        let mut pos = digits;
        loop {
            if pos == 0 {
                return Ok(CspSearch::ExhaustedBox { tested });
            }
            pos -= 1;
            if coords[pos] < b {
                coords[pos] += 1;
                break;
            }
            coords[pos] = -b;
        }
    }
}
