//! Self-checking attack demonstrations behind a common trait, selected by
//! name at runtime (the CLI's `attack <name>` does exactly that).
//!
//! Each demo stages its scenario from a seed, runs the attack, and emits an
//! [`AttackReport`] of expected-vs-observed assertions, so a demo can fail
//! loudly if the implementation ever drifts from the story it tells.

use super::{
    brute_force_csp, build_reuse_forgery, data_forge_attempt, extract_root,
    extract_root_unchecked, forge_with_reused_factor, AttackError, CspSearch,
    DEFAULT_CSP_BUDGET,
};
use crate::ledger::{Clock, FactorLedger};
use crate::platform::GroupElement;
use crate::profile::Profile;
use crate::scheme::{setup, sign, verify, PrivateKey, PublicKey, Signature, VerifyOutcome};
use num_bigint::BigInt;
use num_traits::One;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use std::fmt;

/// Everything a demo needs to stage itself reproducibly.
#[derive(Clone, Debug)]
pub struct DemoConfig {
    pub profile: Profile,
    pub seed: u64,
}

impl Default for DemoConfig {
    fn default() -> DemoConfig {
        DemoConfig {
            profile: Profile::toy(),
            seed: 0,
        }
    }
}

/// One expected-vs-observed check inside a demo run.
#[derive(Clone, Debug)]
pub struct Assertion {
    pub name: &'static str,
    pub expected: String,
    pub observed: String,
}

impl Assertion {
    fn new(name: &'static str, expected: impl fmt::Display, observed: impl fmt::Display) -> Self {
        Assertion {
            name,
            expected: expected.to_string(),
            observed: observed.to_string(),
        }
    }

    pub fn passed(&self) -> bool {
        self.expected == self.observed
    }
}

/// A demo's transcript: its name, one line of narrative, the assertions.
#[derive(Clone, Debug)]
pub struct AttackReport {
    pub demo: &'static str,
    pub summary: &'static str,
    pub assertions: Vec<Assertion>,
}

impl AttackReport {
    pub fn all_passed(&self) -> bool {
        self.assertions.iter().all(Assertion::passed)
    }
}

impl fmt::Display for AttackReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "demo {}: {}", self.demo, self.summary)?;
        for a in &self.assertions {
            writeln!(
                f,
                "  [{}] {}: expected {}, observed {}",
                if a.passed() { "pass" } else { "FAIL" },
                a.name,
                a.expected,
                a.observed
            )?;
        }
        let passed = self.assertions.iter().filter(|a| a.passed()).count();
        write!(
            f,
            "result: {} ({passed}/{} checks)",
            if self.all_passed() { "PASS" } else { "FAIL" },
            self.assertions.len()
        )
    }
}

/// A named attack demonstration.
pub trait AttackDemo {
    fn name(&self) -> &'static str;
    fn summary(&self) -> &'static str;
    fn run(&self, config: &DemoConfig) -> AttackReport;
}

/// All demos, in presentation order.
pub fn registry() -> Vec<Box<dyn AttackDemo>> {
    vec![
        Box::new(RootExtraction),
        Box::new(ReuseForgery),
        Box::new(MessageTamper),
        Box::new(CspWall),
    ]
}

/// Look a demo up by its registry name.
pub fn find(name: &str) -> Option<Box<dyn AttackDemo>> {
    registry().into_iter().find(|d| d.name() == name)
}

fn stage(config: &DemoConfig) -> (PublicKey, PrivateKey, FactorLedger, ChaCha20Rng) {
    let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
    let (pk, sk) = setup(
        &config.profile.descriptor(),
        &config.profile.hash_params(),
        &config.profile,
        &mut rng,
    )
    .expect("demo profile must support setup");
    (pk, sk, FactorLedger::in_memory(Clock::Fixed(0)), rng)
}

fn outcome_assertion(name: &'static str, expected: VerifyOutcome, observed: VerifyOutcome) -> Assertion {
    Assertion::new(name, expected, observed)
}

struct RootExtraction;

impl AttackDemo for RootExtraction {
    fn name(&self) -> &'static str {
        "root"
    }

    fn summary(&self) -> &'static str {
        "any valid signature hands the verifier an n_j-th root of x"
    }

    fn run(&self, config: &DemoConfig) -> AttackReport {
        let (pk, sk, mut ledger, mut rng) = stage(config);
        let message = b"routine announcement, nothing of value";
        let sig = sign(&sk, &pk, message, &mut ledger, &mut rng).expect("fresh key signs");

        let mut assertions = Vec::new();
        assertions.push(outcome_assertion(
            "honest signature verifies",
            VerifyOutcome::Accept,
            verify(&pk, message, &sig, None),
        ));

        let root = extract_root(&pk, message, &sig).expect("valid signature yields root");
        let desc = pk.descriptor();
        assertions.push(Assertion::new(
            "extracted root powers back to x",
            true,
            &desc.power(&root, sig.n_j()) == pk.x(),
        ));

        // contrapositive: the formula on a broken signature gives junk
        let broken = Signature::new(
            sig.y().clone(),
            desc.multiply(sig.alpha(), &desc.random_element(&mut rng)),
            sig.n_j().clone(),
        );
        let refused = matches!(
            extract_root(&pk, message, &broken),
            Err(AttackError::InvalidSignature { .. })
        );
        assertions.push(Assertion::new("tampered signature refused", true, refused));
        let junk = extract_root_unchecked(&pk, message, &broken);
        assertions.push(Assertion::new(
            "blind formula on tampered input is no root",
            false,
            &desc.power(&junk, sig.n_j()) == pk.x(),
        ));

        AttackReport {
            demo: self.name(),
            summary: self.summary(),
            assertions,
        }
    }
}

struct ReuseForgery;

impl AttackDemo for ReuseForgery {
    fn name(&self) -> &'static str {
        "forge"
    }

    fn summary(&self) -> &'static str {
        "an extracted root re-signs any message under the same n_j; only the ledger notices"
    }

    fn run(&self, config: &DemoConfig) -> AttackReport {
        let (pk, sk, mut ledger, mut rng) = stage(config);
        let original = b"invoice #41: 10 credits";
        let forged = b"invoice #41: 9999 credits";
        let sig = sign(&sk, &pk, original, &mut ledger, &mut rng).expect("fresh key signs");
        let root = extract_root(&pk, original, &sig).expect("valid signature yields root");

        let result = forge_with_reused_factor(&pk, &root, sig.n_j(), forged, &ledger, &mut rng)
            .expect("root matches its own n_j");

        let mut assertions = vec![
            outcome_assertion(
                "forgery without ledger",
                VerifyOutcome::Accept,
                result.raw_verify,
            ),
            outcome_assertion(
                "forgery against the ledger",
                VerifyOutcome::Reject(crate::scheme::RejectReason::ReplayedFactor),
                result.ledgered_verify,
            ),
            outcome_assertion(
                "original signature still ledger-clean",
                VerifyOutcome::Accept,
                verify(&pk, original, &sig, Some(&ledger)),
            ),
        ];

        // a different divisor does not come along for the ride
        let other_n_j = if sig.n_j() == &BigInt::from(2) {
            BigInt::from(3)
        } else {
            BigInt::from(2)
        };
        let transplanted = build_reuse_forgery(&pk, &root, &other_n_j, forged, &mut rng);
        assertions.push(outcome_assertion(
            "root transplanted onto another divisor",
            VerifyOutcome::Reject(crate::scheme::RejectReason::EquationFailed),
            verify(&pk, forged, &transplanted, None),
        ));

        AttackReport {
            demo: self.name(),
            summary: self.summary(),
            assertions,
        }
    }
}

struct MessageTamper;

impl AttackDemo for MessageTamper {
    fn name(&self) -> &'static str {
        "tamper"
    }

    fn summary(&self) -> &'static str {
        "a signature is glued to its message bytes; substitution fails the equation"
    }

    fn run(&self, config: &DemoConfig) -> AttackReport {
        let (pk, sk, mut ledger, mut rng) = stage(config);
        let original = b"ship 10 crates to pier 4".to_vec();
        let sig = sign(&sk, &pk, &original, &mut ledger, &mut rng).expect("fresh key signs");

        let swapped = b"ship 40 crates to pier 1";
        let outcome = data_forge_attempt(&pk, &sig, &original, swapped);
        let mut assertions = vec![
            outcome_assertion(
                "signature on its own message",
                VerifyOutcome::Accept,
                outcome.original,
            ),
            outcome_assertion(
                "signature on substituted message",
                VerifyOutcome::Reject(crate::scheme::RejectReason::EquationFailed),
                outcome.forged,
            ),
        ];

        // flip each bit of one byte: all eight must fail
        let mut rejected = 0;
        for bit in 0..8 {
            let mut flipped = original.clone();
            flipped[5] ^= 1 << bit;
            if !data_forge_attempt(&pk, &sig, &original, &flipped).forged.is_accept() {
                rejected += 1;
            }
        }
        assertions.push(Assertion::new("single-bit flips rejected", "8/8", format!("{rejected}/8")));

        AttackReport {
            demo: self.name(),
            summary: self.summary(),
            assertions,
        }
    }
}

struct CspWall;

impl AttackDemo for CspWall {
    fn name(&self) -> &'static str {
        "csp"
    }

    fn summary(&self) -> &'static str {
        "conjugacy search works in a toy box and is hopeless at real bounds"
    }

    fn run(&self, config: &DemoConfig) -> AttackReport {
        let desc = config.profile.descriptor();
        let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
        let g = desc.random_element(&mut rng);

        // plant a conjugator inside a tiny box and find it again
        let secret = GroupElement::new(vec![BigInt::from(2), BigInt::from(-1)], BigInt::one());
        let x = desc.conjugate(&g, &secret);
        let mut assertions = Vec::new();
        match brute_force_csp(&desc, &g, &x, &BigInt::from(2)) {
            Ok(CspSearch::Found { witness, tested }) => {
                assertions.push(Assertion::new(
                    "planted witness conjugates g to x",
                    true,
                    desc.conjugate(&g, &witness) == x,
                ));
                assertions.push(Assertion::new(
                    "search stayed within the 125-candidate box",
                    true,
                    tested <= 125,
                ));
            }
            other => assertions.push(Assertion::new(
                "planted witness conjugates g to x",
                "found",
                format!("{other:?}"),
            )),
        }

        // shift mismatch ⇒ not conjugate ⇒ the box exhausts
        let off_class = desc.multiply(
            &g,
            &GroupElement::new(vec![BigInt::from(0), BigInt::from(0)], BigInt::one()),
        );
        let exhausted = matches!(
            brute_force_csp(&desc, &g, &off_class, &BigInt::from(2)),
            Ok(CspSearch::ExhaustedBox { tested: 125 })
        );
        assertions.push(Assertion::new(
            "non-conjugate target exhausts the box",
            true,
            exhausted,
        ));

        // a key drawn at realistic bounds has its conjugator far outside any
        // searchable box: the search comes back empty-handed
        let desk = Profile::desk();
        let desk_desc = desk.descriptor();
        let mut desk_rng = ChaCha20Rng::seed_from_u64(config.seed ^ 0xD35C);
        let big_g = desk_desc.random_element(&mut desk_rng);
        let big_x = desk_desc.conjugate(&big_g, &desk_desc.random_element(&mut desk_rng));
        let came_up_empty = matches!(
            brute_force_csp(&desk_desc, &big_g, &big_x, &BigInt::from(2)),
            Ok(CspSearch::ExhaustedBox { .. })
        );
        assertions.push(Assertion::new(
            "desk-scale conjugator lies outside a searchable box",
            true,
            came_up_empty,
        ));

        // the wall: a realistic box refuses up front
        let desk_bound = desk.sample_bound().clone();
        match brute_force_csp(&desc, &g, &x, &desk_bound) {
            Err(AttackError::BudgetExceeded { budget, candidates }) => {
                assertions.push(Assertion::new(
                    "realistic box exceeds the search budget",
                    format!("candidates with 196 bits vs budget {DEFAULT_CSP_BUDGET}"),
                    format!("candidates with {} bits vs budget {budget}", candidates.bits()),
                ));
            }
            other => assertions.push(Assertion::new(
                "realistic box exceeds the search budget",
                "BudgetExceeded",
                format!("{other:?}"),
            )),
        }

        AttackReport {
            demo: self.name(),
            summary: self.summary(),
            assertions,
        }
    }
}
