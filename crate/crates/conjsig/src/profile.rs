//! Named parameter sets.
//!
//! A profile fixes the sampling box, the protocol integer `n` with its
//! factorization, and the hash range. Two forces pull on these numbers:
//!
//! - The divisor count of `n` is the signature budget of one key (each
//!   signature consumes one unused divisor of `n`), so `n` wants to be
//!   highly composite.
//! - Verification raises `y` to the `n_j`-th power, so coordinate sizes grow
//!   linearly in `n · |shift|` bits. `n` in the millions would make a single
//!   verification carry megabyte integers; `n` around 10⁴ keeps worst-case
//!   entries at a few kilobytes.
//!
//! `toy` is for tests and demos (small coordinates, human-readable), `desk`
//! for realistic coordinate sizes at interactive speed, `demo` for
//! larger-margin parameters that are still fast enough to run by hand.

use crate::hashing::HashParams;
use crate::platform::{default_action_rows, PlatformDescriptor};
use num_bigint::BigInt;
use num_traits::One;

/// One named parameter set. Obtain via [`Profile::toy`], [`Profile::desk`],
/// [`Profile::demo`], or [`Profile::by_name`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Profile {
    name: &'static str,
    sample_bound: BigInt,
    protocol_integer: BigInt,
    factorization: Vec<(BigInt, u32)>,
    exponent_bound: BigInt,
    domain_tag: &'static str,
}

fn factored(pairs: &[(u32, u32)]) -> (BigInt, Vec<(BigInt, u32)>) {
    let mut n = BigInt::one();
    let mut factorization = Vec::with_capacity(pairs.len());
    for &(p, e) in pairs {
        n *= BigInt::from(p).pow(e);
        factorization.push((BigInt::from(p), e));
    }
    (n, factorization)
}

impl Profile {
    /// Tiny parameters: box half-width 8, `n = 60 = 2²·3·5` (12 divisors).
    pub fn toy() -> Profile {
        let (n, factorization) = factored(&[(2, 2), (3, 1), (5, 1)]);
        Profile {
            name: "toy",
            sample_bound: BigInt::from(8),
            protocol_integer: n,
            factorization,
            exponent_bound: BigInt::from(8),
            domain_tag: "conjsig-v1:toy",
        }
    }

    /// Working parameters: box half-width 2⁶⁴,
    /// `n = 5040 = 2⁴·3²·5·7` (60 divisors — 60 signatures per key).
    pub fn desk() -> Profile {
        let (n, factorization) = factored(&[(2, 4), (3, 2), (5, 1), (7, 1)]);
        Profile {
            name: "desk",
            sample_bound: BigInt::one() << 64,
            protocol_integer: n,
            factorization,
            exponent_bound: BigInt::one() << 64,
            domain_tag: "conjsig-v1:desk",
        }
    }

    /// Headroom parameters: box half-width 2²⁵⁶,
    /// `n = 55440 = 2⁴·3²·5·7·11` (120 divisors).
    pub fn demo() -> Profile {
        let (n, factorization) = factored(&[(2, 4), (3, 2), (5, 1), (7, 1), (11, 1)]);
        Profile {
            name: "demo",
            sample_bound: BigInt::one() << 256,
            protocol_integer: n,
            factorization,
            exponent_bound: BigInt::one() << 256,
            domain_tag: "conjsig-v1:demo",
        }
    }

    pub fn by_name(name: &str) -> Option<Profile> {
        match name {
            "toy" => Some(Profile::toy()),
            "desk" => Some(Profile::desk()),
            "demo" => Some(Profile::demo()),
            _ => None,
        }
    }

    pub fn names() -> [&'static str; 3] {
        ["toy", "desk", "demo"]
    }

    pub fn name(&self) -> &'static str {
        self.name
    }

    pub fn sample_bound(&self) -> &BigInt {
        &self.sample_bound
    }

    /// The protocol integer `n` signed under; also `∏ p^e` of
    /// [`factorization`](Self::factorization).
    pub fn protocol_integer(&self) -> &BigInt {
        &self.protocol_integer
    }

    pub fn factorization(&self) -> &[(BigInt, u32)] {
        &self.factorization
    }

    pub fn exponent_bound(&self) -> &BigInt {
        &self.exponent_bound
    }

    pub fn domain_tag(&self) -> &'static str {
        self.domain_tag
    }

    /// The default platform at this profile's sampling bound.
    pub fn descriptor(&self) -> PlatformDescriptor {
        PlatformDescriptor::new(&default_action_rows(), self.sample_bound.clone())
            .expect("default action is unimodular and hyperbolic")
    }

    pub fn hash_params(&self) -> HashParams {
        HashParams::new(self.exponent_bound.clone(), self.domain_tag)
            .expect("profile hash parameters are valid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn divisor_count(factorization: &[(BigInt, u32)]) -> u64 {
        factorization.iter().map(|&(_, e)| (e as u64) + 1).product()
    }

    #[test]
    fn profile_integers() {
        let toy = Profile::toy();
        assert_eq!(toy.protocol_integer(), &BigInt::from(60));
        assert_eq!(divisor_count(toy.factorization()), 12);

        let desk = Profile::desk();
        assert_eq!(desk.protocol_integer(), &BigInt::from(5040));
        assert_eq!(divisor_count(desk.factorization()), 60);

        let demo = Profile::demo();
        assert_eq!(demo.protocol_integer(), &BigInt::from(55440));
        assert_eq!(divisor_count(demo.factorization()), 120);

        // the factored form multiplies back exactly
        for p in [toy, desk, demo] {
            let product: BigInt = p
                .factorization()
                .iter()
                .map(|(prime, e)| prime.pow(*e))
                .product();
            assert_eq!(&product, p.protocol_integer(), "profile {}", p.name());
        }
    }

    #[test]
    fn lookup_by_name() {
        for name in Profile::names() {
            let p = Profile::by_name(name).unwrap();
            assert_eq!(p.name(), name);
            // descriptor and hash params construct cleanly
            let d = p.descriptor();
            assert_eq!(d.sample_bound(), p.sample_bound());
            assert_eq!(p.hash_params().exponent_bound(), p.exponent_bound());
        }
        assert!(Profile::by_name("prod").is_none());
        assert!(Profile::by_name("").is_none());
    }

    #[test]
    fn domain_tags_are_distinct() {
        let tags: std::collections::HashSet<_> = Profile::names()
            .iter()
            .map(|n| Profile::by_name(n).unwrap().domain_tag)
            .collect();
        assert_eq!(tags.len(), 3);
    }
}
