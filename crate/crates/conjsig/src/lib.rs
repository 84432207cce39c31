//! Digital signatures from conjugacy search in an infinite polycyclic group.
//!
//! The platform is the semidirect product `Z^n ⋊_A Z` for a fixed hyperbolic
//! integer matrix `A` with determinant ±1. Elements are pairs
//! `(translation, shift)` with the product
//!
//! ```text
//! (v1, k1) · (v2, k2) = (v1 + A^k1 · v2, k1 + k2)
//! ```
//!
//! All arithmetic is exact: coordinates are arbitrary-precision integers and
//! every element is kept in this normal form, so equality is plain coordinate
//! comparison. Coordinate growth under mixing is exponential in the shift
//! magnitudes involved — that growth is what the scheme leans on, and it is
//! also why the sampling profiles in [`profile`] keep shifts small.
//!
//! Modules:
//! - [`platform`]: the group itself (descriptor, elements, multiply, inverse,
//!   conjugation, powers, sampling).
//! - [`wire`]: canonical byte encodings. The element encoding is normative:
//!   hashing and signatures are defined over these exact bytes.
//! - [`hashing`]: deterministic hash-to-group used to bind messages to
//!   elements.
//! - [`profile`]: named parameter sets (`toy`, `desk`, `demo`).
//! - [`scheme`]: key generation, signing, verification, re-keying.
//! - [`ledger`]: the append-only used-factor ledger that makes factor reuse
//!   detectable.
//! - [`attack`]: constructive attacks against the scheme (root extraction,
//!   reuse forgery, data tampering, brute-force conjugacy search) plus
//!   runnable demos.

pub mod attack;
pub mod hashing;
pub mod ledger;
pub mod platform;
pub mod profile;
pub mod scheme;
pub mod wire;

mod matrix;

pub use platform::{GroupElement, PlatformDescriptor};
