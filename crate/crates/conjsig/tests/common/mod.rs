//! Shared fixtures for the integration suites: hex helpers and the frozen
//! golden vectors that pin every serialization format and the full signing
//! pipeline to exact bytes.
//!
//! The vectors were produced once by the `print_golden_vectors` test in
//! `golden.rs` and must never change silently: any diff here is a wire or
//! protocol break.

#![allow(dead_code)]

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn unhex(text: &str) -> Vec<u8> {
    assert!(text.len() % 2 == 0, "odd hex length");
    (0..text.len())
        .step_by(2)
        .map(|i| u8::from_str_radix(&text[i..i + 2], 16).unwrap())
        .collect()
}

/// Seed for the frozen key pair (toy profile).
pub const GOLDEN_KEY_SEED: u64 = 42;
/// Seed for the frozen signature's signing RNG.
pub const GOLDEN_SIGN_SEED: u64 = 43;
/// Message under the frozen signature.
pub const GOLDEN_MESSAGE: &[u8] = b"golden vector message";

/// `f(identity)` at dimension 2.
pub const GOLDEN_F_IDENTITY: &str = "4745010002000000000000000000000000";
/// `f(((1, -1); 2))`.
pub const GOLDEN_F_SAMPLE: &str = "4745010002000000010100000001ff0000000102";
/// `f(((9, -128); -5))` — exercises sign-boundary minimal encodings.
pub const GOLDEN_F_BOUNDARY: &str = "47450100020000000109000000018000000001fb";

/// `H("abc" || f(identity))` under toy parameters: translation then shift,
/// decimal.
pub const GOLDEN_H_ABC_TOY: [&str; 3] = ["-6", "-8", "-4"];
/// `H("" || f(((3, -4); 1)))` under desk parameters.
pub const GOLDEN_H_EMPTY_DESK: [&str; 3] = [
    "16767384014218692623",
    "-7336212420397747163",
    "-8",
];
/// `expand_digest(0x00 * 32, 4, 8)`, decimal.
pub const GOLDEN_EXPAND_ZERO: [&str; 4] = ["0", "-8", "-6", "-3"];

/// Toy public key generated from `GOLDEN_KEY_SEED`.
pub const GOLDEN_PK_HEX: &str = "4e530101000000101f5994ea5dcc3293362fda9e68e264070002000000010200000001010000000101000000010100000001080100000001080000000e636f6e6a7369672d76313a746f79474501000200000053fa5e717e947292a2719c64650d94de361c260389e4c34248fcb0a66baf7c4ffb4a7e92f5df599d7dea89eb1a755c3e688d3c461da2c21b4c738f1e9bb6fe36eee4fa8f238ef01d38b15cabc57a05ae8a3e600000000053091c7cd85aa4c2bc7fab5bc050937638010b443448677a1196756a59232452f538a195e419b8f56109c7d8565c9dee441427d16fc8dcf81b2822433875c0d05c3e5470e95c87ae5db4ac753064cf4d4b98b28000000002fe20";
/// Matching private key.
pub const GOLDEN_SK_HEX: &str = "4e530201000000101f5994ea5dcc3293362fda9e68e2640747450100020000000108000000010500000001f8474501000200000001fc000000010500000001f9000000013c00000003000000010200000002000000010300000001000000010500000001000000000000";
/// Signature over `GOLDEN_MESSAGE` with `GOLDEN_SIGN_SEED` and an empty
/// ledger.
pub const GOLDEN_SIG_HEX: &str = "4e53030147450100020000000a03027907ec24726cb4000000000afb21594ed5ec0391600000000001d047450100020000000c20a2b557a71cdde7dab8190e0000000ccb31cc42bc64b8ca733ff3a000000001c2000000010a";
