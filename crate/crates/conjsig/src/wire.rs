//! Canonical byte encodings.
//!
//! The element encoding here is normative: message hashing covers these exact
//! bytes, so two implementations that disagree on a single byte will disagree
//! on every signature. Encoding is injective and decoding rejects anything
//! that is not the unique canonical form.
//!
//! Element layout:
//!
//! ```text
//! 0x47 0x45            magic "GE"
//! 0x01                 version
//! u16 BE               dimension n
//! (n + 1) records      translation coordinates, then the shift
//! ```
//!
//! Each integer record is a 4-byte big-endian length followed by the minimal
//! big-endian two's-complement encoding of the value. Zero encodes as an
//! empty record. "Minimal" means no redundant leading `0x00` on non-negative
//! values and no redundant leading `0xFF` on negative values; decoding
//! rejects non-minimal input rather than normalising it.

use num_bigint::BigInt;
use num_traits::Zero;

/// Magic prefix of an encoded group element: `"GE"`.
pub const ELEMENT_MAGIC: [u8; 2] = [0x47, 0x45];
/// Element encoding version.
pub const ELEMENT_VERSION: u8 = 0x01;

/// Magic prefix of key and signature files: `"NS"`.
pub const FILE_MAGIC: [u8; 2] = [0x4e, 0x53];
/// File record type: public key.
pub const FILE_TYPE_PUBLIC_KEY: u8 = 0x01;
/// File record type: private key.
pub const FILE_TYPE_PRIVATE_KEY: u8 = 0x02;
/// File record type: signature.
pub const FILE_TYPE_SIGNATURE: u8 = 0x03;
/// File format version.
pub const FILE_VERSION: u8 = 0x01;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WireError {
    #[error("bad magic at byte {offset}: expected {expected:02x?}, found {found:02x?}")]
    BadMagic {
        offset: usize,
        expected: Vec<u8>,
        found: Vec<u8>,
    },
    #[error("unsupported version {found:#04x} at byte {offset}")]
    UnsupportedVersion { offset: usize, found: u8 },
    #[error("unexpected record type {found:#04x} at byte {offset}, expected {expected:#04x}")]
    UnexpectedRecordType {
        offset: usize,
        expected: u8,
        found: u8,
    },
    /// A length prefix (or fixed-width field) runs past the end of the input.
    #[error("truncated input at byte {offset}: need {needed} more byte(s)")]
    Truncated { offset: usize, needed: usize },
    /// Input continues past the end of a complete encoding.
    #[error("{extra} trailing byte(s) at byte {offset}")]
    TrailingBytes { offset: usize, extra: usize },
    /// An integer record is not the minimal two's-complement form.
    #[error("non-canonical integer encoding at byte {offset}")]
    NonCanonicalInteger { offset: usize },
    /// The encoded dimension does not match the expected platform dimension.
    #[error("dimension mismatch: encoding declares {found}, platform has {expected}")]
    DimensionMismatch { expected: usize, found: usize },
}

/// Minimal big-endian two's-complement bytes of `x`; empty for zero.
pub fn encode_int(x: &BigInt) -> Vec<u8> {
    if x.is_zero() {
        Vec::new()
    } else {
        // `to_signed_bytes_be` is already minimal for non-zero values; the
        // canonical-form tests below pin that assumption.
        x.to_signed_bytes_be()
    }
}

/// Inverse of [`encode_int`]. Rejects non-minimal encodings.
pub fn decode_int(bytes: &[u8]) -> Result<BigInt, WireError> {
    canonical_check(bytes, 0)?;
    if bytes.is_empty() {
        Ok(BigInt::zero())
    } else {
        Ok(BigInt::from_signed_bytes_be(bytes))
    }
}

fn canonical_check(bytes: &[u8], offset: usize) -> Result<(), WireError> {
    let bad = match bytes {
        [] => false,
        [0x00] => true, // zero must be the empty record
        [0x00, next, ..] => *next < 0x80,
        [0xff, next, ..] => *next >= 0x80,
        _ => false,
    };
    if bad {
        Err(WireError::NonCanonicalInteger { offset })
    } else {
        Ok(())
    }
}

/// Append a length-prefixed integer record to `out`.
pub fn put_int(out: &mut Vec<u8>, x: &BigInt) {
    let body = encode_int(x);
    put_bytes(out, &body);
}

/// Append a length-prefixed byte record to `out`.
pub fn put_bytes(out: &mut Vec<u8>, body: &[u8]) {
    let len = u32::try_from(body.len()).expect("record longer than u32::MAX");
    out.extend_from_slice(&len.to_be_bytes());
    out.extend_from_slice(body);
}

/// Sequential decoder that reports the byte offset of the first defect.
pub struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    pub fn offset(&self) -> usize {
        self.pos
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8], WireError> {
        if self.remaining() < n {
            return Err(WireError::Truncated {
                offset: self.pos,
                needed: n - self.remaining(),
            });
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub fn u8(&mut self) -> Result<u8, WireError> {
        Ok(self.take(1)?[0])
    }

    pub fn u16_be(&mut self) -> Result<u16, WireError> {
        let b = self.take(2)?;
        Ok(u16::from_be_bytes([b[0], b[1]]))
    }

    pub fn u32_be(&mut self) -> Result<u32, WireError> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    pub fn u64_be(&mut self) -> Result<u64, WireError> {
        let b = self.take(8)?;
        let mut a = [0u8; 8];
        a.copy_from_slice(b);
        Ok(u64::from_be_bytes(a))
    }

    /// Read a length-prefixed byte record.
    pub fn bytes_record(&mut self) -> Result<&'a [u8], WireError> {
        let len = self.u32_be()? as usize;
        self.take(len)
    }

    /// Read a length-prefixed canonical integer record.
    pub fn int_record(&mut self) -> Result<BigInt, WireError> {
        let start = self.pos + 4;
        let body = self.bytes_record()?;
        canonical_check(body, start)?;
        if body.is_empty() {
            Ok(BigInt::zero())
        } else {
            Ok(BigInt::from_signed_bytes_be(body))
        }
    }

    pub fn expect_magic(&mut self, magic: &[u8]) -> Result<(), WireError> {
        let offset = self.pos;
        let found = self.take(magic.len())?;
        if found != magic {
            return Err(WireError::BadMagic {
                offset,
                expected: magic.to_vec(),
                found: found.to_vec(),
            });
        }
        Ok(())
    }

    pub fn expect_version(&mut self, version: u8) -> Result<(), WireError> {
        let offset = self.pos;
        let found = self.u8()?;
        if found != version {
            return Err(WireError::UnsupportedVersion { offset, found });
        }
        Ok(())
    }

    /// Succeeds only if every input byte has been consumed.
    pub fn finish(&self) -> Result<(), WireError> {
        if self.pos == self.buf.len() {
            Ok(())
        } else {
            Err(WireError::TrailingBytes {
                offset: self.pos,
                extra: self.buf.len() - self.pos,
            })
        }
    }
}

/// Encode `(translation, shift)` in the normative element layout.
pub fn encode_element(translation: &[BigInt], shift: &BigInt) -> Vec<u8> {
    let dim = u16::try_from(translation.len()).expect("dimension must fit in u16");
    let mut out = Vec::with_capacity(5 + 5 * (translation.len() + 1));
    out.extend_from_slice(&ELEMENT_MAGIC);
    out.push(ELEMENT_VERSION);
    out.extend_from_slice(&dim.to_be_bytes());
    for coord in translation {
        put_int(&mut out, coord);
    }
    put_int(&mut out, shift);
    out
}

/// Decode an element encoding, enforcing `expected_dim` when given.
///
/// Returns `(translation, shift)`. The whole input must be consumed.
pub fn decode_element(
    bytes: &[u8],
    expected_dim: Option<usize>,
) -> Result<(Vec<BigInt>, BigInt), WireError> {
    let mut r = Reader::new(bytes);
    let (translation, shift) = read_element(&mut r, expected_dim)?;
    r.finish()?;
    Ok((translation, shift))
}

/// Decode one element from the front of `r`, leaving the rest untouched.
pub fn read_element(
    r: &mut Reader<'_>,
    expected_dim: Option<usize>,
) -> Result<(Vec<BigInt>, BigInt), WireError> {
    r.expect_magic(&ELEMENT_MAGIC)?;
    r.expect_version(ELEMENT_VERSION)?;
    let dim = r.u16_be()? as usize;
    if let Some(expected) = expected_dim {
        if dim != expected {
            return Err(WireError::DimensionMismatch {
                expected,
                found: dim,
            });
        }
    }
    let mut translation = Vec::with_capacity(dim);
    for _ in 0..dim {
        translation.push(r.int_record()?);
    }
    let shift = r.int_record()?;
    Ok((translation, shift))
}
