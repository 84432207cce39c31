//! Exact integer matrices for the platform action.
//!
//! Everything here is over `Z` with arbitrary-precision entries. Sizes are
//! tiny (the default platform is 2×2) but the entries are not: applying
//! `A^m` produces entries whose bit-length grows linearly in `m`, which for
//! the exponents this crate uses means kilobytes per entry. The power cache
//! therefore stores repeated squarings of `A` and `A^-1` once per descriptor
//! and applies them to vectors (O(n^2) big-int multiplications per squaring
//! used) instead of materialising `A^m` (O(n^3)).

use num_bigint::{BigInt, Sign};
use num_traits::{One, Signed, Zero};
use std::sync::RwLock;

/// Applying `A^m` needs the squaring chain up to `2^bits(m)`; entries of
/// `A^(2^j)` take O(2^j) bits, so beyond this cap a single power would chew
/// through gigabytes. Exceeding it is a usage error, not recoverable state.
pub(crate) const MAX_ACTION_EXPONENT_BITS: u64 = 28;

/// Dense row-major square matrix over Z.
#[derive(Clone, PartialEq, Eq, Debug)]
pub(crate) struct IntMatrix {
    dim: usize,
    entries: Vec<BigInt>,
}

impl IntMatrix {
    pub fn from_rows(rows: &[Vec<BigInt>]) -> Option<IntMatrix> {
        let dim = rows.len();
        if dim == 0 || rows.iter().any(|r| r.len() != dim) {
            return None;
        }
        Some(IntMatrix {
            dim,
            entries: rows.iter().flatten().cloned().collect(),
        })
    }

    pub fn identity(dim: usize) -> IntMatrix {
        let mut entries = vec![BigInt::zero(); dim * dim];
        for i in 0..dim {
            entries[i * dim + i] = BigInt::one();
        }
        IntMatrix { dim, entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entry(&self, row: usize, col: usize) -> &BigInt {
        &self.entries[row * self.dim + col]
    }

    pub fn rows(&self) -> Vec<Vec<BigInt>> {
        self.entries.chunks(self.dim).map(|c| c.to_vec()).collect()
    }

    pub fn mul(&self, other: &IntMatrix) -> IntMatrix {
        assert_eq!(self.dim, other.dim);
        let n = self.dim;
        let mut entries = vec![BigInt::zero(); n * n];
        for i in 0..n {
            for k in 0..n {
                let a = self.entry(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..n {
                    entries[i * n + j] += a * other.entry(k, j);
                }
            }
        }
        IntMatrix { dim: n, entries }
    }

    pub fn apply(&self, v: &[BigInt]) -> Vec<BigInt> {
        assert_eq!(v.len(), self.dim);
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.entry(i, j) * &v[j]).sum())
            .collect()
    }

    /// Small non-negative power by repeated squaring (used for validation
    /// checks only; protocol powers go through [`PowerCache`]).
    pub fn pow(&self, e: u32) -> IntMatrix {
        let mut acc = IntMatrix::identity(self.dim);
        let mut base = self.clone();
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }

    pub fn max_abs_entry(&self) -> BigInt {
        self.entries
            .iter()
            .map(|e| e.abs())
            .max()
            .expect("matrix is non-empty")
    }

    /// Exact determinant via fraction-free Gaussian elimination (Bareiss).
    pub fn determinant(&self) -> BigInt {
        let n = self.dim;
        let mut m = self.entries.clone();
        let mut sign = BigInt::one();
        let mut prev = BigInt::one();
        for k in 0..n.saturating_sub(1) {
            if m[k * n + k].is_zero() {
                // pivot: find a row below with a non-zero entry in column k
                let Some(swap) = (k + 1..n).find(|&r| !m[r * n + k].is_zero()) else {
                    return BigInt::zero();
                };
                for j in 0..n {
                    m.swap(k * n + j, swap * n + j);
                }
                sign = -sign;
            }
            for i in k + 1..n {
                for j in k + 1..n {
                    let t = &m[i * n + j] * &m[k * n + k] - &m[i * n + k] * &m[k * n + j];
                    m[i * n + j] = &t / &prev; // exact by Bareiss
                }
                m[i * n + k] = BigInt::zero();
            }
            prev = m[k * n + k].clone();
        }
        sign * m[(n - 1) * n + (n - 1)].clone()
    }

    /// Inverse over Z via the adjugate. `None` unless `det` is ±1 (those are
    /// exactly the integer matrices with integer inverses).
    pub fn unimodular_inverse(&self) -> Option<IntMatrix> {
        let det = self.determinant();
        if det.abs() != BigInt::one() {
            return None;
        }
        let n = self.dim;
        let mut entries = vec![BigInt::zero(); n * n];
        for i in 0..n {
            for j in 0..n {
                let minor = self.minor(i, j).determinant();
                let cof = if (i + j) % 2 == 0 { minor } else { -minor };
                // adjugate is the transposed cofactor matrix
                entries[j * n + i] = if det.sign() == Sign::Minus { -cof } else { cof };
            }
        }
        Some(IntMatrix { dim: n, entries })
    }

    fn minor(&self, row: usize, col: usize) -> IntMatrix {
        let n = self.dim;
        assert!(n > 0);
        if n == 1 {
            // stand-in for the empty matrix, whose determinant is 1
            return IntMatrix::identity(1);
        }
        let mut entries = Vec::with_capacity((n - 1) * (n - 1));
        for i in 0..n {
            if i == row {
                continue;
            }
            for j in 0..n {
                if j == col {
                    continue;
                }
                entries.push(self.entry(i, j).clone());
            }
        }
        IntMatrix {
            dim: n - 1,
            entries,
        }
    }

}

/// Shared repeated-squaring chains for one action matrix and its inverse.
///
/// `pos[j] = A^(2^j)`, `neg[j] = A^(-2^j)`; chains grow lazily under a write
/// lock and are shared by all clones of a descriptor.
pub(crate) struct PowerCache {
    pos: RwLock<Vec<IntMatrix>>,
    neg: RwLock<Vec<IntMatrix>>,
}

impl PowerCache {
    pub fn new(action: IntMatrix, inverse: IntMatrix) -> PowerCache {
        PowerCache {
            pos: RwLock::new(vec![action]),
            neg: RwLock::new(vec![inverse]),
        }
    }

    /// `A^m · v` without materialising `A^m`.
    ///
    /// Powers of one matrix commute, so the set bits of `m` can be applied
    /// in any convenient order.
    pub fn apply_power(&self, m: &BigInt, v: &[BigInt]) -> Vec<BigInt> {
        if m.is_zero() {
            return v.to_vec();
        }
        assert!(
            m.bits() <= MAX_ACTION_EXPONENT_BITS,
            "action exponent {m} exceeds the supported magnitude (2^{MAX_ACTION_EXPONENT_BITS}); \
             coordinates at that scale do not fit in memory"
        );
        let chain = if m.sign() == Sign::Minus {
            &self.neg
        } else {
            &self.pos
        };
        let mag = m.magnitude();
        let top_bit = (mag.bits() - 1) as usize;
        self.ensure_len(chain, top_bit + 1);
        let guard = chain.read().expect("power cache poisoned");
        let mut out = v.to_vec();
        for j in 0..=top_bit {
            if mag.bit(j as u64) {
                out = guard[j].apply(&out);
            }
        }
        out
    }

    fn ensure_len(&self, chain: &RwLock<Vec<IntMatrix>>, len: usize) {
        if chain.read().expect("power cache poisoned").len() >= len {
            return;
        }
        let mut guard = chain.write().expect("power cache poisoned");
        while guard.len() < len {
            let last = guard.last().expect("chain starts non-empty");
            let next = last.mul(last);
            guard.push(next);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[i64]]) -> IntMatrix {
        IntMatrix::from_rows(
            &rows
                .iter()
                .map(|r| r.iter().map(|&v| BigInt::from(v)).collect())
                .collect::<Vec<_>>(),
        )
        .unwrap()
    }

    fn v(coords: &[i64]) -> Vec<BigInt> {
        coords.iter().map(|&c| BigInt::from(c)).collect()
    }

    #[test]
    fn determinant_known_values() {
        assert_eq!(m(&[&[2, 1], &[1, 1]]).determinant(), BigInt::from(1));
        assert_eq!(m(&[&[0, 1], &[1, 0]]).determinant(), BigInt::from(-1));
        assert_eq!(m(&[&[2, 0], &[0, 2]]).determinant(), BigInt::from(4));
        assert_eq!(m(&[&[1, 2], &[2, 4]]).determinant(), BigInt::from(0));
        // needs a pivot swap
        assert_eq!(m(&[&[0, 1], &[2, 3]]).determinant(), BigInt::from(-2));
        assert_eq!(
            m(&[&[1, 2, 3], &[4, 5, 6], &[7, 8, 10]]).determinant(),
            BigInt::from(-3)
        );
        // 4x4 with a zero leading pivot, checked against Leibniz expansion
        assert_eq!(
            m(&[
                &[0, 2, 1, 3],
                &[1, 0, 4, 1],
                &[2, 1, 0, 2],
                &[3, 1, 2, 0]
            ])
            .determinant(),
            BigInt::from(-45)
        );
    }

    #[test]
    fn unimodular_inverse_round_trip() {
        let a = m(&[&[2, 1], &[1, 1]]);
        let inv = a.unimodular_inverse().unwrap();
        assert_eq!(inv, m(&[&[1, -1], &[-1, 2]]));
        assert_eq!(a.mul(&inv), IntMatrix::identity(2));
        assert_eq!(inv.mul(&a), IntMatrix::identity(2));

        // det -1 case
        let b = m(&[&[0, 1], &[1, 0]]);
        let binv = b.unimodular_inverse().unwrap();
        assert_eq!(b.mul(&binv), IntMatrix::identity(2));

        // 3x3 unimodular
        let c = m(&[&[1, 1, 0], &[0, 1, 1], &[0, 0, 1]]);
        let cinv = c.unimodular_inverse().unwrap();
        assert_eq!(c.mul(&cinv), IntMatrix::identity(3));

        assert!(m(&[&[2, 0], &[0, 2]]).unimodular_inverse().is_none());
        assert!(m(&[&[1, 2], &[2, 4]]).unimodular_inverse().is_none());
    }

    #[test]
    fn pow_matches_iterated_mul() {
        let a = m(&[&[2, 1], &[1, 1]]);
        let mut acc = IntMatrix::identity(2);
        for e in 0..12u32 {
            assert_eq!(a.pow(e), acc, "e={e}");
            acc = acc.mul(&a);
        }
    }

    #[test]
    fn apply_power_matches_materialised_matrix() {
        let a = m(&[&[2, 1], &[1, 1]]);
        let inv = a.unimodular_inverse().unwrap();
        let cache = PowerCache::new(a.clone(), inv.clone());
        let x = v(&[3, -5]);
        for e in 0..30i64 {
            let expect = a.pow(e as u32).apply(&x);
            assert_eq!(cache.apply_power(&BigInt::from(e), &x), expect, "e={e}");
            let expect_neg = inv.pow(e as u32).apply(&x);
            assert_eq!(
                cache.apply_power(&BigInt::from(-e), &x),
                expect_neg,
                "e=-{e}"
            );
        }
    }

    #[test]
    fn apply_power_zero_is_identity() {
        let a = m(&[&[2, 1], &[1, 1]]);
        let cache = PowerCache::new(a.clone(), a.unimodular_inverse().unwrap());
        assert_eq!(cache.apply_power(&BigInt::zero(), &v(&[7, 9])), v(&[7, 9]));
    }

    #[test]
    #[should_panic(expected = "exceeds the supported magnitude")]
    fn apply_power_rejects_absurd_exponents() {
        let a = m(&[&[2, 1], &[1, 1]]);
        let cache = PowerCache::new(a.clone(), a.unimodular_inverse().unwrap());
        let huge = BigInt::from(1u8) << 40;
        cache.apply_power(&huge, &v(&[1, 0]));
    }
}
