//! Arithmetic in `Z_{2^K}` backed by an unsigned machine word.
//!
//! [`RingElem<T, K>`] stores a value reduced modulo `2^K` in the word type `T`.
//! Everything above it in the crate is written against the [`Ring`] trait, so
//! the same protocol code runs over 16, 32 and 48 bit rings as well as the
//! small rings the lifting protocol needs (for instance `Z_{2^15}`).

use std::fmt;
use std::hash::Hash;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Mul, MulAssign, Neg, Sub, SubAssign};

use num_traits::{AsPrimitive, One, PrimInt, Unsigned, WrappingAdd, WrappingMul, WrappingNeg, WrappingSub, Zero};
use rand::RngCore;

/// Unsigned storage word for a ring element.
pub trait Word:
    PrimInt
    + Unsigned
    + WrappingAdd
    + WrappingSub
    + WrappingMul
    + WrappingNeg
    + AsPrimitive<u64>
    + Hash
    + Default
    + fmt::Debug
    + Send
    + Sync
    + 'static
{
    const WORD_BITS: u32;
    fn truncate(v: u64) -> Self;
}

macro_rules! impl_word {
    ($($t:ty),*) => {$(
        impl Word for $t {
            const WORD_BITS: u32 = <$t>::BITS;
            #[inline(always)]
            fn truncate(v: u64) -> Self {
                v as $t
            }
        }
    )*};
}
impl_word!(u8, u16, u32, u64);

/// Operations every sharing ring provides.
pub trait Ring:
    Copy
    + Eq
    + Hash
    + Default
    + fmt::Debug
    + Send
    + Sync
    + 'static
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + Sum
{
    /// Bit width `k` of the modulus `2^k`.
    const BITS: u32;
    /// Serialized width in bytes.
    const BYTES: usize = (Self::BITS as usize).div_ceil(8);

    /// Reduces `v` modulo `2^k`.
    fn from_u64(v: u64) -> Self;
    fn from_i64(v: i64) -> Self {
        Self::from_u64(v as u64)
    }
    fn to_u64(self) -> u64;

    /// Signed interpretation: values `>= 2^(k-1)` are negative.
    fn to_i64(self) -> i64 {
        let v = self.to_u64();
        if self.msb() {
            (v as i64).wrapping_sub(if Self::BITS == 64 { 0 } else { 1i64 << Self::BITS })
        } else {
            v as i64
        }
    }

    fn bit(self, i: u32) -> bool {
        i < Self::BITS && (self.to_u64() >> i) & 1 == 1
    }

    fn msb(self) -> bool {
        self.bit(Self::BITS - 1)
    }

    fn random<G: RngCore + ?Sized>(rng: &mut G) -> Self {
        Self::from_u64(rng.next_u64())
    }

    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_u64().to_le_bytes()[..Self::BYTES]);
    }

    /// Reads `BYTES` little-endian bytes.
    fn read_le(bytes: &[u8]) -> Self {
        let mut buf = [0u8; 8];
        buf[..Self::BYTES].copy_from_slice(&bytes[..Self::BYTES]);
        Self::from_u64(u64::from_le_bytes(buf))
    }
}

/// An element of `Z_{2^K}` stored in `T`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
#[repr(transparent)]
pub struct RingElem<T, const K: u32>(T);

impl<T: Word, const K: u32> RingElem<T, K> {
    const WIDTH_OK: () = assert!(K >= 1 && K <= T::WORD_BITS, "ring width exceeds storage word");

    #[inline(always)]
    fn mask() -> T {
        #[allow(clippy::let_unit_value)]
        let _ = Self::WIDTH_OK;
        if K == T::WORD_BITS {
            T::max_value()
        } else {
            (T::one() << K as usize) - T::one()
        }
    }

    #[inline(always)]
    pub fn new(v: T) -> Self {
        Self(v & Self::mask())
    }

    #[inline(always)]
    pub fn raw(self) -> T {
        self.0
    }
}

impl<T: Word, const K: u32> fmt::Debug for RingElem<T, K> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

impl<T: Word, const K: u32> fmt::Display for RingElem<T, K> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

impl<T: Word, const K: u32> Add for RingElem<T, K> {
    type Output = Self;
    #[inline(always)]
    fn add(self, rhs: Self) -> Self {
        Self::new(self.0.wrapping_add(&rhs.0))
    }
}

impl<T: Word, const K: u32> Sub for RingElem<T, K> {
    type Output = Self;
    #[inline(always)]
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.0.wrapping_sub(&rhs.0))
    }
}

impl<T: Word, const K: u32> Mul for RingElem<T, K> {
    type Output = Self;
    #[inline(always)]
    fn mul(self, rhs: Self) -> Self {
        Self::new(self.0.wrapping_mul(&rhs.0))
    }
}

impl<T: Word, const K: u32> Neg for RingElem<T, K> {
    type Output = Self;
    #[inline(always)]
    fn neg(self) -> Self {
        Self::new(self.0.wrapping_neg())
    }
}

impl<T: Word, const K: u32> AddAssign for RingElem<T, K> {
    #[inline(always)]
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl<T: Word, const K: u32> SubAssign for RingElem<T, K> {
    #[inline(always)]
    fn sub_assign(&mut self, rhs: Self) {
        *self = *self - rhs;
    }
}

impl<T: Word, const K: u32> MulAssign for RingElem<T, K> {
    #[inline(always)]
    fn mul_assign(&mut self, rhs: Self) {
        *self = *self * rhs;
    }
}

impl<T: Word, const K: u32> Sum for RingElem<T, K> {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::zero(), |a, b| a + b)
    }
}

impl<T: Word, const K: u32> Zero for RingElem<T, K> {
    fn zero() -> Self {
        Self(T::zero())
    }
    fn is_zero(&self) -> bool {
        self.0.is_zero()
    }
}

impl<T: Word, const K: u32> One for RingElem<T, K> {
    fn one() -> Self {
        Self::new(T::one())
    }
}

impl<T: Word, const K: u32> Ring for RingElem<T, K> {
    const BITS: u32 = K;

    #[inline(always)]
    fn from_u64(v: u64) -> Self {
        Self::new(T::truncate(v))
    }

    #[inline(always)]
    fn to_u64(self) -> u64 {
        self.0.as_()
    }
}

/// Reinterprets the canonical representative of `x` in a different ring,
/// reducing if the target is narrower.
#[inline]
pub fn recast<A: Ring, B: Ring>(x: A) -> B {
    B::from_u64(x.to_u64())
}

/// Inner product in the ring.
pub fn dot<R: Ring>(a: &[R], b: &[R]) -> R {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(R::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Concatenated little-endian encoding, `R::BYTES` per element.
pub fn encode_slice<R: Ring>(xs: &[R]) -> Vec<u8> {
    let mut out = Vec::with_capacity(xs.len() * R::BYTES);
    for &x in xs {
        x.write_le(&mut out);
    }
    out
}

pub fn decode_slice<R: Ring>(bytes: &[u8]) -> crate::Result<Vec<R>> {
    if !bytes.len().is_multiple_of(R::BYTES) {
        return Err(crate::Error::Format(format!(
            "{} bytes is not a whole number of {}-byte elements",
            bytes.len(),
            R::BYTES
        )));
    }
    Ok(bytes.chunks_exact(R::BYTES).map(R::read_le).collect())
}
