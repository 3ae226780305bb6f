//! The degree-2 Galois ring `Z_{2^k}[X]/(X^2 - X - 1)` and its exceptional
//! sequence.

use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use rand::RngCore;

use crate::error::{Error, Result};
use crate::ring::Ring;

/// `c0 + c1·X` reduced modulo `X^2 - X - 1`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default, Debug)]
pub struct GrElem<R> {
    pub c0: R,
    pub c1: R,
}

impl<R: Ring> GrElem<R> {
    pub fn new(c0: R, c1: R) -> Self {
        Self { c0, c1 }
    }

    pub fn constant(c0: R) -> Self {
        Self { c0, c1: R::zero() }
    }

    pub fn from_u64s(c0: u64, c1: u64) -> Self {
        Self::new(R::from_u64(c0), R::from_u64(c1))
    }

    /// The indeterminate `X`.
    pub fn x() -> Self {
        Self::new(R::zero(), R::one())
    }

    pub fn zero() -> Self {
        Self::constant(R::zero())
    }

    pub fn one() -> Self {
        Self::constant(R::one())
    }

    pub fn random<G: RngCore + ?Sized>(rng: &mut G) -> Self {
        Self::new(R::random(rng), R::random(rng))
    }

    pub fn scale(self, s: R) -> Self {
        Self::new(self.c0 * s, self.c1 * s)
    }

    /// Constant term of `self * rhs`; the only coefficient the dot product needs.
    #[inline(always)]
    pub fn mul_constant_term(self, rhs: Self) -> R {
        self.c0 * rhs.c0 + self.c1 * rhs.c1
    }

    /// A unit projects to a nonzero element of `F_4`, i.e. some coefficient is odd.
    pub fn is_unit(self) -> bool {
        self.c0.bit(0) || self.c1.bit(0)
    }

    /// Multiplicative inverse by Newton iteration from the `F_4` inverse.
    pub fn inverse(self) -> Result<Self> {
        if !self.is_unit() {
            return Err(Error::NonUnit);
        }
        // F_4 = F_2[X]/(X^2 + X + 1): 1 -> 1, X -> X + 1, X + 1 -> X.
        let mut inv = match (self.c0.bit(0), self.c1.bit(0)) {
            (true, false) => Self::one(),
            (false, true) => Self::from_u64s(1, 1),
            _ => Self::x(),
        };
        let two = Self::constant(R::from_u64(2));
        // Each step doubles the number of correct low bits: 1, 2, 4, ... 64.
        for _ in 0..7 {
            if self * inv == Self::one() {
                return Ok(inv);
            }
            inv = inv * (two - self * inv);
        }
        debug_assert_eq!(self * inv, Self::one());
        Ok(inv)
    }
}

impl<R: Ring> Add for GrElem<R> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.c0 + rhs.c0, self.c1 + rhs.c1)
    }
}

impl<R: Ring> Sub for GrElem<R> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.c0 - rhs.c0, self.c1 - rhs.c1)
    }
}

impl<R: Ring> Neg for GrElem<R> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.c0, -self.c1)
    }
}

impl<R: Ring> AddAssign for GrElem<R> {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl<R: Ring> SubAssign for GrElem<R> {
    fn sub_assign(&mut self, rhs: Self) {
        *self = *self - rhs;
    }
}

impl<R: Ring> Mul for GrElem<R> {
    type Output = Self;
    /// `(a0 + a1 X)(b0 + b1 X) = (a0 b0 + a1 b1) + (a0 b1 + a1 b0 + a1 b1) X`
    fn mul(self, rhs: Self) -> Self {
        Self::new(
            self.c0 * rhs.c0 + self.c1 * rhs.c1,
            self.c0 * rhs.c1 + self.c1 * rhs.c0 + self.c1 * rhs.c1,
        )
    }
}

/// Free-function form of ring multiplication.
pub fn gr_mul<R: Ring>(a: GrElem<R>, b: GrElem<R>) -> GrElem<R> {
    a * b
}

pub fn gr_inverse<R: Ring>(a: GrElem<R>) -> Result<GrElem<R>> {
    a.inverse()
}

/// Four evaluation points with pairwise unit differences. Index 0 holds the
/// secret, indices 1..=3 belong to parties 1..=3.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExceptionalSeq<R> {
    pub points: [GrElem<R>; 4],
}

impl<R: Ring> ExceptionalSeq<R> {
    /// `{0, 1, X, 1 + X}`.
    pub fn canonical() -> Self {
        Self {
            points: [
                GrElem::zero(),
                GrElem::one(),
                GrElem::x(),
                GrElem::from_u64s(1, 1),
            ],
        }
    }

    pub fn secret_point(&self) -> GrElem<R> {
        self.points[0]
    }

    /// Evaluation point of party `1..=3`.
    pub fn party_point(&self, party: usize) -> GrElem<R> {
        self.points[party]
    }

    pub fn is_exceptional(&self) -> bool {
        (0..4).all(|i| (0..4).all(|j| i == j || (self.points[i] - self.points[j]).is_unit()))
    }
}

/// Lagrange weights `λ_i = Π_{j≠i} (target - x_j)/(x_i - x_j)` for the holder
/// points (indices into `seq`), so that `Σ λ_i p(x_i) = p(target)` for every
/// polynomial of degree `< holders.len()`.
pub fn lagrange_coeffs<R: Ring>(
    seq: &ExceptionalSeq<R>,
    holders: &[usize],
    target: GrElem<R>,
) -> Result<Vec<GrElem<R>>> {
    holders
        .iter()
        .map(|&i| {
            let xi = seq.points[i];
            holders.iter().filter(|&&j| j != i).try_fold(GrElem::one(), |acc, &j| {
                let xj = seq.points[j];
                Ok(acc * (target - xj) * (xi - xj).inverse()?)
            })
        })
        .collect()
}

/// Weights for reconstructing at 0 from all three parties.
pub fn party_lambdas<R: Ring>() -> [GrElem<R>; 3] {
    let seq = ExceptionalSeq::canonical();
    let l = lagrange_coeffs(&seq, &[1, 2, 3], GrElem::zero()).expect("canonical points are exceptional");
    [l[0], l[1], l[2]]
}

/// Evaluates `Σ coeffs[d] · x^d`.
pub fn eval_poly<R: Ring>(coeffs: &[GrElem<R>], x: GrElem<R>) -> GrElem<R> {
    coeffs.iter().rev().fold(GrElem::zero(), |acc, &c| acc * x + c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{Gr16, Gr32, Z16};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Schoolbook product of two linear polynomials followed by the
    /// substitution X^2 = X + 1, on plain u64 with explicit reduction.
    fn schoolbook(a: (u64, u64), b: (u64, u64)) -> (u64, u64) {
        let m = 1u64 << 16;
        let d0 = a.0 * b.0 % m;
        let d1 = (a.0 * b.1 + a.1 * b.0) % m;
        let d2 = a.1 * b.1 % m;
        ((d0 + d2) % m, (d1 + d2) % m)
    }

    #[test]
    fn mul_example() {
        let p = Gr16::from_u64s(1, 2) * Gr16::from_u64s(3, 4);
        assert_eq!(p, Gr16::from_u64s(11, 18));
        assert_eq!(schoolbook((1, 2), (3, 4)), (11, 18));
    }

    #[test]
    fn zero_annihilates() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let h = Gr16::random(&mut rng);
            assert_eq!(Gr16::zero() * h, Gr16::zero());
        }
    }

    #[test]
    fn mul_agrees_with_schoolbook() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..1000 {
            let a: (u64, u64) = (rng.gen::<u16>() as u64, rng.gen::<u16>() as u64);
            let b: (u64, u64) = (rng.gen::<u16>() as u64, rng.gen::<u16>() as u64);
            let p = Gr16::from_u64s(a.0, a.1) * Gr16::from_u64s(b.0, b.1);
            let want = schoolbook(a, b);
            assert_eq!((p.c0.to_u64(), p.c1.to_u64()), want);
            let ct = Gr16::from_u64s(a.0, a.1).mul_constant_term(Gr16::from_u64s(b.0, b.1));
            assert_eq!(ct.to_u64(), (a.0 * b.0 + a.1 * b.1) % (1 << 16));
        }
    }

    #[test]
    fn inverse_examples() {
        assert_eq!(Gr16::one().inverse().unwrap(), Gr16::one());
        // brute force over a small grid for X's inverse
        let x = Gr16::x();
        let mut found = None;
        for c0 in [0u64, 1, 2, 65534, 65535] {
            for c1 in [0u64, 1, 2, 65534, 65535] {
                if x * Gr16::from_u64s(c0, c1) == Gr16::one() {
                    found = Some(Gr16::from_u64s(c0, c1));
                }
            }
        }
        assert_eq!(found, Some(Gr16::from_u64s(65535, 1)));
        assert_eq!(x.inverse().unwrap(), found.unwrap());
        assert_eq!(Gr16::constant(Z16::from_u64(2)).inverse(), Err(Error::NonUnit));
        assert_eq!(Gr16::from_u64s(2, 4).inverse(), Err(Error::NonUnit));
    }

    #[test]
    fn random_units_invert() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let a = Gr32::random(&mut rng);
            match a.inverse() {
                Ok(inv) => assert_eq!(a * inv, Gr32::one()),
                Err(_) => assert!(!a.is_unit()),
            }
        }
    }

    #[test]
    fn canonical_sequence_is_exceptional() {
        let seq = ExceptionalSeq::<Z16>::canonical();
        assert!(seq.is_exceptional());
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    (seq.points[i] - seq.points[j]).inverse().unwrap();
                }
            }
        }
    }

    #[test]
    fn lagrange_constant_poly() {
        let lambdas = party_lambdas::<Z16>();
        let seven = Gr16::from_u64s(7, 0);
        let sum = lambdas.iter().fold(Gr16::zero(), |acc, &l| acc + l * seven);
        assert_eq!(sum, seven);
    }

    #[test]
    fn lagrange_random_degree_two() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let seq = ExceptionalSeq::canonical();
        let lambdas = party_lambdas::<Z16>();
        for _ in 0..100 {
            let coeffs: Vec<Gr16> = (0..3).map(|_| Gr16::random(&mut rng)).collect();
            let rec = (1..=3).fold(Gr16::zero(), |acc, p| {
                acc + lambdas[p - 1] * eval_poly(&coeffs, seq.party_point(p))
            });
            assert_eq!(rec, coeffs[0]);
        }
    }

    #[test]
    fn lagrange_from_two_points_reconstructs_degree_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let seq = ExceptionalSeq::canonical();
        for holders in [[1, 2], [1, 3], [2, 3]] {
            let l = lagrange_coeffs(&seq, &holders, Gr16::zero()).unwrap();
            let coeffs: Vec<Gr16> = (0..2).map(|_| Gr16::random(&mut rng)).collect();
            let rec = l[0] * eval_poly(&coeffs, seq.points[holders[0]])
                + l[1] * eval_poly(&coeffs, seq.points[holders[1]]);
            assert_eq!(rec, coeffs[0]);
        }
    }
}
