//! Three-party replicated secret sharing over `Z_{2^k}`.
//!
//! Party `i` holds `(x_i, x_{i-1})` with `x = x_1 + x_2 + x_3`. Products are
//! computed locally into a three-way additive sharing and turned back into a
//! replicated one by a reshare: mask with a zero share, send the own
//! component to the next party.

use std::ops::{Add, AddAssign, Neg, Sub, SubAssign};

use rand::RngCore;

use crate::error::{Error, Result};
use crate::party::{Disclosure, Party};
use crate::ring::{decode_slice, encode_slice, Ring};
use crate::transport::PartyId;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct RepShare<R> {
    pub own: R,
    pub prev: R,
}

impl<R: Ring> RepShare<R> {
    pub fn new(own: R, prev: R) -> Self {
        Self { own, prev }
    }

    pub fn zero() -> Self {
        Self::new(R::zero(), R::zero())
    }

    pub fn scale(self, c: R) -> Self {
        Self::new(self.own * c, self.prev * c)
    }

    /// Adds a public constant, placed into the component `x_1`.
    pub fn add_public(self, c: R, me: PartyId) -> Self {
        self + inp_local(c, PartyId::P1, me)
    }

    /// `x'_i = x_i + x_{i-1}`, the form used by the dot product.
    pub fn prep(self) -> PrepShare<R> {
        PrepShare {
            own_sum: self.own + self.prev,
            prev: self.prev,
        }
    }
}

impl<R: Ring> Add for RepShare<R> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.own + o.own, self.prev + o.prev)
    }
}

impl<R: Ring> Sub for RepShare<R> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.own - o.own, self.prev - o.prev)
    }
}

impl<R: Ring> Neg for RepShare<R> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.own, -self.prev)
    }
}

impl<R: Ring> AddAssign for RepShare<R> {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<R: Ring> SubAssign for RepShare<R> {
    fn sub_assign(&mut self, o: Self) {
        *self = *self - o;
    }
}

/// Preprocessed share `(x_i + x_{i-1}, x_{i-1})`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct PrepShare<R> {
    pub own_sum: R,
    pub prev: R,
}

impl<R: Ring> PrepShare<R> {
    pub fn unprep(self) -> RepShare<R> {
        RepShare::new(self.own_sum - self.prev, self.prev)
    }
}

/// Fresh uniform sharing of `x`, indexed by party.
pub fn share<R: Ring, G: RngCore + ?Sized>(x: R, rng: &mut G) -> [RepShare<R>; 3] {
    let x1 = R::random(rng);
    let x2 = R::random(rng);
    let x3 = x - x1 - x2;
    let c = [x1, x2, x3];
    PartyId::ALL.map(|p| RepShare::new(c[p.idx()], c[p.prev().idx()]))
}

pub fn share_vec<R: Ring, G: RngCore + ?Sized>(xs: &[R], rng: &mut G) -> [Vec<RepShare<R>>; 3] {
    let mut out: [Vec<RepShare<R>>; 3] = Default::default();
    for &x in xs {
        for (o, s) in out.iter_mut().zip(share(x, rng)) {
            o.push(s);
        }
    }
    out
}

/// Party `me`'s share of a value `x` known to `holder` and `holder + 1`:
/// `x_holder = x`, the other components zero.
pub fn inp_local<R: Ring>(x: R, holder: PartyId, me: PartyId) -> RepShare<R> {
    if me == holder {
        RepShare::new(x, R::zero())
    } else if me == holder.next() {
        RepShare::new(R::zero(), x)
    } else {
        RepShare::zero()
    }
}

/// Opens a value from all three shares, checking that each party's `prev`
/// equals its predecessor's `own`.
pub fn reconstruct<R: Ring>(shares: &[RepShare<R>; 3]) -> Result<R> {
    for p in PartyId::ALL {
        if shares[p.idx()].prev != shares[p.prev().idx()].own {
            return Err(Error::InconsistentShare);
        }
    }
    Ok(shares[0].own + shares[1].own + shares[2].own)
}

pub fn reconstruct_vec<R: Ring>(shares: &[Vec<RepShare<R>>; 3]) -> Result<Vec<R>> {
    if shares[1].len() != shares[0].len() || shares[2].len() != shares[0].len() {
        return Err(Error::InconsistentShare);
    }
    (0..shares[0].len())
        .map(|j| reconstruct(&[shares[0][j], shares[1][j], shares[2][j]]))
        .collect()
}

/// Local part of a product: `x_i·y_i + x_{i-1}·y_i + x_i·y_{i-1}`.
pub fn mul_local<R: Ring>(x: RepShare<R>, y: RepShare<R>) -> R {
    x.own * y.own + x.prev * y.own + x.own * y.prev
}

/// Converts a three-way additive sharing into a replicated one, masking
/// with a fresh zero share. One element per party, one round.
pub fn reshare<R: Ring>(p: &mut Party, z: Vec<R>) -> Result<Vec<RepShare<R>>> {
    let r = p.prf.zero_share::<R>(z.len());
    let own: Vec<R> = z.into_iter().zip(r).map(|(a, b)| a + b).collect();
    let prev = decode_slice::<R>(&p.pass_to_next(encode_slice(&own))?)?;
    if prev.len() != own.len() {
        return Err(Error::Transport("reshare length mismatch".into()));
    }
    Ok(own.into_iter().zip(prev).map(|(o, v)| RepShare::new(o, v)).collect())
}

pub fn mul_reshare<R: Ring>(p: &mut Party, xs: &[RepShare<R>], ys: &[RepShare<R>]) -> Result<Vec<RepShare<R>>> {
    assert_eq!(xs.len(), ys.len());
    let z = xs.iter().zip(ys).map(|(&x, &y)| mul_local(x, y)).collect();
    reshare(p, z)
}

/// `Σ x'_i·y'_i - Σ x'_{i-1}·y'_{i-1}`: two plain dot products, `2·len`
/// multiply-accumulates.
pub fn dot_local<R: Ring>(p: &mut Party, xs: &[PrepShare<R>], ys: &[PrepShare<R>]) -> R {
    assert_eq!(xs.len(), ys.len());
    p.counters.macs += 2 * xs.len() as u64;
    let mut a = R::zero();
    let mut b = R::zero();
    for (x, y) in xs.iter().zip(ys) {
        a += x.own_sum * y.own_sum;
        b += x.prev * y.prev;
    }
    a - b
}

/// Shared inner product; communication is one reshared element regardless
/// of the length.
pub fn dot_product<R: Ring>(p: &mut Party, xs: &[PrepShare<R>], ys: &[RepShare<R>]) -> Result<RepShare<R>> {
    let yp: Vec<PrepShare<R>> = ys.iter().map(|y| y.prep()).collect();
    let z = dot_local(p, xs, &yp);
    Ok(reshare(p, vec![z])?[0])
}

/// Opens to every party. Each party sends its own component to the previous
/// one, which lacks it.
pub fn open<R: Ring>(p: &mut Party, xs: &[RepShare<R>], disclosure: Disclosure) -> Result<Vec<R>> {
    p.authorize_open(disclosure, xs.len())?;
    let own: Vec<R> = xs.iter().map(|x| x.own).collect();
    p.net.send(p.id().prev(), encode_slice(&own))?;
    let missing = decode_slice::<R>(&p.net.recv(p.id().next())?)?;
    p.net.round_barrier();
    if missing.len() != xs.len() {
        return Err(Error::Transport("open length mismatch".into()));
    }
    Ok(xs.iter().zip(missing).map(|(x, m)| x.own + x.prev + m).collect())
}

/// Opens to `target` only. Both other parties send the component `target`
/// lacks, so it can cross-check them. Non-targets return `None`.
pub fn open_to<R: Ring>(
    p: &mut Party,
    xs: &[RepShare<R>],
    target: PartyId,
    disclosure: Disclosure,
) -> Result<Option<Vec<R>>> {
    p.authorize_open(disclosure, xs.len())?;
    let me = p.id();
    if me == target {
        let a = decode_slice::<R>(&p.net.recv(me.next())?)?;
        let b = decode_slice::<R>(&p.net.recv(me.prev())?)?;
        p.net.round_barrier();
        if a != b || a.len() != xs.len() {
            return Err(Error::InconsistentShare);
        }
        Ok(Some(xs.iter().zip(a).map(|(x, m)| x.own + x.prev + m).collect()))
    } else {
        // target + 1 holds x_{target+1} as own, target - 1 holds it as prev.
        let missing: Vec<R> = if me == target.next() {
            xs.iter().map(|x| x.own).collect()
        } else {
            xs.iter().map(|x| x.prev).collect()
        };
        p.net.send(target, encode_slice(&missing))?;
        p.net.round_barrier();
        Ok(None)
    }
}
