//! Replicated XOR sharing over packed bit lanes and the adder circuits built
//! on it.
//!
//! A [`BitRepShare`] holds one bit per lane for many independent values, 64
//! lanes per word, so every gate of a circuit is evaluated for the whole
//! batch with a single message per round. Bits above the lane count in the
//! last word are kept zero.

use std::ops::Range;

use bitvec::prelude::*;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::party::{Disclosure, Party};
use crate::replicated::RepShare;
use crate::ring::Ring;
use crate::transport::{CommLedger, PartyId};

fn words_for(lanes: usize) -> usize {
    lanes.div_ceil(64)
}

fn clear_tail(words: &mut [u64], lanes: usize) {
    if !lanes.is_multiple_of(64) {
        if let Some(last) = words.last_mut() {
            *last &= (1u64 << (lanes % 64)) - 1;
        }
    }
}

fn words_to_bytes(words: &[u64]) -> Vec<u8> {
    words.iter().flat_map(|w| w.to_le_bytes()).collect()
}

fn bytes_to_words(bytes: &[u8]) -> Result<Vec<u64>> {
    if !bytes.len().is_multiple_of(8) {
        return Err(Error::Format("bit payload is not word aligned".into()));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

fn lane_slice(words: &[u64], r: Range<usize>) -> Vec<u64> {
    let mut out: Vec<u64> = (0..words_for(r.len()))
        .map(|k| {
            let start = r.start + 64 * k;
            let (w, sh) = (start / 64, start % 64);
            let lo = words[w] >> sh;
            let hi = if sh > 0 { words.get(w + 1).map_or(0, |x| x << (64 - sh)) } else { 0 };
            lo | hi
        })
        .collect();
    clear_tail(&mut out, r.len());
    out
}

/// Party's share of a packed bit vector: `(x_i, x_{i-1})` per lane.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BitRepShare {
    pub own: Vec<u64>,
    pub prev: Vec<u64>,
    lanes: usize,
}

impl BitRepShare {
    pub fn zeros(lanes: usize) -> Self {
        Self {
            own: vec![0; words_for(lanes)],
            prev: vec![0; words_for(lanes)],
            lanes,
        }
    }

    pub fn from_words(mut own: Vec<u64>, mut prev: Vec<u64>, lanes: usize) -> Self {
        assert_eq!(own.len(), words_for(lanes));
        assert_eq!(prev.len(), words_for(lanes));
        clear_tail(&mut own, lanes);
        clear_tail(&mut prev, lanes);
        Self { own, prev, lanes }
    }

    pub fn lanes(&self) -> usize {
        self.lanes
    }

    pub fn words(&self) -> usize {
        self.own.len()
    }

    pub fn xor(&self, o: &Self) -> Self {
        assert_eq!(self.lanes, o.lanes);
        Self {
            own: self.own.iter().zip(&o.own).map(|(a, b)| a ^ b).collect(),
            prev: self.prev.iter().zip(&o.prev).map(|(a, b)| a ^ b).collect(),
            lanes: self.lanes,
        }
    }

    /// Flips every lane by complementing the component `x_1`.
    pub fn not(&self, me: PartyId) -> Self {
        let mut out = self.clone();
        let target = match me {
            PartyId::P1 => &mut out.own,
            PartyId::P2 => &mut out.prev,
            _ => return out,
        };
        target.iter_mut().for_each(|w| *w = !*w);
        clear_tail(target, self.lanes);
        out
    }

    pub fn slice(&self, r: Range<usize>) -> Self {
        assert!(r.end <= self.lanes);
        let lanes = r.len();
        Self {
            own: lane_slice(&self.own, r.clone()),
            prev: lane_slice(&self.prev, r),
            lanes,
        }
    }

    pub fn concat<'a>(parts: impl IntoIterator<Item = &'a BitRepShare>) -> Self {
        let mut own: BitVec<u64, Lsb0> = BitVec::new();
        let mut prev: BitVec<u64, Lsb0> = BitVec::new();
        for p in parts {
            own.extend_from_bitslice(&p.own.view_bits::<Lsb0>()[..p.lanes]);
            prev.extend_from_bitslice(&p.prev.view_bits::<Lsb0>()[..p.lanes]);
        }
        let lanes = own.len();
        own.set_uninitialized(false);
        prev.set_uninitialized(false);
        Self {
            own: own.into_vec(),
            prev: prev.into_vec(),
            lanes,
        }
    }

    /// `(own, prev)` bits of one lane.
    pub fn lane(&self, i: usize) -> (bool, bool) {
        let (w, b) = (i / 64, i % 64);
        ((self.own[w] >> b) & 1 == 1, (self.prev[w] >> b) & 1 == 1)
    }
}

/// `w` bit positions of a batch of values, least significant first.
#[derive(Clone, Debug, PartialEq, Eq)]
#[derive(Default)]
pub struct BitVecShare {
    pub bits: Vec<BitRepShare>,
}

impl BitVecShare {
    pub fn width(&self) -> usize {
        self.bits.len()
    }
}

/// Dealer-side XOR sharing of a lane vector.
pub fn share_bits<G: RngCore + ?Sized>(bits: &[bool], rng: &mut G) -> [BitRepShare; 3] {
    let lanes = bits.len();
    let n = words_for(lanes);
    let mut plain = vec![0u64; n];
    for (i, &b) in bits.iter().enumerate() {
        plain[i / 64] |= (b as u64) << (i % 64);
    }
    let x1: Vec<u64> = (0..n).map(|_| rng.next_u64()).collect();
    let x2: Vec<u64> = (0..n).map(|_| rng.next_u64()).collect();
    let x3: Vec<u64> = (0..n).map(|j| plain[j] ^ x1[j] ^ x2[j]).collect();
    let c = [x1, x2, x3];
    PartyId::ALL.map(|p| BitRepShare::from_words(c[p.idx()].clone(), c[p.prev().idx()].clone(), lanes))
}

pub fn reconstruct_bits(shares: &[BitRepShare; 3]) -> Result<Vec<bool>> {
    for p in PartyId::ALL {
        if shares[p.idx()].prev != shares[p.prev().idx()].own || shares[p.idx()].lanes != shares[0].lanes {
            return Err(Error::InconsistentShare);
        }
    }
    Ok((0..shares[0].lanes)
        .map(|i| shares.iter().fold(false, |acc, s| acc ^ s.lane(i).0))
        .collect())
}

/// Evaluates all AND gates in one round: a single message per party
/// carrying every gate's reshared output.
pub fn and_many(p: &mut Party, gates: &[(&BitRepShare, &BitRepShare)]) -> Result<Vec<BitRepShare>> {
    if gates.is_empty() {
        return Ok(Vec::new());
    }
    let mut z: Vec<u64> = Vec::new();
    for (x, y) in gates {
        assert_eq!(x.lanes, y.lanes);
        p.counters.and_gates += x.lanes as u64;
        for j in 0..x.words() {
            z.push((x.own[j] & y.own[j]) ^ (x.prev[j] & y.own[j]) ^ (x.own[j] & y.prev[j]));
        }
    }
    let r = p.prf.zero_bits(z.len());
    z.iter_mut().zip(&r).for_each(|(a, b)| *a ^= b);
    let got = bytes_to_words(&p.pass_to_next(words_to_bytes(&z))?)?;
    if got.len() != z.len() {
        return Err(Error::Transport("AND layer length mismatch".into()));
    }
    let mut out = Vec::with_capacity(gates.len());
    let mut off = 0;
    for (x, _) in gates {
        let n = x.words();
        out.push(BitRepShare::from_words(
            z[off..off + n].to_vec(),
            got[off..off + n].to_vec(),
            x.lanes,
        ));
        off += n;
    }
    Ok(out)
}

pub fn and(p: &mut Party, x: &BitRepShare, y: &BitRepShare) -> Result<BitRepShare> {
    Ok(and_many(p, &[(x, y)])?.remove(0))
}

/// Opens bit lanes to every party.
pub fn open_bits(p: &mut Party, x: &BitRepShare, disclosure: Disclosure) -> Result<Vec<bool>> {
    p.authorize_open(disclosure, x.lanes)?;
    p.net.send(p.id().prev(), words_to_bytes(&x.own))?;
    let missing = bytes_to_words(&p.net.recv(p.id().next())?)?;
    p.net.round_barrier();
    if missing.len() != x.words() {
        return Err(Error::Transport("open length mismatch".into()));
    }
    Ok(unpack(&x.own, &x.prev, &missing, x.lanes))
}

/// Opens bit lanes to `target` only, with the same cross-check as the
/// arithmetic variant.
pub fn open_bits_to(
    p: &mut Party,
    x: &BitRepShare,
    target: PartyId,
    disclosure: Disclosure,
) -> Result<Option<Vec<bool>>> {
    p.authorize_open(disclosure, x.lanes)?;
    let me = p.id();
    if me == target {
        let a = bytes_to_words(&p.net.recv(me.next())?)?;
        let b = bytes_to_words(&p.net.recv(me.prev())?)?;
        p.net.round_barrier();
        if a != b || a.len() != x.words() {
            return Err(Error::InconsistentShare);
        }
        Ok(Some(unpack(&x.own, &x.prev, &a, x.lanes)))
    } else {
        let missing = if me == target.next() { &x.own } else { &x.prev };
        p.net.send(target, words_to_bytes(missing))?;
        p.net.round_barrier();
        Ok(None)
    }
}

fn unpack(a: &[u64], b: &[u64], c: &[u64], lanes: usize) -> Vec<bool> {
    (0..lanes)
        .map(|i| ((a[i / 64] ^ b[i / 64] ^ c[i / 64]) >> (i % 64)) & 1 == 1)
        .collect()
}

/// Reads the arithmetic components as three binary values, each known to
/// two parties, without communication. Returns the sharings of
/// `x_1, x_2, x_3`, `width` bits each.
pub fn share_split<R: Ring>(me: PartyId, xs: &[RepShare<R>], width: u32) -> [BitVecShare; 3] {
    let lanes = xs.len();
    let n = words_for(lanes);
    let mut own_bits = vec![vec![0u64; n]; width as usize];
    let mut prev_bits = vec![vec![0u64; n]; width as usize];
    for (i, x) in xs.iter().enumerate() {
        let (o, pv) = (x.own.to_u64(), x.prev.to_u64());
        let (w, b) = (i / 64, i % 64);
        for j in 0..width as usize {
            own_bits[j][w] |= ((o >> j) & 1) << b;
            prev_bits[j][w] |= ((pv >> j) & 1) << b;
        }
    }
    let zero = vec![0u64; n];
    let mut out: [BitVecShare; 3] = Default::default();
    for (ob, pb) in own_bits.into_iter().zip(prev_bits) {
        // Summand x_i is (own, 0) here; x_{i-1} is (0, prev); x_{i+1} is unknown.
        out[me.idx()].bits.push(BitRepShare::from_words(ob, zero.clone(), lanes));
        out[me.prev().idx()].bits.push(BitRepShare::from_words(zero.clone(), pb, lanes));
        out[me.next().idx()].bits.push(BitRepShare::zeros(lanes));
    }
    out
}


/// One full adder: `t1 = a ⊕ c`, `t2 = b ⊕ c`, `s = t1 ⊕ b`,
/// `carry = t1·t2 ⊕ c`. One AND gate.
pub fn full_adder(
    p: &mut Party,
    a: &BitRepShare,
    b: &BitRepShare,
    c: &BitRepShare,
) -> Result<(BitRepShare, BitRepShare)> {
    let t1 = a.xor(c);
    let t2 = b.xor(c);
    let s = t1.xor(b);
    let carry = and(p, &t1, &t2)?.xor(c);
    Ok((s, carry))
}

/// Carry of three bits where some inputs are public zeros (`None`).
/// Returns the AND operands and the value to XOR onto the product, or
/// `None` if the carry is publicly zero.
fn carry_plan(bits: [Option<&BitRepShare>; 3]) -> Option<(BitRepShare, BitRepShare, Option<BitRepShare>)> {
    match bits {
        [Some(a), Some(b), Some(c)] => Some((a.xor(c), b.xor(c), Some(c.clone()))),
        [Some(x), Some(y), None] | [Some(x), None, Some(y)] | [None, Some(x), Some(y)] => {
            Some((x.clone(), y.clone(), None))
        }
        _ => None,
    }
}

fn xor_opt(bits: &[Option<&BitRepShare>], lanes: usize) -> BitRepShare {
    bits.iter()
        .flatten()
        .fold(BitRepShare::zeros(lanes), |acc, b| acc.xor(b))
}

/// Ripple-carry addition of `a` and `b` (missing positions are public
/// zeros), producing sum bits `0..=top`. Carries are computed only where a
/// later output needs them and skipped where both inputs are public zeros.
pub fn ripple(
    p: &mut Party,
    a: &[Option<&BitRepShare>],
    b: &[Option<&BitRepShare>],
    top: usize,
    lanes: usize,
) -> Result<Vec<BitRepShare>> {
    let mut carry: Option<BitRepShare> = None;
    let mut out = Vec::with_capacity(top + 1);
    for j in 0..=top {
        let (x, y) = (a.get(j).copied().flatten(), b.get(j).copied().flatten());
        out.push(xor_opt(&[x, y, carry.as_ref()], lanes));
        if j == top {
            break;
        }
        carry = match carry_plan([x, y, carry.as_ref()]) {
            None => None,
            Some((l, r, c)) => {
                let z = and(p, &l, &r)?;
                Some(match c {
                    Some(c) => z.xor(&c),
                    None => z,
                })
            }
        };
    }
    Ok(out)
}

/// Binary addition of two `w`-bit sharings. With `full` the result has
/// `w + 1` bits and costs `w` AND gates, otherwise the sum is reduced to `w`
/// bits for `w - 1` AND gates.
pub fn bin_add(p: &mut Party, a: &BitVecShare, b: &BitVecShare, full: bool) -> Result<BitVecShare> {
    assert_eq!(a.width(), b.width());
    let w = a.width();
    if w == 0 {
        return Ok(BitVecShare::default());
    }
    let lanes = a.bits[0].lanes();
    let ao: Vec<_> = a.bits.iter().map(Some).collect();
    let bo: Vec<_> = b.bits.iter().map(Some).collect();
    let top = if full { w } else { w - 1 };
    Ok(BitVecShare {
        bits: ripple(p, &ao, &bo, top, lanes)?,
    })
}

/// Bits `indices` of `x_1 + x_2 + x_3` computed over the integers, where the
/// components are read as `R::BITS`-bit values. Indices up to `R::BITS + 1`
/// are allowed, which covers the two overflow bits of the unreduced sum.
///
/// A full-adder layer compresses the three summands into sum and carry
/// words in one round; a ripple-carry adder then adds them up to
/// `m = max(indices)`. Cost: `min(m, k) + (m - 1)` AND gates (fewer at
/// positions above the input width) in `m` rounds, so `2k - 3` gates and
/// `k - 1` rounds for the top bit of a `k`-bit ring.
pub fn bit_extract<R: Ring>(p: &mut Party, xs: &[RepShare<R>], indices: &[u32]) -> Result<Vec<BitRepShare>> {
    let k = R::BITS as usize;
    let lanes = xs.len();
    let m = *indices.iter().max().expect("at least one index") as usize;
    assert!(m <= k + 1, "bit index {m} beyond the unreduced sum of {k}-bit values");
    let [x1, x2, x3] = share_split(p.id(), xs, R::BITS);
    fn at(v: &BitVecShare, j: usize) -> Option<&BitRepShare> {
        v.bits.get(j)
    }

    // carries c_j feed sum position j + 1, so only j < m are needed
    let mut plans = Vec::new();
    let mut plan_pos = Vec::new();
    for j in 0..m.min(k) {
        if let Some(plan) = carry_plan([at(&x1, j), at(&x2, j), at(&x3, j)]) {
            plans.push(plan);
            plan_pos.push(j);
        }
    }
    let pairs: Vec<(&BitRepShare, &BitRepShare)> = plans.iter().map(|(l, r, _)| (l, r)).collect();
    let prods = and_many(p, &pairs)?;
    let mut carries: Vec<Option<BitRepShare>> = vec![None; m + 1];
    for ((z, (_, _, c)), j) in prods.into_iter().zip(plans).zip(plan_pos) {
        carries[j + 1] = Some(match c {
            Some(c) => z.xor(&c),
            None => z,
        });
    }
    let sums: Vec<Option<BitRepShare>> = (0..=m)
        .map(|j| (j < k).then(|| xor_opt(&[at(&x1, j), at(&x2, j), at(&x3, j)], lanes)))
        .collect();
    let a: Vec<_> = sums.iter().map(|s| s.as_ref()).collect();
    let b: Vec<_> = carries.iter().map(|s| s.as_ref()).collect();
    let bits = ripple(p, &a, &b, m, lanes)?;
    Ok(indices.iter().map(|&i| bits[i as usize].clone()).collect())
}

/// Sign bit of each shared value.
pub fn msb<R: Ring>(p: &mut Party, xs: &[RepShare<R>]) -> Result<BitRepShare> {
    Ok(bit_extract(p, xs, &[R::BITS - 1])?.remove(0))
}

/// OR over each segment of consecutive lanes (`segments` are lengths),
/// halving every segment per level so all segments share rounds.
/// `len - 1` AND gates per segment in `⌈log2 max len⌉` rounds.
pub fn or_segments(p: &mut Party, x: &BitRepShare, segments: &[usize]) -> Result<BitRepShare> {
    assert_eq!(segments.iter().sum::<usize>(), x.lanes(), "segments must cover all lanes");
    if segments.contains(&0) {
        return Err(Error::InvalidInput("empty OR segment".into()));
    }
    let mut cur = x.clone();
    let mut lens = segments.to_vec();
    while lens.iter().any(|&l| l > 1) {
        let mut lefts = Vec::new();
        let mut rights = Vec::new();
        let mut off = 0;
        for &l in &lens {
            let h = l / 2;
            lefts.push(cur.slice(off..off + h));
            rights.push(cur.slice(off + h..off + 2 * h));
            off += l;
        }
        let left = BitRepShare::concat(&lefts);
        let right = BitRepShare::concat(&rights);
        let prod = and(p, &left, &right)?;
        let ored = left.xor(&right).xor(&prod);
        let mut parts = Vec::new();
        let (mut off, mut poff) = (0, 0);
        for l in lens.iter_mut() {
            let h = *l / 2;
            parts.push(ored.slice(poff..poff + h));
            if *l % 2 == 1 {
                parts.push(cur.slice(off + 2 * h..off + *l));
            }
            poff += h;
            off += *l;
            *l = l.div_ceil(2);
        }
        cur = BitRepShare::concat(&parts);
    }
    Ok(cur)
}

pub fn or_tree(p: &mut Party, x: &BitRepShare) -> Result<BitRepShare> {
    or_segments(p, x, &[x.lanes()])
}

/// Gate and round counts of one circuit evaluation, per lane.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateStats {
    pub and_gates: u64,
    pub rounds: u64,
    /// One bit per AND gate per lane.
    pub bits_sent_per_party: u64,
}

impl GateStats {
    /// Runs `f` and reports the AND gates it evaluated divided by `lanes`,
    /// plus the rounds it used.
    pub fn measure<T>(p: &mut Party, lanes: usize, f: impl FnOnce(&mut Party) -> Result<T>) -> Result<(T, GateStats)> {
        let ands = p.counters.and_gates;
        let ledger: CommLedger = p.net.ledger().clone();
        let out = f(p)?;
        let d = (p.counters.and_gates - ands) / lanes.max(1) as u64;
        let rounds = p.net.ledger().since(&ledger).total().rounds;
        Ok((
            out,
            GateStats {
                and_gates: d,
                rounds,
                bits_sent_per_party: d,
            },
        ))
    }
}
