//! Changing the ring a value is shared in.
//!
//! Scaling by `2^s` into a ring `2^s` times larger is free. Lifting a value
//! into a larger ring without scaling needs the two overflow bits of the
//! unreduced component sum, which are extracted with the binary adder and
//! turned back into arithmetic shares by bit injection. Injection uses a
//! three-party OT in which party 1 sends, party 2 receives and party 3,
//! who also knows the choice bit, helps.

use crate::binary::{bit_extract, BitRepShare};
use crate::error::{Error, Result};
use crate::party::Party;
use crate::prf::Prf;
use crate::replicated::RepShare;
use crate::ring::{recast, Ring};
use crate::transport::{PartyId, Phase};

/// `2^shift·x` as a sharing over the ring `2^shift` times larger.
pub fn const_lift<A: Ring, B: Ring>(x: RepShare<A>, shift: u32) -> RepShare<B> {
    assert_eq!(A::BITS + shift, B::BITS, "target ring must be exactly 2^shift times larger");
    RepShare::new(
        B::from_u64(x.own.to_u64() << shift),
        B::from_u64(x.prev.to_u64() << shift),
    )
}

fn width_mask(bits: u32) -> u64 {
    if bits == 64 {
        u64::MAX
    } else {
        (1u64 << bits) - 1
    }
}

fn draw(prf: &mut Prf, n: usize, bits: u32) -> Vec<u64> {
    let mut w = vec![0u64; n];
    prf.fill_u64(&mut w);
    let m = width_mask(bits);
    w.iter_mut().for_each(|x| *x &= m);
    w
}

fn put(out: &mut Vec<u8>, xs: &[u64], bits: u32) {
    let nb = bits.div_ceil(8) as usize;
    for x in xs {
        out.extend_from_slice(&x.to_le_bytes()[..nb]);
    }
}

fn take(bytes: &[u8], off: &mut usize, n: usize, bits: u32) -> Result<Vec<u64>> {
    let nb = bits.div_ceil(8) as usize;
    let end = *off + n * nb;
    let s = bytes
        .get(*off..end)
        .ok_or_else(|| Error::Transport("short OT payload".into()))?;
    *off = end;
    Ok(s.chunks_exact(nb)
        .map(|c| {
            let mut b = [0u8; 8];
            b[..nb].copy_from_slice(c);
            u64::from_le_bytes(b)
        })
        .collect())
}

/// One batch of OTs over a ring of `bits` bits.
pub struct OtJob<'a> {
    pub bits: u32,
    pub n: usize,
    /// Sender messages `(m0, m1)`; empty at the other parties.
    pub msgs: (&'a [u64], &'a [u64]),
    /// Choice bits, known to receiver and helper; empty at the sender.
    pub choice: &'a [bool],
}

/// Runs all jobs in one round, attributed to the OT phase. Pads come from
/// the key shared by sender and helper. Returns the chosen messages at the
/// receiver and empty vectors elsewhere.
pub fn three_ot_raw(p: &mut Party, jobs: &[OtJob<'_>]) -> Result<Vec<Vec<u64>>> {
    p.in_phase(Phase::Ot, |p| {
        let me = p.id();
        let mut out = vec![Vec::new(); jobs.len()];
        match me {
            PartyId::P1 => {
                let mut buf = Vec::new();
                for j in jobs {
                    let w0 = draw(&mut p.prf.prev, j.n, j.bits);
                    let w1 = draw(&mut p.prf.prev, j.n, j.bits);
                    let e0: Vec<u64> = j.msgs.0.iter().zip(&w0).map(|(m, w)| m ^ w).collect();
                    let e1: Vec<u64> = j.msgs.1.iter().zip(&w1).map(|(m, w)| m ^ w).collect();
                    put(&mut buf, &e0, j.bits);
                    put(&mut buf, &e1, j.bits);
                }
                p.net.send(PartyId::P2, buf)?;
            }
            PartyId::P3 => {
                let mut buf = Vec::new();
                for j in jobs {
                    let w0 = draw(&mut p.prf.own, j.n, j.bits);
                    let w1 = draw(&mut p.prf.own, j.n, j.bits);
                    let wc: Vec<u64> = (0..j.n).map(|i| if j.choice[i] { w1[i] } else { w0[i] }).collect();
                    put(&mut buf, &wc, j.bits);
                }
                p.net.send(PartyId::P2, buf)?;
            }
            _ => {
                let from_sender = p.net.recv(PartyId::P1)?;
                let from_helper = p.net.recv(PartyId::P3)?;
                let (mut os, mut oh) = (0, 0);
                for (j, o) in jobs.iter().zip(out.iter_mut()) {
                    let e0 = take(&from_sender, &mut os, j.n, j.bits)?;
                    let e1 = take(&from_sender, &mut os, j.n, j.bits)?;
                    let wc = take(&from_helper, &mut oh, j.n, j.bits)?;
                    *o = (0..j.n)
                        .map(|i| (if j.choice[i] { e1[i] } else { e0[i] }) ^ wc[i])
                        .collect();
                }
            }
        }
        p.net.round_barrier();
        Ok(out)
    })
}

/// Typed single-batch OT. The sender passes `m0, m1`, receiver and helper
/// pass `choice`; only the receiver gets a non-empty result.
pub fn three_ot<R: Ring>(p: &mut Party, m0: &[R], m1: &[R], choice: &[bool]) -> Result<Vec<R>> {
    let n = m0.len().max(choice.len());
    let a: Vec<u64> = m0.iter().map(|x| x.to_u64()).collect();
    let b: Vec<u64> = m1.iter().map(|x| x.to_u64()).collect();
    let job = OtJob {
        bits: R::BITS,
        n,
        msgs: (&a, &b),
        choice,
    };
    Ok(three_ot_raw(p, &[job])?.remove(0).into_iter().map(R::from_u64).collect())
}

/// Injects each binary sharing into the ring of the given width, all in the
/// same two rounds. Returns raw `(own, prev)` components reduced to each
/// width.
pub fn bit_inject_raw(p: &mut Party, jobs: &[(&BitRepShare, u32)]) -> Result<Vec<Vec<(u64, u64)>>> {
    let me = p.id();
    // c1 is known to parties 1 and 2, c3 to parties 1 and 3.
    let mut c1 = Vec::new();
    let mut c3 = Vec::new();
    for &(x, bits) in jobs {
        let n = x.lanes();
        match me {
            PartyId::P1 => {
                c1.push(draw(&mut p.prf.own, n, bits));
                c3.push(draw(&mut p.prf.prev, n, bits));
            }
            PartyId::P2 => c1.push(draw(&mut p.prf.prev, n, bits)),
            _ => c3.push(draw(&mut p.prf.own, n, bits)),
        }
    }

    let lane_bits = |x: &BitRepShare, own: bool| -> Vec<bool> {
        (0..x.lanes())
            .map(|i| {
                let (o, pv) = x.lane(i);
                if own {
                    o
                } else {
                    pv
                }
            })
            .collect()
    };

    let mut m0s = Vec::new();
    let mut m1s = Vec::new();
    let mut choices = Vec::new();
    for (k, &(x, bits)) in jobs.iter().enumerate() {
        let mask = width_mask(bits);
        match me {
            PartyId::P1 => {
                // m_b = (b ⊕ x1 ⊕ x3) - c1 - c3
                let (m0, m1): (Vec<u64>, Vec<u64>) = (0..x.lanes())
                    .map(|i| {
                        let (x1, x3) = x.lane(i);
                        let base = (x1 ^ x3) as u64;
                        let off = c1[k][i].wrapping_add(c3[k][i]);
                        (base.wrapping_sub(off) & mask, (base ^ 1).wrapping_sub(off) & mask)
                    })
                    .unzip();
                m0s.push(m0);
                m1s.push(m1);
                choices.push(Vec::new());
            }
            // x2 is party 2's own and party 3's prev component
            PartyId::P2 => {
                choices.push(lane_bits(x, true));
                m0s.push(Vec::new());
                m1s.push(Vec::new());
            }
            _ => {
                choices.push(lane_bits(x, false));
                m0s.push(Vec::new());
                m1s.push(Vec::new());
            }
        }
    }
    let ot_jobs: Vec<OtJob<'_>> = jobs
        .iter()
        .enumerate()
        .map(|(k, &(x, bits))| OtJob {
            bits,
            n: x.lanes(),
            msgs: (&m0s[k], &m1s[k]),
            choice: &choices[k],
        })
        .collect();
    let c2 = three_ot_raw(p, &ot_jobs)?;

    // party 2 forwards c2 so party 3 holds (c3, c2)
    let mut out = Vec::with_capacity(jobs.len());
    match me {
        PartyId::P1 => {
            p.net.round_barrier();
            for k in 0..jobs.len() {
                out.push(c1[k].iter().copied().zip(c3[k].iter().copied()).collect());
            }
        }
        PartyId::P2 => {
            let mut buf = Vec::new();
            for (k, &(_, bits)) in jobs.iter().enumerate() {
                put(&mut buf, &c2[k], bits);
            }
            p.net.send(PartyId::P3, buf)?;
            p.net.round_barrier();
            for k in 0..jobs.len() {
                out.push(c2[k].iter().copied().zip(c1[k].iter().copied()).collect());
            }
        }
        _ => {
            let buf = p.net.recv(PartyId::P2)?;
            p.net.round_barrier();
            let mut off = 0;
            for (k, &(x, bits)) in jobs.iter().enumerate() {
                let c2k = take(&buf, &mut off, x.lanes(), bits)?;
                out.push(c3[k].iter().copied().zip(c2k).collect());
            }
        }
    }
    Ok(out)
}

/// Arithmetic sharing of a binary-shared bit.
pub fn bit_inject<R: Ring>(p: &mut Party, x: &BitRepShare) -> Result<Vec<RepShare<R>>> {
    let raw = bit_inject_raw(p, &[(x, R::BITS)])?.remove(0);
    Ok(raw
        .into_iter()
        .map(|(o, v)| RepShare::new(R::from_u64(o), R::from_u64(v)))
        .collect())
}

/// Lifts a sharing over `A = Z_{2^k}` of a value `x < 2^k` to a sharing of
/// the same integer over `B = Z_{2^{k+m}}`.
///
/// The components are reinterpreted in `B`, which represents the unreduced
/// sum `x + b_k·2^k + b_{k+1}·2^{k+1}`. The two overflow bits are extracted,
/// injected into the smaller rings `S1 = Z_{2^{m-1}}` and `S2 = Z_{2^m}`,
/// scaled into `B` for free and subtracted.
pub fn lift<A: Ring, B: Ring, S1: Ring, S2: Ring>(p: &mut Party, xs: &[RepShare<A>]) -> Result<Vec<RepShare<B>>> {
    let k = A::BITS;
    assert!(B::BITS > k + 1, "lift needs at least two extra bits");
    let m = B::BITS - k;
    assert_eq!(S2::BITS, m, "S2 must have m bits");
    assert_eq!(S1::BITS, m - 1, "S1 must have m - 1 bits");
    if xs.is_empty() {
        return Ok(Vec::new());
    }
    let bits = bit_extract(p, xs, &[k, k + 1])?;
    let inj = bit_inject_raw(p, &[(&bits[0], S2::BITS), (&bits[1], S1::BITS)])?;
    Ok(xs
        .iter()
        .zip(&inj[0])
        .zip(&inj[1])
        .map(|((x, &(o2, p2)), &(o1, p1))| {
            let wide = RepShare::new(recast::<A, B>(x.own), recast::<A, B>(x.prev));
            let bk: RepShare<B> = const_lift(RepShare::new(S2::from_u64(o2), S2::from_u64(p2)), k);
            let bk1: RepShare<B> = const_lift(RepShare::new(S1::from_u64(o1), S1::from_u64(p1)), k + 1);
            wide - bk - bk1
        })
        .collect())
}
