//! Degree-1 Shamir sharing over the Galois ring with two values packed per
//! element.
//!
//! Values `v_{2j}, v_{2j+1}` become `g_j = v_{2j} + v_{2j+1}·X`, shared as
//! `p(z) = g_j + r·z` at the party points `{1, X, 1+X}`. The database side is
//! scaled by the party's Lagrange weight once at ingestion, so the constant
//! term of `λ_i·g_i·h_i` summed over parties is the inner product of the
//! unpacked vectors. Only that constant term is ever computed.

use rand::RngCore;

use crate::error::Result;
use crate::galois::{party_lambdas, ExceptionalSeq, GrElem};
use crate::party::Party;
use crate::replicated::{reshare, RepShare};
use crate::ring::Ring;
use crate::transport::PartyId;

/// A party's evaluation of a degree-1 polynomial.
pub type GaloisShare<R> = GrElem<R>;

/// A share already multiplied by the holder's Lagrange weight.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct LambdaShare<R>(pub GrElem<R>);

/// Packs consecutive pairs, padding an odd tail with 0.
pub fn pack_pairs<R: Ring>(vals: &[R]) -> Vec<GrElem<R>> {
    vals.chunks(2)
        .map(|c| GrElem::new(c[0], c.get(1).copied().unwrap_or_else(R::zero)))
        .collect()
}

pub fn unpack_pairs<R: Ring>(packed: &[GrElem<R>], len: usize) -> Vec<R> {
    packed.iter().flat_map(|g| [g.c0, g.c1]).take(len).collect()
}

/// Shares each packed element with a fresh random degree-1 polynomial.
/// Returns `ceil(len/2)` shares per party, indexed by party.
pub fn shamir_share_packed<R: Ring, G: RngCore + ?Sized>(vals: &[R], rng: &mut G) -> [Vec<GaloisShare<R>>; 3] {
    let seq = ExceptionalSeq::<R>::canonical();
    let mut out: [Vec<GaloisShare<R>>; 3] = Default::default();
    for g in pack_pairs(vals) {
        let r = GrElem::random(rng);
        for p in PartyId::ALL {
            out[p.idx()].push(g + r * seq.party_point(p.index() as usize));
        }
    }
    out
}

/// Interpolates at 0 from all three shares.
pub fn reconstruct_packed<R: Ring>(shares: &[GaloisShare<R>; 3]) -> GrElem<R> {
    let l = party_lambdas::<R>();
    l[0] * shares[0] + l[1] * shares[1] + l[2] * shares[2]
}

pub fn premultiply_lambda<R: Ring>(shares: &[GaloisShare<R>], party: PartyId) -> Vec<LambdaShare<R>> {
    let lambda = party_lambdas::<R>()[party.idx()];
    shares.iter().map(|&s| LambdaShare(lambda * s)).collect()
}

/// Constant term of `Σ_j x_j·y_j`: one plain dot product over the unpacked
/// coefficients, `2·len` multiply-accumulates for `2·len` values. The
/// three parties' outputs are an additive sharing of the inner product.
pub fn dot_product_ct<R: Ring>(p: &mut Party, xs: &[LambdaShare<R>], ys: &[GaloisShare<R>]) -> R {
    assert_eq!(xs.len(), ys.len());
    p.counters.macs += 2 * xs.len() as u64;
    let mut acc = R::zero();
    for (x, y) in xs.iter().zip(ys) {
        acc += x.0.c0 * y.c0 + x.0.c1 * y.c1;
    }
    acc
}

/// Turns additive shares into replicated ones: add a zero share and pass
/// the result to the next party.
pub fn additive_to_replicated<R: Ring>(p: &mut Party, z: Vec<R>) -> Result<Vec<RepShare<R>>> {
    reshare(p, z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::galois::{eval_poly, lagrange_coeffs};
    use crate::iris::IrisRecord;
    use crate::party::{run_parties, test_seeds, OpenPolicy};
    use crate::replicated::{dot_product, reconstruct, share_vec};
    use crate::transport::Phase;
    use crate::{Gr16, Z16, Z32};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(s: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(s)
    }

    fn z16(v: &[i64]) -> Vec<Z16> {
        v.iter().map(|&x| Z16::from_i64(x)).collect()
    }

    #[test]
    fn zeros_interpolate_to_zero() {
        let s = shamir_share_packed(&z16(&[0; 10]), &mut rng(1));
        for j in 0..5 {
            assert_eq!(reconstruct_packed(&[s[0][j], s[1][j], s[2][j]]), Gr16::zero());
        }
    }

    #[test]
    fn packed_example_round_trips() {
        let s = shamir_share_packed(&z16(&[-1, 1, 0, 1]), &mut rng(2));
        assert_eq!(s[0].len(), 2);
        // interpolate with independently computed weights
        let seq = ExceptionalSeq::<Z16>::canonical();
        let l = lagrange_coeffs(&seq, &[1, 2, 3], Gr16::zero()).unwrap();
        let at = |j: usize| l[0] * s[0][j] + l[1] * s[1][j] + l[2] * s[2][j];
        assert_eq!(at(0), Gr16::new(Z16::from_i64(-1), Z16::from_u64(1)));
        assert_eq!(at(1), Gr16::new(Z16::from_u64(0), Z16::from_u64(1)));
    }

    #[test]
    fn share_count_halves() {
        let s = shamir_share_packed(&vec![Z16::from_u64(1); 12800], &mut rng(3));
        assert!(s.iter().all(|v| v.len() == 6400));
        assert_eq!(shamir_share_packed(&z16(&[1, 2, 3]), &mut rng(3))[0].len(), 2);
    }

    #[test]
    fn lambda_scaled_constant_sums_to_one() {
        // degree-0 sharing of 1: every party holds 1
        let ones = [Gr16::one(); 3];
        let total: Z16 = PartyId::ALL
            .iter()
            .map(|&p| premultiply_lambda(&ones[p.idx()..p.idx() + 1], p)[0].0.c0)
            .sum();
        assert_eq!(total, Z16::from_u64(1));
        let ct: Gr16 = PartyId::ALL
            .iter()
            .map(|&p| premultiply_lambda(&[ones[p.idx()]], p)[0].0)
            .fold(Gr16::zero(), |a, b| a + b);
        assert_eq!(ct, Gr16::one());
    }

    #[test]
    fn product_of_degree_one_sharings_is_degree_two() {
        let mut g = rng(4);
        let seq = ExceptionalSeq::<Z16>::canonical();
        for _ in 0..50 {
            let (a, b) = (Gr16::random(&mut g), Gr16::random(&mut g));
            let (ra, rb) = (Gr16::random(&mut g), Gr16::random(&mut g));
            let sa = [1, 2, 3].map(|i| eval_poly(&[a, ra], seq.party_point(i)));
            let sb = [1, 2, 3].map(|i| eval_poly(&[b, rb], seq.party_point(i)));
            let prod = [sa[0] * sb[0], sa[1] * sb[1], sa[2] * sb[2]];
            let poly = [a * b, a * rb + ra * b, ra * rb];
            for (i, v) in prod.iter().enumerate() {
                assert_eq!(*v, eval_poly(&poly, seq.party_point(i + 1)));
            }
            assert_eq!(reconstruct_packed(&prod), a * b);
        }
    }

    fn run_ct<R: Ring>(x: &[R], y: &[R], seed: u64) -> ([R; 3], u64, u64) {
        let sx = shamir_share_packed(x, &mut rng(seed));
        let sy = shamir_share_packed(y, &mut rng(seed + 1));
        let out = run_parties(&test_seeds(seed), OpenPolicy::Debug, |p| {
            let i = p.id().idx();
            let lx = premultiply_lambda(&sx[i], p.id());
            let z = dot_product_ct(p, &lx, &sy[i]);
            Ok((z, p.counters.macs, p.net.ledger().total().bytes_sent))
        })
        .unwrap();
        ([out[0].0, out[1].0, out[2].0], out[0].1, out[0].2)
    }

    #[test]
    fn constant_term_dot_products() {
        let (z, _, bytes) = run_ct(&z16(&[1, 2]), &z16(&[3, 4]), 5);
        assert_eq!(z[0] + z[1] + z[2], Z16::from_u64(11));
        assert_eq!(bytes, 0);
        let (z, _, _) = run_ct(&z16(&[0; 6]), &z16(&[1, -1, 1, 0, 0, 1]), 6);
        assert_eq!(z[0] + z[1] + z[2], Z16::from_u64(0));
    }

    #[test]
    fn iris_sized_dot_and_mac_count() {
        let mut g = rng(7);
        let q = IrisRecord::random(12800, 0.8, &mut g).masked::<Z16>();
        let d = IrisRecord::random(12800, 0.8, &mut g).masked::<Z16>();
        let (z, macs, _) = run_ct(q.as_slice(), d.as_slice(), 8);
        assert_eq!(z[0] + z[1] + z[2], crate::ring::dot(q.as_slice(), d.as_slice()));
        assert_eq!(macs, 12800);
    }

    #[test]
    fn backends_agree_after_conversion() {
        let mut g = rng(9);
        let q = IrisRecord::random(640, 0.7, &mut g);
        let d = IrisRecord::random(640, 0.7, &mut g);
        let (qm, dm) = (q.mask_ring::<Z32>(), d.mask_ring::<Z32>());
        let gs = (shamir_share_packed(&dm, &mut g), shamir_share_packed(&qm, &mut g));
        let rs = (share_vec(&dm, &mut g), share_vec(&qm, &mut g));
        let out = run_parties(&test_seeds(10), OpenPolicy::Debug, |p| {
            let i = p.id().idx();
            let m0 = p.counters.macs;
            let lx = premultiply_lambda(&gs.0[i], p.id());
            let z = dot_product_ct(p, &lx, &gs.1[i]);
            let gal = p.in_phase(Phase::Dot, |p| additive_to_replicated(p, vec![z]))?[0];
            let m1 = p.counters.macs;
            let prep: Vec<_> = rs.0[i].iter().map(|x| x.prep()).collect();
            let rep = p.in_phase(Phase::Dot, |p| dot_product(p, &prep, &rs.1[i]))?;
            let m2 = p.counters.macs;
            Ok((gal, rep, m1 - m0, m2 - m1, p.net.ledger().phase(Phase::Dot).bytes_sent))
        })
        .unwrap();
        let gal = reconstruct(&[out[0].0, out[1].0, out[2].0]).unwrap();
        let rep = reconstruct(&[out[0].1, out[1].1, out[2].1]).unwrap();
        assert_eq!(gal, rep);
        assert_eq!(gal, crate::ring::dot(&qm, &dm));
        for o in &out {
            assert_eq!(2 * o.2, o.3);
            assert_eq!(o.4, 8);
        }
    }

    #[test]
    fn conversion_of_zero_and_ledger() {
        let out = run_parties(&test_seeds(11), OpenPolicy::Debug, |p| {
            let z = p.in_phase(Phase::Dot, |p| additive_to_replicated(p, vec![Z16::from_u64(0)]))?;
            Ok((z[0], p.net.ledger().phase(Phase::Dot)))
        })
        .unwrap();
        assert_eq!(reconstruct(&[out[0].0, out[1].0, out[2].0]).unwrap(), Z16::from_u64(0));
        for o in &out {
            assert_eq!((o.1.bytes_sent, o.1.rounds), (2, 1));
        }
    }
}
