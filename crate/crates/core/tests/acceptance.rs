//! Acceptance gate: runs every criterion and prints one PASS/FAIL line each.
//! Exits nonzero if any criterion fails.

use std::time::Instant;

use irisdedup_core::bench::{bench_comparison, bench_or_tree};
use irisdedup_core::binary::{msb, GateStats};
use irisdedup_core::engine::{
    comparison_plan, compare, deal_db, BatchShape, Backend, EngineConfig, PlaneSet, ProtocolVariant, QueryBatch,
    RawSet, Target, run_query, OUTPUT_PARTY,
};
use irisdedup_core::formats::{encode_set, SHARE_HEADER_LEN};
use irisdedup_core::iris::{public_msb_form, shared_msb_form, IrisDb, IrisRecord, MatchParams};
use irisdedup_core::oracle::{run_equivalence, EquivalenceGrid};
use irisdedup_core::party::{run_parties, test_seeds, Disclosure, OpenPolicy};
use irisdedup_core::replicated::{dot_product, share_vec};
use irisdedup_core::shamir::{dot_product_ct, premultiply_lambda, shamir_share_packed};
use irisdedup_core::{bench::deal_dots, binary::open_bits_to, ring::Ring, Z16, Z32};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn rng(s: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(s)
}

fn within(got: f64, want: f64, tol: f64) -> bool {
    (got - want).abs() <= tol * want
}

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn c1_oracle_equivalence() -> Outcome {
    let t = Instant::now();
    let rep = run_equivalence(&EquivalenceGrid::default());
    let secs = t.elapsed().as_secs_f64();
    if let Some(m) = rep.mismatches.first() {
        eprintln!("first mismatch: {}", serde_json::to_string(m).unwrap());
    }
    ensure(
        rep.mismatches.is_empty() && rep.boundary_runs >= 100 && secs < 300.0,
        format!("{} ({secs:.1} s)", rep.summary()),
    )
}

fn c2_msb_cost() -> Outcome {
    let mut g = rng(2);
    let v16: Vec<Z16> = (0..1000).map(|_| Z16::random(&mut g)).collect();
    let v32: Vec<Z32> = (0..1000).map(|_| Z32::random(&mut g)).collect();
    let (s16, s32) = (share_vec(&v16, &mut g), share_vec(&v32, &mut g));
    let out = run_parties(&test_seeds(2), OpenPolicy::Production, |p| {
        let i = p.id().idx();
        let (_, a) = GateStats::measure(p, 1000, |p| msb(p, &s16[i]))?;
        let (_, b) = GateStats::measure(p, 1000, |p| msb(p, &s32[i]))?;
        Ok((a, b))
    })
    .map_err(|e| e.to_string())?;
    let (a, b) = out[0];
    ensure(
        out.iter().all(|o| *o == (a, b)) && (a.and_gates, a.rounds, b.and_gates, b.rounds) == (29, 15, 61, 31),
        format!("k=16: {} ANDs / {} rounds; k=32: {} ANDs / {} rounds", a.and_gates, a.rounds, b.and_gates, b.rounds),
    )
}

fn dot_bytes<R: Ring>(len: usize, backend: Backend) -> Result<[u64; 3], String> {
    let mut g = rng(len as u64);
    let x: Vec<R> = (0..len).map(|_| R::random(&mut g)).collect();
    let y: Vec<R> = (0..len).map(|_| R::random(&mut g)).collect();
    let (rx, ry) = (share_vec(&x, &mut g), share_vec(&y, &mut g));
    let (gx, gy) = (shamir_share_packed(&x, &mut g), shamir_share_packed(&y, &mut g));
    let want = irisdedup_core::ring::dot(&x, &y);
    let out = run_parties(&test_seeds(3), OpenPolicy::Production, |p| {
        let i = p.id().idx();
        let z = match backend {
            Backend::Replicated => {
                let xp: Vec<_> = rx[i].iter().map(|s| s.prep()).collect();
                dot_product(p, &xp, &ry[i])?
            }
            Backend::ShamirGalois => {
                let lx = premultiply_lambda(&gx[i], p.id());
                let local = dot_product_ct(p, &lx, &gy[i]);
                irisdedup_core::shamir::additive_to_replicated(p, vec![local])?[0]
            }
        };
        Ok((p.net.ledger().total().bytes_sent, z))
    })
    .map_err(|e| e.to_string())?;
    let z = irisdedup_core::replicated::reconstruct(&[out[0].1, out[1].1, out[2].1]).map_err(|e| e.to_string())?;
    if z != want {
        return Err(format!("dot product of length {len} reconstructs wrongly"));
    }
    Ok([out[0].0, out[1].0, out[2].0])
}

fn c3_dot_independence() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for backend in Backend::ALL {
        for len in [10, 1000, 12800] {
            let a = dot_bytes::<Z16>(len, backend)?;
            let b = dot_bytes::<Z32>(len, backend)?;
            ok &= a == [2; 3] && b == [4; 3];
            lines.push(format!("{backend} l={len}: {}/{} B", a[0], b[0]));
        }
    }
    ensure(ok, lines.join(", "))
}

fn plain_dot_bytes(s: usize) -> Result<u64, String> {
    let l = 128;
    let mut g = rng(4);
    let db = IrisDb::random(s, l, 0.8, &mut g);
    let q = IrisDb::random(1, l, 0.8, &mut g).row(0);
    let planes = PlaneSet::for_variant(ProtocolVariant::PlainMask);
    let dbs = deal_db(&db, Backend::Replicated, planes, &mut g).map_err(|e| e.to_string())?;
    let batch = QueryBatch::new(vec![vec![q]], 1).map_err(|e| e.to_string())?;
    let qs = batch.deal(l, Backend::Replicated, planes, &mut g).map_err(|e| e.to_string())?;
    let cfg = EngineConfig::new(Backend::Replicated, ProtocolVariant::PlainMask, MatchParams::default(), l)
        .map_err(|e| e.to_string())?;
    let out = run_parties(&test_seeds(4), OpenPolicy::Production, |p| {
        let i = p.id().idx();
        Ok(run_query(p, &cfg, &dbs[i], &qs[i])?.stats.phase_bytes.dot)
    })
    .map_err(|e| e.to_string())?;
    if out.iter().any(|&b| b != out[0]) {
        return Err(format!("parties disagree: {out:?}"));
    }
    Ok(out[0])
}

fn c4_hamming_scaling() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for s in [1, 100, 10_000] {
        let b = plain_dot_bytes(s)?;
        ok &= b == 2 * s as u64;
        lines.push(format!("s={s}: {b} B"));
    }
    ensure(ok, format!("{} (2 MB at s=10^6 by extrapolation)", lines.join(", ")))
}

const N: usize = 100_000;

fn c5_table3() -> Outcome {
    let p = MatchParams::default();
    let targets = [
        (ProtocolVariant::PlainMask, 362.0, 0.01),
        (ProtocolVariant::MpcLift, 2138.0, 0.03),
        (ProtocolVariant::ConstLift, 763.0, 0.01),
        (ProtocolVariant::NoLift, 763.0, 0.01),
    ];
    let mut ok = true;
    let mut lines = Vec::new();
    for (v, want, tol) in targets {
        let r = bench_comparison(v, N, &p, 1, 5).map_err(|e| e.to_string())?;
        let kb = r.max_party_bytes as f64 / 1e3;
        let pass = r.verified && within(kb, want, tol);
        ok &= pass;
        lines.push(format!(
            "{v} {kb:.1} kB (mean {:.1}) vs {want} ±{}% {}",
            r.mean_party_bytes / 1e3,
            tol * 100.0,
            if pass { "ok" } else { "off" }
        ));
    }
    let o = bench_or_tree(N, 5).map_err(|e| e.to_string())?;
    let kb = o.max_party_bytes as f64 / 1e3;
    let pass = o.verified && within(kb, 12.0, 0.03);
    ok &= pass;
    lines.push(format!("or-tree {kb:.2} kB vs 12 ±3% {}", if pass { "ok" } else { "off" }));
    ensure(ok, lines.join("; "))
}

fn c6_mpc_lift_per_comparison() -> Outcome {
    let r = bench_comparison(ProtocolVariant::MpcLift, N, &MatchParams::default(), 1, 6).map_err(|e| e.to_string())?;
    ensure(
        r.verified && within(r.bytes_per_comparison_max, 21.0, 0.10),
        format!(
            "{:.2} B per comparison (max party), {:.2} B mean, vs 21 ±10%",
            r.bytes_per_comparison_max, r.bytes_per_comparison_mean
        ),
    )
}

fn c7_bounds() -> Outcome {
    let p = MatchParams::default();
    let accept = ProtocolVariant::PlainMask.validate(&p, 12800).is_ok()
        && ProtocolVariant::NoLift.validate(&p, 12800).is_ok()
        && EngineConfig::new(Backend::Replicated, ProtocolVariant::PlainMask, p, 12800).is_ok();
    let reject = ProtocolVariant::PlainMask.validate(&p, 20000).is_err()
        && EngineConfig::new(Backend::Replicated, ProtocolVariant::NoLift, p, 20000).is_err();

    // every (dot, ml) reachable at l = 64, in plaintext and through the protocol
    let l = 64u64;
    let mut pairs = Vec::new();
    for ml in 0..=l {
        for hd in 0..=ml {
            pairs.push((ml as i64 - 2 * hd as i64, ml));
        }
    }
    let params = [p, MatchParams::with_ab(3 << 13, 1 << 16).unwrap(), MatchParams::with_ab(1, 1 << 16).unwrap()];
    let mut plain_ok = true;
    for q in &params {
        for &(d, ml) in &pairs {
            let want = q.b as i128 * d as i128 > q.a as i128 * ml as i128;
            plain_ok &= public_msb_form::<Z16>(d, ml, q) == want && shared_msb_form::<Z32>(d, ml, q) == want;
        }
    }
    let mut mpc_ok = true;
    for v in ProtocolVariant::ALL {
        let want: Vec<bool> = pairs.iter().map(|&(d, ml)| p.matches(v.rule(), d, ml)).collect();
        let shares = deal_dots(v, &pairs, 7);
        let out = run_parties(&test_seeds(7), OpenPolicy::Debug, |party| {
            let bits = compare(party, &p, &shares[party.id().idx()])?;
            open_bits_to(party, &bits, OUTPUT_PARTY, Disclosure::PerComparison)
        })
        .map_err(|e| e.to_string())?;
        mpc_ok &= out[0].as_deref() == Some(&want[..]) && out[1].is_none() && out[2].is_none();
    }
    ensure(
        accept && reject && plain_ok && mpc_ok,
        format!(
            "l=12800 accepted: {accept}, l=20000 rejected: {reject}, {} pairs at l=64 plaintext: {plain_ok}, protocol: {mpc_ok}",
            pairs.len()
        ),
    )
}

fn c8_shamir_halving() -> Outcome {
    let (s, l) = (100, 12800);
    let db = IrisDb::random(s, l, 0.8, &mut rng(8));
    let recs: Vec<IrisRecord> = db.rows().collect();
    let planes = PlaneSet {
        codes16: true,
        ..Default::default()
    };
    let size = |b| -> Result<usize, String> {
        let sets = RawSet::deal(&recs, l, b, planes, &mut rng(9)).map_err(|e| e.to_string())?;
        Ok(encode_set(&sets[0])[0].1.len())
    };
    let (rep, gal) = (size(Backend::Replicated)?, size(Backend::ShamirGalois)?);
    ensure(
        (rep - SHARE_HEADER_LEN) == 2 * (gal - SHARE_HEADER_LEN) && (rep - SHARE_HEADER_LEN) * 8 == 32 * s * l,
        format!("s={s}, l={l}: replicated {rep} B, shamir {gal} B, header {SHARE_HEADER_LEN} B"),
    )
}

fn c9_throughput_and_macs() -> Outcome {
    let p = MatchParams::default();
    let mut ok = true;
    let mut lines = Vec::new();
    for v in ProtocolVariant::ALL {
        let r = bench_comparison(v, N, &p, 3, 9).map_err(|e| e.to_string())?;
        ok &= r.verified && r.comparisons_per_sec > 100_000.0;
        lines.push(format!("{v} {:.0}/s", r.comparisons_per_sec));
    }
    let l = 1024;
    let mut g = rng(10);
    let db = IrisDb::random(16, l, 0.8, &mut g);
    let batch = QueryBatch::new(vec![vec![IrisDb::random(1, l, 0.8, &mut g).row(0)]], 3).unwrap();
    let mut macs = Vec::new();
    for b in Backend::ALL {
        let planes = PlaneSet::for_variant(ProtocolVariant::PlainMask);
        let dbs = deal_db(&db, b, planes, &mut g).map_err(|e| e.to_string())?;
        let qs = batch.deal(l, b, planes, &mut g).map_err(|e| e.to_string())?;
        let cfg = EngineConfig::new(b, ProtocolVariant::PlainMask, p, l).map_err(|e| e.to_string())?;
        let out = run_parties(&test_seeds(10), OpenPolicy::Production, |party| {
            let i = party.id().idx();
            Ok(run_query(party, &cfg, &dbs[i], &qs[i])?.stats.macs)
        })
        .map_err(|e| e.to_string())?;
        macs.push(out[0]);
    }
    ok &= macs[0] == 2 * macs[1];
    lines.push(format!("MACs replicated {} vs shamir {}", macs[0], macs[1]));
    ensure(ok, lines.join(", "))
}

fn c10_batch() -> Outcome {
    let (l, s) = (64, 2);
    let shape = BatchShape {
        persons: 32,
        eyes: 2,
        rotations: 31,
    };
    let mut g = rng(11);
    let persons: Vec<Vec<IrisRecord>> = (0..32)
        .map(|_| (0..2).map(|_| IrisRecord::random(l, 0.8, &mut g)).collect())
        .collect();
    let batch = QueryBatch::new(persons.clone(), 31).unwrap();
    let db = IrisDb::random(s, l, 0.8, &mut g);
    let planes = PlaneSet::for_variant(ProtocolVariant::PlainMask);
    let dbs = deal_db(&db, Backend::Replicated, planes, &mut g).map_err(|e| e.to_string())?;
    let qs = batch.deal(l, Backend::Replicated, planes, &mut g).map_err(|e| e.to_string())?;
    let cfg = EngineConfig::new(Backend::Replicated, ProtocolVariant::PlainMask, MatchParams::default(), l).unwrap();
    let out = run_parties(&test_seeds(11), OpenPolicy::Production, |p| {
        let i = p.id().idx();
        run_query(p, &cfg, &dbs[i], &qs[i])
    })
    .map_err(|e| e.to_string())?;
    let st = &out[0].stats;
    let inner_want = 2 * 31 * 2 * (32 * 31 / 2);
    // one 2-byte reshare per comparison in the plain-mask dot phase
    let from_ledger = st.phase_bytes.dot / 2;
    let (plan, _) = comparison_plan(&shape, s);
    let per_row = plan.iter().filter(|c| c.target == Target::Db(0)).count();
    let counts_ok = st.query_codes == 1984
        && per_row == 1984
        && st.db_comparisons == 1984 * s
        && st.inner_comparisons == inner_want
        && from_ledger as usize == st.comparisons;

    // duplicate person in an otherwise fresh batch against an empty database;
    // full-size codes keep chance matches between strangers negligible
    let l = 1024;
    let mut dup: Vec<Vec<IrisRecord>> = (0..5)
        .map(|_| (0..2).map(|_| IrisRecord::random(l, 0.8, &mut g)).collect())
        .collect();
    dup.push(dup[2].clone());
    let batch = QueryBatch::new(dup, 31).unwrap();
    let empty = IrisDb::new(l);
    let mut flagged = Vec::new();
    for v in [ProtocolVariant::PlainMask, ProtocolVariant::MpcLift] {
        let planes = PlaneSet::for_variant(v);
        let dbs = deal_db(&empty, Backend::ShamirGalois, planes, &mut g).map_err(|e| e.to_string())?;
        let qs = batch.deal(l, Backend::ShamirGalois, planes, &mut g).map_err(|e| e.to_string())?;
        let cfg = EngineConfig::new(Backend::ShamirGalois, v, MatchParams::default(), l).unwrap();
        let out = run_parties(&test_seeds(12), OpenPolicy::Production, |p| {
            let i = p.id().idx();
            run_query(p, &cfg, &dbs[i], &qs[i])
        })
        .map_err(|e| e.to_string())?;
        flagged.push(out[0].matches.clone().unwrap_or_default());
    }
    let dup_ok = flagged.iter().all(|f| *f == [false, false, false, false, false, true]);
    ensure(
        counts_ok && dup_ok,
        format!(
            "{} query codes, {} per db row, {} inner pairs, {} comparisons from ledger of {}; duplicate flags {:?}",
            st.query_codes, per_row, st.inner_comparisons, from_ledger, st.comparisons, flagged[0]
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("oracle equivalence", c1_oracle_equivalence),
        ("MSB cost", c2_msb_cost),
        ("dot-product communication independence", c3_dot_independence),
        ("Hamming-phase communication scaling", c4_hamming_scaling),
        ("comparison-phase communication at n=100k", c5_table3),
        ("MpcLift bytes per comparison", c6_mpc_lift_per_comparison),
        ("bound checks", c7_bounds),
        ("Shamir share size halving", c8_shamir_halving),
        ("throughput and MAC halving", c9_throughput_and_macs),
        ("batch semantics", c10_batch),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let (tag, detail) = match f() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {:>2} {tag}: {name}: {detail} [{:.1} s]", i + 1, t.elapsed().as_secs_f64());
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
