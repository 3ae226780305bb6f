//! Brute-force reference predicate and the randomized equivalence driver.
//!
//! The reference works on raw `u64` words with popcounts and integer
//! comparisons. It shares no arithmetic with the masked-vector code.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::engine::{deal_db, Backend, EngineConfig, PlaneSet, ProtocolVariant, QueryBatch};
use crate::error::{Error, Result};
use crate::iris::{IrisDb, IrisRecord, MatchParams};
use crate::party::{run_parties, test_seeds, OpenPolicy};

fn words(bits: impl Iterator<Item = bool>) -> Vec<u64> {
    let mut out = Vec::new();
    for (i, b) in bits.enumerate() {
        if i % 64 == 0 {
            out.push(0);
        }
        if b {
            *out.last_mut().unwrap() |= 1 << (i % 64);
        }
    }
    out
}

/// `(hd, ml)` by popcount over packed words.
pub fn naive_counts(q: &IrisRecord, d: &IrisRecord) -> (u64, u64) {
    let (qc, qm) = (words(q.code().iter().by_vals()), words(q.mask().iter().by_vals()));
    let (dc, dm) = (words(d.code().iter().by_vals()), words(d.mask().iter().by_vals()));
    let mut hd = 0;
    let mut ml = 0;
    for i in 0..qc.len() {
        let m = qm[i] & dm[i];
        hd += ((qc[i] ^ dc[i]) & m).count_ones() as u64;
        ml += m.count_ones() as u64;
    }
    (hd, ml)
}

/// `hd/ml < (b - a)/(2b)` in integers; an empty combined mask never matches.
pub fn naive_predicate(q: &IrisRecord, d: &IrisRecord, params: &MatchParams) -> bool {
    let (hd, ml) = naive_counts(q, d);
    let lhs = 2 * params.b as u128 * hd as u128;
    let rhs = (params.b - params.a) as u128 * ml as u128;
    ml > 0 && lhs < rhs
}

/// A query against a small database with expected answers from the reference.
#[derive(Clone, Debug)]
pub struct TestInstance {
    pub seed: u64,
    pub l: usize,
    pub s: usize,
    pub mask_density: f64,
    pub params: MatchParams,
    pub query: IrisRecord,
    pub db: IrisDb,
    pub expected_rows: Vec<bool>,
    pub expected: bool,
}

impl TestInstance {
    fn finish(seed: u64, mask_density: f64, params: MatchParams, query: IrisRecord, db: IrisDb) -> Self {
        let expected_rows: Vec<bool> = db.rows().map(|r| naive_predicate(&query, &r, &params)).collect();
        Self {
            seed,
            l: db.l(),
            s: db.len(),
            mask_density,
            params,
            query,
            expected: expected_rows.iter().any(|&b| b),
            expected_rows,
            db,
        }
    }

    /// Random instance; about half the rows are noisy copies of the query
    /// so both outcomes occur.
    pub fn random(seed: u64, l: usize, s: usize, params: MatchParams) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let density = rng.gen_range(0.5..1.0);
        let query = IrisRecord::random(l, density, &mut rng);
        let mut db = IrisDb::new(l);
        for _ in 0..s {
            let row = if rng.gen_bool(0.5) {
                let flip = rng.gen_range(0.1..0.6);
                let code: Vec<bool> = query.code().iter().by_vals().map(|b| b ^ rng.gen_bool(flip)).collect();
                let mask: Vec<bool> = (0..l).map(|_| rng.gen_bool(density)).collect();
                IrisRecord::from_bools(&code, &mask).expect("same length")
            } else {
                IrisRecord::random(l, density, &mut rng)
            };
            db.push(&row).expect("same length");
        }
        Self::finish(seed, density, params, query, db)
    }

    /// Row 0 sits at `b·dot - a·ml ∈ {-g, 0, g}` with `g = gcd(a, b)`, the
    /// closest the threshold can be approached.
    pub fn boundary(seed: u64, l: usize, s: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // resample until the threshold is reachable within `l` bits
        let (params, cands) = loop {
            let params = if rng.gen_bool(0.3) {
                MatchParams::default()
            } else {
                let j = rng.gen_range(11..16);
                let a = (rng.gen_range(0..1u64 << (16 - j)) | 1) << j;
                MatchParams::with_ab(a, 1 << 16).expect("valid pair")
            };
            let (a, b) = (params.a as i128, params.b as i128);
            let g = gcd(params.a, params.b) as i128;
            let mut cands = Vec::new();
            for ml in 1..=l as i128 {
                for hd in 0..=ml {
                    let margin = b * (ml - 2 * hd) - a * ml;
                    if margin.abs() <= g {
                        cands.push((ml as usize, hd as usize));
                    }
                }
            }
            if !cands.is_empty() {
                break (params, cands);
            }
        };
        let (ml, hd) = cands[rng.gen_range(0..cands.len())];
        let q = IrisRecord::random(l, 0.7, &mut rng);
        let valid = sample(&mut rng, l, ml).into_vec();
        let diff: std::collections::HashSet<usize> = valid[..hd].iter().copied().collect();
        let valid: std::collections::HashSet<usize> = valid.into_iter().collect();
        let mut qm = vec![false; l];
        let mut dm = vec![false; l];
        for i in 0..l {
            if valid.contains(&i) {
                qm[i] = true;
                dm[i] = true;
            } else {
                // at most one side valid
                match rng.gen_range(0..3) {
                    0 => qm[i] = true,
                    1 => dm[i] = true,
                    _ => {}
                }
            }
        }
        let qc: Vec<bool> = q.code().iter().by_vals().collect();
        let dc: Vec<bool> = (0..l)
            .map(|i| if valid.contains(&i) { qc[i] ^ diff.contains(&i) } else { rng.gen() })
            .collect();
        let query = IrisRecord::from_bools(&qc, &qm).expect("same length");
        let mut db = IrisDb::new(l);
        db.push(&IrisRecord::from_bools(&dc, &dm).expect("same length")).expect("same length");
        for _ in 1..s {
            db.push(&IrisRecord::random(l, 0.7, &mut rng)).expect("same length");
        }
        Self::finish(seed, 0.7, params, query, db)
    }

    /// Every mask bit unset.
    pub fn all_unset(seed: u64, l: usize, s: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let blank = |rng: &mut ChaCha8Rng| {
            let code: Vec<bool> = (0..l).map(|_| rng.gen()).collect();
            IrisRecord::from_bools(&code, &vec![false; l]).expect("same length")
        };
        let query = blank(&mut rng);
        let mut db = IrisDb::new(l);
        for _ in 0..s {
            db.push(&blank(&mut rng)).expect("same length");
        }
        Self::finish(seed, 0.0, MatchParams::default(), query, db)
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Per-row and aggregate answers of the three-party protocol, read at the
/// output party with debug opening enabled.
pub fn run_instance(inst: &TestInstance, backend: Backend, variant: ProtocolVariant) -> Result<(Vec<bool>, bool)> {
    let mut rng = ChaCha8Rng::seed_from_u64(inst.seed ^ 0x5eed);
    let planes = PlaneSet::for_variant(variant);
    let dbs = deal_db(&inst.db, backend, planes, &mut rng)?;
    let batch = QueryBatch::new(vec![vec![inst.query.clone()]], 1)?;
    let qs = batch.deal(inst.l, backend, planes, &mut rng)?;
    let cfg = EngineConfig::new(backend, variant, inst.params, inst.l)?;
    let [out, _, _] = run_parties(&test_seeds(inst.seed), OpenPolicy::Debug, |p| {
        let i = p.id().idx();
        crate::engine::run_query(p, &cfg, &dbs[i], &qs[i])
    })?;
    let rows = out.per_comparison.ok_or_else(|| Error::InvalidInput("no per-row output".into()))?;
    let agg = out.matches.and_then(|m| m.first().copied()).unwrap_or(false);
    Ok((rows, agg))
}

/// Grid of configurations to compare against the reference.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EquivalenceGrid {
    pub backends: Vec<Backend>,
    pub variants: Vec<ProtocolVariant>,
    pub lengths: Vec<usize>,
    pub sizes: Vec<usize>,
    pub seeds: u64,
    pub boundary_instances: u64,
}

impl Default for EquivalenceGrid {
    fn default() -> Self {
        Self {
            backends: Backend::ALL.to_vec(),
            variants: ProtocolVariant::ALL.to_vec(),
            lengths: vec![8, 64],
            sizes: vec![1, 4, 64],
            seeds: 100,
            boundary_instances: 100,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mismatch {
    pub kind: String,
    pub backend: Backend,
    pub variant: ProtocolVariant,
    pub l: usize,
    pub s: usize,
    pub seed: u64,
    pub expected_rows: Vec<bool>,
    pub got_rows: Vec<bool>,
    pub expected: bool,
    pub got: bool,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub instances: u64,
    pub protocol_runs: u64,
    pub row_comparisons: u64,
    pub positive_rows: u64,
    pub boundary_runs: u64,
    pub mismatches: Vec<Mismatch>,
    pub wall_ms: f64,
}

impl EquivalenceReport {
    pub fn summary(&self) -> String {
        format!(
            "{} instances, {} protocol runs ({} boundary), {} row comparisons ({} positive), {} mismatches, {:.0} ms",
            self.instances,
            self.protocol_runs,
            self.boundary_runs,
            self.row_comparisons,
            self.positive_rows,
            self.mismatches.len(),
            self.wall_ms
        )
    }
}

struct Job {
    kind: &'static str,
    inst: TestInstance,
}

/// Runs every instance of `grid` under every backend and variant.
pub fn run_equivalence(grid: &EquivalenceGrid) -> EquivalenceReport {
    let start = std::time::Instant::now();
    let mut jobs = Vec::new();
    for &l in &grid.lengths {
        for &s in &grid.sizes {
            for seed in 0..grid.seeds {
                let seed = seed * 1_000_003 + (l as u64) * 97 + s as u64;
                jobs.push(Job {
                    kind: "random",
                    inst: TestInstance::random(seed, l, s, MatchParams::default()),
                });
            }
        }
    }
    for i in 0..grid.boundary_instances {
        let l = grid.lengths[i as usize % grid.lengths.len()];
        let s = grid.sizes[i as usize % grid.sizes.len()].min(4);
        jobs.push(Job {
            kind: "boundary",
            inst: TestInstance::boundary(0xb0_0000 + i, l, s),
        });
    }
    if let Some(&l) = grid.lengths.first() {
        jobs.push(Job {
            kind: "all-unset",
            inst: TestInstance::all_unset(7, l, 4),
        });
    }

    let threads = std::thread::available_parallelism().map_or(1, |n| n.get()).max(1);
    let chunk = jobs.len().div_ceil(threads).max(1);
    let parts: Vec<EquivalenceReport> = std::thread::scope(|sc| {
        let hs: Vec<_> = jobs.chunks(chunk).map(|js| sc.spawn(|| run_jobs(js, grid))).collect();
        hs.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    let mut rep = EquivalenceReport {
        instances: jobs.len() as u64,
        ..Default::default()
    };
    for p in parts {
        rep.protocol_runs += p.protocol_runs;
        rep.row_comparisons += p.row_comparisons;
        rep.positive_rows += p.positive_rows;
        rep.boundary_runs += p.boundary_runs;
        rep.mismatches.extend(p.mismatches);
    }
    rep.wall_ms = start.elapsed().as_secs_f64() * 1e3;
    rep
}

fn run_jobs(jobs: &[Job], grid: &EquivalenceGrid) -> EquivalenceReport {
    let mut rep = EquivalenceReport::default();
    for job in jobs {
        let inst = &job.inst;
        for &backend in &grid.backends {
            for &variant in &grid.variants {
                rep.protocol_runs += 1;
                rep.row_comparisons += inst.s as u64;
                rep.positive_rows += inst.expected_rows.iter().filter(|&&b| b).count() as u64;
                if job.kind == "boundary" {
                    rep.boundary_runs += 1;
                }
                let res = run_instance(inst, backend, variant);
                let (got_rows, got, error) = match res {
                    Ok((r, g)) => (r, g, None),
                    Err(e) => (Vec::new(), false, Some(e.to_string())),
                };
                if error.is_some() || got_rows != inst.expected_rows || got != inst.expected {
                    rep.mismatches.push(Mismatch {
                        kind: job.kind.to_string(),
                        backend,
                        variant,
                        l: inst.l,
                        s: inst.s,
                        seed: inst.seed,
                        expected_rows: inst.expected_rows.clone(),
                        got_rows,
                        expected: inst.expected,
                        got,
                        error,
                    });
                }
            }
        }
    }
    rep
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::iris::{plain_masked_comparison, MatchRule};
    use crate::Z32;

    #[test]
    fn identical_and_complement() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = MatchParams::default();
        for _ in 0..50 {
            let r = IrisRecord::random(64, 0.9, &mut rng);
            let (hd, ml) = naive_counts(&r, &r);
            assert_eq!(hd, 0);
            assert_eq!(naive_predicate(&r, &r, &p), ml > 0);
            assert!(!naive_predicate(&r, &r.complement(), &p));
        }
    }

    #[test]
    fn counts_by_hand() {
        let q = IrisRecord::from_bools(&[true, false, true, true], &[true, true, true, false]).unwrap();
        let d = IrisRecord::from_bools(&[true, true, false, false], &[true, true, false, true]).unwrap();
        assert_eq!(naive_counts(&q, &d), (1, 2));
    }

    #[test]
    fn two_plaintext_paths_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let params = [MatchParams::default(), MatchParams::with_ab(12345, 1 << 16).unwrap()];
        for i in 0..100_000 {
            let p = &params[i % 2];
            let q = IrisRecord::random(64, 0.8, &mut rng);
            let d = if i % 3 == 0 {
                let code: Vec<bool> = q.code().iter().by_vals().map(|b| b ^ rng.gen_bool(0.3)).collect();
                IrisRecord::from_bools(&code, &q.mask().iter().by_vals().collect::<Vec<_>>()).unwrap()
            } else {
                IrisRecord::random(64, 0.8, &mut rng)
            };
            let want = naive_predicate(&q, &d, p);
            let (qv, dv) = (q.masked::<Z32>(), d.masked::<Z32>());
            assert_eq!(plain_masked_comparison(&qv, &dv, p, MatchRule::PublicMask), want);
            assert_eq!(plain_masked_comparison(&qv, &dv, p, MatchRule::SharedMask), want);
        }
    }

    #[test]
    fn boundary_instances_hit_the_threshold() {
        for seed in 0..50 {
            let inst = TestInstance::boundary(seed, 64, 2);
            let (hd, ml) = naive_counts(&inst.query, &inst.db.row(0));
            let (a, b) = (inst.params.a as i128, inst.params.b as i128);
            let margin = b * (ml as i128 - 2 * hd as i128) - a * ml as i128;
            assert!(margin.abs() <= gcd(inst.params.a, inst.params.b) as i128);
        }
    }

    #[test]
    fn small_grid_has_no_mismatch() {
        let grid = EquivalenceGrid {
            seeds: 3,
            boundary_instances: 6,
            ..Default::default()
        };
        let rep = run_equivalence(&grid);
        assert!(rep.mismatches.is_empty(), "{:?}", rep.mismatches.first());
        assert_eq!(rep.protocol_runs, (2 * 3 * 3 + 6 + 1) * 8);
        assert!(rep.positive_rows > 0);
    }

    #[test]
    fn all_unset_never_matches() {
        let inst = TestInstance::all_unset(3, 64, 4);
        assert_eq!(inst.expected_rows, vec![false; 4]);
        for v in ProtocolVariant::ALL {
            assert_eq!(run_instance(&inst, Backend::Replicated, v).unwrap(), (vec![false; 4], false));
        }
    }
}
