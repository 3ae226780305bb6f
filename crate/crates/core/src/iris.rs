//! Plaintext iris codes, the masked `{-1, 0, 1}` encoding and threshold
//! parameters.
//!
//! A masked bit is `a' = m - 2(a ∧ m)`, so `(T, U, F) = (-1, 0, 1)`. For two
//! masked vectors the inner product is `dot = ml - 2·hd`, where `ml` counts
//! positions valid in both masks and `hd` counts differing valid positions.
//! Every comparison in the crate is phrased in terms of `dot` and `ml`.

use bitvec::prelude::*;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ring::Ring;

pub type BitRow = BitVec<u64, Lsb0>;

/// Default iris code length in bits.
pub const DEFAULT_LEN: usize = 12800;
/// Default number of rotations per query eye.
pub const DEFAULT_ROTATIONS: usize = 31;

/// A code bitvector with its validity mask.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IrisRecord {
    code: BitRow,
    mask: BitRow,
}

impl IrisRecord {
    pub fn new(code: BitRow, mask: BitRow) -> Result<Self> {
        if code.len() != mask.len() {
            return Err(Error::InvalidInput(format!(
                "code has {} bits but mask has {}",
                code.len(),
                mask.len()
            )));
        }
        Ok(Self { code, mask })
    }

    pub fn from_bools(code: &[bool], mask: &[bool]) -> Result<Self> {
        Self::new(code.iter().collect(), mask.iter().collect())
    }

    /// Uniform code bits; each mask bit set with probability `mask_density`.
    pub fn random<G: Rng + ?Sized>(l: usize, mask_density: f64, rng: &mut G) -> Self {
        let code = (0..l).map(|_| rng.gen::<bool>()).collect();
        let mask = (0..l).map(|_| rng.gen_bool(mask_density)).collect();
        Self { code, mask }
    }

    pub fn len(&self) -> usize {
        self.code.len()
    }

    pub fn is_empty(&self) -> bool {
        self.code.is_empty()
    }

    pub fn code(&self) -> &BitSlice<u64, Lsb0> {
        &self.code
    }

    pub fn mask(&self) -> &BitSlice<u64, Lsb0> {
        &self.mask
    }

    /// Same mask, every code bit flipped.
    pub fn complement(&self) -> Self {
        Self {
            code: !self.code.clone(),
            mask: self.mask.clone(),
        }
    }

    /// `out[i] = self[(i + shift) mod l]` for code and mask alike.
    pub fn rotate(&self, shift: isize) -> Self {
        let l = self.len();
        if l == 0 {
            return self.clone();
        }
        let s = shift.rem_euclid(l as isize) as usize;
        let mut code = self.code.clone();
        let mut mask = self.mask.clone();
        code.rotate_left(s);
        mask.rotate_left(s);
        Self { code, mask }
    }

    /// Masked encoding of every position.
    pub fn masked<R: Ring>(&self) -> MaskedVector<R> {
        MaskedVector(
            self.code
                .iter()
                .by_vals()
                .zip(self.mask.iter().by_vals())
                .map(|(c, m)| to_masked(c, m))
                .collect(),
        )
    }

    /// Mask bits embedded as 0/1 ring elements.
    pub fn mask_ring<R: Ring>(&self) -> Vec<R> {
        self.mask.iter().by_vals().map(|m| R::from_u64(m as u64)).collect()
    }
}

/// `s` records of equal length stored as two row-major bit matrices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IrisDb {
    l: usize,
    codes: BitRow,
    masks: BitRow,
}

impl IrisDb {
    pub fn new(l: usize) -> Self {
        Self {
            l,
            codes: BitRow::new(),
            masks: BitRow::new(),
        }
    }

    pub fn from_records(l: usize, records: &[IrisRecord]) -> Result<Self> {
        let mut db = Self::new(l);
        for r in records {
            db.push(r)?;
        }
        Ok(db)
    }

    pub fn from_matrices(l: usize, codes: BitRow, masks: BitRow) -> Result<Self> {
        if codes.len() != masks.len() || (l == 0 && !codes.is_empty()) || (l > 0 && !codes.len().is_multiple_of(l)) {
            return Err(Error::InvalidInput("bit matrices do not form whole rows".into()));
        }
        Ok(Self { l, codes, masks })
    }

    pub fn random<G: Rng + ?Sized>(s: usize, l: usize, mask_density: f64, rng: &mut G) -> Self {
        let mut db = Self::new(l);
        for _ in 0..s {
            db.push(&IrisRecord::random(l, mask_density, rng)).expect("lengths agree");
        }
        db
    }

    pub fn push(&mut self, r: &IrisRecord) -> Result<()> {
        if r.len() != self.l {
            return Err(Error::InvalidInput(format!(
                "record has {} bits, database rows have {}",
                r.len(),
                self.l
            )));
        }
        self.codes.extend_from_bitslice(r.code());
        self.masks.extend_from_bitslice(r.mask());
        Ok(())
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn len(&self) -> usize {
        self.codes.len().checked_div(self.l).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn codes(&self) -> &BitSlice<u64, Lsb0> {
        &self.codes
    }

    pub fn masks(&self) -> &BitSlice<u64, Lsb0> {
        &self.masks
    }

    pub fn row(&self, i: usize) -> IrisRecord {
        let r = i * self.l..(i + 1) * self.l;
        IrisRecord {
            code: self.codes[r.clone()].to_bitvec(),
            mask: self.masks[r].to_bitvec(),
        }
    }

    pub fn rows(&self) -> impl Iterator<Item = IrisRecord> + '_ {
        (0..self.len()).map(|i| self.row(i))
    }
}

/// Entries in `{-1, 0, 1}` embedded in a ring.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MaskedVector<R>(pub Vec<R>);

impl<R: Ring> MaskedVector<R> {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[R] {
        &self.0
    }

    /// Squares recover the mask: `a'^2 = m`.
    pub fn mask(&self) -> Vec<R> {
        self.0.iter().map(|&x| x * x).collect()
    }
}

/// `m - 2(a ∧ m)`.
pub fn to_masked<R: Ring>(bit: bool, mask_bit: bool) -> R {
    let m = mask_bit as i64;
    R::from_i64(m - 2 * ((bit && mask_bit) as i64))
}

/// Number of `T` entries, computed as `½ Σ (a'^2 - a')`.
pub fn count_ones_masked<R: Ring>(v: &[R]) -> u64 {
    let twice: i64 = v.iter().map(|x| x.to_i64()).map(|x| x * x - x).sum();
    (twice / 2) as u64
}

/// `Σ a + Σ b - 2⟨a, b⟩` over 0/1 vectors in the ring.
pub fn hamming_distance_ring<R: Ring>(a: &[R], b: &[R]) -> u64 {
    let sa: R = a.iter().copied().sum();
    let sb: R = b.iter().copied().sum();
    (sa + sb - R::from_u64(2) * crate::ring::dot(a, b)).to_u64()
}

/// How the threshold is evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchRule {
    /// `ml` is public: match iff `dot > ⌊a·ml/b⌋`.
    PublicMask,
    /// `ml` is secret: match iff `b·dot > a·ml`.
    SharedMask,
}

/// Threshold parameters with `a/b ≈ 1 - 2·match_ratio` and `b = 2^m`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchParams {
    pub match_ratio: f64,
    pub a: u64,
    pub b: u64,
    pub m: u32,
}

impl Default for MatchParams {
    fn default() -> Self {
        Self::from_ratio(0.375, 16).expect("valid default")
    }
}

impl MatchParams {
    /// Rounds `(1 - 2·ratio)·2^m` to the nearest integer for `a`.
    pub fn from_ratio(match_ratio: f64, m: u32) -> Result<Self> {
        if !(0.0..=0.5).contains(&match_ratio) {
            return Err(Error::InvalidInput(format!(
                "match ratio {match_ratio} outside [0, 0.5]"
            )));
        }
        if !(1..=30).contains(&m) {
            return Err(Error::InvalidInput(format!("precision {m} outside 1..=30")));
        }
        let b = 1u64 << m;
        let a = ((1.0 - 2.0 * match_ratio) * b as f64).round() as u64;
        Ok(Self { match_ratio, a, b, m })
    }

    /// Explicit integer pair; `b` must be a power of two and `a ≤ b`.
    pub fn with_ab(a: u64, b: u64) -> Result<Self> {
        if !b.is_power_of_two() || b > 1 << 30 {
            return Err(Error::InvalidInput(format!("b = {b} is not a power of two ≤ 2^30")));
        }
        if a > b {
            return Err(Error::InvalidInput(format!("a = {a} exceeds b = {b}")));
        }
        Ok(Self {
            match_ratio: (1.0 - a as f64 / b as f64) / 2.0,
            a,
            b,
            m: b.trailing_zeros(),
        })
    }

    /// Public-mask threshold `⌊a·ml/b⌋`. For integer `dot`, `dot > ⌊x⌋` iff
    /// `dot > x`, so the rule agrees with `b·dot > a·ml` exactly.
    pub fn public_threshold(&self, ml: u64) -> u64 {
        self.a * ml / self.b
    }

    /// Range condition for `MSB(⌊f·ml⌋ - dot)` over `Z_{2^bits}`:
    /// `l < t/4` and `l < t - 2^(bits-1)`.
    pub fn check_public_bounds(l: usize, bits: u32) -> Result<()> {
        check_range(l as u128, bits, "l")
    }

    /// Range condition for `MSB(a·ml - b·dot)` over `Z_{2^bits}`:
    /// `b·l < t/4` and `b·l < t - 2^(bits-1)`.
    pub fn check_shared_bounds(&self, l: usize, bits: u32) -> Result<()> {
        check_range(self.b as u128 * l as u128, bits, "b·l")
    }

    /// Applies `rule` to plaintext `dot` and `ml`.
    pub fn matches(&self, rule: MatchRule, dot: i64, ml: u64) -> bool {
        match rule {
            MatchRule::PublicMask => dot > self.public_threshold(ml) as i64,
            MatchRule::SharedMask => self.b as i128 * dot as i128 > self.a as i128 * ml as i128,
        }
    }
}

fn check_range(v: u128, bits: u32, what: &str) -> Result<()> {
    let t = 1u128 << bits;
    if v < t / 4 && v < t - (1u128 << (bits - 1)) {
        Ok(())
    } else {
        Err(Error::BoundsViolation(format!(
            "{what} = {v} too large for a {bits}-bit comparison ring"
        )))
    }
}

/// Threshold decision on two masked vectors. `ml` is recovered as
/// `Σ q'^2·d'^2`, so the masks need not be passed separately.
pub fn plain_masked_comparison<R: Ring>(
    query: &MaskedVector<R>,
    db: &MaskedVector<R>,
    params: &MatchParams,
    rule: MatchRule,
) -> bool {
    let dot = crate::ring::dot(query.as_slice(), db.as_slice()).to_i64();
    let ml = query
        .as_slice()
        .iter()
        .zip(db.as_slice())
        .map(|(&q, &d)| q * q * d * d)
        .sum::<R>()
        .to_u64();
    params.matches(rule, dot, ml)
}

/// `MSB(⌊f·ml⌋ - dot)` evaluated in `R`, the form the public-mask protocol
/// computes on shares.
pub fn public_msb_form<R: Ring>(dot: i64, ml: u64, params: &MatchParams) -> bool {
    (R::from_u64(params.public_threshold(ml)) - R::from_i64(dot)).msb()
}

/// `MSB(a·ml - b·dot)` evaluated in `R`.
pub fn shared_msb_form<R: Ring>(dot: i64, ml: u64, params: &MatchParams) -> bool {
    (R::from_u64(params.a) * R::from_u64(ml) - R::from_u64(params.b) * R::from_i64(dot)).msb()
}

/// Whether `query` matches any row of `db`, via the masked-vector encoding.
pub fn plain_membership(query: &IrisRecord, db: &IrisDb, params: &MatchParams, rule: MatchRule) -> bool {
    let q = query.masked::<crate::Z32>();
    db.rows().any(|row| plain_masked_comparison(&q, &row.masked(), params, rule))
}

/// Rotation step in bits for code length `l`.
pub fn rotation_stride(l: usize) -> usize {
    (l / 64).max(1)
}

/// The `r` rotations of `query` by `-(r-1)/2 ..= (r-1)/2` strides.
pub fn expand_rotations(query: &IrisRecord, r: usize) -> Result<Vec<IrisRecord>> {
    if r.is_multiple_of(2) {
        return Err(Error::InvalidInput(format!("rotation count {r} must be odd")));
    }
    let half = (r as isize - 1) / 2;
    let stride = rotation_stride(query.len()) as isize;
    Ok((-half..=half).map(|k| query.rotate(k * stride)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{Z16, Z32};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn zv(v: &[i64]) -> Vec<Z16> {
        v.iter().map(|&x| Z16::from_i64(x)).collect()
    }

    #[test]
    fn masked_states() {
        assert_eq!(to_masked::<Z16>(false, true).to_i64(), 1);
        assert_eq!(to_masked::<Z16>(true, true).to_i64(), -1);
        assert_eq!(to_masked::<Z16>(false, false).to_i64(), 0);
        assert_eq!(to_masked::<Z16>(true, false).to_i64(), 0);
    }

    #[test]
    fn count_ones() {
        assert_eq!(count_ones_masked(&zv(&[-1, 0, 1])), 1);
        assert_eq!(count_ones_masked(&zv(&[0, 0, 0, 0])), 0);
        assert_eq!(count_ones_masked(&zv(&[-1, -1, 1, 0])), 2);
    }

    #[test]
    fn hamming_examples() {
        assert_eq!(hamming_distance_ring(&zv(&[1, 0, 1]), &zv(&[1, 1, 0])), 2);
        let a = zv(&[1, 0, 1, 1]);
        assert_eq!(hamming_distance_ring(&a, &a), 0);
        let ones = vec![Z16::from_u64(1); 12800];
        let zeros = vec![Z16::from_u64(0); 12800];
        assert_eq!(hamming_distance_ring(&ones, &zeros), 12800);
    }

    #[test]
    fn default_params() {
        let p = MatchParams::default();
        assert_eq!((p.a, p.b, p.m), (1 << 14, 1 << 16, 16));
        assert_eq!(p.public_threshold(100), 25);
        assert_eq!(p.public_threshold(101), 25);
        assert_eq!(p.public_threshold(104), 26);
        assert!(MatchParams::from_ratio(0.6, 16).is_err());
        assert!(MatchParams::with_ab(5, 3).is_err());
        assert!(MatchParams::with_ab(3, 6).is_err());
    }

    #[test]
    fn bounds() {
        let p = MatchParams::default();
        assert!(MatchParams::check_public_bounds(12800, 16).is_ok());
        assert!(matches!(
            MatchParams::check_public_bounds(20000, 16),
            Err(Error::BoundsViolation(_))
        ));
        assert!(MatchParams::check_public_bounds(16384, 16).is_err());
        assert!(MatchParams::check_public_bounds(16383, 16).is_ok());
        assert!(p.check_shared_bounds(12800, 32).is_ok());
        assert!(p.check_shared_bounds(12800, 16).is_err());
        assert!(p.check_shared_bounds(16384, 32).is_err());
    }

    #[test]
    fn identical_and_complement() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let q = IrisRecord::random(128, 1.0, &mut rng);
        let p = MatchParams::default();
        for rule in [MatchRule::PublicMask, MatchRule::SharedMask] {
            let db = IrisDb::from_records(128, std::slice::from_ref(&q)).unwrap();
            assert!(plain_membership(&q, &db, &p, rule));
            let db = IrisDb::from_records(128, &[q.complement()]).unwrap();
            assert!(!plain_membership(&q, &db, &p, rule));
        }
    }

    #[test]
    fn disjoint_masks_never_match() {
        let q = IrisRecord::from_bools(&[true, false, true, false], &[true, true, false, false]).unwrap();
        let d = IrisRecord::from_bools(&[true, false, true, false], &[false, false, true, true]).unwrap();
        for rule in [MatchRule::PublicMask, MatchRule::SharedMask] {
            assert!(!plain_masked_comparison(
                &q.masked::<Z32>(),
                &d.masked(),
                &MatchParams::default(),
                rule
            ));
        }
    }

    #[test]
    fn rotations() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let q = IrisRecord::random(640, 0.8, &mut rng);
        assert_eq!(expand_rotations(&q, 1).unwrap(), vec![q.clone()]);
        assert!(expand_rotations(&q, 4).is_err());
        assert_eq!(q.rotate(10).rotate(-10), q);
        let rots = expand_rotations(&q, 31).unwrap();
        assert_eq!(rots.len(), 31);
        assert_eq!(rots[15], q);
        assert_eq!(rots[16], q.rotate(10));
        // index check of the rotation direction
        let r = q.rotate(3);
        for i in 0..640 {
            assert_eq!(r.code()[i], q.code()[(i + 3) % 640]);
        }
    }

    #[test]
    fn only_one_rotation_aligns() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let stored = IrisRecord::random(1280, 0.9, &mut rng);
        // The probe is the stored code shifted by four strides; only the
        // rotation undoing that shift matches.
        let probe = stored.rotate(-4 * rotation_stride(1280) as isize);
        let db = IrisDb::from_records(1280, &[stored]).unwrap();
        let p = MatchParams::default();
        let hits: Vec<bool> = expand_rotations(&probe, 31)
            .unwrap()
            .iter()
            .map(|r| plain_membership(r, &db, &p, MatchRule::SharedMask))
            .collect();
        assert_eq!(hits.iter().filter(|h| **h).count(), 1);
        assert!(hits[15 + 4]);
    }

    #[test]
    fn db_rows_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let recs: Vec<_> = (0..5).map(|_| IrisRecord::random(77, 0.5, &mut rng)).collect();
        let db = IrisDb::from_records(77, &recs).unwrap();
        assert_eq!(db.len(), 5);
        for (i, r) in recs.iter().enumerate() {
            assert_eq!(&db.row(i), r);
        }
        assert!(IrisDb::new(77).push(&IrisRecord::random(76, 0.5, &mut rng)).is_err());
    }

    proptest! {
        #[test]
        fn square_recovers_mask(a: bool, m: bool) {
            let x = to_masked::<Z16>(a, m);
            prop_assert_eq!((x * x).to_i64(), m as i64);
        }

        #[test]
        fn count_ones_is_t_count(v in proptest::collection::vec(-1i64..=1, 0..300)) {
            let direct = v.iter().filter(|&&x| x == -1).count() as u64;
            prop_assert_eq!(count_ones_masked(&zv(&v)), direct);
        }

        #[test]
        fn hamming_is_xor_popcount(seed: u64, l in 1usize..12801) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a: Vec<bool> = (0..l).map(|_| rand::Rng::gen(&mut rng)).collect();
            let b: Vec<bool> = (0..l).map(|_| rand::Rng::gen(&mut rng)).collect();
            let xor = a.iter().zip(&b).filter(|(x, y)| x != y).count() as u64;
            let ra: Vec<Z16> = a.iter().map(|&x| Z16::from_u64(x as u64)).collect();
            let rb: Vec<Z16> = b.iter().map(|&x| Z16::from_u64(x as u64)).collect();
            prop_assert_eq!(hamming_distance_ring(&ra, &rb), xor);
        }

        #[test]
        fn masked_dot_is_ml_minus_twice_hd(seed: u64) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let q = IrisRecord::random(200, 0.7, &mut rng);
            let d = IrisRecord::random(200, 0.7, &mut rng);
            let mut ml = 0i64;
            let mut hd = 0i64;
            for i in 0..200 {
                if q.mask()[i] && d.mask()[i] {
                    ml += 1;
                    hd += (q.code()[i] != d.code()[i]) as i64;
                }
            }
            let dot = crate::ring::dot(q.masked::<Z16>().as_slice(), d.masked::<Z16>().as_slice());
            prop_assert_eq!(dot.to_i64(), ml - 2 * hd);
        }
    }
}
