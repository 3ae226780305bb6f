//! End-to-end membership protocols.
//!
//! A query batch holds the rotated eye codes of several persons. Every
//! query code is compared with every database row, and with the unrotated
//! eyes of every earlier person in the batch, so duplicates inside one
//! batch are caught. The comparison bits of one person are OR-ed together
//! and only that aggregate is opened, to party 1.
//!
//! Variants differ in the rings the two dot products live in:
//!
//! | variant       | codes  | masks         | comparison                 |
//! |---------------|--------|---------------|----------------------------|
//! | `PlainMask`   | 16 bit | public        | `MSB(⌊f·ml⌋ - dot)`, 16 bit |
//! | `MpcLift`     | 16 bit | 16 bit, lifted | `MSB(a·ml - b·dot)`, 32 bit |
//! | `ConstLift`   | 16 bit | 32 bit        | `MSB(a·ml - b·dot)`, 32 bit |
//! | `NoLift`      | 32 bit | 32 bit        | `MSB(a·ml - b·dot)`, 32 bit |

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::RngCore;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::binary::{msb, open_bits_to, or_segments, BitRepShare, GateStats};
use crate::convert::{const_lift, lift};
use crate::error::{Error, Result};
use crate::galois::GrElem;
use crate::iris::{expand_rotations, BitRow, IrisRecord, MatchParams, MatchRule};
use crate::party::{Disclosure, OpenPolicy, Party};
use crate::replicated::{dot_local, reshare, share_vec, PrepShare, RepShare};
use crate::ring::Ring;
use crate::shamir::{dot_product_ct, premultiply_lambda, shamir_share_packed, LambdaShare};
use crate::transport::{CommLedger, PartyId, Phase};
use crate::{Z15, Z16, Z32};

/// Sharing scheme used for the stored vectors and the dot products.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    Replicated,
    ShamirGalois,
}

impl Backend {
    pub const ALL: [Backend; 2] = [Backend::Replicated, Backend::ShamirGalois];

    pub fn id(self) -> u8 {
        match self {
            Backend::Replicated => 0,
            Backend::ShamirGalois => 1,
        }
    }

    pub fn from_id(id: u8) -> Result<Self> {
        match id {
            0 => Ok(Backend::Replicated),
            1 => Ok(Backend::ShamirGalois),
            _ => Err(Error::Format(format!("unknown backend id {id}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Backend::Replicated => "replicated",
            Backend::ShamirGalois => "shamir-galois",
        }
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Backend {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown backend {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProtocolVariant {
    PlainMask,
    MpcLift,
    ConstLift,
    NoLift,
}

impl ProtocolVariant {
    pub const ALL: [ProtocolVariant; 4] = [Self::PlainMask, Self::MpcLift, Self::ConstLift, Self::NoLift];
    pub const SHARED_MASK: [ProtocolVariant; 3] = [Self::MpcLift, Self::ConstLift, Self::NoLift];

    pub fn name(self) -> &'static str {
        match self {
            Self::PlainMask => "plain-mask",
            Self::MpcLift => "mpc-lift",
            Self::ConstLift => "const-lift",
            Self::NoLift => "no-lift",
        }
    }

    pub fn rule(self) -> MatchRule {
        match self {
            Self::PlainMask => MatchRule::PublicMask,
            _ => MatchRule::SharedMask,
        }
    }

    pub fn code_bits(self) -> u32 {
        match self {
            Self::NoLift => 32,
            _ => 16,
        }
    }

    /// `None` when masks are public.
    pub fn mask_bits(self) -> Option<u32> {
        match self {
            Self::PlainMask => None,
            Self::MpcLift => Some(16),
            _ => Some(32),
        }
    }

    pub fn comparison_bits(self) -> u32 {
        match self {
            Self::PlainMask => 16,
            _ => 32,
        }
    }

    /// Rejects parameter combinations the protocol cannot evaluate exactly.
    pub fn validate(self, params: &MatchParams, l: usize) -> Result<()> {
        match self {
            Self::PlainMask => MatchParams::check_public_bounds(l, 16),
            _ => {
                if matches!(self, Self::MpcLift | Self::ConstLift) && params.b != 1 << 16 {
                    return Err(Error::InvalidInput(format!(
                        "{} scales 16-bit dot products into 32 bits and needs b = 2^16, got {}",
                        self.name(),
                        params.b
                    )));
                }
                params.check_shared_bounds(l, 32)
            }
        }
    }
}

impl fmt::Display for ProtocolVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProtocolVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown variant {s:?}")))
    }
}

/// One party's shares of a set of vectors, one row per record.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Plane<R> {
    Rep(Vec<Vec<PrepShare<R>>>),
    /// Packed Galois shares.
    Gal(Vec<Vec<GrElem<R>>>),
    /// Packed Galois shares premultiplied by the holder's Lagrange weight.
    GalScaled(Vec<Vec<LambdaShare<R>>>),
}

impl<R: Ring> Plane<R> {
    pub fn len(&self) -> usize {
        match self {
            Plane::Rep(r) => r.len(),
            Plane::Gal(r) => r.len(),
            Plane::GalScaled(r) => r.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn backend(&self) -> Backend {
        match self {
            Plane::Rep(_) => Backend::Replicated,
            _ => Backend::ShamirGalois,
        }
    }
}

/// Which planes to deal.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlaneSet {
    pub codes16: bool,
    pub codes32: bool,
    pub masks16: bool,
    pub masks32: bool,
    pub public_masks: bool,
}

impl PlaneSet {
    pub fn for_variant(v: ProtocolVariant) -> Self {
        let mut s = Self::default();
        s.add(v);
        s
    }

    pub fn all() -> Self {
        let mut s = Self::default();
        for v in ProtocolVariant::ALL {
            s.add(v);
        }
        s
    }

    pub fn add(&mut self, v: ProtocolVariant) {
        match v.code_bits() {
            16 => self.codes16 = true,
            _ => self.codes32 = true,
        }
        match v.mask_bits() {
            None => self.public_masks = true,
            Some(16) => self.masks16 = true,
            Some(_) => self.masks32 = true,
        }
    }

    pub fn supports(&self, v: ProtocolVariant) -> bool {
        let codes = match v.code_bits() {
            16 => self.codes16,
            _ => self.codes32,
        };
        let masks = match v.mask_bits() {
            None => self.public_masks,
            Some(16) => self.masks16,
            Some(_) => self.masks32,
        };
        codes && masks
    }
}

/// One party's view of a set of records: shared planes plus, where the
/// variant allows it, the public masks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SharedSet {
    pub l: usize,
    pub rows: usize,
    pub backend: Backend,
    pub codes16: Option<Plane<Z16>>,
    pub codes32: Option<Plane<Z32>>,
    pub masks16: Option<Plane<Z16>>,
    pub masks32: Option<Plane<Z32>>,
    pub public_masks: Option<Vec<BitRow>>,
}

impl SharedSet {
    pub fn planes(&self) -> PlaneSet {
        PlaneSet {
            codes16: self.codes16.is_some(),
            codes32: self.codes32.is_some(),
            masks16: self.masks16.is_some(),
            masks32: self.masks32.is_some(),
            public_masks: self.public_masks.is_some(),
        }
    }

    fn need<'a, T>(x: &'a Option<T>, what: &str) -> Result<&'a T> {
        x.as_ref()
            .ok_or_else(|| Error::InvalidInput(format!("shares lack the {what} plane")))
    }
}

/// One party's raw shares of a set of vectors, as dealt and as stored.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RawPlane<R> {
    Rep(Vec<Vec<RepShare<R>>>),
    Gal(Vec<Vec<GrElem<R>>>),
}

impl<R: Ring> RawPlane<R> {
    pub fn len(&self) -> usize {
        match self {
            RawPlane::Rep(r) => r.len(),
            RawPlane::Gal(r) => r.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn backend(&self) -> Backend {
        match self {
            RawPlane::Rep(_) => Backend::Replicated,
            RawPlane::Gal(_) => Backend::ShamirGalois,
        }
    }

    pub fn deal<G: RngCore + ?Sized>(rows: impl Iterator<Item = Vec<R>>, backend: Backend, rng: &mut G) -> [Self; 3] {
        let mut rep: [Vec<Vec<RepShare<R>>>; 3] = Default::default();
        let mut gal: [Vec<Vec<GrElem<R>>>; 3] = Default::default();
        for r in rows {
            match backend {
                Backend::Replicated => {
                    for (o, s) in rep.iter_mut().zip(share_vec(&r, rng)) {
                        o.push(s);
                    }
                }
                Backend::ShamirGalois => {
                    for (o, s) in gal.iter_mut().zip(shamir_share_packed(&r, rng)) {
                        o.push(s);
                    }
                }
            }
        }
        match backend {
            Backend::Replicated => rep.map(RawPlane::Rep),
            Backend::ShamirGalois => gal.map(RawPlane::Gal),
        }
    }

    /// Working form at `party`; `scaled` folds in the Lagrange weight.
    pub fn into_plane(self, party: PartyId, scaled: bool) -> Plane<R> {
        match self {
            RawPlane::Rep(rows) => Plane::Rep(rows.into_iter().map(|r| r.into_iter().map(|x| x.prep()).collect()).collect()),
            RawPlane::Gal(rows) if scaled => {
                Plane::GalScaled(rows.iter().map(|r| premultiply_lambda(r, party)).collect())
            }
            RawPlane::Gal(rows) => Plane::Gal(rows),
        }
    }
}

/// One party's raw shares of a set of records.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawSet {
    pub party: PartyId,
    pub l: usize,
    pub rows: usize,
    pub backend: Backend,
    pub codes16: Option<RawPlane<Z16>>,
    pub codes32: Option<RawPlane<Z32>>,
    pub masks16: Option<RawPlane<Z16>>,
    pub masks32: Option<RawPlane<Z32>>,
    pub public_masks: Option<Vec<BitRow>>,
}

impl RawSet {
    /// Dealer: shares `records` into the requested planes.
    pub fn deal<G: RngCore + ?Sized>(
        records: &[IrisRecord],
        l: usize,
        backend: Backend,
        planes: PlaneSet,
        rng: &mut G,
    ) -> Result<[RawSet; 3]> {
        if let Some(r) = records.iter().find(|r| r.len() != l) {
            return Err(Error::InvalidInput(format!("record of {} bits in a set of {l}-bit codes", r.len())));
        }
        fn opt<R: Ring, G: RngCore + ?Sized>(
            on: bool,
            rows: impl Iterator<Item = Vec<R>>,
            backend: Backend,
            rng: &mut G,
        ) -> [Option<RawPlane<R>>; 3] {
            if on {
                RawPlane::deal(rows, backend, rng).map(Some)
            } else {
                Default::default()
            }
        }
        let mut c16 = opt(planes.codes16, records.iter().map(|r| r.masked::<Z16>().0), backend, rng);
        let mut c32 = opt(planes.codes32, records.iter().map(|r| r.masked::<Z32>().0), backend, rng);
        let mut m16 = opt(planes.masks16, records.iter().map(|r| r.mask_ring::<Z16>()), backend, rng);
        let mut m32 = opt(planes.masks32, records.iter().map(|r| r.mask_ring::<Z32>()), backend, rng);
        let public: Option<Vec<BitRow>> = planes
            .public_masks
            .then(|| records.iter().map(|r| r.mask().to_bitvec()).collect());
        Ok(PartyId::ALL.map(|party| {
            let i = party.idx();
            RawSet {
                party,
                l,
                rows: records.len(),
                backend,
                codes16: c16[i].take(),
                codes32: c32[i].take(),
                masks16: m16[i].take(),
                masks32: m32[i].take(),
                public_masks: public.clone(),
            }
        }))
    }

    pub fn planes(&self) -> PlaneSet {
        PlaneSet {
            codes16: self.codes16.is_some(),
            codes32: self.codes32.is_some(),
            masks16: self.masks16.is_some(),
            masks32: self.masks32.is_some(),
            public_masks: self.public_masks.is_some(),
        }
    }

    /// Working form; database sets are `scaled`, query sets are not.
    pub fn into_shared(self, scaled: bool) -> SharedSet {
        let p = self.party;
        SharedSet {
            l: self.l,
            rows: self.rows,
            backend: self.backend,
            codes16: self.codes16.map(|x| x.into_plane(p, scaled)),
            codes32: self.codes32.map(|x| x.into_plane(p, scaled)),
            masks16: self.masks16.map(|x| x.into_plane(p, scaled)),
            masks32: self.masks32.map(|x| x.into_plane(p, scaled)),
            public_masks: self.public_masks,
        }
    }
}

/// Dealer: shares `records` straight into working form.
pub fn deal_set<G: RngCore + ?Sized>(
    records: &[IrisRecord],
    l: usize,
    backend: Backend,
    planes: PlaneSet,
    scaled: bool,
    rng: &mut G,
) -> Result<[SharedSet; 3]> {
    Ok(RawSet::deal(records, l, backend, planes, rng)?.map(|r| r.into_shared(scaled)))
}

/// Persons to check, each with one or two eyes, before rotation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QueryBatch {
    pub persons: Vec<Vec<IrisRecord>>,
    pub rotations: usize,
}

impl QueryBatch {
    pub fn new(persons: Vec<Vec<IrisRecord>>, rotations: usize) -> Result<Self> {
        let eyes = persons.first().map_or(0, |p| p.len());
        if persons.iter().any(|p| p.len() != eyes || p.is_empty()) {
            return Err(Error::InvalidInput("every person needs the same nonzero number of eyes".into()));
        }
        if rotations.is_multiple_of(2) {
            return Err(Error::InvalidInput(format!("rotation count {rotations} must be odd")));
        }
        Ok(Self { persons, rotations })
    }

    pub fn shape(&self) -> BatchShape {
        BatchShape {
            persons: self.persons.len(),
            eyes: self.persons.first().map_or(0, |p| p.len()),
            rotations: self.rotations,
        }
    }

    /// Query codes in row order: person, eye, rotation.
    pub fn expanded(&self) -> Result<Vec<IrisRecord>> {
        let mut out = Vec::new();
        for person in &self.persons {
            for eye in person {
                out.extend(expand_rotations(eye, self.rotations)?);
            }
        }
        Ok(out)
    }

    /// Dealer: rotates and shares the batch, raw form.
    pub fn deal_raw<G: RngCore + ?Sized>(
        &self,
        l: usize,
        backend: Backend,
        planes: PlaneSet,
        rng: &mut G,
    ) -> Result<[RawSet; 3]> {
        RawSet::deal(&self.expanded()?, l, backend, planes, rng)
    }

    /// Dealer: rotates and shares the batch.
    pub fn deal<G: RngCore + ?Sized>(
        &self,
        l: usize,
        backend: Backend,
        planes: PlaneSet,
        rng: &mut G,
    ) -> Result<[SharedQuery; 3]> {
        let shape = self.shape();
        let sets = deal_set(&self.expanded()?, l, backend, planes, false, rng)?;
        Ok(sets.map(|set| SharedQuery { shape, set }))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchShape {
    pub persons: usize,
    pub eyes: usize,
    pub rotations: usize,
}

impl BatchShape {
    pub fn query_codes(&self) -> usize {
        self.persons * self.eyes * self.rotations
    }

    fn row(&self, person: usize, eye: usize, rot: usize) -> usize {
        (person * self.eyes + eye) * self.rotations + rot
    }

    /// Row of the unrotated code of an eye.
    fn center(&self, person: usize, eye: usize) -> usize {
        self.row(person, eye, self.rotations / 2)
    }
}

/// One party's shares of a rotated batch.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SharedQuery {
    pub shape: BatchShape,
    pub set: SharedSet,
}

/// What a query code is compared with.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Db(usize),
    Query(usize),
}

/// One comparison lane.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Comparison {
    pub person: usize,
    pub query_row: usize,
    pub target: Target,
}

/// All comparisons of a batch, grouped per person, and the group sizes.
pub fn comparison_plan(shape: &BatchShape, s: usize) -> (Vec<Comparison>, Vec<usize>) {
    let mut cmps = Vec::new();
    let mut segs = Vec::new();
    for person in 0..shape.persons {
        let start = cmps.len();
        for eye in 0..shape.eyes {
            for rot in 0..shape.rotations {
                let query_row = shape.row(person, eye, rot);
                for d in 0..s {
                    cmps.push(Comparison {
                        person,
                        query_row,
                        target: Target::Db(d),
                    });
                }
                for earlier in 0..person {
                    for e2 in 0..shape.eyes {
                        cmps.push(Comparison {
                            person,
                            query_row,
                            target: Target::Query(shape.center(earlier, e2)),
                        });
                    }
                }
            }
        }
        segs.push(cmps.len() - start);
    }
    (cmps, segs)
}

/// Protocol parameters every party must agree on.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub backend: Backend,
    pub variant: ProtocolVariant,
    pub params: MatchParams,
    pub l: usize,
}

impl EngineConfig {
    pub fn new(backend: Backend, variant: ProtocolVariant, params: MatchParams, l: usize) -> Result<Self> {
        variant.validate(&params, l)?;
        Ok(Self {
            backend,
            variant,
            params,
            l,
        })
    }

    /// Hash over everything that must match across parties for a batch.
    pub fn digest(&self, s: usize, shape: &BatchShape, policy: OpenPolicy) -> [u8; 32] {
        self.digest_inner(s, Some(shape), policy)
    }

    /// Digest without a batch, exchanged once when a party process starts.
    pub fn setup_digest(&self, s: usize, policy: OpenPolicy) -> [u8; 32] {
        self.digest_inner(s, None, policy)
    }

    fn digest_inner(&self, s: usize, shape: Option<&BatchShape>, policy: OpenPolicy) -> [u8; 32] {
        #[derive(Serialize)]
        struct D<'a> {
            backend: Backend,
            variant: ProtocolVariant,
            a: u64,
            b: u64,
            l: usize,
            s: usize,
            code_bits: u32,
            mask_bits: Option<u32>,
            comparison_bits: u32,
            shape: Option<&'a BatchShape>,
            policy: OpenPolicy,
        }
        let d = D {
            backend: self.backend,
            variant: self.variant,
            a: self.params.a,
            b: self.params.b,
            l: self.l,
            s,
            code_bits: self.variant.code_bits(),
            mask_bits: self.variant.mask_bits(),
            comparison_bits: self.variant.comparison_bits(),
            shape,
            policy,
        };
        Sha256::digest(serde_json::to_vec(&d).expect("plain struct")).into()
    }
}

/// Exchanges config digests with both peers; any difference aborts before
/// share data moves.
pub fn handshake(p: &mut Party, digest: [u8; 32]) -> Result<()> {
    p.in_phase(Phase::Setup, |p| {
        let me = p.id();
        p.net.send(me.next(), digest.to_vec())?;
        p.net.send(me.prev(), digest.to_vec())?;
        let a = p.net.recv(me.next())?;
        let b = p.net.recv(me.prev())?;
        p.net.round_barrier();
        if a != digest {
            return Err(Error::ConfigMismatch { peer: me.next() });
        }
        if b != digest {
            return Err(Error::ConfigMismatch { peer: me.prev() });
        }
        Ok(())
    })
}

/// Local dot products for every comparison, then one reshare.
fn plane_dots<R: Ring>(
    p: &mut Party,
    query: &Plane<R>,
    db: &Plane<R>,
    cmps: &[Comparison],
) -> Result<Vec<RepShare<R>>> {
    let me = p.id();
    // earlier query codes used as targets get scaled once
    let mut scaled_queries: HashMap<usize, Vec<LambdaShare<R>>> = HashMap::new();
    let mut local = Vec::with_capacity(cmps.len());
    for c in cmps {
        let z = match (query, db, c.target) {
            (Plane::Rep(q), Plane::Rep(d), Target::Db(i)) => dot_local(p, &d[i], &q[c.query_row]),
            (Plane::Rep(q), _, Target::Query(i)) => dot_local(p, &q[i], &q[c.query_row]),
            (Plane::Gal(q), Plane::GalScaled(d), Target::Db(i)) => dot_product_ct(p, &d[i], &q[c.query_row]),
            (Plane::Gal(q), _, Target::Query(i)) => {
                let lhs = scaled_queries.entry(i).or_insert_with(|| premultiply_lambda(&q[i], me));
                dot_product_ct(p, lhs, &q[c.query_row])
            }
            _ => return Err(Error::InvalidInput("query and database planes do not pair up".into())),
        };
        local.push(z);
    }
    reshare(p, local)
}

/// Shared dot products ready for the comparison phase.
pub enum DotShares {
    PlainMask { dot: Vec<RepShare<Z16>>, ml: Vec<u64> },
    MpcLift { dot: Vec<RepShare<Z16>>, ml: Vec<RepShare<Z16>> },
    ConstLift { dot: Vec<RepShare<Z16>>, ml: Vec<RepShare<Z32>> },
    NoLift { dot: Vec<RepShare<Z32>>, ml: Vec<RepShare<Z32>> },
}

impl DotShares {
    pub fn len(&self) -> usize {
        match self {
            DotShares::PlainMask { dot, .. } | DotShares::MpcLift { dot, .. } | DotShares::ConstLift { dot, .. } => {
                dot.len()
            }
            DotShares::NoLift { dot, .. } => dot.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn variant(&self) -> ProtocolVariant {
        match self {
            DotShares::PlainMask { .. } => ProtocolVariant::PlainMask,
            DotShares::MpcLift { .. } => ProtocolVariant::MpcLift,
            DotShares::ConstLift { .. } => ProtocolVariant::ConstLift,
            DotShares::NoLift { .. } => ProtocolVariant::NoLift,
        }
    }
}

/// Hamming phase: both dot products of every comparison.
pub fn dot_phase(
    p: &mut Party,
    variant: ProtocolVariant,
    query: &SharedSet,
    db: &SharedSet,
    cmps: &[Comparison],
) -> Result<DotShares> {
    p.in_phase(Phase::Dot, |p| {
        Ok(match variant {
            ProtocolVariant::PlainMask => {
                let dot = plane_dots(p, SharedSet::need(&query.codes16, "16-bit code")?, SharedSet::need(&db.codes16, "16-bit code")?, cmps)?;
                let (qm, dm) = (SharedSet::need(&query.public_masks, "public mask")?, SharedSet::need(&db.public_masks, "public mask")?);
                let ml = cmps
                    .iter()
                    .map(|c| {
                        let t = match c.target {
                            Target::Db(i) => &dm[i],
                            Target::Query(i) => &qm[i],
                        };
                        (qm[c.query_row].clone() & t).count_ones() as u64
                    })
                    .collect();
                DotShares::PlainMask { dot, ml }
            }
            ProtocolVariant::MpcLift => DotShares::MpcLift {
                dot: plane_dots(p, SharedSet::need(&query.codes16, "16-bit code")?, SharedSet::need(&db.codes16, "16-bit code")?, cmps)?,
                ml: plane_dots(p, SharedSet::need(&query.masks16, "16-bit mask")?, SharedSet::need(&db.masks16, "16-bit mask")?, cmps)?,
            },
            ProtocolVariant::ConstLift => DotShares::ConstLift {
                dot: plane_dots(p, SharedSet::need(&query.codes16, "16-bit code")?, SharedSet::need(&db.codes16, "16-bit code")?, cmps)?,
                ml: plane_dots(p, SharedSet::need(&query.masks32, "32-bit mask")?, SharedSet::need(&db.masks32, "32-bit mask")?, cmps)?,
            },
            ProtocolVariant::NoLift => DotShares::NoLift {
                dot: plane_dots(p, SharedSet::need(&query.codes32, "32-bit code")?, SharedSet::need(&db.codes32, "32-bit code")?, cmps)?,
                ml: plane_dots(p, SharedSet::need(&query.masks32, "32-bit mask")?, SharedSet::need(&db.masks32, "32-bit mask")?, cmps)?,
            },
        })
    })
}

/// `a·ml - b·dot` with `b·dot` obtained by a free scaling of a 16-bit dot.
fn shared_threshold(
    params: &MatchParams,
    dot16: &[RepShare<Z16>],
    ml32: &[RepShare<Z32>],
) -> Vec<RepShare<Z32>> {
    let a = Z32::from_u64(params.a);
    dot16
        .iter()
        .zip(ml32)
        .map(|(&d, &m)| m.scale(a) - const_lift::<Z16, Z32>(d, params.m))
        .collect()
}

/// Comparison phase: one shared match bit per comparison.
pub fn compare(p: &mut Party, params: &MatchParams, dots: &DotShares) -> Result<BitRepShare> {
    let me = p.id();
    match dots {
        DotShares::PlainMask { dot, ml } => {
            let x: Vec<RepShare<Z16>> = dot
                .iter()
                .zip(ml)
                .map(|(&d, &m)| (-d).add_public(Z16::from_u64(params.public_threshold(m)), me))
                .collect();
            p.in_phase(Phase::Msb, |p| msb(p, &x))
        }
        DotShares::MpcLift { dot, ml } => {
            let ml32 = p.in_phase(Phase::Lift, |p| lift::<Z16, Z32, Z15, Z16>(p, ml))?;
            let x = shared_threshold(params, dot, &ml32);
            p.in_phase(Phase::Msb, |p| msb(p, &x))
        }
        DotShares::ConstLift { dot, ml } => {
            let x = shared_threshold(params, dot, ml);
            p.in_phase(Phase::Msb, |p| msb(p, &x))
        }
        DotShares::NoLift { dot, ml } => {
            let (a, b) = (Z32::from_u64(params.a), Z32::from_u64(params.b));
            let x: Vec<RepShare<Z32>> = dot.iter().zip(ml).map(|(&d, &m)| m.scale(a) - d.scale(b)).collect();
            p.in_phase(Phase::Msb, |p| msb(p, &x))
        }
    }
}

/// Per-phase counters as a fixed record.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseMap {
    pub setup: u64,
    pub dot: u64,
    pub lift: u64,
    pub ot: u64,
    pub msb: u64,
    pub or_tree: u64,
    pub open: u64,
}

impl PhaseMap {
    pub fn from_ledger(l: &CommLedger, f: impl Fn(crate::transport::PhaseCounters) -> u64) -> Self {
        Self {
            setup: f(l.phase(Phase::Setup)),
            dot: f(l.phase(Phase::Dot)),
            lift: f(l.phase(Phase::Lift)),
            ot: f(l.phase(Phase::Ot)),
            msb: f(l.phase(Phase::Msb)),
            or_tree: f(l.phase(Phase::OrTree)),
            open: f(l.phase(Phase::Open)),
        }
    }

    pub fn total(&self) -> u64 {
        self.setup + self.dot + self.lift + self.ot + self.msb + self.or_tree + self.open
    }

    /// Comparison-phase share: lift, OT and MSB extraction.
    pub fn comparison(&self) -> u64 {
        self.lift + self.ot + self.msb
    }
}

/// Per-party statistics of one batch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryStats {
    pub party: PartyId,
    pub variant: ProtocolVariant,
    pub backend: Backend,
    pub s: usize,
    pub l: usize,
    pub batch: usize,
    pub query_codes: usize,
    pub comparisons: usize,
    pub db_comparisons: usize,
    pub inner_comparisons: usize,
    pub phase_bytes: PhaseMap,
    pub rounds: PhaseMap,
    pub messages: PhaseMap,
    pub msb_gates: GateStats,
    pub macs: u64,
    pub wall_ms: f64,
}

/// Result of one batch at one party.
#[derive(Clone, Debug)]
pub struct QueryOutput {
    /// Per-person result, at the output party only.
    pub matches: Option<Vec<bool>>,
    /// Per-comparison bits in plan order, debug mode and output party only.
    pub per_comparison: Option<Vec<bool>>,
    pub plan: Vec<Comparison>,
    pub stats: QueryStats,
}

/// Party that learns the results.
pub const OUTPUT_PARTY: PartyId = PartyId::P1;

/// Runs one batch against the database.
pub fn run_query(p: &mut Party, cfg: &EngineConfig, db: &SharedSet, query: &SharedQuery) -> Result<QueryOutput> {
    let start = Instant::now();
    let ledger0 = p.net.ledger().clone();
    let macs0 = p.counters.macs;
    cfg.variant.validate(&cfg.params, cfg.l)?;
    handshake(p, cfg.digest(db.rows, &query.shape, p.policy()))?;
    if db.l != cfg.l || query.set.l != cfg.l {
        return Err(Error::InvalidInput("code length differs from configuration".into()));
    }
    if db.backend != cfg.backend || query.set.backend != cfg.backend {
        return Err(Error::InvalidInput("shares were dealt for a different backend".into()));
    }

    let (plan, segments) = comparison_plan(&query.shape, db.rows);
    let db_cmps = plan.iter().filter(|c| matches!(c.target, Target::Db(_))).count();
    let dots = dot_phase(p, cfg.variant, &query.set, db, &plan)?;
    let ands0 = p.counters.and_gates;
    let bits = compare(p, &cfg.params, &dots)?;
    let msb_ands = (p.counters.and_gates - ands0) / plan.len().max(1) as u64;

    // persons without any comparison are publicly false
    let nonempty: Vec<usize> = segments.iter().copied().filter(|&s| s > 0).collect();
    let agg = p.in_phase(Phase::OrTree, |p| or_segments(p, &bits, &nonempty))?;
    let (opened, per_cmp) = p.in_phase(Phase::Open, |p| {
        let opened = open_bits_to(p, &agg, OUTPUT_PARTY, Disclosure::Aggregate)?;
        let per = if p.policy() == OpenPolicy::Debug {
            open_bits_to(p, &bits, OUTPUT_PARTY, Disclosure::PerComparison)?
        } else {
            None
        };
        Ok((opened, per))
    })?;
    let matches = opened.map(|o| {
        let mut it = o.into_iter();
        segments
            .iter()
            .map(|&s| if s > 0 { it.next().expect("one bit per segment") } else { false })
            .collect()
    });

    let d = p.net.ledger().since(&ledger0);
    let cmp_rounds = d.phase(Phase::Lift).rounds + d.phase(Phase::Ot).rounds + d.phase(Phase::Msb).rounds;
    let stats = QueryStats {
        party: p.id(),
        variant: cfg.variant,
        backend: cfg.backend,
        s: db.rows,
        l: cfg.l,
        batch: query.shape.persons,
        query_codes: query.shape.query_codes(),
        comparisons: plan.len(),
        db_comparisons: db_cmps,
        inner_comparisons: plan.len() - db_cmps,
        phase_bytes: PhaseMap::from_ledger(&d, |c| c.bytes_sent),
        rounds: PhaseMap::from_ledger(&d, |c| c.rounds),
        messages: PhaseMap::from_ledger(&d, |c| c.messages_sent),
        msb_gates: GateStats {
            and_gates: msb_ands,
            rounds: cmp_rounds,
            bits_sent_per_party: msb_ands,
        },
        macs: p.counters.macs - macs0,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    };
    Ok(QueryOutput {
        matches,
        per_comparison: per_cmp,
        plan,
        stats,
    })
}

/// Deals a plaintext database.
pub fn deal_db<G: RngCore + ?Sized>(
    db: &crate::iris::IrisDb,
    backend: Backend,
    planes: PlaneSet,
    rng: &mut G,
) -> Result<[SharedSet; 3]> {
    let rows: Vec<IrisRecord> = db.rows().collect();
    deal_set(&rows, db.l(), backend, planes, true, rng)
}
