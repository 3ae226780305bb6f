//! On-disk layouts: plaintext databases, share files, seed files and public
//! masks. All integers are little-endian.
//!
//! | file          | header                                                          |
//! |---------------|-----------------------------------------------------------------|
//! | database      | `IRMP`, version u16, l u32, s u64 (18 bytes)                    |
//! | share plane   | `IRS1`, backend u8, k u8, l u32, s u64, party u8, plane u8 (20) |
//! | seeds         | `IRSD`, party u8, own key, prev key (37 bytes)                  |
//! | public masks  | `IRPM`, l u32, s u64 (16 bytes)                                 |
//!
//! Bit matrices are packed row-major, least significant bit first.

use std::path::Path;

use bitvec::prelude::*;

use crate::engine::{Backend, RawPlane, RawSet};
use crate::error::{Error, Result};
use crate::galois::GrElem;
use crate::iris::{BitRow, IrisDb};
use crate::prf::SeedPair;
use crate::replicated::RepShare;
use crate::ring::Ring;
use crate::transport::PartyId;
use crate::{Z16, Z32};

pub const DB_MAGIC: &[u8; 4] = b"IRMP";
pub const DB_VERSION: u16 = 1;
pub const DB_HEADER_LEN: usize = 18;
pub const SHARE_MAGIC: &[u8; 4] = b"IRS1";
pub const SHARE_HEADER_LEN: usize = 20;
pub const SEED_MAGIC: &[u8; 4] = b"IRSD";
pub const SEED_FILE_LEN: usize = 37;
pub const MASK_MAGIC: &[u8; 4] = b"IRPM";
pub const MASK_HEADER_LEN: usize = 16;

fn pack_bits(bits: &BitSlice<u64, Lsb0>, out: &mut Vec<u8>) {
    let bytes: BitVec<u8, Lsb0> = bits.iter().by_vals().collect();
    out.extend_from_slice(bytes.as_raw_slice());
}

fn unpack_bits(bytes: &[u8], n: usize) -> BitRow {
    let mut out = BitRow::with_capacity(n);
    out.extend_from_bitslice(&bytes.view_bits::<Lsb0>()[..n]);
    out
}

/// Cursor over a byte buffer with format errors on underrun.
struct Reader<'a> {
    buf: &'a [u8],
    what: &'static str,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() < n {
            return Err(Error::Format(format!("{} truncated", self.what)));
        }
        let (a, b) = self.buf.split_at(n);
        self.buf = b;
        Ok(a)
    }

    fn magic(&mut self, m: &[u8; 4]) -> Result<()> {
        if self.take(4)? != m {
            return Err(Error::Format(format!("{} has the wrong magic", self.what)));
        }
        Ok(())
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn finish(self) -> Result<()> {
        if self.buf.is_empty() {
            Ok(())
        } else {
            Err(Error::Format(format!("{} has {} trailing bytes", self.what, self.buf.len())))
        }
    }
}

fn size(v: u64) -> Result<usize> {
    usize::try_from(v).map_err(|_| Error::Format("size does not fit in memory".into()))
}

pub fn encode_db(db: &IrisDb) -> Vec<u8> {
    let mut out = Vec::with_capacity(DB_HEADER_LEN + 2 * (db.len() * db.l()).div_ceil(8));
    out.extend_from_slice(DB_MAGIC);
    out.extend_from_slice(&DB_VERSION.to_le_bytes());
    out.extend_from_slice(&(db.l() as u32).to_le_bytes());
    out.extend_from_slice(&(db.len() as u64).to_le_bytes());
    pack_bits(db.codes(), &mut out);
    pack_bits(db.masks(), &mut out);
    out
}

pub fn decode_db(bytes: &[u8]) -> Result<IrisDb> {
    let mut r = Reader { buf: bytes, what: "database file" };
    r.magic(DB_MAGIC)?;
    let v = r.u16()?;
    if v != DB_VERSION {
        return Err(Error::Format(format!("database version {v} is not supported")));
    }
    let l = r.u32()? as usize;
    let s = size(r.u64()?)?;
    let n = l.checked_mul(s).ok_or_else(|| Error::Format("database dimensions overflow".into()))?;
    let codes = unpack_bits(r.take(n.div_ceil(8))?, n);
    let masks = unpack_bits(r.take(n.div_ceil(8))?, n);
    r.finish()?;
    IrisDb::from_matrices(l, codes, masks)
}

/// Which vectors a share file holds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlaneKind {
    Codes,
    Masks,
}

impl PlaneKind {
    fn tag(self) -> u8 {
        match self {
            PlaneKind::Codes => 0,
            PlaneKind::Masks => 1,
        }
    }

    fn from_tag(t: u8) -> Result<Self> {
        match t {
            0 => Ok(PlaneKind::Codes),
            1 => Ok(PlaneKind::Masks),
            _ => Err(Error::Format(format!("unknown plane tag {t}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PlaneKind::Codes => "codes",
            PlaneKind::Masks => "masks",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ShareHeader {
    pub backend: Backend,
    pub k: u32,
    pub l: usize,
    pub s: usize,
    pub party: PartyId,
    pub kind: PlaneKind,
}

impl ShareHeader {
    fn write(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(SHARE_MAGIC);
        out.push(self.backend.id());
        out.push(self.k as u8);
        out.extend_from_slice(&(self.l as u32).to_le_bytes());
        out.extend_from_slice(&(self.s as u64).to_le_bytes());
        out.push(self.party.index());
        out.push(self.kind.tag());
    }

    fn read(r: &mut Reader) -> Result<Self> {
        r.magic(SHARE_MAGIC)?;
        Ok(Self {
            backend: Backend::from_id(r.u8()?)?,
            k: r.u8()? as u32,
            l: r.u32()? as usize,
            s: size(r.u64()?)?,
            party: PartyId::new(r.u8()?).map_err(|e| Error::Format(e.to_string()))?,
            kind: PlaneKind::from_tag(r.u8()?)?,
        })
    }

    /// Expected payload size.
    pub fn payload_len(&self) -> usize {
        let words = match self.backend {
            Backend::Replicated => 2 * self.l,
            Backend::ShamirGalois => 2 * self.l.div_ceil(2),
        };
        self.s * words * (self.k as usize).div_ceil(8)
    }
}

pub fn encode_plane<R: Ring>(plane: &RawPlane<R>, party: PartyId, l: usize, kind: PlaneKind) -> Vec<u8> {
    let h = ShareHeader {
        backend: plane.backend(),
        k: R::BITS,
        l,
        s: plane.len(),
        party,
        kind,
    };
    let mut out = Vec::with_capacity(SHARE_HEADER_LEN + h.payload_len());
    h.write(&mut out);
    match plane {
        RawPlane::Rep(rows) => {
            for x in rows.iter().flatten() {
                x.own.write_le(&mut out);
                x.prev.write_le(&mut out);
            }
        }
        RawPlane::Gal(rows) => {
            for g in rows.iter().flatten() {
                g.c0.write_le(&mut out);
                g.c1.write_le(&mut out);
            }
        }
    }
    out
}

pub fn decode_share_header(bytes: &[u8]) -> Result<ShareHeader> {
    ShareHeader::read(&mut Reader { buf: bytes, what: "share file" })
}

pub fn decode_plane<R: Ring>(bytes: &[u8]) -> Result<(ShareHeader, RawPlane<R>)> {
    let mut r = Reader { buf: bytes, what: "share file" };
    let h = ShareHeader::read(&mut r)?;
    if h.k != R::BITS {
        return Err(Error::Format(format!("share file holds {}-bit words, expected {}", h.k, R::BITS)));
    }
    let payload = r.take(h.payload_len())?;
    r.finish()?;
    let mut words = payload.chunks_exact(R::BYTES).map(R::read_le);
    let mut pair = || (words.next().expect("sized above"), words.next().expect("sized above"));
    let plane = match h.backend {
        Backend::Replicated => RawPlane::Rep(
            (0..h.s)
                .map(|_| {
                    (0..h.l)
                        .map(|_| {
                            let (own, prev) = pair();
                            RepShare::new(own, prev)
                        })
                        .collect()
                })
                .collect(),
        ),
        Backend::ShamirGalois => RawPlane::Gal(
            (0..h.s)
                .map(|_| {
                    (0..h.l.div_ceil(2))
                        .map(|_| {
                            let (c0, c1) = pair();
                            GrElem::new(c0, c1)
                        })
                        .collect()
                })
                .collect(),
        ),
    };
    Ok((h, plane))
}

pub fn encode_seeds(party: PartyId, seeds: &SeedPair) -> Vec<u8> {
    let mut out = Vec::with_capacity(SEED_FILE_LEN);
    out.extend_from_slice(SEED_MAGIC);
    out.push(party.index());
    out.extend_from_slice(&seeds.own);
    out.extend_from_slice(&seeds.prev);
    out
}

pub fn decode_seeds(bytes: &[u8]) -> Result<(PartyId, SeedPair)> {
    let mut r = Reader { buf: bytes, what: "seed file" };
    r.magic(SEED_MAGIC)?;
    let party = PartyId::new(r.u8()?).map_err(|e| Error::Format(e.to_string()))?;
    let own = r.take(16)?.try_into().unwrap();
    let prev = r.take(16)?.try_into().unwrap();
    r.finish()?;
    Ok((party, SeedPair { own, prev }))
}

pub fn encode_public_masks(l: usize, masks: &[BitRow]) -> Vec<u8> {
    let mut all = BitRow::with_capacity(l * masks.len());
    for m in masks {
        all.extend_from_bitslice(m);
    }
    let mut out = Vec::with_capacity(MASK_HEADER_LEN + all.len().div_ceil(8));
    out.extend_from_slice(MASK_MAGIC);
    out.extend_from_slice(&(l as u32).to_le_bytes());
    out.extend_from_slice(&(masks.len() as u64).to_le_bytes());
    pack_bits(&all, &mut out);
    out
}

pub fn decode_public_masks(bytes: &[u8]) -> Result<(usize, Vec<BitRow>)> {
    let mut r = Reader { buf: bytes, what: "public mask file" };
    r.magic(MASK_MAGIC)?;
    let l = r.u32()? as usize;
    let s = size(r.u64()?)?;
    let n = l.checked_mul(s).ok_or_else(|| Error::Format("mask dimensions overflow".into()))?;
    let all = unpack_bits(r.take(n.div_ceil(8))?, n);
    r.finish()?;
    Ok((l, (0..s).map(|i| all[i * l..(i + 1) * l].to_bitvec()).collect()))
}

/// One file per stored plane of a party's set, named `<plane><k>`.
pub fn encode_set(set: &RawSet) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let (p, l) = (set.party, set.l);
    if let Some(x) = &set.codes16 {
        out.push(("codes16".to_string(), encode_plane(x, p, l, PlaneKind::Codes)));
    }
    if let Some(x) = &set.codes32 {
        out.push(("codes32".to_string(), encode_plane(x, p, l, PlaneKind::Codes)));
    }
    if let Some(x) = &set.masks16 {
        out.push(("masks16".to_string(), encode_plane(x, p, l, PlaneKind::Masks)));
    }
    if let Some(x) = &set.masks32 {
        out.push(("masks32".to_string(), encode_plane(x, p, l, PlaneKind::Masks)));
    }
    if let Some(m) = &set.public_masks {
        out.push(("public_masks".to_string(), encode_public_masks(l, m)));
    }
    out
}

/// Reassembles a party's set from the files of [`encode_set`]. The public
/// mask file may be shared among parties, so it carries no party id.
pub fn decode_set(files: &[Vec<u8>]) -> Result<RawSet> {
    let mut set: Option<RawSet> = None;
    let mut public = None;
    for f in files {
        if f.starts_with(MASK_MAGIC) {
            public = Some(decode_public_masks(f)?);
            continue;
        }
        let h = decode_share_header(f)?;
        let s = set.get_or_insert_with(|| RawSet {
            party: h.party,
            l: h.l,
            rows: h.s,
            backend: h.backend,
            codes16: None,
            codes32: None,
            masks16: None,
            masks32: None,
            public_masks: None,
        });
        if (s.party, s.l, s.rows, s.backend) != (h.party, h.l, h.s, h.backend) {
            return Err(Error::Format("share files belong to different sets".into()));
        }
        match (h.kind, h.k) {
            (PlaneKind::Codes, 16) => s.codes16 = Some(decode_plane::<Z16>(f)?.1),
            (PlaneKind::Codes, 32) => s.codes32 = Some(decode_plane::<Z32>(f)?.1),
            (PlaneKind::Masks, 16) => s.masks16 = Some(decode_plane::<Z16>(f)?.1),
            (PlaneKind::Masks, 32) => s.masks32 = Some(decode_plane::<Z32>(f)?.1),
            (kind, k) => return Err(Error::Format(format!("no {}-bit {} plane is defined", k, kind.name()))),
        }
    }
    let mut set = set.ok_or_else(|| Error::Format("no share files given".into()))?;
    if let Some((l, masks)) = public {
        if l != set.l || masks.len() != set.rows {
            return Err(Error::Format("public masks do not fit the shared set".into()));
        }
        set.public_masks = Some(masks);
    }
    Ok(set)
}

pub fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

pub fn save_db(path: &Path, db: &IrisDb) -> Result<()> {
    write_file(path, &encode_db(db))
}

pub fn load_db(path: &Path) -> Result<IrisDb> {
    decode_db(&read_file(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::PlaneSet;
    use crate::replicated::reconstruct_vec;
    use crate::shamir::{reconstruct_packed, unpack_pairs};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn db_round_trip_and_size() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for (s, l) in [(0, 64), (3, 13), (10, 128)] {
            let db = IrisDb::random(s, l, 0.8, &mut rng);
            let bytes = encode_db(&db);
            assert_eq!(bytes.len(), DB_HEADER_LEN + 2 * (s * l).div_ceil(8));
            assert_eq!(decode_db(&bytes).unwrap(), db);
        }
        let db = IrisDb::random(2, 64, 0.8, &mut rng);
        let bytes = encode_db(&db);
        assert!(decode_db(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode_db(&bad), Err(Error::Format(_))));
    }

    #[test]
    fn shares_round_trip_and_reconstruct() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let db = IrisDb::random(5, 33, 0.8, &mut rng);
        let records: Vec<_> = db.rows().collect();
        for backend in Backend::ALL {
            let sets = RawSet::deal(&records, 33, backend, PlaneSet::all(), &mut rng).unwrap();
            let decoded: Vec<RawSet> = sets
                .iter()
                .map(|s| decode_set(&encode_set(s).into_iter().map(|f| f.1).collect::<Vec<_>>()).unwrap())
                .collect();
            assert_eq!(decoded, sets.to_vec());
            let planes: Vec<_> = decoded.iter().map(|s| s.codes32.clone().unwrap()).collect();
            for (row, rec) in records.iter().enumerate() {
                let want = rec.masked::<Z32>().0;
                let got = match (&planes[0], &planes[1], &planes[2]) {
                    (RawPlane::Rep(a), RawPlane::Rep(b), RawPlane::Rep(c)) => {
                        reconstruct_vec(&[a[row].clone(), b[row].clone(), c[row].clone()]).unwrap()
                    }
                    (RawPlane::Gal(a), RawPlane::Gal(b), RawPlane::Gal(c)) => {
                        let packed: Vec<_> = (0..a[row].len())
                            .map(|j| reconstruct_packed(&[a[row][j], b[row][j], c[row][j]]))
                            .collect();
                        unpack_pairs(&packed, 33)
                    }
                    _ => unreachable!(),
                };
                assert_eq!(got, want);
            }
        }
    }

    #[test]
    fn shamir_files_are_half_size() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let db = IrisDb::random(20, 256, 0.8, &mut rng);
        let records: Vec<_> = db.rows().collect();
        let planes = PlaneSet {
            codes16: true,
            ..Default::default()
        };
        let size = |b| {
            let sets = RawSet::deal(&records, 256, b, planes, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
            encode_set(&sets[0])[0].1.len()
        };
        let (rep, gal) = (size(Backend::Replicated), size(Backend::ShamirGalois));
        assert_eq!(rep - SHARE_HEADER_LEN, 32 * 20 * 256 / 8);
        assert_eq!(gal - SHARE_HEADER_LEN, 16 * 20 * 256 / 8);
    }

    #[test]
    fn empty_db_shares_are_header_only() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for backend in Backend::ALL {
            let sets = RawSet::deal(&[], 64, backend, PlaneSet::for_variant(crate::engine::ProtocolVariant::NoLift), &mut rng).unwrap();
            for (_, f) in encode_set(&sets[1]) {
                assert_eq!(f.len(), SHARE_HEADER_LEN);
                assert_eq!(decode_share_header(&f).unwrap().party, PartyId::P2);
            }
        }
    }

    #[test]
    fn seeds_round_trip() {
        let seeds = crate::party::test_seeds(9);
        for p in PartyId::ALL {
            let b = encode_seeds(p, &seeds[p.idx()]);
            assert_eq!(b.len(), SEED_FILE_LEN);
            assert_eq!(decode_seeds(&b).unwrap(), (p, seeds[p.idx()]));
        }
    }
}
