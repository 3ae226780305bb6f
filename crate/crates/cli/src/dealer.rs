use std::path::{Path, PathBuf};

use irisdedup_core::engine::{Backend, PlaneSet, ProtocolVariant, RawSet};
use irisdedup_core::formats::{encode_seeds, encode_set, load_db, read_file, save_db, write_file, decode_set};
use irisdedup_core::iris::IrisDb;
use irisdedup_core::prf::deal_seeds;
use irisdedup_core::transport::PartyId;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::fail::{CliError, CliResult};

pub const PUBLIC_MASKS_FILE: &str = "public_masks.irpm";

pub fn dealer_rng(seed: Option<u64>) -> ChaCha20Rng {
    match seed {
        Some(s) => ChaCha20Rng::seed_from_u64(s),
        None => ChaCha20Rng::from_entropy(),
    }
}

pub fn gen_db(size: usize, length: usize, seed: u64, density: f64, out: &Path) -> CliResult<()> {
    if !(0.0..=1.0).contains(&density) {
        return Err(CliError::Config(format!("mask density {density} outside [0, 1]")));
    }
    let db = IrisDb::random(size, length, density, &mut ChaCha20Rng::seed_from_u64(seed));
    save_db(out, &db)?;
    Ok(())
}

/// `all` or a list of variant names.
pub fn parse_variants(names: &[String]) -> CliResult<Vec<ProtocolVariant>> {
    if names.is_empty() || names.iter().any(|n| n == "all") {
        return Ok(ProtocolVariant::ALL.to_vec());
    }
    names
        .iter()
        .map(|n| n.parse().map_err(|e: irisdedup_core::Error| CliError::Config(e.to_string())))
        .collect()
}

pub fn share_file(dir: &Path, party: PartyId, plane: &str) -> PathBuf {
    dir.join(format!("p{}.{plane}.irs", party.index()))
}

/// Deals the database and fresh PRF keys into `out_dir`. Returns the paths
/// written.
pub fn share(db: &Path, backend: Backend, variants: &[ProtocolVariant], out_dir: &Path, seed: Option<u64>) -> CliResult<Vec<PathBuf>> {
    let db = load_db(db)?;
    let mut planes = PlaneSet::default();
    for v in variants {
        planes.add(*v);
    }
    let mut rng = dealer_rng(seed);
    let records: Vec<_> = db.rows().collect();
    let sets = RawSet::deal(&records, db.l(), backend, planes, &mut rng)?;
    let seeds = deal_seeds(&mut rng);
    std::fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    for (set, pair) in sets.iter().zip(&seeds) {
        for (name, bytes) in encode_set(set) {
            let path = if name == "public_masks" {
                out_dir.join(PUBLIC_MASKS_FILE)
            } else {
                share_file(out_dir, set.party, &name)
            };
            if !written.contains(&path) {
                write_file(&path, &bytes)?;
                written.push(path);
            }
        }
        let path = out_dir.join(format!("p{}.seed", set.party.index()));
        write_file(&path, &encode_seeds(set.party, pair))?;
        written.push(path);
    }
    Ok(written)
}

/// Loads one party's stored set from a share directory.
pub fn load_party_set(dir: &Path, party: PartyId) -> CliResult<RawSet> {
    let prefix = format!("p{}.", party.index());
    let mut files = Vec::new();
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::Config(format!("{}: {e}", dir.display())))?;
    let mut paths: Vec<PathBuf> = entries.filter_map(|e| e.ok().map(|e| e.path())).collect();
    paths.sort();
    for path in paths {
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        if (name.starts_with(&prefix) && name.ends_with(".irs")) || name == PUBLIC_MASKS_FILE {
            files.push(read_file(&path)?);
        }
    }
    let set = decode_set(&files)?;
    if set.party != party {
        return Err(CliError::Config(format!("share files in {} belong to {}", dir.display(), set.party)));
    }
    Ok(set)
}
