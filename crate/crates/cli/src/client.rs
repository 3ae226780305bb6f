use std::net::{SocketAddr, TcpStream};
use std::path::Path;
use std::thread;
use std::time::{Duration, Instant};

use irisdedup_core::engine::{PlaneSet, ProtocolVariant, QueryBatch, QueryStats, OUTPUT_PARTY};
use irisdedup_core::formats::{encode_set, load_db};
use irisdedup_core::transport::PartyId;
use rand::RngCore;
use serde::Serialize;

use crate::config::Config;
use crate::dealer::dealer_rng;
use crate::fail::{CliError, CliResult};
use crate::wire::{read_frame, write_frame, Request, Response};

pub struct QueryArgs<'a> {
    pub query: &'a Path,
    pub batch: Option<usize>,
    pub eyes: usize,
    pub rotations: usize,
    pub variants: Vec<ProtocolVariant>,
    pub seed: Option<u64>,
}

/// One variant's result, as written to the stats file.
#[derive(Debug, Serialize)]
pub struct RunReport {
    pub matches: Vec<bool>,
    /// Stats of the output party.
    #[serde(flatten)]
    pub stats: QueryStats,
    pub parties: Vec<QueryStats>,
}

#[derive(Debug, Serialize)]
pub struct StatsFile {
    pub runs: Vec<RunReport>,
}

fn connect(addr: SocketAddr, timeout: Duration) -> CliResult<TcpStream> {
    let deadline = Instant::now() + timeout;
    loop {
        match TcpStream::connect(addr) {
            Ok(s) => {
                s.set_read_timeout(Some(timeout))?;
                return Ok(s);
            }
            Err(e) if Instant::now() >= deadline => {
                return Err(CliError::Transport(format!("cannot reach {addr}: {e}")));
            }
            Err(_) => thread::sleep(Duration::from_millis(20)),
        }
    }
}

/// Builds the batch from a plaintext file: consecutive groups of `eyes` rows
/// form one person.
pub fn load_batch(cfg: &Config, args: &QueryArgs) -> CliResult<QueryBatch> {
    let db = load_db(args.query)?;
    if db.l() != cfg.l {
        return Err(CliError::Config(format!("query codes have length {}, config expects {}", db.l(), cfg.l)));
    }
    if args.eyes == 0 || db.len() % args.eyes != 0 {
        return Err(CliError::Config(format!("{} query rows do not split into persons of {} eyes", db.len(), args.eyes)));
    }
    let rows: Vec<_> = db.rows().collect();
    let mut persons: Vec<Vec<_>> = rows.chunks(args.eyes).map(|c| c.to_vec()).collect();
    if let Some(n) = args.batch {
        if n > persons.len() {
            return Err(CliError::Config(format!("batch of {n} persons but the file holds {}", persons.len())));
        }
        persons.truncate(n);
    }
    Ok(QueryBatch::new(persons, args.rotations)?)
}

/// Deals the batch once per variant, sends each party its shares and
/// collects the results.
pub fn query(cfg: &Config, args: &QueryArgs) -> CliResult<StatsFile> {
    let batch = load_batch(cfg, args)?;
    let addrs = cfg.client_addrs()?;
    let mut rng = dealer_rng(args.seed);
    let mut runs = Vec::new();
    for &variant in &args.variants {
        let sets = batch.deal_raw(cfg.l, cfg.backend, PlaneSet::for_variant(variant), &mut rng)?;
        let mut session = [0u8; 16];
        rng.fill_bytes(&mut session);
        let mut conns = Vec::with_capacity(3);
        for (set, addr) in sets.iter().zip(addrs) {
            let mut c = connect(addr, cfg.timeout())?;
            let files = encode_set(set).into_iter().map(|(_, b)| b).collect();
            write_frame(
                &mut c,
                &Request::Query {
                    session,
                    variant,
                    shape: batch.shape(),
                    files,
                },
            )?;
            conns.push(c);
        }
        let mut matches = None;
        let mut parties = Vec::with_capacity(3);
        for (c, party) in conns.iter_mut().zip(PartyId::ALL) {
            match read_frame(c)? {
                Response::Done { matches: m, stats, .. } => {
                    if party == OUTPUT_PARTY {
                        matches = m;
                    }
                    parties.push(*stats);
                }
                Response::Failed(e) => return Err(e),
                Response::Bye => return Err(CliError::Transport(format!("{party} closed the session"))),
            }
        }
        let matches = matches.ok_or_else(|| CliError::Other(format!("{OUTPUT_PARTY} returned no result")))?;
        runs.push(RunReport {
            matches,
            stats: parties[OUTPUT_PARTY.idx()].clone(),
            parties,
        });
    }
    if let Some(first) = runs.first() {
        if let Some(odd) = runs.iter().find(|r| r.matches != first.matches) {
            return Err(CliError::Other(format!(
                "{} and {} disagree: {:?} vs {:?}",
                first.stats.variant, odd.stats.variant, first.matches, odd.matches
            )));
        }
    }
    Ok(StatsFile { runs })
}

/// Asks every party to exit.
pub fn shutdown(cfg: &Config) -> CliResult<()> {
    for addr in cfg.client_addrs()? {
        let mut c = connect(addr, cfg.timeout())?;
        write_frame(&mut c, &Request::Shutdown)?;
        match read_frame(&mut c)? {
            Response::Bye => {}
            Response::Failed(e) => return Err(e),
            Response::Done { .. } => return Err(CliError::Transport(format!("unexpected reply from {addr}"))),
        }
    }
    Ok(())
}
