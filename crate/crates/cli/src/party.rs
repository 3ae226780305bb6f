use std::net::{TcpListener, TcpStream};

use irisdedup_core::engine::{handshake, run_query, EngineConfig, SharedQuery, SharedSet};
use irisdedup_core::formats::{decode_seeds, decode_set, read_file};
use irisdedup_core::party::{OpenPolicy, Party};
use irisdedup_core::prf::{PrfPair, SeedPair};
use irisdedup_core::transport::TcpTransport;

use crate::config::Config;
use crate::dealer::load_party_set;
use crate::fail::{CliError, CliResult};
use crate::wire::{read_frame, write_frame, Request, Response};

/// Runs one party until a client sends `Shutdown`.
pub fn run(cfg: &Config) -> CliResult<()> {
    let me = cfg.party_id()?;
    let engine = EngineConfig::new(cfg.backend, cfg.variant, cfg.params()?, cfg.l)?;
    let (owner, seeds) = decode_seeds(&read_file(&cfg.seed_path(me))?)?;
    if owner != me {
        return Err(CliError::Config(format!("seed file belongs to {owner}, not {me}")));
    }
    let set = load_party_set(&cfg.share_dir, me)?;
    if set.l != cfg.l || set.backend != cfg.backend {
        return Err(CliError::Config(format!(
            "shares hold {} codes of length {}, config expects {} of length {}",
            set.backend, set.l, cfg.backend, cfg.l
        )));
    }
    let db = set.into_shared(true);
    let policy = if cfg.debug { OpenPolicy::Debug } else { OpenPolicy::Production };

    let clients = TcpListener::bind(cfg.client_addrs()?[me.idx()])?;
    let mesh = TcpTransport::connect(me, &cfg.peer_addrs()?, cfg.timeout())?;
    let mut p = Party::new(Box::new(mesh), &seeds, policy);
    handshake(&mut p, engine.setup_digest(db.rows, policy))?;
    eprintln!("{me}: ready, {} stored codes, listening on {}", db.rows, clients.local_addr()?);

    for conn in clients.incoming() {
        let mut conn = conn?;
        match serve(&mut p, cfg, &seeds, &db, &mut conn) {
            Ok(true) => continue,
            Ok(false) => break,
            // the mesh may be out of step after a transport failure
            Err(e @ CliError::Transport(_)) => {
                let _ = write_frame(&mut conn, &Response::Failed(e.clone()));
                return Err(e);
            }
            Err(e) => {
                eprintln!("{me}: query failed: {e}");
                let _ = write_frame(&mut conn, &Response::Failed(e));
            }
        }
    }
    Ok(())
}

/// Handles one client request. Returns false on shutdown.
fn serve(p: &mut Party, cfg: &Config, seeds: &SeedPair, db: &SharedSet, conn: &mut TcpStream) -> CliResult<bool> {
    conn.set_read_timeout(Some(cfg.timeout()))?;
    let (session, variant, shape, files) = match read_frame(conn)? {
        Request::Shutdown => {
            write_frame(conn, &Response::Bye)?;
            return Ok(false);
        }
        Request::Query {
            session,
            variant,
            shape,
            files,
        } => (session, variant, shape, files),
    };
    let set = decode_set(&files)?;
    if set.party != p.id() {
        return Err(CliError::Config(format!("query shares for {} sent to {}", set.party, p.id())));
    }
    let query = SharedQuery {
        shape,
        set: set.into_shared(false),
    };
    let engine = EngineConfig::new(cfg.backend, variant, cfg.params()?, cfg.l)?;
    p.prf = PrfPair::new(&seeds.derive(&session));
    let out = run_query(p, &engine, db, &query)?;
    write_frame(
        conn,
        &Response::Done {
            matches: out.matches,
            per_comparison: out.per_comparison,
            stats: Box::new(out.stats),
        },
    )?;
    Ok(true)
}
