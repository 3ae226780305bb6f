//! Client protocol: length-prefixed bincode frames over TCP.

use std::io::{Read, Write};

use irisdedup_core::engine::{BatchShape, ProtocolVariant, QueryStats};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::fail::{CliError, CliResult};

const MAX_FRAME: u32 = 1 << 31;

#[derive(Debug, Serialize, Deserialize)]
pub enum Request {
    Query {
        /// Fresh per query; every party derives its PRF keys from it.
        session: [u8; 16],
        variant: ProtocolVariant,
        shape: BatchShape,
        /// This party's share files of the rotated batch.
        files: Vec<Vec<u8>>,
    },
    Shutdown,
}

#[derive(Debug, Serialize, Deserialize)]
pub enum Response {
    Done {
        matches: Option<Vec<bool>>,
        per_comparison: Option<Vec<bool>>,
        stats: Box<QueryStats>,
    },
    Failed(CliError),
    Bye,
}

pub fn write_frame<T: Serialize>(w: &mut impl Write, msg: &T) -> CliResult<()> {
    let body = bincode::serialize(msg).map_err(|e| CliError::Other(e.to_string()))?;
    w.write_all(&(body.len() as u32).to_le_bytes())?;
    w.write_all(&body)?;
    w.flush()?;
    Ok(())
}

pub fn read_frame<T: DeserializeOwned>(r: &mut impl Read) -> CliResult<T> {
    let mut len = [0u8; 4];
    r.read_exact(&mut len)?;
    let len = u32::from_le_bytes(len);
    if len > MAX_FRAME {
        return Err(CliError::Transport(format!("frame of {len} bytes refused")));
    }
    let mut body = vec![0u8; len as usize];
    r.read_exact(&mut body)?;
    bincode::deserialize(&body).map_err(|e| CliError::Transport(format!("bad frame: {e}")))
}
