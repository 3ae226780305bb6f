use std::net::{SocketAddr, ToSocketAddrs};
use std::path::{Path, PathBuf};
use std::time::Duration;

use irisdedup_core::engine::{Backend, ProtocolVariant};
use irisdedup_core::iris::MatchParams;
use irisdedup_core::transport::PartyId;
use serde::Deserialize;

use crate::fail::{CliError, CliResult};

pub const ENV_PARTY: &str = "IRISDEDUP_PARTY";
pub const ENV_PEERS: &str = "IRISDEDUP_PEERS";
pub const ENV_CLIENTS: &str = "IRISDEDUP_CLIENTS";

/// One TOML file describes the whole cluster. A party file sets `party`;
/// the query client ignores it.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub party: Option<u8>,
    /// Party-to-party endpoints, indexed by party.
    pub peers: Vec<String>,
    /// Endpoints the parties accept query clients on.
    pub clients: Vec<String>,
    pub backend: Backend,
    pub variant: ProtocolVariant,
    pub l: usize,
    pub match_ratio: Option<f64>,
    pub a: Option<u64>,
    pub b: Option<u64>,
    /// Defaults to `<share_dir>/p<i>.seed`.
    pub seed_file: Option<PathBuf>,
    pub share_dir: PathBuf,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    /// Opens per-comparison bits at the output party. Testing only.
    #[serde(default)]
    pub debug: bool,
}

fn default_timeout() -> u64 {
    60
}

impl Config {
    /// Reads a TOML file and applies the environment overrides. Relative
    /// paths resolve against the file's directory.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: Config =
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.share_dir = base.join(&cfg.share_dir);
        cfg.seed_file = cfg.seed_file.map(|p| base.join(p));
        if let Ok(v) = std::env::var(ENV_PARTY) {
            cfg.party = Some(v.parse().map_err(|_| CliError::Config(format!("{ENV_PARTY}={v} is not a party number")))?);
        }
        if let Ok(v) = std::env::var(ENV_PEERS) {
            cfg.peers = split_list(&v);
        }
        if let Ok(v) = std::env::var(ENV_CLIENTS) {
            cfg.clients = split_list(&v);
        }
        cfg.params()?;
        cfg.peer_addrs()?;
        cfg.client_addrs()?;
        Ok(cfg)
    }

    pub fn params(&self) -> CliResult<MatchParams> {
        let p = match (self.match_ratio, self.a, self.b) {
            (Some(r), None, None) => MatchParams::from_ratio(r, 16)?,
            (None, Some(a), Some(b)) => MatchParams::with_ab(a, b)?,
            (None, None, None) => MatchParams::default(),
            _ => return Err(CliError::Config("set either match_ratio or both a and b".into())),
        };
        Ok(p)
    }

    pub fn party_id(&self) -> CliResult<PartyId> {
        let i = self
            .party
            .ok_or_else(|| CliError::Config(format!("no party id; set `party` or {ENV_PARTY}")))?;
        Ok(PartyId::new(i)?)
    }

    pub fn peer_addrs(&self) -> CliResult<[SocketAddr; 3]> {
        resolve3("peers", &self.peers)
    }

    pub fn client_addrs(&self) -> CliResult<[SocketAddr; 3]> {
        resolve3("clients", &self.clients)
    }

    pub fn seed_path(&self, p: PartyId) -> PathBuf {
        self.seed_file
            .clone()
            .unwrap_or_else(|| self.share_dir.join(format!("p{}.seed", p.index())))
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs(self.timeout_secs)
    }
}

fn split_list(v: &str) -> Vec<String> {
    v.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
}

fn resolve3(what: &str, list: &[String]) -> CliResult<[SocketAddr; 3]> {
    if list.len() != 3 {
        return Err(CliError::Config(format!("`{what}` needs three endpoints, got {}", list.len())));
    }
    let mut out = Vec::with_capacity(3);
    for s in list {
        let a = s
            .to_socket_addrs()
            .ok()
            .and_then(|mut it| it.next())
            .ok_or_else(|| CliError::Config(format!("cannot resolve endpoint {s}")))?;
        out.push(a);
    }
    Ok([out[0], out[1], out[2]])
}
