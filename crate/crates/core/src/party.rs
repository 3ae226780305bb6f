//! Per-party execution context and an in-process runner for all three parties.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prf::{PrfPair, SeedPair};
use crate::transport::{local_mesh, Net, PartyId, Phase, TcpTransport, Transport};

/// Local work counters, independent of communication.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCounters {
    /// AND gates evaluated, counted once per lane.
    pub and_gates: u64,
    /// Ring multiply-accumulates in plain dot products.
    pub macs: u64,
}

/// Which values may be revealed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpenPolicy {
    /// Only aggregated results are ever opened.
    Production,
    /// Per-comparison values may be opened for testing.
    Debug,
}

/// What an opening would reveal.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Disclosure {
    /// One result per query after aggregation.
    Aggregate,
    /// Individual comparison or intermediate values.
    PerComparison,
}

/// Log entry written for every opening attempt.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpenEvent {
    pub disclosure: Disclosure,
    pub values: usize,
    pub allowed: bool,
}

pub struct Party {
    id: PartyId,
    pub net: Net,
    pub prf: PrfPair,
    pub counters: OpCounters,
    policy: OpenPolicy,
    opens: Vec<OpenEvent>,
}

impl Party {
    pub fn new(transport: Box<dyn Transport>, seeds: &SeedPair, policy: OpenPolicy) -> Self {
        Self {
            id: transport.id(),
            net: Net::new(transport),
            prf: PrfPair::new(seeds),
            counters: OpCounters::default(),
            policy,
            opens: Vec::new(),
        }
    }

    pub fn id(&self) -> PartyId {
        self.id
    }

    pub fn policy(&self) -> OpenPolicy {
        self.policy
    }

    pub fn opens(&self) -> &[OpenEvent] {
        &self.opens
    }

    /// Runs `f` with traffic attributed to `phase`, restoring the previous
    /// phase afterwards.
    pub fn in_phase<T>(&mut self, phase: Phase, f: impl FnOnce(&mut Self) -> Result<T>) -> Result<T> {
        let old = self.net.set_phase(phase);
        let out = f(self);
        self.net.set_phase(old);
        out
    }

    /// Checks an opening against the policy and records it.
    pub fn authorize_open(&mut self, disclosure: Disclosure, values: usize) -> Result<()> {
        let allowed = disclosure == Disclosure::Aggregate || self.policy == OpenPolicy::Debug;
        self.opens.push(OpenEvent {
            disclosure,
            values,
            allowed,
        });
        if allowed {
            Ok(())
        } else {
            Err(Error::Leakage)
        }
    }

    /// One reshare round: sends to the next party, receives from the
    /// previous one.
    pub fn pass_to_next(&mut self, payload: Vec<u8>) -> Result<Vec<u8>> {
        self.net.send(self.id.next(), payload)?;
        let got = self.net.recv(self.id.prev())?;
        self.net.round_barrier();
        Ok(got)
    }
}

/// Default receive timeout of the in-process runners.
pub const LOCAL_TIMEOUT: Duration = Duration::from_secs(60);

/// Runs `f` for all three parties on scoped threads over channels.
pub fn run_parties<T, F>(seeds: &[SeedPair; 3], policy: OpenPolicy, f: F) -> Result<[T; 3]>
where
    T: Send,
    F: Fn(&mut Party) -> Result<T> + Sync,
{
    let transports: Vec<Box<dyn Transport>> = local_mesh(LOCAL_TIMEOUT)
        .into_iter()
        .map(|t| Box::new(t) as Box<dyn Transport>)
        .collect();
    run_with(transports, seeds, policy, f)
}

/// Same as [`run_parties`] over loopback TCP.
pub fn run_parties_tcp<T, F>(seeds: &[SeedPair; 3], policy: OpenPolicy, f: F) -> Result<[T; 3]>
where
    T: Send,
    F: Fn(&mut Party) -> Result<T> + Sync,
{
    let transports: Vec<Box<dyn Transport>> = TcpTransport::loopback_mesh(LOCAL_TIMEOUT)?
        .into_iter()
        .map(|t| Box::new(t) as Box<dyn Transport>)
        .collect();
    run_with(transports, seeds, policy, f)
}

fn run_with<T, F>(transports: Vec<Box<dyn Transport>>, seeds: &[SeedPair; 3], policy: OpenPolicy, f: F) -> Result<[T; 3]>
where
    T: Send,
    F: Fn(&mut Party) -> Result<T> + Sync,
{
    let results: Vec<Result<T>> = std::thread::scope(|scope| {
        let handles: Vec<_> = transports
            .into_iter()
            .map(|t| {
                let f = &f;
                let seeds = seeds[t.id().idx()];
                scope.spawn(move || {
                    let mut p = Party::new(t, &seeds, policy);
                    f(&mut p)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|e| std::panic::resume_unwind(e)))
            .collect()
    });
    // A failing party makes its peers see a hang-up; report the root cause.
    if let Some(e) = results
        .iter()
        .filter_map(|r| r.as_ref().err())
        .find(|e| !matches!(e, Error::Transport(_)))
    {
        return Err(e.clone());
    }
    let mut out = Vec::with_capacity(3);
    for r in results {
        out.push(r?);
    }
    Ok(out.try_into().unwrap_or_else(|_| unreachable!()))
}

/// Deterministic seeds for tests and benchmarks.
pub fn test_seeds(seed: u64) -> [SeedPair; 3] {
    use rand::SeedableRng;
    crate::prf::deal_seeds(&mut rand_chacha::ChaCha20Rng::seed_from_u64(seed))
}
