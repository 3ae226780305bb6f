//! Party-to-party messaging.
//!
//! A [`Transport`] moves opaque payloads over the six directed channels of the
//! three-party mesh. [`Net`] wraps a transport with the [`CommLedger`] that
//! counts payload bytes, messages and protocol rounds per [`Phase`]. Framing
//! overhead never enters the ledger, so in-process and TCP runs of the same
//! protocol trace produce identical counts.

mod ledger;
mod local;
mod tcp;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use ledger::{CommLedger, PhaseCounters};
pub use local::{local_mesh, LocalTransport};
pub use tcp::TcpTransport;

use crate::error::{Error, Result};

/// One of the three parties, numbered 1..=3.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct PartyId(u8);

impl PartyId {
    pub const P1: PartyId = PartyId(1);
    pub const P2: PartyId = PartyId(2);
    pub const P3: PartyId = PartyId(3);
    pub const ALL: [PartyId; 3] = [Self::P1, Self::P2, Self::P3];

    pub fn new(index: u8) -> Result<Self> {
        match index {
            1..=3 => Ok(Self(index)),
            _ => Err(Error::InvalidInput(format!("party id {index} not in 1..=3"))),
        }
    }

    pub fn index(self) -> u8 {
        self.0
    }

    /// Zero-based position, handy for array indexing.
    pub fn idx(self) -> usize {
        self.0 as usize - 1
    }

    /// `(i mod 3) + 1`
    pub fn next(self) -> Self {
        Self(self.0 % 3 + 1)
    }

    pub fn prev(self) -> Self {
        self.next().next()
    }
}

impl TryFrom<u8> for PartyId {
    type Error = Error;
    fn try_from(v: u8) -> Result<Self> {
        Self::new(v)
    }
}

impl From<PartyId> for u8 {
    fn from(p: PartyId) -> u8 {
        p.0
    }
}

impl fmt::Display for PartyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "P{}", self.0)
    }
}

/// Protocol phase a message or round is attributed to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Setup,
    Dot,
    Lift,
    Msb,
    OrTree,
    Ot,
    Open,
}

impl Phase {
    pub const ALL: [Phase; 7] = [
        Phase::Setup,
        Phase::Dot,
        Phase::Lift,
        Phase::Msb,
        Phase::OrTree,
        Phase::Ot,
        Phase::Open,
    ];

    pub fn tag(self) -> u8 {
        self as u8
    }

    pub fn from_tag(tag: u8) -> Result<Self> {
        Self::ALL
            .get(tag as usize)
            .copied()
            .ok_or_else(|| Error::Transport(format!("unknown phase tag {tag}")))
    }
}

/// Reliable, in-order delivery on each directed channel.
pub trait Transport: Send {
    fn id(&self) -> PartyId;
    fn send(&mut self, to: PartyId, phase: Phase, payload: Vec<u8>) -> Result<()>;
    fn recv(&mut self, from: PartyId) -> Result<(Phase, Vec<u8>)>;
}

/// A transport plus the per-phase ledger.
pub struct Net {
    transport: Box<dyn Transport>,
    ledger: CommLedger,
    phase: Phase,
}

impl Net {
    pub fn new(transport: Box<dyn Transport>) -> Self {
        Self {
            transport,
            ledger: CommLedger::default(),
            phase: Phase::Setup,
        }
    }

    pub fn id(&self) -> PartyId {
        self.transport.id()
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    /// Sets the phase subsequent traffic is attributed to, returning the old one.
    pub fn set_phase(&mut self, phase: Phase) -> Phase {
        std::mem::replace(&mut self.phase, phase)
    }

    pub fn ledger(&self) -> &CommLedger {
        &self.ledger
    }

    pub fn send(&mut self, to: PartyId, payload: Vec<u8>) -> Result<()> {
        if to == self.id() {
            return Err(Error::Transport("a party never sends to itself".into()));
        }
        self.ledger.record_send(self.phase, payload.len());
        self.transport.send(to, self.phase, payload)
    }

    pub fn recv(&mut self, from: PartyId) -> Result<Vec<u8>> {
        if from == self.id() {
            return Err(Error::Transport("a party never receives from itself".into()));
        }
        let (phase, payload) = self.transport.recv(from)?;
        if phase != self.phase {
            return Err(Error::Transport(format!(
                "phase desync: expected {:?} from {from}, got {phase:?}",
                self.phase
            )));
        }
        self.ledger.record_recv(self.phase, payload.len());
        Ok(payload)
    }

    /// Marks the end of one protocol-level communication round.
    pub fn round_barrier(&mut self) {
        self.ledger.record_round(self.phase);
    }
}
