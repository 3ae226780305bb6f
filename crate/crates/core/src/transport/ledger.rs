use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::Phase;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseCounters {
    pub bytes_sent: u64,
    pub messages_sent: u64,
    pub rounds: u64,
    pub bytes_received: u64,
}

impl std::ops::Add for PhaseCounters {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            bytes_sent: self.bytes_sent + o.bytes_sent,
            messages_sent: self.messages_sent + o.messages_sent,
            rounds: self.rounds + o.rounds,
            bytes_received: self.bytes_received + o.bytes_received,
        }
    }
}

impl std::ops::Sub for PhaseCounters {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self {
            bytes_sent: self.bytes_sent - o.bytes_sent,
            messages_sent: self.messages_sent - o.messages_sent,
            rounds: self.rounds - o.rounds,
            bytes_received: self.bytes_received - o.bytes_received,
        }
    }
}

/// Monotone per-phase communication counters of one party. Payload bytes
/// only; framing is excluded.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommLedger {
    phases: BTreeMap<Phase, PhaseCounters>,
}

impl CommLedger {
    pub(crate) fn record_send(&mut self, phase: Phase, bytes: usize) {
        let c = self.phases.entry(phase).or_default();
        c.bytes_sent += bytes as u64;
        c.messages_sent += 1;
    }

    pub(crate) fn record_recv(&mut self, phase: Phase, bytes: usize) {
        self.phases.entry(phase).or_default().bytes_received += bytes as u64;
    }

    pub(crate) fn record_round(&mut self, phase: Phase) {
        self.phases.entry(phase).or_default().rounds += 1;
    }

    pub fn phase(&self, phase: Phase) -> PhaseCounters {
        self.phases.get(&phase).copied().unwrap_or_default()
    }

    pub fn total(&self) -> PhaseCounters {
        self.phases.values().fold(PhaseCounters::default(), |a, &b| a + b)
    }

    pub fn iter(&self) -> impl Iterator<Item = (Phase, PhaseCounters)> + '_ {
        self.phases.iter().map(|(&p, &c)| (p, c))
    }

    /// Counters accumulated since `earlier` was taken.
    pub fn since(&self, earlier: &CommLedger) -> CommLedger {
        let phases = self
            .phases
            .iter()
            .map(|(&p, &c)| (p, c - earlier.phase(p)))
            .filter(|(_, c)| *c != PhaseCounters::default())
            .collect();
        CommLedger { phases }
    }
}
