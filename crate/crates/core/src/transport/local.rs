use std::time::Duration;

use crossbeam_channel::{unbounded, Receiver, RecvTimeoutError, Sender};

use super::{PartyId, Phase, Transport};
use crate::error::{Error, Result};

type Frame = (Phase, Vec<u8>);

/// In-process transport over crossbeam channels.
pub struct LocalTransport {
    id: PartyId,
    tx: [Option<Sender<Frame>>; 3],
    rx: [Option<Receiver<Frame>>; 3],
    timeout: Duration,
}

/// Builds the full three-party mesh. Receives fail after `timeout`.
pub fn local_mesh(timeout: Duration) -> [LocalTransport; 3] {
    let mut tx: [[Option<Sender<Frame>>; 3]; 3] = Default::default();
    let mut rx: [[Option<Receiver<Frame>>; 3]; 3] = Default::default();
    for from in 0..3 {
        for to in 0..3 {
            if from != to {
                let (s, r) = unbounded();
                tx[from][to] = Some(s);
                rx[to][from] = Some(r);
            }
        }
    }
    let [t1, t2, t3] = tx;
    let [r1, r2, r3] = rx;
    [(t1, r1), (t2, r2), (t3, r3)]
        .into_iter()
        .zip(PartyId::ALL)
        .map(|((tx, rx), id)| LocalTransport { id, tx, rx, timeout })
        .collect::<Vec<_>>()
        .try_into()
        .unwrap_or_else(|_| unreachable!())
}

impl Transport for LocalTransport {
    fn id(&self) -> PartyId {
        self.id
    }

    fn send(&mut self, to: PartyId, phase: Phase, payload: Vec<u8>) -> Result<()> {
        self.tx[to.idx()]
            .as_ref()
            .ok_or_else(|| Error::Transport("no channel to self".into()))?
            .send((phase, payload))
            .map_err(|_| Error::Transport(format!("{to} hung up")))
    }

    fn recv(&mut self, from: PartyId) -> Result<(Phase, Vec<u8>)> {
        let rx = self.rx[from.idx()]
            .as_ref()
            .ok_or_else(|| Error::Transport("no channel from self".into()))?;
        rx.recv_timeout(self.timeout).map_err(|e| match e {
            RecvTimeoutError::Timeout => Error::Transport(format!("timed out waiting for {from}")),
            RecvTimeoutError::Disconnected => Error::Transport(format!("{from} hung up")),
        })
    }
}
