use std::io::{BufReader, BufWriter, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use crossbeam_channel::{unbounded, Sender};

use super::{PartyId, Phase, Transport};
use crate::error::{Error, Result};

const HELLO_MAGIC: &[u8; 4] = b"IRH1";

struct Peer {
    // Writes go through a dedicated thread so two parties sending large
    // messages to each other at once cannot both block on full socket buffers.
    tx: Option<Sender<Vec<u8>>>,
    writer: Option<JoinHandle<std::io::Result<()>>>,
    reader: BufReader<TcpStream>,
}

/// Length-prefixed framing over one TCP connection per party pair.
///
/// Frame layout: payload length (u32 LE), phase tag (u8), payload.
pub struct TcpTransport {
    id: PartyId,
    peers: [Option<Peer>; 3],
}

impl TcpTransport {
    /// Binds `endpoints[me]` and connects to the other two parties.
    pub fn connect(me: PartyId, endpoints: &[SocketAddr; 3], timeout: Duration) -> Result<Self> {
        let listener = TcpListener::bind(endpoints[me.idx()])?;
        Self::with_listener(me, listener, endpoints, timeout)
    }

    /// Same as [`connect`](Self::connect) with an already bound listener.
    /// Lower-numbered parties accept, higher-numbered parties dial.
    pub fn with_listener(
        me: PartyId,
        listener: TcpListener,
        endpoints: &[SocketAddr; 3],
        timeout: Duration,
    ) -> Result<Self> {
        let deadline = Instant::now() + timeout;
        let mut streams: [Option<TcpStream>; 3] = Default::default();

        for peer in PartyId::ALL.into_iter().filter(|p| *p < me) {
            let mut s = dial(endpoints[peer.idx()], deadline)?;
            s.write_all(HELLO_MAGIC)?;
            s.write_all(&[me.index()])?;
            streams[peer.idx()] = Some(s);
        }

        listener.set_nonblocking(true)?;
        let expected = PartyId::ALL.iter().filter(|p| **p > me).count();
        let mut accepted = 0;
        while accepted < expected {
            match listener.accept() {
                Ok((mut s, _)) => {
                    s.set_nonblocking(false)?;
                    s.set_read_timeout(Some(remaining(deadline)?))?;
                    let mut hello = [0u8; 5];
                    s.read_exact(&mut hello)?;
                    if &hello[..4] != HELLO_MAGIC {
                        return Err(Error::Transport("bad handshake".into()));
                    }
                    let peer = PartyId::new(hello[4])?;
                    if peer <= me || streams[peer.idx()].is_some() {
                        return Err(Error::Transport(format!("unexpected connection from {peer}")));
                    }
                    streams[peer.idx()] = Some(s);
                    accepted += 1;
                }
                Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                    remaining(deadline)?;
                    thread::sleep(Duration::from_millis(5));
                }
                Err(e) => return Err(e.into()),
            }
        }

        let mut peers: [Option<Peer>; 3] = Default::default();
        for (i, s) in streams.into_iter().enumerate() {
            if let Some(s) = s {
                s.set_nodelay(true)?;
                s.set_read_timeout(Some(timeout))?;
                let w = s.try_clone()?;
                let (tx, rx) = unbounded::<Vec<u8>>();
                let writer = thread::spawn(move || {
                    let mut w = BufWriter::new(w);
                    for frame in rx {
                        w.write_all(&frame)?;
                        w.flush()?;
                    }
                    Ok(())
                });
                peers[i] = Some(Peer {
                    tx: Some(tx),
                    writer: Some(writer),
                    reader: BufReader::new(s),
                });
            }
        }
        Ok(Self { id: me, peers })
    }

    /// Three connected transports on ephemeral loopback ports.
    pub fn loopback_mesh(timeout: Duration) -> Result<[TcpTransport; 3]> {
        let listeners = [
            TcpListener::bind("127.0.0.1:0")?,
            TcpListener::bind("127.0.0.1:0")?,
            TcpListener::bind("127.0.0.1:0")?,
        ];
        let endpoints = [
            listeners[0].local_addr()?,
            listeners[1].local_addr()?,
            listeners[2].local_addr()?,
        ];
        let handles: Vec<_> = listeners
            .into_iter()
            .zip(PartyId::ALL)
            .map(|(l, id)| thread::spawn(move || TcpTransport::with_listener(id, l, &endpoints, timeout)))
            .collect();
        let mut out = Vec::with_capacity(3);
        for h in handles {
            out.push(h.join().map_err(|_| Error::Transport("setup thread panicked".into()))??);
        }
        Ok(out.try_into().unwrap_or_else(|_| unreachable!()))
    }

    fn peer(&mut self, p: PartyId) -> Result<&mut Peer> {
        self.peers[p.idx()]
            .as_mut()
            .ok_or_else(|| Error::Transport(format!("no connection to {p}")))
    }
}

fn remaining(deadline: Instant) -> Result<Duration> {
    deadline
        .checked_duration_since(Instant::now())
        .filter(|d| !d.is_zero())
        .ok_or_else(|| Error::Transport("timed out establishing connections".into()))
}

fn dial(addr: SocketAddr, deadline: Instant) -> Result<TcpStream> {
    loop {
        match TcpStream::connect_timeout(&addr, remaining(deadline)?) {
            Ok(s) => return Ok(s),
            Err(_) => thread::sleep(Duration::from_millis(20)),
        }
    }
}

impl Transport for TcpTransport {
    fn id(&self) -> PartyId {
        self.id
    }

    fn send(&mut self, to: PartyId, phase: Phase, payload: Vec<u8>) -> Result<()> {
        let len = u32::try_from(payload.len()).map_err(|_| Error::Transport("frame too large".into()))?;
        let mut frame = Vec::with_capacity(5 + payload.len());
        frame.extend_from_slice(&len.to_le_bytes());
        frame.push(phase.tag());
        frame.extend_from_slice(&payload);
        self.peer(to)?
            .tx
            .as_ref()
            .expect("writer alive until drop")
            .send(frame)
            .map_err(|_| Error::Transport(format!("writer to {to} stopped")))
    }

    fn recv(&mut self, from: PartyId) -> Result<(Phase, Vec<u8>)> {
        let r = &mut self.peer(from)?.reader;
        let mut head = [0u8; 5];
        r.read_exact(&mut head)
            .map_err(|e| Error::Transport(format!("reading from {from}: {e}")))?;
        let len = u32::from_le_bytes(head[..4].try_into().unwrap()) as usize;
        let phase = Phase::from_tag(head[4])?;
        let mut payload = vec![0u8; len];
        r.read_exact(&mut payload)
            .map_err(|e| Error::Transport(format!("reading from {from}: {e}")))?;
        Ok((phase, payload))
    }
}

impl Drop for TcpTransport {
    fn drop(&mut self) {
        for p in self.peers.iter_mut().flatten() {
            p.tx.take();
            if let Some(w) = p.writer.take() {
                let _ = w.join();
            }
        }
    }
}
