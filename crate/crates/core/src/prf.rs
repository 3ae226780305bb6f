//! Correlated randomness from pairwise PRF keys.
//!
//! Party `i` holds its own key `k_i` (also known to party `i+1`) and the key
//! `k_{i-1}` of its predecessor. Each key drives an AES-128 counter-mode stream.
//! Every draw from a key is mirrored by the other holder of that key, so the
//! per-key counters stay aligned without communication.

use aes::cipher::generic_array::GenericArray;
use aes::cipher::{BlockEncrypt, KeyInit};
use aes::Aes128;
use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ring::Ring;
use crate::transport::PartyId;

pub type Seed = [u8; 16];

/// AES-128 in counter mode.
#[derive(Clone)]
pub struct Prf {
    cipher: Aes128,
    ctr: u64,
}

impl Prf {
    pub fn new(key: Seed) -> Self {
        Self {
            cipher: Aes128::new(&GenericArray::from(key)),
            ctr: 0,
        }
    }

    pub fn counter(&self) -> u64 {
        self.ctr
    }

    /// Fills `out` with pseudorandom words, advancing the counter by one per
    /// two words.
    pub fn fill_u64(&mut self, out: &mut [u64]) {
        const BATCH: usize = 64;
        let mut blocks = [GenericArray::default(); BATCH];
        for chunk in out.chunks_mut(2 * BATCH) {
            let nblocks = chunk.len().div_ceil(2);
            for b in blocks.iter_mut().take(nblocks) {
                b.copy_from_slice(&(self.ctr as u128).to_le_bytes());
                self.ctr += 1;
            }
            self.cipher.encrypt_blocks(&mut blocks[..nblocks]);
            for (i, w) in chunk.iter_mut().enumerate() {
                let b = &blocks[i / 2];
                let off = (i % 2) * 8;
                *w = u64::from_le_bytes(b[off..off + 8].try_into().unwrap());
            }
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        let mut w = [0u64; 1];
        self.fill_u64(&mut w);
        w[0]
    }

    pub fn ring_vec<R: Ring>(&mut self, n: usize) -> Vec<R> {
        let mut w = vec![0u64; n];
        self.fill_u64(&mut w);
        w.into_iter().map(R::from_u64).collect()
    }
}

/// The two keys a party holds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedPair {
    pub own: Seed,
    pub prev: Seed,
}

impl SeedPair {
    /// Per-session keys, so a long-lived seed file can back many sessions
    /// without reusing a counter range.
    pub fn derive(&self, session: &[u8]) -> SeedPair {
        SeedPair {
            own: derive_key(&self.own, session),
            prev: derive_key(&self.prev, session),
        }
    }
}

fn derive_key(seed: &Seed, session: &[u8]) -> Seed {
    let mut h = Sha256::new();
    h.update(b"irisdedup-session");
    h.update(seed);
    h.update((session.len() as u64).to_le_bytes());
    h.update(session);
    h.finalize()[..16].try_into().unwrap()
}

/// Trusted-dealer setup: draws `k_1, k_2, k_3` and hands party `i` the pair
/// `(k_i, k_{i-1})`.
pub fn deal_seeds<G: RngCore + CryptoRng>(rng: &mut G) -> [SeedPair; 3] {
    let mut k = [[0u8; 16]; 3];
    for s in &mut k {
        rng.fill_bytes(s);
    }
    PartyId::ALL.map(|p| SeedPair {
        own: k[p.idx()],
        prev: k[p.prev().idx()],
    })
}

/// Both PRF streams of one party.
#[derive(Clone)]
pub struct PrfPair {
    pub own: Prf,
    pub prev: Prf,
}

impl PrfPair {
    pub fn new(seeds: &SeedPair) -> Self {
        Self {
            own: Prf::new(seeds.own),
            prev: Prf::new(seeds.prev),
        }
    }

    /// Additive zero sharing: `r_i = F(k_i) - F(k_{i-1})`, summing to zero
    /// over the three parties.
    pub fn zero_share<R: Ring>(&mut self, n: usize) -> Vec<R> {
        let a = self.own.ring_vec::<R>(n);
        let b = self.prev.ring_vec::<R>(n);
        a.into_iter().zip(b).map(|(x, y)| x - y).collect()
    }

    /// XOR zero sharing over packed bits.
    pub fn zero_bits(&mut self, words: usize) -> Vec<u64> {
        let mut a = vec![0u64; words];
        let mut b = vec![0u64; words];
        self.own.fill_u64(&mut a);
        self.prev.fill_u64(&mut b);
        a.iter_mut().zip(&b).for_each(|(x, y)| *x ^= y);
        a
    }

    /// Replicated sharing of a pseudorandom value known to nobody:
    /// party `i` obtains `(F(k_i), F(k_{i-1}))`.
    pub fn random_pair<R: Ring>(&mut self, n: usize) -> (Vec<R>, Vec<R>) {
        (self.own.ring_vec(n), self.prev.ring_vec(n))
    }
}
