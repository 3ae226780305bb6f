pub mod bench;
pub mod binary;
pub mod convert;
pub mod engine;
pub mod error;
pub mod formats;
pub mod galois;
pub mod iris;
pub mod oracle;
pub mod party;
pub mod prf;
pub mod replicated;
pub mod ring;
pub mod shamir;
pub mod transport;

pub use error::{Error, Result};

pub type Z15 = ring::RingElem<u16, 15>;
pub type Z16 = ring::RingElem<u16, 16>;
pub type Z32 = ring::RingElem<u32, 32>;
pub type Z48 = ring::RingElem<u64, 48>;
pub type Gr16 = galois::GrElem<Z16>;
pub type Gr32 = galois::GrElem<Z32>;
