//! Key-seeded pseudo-randomness.
//!
//! Sender and receiver must derive the same partition and the same block
//! orderings from the secret key, so the generator is a fixed, published
//! recurrence (splitmix64) rather than whatever `rand` happens to ship.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
const MIX_1: u64 = 0xBF58_476D_1CE4_E5B9;
const MIX_2: u64 = 0x94D0_49BB_1331_11EB;

/// Which of the three key parts a stream was seeded from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KeyPart {
    /// Drives partitioning.
    K1,
    /// Drives the part-1 carrier permutation.
    K2,
    /// Drives the part-2 carrier permutation.
    K3,
}

/// Secret key made of three independent 64-bit parts.
///
/// The external form is 48 hex digits: `k1`, `k2` and `k3` as big-endian
/// 16-digit groups, concatenated.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct SecretKey {
    pub k1: u64,
    pub k2: u64,
    pub k3: u64,
}

impl SecretKey {
    pub fn new(k1: u64, k2: u64, k3: u64) -> Self {
        SecretKey { k1, k2, k3 }
    }

    pub fn part(&self, part: KeyPart) -> u64 {
        match part {
            KeyPart::K1 => self.k1,
            KeyPart::K2 => self.k2,
            KeyPart::K3 => self.k3,
        }
    }

    pub fn stream(&self, part: KeyPart) -> KeyedStream {
        KeyedStream {
            state: self.part(part),
            origin: Some(part),
        }
    }
}

impl FromStr for SecretKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.len() != 48 || !s.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(Error::domain(format!(
                "key must be exactly 48 hexadecimal characters, got {:?}",
                s
            )));
        }
        let part = |i: usize| u64::from_str_radix(&s[i * 16..(i + 1) * 16], 16).unwrap();
        Ok(SecretKey::new(part(0), part(1), part(2)))
    }
}

impl fmt::Display for SecretKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016x}{:016x}{:016x}", self.k1, self.k2, self.k3)
    }
}

// Keys are secrets; keep them out of debug logs.
impl fmt::Debug for SecretKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SecretKey(..)")
    }
}

/// A splitmix64 stream. Not shareable across threads while in use; clone it
/// to fork an identical sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyedStream {
    state: u64,
    origin: Option<KeyPart>,
}

impl KeyedStream {
    /// Seeds a stream directly from a raw 64-bit value.
    pub fn new(seed: u64) -> Self {
        KeyedStream {
            state: seed,
            origin: None,
        }
    }

    pub fn state(&self) -> u64 {
        self.state
    }

    pub fn origin(&self) -> Option<KeyPart> {
        self.origin
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(MIX_1);
        z = (z ^ (z >> 27)).wrapping_mul(MIX_2);
        z ^ (z >> 31)
    }

    /// Uniform integer in `[0, n)` by rejection sampling.
    pub fn next_below(&mut self, n: u64) -> Result<u64> {
        if n == 0 {
            return Err(Error::domain("next_below requires n >= 1"));
        }
        // Largest multiple of n representable in the 2^64 range; u64::MAX
        // plus one would overflow so it is computed as 2^64 - (2^64 mod n).
        let rem = (u64::MAX % n + 1) % n;
        let limit = 0u64.wrapping_sub(rem);
        loop {
            let v = self.next_u64();
            if limit == 0 || v < limit {
                return Ok(v % n);
            }
        }
    }

    /// Fisher-Yates shuffle of `0..n`, swapping from the top index down.
    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut order: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = self.next_below(i as u64 + 1).expect("i + 1 >= 1") as usize;
            order.swap(i, j);
        }
        order
    }
}

/// Stream seeded from a single key part.
pub fn seed_stream(part: u64) -> KeyedStream {
    KeyedStream::new(part)
}

/// Key-determined ordering of `0..n`.
pub fn keyed_permutation(stream: &mut KeyedStream, n: usize) -> Vec<usize> {
    stream.permutation(n)
}
