//! Ideal-cache-model simulator.
//!
//! Computes the serial cache complexity Q1 of an access trace on a fully
//! associative cache of `M` words with `B`-word lines and LRU replacement
//! (the standard constant-factor surrogate for optimal replacement). Lines
//! are identified by `(buffer, index / B)`, so distinct buffers never share
//! a line.

use std::collections::HashMap;
use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::pool::BufferId;
use crate::task::Access;

/// Ideal-cache parameters: capacity `M` and line size `B`, both in words.
#[derive(Copy, Clone, Debug)]
pub struct CacheConfig {
    pub m_words: u64,
    pub b_words: u64,
    /// Permit configurations that violate the tall-cache assumption
    /// `M >= B^2`.
    pub allow_short_cache: bool,
}

impl CacheConfig {
    pub fn new(m_words: u64, b_words: u64) -> CacheConfig {
        CacheConfig {
            m_words,
            b_words,
            allow_short_cache: false,
        }
    }

    pub fn lines(&self) -> u64 {
        self.m_words / self.b_words
    }

    fn validate(&self) -> Result<()> {
        if self.b_words == 0 || self.m_words < self.b_words {
            return Err(Error::CacheConfig {
                what: format!(
                    "need M >= B >= 1, got M={} B={}",
                    self.m_words, self.b_words
                ),
            });
        }
        if !self.allow_short_cache && self.m_words < self.b_words * self.b_words {
            return Err(Error::CacheConfig {
                what: format!(
                    "tall-cache assumption M >= B^2 violated (M={} B={}); set allow_short_cache to override",
                    self.m_words, self.b_words
                ),
            });
        }
        Ok(())
    }
}

/// Fully associative LRU cache over `(buffer, line)` keys, implemented as a
/// hash map into an intrusive doubly linked list of slots.
struct Lru {
    capacity: usize,
    map: HashMap<(u32, u64), usize>,
    keys: Vec<(u32, u64)>,
    prev: Vec<usize>,
    next: Vec<usize>,
    head: usize,
    tail: usize,
}

const NIL: usize = usize::MAX;

impl Lru {
    fn new(capacity: usize) -> Lru {
        Lru {
            capacity,
            map: HashMap::with_capacity(capacity * 2),
            keys: Vec::with_capacity(capacity),
            prev: Vec::with_capacity(capacity),
            next: Vec::with_capacity(capacity),
            head: NIL,
            tail: NIL,
        }
    }

    fn unlink(&mut self, slot: usize) {
        let (p, n) = (self.prev[slot], self.next[slot]);
        if p != NIL {
            self.next[p] = n;
        } else {
            self.head = n;
        }
        if n != NIL {
            self.prev[n] = p;
        } else {
            self.tail = p;
        }
    }

    fn push_front(&mut self, slot: usize) {
        self.prev[slot] = NIL;
        self.next[slot] = self.head;
        if self.head != NIL {
            self.prev[self.head] = slot;
        }
        self.head = slot;
        if self.tail == NIL {
            self.tail = slot;
        }
    }

    /// Touches a line; returns true on a miss.
    fn access(&mut self, key: (u32, u64)) -> bool {
        if let Some(&slot) = self.map.get(&key) {
            if self.head != slot {
                self.unlink(slot);
                self.push_front(slot);
            }
            return false;
        }
        let slot = if self.keys.len() < self.capacity {
            self.keys.push(key);
            self.prev.push(NIL);
            self.next.push(NIL);
            self.keys.len() - 1
        } else {
            let victim = self.tail;
            self.unlink(victim);
            self.map.remove(&self.keys[victim]);
            self.keys[victim] = key;
            victim
        };
        self.map.insert(key, slot);
        self.push_front(slot);
        true
    }
}

/// Replays a trace and returns the total miss count Q1.
pub fn simulate(trace: &[Access], cfg: &CacheConfig) -> Result<u64> {
    cfg.validate()?;
    let mut lru = Lru::new(cfg.lines() as usize);
    let mut misses = 0u64;
    for a in trace {
        if lru.access((a.buf.0, a.idx / cfg.b_words)) {
            misses += 1;
        }
    }
    Ok(misses)
}

/// Number of distinct lines touched by a trace (the cold-miss floor).
pub fn distinct_lines(trace: &[Access], b_words: u64) -> u64 {
    let mut lines: Vec<(u32, u64)> = trace.iter().map(|a| (a.buf.0, a.idx / b_words)).collect();
    lines.sort_unstable();
    lines.dedup();
    lines.len() as u64
}

/// Binary trace record: u32 buffer id, u64 element index, u8 read/write
/// flag, little-endian.
pub fn write_trace<W: Write>(trace: &[Access], out: &mut W) -> Result<()> {
    let mut buf = Vec::with_capacity(trace.len() * 13);
    for a in trace {
        buf.extend_from_slice(&a.buf.0.to_le_bytes());
        buf.extend_from_slice(&a.idx.to_le_bytes());
        buf.push(a.write as u8);
    }
    out.write_all(&buf)?;
    Ok(())
}

/// Replays a binary trace file (see [`write_trace`]) and returns Q1.
pub fn simulate_file(path: &std::path::Path, cfg: &CacheConfig) -> Result<u64> {
    let mut file = std::fs::File::open(path)?;
    let trace = read_trace(&mut file)?;
    simulate(&trace, cfg)
}

pub fn read_trace<R: Read>(input: &mut R) -> Result<Vec<Access>> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    if bytes.len() % 13 != 0 {
        return Err(Error::Format {
            what: format!("trace length {} is not a multiple of 13", bytes.len()),
        });
    }
    Ok(bytes
        .chunks_exact(13)
        .map(|rec| Access {
            buf: BufferId(u32::from_le_bytes(rec[..4].try_into().unwrap())),
            idx: u64::from_le_bytes(rec[4..12].try_into().unwrap()),
            write: rec[12] != 0,
        })
        .collect())
}
