//! Population snapshots and their on-disk codecs.
//!
//! Binary layout, version 1 (integers and floats little-endian):
//!
//! ```text
//! magic     8 bytes  "SIGSNAP1"
//! version   u32      currently 1
//! round     u64      rounds completed when the snapshot was taken
//! digest    u32 len + that many bytes of ascii hex (params digest)
//! n_agents  u64
//! k         u64      strategies per agent
//! agents    n_agents records: k f64 strategy weights, n_agents f64 link
//!           weights, in agent index order
//! ```
//!
//! Paths ending in `.json` read and write an equivalent serde document
//! instead; everything else uses the binary form. Both codecs are
//! deterministic: identical snapshots serialize to identical bytes.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CoreError, Result};
use crate::population::{AgentState, Population};

const MAGIC: &[u8; 8] = b"SIGSNAP1";
const FORMAT_VERSION: u32 = 1;
/// Sanity cap when decoding untrusted headers.
const MAX_DECODE_AGENTS: u64 = 1 << 24;
const MAX_DECODE_STRATEGIES: u64 = 1 << 24;

/// Full population state at a round, tagged with a digest of the parameters
/// that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationSnapshot {
    pub round: u64,
    pub params_digest: String,
    pub agents: Vec<AgentState>,
}

impl PopulationSnapshot {
    pub fn new(round: u64, params_digest: String, population: &Population) -> Self {
        Self {
            round,
            params_digest,
            agents: population.agents.clone(),
        }
    }

    pub fn n_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn num_strategies(&self) -> usize {
        self.agents.first().map_or(0, |a| a.strategy_weights.len())
    }

    pub fn population(&self) -> Population {
        Population {
            agents: self.agents.clone(),
        }
    }
}

/// Binary encoding (version 1).
pub fn snapshot_to_bytes(snap: &PopulationSnapshot) -> Vec<u8> {
    let n = snap.n_agents();
    let k = snap.num_strategies();
    let mut out = Vec::with_capacity(64 + snap.params_digest.len() + n * (k + n) * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&snap.round.to_le_bytes());
    out.extend_from_slice(&(snap.params_digest.len() as u32).to_le_bytes());
    out.extend_from_slice(snap.params_digest.as_bytes());
    out.extend_from_slice(&(n as u64).to_le_bytes());
    out.extend_from_slice(&(k as u64).to_le_bytes());
    for agent in &snap.agents {
        for &w in &agent.strategy_weights {
            out.extend_from_slice(&w.to_le_bytes());
        }
        for &w in &agent.link_weights {
            out.extend_from_slice(&w.to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        if self.pos + len > self.bytes.len() {
            return Err(CoreError::SnapshotFormat(format!(
                "truncated at byte {} (wanted {len} more)",
                self.pos
            )));
        }
        let slice = &self.bytes[self.pos..self.pos + len];
        self.pos += len;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Binary decoding (version 1).
pub fn snapshot_from_bytes(bytes: &[u8]) -> Result<PopulationSnapshot> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(8)? != MAGIC {
        return Err(CoreError::SnapshotFormat("bad magic".into()));
    }
    let version = cur.u32()?;
    if version != FORMAT_VERSION {
        return Err(CoreError::SnapshotFormat(format!(
            "unsupported version {version}"
        )));
    }
    let round = cur.u64()?;
    let digest_len = cur.u32()? as usize;
    let digest_bytes = cur.take(digest_len)?;
    let params_digest = String::from_utf8(digest_bytes.to_vec())
        .map_err(|_| CoreError::SnapshotFormat("digest is not utf-8".into()))?;
    let n = cur.u64()?;
    let k = cur.u64()?;
    if n > MAX_DECODE_AGENTS || k > MAX_DECODE_STRATEGIES {
        return Err(CoreError::SnapshotFormat(format!(
            "implausible header: {n} agents, {k} strategies"
        )));
    }
    let (n, k) = (n as usize, k as usize);
    let mut agents = Vec::with_capacity(n);
    for _ in 0..n {
        let mut strategy_weights = Vec::with_capacity(k);
        for _ in 0..k {
            strategy_weights.push(cur.f64()?);
        }
        let mut link_weights = Vec::with_capacity(n);
        for _ in 0..n {
            link_weights.push(cur.f64()?);
        }
        agents.push(AgentState {
            strategy_weights,
            link_weights,
        });
    }
    if cur.pos != bytes.len() {
        return Err(CoreError::SnapshotFormat(format!(
            "{} trailing bytes",
            bytes.len() - cur.pos
        )));
    }
    Ok(PopulationSnapshot {
        round,
        params_digest,
        agents,
    })
}

fn is_json_path(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "json")
}

/// Write a snapshot, choosing the codec by extension (`.json` is the text
/// variant, anything else binary).
pub fn write_snapshot(path: &Path, snap: &PopulationSnapshot) -> Result<()> {
    let io_err = |source: std::io::Error| CoreError::SnapshotIo {
        round: snap.round,
        source,
    };
    let bytes = if is_json_path(path) {
        let mut text = serde_json::to_vec_pretty(snap)
            .map_err(|e| CoreError::SnapshotFormat(e.to_string()))?;
        text.push(b'\n');
        text
    } else {
        snapshot_to_bytes(snap)
    };
    let mut file = fs::File::create(path).map_err(io_err)?;
    file.write_all(&bytes).map_err(io_err)?;
    Ok(())
}

/// Read a snapshot written by [`write_snapshot`].
pub fn read_snapshot(path: &Path) -> Result<PopulationSnapshot> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    if is_json_path(path) {
        serde_json::from_slice(&bytes).map_err(|e| CoreError::SnapshotFormat(e.to_string()))
    } else {
        snapshot_from_bytes(&bytes)
    }
}

/// Content digest over the binary encoding; useful for asserting that an
/// operation left a snapshot untouched.
pub fn content_digest(snap: &PopulationSnapshot) -> String {
    let mut hasher = Sha256::new();
    hasher.update(snapshot_to_bytes(snap));
    hex(&hasher.finalize())
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    let mut out = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> PopulationSnapshot {
        PopulationSnapshot {
            round: 42,
            params_digest: "cafe01".into(),
            agents: vec![
                AgentState {
                    strategy_weights: vec![5.0, 0.25, 1e-9],
                    link_weights: vec![0.0, 19.0],
                },
                AgentState {
                    strategy_weights: vec![1.0, 2.0, 3.0],
                    link_weights: vec![0.5, 0.0],
                },
            ],
        }
    }

    #[test]
    fn binary_round_trip_is_exact() {
        let snap = sample();
        let bytes = snapshot_to_bytes(&snap);
        let back = snapshot_from_bytes(&bytes).unwrap();
        assert_eq!(back, snap);
        // Deterministic encoding.
        assert_eq!(bytes, snapshot_to_bytes(&back));
    }

    #[test]
    fn decoding_rejects_corruption() {
        let snap = sample();
        let mut bytes = snapshot_to_bytes(&snap);
        assert!(snapshot_from_bytes(&bytes[..bytes.len() - 1]).is_err());
        bytes[0] ^= 0xff;
        assert!(matches!(
            snapshot_from_bytes(&bytes),
            Err(CoreError::SnapshotFormat(_))
        ));
    }

    #[test]
    fn file_round_trip_both_codecs() {
        let dir = tempfile::tempdir().unwrap();
        let snap = sample();
        for name in ["pop.snap", "pop.json"] {
            let path = dir.path().join(name);
            write_snapshot(&path, &snap).unwrap();
            assert_eq!(read_snapshot(&path).unwrap(), snap);
        }
    }

    #[test]
    fn content_digest_tracks_content() {
        let snap = sample();
        let d1 = content_digest(&snap);
        let mut other = snap.clone();
        other.agents[0].strategy_weights[0] += 1e-12;
        assert_ne!(d1, content_digest(&other));
        assert_eq!(d1, content_digest(&snap));
    }
}
