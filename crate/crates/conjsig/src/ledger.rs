//! The used-factor ledger: an append-only record of every `n_j` a key has
//! published, persisted as self-delimiting binary records.
//!
//! A verifier consults the ledger to reject signatures that reuse a factor:
//! publishing `n_j` hands everyone an `n_j`-th root of the public key, so a
//! second signature with the same `n_j` can be a forgery built from that
//! root. Each entry therefore carries a digest of the exact signature event
//! that recorded it — a signature matching its own entry is fresh, anything
//! else sharing the `(key_id, n_j)` pair is a replay.
//!
//! File format, one record per entry:
//!
//! ```text
//! u32 BE    payload length
//! u32 BE    key_id length, then key_id bytes
//! u32 BE    n_j length, then n_j as minimal two's-complement big-endian
//! u64 BE    Unix seconds
//! [32 B]    optional event digest
//! ```
//!
//! Records are only ever appended, under an advisory exclusive lock held
//! across append + flush + sync, and any new records another process slipped
//! in are merged before the duplicate check. A torn final record never
//! corrupts the prefix: loading reports its exact byte offset and refuses,
//! leaving repair to the operator.

use crate::wire::{self, WireError};
use num_bigint::BigInt;
use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

/// Where entry timestamps come from. `Fixed` makes whole transcripts
/// reproducible (seeded CLI runs).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Clock {
    System,
    Fixed(u64),
}

impl Clock {
    fn now(&self) -> u64 {
        match self {
            Clock::System => SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .expect("system clock before 1970")
                .as_secs(),
            Clock::Fixed(t) => *t,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LedgerError {
    #[error("ledger storage: {0}")]
    Io(#[from] std::io::Error),
    #[error("corrupt ledger record starting at byte {offset}: {detail}")]
    Corrupt { offset: u64, detail: String },
}

/// One recorded use of a factor.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LedgerEntry {
    pub n_j: BigInt,
    pub timestamp: u64,
    /// Digest of the signature event that recorded this entry; `None` for
    /// entries imported without one (treated as "someone else's use").
    pub event_digest: Option<[u8; 32]>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RecordOutcome {
    Recorded,
    AlreadyUsed,
}

#[derive(Debug, Default)]
struct KeyEntries {
    order: Vec<LedgerEntry>,
    index: HashMap<BigInt, usize>,
}

/// In-memory view of the ledger plus its backing file (if any).
///
/// The in-memory state is always a replay of a prefix of the file; entries
/// are never mutated or removed.
#[derive(Debug)]
pub struct FactorLedger {
    path: Option<PathBuf>,
    clock: Clock,
    entries: HashMap<Vec<u8>, KeyEntries>,
    loaded_bytes: u64,
}

impl FactorLedger {
    /// Open (or create on first record) the ledger at `path`. A missing file
    /// is an empty ledger.
    pub fn open(path: impl Into<PathBuf>, clock: Clock) -> Result<FactorLedger, LedgerError> {
        let path = path.into();
        let mut ledger = FactorLedger {
            path: Some(path.clone()),
            clock,
            entries: HashMap::new(),
            loaded_bytes: 0,
        };
        match std::fs::read(&path) {
            Ok(bytes) => {
                ledger.absorb(&bytes, 0)?;
                ledger.loaded_bytes = bytes.len() as u64;
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
            Err(e) => return Err(e.into()),
        }
        Ok(ledger)
    }

    /// A ledger with no backing file; durability tests and library callers
    /// that manage persistence themselves.
    pub fn in_memory(clock: Clock) -> FactorLedger {
        FactorLedger {
            path: None,
            clock,
            entries: HashMap::new(),
            loaded_bytes: 0,
        }
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    /// Record a plain use of `(key_id, n_j)` — no event digest, so any
    /// later ledgered verification of that pair will treat it as foreign.
    pub fn record(&mut self, key_id: &[u8], n_j: &BigInt) -> Result<RecordOutcome, LedgerError> {
        self.append(key_id, n_j, None)
    }

    /// Record a use bound to a specific signature event digest.
    pub fn record_event(
        &mut self,
        key_id: &[u8],
        n_j: &BigInt,
        event_digest: [u8; 32],
    ) -> Result<RecordOutcome, LedgerError> {
        self.append(key_id, n_j, Some(event_digest))
    }

    pub fn is_used(&self, key_id: &[u8], n_j: &BigInt) -> bool {
        self.entry(key_id, n_j).is_some()
    }

    pub fn entry(&self, key_id: &[u8], n_j: &BigInt) -> Option<&LedgerEntry> {
        let k = self.entries.get(key_id)?;
        k.index.get(n_j).map(|&i| &k.order[i])
    }

    /// Entries for one key in insertion order.
    pub fn iterate(&self, key_id: &[u8]) -> impl Iterator<Item = &LedgerEntry> {
        self.entries
            .get(key_id)
            .map(|k| k.order.iter())
            .unwrap_or_default()
    }

    pub fn use_count(&self, key_id: &[u8]) -> usize {
        self.entries.get(key_id).map_or(0, |k| k.order.len())
    }

    /// All key ids with at least one entry, lexicographically sorted.
    pub fn key_ids(&self) -> Vec<&[u8]> {
        let mut ids: Vec<&[u8]> = self.entries.keys().map(Vec::as_slice).collect();
        ids.sort();
        ids
    }

    pub fn len(&self) -> usize {
        self.entries.values().map(|k| k.order.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Text dump for audit: `<hex key_id> <n_j> <ISO-8601 UTC>` per line,
    /// keys sorted, entries in insertion order.
    pub fn export(&self, out: &mut impl Write) -> std::io::Result<()> {
        for key_id in self.key_ids() {
            let hex: String = key_id.iter().map(|b| format!("{b:02x}")).collect();
            for e in self.iterate(key_id) {
                writeln!(out, "{hex} {} {}", e.n_j, iso8601_utc(e.timestamp))?;
            }
        }
        Ok(())
    }

    fn append(
        &mut self,
        key_id: &[u8],
        n_j: &BigInt,
        event_digest: Option<[u8; 32]>,
    ) -> Result<RecordOutcome, LedgerError> {
        if self.is_used(key_id, n_j) {
            return Ok(RecordOutcome::AlreadyUsed);
        }
        let entry = LedgerEntry {
            n_j: n_j.clone(),
            timestamp: self.clock.now(),
            event_digest,
        };
        if let Some(path) = self.path.clone() {
            let mut file = OpenOptions::new()
                .read(true)
                .create(true)
                .append(true)
                .open(&path)?;
            file.lock()?;
            let result = self.append_locked(&mut file, key_id, &entry);
            let _ = file.unlock();
            if !matches!(result, Ok(RecordOutcome::Recorded)) {
                return result;
            }
        }
        self.insert(key_id, entry);
        Ok(RecordOutcome::Recorded)
    }

    /// Holding the exclusive lock: merge any records a concurrent writer
    /// appended since our last read, re-check for duplicates, then append
    /// durably.
    fn append_locked(
        &mut self,
        file: &mut File,
        key_id: &[u8],
        entry: &LedgerEntry,
    ) -> Result<RecordOutcome, LedgerError> {
        let len = file.metadata()?.len();
        if len > self.loaded_bytes {
            let mut delta = Vec::with_capacity((len - self.loaded_bytes) as usize);
            file.seek(SeekFrom::Start(self.loaded_bytes))?;
            file.read_to_end(&mut delta)?;
            self.absorb(&delta, self.loaded_bytes)?;
            self.loaded_bytes = len;
            if self.is_used(key_id, &entry.n_j) {
                return Ok(RecordOutcome::AlreadyUsed);
            }
        }
        let record = encode_record(key_id, entry);
        file.write_all(&record)?;
        file.flush()?;
        file.sync_all()?;
        self.loaded_bytes += record.len() as u64;
        Ok(RecordOutcome::Recorded)
    }

    fn insert(&mut self, key_id: &[u8], entry: LedgerEntry) {
        let k = self.entries.entry(key_id.to_vec()).or_default();
        k.index.insert(entry.n_j.clone(), k.order.len());
        k.order.push(entry);
    }

    /// Replay `bytes` (a whole file or a tail) into memory. `base` is the
    /// file offset of `bytes[0]`, used to report defect positions.
    fn absorb(&mut self, bytes: &[u8], base: u64) -> Result<(), LedgerError> {
        let mut pos = 0usize;
        while pos < bytes.len() {
            let record_start = base + pos as u64;
            let (key_id, entry, consumed) = decode_record(&bytes[pos..], record_start)?;
            if self.is_used(&key_id, &entry.n_j) {
                return Err(LedgerError::Corrupt {
                    offset: record_start,
                    detail: format!("duplicate entry for n_j={}", entry.n_j),
                });
            }
            self.insert(&key_id, entry);
            pos += consumed;
        }
        Ok(())
    }
}

fn encode_record(key_id: &[u8], entry: &LedgerEntry) -> Vec<u8> {
    let mut payload = Vec::new();
    wire::put_bytes(&mut payload, key_id);
    wire::put_int(&mut payload, &entry.n_j);
    payload.extend_from_slice(&entry.timestamp.to_be_bytes());
    if let Some(digest) = &entry.event_digest {
        payload.extend_from_slice(digest);
    }
    let mut out = Vec::with_capacity(4 + payload.len());
    out.extend_from_slice(&(payload.len() as u32).to_be_bytes());
    out.extend_from_slice(&payload);
    out
}

/// Decode one record from the front of `bytes`; `offset` is its position in
/// the file, reported verbatim on any defect.
fn decode_record(
    bytes: &[u8],
    offset: u64,
) -> Result<(Vec<u8>, LedgerEntry, usize), LedgerError> {
    let corrupt = |detail: &str| LedgerError::Corrupt {
        offset,
        detail: detail.to_string(),
    };
    if bytes.len() < 4 {
        return Err(corrupt("torn length prefix"));
    }
    let payload_len = u32::from_be_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]) as usize;
    if bytes.len() < 4 + payload_len {
        return Err(corrupt(&format!(
            "record claims {payload_len} payload bytes, only {} present",
            bytes.len() - 4
        )));
    }
    let payload = &bytes[4..4 + payload_len];
    let mut r = wire::Reader::new(payload);
    let parse = |e: WireError| LedgerError::Corrupt {
        offset,
        detail: e.to_string(),
    };
    let key_id = r.bytes_record().map_err(parse)?.to_vec();
    let n_j = r.int_record().map_err(parse)?;
    let timestamp = r.u64_be().map_err(parse)?;
    let event_digest = match r.remaining() {
        0 => None,
        32 => {
            let mut d = [0u8; 32];
            d.copy_from_slice(r.take(32).map_err(parse)?);
            Some(d)
        }
        other => {
            return Err(corrupt(&format!(
                "{other} stray payload bytes after timestamp"
            )))
        }
    };
    Ok((
        key_id,
        LedgerEntry {
            n_j,
            timestamp,
            event_digest,
        },
        4 + payload_len,
    ))
}

/// Unix seconds to `YYYY-MM-DDTHH:MM:SSZ` (proleptic Gregorian, UTC).
pub fn iso8601_utc(secs: u64) -> String {
    let days = (secs / 86_400) as i64;
    let rem = secs % 86_400;
    let (h, mi, s) = (rem / 3600, (rem % 3600) / 60, rem % 60);
    // civil-from-days, era decomposition
    let z = days + 719_468;
    let era = z.div_euclid(146_097);
    let doe = z.rem_euclid(146_097);
    let yoe = (doe - doe / 1460 + doe / 36_524 - doe / 146_096) / 365;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let d = doy - (153 * mp + 2) / 5 + 1;
    let m = if mp < 10 { mp + 3 } else { mp - 9 };
    let y = yoe + era * 400 + i64::from(m <= 2);
    format!("{y:04}-{m:02}-{d:02}T{h:02}:{mi:02}:{s:02}Z")
}
