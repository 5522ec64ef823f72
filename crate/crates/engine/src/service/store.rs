// Copyright (C) 2026 The breakit Authors. All rights reserved.
//
// SPDX-License-Identifier: Apache-2.0

//! Append-only event log with periodic state snapshots.
//!
//! `events.jsonl` holds one record per line:
//!
//! ```json
//! {"seq":1,"at_ms":1760000000000,"prev":"00…00","hash":"…","event":{"type":"contest_created",…}}
//! ```
//!
//! `hash` is the hex SHA-256 of `"{seq}\n{prev}\n{at_ms}\n{event}"`, where
//! `event` is the record's event JSON exactly as written, and `prev` is the
//! previous record's hash (64 zeros for the first). `snapshot.json` holds the
//! folded state after some record, with that record's hash.

use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;
use sha2::{Digest, Sha256};

use super::events::Event;
use super::state::ContestState;

pub const EVENTS_FILE: &str = "events.jsonl";
pub const SNAPSHOT_FILE: &str = "snapshot.json";
const GENESIS: &str = "0000000000000000000000000000000000000000000000000000000000000000";

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: {reason}")]
    Corrupt { line: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub seq: u64,
    pub at_ms: u64,
    pub prev: String,
    pub hash: String,
    pub event: Event,
}

#[derive(Serialize, Deserialize)]
struct Line<'a> {
    seq: u64,
    at_ms: u64,
    prev: String,
    hash: String,
    #[serde(borrow)]
    event: &'a RawValue,
}

#[derive(Serialize, Deserialize)]
struct Snapshot {
    seq: u64,
    hash: String,
    state: ContestState,
}

fn digest(seq: u64, prev: &str, at_ms: u64, event: &str) -> String {
    hex::encode(Sha256::digest(format!("{seq}\n{prev}\n{at_ms}\n{event}").as_bytes()))
}

/// Reads and verifies a whole event log.
pub fn read_log(path: &Path) -> Result<Vec<Record>, StoreError> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(e.into()),
    };
    let mut out: Vec<Record> = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        let corrupt = |reason: String| StoreError::Corrupt { line: i + 1, reason };
        let l: Line = serde_json::from_str(&line).map_err(|e| corrupt(e.to_string()))?;
        let prev = out.last().map_or(GENESIS, |r| r.hash.as_str());
        if l.seq != i as u64 + 1 {
            return Err(corrupt(format!("sequence number {} out of order", l.seq)));
        }
        if l.prev != prev {
            return Err(corrupt("chain broken".into()));
        }
        if digest(l.seq, &l.prev, l.at_ms, l.event.get()) != l.hash {
            return Err(corrupt("hash mismatch".into()));
        }
        let event: Event = serde_json::from_str(l.event.get()).map_err(|e| corrupt(e.to_string()))?;
        out.push(Record { seq: l.seq, at_ms: l.at_ms, prev: l.prev, hash: l.hash, event });
    }
    Ok(out)
}

pub struct EventStore {
    dir: PathBuf,
    file: File,
    records: Vec<Record>,
    snapshot_every: u64,
}

impl EventStore {
    /// Opens (or creates) the log in `dir`, verifying what is there.
    pub fn open(dir: &Path, snapshot_every: u64) -> Result<Self, StoreError> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(EVENTS_FILE);
        let records = read_log(&path)?;
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok(Self { dir: dir.to_path_buf(), file, records, snapshot_every })
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn events(&self) -> impl Iterator<Item = &Event> {
        self.records.iter().map(|r| &r.event)
    }

    pub fn path(&self) -> PathBuf {
        self.dir.join(EVENTS_FILE)
    }

    /// The folded state, starting from the snapshot when it matches the log.
    pub fn state(&self) -> Result<Option<ContestState>, StoreError> {
        if self.records.is_empty() {
            return Ok(None);
        }
        let corrupt = |reason: String| StoreError::Corrupt { line: 0, reason };
        let snap: Option<Snapshot> = std::fs::read(self.dir.join(SNAPSHOT_FILE))
            .ok()
            .and_then(|b| serde_json::from_slice(&b).ok())
            .filter(|s: &Snapshot| {
                self.records.get(s.seq as usize - 1).is_some_and(|r| r.hash == s.hash)
            });
        let (mut state, from) = match snap {
            Some(s) => (s.state, s.seq as usize),
            None => (ContestState::create(&self.records[0].event).map_err(|e| corrupt(e.to_string()))?, 1),
        };
        for r in &self.records[from..] {
            state.apply(&r.event).map_err(|e| corrupt(format!("event {}: {e}", r.seq)))?;
        }
        Ok(Some(state))
    }

    /// Appends `event`; `state` must already include it.
    pub fn append(&mut self, event: &Event, state: &ContestState) -> Result<Record, StoreError> {
        let seq = self.records.len() as u64 + 1;
        let prev = self.records.last().map_or(GENESIS.to_owned(), |r| r.hash.clone());
        let at_ms = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_millis() as u64);
        let body = serde_json::to_string(event).map_err(io::Error::other)?;
        let hash = digest(seq, &prev, at_ms, &body);
        let raw = RawValue::from_string(body).map_err(io::Error::other)?;
        let line = serde_json::to_string(&Line { seq, at_ms, prev: prev.clone(), hash: hash.clone(), event: &raw })
            .map_err(io::Error::other)?;
        self.file.write_all(format!("{line}\n").as_bytes())?;
        self.file.sync_data()?;
        let record = Record { seq, at_ms, prev, hash, event: event.clone() };
        self.records.push(record.clone());
        if self.snapshot_every > 0 && seq % self.snapshot_every == 0 {
            self.write_snapshot(state)?;
        }
        Ok(record)
    }

    fn write_snapshot(&self, state: &ContestState) -> io::Result<()> {
        let last = self.records.last().expect("just appended");
        let snap = Snapshot { seq: last.seq, hash: last.hash.clone(), state: state.clone() };
        let tmp = self.dir.join(format!("{SNAPSHOT_FILE}.tmp"));
        std::fs::write(&tmp, serde_json::to_vec(&snap)?)?;
        std::fs::rename(tmp, self.dir.join(SNAPSHOT_FILE))
    }
}
