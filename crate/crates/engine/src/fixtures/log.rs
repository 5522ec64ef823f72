// Copyright (C) 2026 The breakit Authors. All rights reserved.
//
// SPDX-License-Identifier: Apache-2.0

//! Deliberately flawed log tools used to exercise the judge.
//!
//! Each flavor behaves exactly like the reference on the functional
//! contract except for one planted weakness.

use std::io::Write;
use std::path::Path;

use breakit_core::envelope::{self, LogKey, NONCE_LEN, SALT_LEN};
use breakit_core::gallery::{
    decode_events, encode_events, Action, GalleryEvent, Person, PersonKind, StateListing,
};
use breakit_core::gallery::{GalleryLog, GalleryState};
use rand::Rng;

use crate::logtool::{self, EnvelopeStore, Failure, LogStore, Query};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogFlavor {
    /// Identical to the reference.
    Sound,
    /// Stores events as readable text.
    Plaintext,
    /// Authenticates each record separately, so records can be reordered.
    PerRecordMac,
    /// Derives the key from only the first token character, case folded.
    TruncatedToken,
    /// Faults on names longer than 32 characters.
    Crash,
    /// Treats room 0 as the gallery itself.
    Quirky,
}

impl LogFlavor {
    pub const ALL: [LogFlavor; 6] = [
        LogFlavor::Sound,
        LogFlavor::Plaintext,
        LogFlavor::PerRecordMac,
        LogFlavor::TruncatedToken,
        LogFlavor::Crash,
        LogFlavor::Quirky,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LogFlavor::Sound => "sound",
            LogFlavor::Plaintext => "plaintext",
            LogFlavor::PerRecordMac => "per-record-mac",
            LogFlavor::TruncatedToken => "truncated-token",
            LogFlavor::Crash => "crash",
            LogFlavor::Quirky => "quirky",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.name() == s)
    }
}

fn store(flavor: LogFlavor) -> Box<dyn LogStore> {
    match flavor {
        LogFlavor::Plaintext => Box::new(PlainStore),
        LogFlavor::PerRecordMac => Box::new(RecordStore),
        LogFlavor::TruncatedToken => Box::new(TruncatedStore),
        LogFlavor::Sound | LogFlavor::Crash | LogFlavor::Quirky => Box::new(EnvelopeStore),
    }
}

fn preprocess(flavor: LogFlavor, args: &[String]) -> Vec<String> {
    if flavor == LogFlavor::Crash {
        let mut it = args.iter();
        while let Some(a) = it.next() {
            if (a == "-E" || a == "-G") && it.next().is_some_and(|n| n.len() > 32) {
                // SAFETY: restoring the default action and raising a signal
                // on ourselves.
                unsafe {
                    libc::signal(libc::SIGSEGV, libc::SIG_DFL);
                    libc::raise(libc::SIGSEGV);
                }
            }
        }
    }
    if flavor == LogFlavor::Quirky {
        let mut out = Vec::with_capacity(args.len());
        let mut i = 0;
        while i < args.len() {
            if args[i] == "-R" && args.get(i + 1).map(String::as_str) == Some("0") {
                i += 2;
                continue;
            }
            out.push(args[i].clone());
            i += 1;
        }
        return out;
    }
    args.to_vec()
}

pub fn append_main(flavor: LogFlavor, args: &[String], out: &mut dyn Write) -> i32 {
    logtool::append_with(&*store(flavor), &preprocess(flavor, args), out)
}

pub fn read_main(flavor: LogFlavor, args: &[String], out: &mut dyn Write) -> i32 {
    logtool::read_with(&*store(flavor), &preprocess(flavor, args), out)
}

/// Text lines: a header, the token, then `ts kind action room name`.
pub struct PlainStore;

pub const PLAIN_HEADER: &str = "GALLERYLOG";

pub fn plain_line(ev: &GalleryEvent) -> String {
    let kind = if ev.person.kind == PersonKind::Employee { 'E' } else { 'G' };
    let action = if ev.action == Action::Arrival { 'A' } else { 'L' };
    let room = ev.room.map(|r| r.to_string()).unwrap_or_else(|| "-".into());
    format!("{} {kind} {action} {room} {}", ev.timestamp, ev.person.name)
}

pub fn parse_plain_line(line: &str) -> Option<GalleryEvent> {
    let f: Vec<&str> = line.split(' ').collect();
    let [ts, kind, action, room, name] = f[..] else {
        return None;
    };
    Some(GalleryEvent {
        timestamp: ts.parse().ok()?,
        person: match kind {
            "E" => Person::employee(name),
            "G" => Person::guest(name),
            _ => return None,
        },
        action: match action {
            "A" => Action::Arrival,
            "L" => Action::Departure,
            _ => return None,
        },
        room: if room == "-" { None } else { Some(room.parse().ok()?) },
    })
}

impl LogStore for PlainStore {
    fn load(&self, path: &Path, token: &str) -> Result<Option<Vec<GalleryEvent>>, Failure> {
        let Ok(text) = std::fs::read_to_string(path) else {
            return if path.exists() { Err(Failure::Integrity) } else { Ok(None) };
        };
        let mut lines = text.lines();
        if lines.next() != Some(PLAIN_HEADER) || lines.next() != Some(token) {
            return Err(Failure::Integrity);
        }
        lines
            .map(|l| parse_plain_line(l).ok_or(Failure::Integrity))
            .collect::<Result<Vec<_>, _>>()
            .map(Some)
    }

    fn save(&self, path: &Path, token: &str, events: &[GalleryEvent]) -> Result<(), Failure> {
        let mut text = format!("{PLAIN_HEADER}\n{token}\n");
        for ev in events {
            text += &plain_line(ev);
            text.push('\n');
        }
        logtool::replace_file(path, text.as_bytes()).map_err(|_| Failure::Invalid)
    }
}

/// A salt line followed by one hex envelope per event.
pub struct RecordStore;

impl LogStore for RecordStore {
    fn load(&self, path: &Path, token: &str) -> Result<Option<Vec<GalleryEvent>>, Failure> {
        let Ok(text) = std::fs::read_to_string(path) else {
            return if path.exists() { Err(Failure::Integrity) } else { Ok(None) };
        };
        let mut lines = text.lines();
        let salt: [u8; SALT_LEN] = lines
            .next()
            .and_then(|l| hex::decode(l).ok())
            .and_then(|b| b.try_into().ok())
            .ok_or(Failure::Integrity)?;
        let key = LogKey::derive(token.as_bytes(), salt);
        let mut events = Vec::new();
        for line in lines {
            let bytes = hex::decode(line).map_err(|_| Failure::Integrity)?;
            let plain = envelope::open_with_key(&key, &bytes).map_err(|_| Failure::Integrity)?;
            events.extend(decode_events(&plain).map_err(|_| Failure::Integrity)?);
        }
        Ok(Some(events))
    }

    fn save(&self, path: &Path, token: &str, events: &[GalleryEvent]) -> Result<(), Failure> {
        let salt = match std::fs::read_to_string(path) {
            Ok(t) => t
                .lines()
                .next()
                .and_then(|l| hex::decode(l).ok())
                .and_then(|b| b.try_into().ok())
                .ok_or(Failure::Integrity)?,
            Err(_) => rand::rng().random::<[u8; SALT_LEN]>(),
        };
        let key = LogKey::derive(token.as_bytes(), salt);
        let mut text = hex::encode(salt) + "\n";
        for ev in events {
            let nonce: [u8; NONCE_LEN] = rand::rng().random();
            text += &hex::encode(envelope::seal(&key, nonce, &encode_events(std::slice::from_ref(ev))));
            text.push('\n');
        }
        logtool::replace_file(path, text.as_bytes()).map_err(|_| Failure::Invalid)
    }

    /// Replays records without re-checking their order.
    fn answer(&self, events: Vec<GalleryEvent>, query: &Query) -> Result<String, Failure> {
        if let Ok(log) = GalleryLog::from_events(events.clone()) {
            return Ok(logtool::answer(&log, query));
        }
        Ok(match query {
            Query::State => StateListing::from_state(&lenient_state(&events)).to_string(),
            Query::History(p) => {
                let rooms: Vec<u32> = events
                    .iter()
                    .filter(|e| &e.person == p && e.action == Action::Arrival)
                    .filter_map(|e| e.room)
                    .collect();
                breakit_core::gallery::render_rooms(&rooms)
            }
            Query::TotalTime(_) => "0\n".into(),
            Query::Intersection(_) => String::new(),
        })
    }
}

fn lenient_state(events: &[GalleryEvent]) -> GalleryState {
    let mut state = GalleryState::new();
    for ev in events {
        // Re-time each record so order is taken as given; moves that are
        // inadmissible at their position are skipped.
        let mut ev = ev.clone();
        ev.timestamp = state.last_timestamp().map_or(1, |t| t + 1);
        let _ = state.apply(&ev);
    }
    state
}

/// The reference envelope keyed by a case-folded single character.
pub struct TruncatedStore;

impl TruncatedStore {
    pub fn fold(token: &str) -> Vec<u8> {
        token.bytes().take(1).map(|b| b.to_ascii_lowercase()).collect()
    }
}

impl LogStore for TruncatedStore {
    fn load(&self, path: &Path, token: &str) -> Result<Option<Vec<GalleryEvent>>, Failure> {
        EnvelopeStore::load_with(self, path, token)
    }

    fn save(&self, path: &Path, token: &str, events: &[GalleryEvent]) -> Result<(), Failure> {
        EnvelopeStore::save_with(self, path, token, events)
    }

    fn key_for(&self, token: &str, salt: [u8; SALT_LEN]) -> LogKey {
        LogKey::derive(&Self::fold(token), salt)
    }
}
