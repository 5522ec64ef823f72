// Copyright (C) 2026 The breakit Authors. All rights reserved.
//
// SPDX-License-Identifier: Apache-2.0

//! The art-gallery event model behind the secure-log problem.
//!
//! A log is a sequence of arrivals and departures of employees and guests,
//! either into the gallery as a whole or into one of its rooms. Events must
//! respect the physical rules:
//!
//! - timestamps strictly increase;
//! - a person enters the gallery before any room, is in at most one room at
//!   a time, and leaves every room before leaving the gallery.
//!
//! An employee and a guest with the same name are different people.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

/// Largest timestamp accepted (timestamps live in `[1, 2^30)`).
pub const MAX_TIMESTAMP: u32 = (1 << 30) - 1;
/// Largest room id accepted.
pub const MAX_ROOM: u32 = (1 << 30) - 1;
/// Longest accepted person name.
pub const MAX_NAME_LEN: usize = 255;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PersonKind {
    Employee,
    Guest,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Person {
    pub kind: PersonKind,
    pub name: String,
}

impl Person {
    pub fn employee(name: impl Into<String>) -> Self {
        Self {
            kind: PersonKind::Employee,
            name: name.into(),
        }
    }

    pub fn guest(name: impl Into<String>) -> Self {
        Self {
            kind: PersonKind::Guest,
            name: name.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Arrival,
    Departure,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GalleryEvent {
    pub timestamp: u32,
    pub person: Person,
    pub action: Action,
    /// `None` means the gallery itself.
    pub room: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum GalleryError {
    #[error("timestamp out of range")]
    TimestampOutOfRange,
    #[error("timestamp does not increase")]
    NonIncreasingTimestamp,
    #[error("room id out of range")]
    RoomOutOfRange,
    #[error("name must be 1-255 ASCII letters")]
    BadName,
    #[error("person is already in the gallery")]
    AlreadyInGallery,
    #[error("person is not in the gallery")]
    NotInGallery,
    #[error("person is already in a room")]
    AlreadyInRoom,
    #[error("person is not in that room")]
    NotInRoom,
    #[error("person must leave their room first")]
    StillInRoom,
}

pub fn validate_name(name: &str) -> Result<(), GalleryError> {
    if (1..=MAX_NAME_LEN).contains(&name.len()) && name.bytes().all(|b| b.is_ascii_alphabetic()) {
        Ok(())
    } else {
        Err(GalleryError::BadName)
    }
}

/// Where someone inside the gallery currently is.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    Lobby,
    Room(u32),
}

/// The current occupancy, as produced by replaying valid events.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GalleryState {
    last_timestamp: Option<u32>,
    inside: BTreeMap<Person, Location>,
}

impl GalleryState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn last_timestamp(&self) -> Option<u32> {
        self.last_timestamp
    }

    pub fn location(&self, person: &Person) -> Option<Location> {
        self.inside.get(person).copied()
    }

    pub fn occupants(&self) -> impl Iterator<Item = (&Person, Location)> {
        self.inside.iter().map(|(p, l)| (p, *l))
    }

    /// Checks whether `ev` may follow the events seen so far.
    pub fn check(&self, ev: &GalleryEvent) -> Result<(), GalleryError> {
        if ev.timestamp == 0 || ev.timestamp > MAX_TIMESTAMP {
            return Err(GalleryError::TimestampOutOfRange);
        }
        if self.last_timestamp.is_some_and(|t| ev.timestamp <= t) {
            return Err(GalleryError::NonIncreasingTimestamp);
        }
        if ev.room.is_some_and(|r| r > MAX_ROOM) {
            return Err(GalleryError::RoomOutOfRange);
        }
        validate_name(&ev.person.name)?;
        let here = self.inside.get(&ev.person).copied();
        match (ev.action, ev.room, here) {
            (Action::Arrival, None, None) => Ok(()),
            (Action::Arrival, None, Some(_)) => Err(GalleryError::AlreadyInGallery),
            (Action::Arrival, Some(_), None) => Err(GalleryError::NotInGallery),
            (Action::Arrival, Some(_), Some(Location::Lobby)) => Ok(()),
            (Action::Arrival, Some(_), Some(Location::Room(_))) => Err(GalleryError::AlreadyInRoom),
            (Action::Departure, None, None) => Err(GalleryError::NotInGallery),
            (Action::Departure, None, Some(Location::Lobby)) => Ok(()),
            (Action::Departure, None, Some(Location::Room(_))) => Err(GalleryError::StillInRoom),
            (Action::Departure, Some(r), Some(Location::Room(cur))) if r == cur => Ok(()),
            (Action::Departure, Some(_), _) => Err(GalleryError::NotInRoom),
        }
    }

    /// Applies `ev` if it is admissible; on error the state is unchanged.
    pub fn apply(&mut self, ev: &GalleryEvent) -> Result<(), GalleryError> {
        self.check(ev)?;
        self.last_timestamp = Some(ev.timestamp);
        match (ev.action, ev.room) {
            (Action::Arrival, None) => {
                self.inside.insert(ev.person.clone(), Location::Lobby);
            }
            (Action::Arrival, Some(r)) => {
                self.inside.insert(ev.person.clone(), Location::Room(r));
            }
            (Action::Departure, Some(_)) => {
                self.inside.insert(ev.person.clone(), Location::Lobby);
            }
            (Action::Departure, None) => {
                self.inside.remove(&ev.person);
            }
        }
        Ok(())
    }
}

/// A validated event sequence plus the state it leads to.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GalleryLog {
    events: Vec<GalleryEvent>,
    state: GalleryState,
}

impl GalleryLog {
    pub fn new() -> Self {
        Self::default()
    }

    /// Replays `events`, rejecting the sequence at the first invalid one.
    pub fn from_events(events: Vec<GalleryEvent>) -> Result<Self, (usize, GalleryError)> {
        let mut state = GalleryState::new();
        for (i, ev) in events.iter().enumerate() {
            state.apply(ev).map_err(|e| (i, e))?;
        }
        Ok(Self { events, state })
    }

    pub fn append(&mut self, ev: GalleryEvent) -> Result<(), GalleryError> {
        self.state.apply(&ev)?;
        self.events.push(ev);
        Ok(())
    }

    pub fn events(&self) -> &[GalleryEvent] {
        &self.events
    }

    pub fn state(&self) -> &GalleryState {
        &self.state
    }

    pub fn listing(&self) -> StateListing {
        StateListing::from_state(&self.state)
    }

    /// Rooms `person` entered, in entry order (repeats included).
    pub fn history(&self, person: &Person) -> Vec<u32> {
        self.events
            .iter()
            .filter(|e| &e.person == person && e.action == Action::Arrival)
            .filter_map(|e| e.room)
            .collect()
    }

    /// Time spent inside the gallery. A stay that has not ended counts up to
    /// the last event in the log.
    pub fn total_time(&self, person: &Person) -> u64 {
        let end = u64::from(self.state.last_timestamp.unwrap_or(0));
        let mut total = 0u64;
        let mut arrived: Option<u32> = None;
        for e in self.events.iter().filter(|e| &e.person == person && e.room.is_none()) {
            match e.action {
                Action::Arrival => arrived = Some(e.timestamp),
                Action::Departure => {
                    if let Some(a) = arrived.take() {
                        total += u64::from(e.timestamp - a);
                    }
                }
            }
        }
        if let Some(a) = arrived {
            total += end - u64::from(a);
        }
        total
    }

    /// Rooms where every listed person was present at one same instant,
    /// ascending.
    pub fn intersection(&self, persons: &[Person]) -> Vec<u32> {
        let wanted: BTreeSet<&Person> = persons.iter().collect();
        if wanted.is_empty() {
            return Vec::new();
        }
        // Half-open presence intervals per (room, person); an open interval
        // has no end.
        let mut stays: BTreeMap<u32, BTreeMap<&Person, Vec<(u32, Option<u32>)>>> = BTreeMap::new();
        let mut open: BTreeMap<&Person, (u32, u32)> = BTreeMap::new();
        for e in &self.events {
            if !wanted.contains(&e.person) {
                continue;
            }
            let Some(room) = e.room else { continue };
            match e.action {
                Action::Arrival => {
                    open.insert(&e.person, (room, e.timestamp));
                }
                Action::Departure => {
                    if let Some((r, start)) = open.remove(&e.person) {
                        stays.entry(r).or_default().entry(&e.person).or_default().push((start, Some(e.timestamp)));
                    }
                }
            }
        }
        for (person, (room, start)) in open {
            stays.entry(room).or_default().entry(person).or_default().push((start, None));
        }

        let present = |ivs: &[(u32, Option<u32>)], t: u32| {
            ivs.iter().any(|&(s, end)| s <= t && end.is_none_or(|e| t < e))
        };
        stays
            .into_iter()
            .filter(|(_, by_person)| by_person.len() == wanted.len())
            .filter(|(_, by_person)| {
                // A common instant, if any, is some interval's start.
                by_person.values().flatten().any(|&(t, _)| by_person.values().all(|ivs| present(ivs, t)))
            })
            .map(|(room, _)| room)
            .collect()
    }
}

/// Who is where right now, sorted for printing.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StateListing {
    pub employees: Vec<String>,
    pub guests: Vec<String>,
    pub rooms: BTreeMap<u32, Vec<String>>,
}

impl StateListing {
    pub fn from_state(state: &GalleryState) -> Self {
        let mut listing = StateListing::default();
        for (person, loc) in state.occupants() {
            match person.kind {
                PersonKind::Employee => listing.employees.push(person.name.clone()),
                PersonKind::Guest => listing.guests.push(person.name.clone()),
            }
            if let Location::Room(r) = loc {
                listing.rooms.entry(r).or_default().push(person.name.clone());
            }
        }
        listing.employees.sort();
        listing.guests.sort();
        for names in listing.rooms.values_mut() {
            names.sort();
        }
        listing
    }
}

impl fmt::Display for StateListing {
    /// Employees line, guests line, then one `room: names` line per occupied
    /// room in ascending order. Every line ends in `\n`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}", self.employees.join(","))?;
        writeln!(f, "{}", self.guests.join(","))?;
        for (room, names) in &self.rooms {
            writeln!(f, "{room}: {}", names.join(","))?;
        }
        Ok(())
    }
}

/// Comma-separated room list with a trailing newline; empty input prints
/// nothing.
pub fn render_rooms(rooms: &[u32]) -> String {
    let mut out = String::new();
    for (i, r) in rooms.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        let _ = write!(out, "{r}");
    }
    if !out.is_empty() {
        out.push('\n');
    }
    out
}

/// Generates plausible event sequences from a stream of random numbers.
///
/// Each step picks a person from the roster and one move that is legal for
/// where they are, so every generated event is admissible.
pub struct EventSynth<R> {
    roster: Vec<Person>,
    rooms: Vec<u32>,
    state: GalleryState,
    next_timestamp: u32,
    rand: R,
}

impl<R: FnMut() -> u32> EventSynth<R> {
    /// `roster` and `rooms` must be non-empty.
    pub fn new(roster: Vec<Person>, rooms: Vec<u32>, rand: R) -> Self {
        assert!(!roster.is_empty() && !rooms.is_empty());
        Self {
            roster,
            rooms,
            state: GalleryState::new(),
            next_timestamp: 1,
            rand,
        }
    }

    pub fn state(&self) -> &GalleryState {
        &self.state
    }

    /// The next timestamp that would be used.
    pub fn peek_timestamp(&self) -> u32 {
        self.next_timestamp
    }
}

impl<R: FnMut() -> u32> Iterator for EventSynth<R> {
    type Item = GalleryEvent;

    fn next(&mut self) -> Option<GalleryEvent> {
        let pick = (self.rand)() as usize % self.roster.len();
        let person = self.roster[pick].clone();
        let coin = (self.rand)();
        let (action, room) = match self.state.location(&person) {
            None => (Action::Arrival, None),
            Some(Location::Lobby) if coin % 3 == 0 => (Action::Departure, None),
            Some(Location::Lobby) => {
                let r = self.rooms[(self.rand)() as usize % self.rooms.len()];
                (Action::Arrival, Some(r))
            }
            Some(Location::Room(r)) => (Action::Departure, Some(r)),
        };
        let timestamp = self.next_timestamp;
        if timestamp > MAX_TIMESTAMP - 8 {
            return None;
        }
        self.next_timestamp += 1 + (self.rand)() % 4;
        let ev = GalleryEvent {
            timestamp,
            person,
            action,
            room,
        };
        self.state.apply(&ev).expect("synthesized event is admissible");
        Some(ev)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum CodecError {
    #[error("event encoding is truncated")]
    Truncated,
    #[error("event encoding has an invalid field")]
    BadField,
    #[error("event encoding has trailing bytes")]
    Trailing,
}

/// Serializes events for storage inside an envelope.
///
/// Layout: `u32` count, then per event `u32` timestamp, `u8` kind, `u8`
/// action, `u8` room flag, optional `u32` room, `u16` name length and the
/// name bytes. Integers are big-endian.
pub fn encode_events(events: &[GalleryEvent]) -> Vec<u8> {
    let mut out = Vec::with_capacity(4 + events.len() * 16);
    out.extend_from_slice(&(events.len() as u32).to_be_bytes());
    for e in events {
        out.extend_from_slice(&e.timestamp.to_be_bytes());
        out.push(match e.person.kind {
            PersonKind::Employee => 0,
            PersonKind::Guest => 1,
        });
        out.push(match e.action {
            Action::Arrival => 0,
            Action::Departure => 1,
        });
        match e.room {
            Some(r) => {
                out.push(1);
                out.extend_from_slice(&r.to_be_bytes());
            }
            None => out.push(0),
        }
        let name = e.person.name.as_bytes();
        out.extend_from_slice(&(name.len() as u16).to_be_bytes());
        out.extend_from_slice(name);
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CodecError> {
        if self.buf.len() < n {
            return Err(CodecError::Truncated);
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    fn u8(&mut self) -> Result<u8, CodecError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, CodecError> {
        let b = self.take(2)?;
        Ok(u16::from_be_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Result<u32, CodecError> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }
}

pub fn decode_events(bytes: &[u8]) -> Result<Vec<GalleryEvent>, CodecError> {
    let mut r = Reader { buf: bytes };
    let count = r.u32()? as usize;
    // Each event takes at least 10 bytes.
    if count > r.buf.len() / 10 {
        return Err(CodecError::Truncated);
    }
    let mut events = Vec::with_capacity(count);
    for _ in 0..count {
        let timestamp = r.u32()?;
        let kind = match r.u8()? {
            0 => PersonKind::Employee,
            1 => PersonKind::Guest,
            _ => return Err(CodecError::BadField),
        };
        let action = match r.u8()? {
            0 => Action::Arrival,
            1 => Action::Departure,
            _ => return Err(CodecError::BadField),
        };
        let room = match r.u8()? {
            0 => None,
            1 => Some(r.u32()?),
            _ => return Err(CodecError::BadField),
        };
        let len = r.u16()? as usize;
        let name = core::str::from_utf8(r.take(len)?).map_err(|_| CodecError::BadField)?;
        events.push(GalleryEvent {
            timestamp,
            person: Person {
                kind,
                name: name.into(),
            },
            action,
            room,
        });
    }
    if !r.buf.is_empty() {
        return Err(CodecError::Trailing);
    }
    Ok(events)
}
