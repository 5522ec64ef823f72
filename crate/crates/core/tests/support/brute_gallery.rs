// Copyright (C) 2026 The breakit Authors. All rights reserved.
//
// SPDX-License-Identifier: Apache-2.0

//! Brute-force reference for gallery queries.
//!
//! Recomputes the full occupancy snapshot after every event by replaying the
//! prefix from scratch, then answers each query by scanning snapshots. It
//! shares no code with `breakit_core::gallery` beyond the event types.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use breakit_core::gallery::{Action, GalleryEvent, Person, PersonKind};

/// `None` = in the gallery lobby, `Some(r)` = in room `r`.
pub type Snapshot = BTreeMap<Person, Option<u32>>;

pub fn snapshots(events: &[GalleryEvent]) -> Vec<(u32, Snapshot)> {
    (0..events.len())
        .map(|i| {
            let mut snap = Snapshot::new();
            for e in &events[..=i] {
                match (e.action, e.room) {
                    (Action::Arrival, r) => {
                        snap.insert(e.person.clone(), r);
                    }
                    (Action::Departure, Some(_)) => {
                        snap.insert(e.person.clone(), None);
                    }
                    (Action::Departure, None) => {
                        snap.remove(&e.person);
                    }
                }
            }
            (events[i].timestamp, snap)
        })
        .collect()
}

pub fn state(events: &[GalleryEvent]) -> String {
    let snaps = snapshots(events);
    let last = snaps.last().map(|(_, s)| s.clone()).unwrap_or_default();
    let mut employees = Vec::new();
    let mut guests = Vec::new();
    let mut rooms: BTreeMap<u32, Vec<String>> = BTreeMap::new();
    for (p, loc) in &last {
        if p.kind == PersonKind::Employee {
            employees.push(p.name.clone());
        } else {
            guests.push(p.name.clone());
        }
        if let Some(r) = loc {
            rooms.entry(*r).or_default().push(p.name.clone());
        }
    }
    employees.sort();
    guests.sort();
    let mut out = format!("{}\n{}\n", employees.join(","), guests.join(","));
    for (r, mut names) in rooms {
        names.sort();
        out += &format!("{}: {}\n", r, names.join(","));
    }
    out
}

fn rooms_line(rooms: &[u32]) -> String {
    if rooms.is_empty() {
        String::new()
    } else {
        let parts: Vec<String> = rooms.iter().map(|r| r.to_string()).collect();
        format!("{}\n", parts.join(","))
    }
}

pub fn history(events: &[GalleryEvent], person: &Person) -> String {
    let snaps = snapshots(events);
    let mut rooms = Vec::new();
    let mut prev: Option<Option<u32>> = None;
    for (_, snap) in &snaps {
        let now = snap.get(person).copied();
        if let Some(Some(r)) = now {
            if prev != Some(Some(r)) {
                rooms.push(r);
            }
        }
        prev = now;
    }
    rooms_line(&rooms)
}

pub fn total_time(events: &[GalleryEvent], person: &Person) -> u64 {
    let snaps = snapshots(events);
    let mut total = 0;
    for w in snaps.windows(2) {
        if w[0].1.contains_key(person) {
            total += u64::from(w[1].0 - w[0].0);
        }
    }
    total
}

pub fn intersection(events: &[GalleryEvent], persons: &[Person]) -> String {
    let want: BTreeSet<&Person> = persons.iter().collect();
    let mut rooms = BTreeSet::new();
    if want.is_empty() {
        return String::new();
    }
    for (_, snap) in snapshots(events) {
        let locs: BTreeSet<Option<Option<u32>>> = want.iter().map(|p| snap.get(*p).copied()).collect();
        if locs.len() == 1 {
            if let Some(Some(Some(r))) = locs.into_iter().next() {
                rooms.insert(r);
            }
        }
    }
    rooms_line(&rooms.into_iter().collect::<Vec<_>>())
}
