// Copyright (C) 2026 The breakit Authors. All rights reserved.
//
// SPDX-License-Identifier: Apache-2.0

//! Break reports a breaker would write against the seeded log fixtures.

use breakit_core::envelope::{self, LogKey};
use breakit_core::gallery::{decode_events, GalleryEvent, Person};
use breakit_core::scoring::{BugCategory, TeamId};
use breakit_engine::fixtures::log::parse_plain_line;
use breakit_engine::judge::{BreakReport, Evidence, PublicChallenge, ScriptCommand, REPORT_VERSION};
use breakit_engine::logtool::{self, append_argv};

pub fn report(id: &str, category: BugCategory, evidence: Evidence) -> BreakReport {
    BreakReport {
        version: REPORT_VERSION,
        id: id.into(),
        breaker: TeamId::new("breaker"),
        target: TeamId::new("builder"),
        category,
        evidence,
    }
}

fn s(v: &[&str]) -> Vec<String> {
    v.iter().map(|x| x.to_string()).collect()
}

pub fn state_query() -> Vec<String> {
    s(&["-S"])
}

fn privacy(challenge: &PublicChallenge, events: &[GalleryEvent]) -> Evidence {
    let query = state_query();
    Evidence::LogPrivacy {
        challenge: challenge.id.clone(),
        claimed_output: logtool::oracle_answer(events, &query).expect("valid query"),
        query,
    }
}

/// Reads the events straight out of a cleartext log.
pub fn plaintext_leak(challenge: &PublicChallenge) -> Option<Evidence> {
    let text = std::str::from_utf8(&challenge.bytes).ok()?;
    let events: Vec<GalleryEvent> = text.lines().skip(2).map(parse_plain_line).collect::<Option<_>>()?;
    Some(privacy(challenge, &events))
}

/// Tries every single-character key a case-folded token can reduce to.
pub fn short_key_leak(challenge: &PublicChallenge) -> Option<Evidence> {
    let salt = envelope::header_salt(&challenge.bytes).ok()?;
    (b'a'..=b'z').chain(b'0'..=b'9').find_map(|c| {
        let key = LogKey::derive(&[c], salt);
        let plain = envelope::open_with_key(&key, &challenge.bytes).ok()?;
        Some(privacy(challenge, &decode_events(&plain).ok()?))
    })
}

/// Drops the last record of a log whose records are authenticated one by one.
pub fn drop_last_record(challenge: &PublicChallenge) -> Option<Evidence> {
    let text = std::str::from_utf8(&challenge.bytes).ok()?;
    let lines: Vec<&str> = text.lines().collect();
    if lines.len() < 3 {
        return None;
    }
    let corrupted = lines[..lines.len() - 1].join("\n") + "\n";
    Some(Evidence::LogIntegrity {
        challenge: challenge.id.clone(),
        query: state_query(),
        corrupted: corrupted.into_bytes(),
    })
}

pub fn expect(program: &str, args: Vec<String>, output: &str, exit: i32) -> ScriptCommand {
    ScriptCommand {
        program: program.into(),
        args,
        expected_output: Some(output.into()),
        expected_exit: Some(exit),
    }
}

pub fn bare(program: &str, args: Vec<String>) -> ScriptCommand {
    ScriptCommand { program: program.into(), args, expected_output: None, expected_exit: None }
}

fn arrive(ts: u32, name: &str, room: Option<u32>) -> GalleryEvent {
    GalleryEvent {
        timestamp: ts,
        person: Person::employee(name),
        action: breakit_core::gallery::Action::Arrival,
        room,
    }
}

/// A name long enough to trip the crashing fixture.
pub fn long_name_crash() -> Evidence {
    let ev = arrive(1, &"A".repeat(40), None);
    Evidence::Script { commands: vec![bare("logappend", append_argv("k", &ev, "log"))] }
}

/// Entering room 0, with the reference's answers as expectations.
pub fn room_zero_script() -> Evidence {
    let events = [arrive(1, "Alice", None), arrive(2, "Alice", Some(0))];
    let mut commands: Vec<ScriptCommand> =
        events.iter().map(|ev| expect("logappend", append_argv("k", ev, "log"), "", 0)).collect();
    let state = logtool::oracle_answer(&events, &state_query()).unwrap();
    commands.push(expect("logread", s(&["-K", "k", "-S", "log"]), &state, 0));
    Evidence::Script { commands }
}

pub fn atm_script(lines: &[(&[&str], &str, i32)]) -> Evidence {
    Evidence::Script {
        commands: lines.iter().map(|(args, out, exit)| expect("atm", s(args), out, *exit)).collect(),
    }
}
