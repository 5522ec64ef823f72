// Copyright (C) 2026 The breakit Authors. All rights reserved.
//
// SPDX-License-Identifier: Apache-2.0

//! The secure gallery log tools.
//!
//! Command grammar (every flag at most once, in any order):
//!
//! ```text
//! logappend -T <timestamp> -K <token> (-E <name> | -G <name>) (-A | -L) [-R <room>] <log>
//! logread -K <token> -S <log>
//! logread -K <token> -R (-E <name> | -G <name>) <log>
//! logread -K <token> -T (-E <name> | -G <name>) <log>
//! logread -K <token> -I (-E <name> | -G <name>)... <log>
//! ```
//!
//! `<timestamp>` is `[1-9][0-9]*` up to 2^30-1, `<room>` is `0|[1-9][0-9]*`
//! up to 2^30-1, `<token>` is `[A-Za-z0-9]+`, names are ASCII letters.
//! `-E` selects an employee and `-G` a guest; `-A` is an arrival and `-L` a
//! departure, each at the room given by `-R` or at the gallery itself.
//!
//! Outputs, all on standard output:
//!
//! * `-S`: employee names, then guest names, then one `<room>: <names>` line
//!   per occupied room in ascending room order; names comma separated and
//!   sorted, every line newline terminated.
//! * `-R`: rooms entered, in order, comma separated, newline terminated;
//!   nothing if the person never entered a room.
//! * `-T`: total time spent in the gallery, counting an open stay up to the
//!   log's last timestamp; `0` for unknown people.
//! * `-I`: rooms where all listed people were present at the same time,
//!   ascending, comma separated.
//!
//! Exit status is 0 on success, 255 with `invalid` for malformed commands or
//! inadmissible events, and 254 with `integrity violation` when the log does
//! not authenticate under the token. A failed append leaves the file as it
//! was. Concurrent writers to one file are not supported.

use std::io::{self, Write};
use std::path::{Path, PathBuf};

use breakit_core::envelope::{self, LogKey, NONCE_LEN, SALT_LEN};
use breakit_core::gallery::{
    decode_events, encode_events, render_rooms, validate_name, Action, GalleryEvent, GalleryLog,
    Person, MAX_ROOM, MAX_TIMESTAMP,
};
use rand::Rng;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 255;
pub const EXIT_INTEGRITY: i32 = 254;

pub const INVALID: &str = "invalid";
pub const INTEGRITY: &str = "integrity violation";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Failure {
    Invalid,
    Integrity,
}

impl Failure {
    pub fn exit_code(self) -> i32 {
        match self {
            Failure::Invalid => EXIT_INVALID,
            Failure::Integrity => EXIT_INTEGRITY,
        }
    }

    pub fn message(self) -> &'static str {
        match self {
            Failure::Invalid => INVALID,
            Failure::Integrity => INTEGRITY,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AppendArgs {
    pub token: String,
    pub event: GalleryEvent,
    pub log: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Query {
    State,
    History(Person),
    TotalTime(Person),
    Intersection(Vec<Person>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReadArgs {
    pub token: String,
    pub query: Query,
    pub log: PathBuf,
}

fn valid_token(t: &str) -> bool {
    !t.is_empty() && t.bytes().all(|b| b.is_ascii_alphanumeric())
}

fn parse_bounded(s: &str, allow_zero: bool, max: u32) -> Option<u32> {
    let canonical = s == "0" && allow_zero
        || (!s.is_empty() && !s.starts_with('0') && s.bytes().all(|b| b.is_ascii_digit()));
    if !canonical || s.len() > 10 {
        return None;
    }
    let v: u64 = s.parse().ok()?;
    (v <= u64::from(max) && (allow_zero || v > 0)).then_some(v as u32)
}

fn set_once<T>(slot: &mut Option<T>, v: T) -> Result<(), Failure> {
    if slot.replace(v).is_some() {
        Err(Failure::Invalid)
    } else {
        Ok(())
    }
}

fn person(flag: &str, name: &str) -> Result<Person, Failure> {
    validate_name(name).map_err(|_| Failure::Invalid)?;
    Ok(if flag == "-E" {
        Person::employee(name)
    } else {
        Person::guest(name)
    })
}

pub fn parse_append(args: &[String]) -> Result<AppendArgs, Failure> {
    let (mut ts, mut token, mut who, mut action, mut room, mut log) = (None, None, None, None, None, None);
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let mut value = || it.next().ok_or(Failure::Invalid);
        match a.as_str() {
            "-T" => {
                let v = value()?;
                set_once(&mut ts, parse_bounded(v, false, MAX_TIMESTAMP).ok_or(Failure::Invalid)?)?
            }
            "-K" => {
                let v = value()?;
                if !valid_token(v) {
                    return Err(Failure::Invalid);
                }
                set_once(&mut token, v.clone())?
            }
            "-E" | "-G" => {
                let v = value()?;
                set_once(&mut who, person(a, v)?)?
            }
            "-A" => set_once(&mut action, Action::Arrival)?,
            "-L" => set_once(&mut action, Action::Departure)?,
            "-R" => {
                let v = value()?;
                set_once(&mut room, parse_bounded(v, true, MAX_ROOM).ok_or(Failure::Invalid)?)?
            }
            s if s.starts_with('-') => return Err(Failure::Invalid),
            _ => set_once(&mut log, PathBuf::from(a))?,
        }
    }
    match (ts, token, who, action, log) {
        (Some(timestamp), Some(token), Some(person), Some(action), Some(log)) => Ok(AppendArgs {
            token,
            event: GalleryEvent {
                timestamp,
                person,
                action,
                room,
            },
            log,
        }),
        _ => Err(Failure::Invalid),
    }
}

pub fn parse_read(args: &[String]) -> Result<ReadArgs, Failure> {
    #[derive(PartialEq)]
    enum Mode {
        S,
        R,
        T,
        I,
    }
    let (mut token, mut mode, mut log) = (None, None, None);
    let mut people = Vec::new();
    let mut it = args.iter();
    while let Some(a) = it.next() {
        match a.as_str() {
            "-K" => {
                let v = it.next().ok_or(Failure::Invalid)?;
                if !valid_token(v) {
                    return Err(Failure::Invalid);
                }
                set_once(&mut token, v.clone())?
            }
            "-S" => set_once(&mut mode, Mode::S)?,
            "-R" => set_once(&mut mode, Mode::R)?,
            "-T" => set_once(&mut mode, Mode::T)?,
            "-I" => set_once(&mut mode, Mode::I)?,
            "-E" | "-G" => {
                let v = it.next().ok_or(Failure::Invalid)?;
                people.push(person(a, v)?);
            }
            s if s.starts_with('-') => return Err(Failure::Invalid),
            _ => set_once(&mut log, PathBuf::from(a))?,
        }
    }
    let (Some(token), Some(mode), Some(log)) = (token, mode, log) else {
        return Err(Failure::Invalid);
    };
    let query = match mode {
        Mode::S if people.is_empty() => Query::State,
        Mode::R | Mode::T if people.len() == 1 => {
            let p = people.pop().unwrap();
            if mode == Mode::R {
                Query::History(p)
            } else {
                Query::TotalTime(p)
            }
        }
        Mode::I if !people.is_empty() => Query::Intersection(people),
        _ => return Err(Failure::Invalid),
    };
    Ok(ReadArgs { token, query, log })
}

/// Renders the answer to `query` over a valid log.
pub fn answer(log: &GalleryLog, query: &Query) -> String {
    match query {
        Query::State => log.listing().to_string(),
        Query::History(p) => render_rooms(&log.history(p)),
        Query::TotalTime(p) => format!("{}\n", log.total_time(p)),
        Query::Intersection(ps) => render_rooms(&log.intersection(ps)),
    }
}

/// Where a log's events live on disk.
pub trait LogStore {
    /// Loads the events of an existing log; `Ok(None)` if absent.
    fn load(&self, path: &Path, token: &str) -> Result<Option<Vec<GalleryEvent>>, Failure>;

    /// Writes a whole log, replacing any previous content.
    fn save(&self, path: &Path, token: &str, events: &[GalleryEvent]) -> Result<(), Failure>;

    /// Answers a query over loaded events.
    fn answer(&self, events: Vec<GalleryEvent>, query: &Query) -> Result<String, Failure> {
        let log = GalleryLog::from_events(events).map_err(|_| Failure::Integrity)?;
        Ok(answer(&log, query))
    }

    /// Key material for a token, as stored in the file header.
    fn key_for(&self, token: &str, salt: [u8; SALT_LEN]) -> LogKey {
        LogKey::derive(token.as_bytes(), salt)
    }
}

/// Writes `bytes` to `path` through a rename so readers never see a torn
/// file.
pub fn replace_file(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)
}

/// The whole-file encrypt-then-MAC envelope.
#[derive(Debug, Default, Clone, Copy)]
pub struct EnvelopeStore;

impl EnvelopeStore {
    pub fn load_with<S: LogStore + ?Sized>(
        store: &S,
        path: &Path,
        token: &str,
    ) -> Result<Option<Vec<GalleryEvent>>, Failure> {
        let bytes = match std::fs::read(path) {
            Ok(b) => b,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(None),
            Err(_) => return Err(Failure::Integrity),
        };
        let salt = envelope::header_salt(&bytes).map_err(|_| Failure::Integrity)?;
        let key = store.key_for(token, salt);
        let plain = envelope::open_with_key(&key, &bytes).map_err(|_| Failure::Integrity)?;
        decode_events(&plain).map(Some).map_err(|_| Failure::Integrity)
    }

    pub fn save_with<S: LogStore + ?Sized>(
        store: &S,
        path: &Path,
        token: &str,
        events: &[GalleryEvent],
    ) -> Result<(), Failure> {
        let salt = match std::fs::read(path) {
            Ok(bytes) => envelope::header_salt(&bytes).map_err(|_| Failure::Integrity)?,
            Err(_) => rand::rng().random::<[u8; SALT_LEN]>(),
        };
        let key = store.key_for(token, salt);
        let nonce: [u8; NONCE_LEN] = rand::rng().random();
        let sealed = envelope::seal(&key, nonce, &encode_events(events));
        replace_file(path, &sealed).map_err(|_| Failure::Invalid)
    }
}

impl LogStore for EnvelopeStore {
    fn load(&self, path: &Path, token: &str) -> Result<Option<Vec<GalleryEvent>>, Failure> {
        Self::load_with(self, path, token)
    }

    fn save(&self, path: &Path, token: &str, events: &[GalleryEvent]) -> Result<(), Failure> {
        Self::save_with(self, path, token, events)
    }
}

fn report(out: &mut dyn Write, f: Failure) -> i32 {
    let _ = writeln!(out, "{}", f.message());
    f.exit_code()
}

pub fn append_with(store: &dyn LogStore, args: &[String], out: &mut dyn Write) -> i32 {
    let run = || -> Result<(), Failure> {
        let a = parse_append(args)?;
        let events = store.load(&a.log, &a.token)?.unwrap_or_default();
        let mut log = GalleryLog::from_events(events).map_err(|_| Failure::Integrity)?;
        log.append(a.event).map_err(|_| Failure::Invalid)?;
        store.save(&a.log, &a.token, log.events())
    };
    match run() {
        Ok(()) => EXIT_OK,
        Err(f) => report(out, f),
    }
}

pub fn read_with(store: &dyn LogStore, args: &[String], out: &mut dyn Write) -> i32 {
    let run = || -> Result<String, Failure> {
        let a = parse_read(args)?;
        let events = store.load(&a.log, &a.token)?.ok_or(Failure::Invalid)?;
        store.answer(events, &a.query)
    };
    match run() {
        Ok(text) => {
            let _ = out.write_all(text.as_bytes());
            EXIT_OK
        }
        Err(f) => report(out, f),
    }
}

/// Answers `query_args` (a `logread` argument list without token and file)
/// directly over `events`.
pub fn oracle_answer(events: &[GalleryEvent], query_args: &[String]) -> Result<String, Failure> {
    let mut args = vec!["-K".to_owned(), "x".to_owned()];
    args.extend_from_slice(query_args);
    args.push("log".to_owned());
    let parsed = parse_read(&args)?;
    let log = GalleryLog::from_events(events.to_vec()).map_err(|_| Failure::Integrity)?;
    Ok(answer(&log, &parsed.query))
}

/// The `logappend` argument list that records `ev`.
pub fn append_argv(token: &str, ev: &GalleryEvent, log: &str) -> Vec<String> {
    let mut v = vec![
        "-T".into(),
        ev.timestamp.to_string(),
        "-K".into(),
        token.into(),
        if ev.person.kind == breakit_core::gallery::PersonKind::Employee {
            "-E".into()
        } else {
            "-G".into()
        },
        ev.person.name.clone(),
        if ev.action == Action::Arrival { "-A" } else { "-L" }.into(),
    ];
    if let Some(r) = ev.room {
        v.push("-R".into());
        v.push(r.to_string());
    }
    v.push(log.into());
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn parses_append_grammar() {
        let a = parse_append(&s(&["-T", "5", "-K", "secret", "-G", "Ann", "-A", "-R", "0", "log"])).unwrap();
        assert_eq!(a.event.timestamp, 5);
        assert_eq!(a.event.room, Some(0));
        assert_eq!(a.event.person, Person::guest("Ann"));
        assert_eq!(a.log, PathBuf::from("log"));
        let round = parse_append(&append_argv("secret", &a.event, "log")).unwrap();
        assert_eq!(round, a);
    }

    #[test]
    fn rejects_bad_append_commands() {
        for bad in [
            &["-T", "0", "-K", "k", "-E", "A", "-A", "l"][..],
            &["-T", "01", "-K", "k", "-E", "A", "-A", "l"],
            &["-T", "1073741824", "-K", "k", "-E", "A", "-A", "l"],
            &["-T", "1", "-K", "k!", "-E", "A", "-A", "l"],
            &["-T", "1", "-K", "k", "-E", "A1", "-A", "l"],
            &["-T", "1", "-K", "k", "-E", "A", "-A", "-L", "l"],
            &["-T", "1", "-K", "k", "-E", "A", "-G", "B", "-A", "l"],
            &["-T", "1", "-K", "k", "-E", "A", "-A"],
            &["-T", "1", "-K", "k", "-E", "A", "-A", "l", "m"],
            &["-T", "1", "-K", "k", "-E", "A", "-A", "-R", "-1", "l"],
            &["-T", "1", "-K", "k", "-E", "A", "-A", "-X", "l"],
            &["-T"],
        ] {
            assert_eq!(parse_append(&s(bad)), Err(Failure::Invalid), "{bad:?}");
        }
    }

    #[test]
    fn parses_read_grammar() {
        assert_eq!(parse_read(&s(&["-K", "k", "-S", "l"])).unwrap().query, Query::State);
        assert_eq!(
            parse_read(&s(&["-K", "k", "-R", "-E", "Bo", "l"])).unwrap().query,
            Query::History(Person::employee("Bo"))
        );
        assert_eq!(
            parse_read(&s(&["-I", "-E", "A", "-G", "B", "-K", "k", "l"])).unwrap().query,
            Query::Intersection(vec![Person::employee("A"), Person::guest("B")])
        );
        for bad in [
            &["-K", "k", "-S", "-E", "A", "l"][..],
            &["-K", "k", "-R", "l"],
            &["-K", "k", "-T", "-E", "A", "-E", "B", "l"],
            &["-K", "k", "-S", "-R", "-E", "A", "l"],
            &["-K", "k", "-S"],
        ] {
            assert_eq!(parse_read(&s(bad)), Err(Failure::Invalid), "{bad:?}");
        }
    }

    #[test]
    fn append_then_read_through_envelope() {
        let dir = tempfile::tempdir().unwrap();
        let log = dir.path().join("log").display().to_string();
        let store = EnvelopeStore;
        let mut out = Vec::new();
        let run = |args: &[&str], out: &mut Vec<u8>| append_with(&store, &s(args), out);
        assert_eq!(run(&["-T", "1", "-K", "tok", "-E", "Alice", "-A", &log], &mut out), 0);
        assert_eq!(run(&["-T", "1", "-K", "tok", "-E", "Alice", "-A", "-R", "101", &log], &mut out), 255);
        assert_eq!(out, b"invalid\n");
        out.clear();
        assert_eq!(run(&["-T", "2", "-K", "tok", "-E", "Alice", "-A", "-R", "101", &log], &mut out), 0);
        assert_eq!(run(&["-T", "3", "-K", "tok", "-G", "Bob", "-A", &log], &mut out), 0);
        assert_eq!(run(&["-T", "4", "-K", "bad", "-G", "Bob", "-L", &log], &mut out), 254);
        assert_eq!(out, b"integrity violation\n");
        out.clear();
        let code = read_with(&store, &s(&["-K", "tok", "-S", &log]), &mut out);
        assert_eq!(code, 0);
        assert_eq!(String::from_utf8(out).unwrap(), "Alice\nBob\n101: Alice\n");
    }

    #[test]
    fn failed_append_leaves_file_untouched() {
        let dir = tempfile::tempdir().unwrap();
        let log = dir.path().join("log").display().to_string();
        let mut out = Vec::new();
        append_with(&EnvelopeStore, &s(&["-T", "1", "-K", "tok", "-E", "A", "-A", &log]), &mut out);
        let before = std::fs::read(&log).unwrap();
        append_with(&EnvelopeStore, &s(&["-T", "1", "-K", "tok", "-E", "B", "-A", &log]), &mut out);
        append_with(&EnvelopeStore, &s(&["-T", "5", "-K", "nope", "-E", "B", "-A", &log]), &mut out);
        assert_eq!(std::fs::read(&log).unwrap(), before);
    }

    #[test]
    fn reading_missing_log_is_invalid() {
        let mut out = Vec::new();
        let code = read_with(&EnvelopeStore, &s(&["-K", "k", "-S", "/nonexistent/log"]), &mut out);
        assert_eq!(code, EXIT_INVALID);
    }
}
