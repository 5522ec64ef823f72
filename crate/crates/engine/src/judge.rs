// Copyright (C) 2026 The breakit Authors. All rights reserved.
//
// SPDX-License-Identifier: Apache-2.0

//! Automated judging of break reports.
//!
//! A report is a JSON document:
//!
//! ```json
//! {
//!   "version": 1,
//!   "id": "r-7",
//!   "breaker": "team-a",
//!   "target": "team-b",
//!   "category": "correctness",
//!   "evidence": {
//!     "kind": "script",
//!     "commands": [
//!       {"program": "logappend", "args": ["-T", "1", "-K", "k", "-E", "Al", "-A", "log"],
//!        "expected_output": "", "expected_exit": 0}
//!     ]
//!   }
//! }
//! ```
//!
//! Evidence kinds:
//!
//! * `script`: commands run in one fresh directory, against a fresh bank for
//!   the ATM problem (`program` is then `atm`, and `-s`, `-i`, `-p` are
//!   supplied). Correctness reports need `expected_output` and
//!   `expected_exit` on every command; crash reports need neither.
//! * `log_privacy`: `challenge`, `query` (logread arguments without `-K` and
//!   the file) and `claimed_output`.
//! * `log_integrity`: `challenge`, `query` and `corrupted` (base64 file).
//! * `mitm`: `program`, the attacker's argv.
//!
//! Outputs are compared byte for byte on standard output and exit status.

use std::ffi::OsString;
use std::io;
use std::path::{Path, PathBuf};

use base64::Engine;
use breakit_core::gallery::{EventSynth, GalleryEvent, Person};
use breakit_core::scoring::{BugCategory, TeamId};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::logtool;
use crate::mitm::{self, AtmTarget, BankRig, Replay, Secrets, SessionConfig, SessionRecord, Verdict};
use crate::sandbox::{self, Exit, Job, Limits, RunOutcome, Workspace};

pub const REPORT_VERSION: u32 = 1;
pub const MAX_SCRIPT_COMMANDS: usize = 1000;
pub const MAX_CORRUPTED_BYTES: usize = 10 << 20;

/// Paths of the reference binaries.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Oracles {
    pub logappend: PathBuf,
    pub logread: PathBuf,
    pub bank: PathBuf,
    pub atm: PathBuf,
}

impl Oracles {
    /// The reference binaries installed next to the running executable.
    pub fn beside_current_exe() -> io::Result<Self> {
        let exe = std::env::current_exe()?;
        let mut dir = exe.parent().map(Path::to_path_buf).unwrap_or_default();
        if dir.ends_with("deps") {
            dir.pop();
        }
        Ok(Self {
            logappend: dir.join("logappend"),
            logread: dir.join("logread"),
            bank: dir.join("bank"),
            atm: dir.join("atm"),
        })
    }

    pub fn log_target(&self) -> LogTarget {
        LogTarget {
            logappend: vec![self.logappend.clone().into()],
            logread: vec![self.logread.clone().into()],
        }
    }

    pub fn atm_target(&self) -> AtmTarget {
        AtmTarget {
            bank: vec![self.bank.clone().into()],
            atm: vec![self.atm.clone().into()],
        }
    }
}

/// Entry points of a secure log submission; each is an argv prefix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogTarget {
    pub logappend: Vec<OsString>,
    pub logread: Vec<OsString>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "problem", rename_all = "snake_case")]
pub enum Target {
    SecureLog(LogTarget),
    Atm(AtmTarget),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Problem {
    SecureLog,
    Atm,
}

impl Target {
    pub fn problem(&self) -> Problem {
        match self {
            Target::SecureLog(_) => Problem::SecureLog,
            Target::Atm(_) => Problem::Atm,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptCommand {
    pub program: String,
    pub args: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_output: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_exit: Option<i32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Evidence {
    Script {
        commands: Vec<ScriptCommand>,
    },
    LogPrivacy {
        challenge: String,
        query: Vec<String>,
        claimed_output: String,
    },
    LogIntegrity {
        challenge: String,
        query: Vec<String>,
        #[serde(with = "b64")]
        corrupted: Vec<u8>,
    },
    Mitm {
        program: Vec<String>,
    },
}

mod b64 {
    use base64::Engine;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(b: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&base64::engine::general_purpose::STANDARD.encode(b))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        base64::engine::general_purpose::STANDARD
            .decode(String::deserialize(d)?)
            .map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BreakReport {
    pub version: u32,
    pub id: String,
    pub breaker: TeamId,
    pub target: TeamId,
    pub category: BugCategory,
    pub evidence: Evidence,
}

impl BreakReport {
    pub fn parse(text: &str) -> Result<Self, RejectReason> {
        let r: BreakReport = serde_json::from_str(text).map_err(|e| RejectReason::Schema(e.to_string()))?;
        if r.version != REPORT_VERSION {
            return Err(RejectReason::Schema(format!("unsupported version {}", r.version)));
        }
        Ok(r)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "reason", content = "detail", rename_all = "snake_case")]
pub enum RejectReason {
    Schema(String),
    CapExceeded,
    CategoryCapExceeded,
    SelfBreak,
    NotBreakPhase,
    UnknownTarget,
    NoDifference,
    NoCrash,
    Timeout,
    Resource,
    OracleFailed,
    Mismatch,
    TamperDetected,
    Inconclusive,
    NoViolation,
    BreakerError(String),
    /// A human judge's decision.
    Ruled(String),
}

impl std::fmt::Display for RejectReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let text = serde_json::to_value(self).ok();
        let reason = text.as_ref().and_then(|v| v["reason"].as_str()).unwrap_or("rejected");
        match self {
            RejectReason::Schema(d) | RejectReason::BreakerError(d) | RejectReason::Ruled(d) => write!(f, "{reason}: {d}"),
            _ => f.write_str(reason),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Status {
    Pending,
    Accepted,
    Rejected { why: RejectReason },
    /// The oracle or the evidence needs a human decision.
    Escalated { note: String },
    /// Judging itself failed, or gave different answers on re-runs.
    Error { note: String },
}

impl Status {
    fn rejected(why: RejectReason) -> Self {
        Status::Rejected { why }
    }
}

/// What the judge ran, kept for audit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Record {
    None,
    Script {
        oracle: Vec<RunOutcome>,
        target: Vec<RunOutcome>,
    },
    LogQuery {
        original: Option<RunOutcome>,
        corrupted: Option<RunOutcome>,
        oracle_answer: Option<String>,
    },
    Mitm {
        session: Box<SessionRecord>,
        replay: Option<Box<Replay>>,
        verdict: Verdict,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Judgment {
    pub status: Status,
    pub record: Record,
}

/// A log file produced by a target with a token the judge keeps.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChallengeLog {
    pub id: String,
    pub token: String,
    pub transcript: Vec<GalleryEvent>,
    pub published: bool,
    #[serde(with = "b64")]
    pub bytes: Vec<u8>,
}

/// The part of a challenge breakers get to see.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PublicChallenge {
    pub id: String,
    #[serde(with = "b64")]
    pub bytes: Vec<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transcript: Option<Vec<GalleryEvent>>,
}

impl ChallengeLog {
    pub fn public(&self) -> PublicChallenge {
        PublicChallenge {
            id: self.id.clone(),
            bytes: self.bytes.clone(),
            transcript: self.published.then(|| self.transcript.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChallengeConfig {
    pub count: usize,
    pub min_events: usize,
    pub max_events: usize,
}

impl Default for ChallengeConfig {
    fn default() -> Self {
        Self {
            count: 8,
            min_events: 50,
            max_events: 200,
        }
    }
}

fn random_name(rng: &mut StdRng) -> String {
    let len = rng.random_range(8..=12);
    let mut s: String = (0..len).map(|_| rng.random_range(b'a'..=b'z') as char).collect();
    s[..1].make_ascii_uppercase();
    s
}

fn random_token(rng: &mut StdRng) -> String {
    const ALPHABET: &[u8] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789";
    (0..16).map(|_| ALPHABET[rng.random_range(0..ALPHABET.len())] as char).collect()
}

/// A random admissible event sequence with longish names and six-digit
/// rooms, so that any plaintext fragment is recognizable.
pub fn random_transcript(rng: &mut StdRng, len: usize) -> Vec<GalleryEvent> {
    let mut roster: Vec<Person> = Vec::new();
    for i in 0..rng.random_range(4..=8) {
        let name = random_name(rng);
        roster.push(if i % 2 == 0 { Person::employee(name) } else { Person::guest(name) });
    }
    let rooms: Vec<u32> = (0..rng.random_range(3..=6)).map(|_| rng.random_range(100_000..1_000_000)).collect();
    let mut seed_rng = StdRng::seed_from_u64(rng.random());
    EventSynth::new(roster, rooms, move || seed_rng.random()).take(len).collect()
}

#[derive(Debug, thiserror::Error)]
pub enum JudgeError {
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
    #[error("harness: {0}")]
    Harness(#[from] mitm::HarnessError),
    #[error("target failed to record challenge event {index}: {outcome:?}")]
    ChallengeFailed { index: usize, outcome: Box<RunOutcome> },
}

#[derive(Debug)]
pub struct ScriptRun {
    pub outcomes: Vec<RunOutcome>,
    pub dir: PathBuf,
}

/// Settings and resources for judging.
#[derive(Debug, Clone)]
pub struct Judge {
    pub oracles: Oracles,
    pub ws: Workspace,
    pub limits: Limits,
    pub session: SessionConfig,
    /// Re-run accepted verdicts and flag disagreement.
    pub confirm: bool,
}

fn run_in(argv_prefix: &[OsString], args: &[String], dir: &Path, limits: &Limits) -> io::Result<RunOutcome> {
    let mut argv = argv_prefix.to_vec();
    argv.extend(args.iter().map(OsString::from));
    sandbox::run(&Job::new(argv, dir), limits)
}

fn same(a: &RunOutcome, b: &RunOutcome) -> bool {
    a.stdout == b.stdout && a.exit == b.exit
}

impl Judge {
    pub fn new(oracles: Oracles, ws: Workspace) -> Self {
        Self {
            oracles,
            ws,
            limits: Limits::default(),
            session: SessionConfig::default(),
            confirm: true,
        }
    }

    /// Runs `target`'s append tool over a fresh random transcript for each
    /// challenge; even-numbered challenges have published transcripts.
    pub fn generate_challenges(
        &self,
        target: &LogTarget,
        seed: u64,
        cfg: &ChallengeConfig,
    ) -> Result<Vec<ChallengeLog>, JudgeError> {
        let mut rng = StdRng::seed_from_u64(seed);
        let mut out = Vec::new();
        for i in 0..cfg.count {
            let len = rng.random_range(cfg.min_events..=cfg.max_events);
            let transcript = random_transcript(&mut rng, len);
            let token = random_token(&mut rng);
            let dir = self.ws.fresh("challenge")?;
            for (index, ev) in transcript.iter().enumerate() {
                let args = logtool::append_argv(&token, ev, "log");
                let outcome = run_in(&target.logappend, &args, &dir, &self.limits)?;
                if outcome.exit != Exit::Code(0) {
                    return Err(JudgeError::ChallengeFailed { index, outcome: Box::new(outcome) });
                }
            }
            out.push(ChallengeLog {
                id: format!("c{i}"),
                token,
                transcript,
                published: i % 2 == 0,
                bytes: std::fs::read(dir.join("log"))?,
            });
        }
        Ok(out)
    }

    /// Judges `report` against `target`, re-running accepted verdicts when
    /// `confirm` is set.
    pub fn judge(&self, report: &BreakReport, target: &Target, challenges: &[ChallengeLog]) -> Judgment {
        let first = self.judge_once(report, target, challenges);
        if !self.confirm || first.status != Status::Accepted {
            return first;
        }
        let second = self.judge_once(report, target, challenges);
        if second.status != Status::Accepted {
            return Judgment {
                status: Status::Error {
                    note: format!("verdict not reproducible: re-run gave {:?}", second.status),
                },
                record: first.record,
            };
        }
        first
    }

    fn judge_once(&self, report: &BreakReport, target: &Target, challenges: &[ChallengeLog]) -> Judgment {
        let result = match (&report.evidence, target) {
            (Evidence::Script { commands }, _) => self.judge_script(report.category, commands, target),
            (Evidence::LogPrivacy { challenge, query, claimed_output }, Target::SecureLog(t))
                if report.category == BugCategory::Privacy =>
            {
                self.judge_log_privacy(t, find(challenges, challenge), query, claimed_output)
            }
            (Evidence::LogIntegrity { challenge, query, corrupted }, Target::SecureLog(t))
                if report.category == BugCategory::Integrity =>
            {
                self.judge_log_integrity(t, find(challenges, challenge), query, corrupted)
            }
            (Evidence::Mitm { program }, Target::Atm(t)) if report.category.is_security() => {
                self.judge_mitm(report.category, t, program)
            }
            _ => Ok(reject(RejectReason::Schema("evidence does not fit category and problem".into()))),
        };
        result.unwrap_or_else(|e| Judgment {
            status: Status::Error { note: e.to_string() },
            record: Record::None,
        })
    }

    /// Runs `commands` in one fresh directory (against one fresh bank for
    /// the ATM problem).
    pub fn run_script(&self, target: &Target, commands: &[ScriptCommand]) -> Result<ScriptRun, JudgeError> {
        let mut outcomes = Vec::new();
        let dir = match target {
            Target::SecureLog(t) => {
                let dir = self.ws.fresh("script")?;
                for c in commands {
                    let prefix = if c.program == "logappend" { &t.logappend } else { &t.logread };
                    outcomes.push(run_in(prefix, &c.args, &dir, &self.limits)?);
                }
                dir
            }
            Target::Atm(t) => {
                let bank = BankRig::start(&t.bank, &self.ws, &self.limits)?;
                let dir = mitm::atm_dir(&self.ws, &bank.auth)?;
                for c in commands {
                    outcomes.push(mitm::run_atm(&t.atm, &dir, bank.port, &c.args, &self.limits)?);
                }
                bank.stop();
                dir
            }
        };
        Ok(ScriptRun { outcomes, dir })
    }

    /// Runs `commands` on the reference implementation of `problem`.
    pub fn run_oracle(&self, problem: Problem, commands: &[ScriptCommand]) -> Result<ScriptRun, JudgeError> {
        let target = match problem {
            Problem::SecureLog => Target::SecureLog(self.oracles.log_target()),
            Problem::Atm => Target::Atm(self.oracles.atm_target()),
        };
        self.run_script(&target, commands)
    }

    fn judge_script(&self, category: BugCategory, commands: &[ScriptCommand], target: &Target) -> Result<Judgment, JudgeError> {
        if let Err(why) = validate_script(category, commands, target.problem()) {
            return Ok(reject(why));
        }
        let oracle = self.run_oracle(target.problem(), commands)?.outcomes;
        let theirs = self.run_script(target, commands)?.outcomes;
        let status = match category {
            BugCategory::Correctness => {
                let oracle_agrees = commands.iter().zip(&oracle).all(|(c, o)| {
                    Some(o.stdout.as_slice()) == c.expected_output.as_deref().map(str::as_bytes)
                        && Some(o.exit) == c.expected_exit.map(Exit::Code)
                });
                if !oracle_agrees {
                    Status::Escalated {
                        note: "reference output differs from the report's expectations".into(),
                    }
                } else if theirs.iter().any(|o| o.exit == Exit::Timeout) {
                    Status::rejected(RejectReason::Timeout)
                } else if oracle.iter().zip(&theirs).all(|(a, b)| same(a, b)) {
                    Status::rejected(RejectReason::NoDifference)
                } else {
                    Status::Accepted
                }
            }
            _ => {
                if oracle.iter().any(|o| o.exit.is_fault() || o.exit == Exit::Timeout) {
                    Status::rejected(RejectReason::OracleFailed)
                } else if theirs.iter().any(|o| o.exit.is_fault()) {
                    Status::Accepted
                } else if theirs.iter().any(|o| o.exit == Exit::Timeout) {
                    Status::rejected(RejectReason::Timeout)
                } else {
                    Status::rejected(RejectReason::NoCrash)
                }
            }
        };
        Ok(Judgment { status, record: Record::Script { oracle, target: theirs } })
    }

    fn query(&self, t: &LogTarget, token: &str, query: &[String], bytes: &[u8]) -> Result<RunOutcome, JudgeError> {
        let dir = self.ws.fresh("query")?;
        std::fs::write(dir.join("log"), bytes)?;
        let mut args = vec!["-K".to_owned(), token.to_owned()];
        args.extend_from_slice(query);
        args.push("log".into());
        Ok(run_in(&t.logread, &args, &dir, &self.limits)?)
    }

    fn judge_log_privacy(
        &self,
        t: &LogTarget,
        challenge: Option<&ChallengeLog>,
        query: &[String],
        claimed: &str,
    ) -> Result<Judgment, JudgeError> {
        let Some(c) = challenge.filter(|c| !c.published) else {
            return Ok(reject(RejectReason::Schema("no unpublished challenge with that id".into())));
        };
        if claimed.is_empty() {
            return Ok(reject(RejectReason::Schema("claimed output is empty".into())));
        }
        if let Err(why) = validate_query(query) {
            return Ok(reject(why));
        }
        let o = self.query(t, &c.token, query, &c.bytes)?;
        let status = if o.exit == Exit::Code(0) && o.stdout == claimed.as_bytes() {
            Status::Accepted
        } else {
            Status::rejected(RejectReason::Mismatch)
        };
        Ok(Judgment {
            status,
            record: Record::LogQuery { original: Some(o), corrupted: None, oracle_answer: None },
        })
    }

    fn judge_log_integrity(
        &self,
        t: &LogTarget,
        challenge: Option<&ChallengeLog>,
        query: &[String],
        corrupted: &[u8],
    ) -> Result<Judgment, JudgeError> {
        let Some(c) = challenge.filter(|c| c.published) else {
            return Ok(reject(RejectReason::Schema("no published challenge with that id".into())));
        };
        if corrupted.len() > MAX_CORRUPTED_BYTES {
            return Ok(reject(RejectReason::Resource));
        }
        if let Err(why) = validate_query(query) {
            return Ok(reject(why));
        }
        let oracle_answer = logtool::oracle_answer(&c.transcript, query).ok();
        let original = self.query(t, &c.token, query, &c.bytes)?;
        let bad = self.query(t, &c.token, query, corrupted)?;
        let status = if bad.exit != Exit::Code(0) {
            Status::rejected(RejectReason::TamperDetected)
        } else if bad.stdout == original.stdout {
            Status::rejected(RejectReason::NoDifference)
        } else if original.exit != Exit::Code(0) || oracle_answer.as_deref().map(str::as_bytes) != Some(original.stdout.as_slice()) {
            Status::Escalated {
                note: "target's answer on the original log differs from the reference".into(),
            }
        } else {
            Status::Accepted
        };
        Ok(Judgment {
            status,
            record: Record::LogQuery { original: Some(original), corrupted: Some(bad), oracle_answer },
        })
    }

    fn judge_mitm(&self, category: BugCategory, t: &AtmTarget, program: &[String]) -> Result<Judgment, JudgeError> {
        if program.is_empty() {
            return Ok(reject(RejectReason::Schema("empty program".into())));
        }
        let argv: Vec<OsString> = program.iter().map(OsString::from).collect();
        let secrets = Secrets::random(&mut rand::rng());
        let session = mitm::run_session(t, &argv, &self.ws, &self.session, secrets)?;
        let (verdict, replay) = if category == BugCategory::Privacy {
            (mitm::finalize_privacy(&session), None)
        } else {
            mitm::finalize_integrity(&session, &self.oracles.atm_target(), &self.ws, &self.session)?
        };
        let status = match (&session.abort, verdict) {
            (_, Verdict::Violation) => Status::Accepted,
            (Some(why), _) if session.control.is_empty() => Status::rejected(RejectReason::BreakerError(why.clone())),
            (_, Verdict::Inconclusive) => Status::rejected(RejectReason::Inconclusive),
            (_, Verdict::NoViolation) => Status::rejected(RejectReason::NoViolation),
        };
        Ok(Judgment {
            status,
            record: Record::Mitm { session: Box::new(session), replay: replay.map(Box::new), verdict },
        })
    }
}

fn find<'a>(challenges: &'a [ChallengeLog], id: &str) -> Option<&'a ChallengeLog> {
    challenges.iter().find(|c| c.id == id)
}

fn reject(why: RejectReason) -> Judgment {
    Judgment { status: Status::rejected(why), record: Record::None }
}

fn validate_query(query: &[String]) -> Result<(), RejectReason> {
    logtool::oracle_answer(&[], query)
        .map(|_| ())
        .map_err(|_| RejectReason::Schema("query is not a valid logread query".into()))
}

pub fn validate_script(category: BugCategory, commands: &[ScriptCommand], problem: Problem) -> Result<(), RejectReason> {
    let schema = |s: &str| Err(RejectReason::Schema(s.into()));
    if !matches!(category, BugCategory::Correctness | BugCategory::Crash) {
        return schema("scripts demonstrate correctness or crash bugs");
    }
    if commands.is_empty() {
        return schema("script has no commands");
    }
    if commands.len() > MAX_SCRIPT_COMMANDS {
        return Err(RejectReason::Resource);
    }
    for c in commands {
        let known = match problem {
            Problem::SecureLog => matches!(c.program.as_str(), "logappend" | "logread"),
            Problem::Atm => c.program == "atm" && !c.args.iter().any(|a| matches!(a.as_str(), "-s" | "-i" | "-p")),
        };
        if !known {
            return schema("unknown program or harness-supplied flag");
        }
        if category == BugCategory::Correctness && (c.expected_output.is_none() || c.expected_exit.is_none()) {
            return schema("correctness commands need expected_output and expected_exit");
        }
    }
    Ok(())
}

/// Everything needed to re-judge a report, stored with its verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditBundle {
    pub report: BreakReport,
    pub target: Target,
    pub challenges: Vec<ChallengeLog>,
    pub judgment: Judgment,
}

pub const BUNDLE_FILE: &str = "bundle.json";

impl AuditBundle {
    pub fn write(&self, dir: &Path) -> io::Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.json"), serde_json::to_vec_pretty(&self.report)?)?;
        std::fs::write(dir.join(BUNDLE_FILE), serde_json::to_vec_pretty(self)?)
    }

    pub fn read(dir: &Path) -> io::Result<Self> {
        let bytes = std::fs::read(dir.join(BUNDLE_FILE))?;
        serde_json::from_slice(&bytes).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
    }

    /// Judges the stored report again and returns the fresh status.
    pub fn replay(&self, judge: &Judge) -> Status {
        judge.judge(&self.report, &self.target, &self.challenges).status
    }
}

/// Challenges relevant to a report, for bundling.
pub fn referenced_challenges(report: &BreakReport, all: &[ChallengeLog]) -> Vec<ChallengeLog> {
    let id = match &report.evidence {
        Evidence::LogPrivacy { challenge, .. } | Evidence::LogIntegrity { challenge, .. } => challenge,
        _ => return Vec::new(),
    };
    all.iter().filter(|c| &c.id == id).cloned().collect()
}

pub fn encode_bytes(b: &[u8]) -> String {
    base64::engine::general_purpose::STANDARD.encode(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reports_round_trip_through_json() {
        let text = r#"{"version":1,"id":"r1","breaker":"a","target":"b","category":"integrity",
            "evidence":{"kind":"log_integrity","challenge":"c0","query":["-S"],"corrupted":"AAEC"}}"#;
        let r = BreakReport::parse(text).unwrap();
        assert_eq!(
            r.evidence,
            Evidence::LogIntegrity { challenge: "c0".into(), query: vec!["-S".into()], corrupted: vec![0, 1, 2] }
        );
        let again = BreakReport::parse(&serde_json::to_string(&r).unwrap()).unwrap();
        assert_eq!(again, r);
        assert!(matches!(BreakReport::parse("{}"), Err(RejectReason::Schema(_))));
        let v2 = text.replace("\"version\":1", "\"version\":2");
        assert!(matches!(BreakReport::parse(&v2), Err(RejectReason::Schema(_))));
    }

    #[test]
    fn script_validation() {
        let cmd = |p: &str, expected: bool| ScriptCommand {
            program: p.into(),
            args: vec![],
            expected_output: expected.then(String::new),
            expected_exit: expected.then_some(0),
        };
        assert!(validate_script(BugCategory::Correctness, &[cmd("logread", true)], Problem::SecureLog).is_ok());
        assert!(validate_script(BugCategory::Correctness, &[cmd("logread", false)], Problem::SecureLog).is_err());
        assert!(validate_script(BugCategory::Crash, &[cmd("logread", false)], Problem::SecureLog).is_ok());
        assert!(validate_script(BugCategory::Crash, &[cmd("atm", false)], Problem::SecureLog).is_err());
        assert!(validate_script(BugCategory::Crash, &[], Problem::Atm).is_err());
        assert!(validate_script(BugCategory::Privacy, &[cmd("atm", false)], Problem::Atm).is_err());
        let many = vec![cmd("atm", false); MAX_SCRIPT_COMMANDS + 1];
        assert_eq!(validate_script(BugCategory::Crash, &many, Problem::Atm), Err(RejectReason::Resource));
    }

    #[test]
    fn transcripts_are_admissible_and_reproducible() {
        let a = random_transcript(&mut StdRng::seed_from_u64(3), 120);
        let b = random_transcript(&mut StdRng::seed_from_u64(3), 120);
        assert_eq!(a, b);
        assert_eq!(a.len(), 120);
        assert!(breakit_core::gallery::GalleryLog::from_events(a).is_ok());
    }

    #[test]
    fn reject_reasons_display_their_tag() {
        assert_eq!(RejectReason::CapExceeded.to_string(), "cap_exceeded");
        assert_eq!(RejectReason::Schema("x".into()).to_string(), "schema: x");
    }
}
