// Copyright (C) 2026 The breakit Authors. All rights reserved.
//
// SPDX-License-Identifier: Apache-2.0

//! Runs an attacker program between a target's atm and bank.
//!
//! The attacker is started as `<program...> <listen-port> <bank-port>
//! <control-port>`. It proxies atm connections arriving on the listen port
//! to the bank, and drives the session through the control port with
//! newline-delimited JSON messages, version 1:
//!
//! ```text
//! {"v":1,"type":"run_atm","args":["-a","$ACCOUNT$","-n","$AMOUNT$"]}
//! {"v":1,"type":"get_card","account":"bob"}
//! {"v":1,"type":"guess","kind":"amount","value":"123.45"}
//! {"v":1,"type":"done"}
//! ```
//!
//! Every request gets one response line: `{"v":1,"ok":true,...}` or
//! `{"v":1,"ok":false,"error":"..."}`. `run_atm` answers only with the exit
//! status; the harness supplies `-s`, `-i` and `-p` and rejects them (and
//! `-c`) in the argument list. `$AMOUNT$` and `$ACCOUNT$` are replaced by
//! the session secrets anywhere in an argument. `get_card` returns the card
//! file of an account created by a successful `run_atm` in this session and
//! marks it revealed. Only the first guess of each kind counts.

use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::io::{self, BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use breakit_core::bank::{balances_from_summaries, validate_account_name};
use breakit_core::currency::Amount;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::sandbox::{self, Daemon, Exit, Job, Limits, Network, RunOutcome, Workspace};

pub const CONTROL_VERSION: u32 = 1;
pub const AMOUNT_PLACEHOLDER: &str = "$AMOUNT$";
pub const ACCOUNT_PLACEHOLDER: &str = "$ACCOUNT$";
pub const SECRET_ACCOUNT_LEN: usize = 16;

/// Entry points of an ATM submission; each is an argv prefix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AtmTarget {
    pub bank: Vec<OsString>,
    pub atm: Vec<OsString>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionConfig {
    #[serde(with = "secs")]
    pub command_timeout: Duration,
    #[serde(with = "secs")]
    pub session_timeout: Duration,
    #[serde(with = "secs")]
    pub connect_timeout: Duration,
    pub limits: Limits,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            command_timeout: Duration::from_secs(10),
            session_timeout: Duration::from_secs(60),
            connect_timeout: Duration::from_secs(10),
            limits: Limits::default(),
        }
    }
}

mod secs {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Duration::try_from_secs_f64(f64::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Secrets {
    pub amount: Amount,
    pub account: String,
}

impl Secrets {
    pub fn random(rng: &mut impl Rng) -> Self {
        const ALPHABET: &[u8] = b"abcdefghijklmnopqrstuvwxyz0123456789";
        let amount = Amount::from_cents(rng.random_range(1000..=Amount::MAX.cents())).expect("in range");
        let account = (0..SECRET_ACCOUNT_LEN)
            .map(|_| ALPHABET[rng.random_range(0..ALPHABET.len())] as char)
            .collect();
        Self { amount, account }
    }

    fn substitute(&self, arg: &str) -> String {
        arg.replace(AMOUNT_PLACEHOLDER, &self.amount.to_string())
            .replace(ACCOUNT_PLACEHOLDER, &self.account)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GuessKind {
    Amount,
    Account,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ControlRequest {
    RunAtm { args: Vec<String> },
    GetCard { account: String },
    Guess { kind: GuessKind, value: String },
    Done,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct Envelope<T> {
    v: u32,
    #[serde(flatten)]
    body: T,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControlResponse {
    pub v: u32,
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exit: Option<Exit>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub card: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ControlResponse {
    fn ok() -> Self {
        Self { v: CONTROL_VERSION, ok: true, exit: None, card: None, error: None }
    }

    fn refuse(why: &str) -> Self {
        Self { ok: false, error: Some(why.into()), ..Self::ok() }
    }
}

pub fn encode_request(req: &ControlRequest) -> String {
    serde_json::to_string(&Envelope { v: CONTROL_VERSION, body: req.clone() }).expect("serializable")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommandRecord {
    /// Arguments after placeholder substitution, without harness flags.
    pub args: Vec<String>,
    pub outcome: RunOutcome,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GuessRecord {
    pub kind: GuessKind,
    pub value: String,
    pub correct: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControlExchange {
    pub request: String,
    pub response: String,
}

/// Everything observed during one session, persisted for audit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub secrets: Secrets,
    pub commands: Vec<CommandRecord>,
    pub revealed: BTreeSet<String>,
    pub done: bool,
    pub guesses: Vec<GuessRecord>,
    pub control: Vec<ControlExchange>,
    pub bank_stdout: String,
    /// Set when the session could not run to a declared end.
    pub abort: Option<String>,
}

impl SessionRecord {
    fn new(secrets: Secrets) -> Self {
        Self {
            secrets,
            commands: Vec::new(),
            revealed: BTreeSet::new(),
            done: false,
            guesses: Vec::new(),
            control: Vec::new(),
            bank_stdout: String::new(),
            abort: None,
        }
    }

    /// Whether any command ended in something other than an orderly
    /// result (exit 0 or 255).
    pub fn has_channel_errors(&self) -> bool {
        self.commands
            .iter()
            .any(|c| !matches!(c.outcome.exit, Exit::Code(0 | 255)))
    }

    /// Control responses that contain a secret value.
    pub fn leaked_secrets(&self) -> Vec<&ControlExchange> {
        let amount = self.secrets.amount.to_string();
        self.control
            .iter()
            .filter(|c| c.response.contains(&amount) || c.response.contains(&self.secrets.account))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Violation,
    NoViolation,
    Inconclusive,
}

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
    #[error("bank did not start: {0}")]
    BankStartup(String),
}

/// A running bank with its auth file.
pub struct BankRig {
    daemon: Daemon,
    pub port: u16,
    pub auth: PathBuf,
}

impl BankRig {
    pub fn start(bank: &[OsString], ws: &Workspace, limits: &Limits) -> Result<Self, HarnessError> {
        let port = sandbox::free_port()?;
        let dir = ws.fresh("bank")?;
        let mut argv = bank.to_vec();
        argv.extend(["-p".into(), port.to_string().into(), "-s".into(), "bank.auth".into()]);
        let job = Job::new(argv, &dir).network(Network { bind: vec![port], connect: vec![] });
        let mut daemon = sandbox::spawn(&job, limits)?;
        let auth = dir.join("bank.auth");
        let deadline = Instant::now() + Duration::from_secs(10);
        loop {
            if String::from_utf8_lossy(&daemon.stdout()).lines().next() == Some("created") && auth.exists() {
                return Ok(Self { daemon, port, auth });
            }
            if daemon.has_exited() || Instant::now() > deadline {
                let out = daemon.kill();
                return Err(HarnessError::BankStartup(format!("{:?}", out.exit)));
            }
            std::thread::sleep(Duration::from_millis(2));
        }
    }

    /// Stops the bank and returns what it printed.
    pub fn stop(self) -> String {
        self.daemon.kill().stdout_str()
    }
}

/// A directory atm invocations run in, holding a copy of the auth file and
/// the card files they create.
pub fn atm_dir(ws: &Workspace, auth: &Path) -> io::Result<PathBuf> {
    let dir = ws.fresh("atm")?;
    std::fs::copy(auth, dir.join("bank.auth"))?;
    Ok(dir)
}

/// Runs one atm command against `port`.
pub fn run_atm(atm: &[OsString], dir: &Path, port: u16, args: &[String], limits: &Limits) -> io::Result<RunOutcome> {
    let mut argv = atm.to_vec();
    argv.extend(["-s".into(), "bank.auth".into(), "-i".into(), "127.0.0.1".into(), "-p".into(), port.to_string().into()]);
    argv.extend(args.iter().map(OsString::from));
    let job = Job::new(argv, dir).network(Network { bind: vec![], connect: vec![port] });
    sandbox::run(&job, limits)
}

fn flag_value<'a>(args: &'a [String], flag: &str) -> Option<&'a str> {
    args.iter().position(|a| a == flag).and_then(|i| args.get(i + 1)).map(String::as_str)
}

struct Session<'a> {
    target: &'a AtmTarget,
    cfg: &'a SessionConfig,
    atm_dir: PathBuf,
    listen_port: u16,
    created: BTreeSet<String>,
    record: SessionRecord,
}

impl Session<'_> {
    fn handle(&mut self, req: ControlRequest) -> io::Result<ControlResponse> {
        if self.record.done {
            return Ok(ControlResponse::refuse("session is done"));
        }
        Ok(match req {
            ControlRequest::RunAtm { args } => {
                if args.iter().any(|a| matches!(a.as_str(), "-s" | "-i" | "-p" | "-c")) {
                    return Ok(ControlResponse::refuse("-s, -i, -p and -c are supplied by the harness"));
                }
                let args: Vec<String> = args.iter().map(|a| self.record.secrets.substitute(a)).collect();
                let limits = self.cfg.limits.clone().with_wall(self.cfg.command_timeout);
                let outcome = run_atm(&self.target.atm, &self.atm_dir, self.listen_port, &args, &limits)?;
                if outcome.exit == Exit::Code(0) && args.iter().any(|a| a == "-n") {
                    if let Some(acct) = flag_value(&args, "-a") {
                        self.created.insert(acct.to_owned());
                    }
                }
                let exit = outcome.exit;
                self.record.commands.push(CommandRecord { args, outcome });
                ControlResponse { exit: Some(exit), ..ControlResponse::ok() }
            }
            ControlRequest::GetCard { account } => {
                if !self.created.contains(&account) || validate_account_name(&account).is_err() {
                    return Ok(ControlResponse::refuse("account was not created in this session"));
                }
                match std::fs::read_to_string(self.atm_dir.join(format!("{account}.card"))) {
                    Ok(card) => {
                        self.record.revealed.insert(account);
                        ControlResponse { card: Some(card), ..ControlResponse::ok() }
                    }
                    Err(_) => ControlResponse::refuse("no card file"),
                }
            }
            ControlRequest::Guess { kind, value } => {
                if self.record.guesses.iter().all(|g| g.kind != kind) {
                    let correct = match kind {
                        GuessKind::Amount => value.parse::<Amount>().ok() == Some(self.record.secrets.amount),
                        GuessKind::Account => value == self.record.secrets.account,
                    };
                    self.record.guesses.push(GuessRecord { kind, value, correct });
                }
                ControlResponse::ok()
            }
            ControlRequest::Done => {
                self.record.done = true;
                ControlResponse::ok()
            }
        })
    }
}

fn accept_within(listener: &TcpListener, mitm: &mut Daemon, timeout: Duration) -> io::Result<Option<TcpStream>> {
    listener.set_nonblocking(true)?;
    let deadline = Instant::now() + timeout;
    loop {
        match listener.accept() {
            Ok((s, _)) => {
                s.set_nonblocking(false)?;
                return Ok(Some(s));
            }
            Err(e) if e.kind() == io::ErrorKind::WouldBlock => {
                if mitm.has_exited() || Instant::now() > deadline {
                    return Ok(None);
                }
                std::thread::sleep(Duration::from_millis(2));
            }
            Err(e) => return Err(e),
        }
    }
}

/// Runs the attacker program `mitm` against `target` with `secrets`.
pub fn run_session(
    target: &AtmTarget,
    mitm: &[OsString],
    ws: &Workspace,
    cfg: &SessionConfig,
    secrets: Secrets,
) -> Result<SessionRecord, HarnessError> {
    let started = Instant::now();
    let control = TcpListener::bind(("127.0.0.1", 0))?;
    let control_port = control.local_addr()?.port();
    let listen_port = sandbox::free_port()?;
    let bank = BankRig::start(&target.bank, ws, &cfg.limits)?;
    let dir = atm_dir(ws, &bank.auth)?;

    let mut argv = mitm.to_vec();
    argv.extend([listen_port, bank.port, control_port].map(|p| OsString::from(p.to_string())));
    let job = Job::new(argv, ws.fresh("mitm")?).network(Network {
        bind: vec![listen_port],
        connect: vec![bank.port, control_port],
    });
    let mut mitm_proc = sandbox::spawn(&job, &cfg.limits)?;

    let mut session = Session {
        target,
        cfg,
        atm_dir: dir,
        listen_port,
        created: BTreeSet::new(),
        record: SessionRecord::new(secrets),
    };
    match accept_within(&control, &mut mitm_proc, cfg.connect_timeout)? {
        None => session.record.abort = Some("attacker never connected to the control port".into()),
        Some(stream) => {
            let mut writer = stream.try_clone()?;
            let mut reader = BufReader::new(stream);
            loop {
                let Some(remaining) = cfg.session_timeout.checked_sub(started.elapsed()) else {
                    session.record.abort = Some("session timed out".into());
                    break;
                };
                reader.get_ref().set_read_timeout(Some(remaining.max(Duration::from_millis(1))))?;
                let mut line = String::new();
                match reader.read_line(&mut line) {
                    Ok(0) => break,
                    Ok(_) => {}
                    Err(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => {
                        session.record.abort = Some("session timed out".into());
                        break;
                    }
                    Err(_) => break,
                }
                let parsed: Option<Envelope<ControlRequest>> = serde_json::from_str(line.trim_end()).ok();
                let resp = match parsed {
                    Some(env) if env.v == CONTROL_VERSION => session.handle(env.body)?,
                    Some(_) => ControlResponse::refuse("unsupported version"),
                    None => ControlResponse::refuse("malformed request"),
                };
                let text = serde_json::to_string(&resp).expect("serializable");
                session.record.control.push(ControlExchange {
                    request: line.trim_end().to_owned(),
                    response: text.clone(),
                });
                if writer.write_all(format!("{text}\n").as_bytes()).is_err() || session.record.done {
                    break;
                }
            }
        }
    }
    if !session.record.done && session.record.abort.is_none() {
        session.record.abort = Some("attacker ended without declaring done".into());
    }
    mitm_proc.kill();
    session.record.bank_stdout = bank.stop();
    Ok(session.record)
}

/// Result of replaying a session's commands on the reference pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Replay {
    pub outcomes: Vec<RunOutcome>,
    pub bank_stdout: String,
    pub differing_commands: Vec<usize>,
    pub differing_accounts: Vec<String>,
}

/// Replays the recorded commands on `oracle` without an attacker and
/// compares. Commands and balances of accounts whose card was revealed are
/// left out.
pub fn finalize_integrity(
    record: &SessionRecord,
    oracle: &AtmTarget,
    ws: &Workspace,
    cfg: &SessionConfig,
) -> Result<(Verdict, Option<Replay>), HarnessError> {
    if record.abort.is_some() || !record.done || record.has_channel_errors() {
        return Ok((Verdict::Inconclusive, None));
    }
    let bank = BankRig::start(&oracle.bank, ws, &cfg.limits)?;
    let dir = atm_dir(ws, &bank.auth)?;
    let limits = cfg.limits.clone().with_wall(cfg.command_timeout);
    let mut outcomes = Vec::new();
    for c in &record.commands {
        outcomes.push(run_atm(&oracle.atm, &dir, bank.port, &c.args, &limits)?);
    }
    let bank_stdout = bank.stop();
    if outcomes.iter().any(|o| !matches!(o.exit, Exit::Code(0 | 255))) {
        return Ok((Verdict::Inconclusive, None));
    }
    let differing_commands: Vec<usize> = record
        .commands
        .iter()
        .zip(&outcomes)
        .enumerate()
        .filter(|(_, (t, _))| flag_value(&t.args, "-a").is_none_or(|a| !record.revealed.contains(a)))
        .filter(|(_, (t, o))| t.outcome.stdout != o.stdout || t.outcome.exit != o.exit)
        .map(|(i, _)| i)
        .collect();
    let target_bal = balances_from_summaries(record.bank_stdout.lines());
    let oracle_bal = balances_from_summaries(bank_stdout.lines());
    let accounts: BTreeSet<&String> = target_bal.keys().chain(oracle_bal.keys()).collect();
    let differing_accounts: Vec<String> = accounts
        .into_iter()
        .filter(|a| !record.revealed.contains(*a) && target_bal.get(*a) != oracle_bal.get(*a))
        .cloned()
        .collect();
    let verdict = if differing_commands.is_empty() && differing_accounts.is_empty() {
        Verdict::NoViolation
    } else {
        Verdict::Violation
    };
    Ok((verdict, Some(Replay { outcomes, bank_stdout, differing_commands, differing_accounts })))
}

/// A privacy break needs a clean session and a correct first guess.
pub fn finalize_privacy(record: &SessionRecord) -> Verdict {
    let clean = record.abort.is_none()
        && record.done
        && record.commands.iter().all(|c| c.outcome.exit == Exit::Code(0));
    if clean && record.guesses.iter().any(|g| g.correct) {
        Verdict::Violation
    } else {
        Verdict::NoViolation
    }
}

/// Client side of the control channel, for attacker programs.
pub struct ControlClient {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
}

impl ControlClient {
    pub fn connect(port: u16) -> io::Result<Self> {
        let s = TcpStream::connect(("127.0.0.1", port))?;
        Ok(Self { writer: s.try_clone()?, reader: BufReader::new(s) })
    }

    pub fn call(&mut self, req: &ControlRequest) -> io::Result<ControlResponse> {
        self.writer.write_all(format!("{}\n", encode_request(req)).as_bytes())?;
        let mut line = String::new();
        if self.reader.read_line(&mut line)? == 0 {
            return Err(io::ErrorKind::UnexpectedEof.into());
        }
        serde_json::from_str(&line).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
    }

    pub fn run_atm(&mut self, args: &[&str]) -> io::Result<Option<Exit>> {
        let args = args.iter().map(|s| s.to_string()).collect();
        Ok(self.call(&ControlRequest::RunAtm { args })?.exit)
    }

    pub fn done(&mut self) -> io::Result<()> {
        self.call(&ControlRequest::Done).map(|_| ())
    }
}

/// Final balances the bank printed, by account.
pub fn bank_balances(stdout: &str) -> BTreeMap<String, Amount> {
    balances_from_summaries(stdout.lines())
}
