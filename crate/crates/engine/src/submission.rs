// Copyright (C) 2026 The breakit Authors. All rights reserved.
//
// SPDX-License-Identifier: Apache-2.0

//! Building submissions and running the build-phase test suites.
//!
//! A submission carries a `breakit.toml` at its root:
//!
//! ```toml
//! language = "rust"
//!
//! [build]
//! command = ["make"]
//! dependencies = ["libsodium"]
//!
//! [entry]
//! logappend = ["./logappend"]
//! logread = ["./logread"]
//! ```
//!
//! The build runs in a private copy of the snapshot with no network. Entry
//! argv words that contain a `/` are resolved inside the build directory.
//! ATM submissions name `bank` and `atm` entries instead.

use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::io;
use std::path::{Path, PathBuf};

use breakit_core::bank::Operation;
use breakit_core::currency::Amount;
use breakit_core::gallery::{Action, GalleryEvent, Person};
use breakit_core::scoring::{CorrectnessOutcome, PerformanceMeasure};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::judge::{self, Judge, JudgeError, LogTarget, Problem, ScriptCommand, Target};
use crate::logtool;
use crate::mitm::AtmTarget;
use crate::sandbox::{self, Exit, Job, Limits, Network, RunOutcome, Workspace};

pub const MANIFEST: &str = "breakit.toml";
pub const PERFORMANCE_RUNS: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    #[serde(default)]
    pub language: Option<String>,
    #[serde(default)]
    pub build: Option<BuildSection>,
    pub entry: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuildSection {
    pub command: Vec<String>,
    #[serde(default)]
    pub dependencies: Vec<String>,
}

impl Manifest {
    pub fn load(root: &Path) -> Result<Self, BuildFailure> {
        let text = std::fs::read_to_string(root.join(MANIFEST)).map_err(|_| BuildFailure::NoManifest)?;
        toml::from_str(&text).map_err(|e| BuildFailure::BadManifest(e.to_string()))
    }
}

/// What to build: a source tree, a command, and the runtime dependencies it
/// declares.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BuildSpec {
    pub root: PathBuf,
    pub command: Vec<String>,
    pub dependencies: Vec<String>,
    pub language: Option<String>,
    pub entry: BTreeMap<String, Vec<String>>,
}

impl BuildSpec {
    pub fn from_snapshot(root: &Path) -> Result<Self, BuildFailure> {
        let m = Manifest::load(root)?;
        let (command, dependencies) = m.build.map(|b| (b.command, b.dependencies)).unwrap_or_default();
        Ok(Self {
            root: root.to_path_buf(),
            command,
            dependencies,
            language: m.language,
            entry: m.entry,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[serde(tag = "reason", content = "detail", rename_all = "snake_case")]
pub enum BuildFailure {
    #[error("no {MANIFEST}")]
    NoManifest,
    #[error("bad manifest: {0}")]
    BadManifest(String),
    #[error("dependency not on the allowlist: {0}")]
    DisallowedDependency(String),
    #[error("build timed out")]
    Timeout,
    #[error("build failed: {0}")]
    Failed(String),
    #[error("missing entry point: {0}")]
    MissingEntry(String),
    #[error("i/o: {0}")]
    Io(String),
}

impl From<io::Error> for BuildFailure {
    fn from(e: io::Error) -> Self {
        BuildFailure::Io(e.to_string())
    }
}

/// A built submission.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    pub dir: PathBuf,
    pub language: Option<String>,
    pub entry: BTreeMap<String, Vec<String>>,
}

impl Artifact {
    fn argv(&self, name: &str) -> Option<Vec<OsString>> {
        self.entry.get(name).map(|v| v.iter().map(OsString::from).collect())
    }

    pub fn target(&self, problem: Problem) -> Option<Target> {
        Some(match problem {
            Problem::SecureLog => Target::SecureLog(LogTarget {
                logappend: self.argv("logappend")?,
                logread: self.argv("logread")?,
            }),
            Problem::Atm => Target::Atm(AtmTarget { bank: self.argv("bank")?, atm: self.argv("atm")? }),
        })
    }
}

pub fn entry_names(problem: Problem) -> [&'static str; 2] {
    match problem {
        Problem::SecureLog => ["logappend", "logread"],
        Problem::Atm => ["bank", "atm"],
    }
}

/// Copies a tree, keeping modes and symlinks.
pub fn copy_tree(from: &Path, to: &Path) -> io::Result<()> {
    for entry in walkdir::WalkDir::new(from).follow_links(false) {
        let entry = entry.map_err(io::Error::other)?;
        let rel = entry.path().strip_prefix(from).map_err(io::Error::other)?;
        let dest = to.join(rel);
        let ty = entry.file_type();
        if ty.is_dir() {
            std::fs::create_dir_all(&dest)?;
        } else if ty.is_symlink() {
            std::os::unix::fs::symlink(std::fs::read_link(entry.path())?, &dest)?;
        } else {
            std::fs::copy(entry.path(), &dest)?;
        }
    }
    Ok(())
}

fn tail(b: &[u8]) -> String {
    let text = String::from_utf8_lossy(b);
    let start = text.len().saturating_sub(4096);
    let start = (start..text.len()).find(|&i| text.is_char_boundary(i)).unwrap_or(text.len());
    text[start..].to_owned()
}

/// Builds `spec` offline and resolves the entry points `problem` needs.
pub fn build(
    spec: &BuildSpec,
    problem: Problem,
    allowlist: &BTreeSet<String>,
    ws: &Workspace,
    limits: &Limits,
) -> Result<Artifact, BuildFailure> {
    if let Some(d) = spec.dependencies.iter().find(|d| !allowlist.contains(*d)) {
        return Err(BuildFailure::DisallowedDependency(d.clone()));
    }
    let dir = ws.fresh("build")?;
    copy_tree(&spec.root, &dir)?;
    if !spec.command.is_empty() {
        let job = Job::new(spec.command.iter().map(OsString::from).collect::<Vec<_>>(), &dir).network(Network::none());
        let out = sandbox::run(&job, limits)?;
        match out.exit {
            Exit::Code(0) => {}
            Exit::Timeout => return Err(BuildFailure::Timeout),
            e => {
                return Err(BuildFailure::Failed(format!(
                    "{e:?}\n{}{}",
                    tail(&out.stdout),
                    tail(&out.stderr)
                )))
            }
        }
    }
    let mut entry = BTreeMap::new();
    for name in entry_names(problem) {
        let argv = spec.entry.get(name).filter(|a| !a.is_empty()).ok_or_else(|| BuildFailure::MissingEntry(name.into()))?;
        let resolved: Vec<String> = argv
            .iter()
            .map(|w| if w.contains('/') { dir.join(w).display().to_string() } else { w.clone() })
            .collect();
        if resolved[0].contains('/') && !Path::new(&resolved[0]).is_file() {
            return Err(BuildFailure::MissingEntry(name.into()));
        }
        entry.insert(name.to_owned(), resolved);
    }
    Ok(Artifact { dir, language: spec.language.clone(), entry })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    Mandatory,
    Optional,
    Performance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Median wall time of the whole workload.
    Time,
    /// Final size of the log file.
    Space,
}

/// A build-phase test: a script whose expected outputs come from the
/// reference implementation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestCase {
    pub name: String,
    pub kind: TestKind,
    pub commands: Vec<ScriptCommand>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub metrics: Vec<Metric>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestResult {
    pub name: String,
    pub mandatory: bool,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerfResult {
    pub name: String,
    pub metric: Metric,
    /// `None` when a repetition failed.
    pub value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteResult {
    pub correctness: Vec<TestResult>,
    pub performance: Vec<PerfResult>,
}

impl SuiteResult {
    pub fn qualified(&self) -> bool {
        self.correctness.iter().all(|t| !t.mandatory || t.passed)
    }

    pub fn outcomes(&self) -> Vec<CorrectnessOutcome> {
        self.correctness.iter().map(|t| CorrectnessOutcome { mandatory: t.mandatory, passed: t.passed }).collect()
    }
}

fn s(v: &[&str]) -> Vec<String> {
    v.iter().map(|x| x.to_string()).collect()
}

fn bare(program: &str, args: Vec<String>) -> ScriptCommand {
    ScriptCommand { program: program.into(), args, expected_output: None, expected_exit: None }
}

fn appends(token: &str, events: &[GalleryEvent]) -> Vec<ScriptCommand> {
    events.iter().map(|e| bare("logappend", logtool::append_argv(token, e, "log"))).collect()
}

fn read(token: &str, query: &[&str]) -> ScriptCommand {
    let mut args = s(&["-K", token]);
    args.extend(s(query));
    args.push("log".into());
    bare("logread", args)
}

fn person_flag(p: &Person) -> [String; 2] {
    let flag = if p.kind == breakit_core::gallery::PersonKind::Employee { "-E" } else { "-G" };
    [flag.into(), p.name.clone()]
}

fn log_suite(seed: u64) -> Vec<TestCase> {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut cases = Vec::new();
    let mut case = |name: &str, kind, commands, metrics| {
        cases.push(TestCase { name: name.into(), kind, commands, metrics })
    };

    let events = judge::random_transcript(&mut rng, 12);
    let someone = events[0].person.clone();
    let mut basic = appends("secret", &events);
    basic.push(read("secret", &["-S"]));
    let mut hist = s(&["-K", "secret", "-R"]);
    hist.extend(person_flag(&someone));
    hist.push("log".into());
    basic.push(bare("logread", hist));
    case("basic", TestKind::Mandatory, basic, vec![]);

    let mut wrong = appends("right", &events[..3]);
    wrong.push(read("wrong", &["-S"]));
    case("wrong-token", TestKind::Mandatory, wrong, vec![]);

    let mut bad = appends("tok", &events[..2]);
    let mut stale = events[0].clone();
    stale.person = Person::employee("Latecomer");
    stale.action = Action::Arrival;
    stale.room = None;
    bad.extend(appends("tok", &[stale]));
    bad.push(bare("logappend", s(&["-T", "99", "-K", "tok", "-A", "log"])));
    bad.push(read("tok", &["-S"]));
    case("rejects-invalid", TestKind::Mandatory, bad, vec![]);

    let events = judge::random_transcript(&mut rng, 30);
    let people: BTreeSet<Person> = events.iter().map(|e| e.person.clone()).collect();
    let people: Vec<Person> = people.into_iter().collect();
    let mut total = appends("tt", &events);
    for p in people.iter().take(2) {
        let mut a = s(&["-K", "tt", "-T"]);
        a.extend(person_flag(p));
        a.push("log".into());
        total.push(bare("logread", a));
    }
    case("total-time", TestKind::Optional, total, vec![]);

    let mut inter = appends("ii", &events);
    let mut a = s(&["-K", "ii", "-I"]);
    for p in people.iter().take(2) {
        a.extend(person_flag(p));
    }
    a.push("log".into());
    inter.push(bare("logread", a));
    case("intersection", TestKind::Optional, inter, vec![]);

    let events = judge::random_transcript(&mut rng, 150);
    let mut bulk = appends("bulk", &events);
    bulk.push(read("bulk", &["-S"]));
    case("bulk", TestKind::Performance, bulk, vec![Metric::Time, Metric::Space]);
    cases
}

fn atm(args: &[&str]) -> ScriptCommand {
    bare("atm", s(args))
}

fn atm_suite(seed: u64) -> Vec<TestCase> {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut cases = Vec::new();
    cases.push(TestCase {
        name: "basic".into(),
        kind: TestKind::Mandatory,
        commands: vec![
            atm(&["-a", "alice", "-n", "100.00"]),
            atm(&["-a", "alice", "-d", "25.50"]),
            atm(&["-a", "alice", "-w", "10.25"]),
            atm(&["-a", "alice", "-g"]),
        ],
        metrics: vec![],
    });
    cases.push(TestCase {
        name: "rejects".into(),
        kind: TestKind::Mandatory,
        commands: vec![
            atm(&["-a", "bob", "-n", "20.00"]),
            atm(&["-a", "bob", "-n", "20.00"]),
            atm(&["-a", "bob", "-w", "20.01"]),
            atm(&["-a", "carol", "-g"]),
            atm(&["-a", "bob", "-n", "5.00", "-c", "other.card"]),
            atm(&["-a", "bob", "-g"]),
        ],
        metrics: vec![],
    });
    cases.push(TestCase {
        name: "wrong-card".into(),
        kind: TestKind::Optional,
        commands: vec![
            atm(&["-a", "dave", "-n", "50.00"]),
            atm(&["-a", "erin", "-n", "50.00"]),
            atm(&["-a", "dave", "-c", "erin.card", "-w", "1.00"]),
            atm(&["-a", "dave", "-g"]),
        ],
        metrics: vec![],
    });
    let mut bulk = vec![atm(&["-a", "bulk", "-n", "1000.00"])];
    for _ in 0..40 {
        let op = if rng.random_bool(0.5) { Operation::Deposit } else { Operation::Withdraw };
        let amount = Amount::from_cents(rng.random_range(1..5000)).expect("in range");
        let flag = if op == Operation::Deposit { "-d" } else { "-w" };
        bulk.push(atm(&["-a", "bulk", flag, &amount.to_string()]));
    }
    bulk.push(atm(&["-a", "bulk", "-g"]));
    cases.push(TestCase { name: "bulk".into(), kind: TestKind::Performance, commands: bulk, metrics: vec![Metric::Time] });
    cases
}

/// The built-in tests for `problem`, without expected outputs.
pub fn default_suite(problem: Problem, seed: u64) -> Vec<TestCase> {
    match problem {
        Problem::SecureLog => log_suite(seed),
        Problem::Atm => atm_suite(seed),
    }
}

/// Fills in every command's expected output from the reference.
pub fn materialize(judge: &Judge, problem: Problem, cases: &[TestCase]) -> Result<Vec<TestCase>, JudgeError> {
    let mut out = Vec::new();
    for c in cases {
        let run = judge.run_oracle(problem, &c.commands)?;
        let mut c = c.clone();
        for (cmd, o) in c.commands.iter_mut().zip(&run.outcomes) {
            cmd.expected_output = Some(String::from_utf8_lossy(&o.stdout).into_owned());
            cmd.expected_exit = o.exit.code();
        }
        out.push(c);
    }
    Ok(out)
}

fn matches(commands: &[ScriptCommand], outcomes: &[RunOutcome]) -> bool {
    commands.len() == outcomes.len()
        && commands.iter().zip(outcomes).all(|(c, o)| {
            c.expected_output.as_deref().map(str::as_bytes) == Some(o.stdout.as_slice())
                && c.expected_exit == o.exit.code()
                && o.exit != Exit::Timeout
        })
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Runs a performance workload `PERFORMANCE_RUNS` times in fresh
/// directories; any failing repetition fails every metric.
pub fn measure_performance(judge: &Judge, target: &Target, case: &TestCase) -> Result<Vec<PerfResult>, JudgeError> {
    let mut times = Vec::new();
    let mut size = 0;
    let mut failed = false;
    for _ in 0..PERFORMANCE_RUNS {
        let run = judge.run_script(target, &case.commands)?;
        if !matches(&case.commands, &run.outcomes) {
            failed = true;
            break;
        }
        times.push(run.outcomes.iter().map(|o| o.wall_time).sum());
        size = std::fs::metadata(run.dir.join("log")).map(|m| m.len()).unwrap_or(0);
    }
    let time = median(times);
    Ok(case
        .metrics
        .iter()
        .map(|&metric| PerfResult {
            name: case.name.clone(),
            metric,
            value: (!failed).then_some(match metric {
                Metric::Time => time,
                Metric::Space => size as f64,
            }),
        })
        .collect())
}

/// Runs a materialized suite against `target`. Performance tests are only
/// run for submissions that pass every mandatory test.
pub fn run_suite(judge: &Judge, target: &Target, cases: &[TestCase]) -> Result<SuiteResult, JudgeError> {
    let mut correctness = Vec::new();
    for c in cases.iter().filter(|c| c.kind != TestKind::Performance) {
        let run = judge.run_script(target, &c.commands)?;
        correctness.push(TestResult {
            name: c.name.clone(),
            mandatory: c.kind == TestKind::Mandatory,
            passed: matches(&c.commands, &run.outcomes),
        });
    }
    let mut result = SuiteResult { correctness, performance: Vec::new() };
    if result.qualified() {
        for c in cases.iter().filter(|c| c.kind == TestKind::Performance) {
            result.performance.extend(measure_performance(judge, target, c)?);
        }
    }
    Ok(result)
}

/// Performance measures for one submission given every qualified
/// submission's results; failed runs are left out and score nothing.
pub fn performance_measures(mine: &SuiteResult, all: &[&SuiteResult]) -> Vec<PerformanceMeasure> {
    mine.performance
        .iter()
        .filter_map(|p| {
            let value = p.value?;
            let peers: Vec<f64> = all
                .iter()
                .flat_map(|r| &r.performance)
                .filter(|q| q.name == p.name && q.metric == p.metric)
                .filter_map(|q| q.value)
                .collect();
            let best = peers.iter().copied().fold(value, f64::min);
            let worst = peers.iter().copied().fold(value, f64::max);
            Some(PerformanceMeasure { value, best, worst })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_parses() {
        let m: Manifest = toml::from_str(
            "language = \"c\"\n[build]\ncommand = [\"make\"]\n[entry]\nbank = [\"./bank\"]\natm = [\"./atm\"]\n",
        )
        .unwrap();
        assert_eq!(m.build.unwrap().command, ["make"]);
        assert!(toml::from_str::<Manifest>("[entry]\nx = []\nsurprise = 1\n").is_err());
    }

    #[test]
    fn median_of_odd_and_even() {
        assert_eq!(median(vec![5.0, 1.0, 3.0]), 3.0);
        assert_eq!(median(vec![4.0, 1.0, 3.0, 2.0]), 2.5);
    }

    #[test]
    fn failed_runs_score_nothing() {
        let r = |v: Option<f64>| SuiteResult {
            correctness: vec![],
            performance: vec![PerfResult { name: "bulk".into(), metric: Metric::Space, value: v }],
        };
        let (a, b, c) = (r(Some(10.0)), r(Some(30.0)), r(None));
        let all = [&a, &b, &c];
        assert_eq!(performance_measures(&a, &all), [PerformanceMeasure { value: 10.0, best: 10.0, worst: 30.0 }]);
        assert!(performance_measures(&c, &all).is_empty());
    }

    #[test]
    fn default_suites_are_deterministic() {
        for p in [Problem::SecureLog, Problem::Atm] {
            assert_eq!(default_suite(p, 1), default_suite(p, 1));
            assert!(default_suite(p, 1).iter().any(|c| c.kind == TestKind::Mandatory));
        }
    }
}
