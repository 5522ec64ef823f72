// Copyright (C) 2026 The breakit Authors. All rights reserved.
//
// SPDX-License-Identifier: Apache-2.0

//! Contest orchestration: polling, building, judging and fix verification.
//!
//! Every change goes through [`ContestRuntime::commit_with`], which holds the
//! contest's single writer lock, checks the change against current state and
//! appends the resulting events. Readers get immutable state snapshots.
//! Builds, tests and judging run on a shared bounded worker pool.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Condvar, Mutex, RwLock};

use breakit_core::scoring::{self, CapCandidate, CapDecision, FixId, ReportId, TeamId};
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::config::{ContestConfig, Step, TeamConfig};
use super::events::*;
use super::repo;
use super::state::{ContestState, FixStatus, Scoreboard, StateError};
use super::store::{EventStore, Record, StoreError};
use crate::judge::{
    self, AuditBundle, BreakReport, Evidence, Judge, JudgeError, Oracles, Problem, RejectReason, Status, Target,
};
use crate::sandbox::Workspace;
use crate::submission::{self, BuildSpec, TestKind};

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("not found: {0}")]
    NotFound(String),
    #[error("authentication required")]
    Unauthorized,
    #[error("not permitted")]
    Forbidden,
    #[error("{0}")]
    WrongPhase(String),
    #[error("{0}")]
    Conflict(String),
    #[error("{0}")]
    BadRequest(String),
    #[error("{0}")]
    Internal(String),
}

impl From<StateError> for ServiceError {
    fn from(e: StateError) -> Self {
        match e {
            StateError::WrongPhase(_) | StateError::PhaseOrder { .. } => ServiceError::WrongPhase(e.to_string()),
            StateError::UnknownTeam(_) | StateError::UnknownReport(_) | StateError::UnknownFix(_) => {
                ServiceError::NotFound(e.to_string())
            }
            StateError::NotCreated | StateError::AlreadyCreated => ServiceError::Internal(e.to_string()),
            _ => ServiceError::Conflict(e.to_string()),
        }
    }
}

impl From<StoreError> for ServiceError {
    fn from(e: StoreError) -> Self {
        ServiceError::Internal(e.to_string())
    }
}

impl From<JudgeError> for ServiceError {
    fn from(e: JudgeError) -> Self {
        ServiceError::Internal(e.to_string())
    }
}

impl From<std::io::Error> for ServiceError {
    fn from(e: std::io::Error) -> Self {
        ServiceError::Internal(e.to_string())
    }
}

pub fn token_hash(token: &str) -> String {
    hex::encode(Sha256::digest(token.as_bytes()))
}

fn stable_seed(seed: u64, label: &str) -> u64 {
    let d = Sha256::digest(format!("{seed}:{label}").as_bytes());
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

fn file_safe(id: &str) -> String {
    id.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' }).collect()
}

/// Operations subject to phase gating.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Operation {
    RegisterTeam,
    Poll,
    SubmitBreak,
    SubmitFix,
    DecideFix,
    DecideReport,
    Flag,
    Advance,
}

impl Operation {
    pub const ALL: [Operation; 8] = [
        Operation::RegisterTeam,
        Operation::Poll,
        Operation::SubmitBreak,
        Operation::SubmitFix,
        Operation::DecideFix,
        Operation::DecideReport,
        Operation::Flag,
        Operation::Advance,
    ];

    pub fn allowed_in(self, phase: Phase) -> bool {
        use Phase::*;
        match self {
            Operation::RegisterTeam => phase == Registration,
            Operation::Poll => matches!(phase, Build | Break | Fix),
            Operation::SubmitBreak => phase == Break,
            Operation::SubmitFix | Operation::DecideFix => phase == Fix,
            Operation::DecideReport | Operation::Flag => matches!(phase, Break | Fix),
            Operation::Advance => phase != Closed,
        }
    }
}

fn gate(op: Operation, phase: Phase) -> Result<(), ServiceError> {
    if op.allowed_in(phase) {
        Ok(())
    } else {
        Err(ServiceError::WrongPhase(format!("{op:?} is not allowed in the {} phase", phase.as_str())))
    }
}

struct Writer {
    store: EventStore,
    state: ContestState,
}

#[derive(Default)]
struct Jobs {
    running: Mutex<usize>,
    idle: Condvar,
}

/// A fix as committed to a repository under `fixes/<id>.json`.
#[derive(Debug, Clone, serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct FixFile {
    covers: Vec<ReportId>,
    /// The fixed revision, when it is not the commit holding this file.
    #[serde(default)]
    commit: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct Ingested<I> {
    pub id: I,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rejected: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct DecisionOutcome {
    pub decision_id: String,
    pub duplicate: bool,
}

pub struct ContestRuntime {
    pub cfg: ContestConfig,
    pub dir: PathBuf,
    judge: Judge,
    allowlist: BTreeSet<String>,
    writer: Mutex<Writer>,
    view: RwLock<Arc<ContestState>>,
    poll_lock: Mutex<()>,
    pool: Arc<rayon::ThreadPool>,
    jobs: Jobs,
}

impl ContestRuntime {
    /// Opens the contest's store under `root`, creating the contest on first
    /// use.
    pub fn open(
        cfg: ContestConfig,
        root: &Path,
        oracles: Oracles,
        pool: Arc<rayon::ThreadPool>,
    ) -> Result<Arc<Self>, ServiceError> {
        let dir = root.join(&cfg.id);
        let store = EventStore::open(&dir, cfg.snapshot_every)?;
        let ws = Workspace::new(&{
            let w = dir.join("work");
            std::fs::create_dir_all(&w)?;
            w
        })?;
        let mut judge = Judge::new(oracles, ws);
        judge.limits = cfg.limits.clone();
        judge.session = cfg.session.clone();

        let mut initial = Vec::new();
        let state = match store.state()? {
            Some(s) => s,
            None => {
                let mut tests = submission::default_suite(cfg.problem, cfg.seed);
                if let Some(metrics) = &cfg.metrics {
                    for t in &mut tests {
                        t.metrics.retain(|m| metrics.contains(m));
                    }
                    tests.retain(|t| t.kind != TestKind::Performance || !t.metrics.is_empty());
                }
                let ev = Event::ContestCreated {
                    id: cfg.id.clone(),
                    problem: cfg.problem,
                    scoring: cfg.scoring,
                    hide_scores: cfg.hide_scores,
                    seed: cfg.seed,
                    tests: submission::materialize(&judge, cfg.problem, &tests)?,
                };
                let s = ContestState::create(&ev)?;
                initial.push(ev);
                s
            }
        };
        let rt = Arc::new(Self {
            allowlist: cfg.allow_dependencies.iter().cloned().collect(),
            view: RwLock::new(Arc::new(state.clone())),
            writer: Mutex::new(Writer { store, state }),
            poll_lock: Mutex::new(()),
            jobs: Jobs::default(),
            cfg,
            dir,
            judge,
            pool,
        });
        if let Some(ev) = initial.pop() {
            let mut w = rt.writer.lock().unwrap();
            let state = w.state.clone();
            w.store.append(&ev, &state)?;
        }
        if rt.state().phase == Phase::Registration {
            for t in rt.cfg.teams.clone() {
                if !rt.state().teams.contains_key(&t.id) {
                    rt.register(&t)?;
                }
            }
        }
        Ok(rt)
    }

    pub fn state(&self) -> Arc<ContestState> {
        self.view.read().unwrap().clone()
    }

    pub fn records(&self) -> Vec<Record> {
        self.writer.lock().unwrap().store.records().to_vec()
    }

    pub fn event_log(&self) -> PathBuf {
        self.writer.lock().unwrap().store.path()
    }

    pub fn judge(&self) -> &Judge {
        &self.judge
    }

    /// Decides on events against current state and commits them atomically
    /// with respect to other writers.
    pub fn commit_with<T>(
        &self,
        f: impl FnOnce(&ContestState) -> Result<(Vec<Event>, T), ServiceError>,
    ) -> Result<T, ServiceError> {
        let mut guard = self.writer.lock().unwrap();
        let w = &mut *guard;
        let (events, out) = f(&w.state)?;
        if events.is_empty() {
            return Ok(out);
        }
        for ev in &events {
            w.state.apply(ev)?;
            w.store.append(ev, &w.state)?;
        }
        *self.view.write().unwrap() = Arc::new(w.state.clone());
        Ok(out)
    }

    fn commit(&self, ev: Event) -> Result<(), ServiceError> {
        self.commit_with(|_| Ok((vec![ev], ())))
    }

    pub fn scoreboard(&self, at: Option<Phase>) -> Result<Scoreboard, ServiceError> {
        match at {
            None => Ok(self.state().scoreboard()),
            Some(p) => {
                let records = self.records();
                Ok(ContestState::replay_until(records.iter().map(|r| &r.event), p)?.scoreboard())
            }
        }
    }

    pub fn register(&self, t: &TeamConfig) -> Result<(), ServiceError> {
        self.commit_with(|s| {
            gate(Operation::RegisterTeam, s.phase)?;
            let team = TeamInfo {
                id: t.id.clone(),
                name: t.name.clone(),
                members: t.members.clone(),
                repository: t.repository.clone(),
                branch: t.branch.clone(),
                token_sha256: token_hash(&t.token),
            };
            Ok((vec![Event::TeamRegistered { team }], ()))
        })
    }

    /// Moves to the next phase; opening the break phase publishes targets.
    pub fn advance(&self, to: Phase) -> Result<(), ServiceError> {
        let _p = self.poll_lock.lock().unwrap();
        self.wait_idle();
        let state = self.state();
        gate(Operation::Advance, state.phase)?;
        if state.phase.next() != Some(to) {
            return Err(StateError::PhaseOrder { from: state.phase, to }.into());
        }
        let publish = (to == Phase::Break).then(|| self.publish(&state));
        self.commit_with(|s| {
            if s.phase != state.phase {
                return Err(ServiceError::Conflict("phase changed concurrently".into()));
            }
            let mut evs = vec![Event::PhaseAdvanced { to }];
            evs.extend(publish);
            Ok((evs, ()))
        })
    }

    fn publish(&self, state: &ContestState) -> Event {
        let mut targets = Vec::new();
        let mut artifacts = Vec::new();
        for (id, t) in &state.teams {
            if !t.qualified() {
                continue;
            }
            let Some(tested) = &t.tested else { continue };
            let BuildOutcome::Built { artifact, .. } = &tested.outcome else { continue };
            targets.push(PublishedTarget { team: id.clone(), commit: tested.commit.clone(), language: artifact.language.clone() });
            artifacts.push((id.clone(), artifact.clone()));
        }
        let mut orderings = BTreeMap::new();
        for id in state.teams.keys() {
            let mut view: Vec<TeamId> = targets.iter().map(|t| t.team.clone()).filter(|t| t != id).collect();
            view.shuffle(&mut StdRng::seed_from_u64(stable_seed(state.seed, id.as_str())));
            orderings.insert(id.clone(), view);
        }
        let mut challenges = BTreeMap::new();
        let mut challenge_errors = BTreeMap::new();
        if state.problem == Problem::SecureLog {
            let made: Vec<_> = self.pool.install(|| {
                artifacts
                    .par_iter()
                    .map(|(id, a)| {
                        let r = match a.target(Problem::SecureLog) {
                            Some(Target::SecureLog(t)) => self
                                .judge
                                .generate_challenges(&t, stable_seed(state.seed, &format!("challenge:{id}")), &self.cfg.challenges)
                                .map_err(|e| e.to_string()),
                            _ => Err("no log entry points".into()),
                        };
                        (id.clone(), r)
                    })
                    .collect()
            });
            for (id, r) in made {
                match r {
                    Ok(c) => {
                        challenges.insert(id, c);
                    }
                    Err(e) => {
                        challenge_errors.insert(id, e);
                    }
                }
            }
        }
        Event::TargetsPublished { targets, orderings, challenges, challenge_errors }
    }

    /// Checks every repository for new commits and processes them for the
    /// current phase.
    pub fn poll(self: &Arc<Self>) -> Result<(), ServiceError> {
        let _p = self.poll_lock.lock().unwrap();
        let state = self.state();
        gate(Operation::Poll, state.phase)?;
        let teams: Vec<TeamInfo> = state.teams.values().map(|t| t.info.clone()).collect();
        let results: Vec<Result<(), ServiceError>> =
            self.pool.install(|| teams.par_iter().map(|t| self.poll_team(t, state.phase)).collect());
        results.into_iter().collect()
    }

    fn mirror(&self, team: &TeamId) -> PathBuf {
        self.dir.join("mirrors").join(format!("{}.git", file_safe(team.as_str())))
    }

    /// Syncs and archives `rev` for `team`, returning its commit and snapshot.
    fn fetch(&self, team: &TeamInfo, rev: &str, scored: bool) -> Result<Option<(String, PathBuf)>, ServiceError> {
        let mirror = self.mirror(&team.id);
        let got = repo::sync(&team.repository, &mirror).and_then(|_| repo::resolve(&mirror, rev));
        let commit = match got {
            Ok(c) => c,
            Err(error) => {
                let known = self.state().teams.get(&team.id).and_then(|t| t.unreachable.clone());
                if known.as_deref() != Some(error.as_str()) {
                    self.commit(Event::RepositoryUnreachable { team: team.id.clone(), error })?;
                }
                return Ok(None);
            }
        };
        if let Some(s) = self.state().teams.get(&team.id).and_then(|t| t.snapshot(&commit).cloned()) {
            return Ok(Some((commit, s.path)));
        }
        let dest = self.dir.join("snapshots").join(file_safe(team.id.as_str())).join(&commit);
        if !dest.exists() {
            std::fs::create_dir_all(dest.parent().expect("has parent"))?;
            repo::archive(&mirror, &commit, &dest).map_err(ServiceError::Internal)?;
        }
        self.commit(Event::SnapshotArchived { team: team.id.clone(), commit: commit.clone(), path: dest.clone(), scored })?;
        Ok(Some((commit, dest)))
    }

    fn poll_team(self: &Arc<Self>, team: &TeamInfo, phase: Phase) -> Result<(), ServiceError> {
        let before = self.state().teams.get(&team.id).map(|t| t.snapshots.len()).unwrap_or(0);
        let Some((commit, dir)) = self.fetch(team, &team.branch, phase == Phase::Build)? else {
            return Ok(());
        };
        let after = self.state().teams.get(&team.id).map(|t| t.snapshots.len()).unwrap_or(0);
        // Report and fix files are read from the branch head on every poll;
        // ids already received are skipped.
        let logged = |r: Result<(), ServiceError>| {
            if let Err(e) = r {
                tracing::warn!("team {}: {e}", team.id);
            }
        };
        match phase {
            Phase::Build if after != before => {
                let outcome = self.build_and_test(&dir, &self.state().tests);
                self.commit(Event::SubmissionTested { team: team.id.clone(), commit, outcome })?;
            }
            Phase::Break => {
                for (stem, text) in json_files(&dir.join("breaks")) {
                    let id = ReportId::new(format!("{}:{stem}", team.id));
                    if self.state().reports.contains_key(&id) {
                        continue;
                    }
                    logged(self.submit_break(&team.id, &text, Some(&stem), Some(dir.clone())).map(drop));
                }
            }
            Phase::Fix => {
                for (stem, text) in json_files(&dir.join("fixes")) {
                    let id = FixId::new(format!("{}:{stem}", team.id));
                    if self.state().fixes.contains_key(&id) {
                        continue;
                    }
                    let r = match serde_json::from_str::<FixFile>(&text) {
                        Ok(f) => self.submit_fix(&team.id, &stem, Some(f.commit.unwrap_or_else(|| commit.clone())), Ok(f.covers)),
                        Err(e) => self.submit_fix(&team.id, &stem, Some(commit.clone()), Err(format!("malformed fix file: {e}"))),
                    };
                    logged(r.map(drop));
                }
            }
            _ => {}
        }
        Ok(())
    }

    fn build_and_test(&self, dir: &Path, tests: &[submission::TestCase]) -> BuildOutcome {
        let artifact = BuildSpec::from_snapshot(dir)
            .and_then(|spec| submission::build(&spec, self.cfg.problem, &self.allowlist, &self.judge.ws, &self.cfg.build_limits));
        let artifact = match artifact {
            Ok(a) => a,
            Err(failure) => return BuildOutcome::Failed { failure },
        };
        let target = artifact.target(self.cfg.problem).expect("build resolved every entry point");
        match submission::run_suite(&self.judge, &target, tests) {
            Ok(suite) => BuildOutcome::Built { artifact, suite },
            Err(e) => BuildOutcome::Failed { failure: submission::BuildFailure::Io(e.to_string()) },
        }
    }

    fn spawn(self: &Arc<Self>, job: impl FnOnce(&Arc<Self>) + Send + 'static) {
        *self.jobs.running.lock().unwrap() += 1;
        let this = self.clone();
        self.pool.spawn(move || {
            let r = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| job(&this)));
            if r.is_err() {
                tracing::error!("background job panicked");
            }
            let mut n = this.jobs.running.lock().unwrap();
            *n -= 1;
            this.jobs.idle.notify_all();
        });
    }

    /// Blocks until no background job is running.
    pub fn wait_idle(&self) {
        let mut n = self.jobs.running.lock().unwrap();
        while *n > 0 {
            n = self.jobs.idle.wait(n).unwrap();
        }
    }

    /// Ingests a break report. `local_id` is the repository file stem the
    /// report's `id` must match; `source` is the snapshot its relative paths
    /// refer to.
    pub fn submit_break(
        self: &Arc<Self>,
        team: &TeamId,
        text: &str,
        local_id: Option<&str>,
        source: Option<PathBuf>,
    ) -> Result<Ingested<ReportId>, ServiceError> {
        let parsed = BreakReport::parse(text);
        let local = match (local_id, &parsed) {
            (Some(l), _) => l.to_owned(),
            (None, Ok(r)) => r.id.clone(),
            (None, Err(_)) => serde_json::from_str::<serde_json::Value>(text)
                .ok()
                .and_then(|v| v["id"].as_str().map(str::to_owned))
                .ok_or_else(|| ServiceError::BadRequest("report is not JSON with an id".into()))?,
        };
        if local.is_empty() || local.contains(['/', ':']) {
            return Err(ServiceError::BadRequest("report ids may not be empty or contain '/' or ':'".into()));
        }
        let id = ReportId::new(format!("{team}:{local}"));
        let source = source.or_else(|| {
            self.state().teams.get(team).and_then(|t| t.snapshots.last().map(|s| s.path.clone()))
        });
        let rejected = self.commit_with(|s| {
            gate(Operation::SubmitBreak, s.phase)?;
            if !s.teams.contains_key(team) {
                return Err(ServiceError::NotFound(format!("team {team}")));
            }
            if s.reports.contains_key(&id) {
                return Err(ServiceError::Conflict(format!("report {id} already received")));
            }
            let (report, rejected) = match &parsed {
                Err(why) => (None, Some(why.clone())),
                Ok(r) if r.id != local => (Some(r.clone()), Some(RejectReason::Schema("id does not match file name".into()))),
                Ok(r) => (Some(r.clone()), ingest_check(s, team, r)),
            };
            let ev = Event::BreakReceived { id: id.clone(), breaker: team.clone(), report, source: source.clone(), rejected: rejected.clone() };
            Ok((vec![ev], rejected))
        })?;
        if rejected.is_none() {
            let rid = id.clone();
            self.spawn(move |this| this.judge_report(&rid));
        }
        Ok(Ingested { id, rejected: rejected.map(|r| r.to_string()) })
    }

    fn resolve_target(state: &ContestState, team: &TeamId) -> Option<Target> {
        match &state.teams.get(team)?.tested.as_ref()?.outcome {
            BuildOutcome::Built { artifact, .. } => artifact.target(state.problem),
            BuildOutcome::Failed { .. } => None,
        }
    }

    fn judge_report(&self, id: &ReportId) {
        let state = self.state();
        let Some(r) = state.reports.get(id) else { return };
        let Some(mut report) = r.report.clone() else { return };
        if let (Evidence::Mitm { program }, Some(src)) = (&mut report.evidence, &r.source) {
            if let Some(first) = program.first_mut() {
                if first.contains('/') && !first.starts_with('/') {
                    *first = src.join(&*first).display().to_string();
                }
            }
        }
        let (status, audit) = match Self::resolve_target(&state, &report.target) {
            None => (Status::Error { note: "target has no runnable build".into() }, None),
            Some(target) => {
                let challenges = state.challenges.get(&report.target).cloned().unwrap_or_default();
                let judgment = self.judge.judge(&report, &target, &challenges);
                let bundle = AuditBundle {
                    challenges: judge::referenced_challenges(&report, &challenges),
                    report,
                    target,
                    judgment,
                };
                let dir = self.dir.join("audit").join(file_safe(id.as_str()));
                match bundle.write(&dir) {
                    Ok(()) => (bundle.judgment.status, Some(dir)),
                    Err(e) => (Status::Error { note: format!("could not store audit bundle: {e}") }, None),
                }
            }
        };
        if let Err(e) = self.commit(Event::BreakJudged { id: id.clone(), status, audit }) {
            tracing::error!("recording verdict for {id}: {e}");
        }
    }

    /// Ingests a fix. `commit` may be any revision; without it the team's
    /// latest snapshot is used. A `covers` error is recorded as the rejection.
    pub fn submit_fix(
        self: &Arc<Self>,
        team: &TeamId,
        local_id: &str,
        commit: Option<String>,
        covers: Result<Vec<ReportId>, String>,
    ) -> Result<Ingested<FixId>, ServiceError> {
        let state = self.state();
        gate(Operation::SubmitFix, state.phase)?;
        if local_id.is_empty() || local_id.contains(['/', ':']) {
            return Err(ServiceError::BadRequest("fix ids may not be empty or contain '/' or ':'".into()));
        }
        let info = state.teams.get(team).ok_or_else(|| ServiceError::NotFound(format!("team {team}")))?.info.clone();
        let commit = match commit {
            Some(c) => match state.teams[team].snapshots.iter().find(|s| s.commit == c) {
                Some(s) => s.commit.clone(),
                None => self
                    .fetch(&info, &c, false)?
                    .ok_or_else(|| ServiceError::BadRequest(format!("cannot fetch commit {c}")))?
                    .0,
            },
            None => state.teams[team]
                .snapshots
                .last()
                .map(|s| s.commit.clone())
                .ok_or_else(|| ServiceError::BadRequest("no archived commit to verify".into()))?,
        };
        let id = FixId::new(format!("{team}:{local_id}"));
        let rejected = self.commit_with(|s| {
            gate(Operation::SubmitFix, s.phase)?;
            if s.fixes.contains_key(&id) {
                return Err(ServiceError::Conflict(format!("fix {id} already received")));
            }
            let (covers, rejected) = match &covers {
                Ok(c) => (c.clone(), fix_check(s, team, c)),
                Err(e) => (Vec::new(), Some(e.clone())),
            };
            let ev = Event::FixReceived { id: id.clone(), team: team.clone(), commit: commit.clone(), covers, rejected: rejected.clone() };
            Ok((vec![ev], rejected))
        })?;
        if rejected.is_none() {
            let fid = id.clone();
            self.spawn(move |this| this.verify_fix(&fid));
        }
        Ok(Ingested { id, rejected })
    }

    fn verify_fix(&self, id: &FixId) {
        let verification = self.verification(id);
        if let Err(e) = self.commit(Event::FixVerified { id: id.clone(), verification }) {
            tracing::error!("recording verification of {id}: {e}");
        }
    }

    fn verification(&self, id: &FixId) -> FixVerification {
        let state = self.state();
        let fix = &state.fixes[id];
        let failed = |build_failure| FixVerification { build_failure: Some(build_failure), mandatory_passed: false, reports: vec![], passed: false };
        let Some(snap) = state.teams[&fix.team].snapshot(&fix.commit) else {
            return failed(submission::BuildFailure::Io("commit was never archived".into()));
        };
        let mandatory: Vec<_> = state.tests.iter().filter(|t| t.kind == TestKind::Mandatory).cloned().collect();
        let (artifact, suite) = match self.build_and_test(&snap.path, &mandatory) {
            BuildOutcome::Failed { failure } => return failed(failure),
            BuildOutcome::Built { artifact, suite } => (artifact, suite),
        };
        let target = artifact.target(state.problem).expect("resolved entry points");
        let mut judge = self.judge.clone();
        judge.confirm = false;
        let reports: Vec<CoverCheck> = fix
            .covers
            .iter()
            .map(|rid| {
                let result = match state.reports.get(rid).and_then(|r| r.report.as_ref()) {
                    None => CoverResult::Error("unknown report".into()),
                    Some(r) => match &r.evidence {
                        Evidence::LogPrivacy { .. } | Evidence::LogIntegrity { .. } => CoverResult::Manual,
                        _ => {
                            let mut r = r.clone();
                            if let (Evidence::Mitm { program }, Some(src)) = (&mut r.evidence, &state.reports[rid].source) {
                                if let Some(first) = program.first_mut() {
                                    if first.contains('/') && !first.starts_with('/') {
                                        *first = src.join(&*first).display().to_string();
                                    }
                                }
                            }
                            match judge.judge(&r, &target, &[]).status {
                                Status::Rejected { .. } => CoverResult::Flipped,
                                Status::Accepted => CoverResult::StillBroken,
                                other => CoverResult::Error(format!("{other:?}")),
                            }
                        }
                    },
                };
                CoverCheck { report: rid.clone(), result }
            })
            .collect();
        let mandatory_passed = suite.qualified();
        let passed = mandatory_passed && reports.iter().all(|c| matches!(c.result, CoverResult::Flipped | CoverResult::Manual));
        FixVerification { build_failure: None, mandatory_passed, reports, passed }
    }

    /// Records a judge's decision on a queue item; repeating a decision id
    /// already recorded changes nothing.
    pub fn decide(&self, item: &str, decision_id: &str, accept: bool, note: &str) -> Result<DecisionOutcome, ServiceError> {
        if note.trim().is_empty() {
            return Err(ServiceError::BadRequest("a decision needs a note".into()));
        }
        let item = QueueItem::parse(item).ok_or_else(|| ServiceError::BadRequest(format!("bad item {item}")))?;
        self.commit_with(|s| {
            if s.decisions.contains(decision_id) {
                return Ok((vec![], DecisionOutcome { decision_id: decision_id.into(), duplicate: true }));
            }
            let op = if matches!(item, QueueItem::Fix(_)) { Operation::DecideFix } else { Operation::DecideReport };
            gate(op, s.phase)?;
            let ev = Event::Decided { decision_id: decision_id.into(), item: item.clone(), accept, note: note.into() };
            Ok((vec![ev], DecisionOutcome { decision_id: decision_id.into(), duplicate: false }))
        })
    }

    /// Flags a target for obfuscation.
    pub fn flag(&self, decision_id: &str, target: &TeamId, note: &str) -> Result<DecisionOutcome, ServiceError> {
        if note.trim().is_empty() {
            return Err(ServiceError::BadRequest("a flag needs a note".into()));
        }
        self.commit_with(|s| {
            if s.decisions.contains(decision_id) {
                return Ok((vec![], DecisionOutcome { decision_id: decision_id.into(), duplicate: true }));
            }
            gate(Operation::Flag, s.phase)?;
            let ev = Event::TargetFlagged { decision_id: decision_id.into(), target: target.clone(), note: note.into() };
            Ok((vec![ev], DecisionOutcome { decision_id: decision_id.into(), duplicate: false }))
        })
    }

    /// Advances past any phase whose deadline has passed.
    pub fn tick(&self, now_secs: u64) -> Result<(), ServiceError> {
        loop {
            let phase = self.state().phase;
            match (self.cfg.deadlines.get(&phase), phase.next()) {
                (Some(&deadline), Some(next)) if now_secs >= deadline => self.advance(next)?,
                _ => return Ok(()),
            }
        }
    }

    /// Performs scripted steps, letting background work finish after each.
    pub fn run_script(self: &Arc<Self>, steps: &[Step]) -> Result<(), ServiceError> {
        for step in steps {
            match step {
                Step::Advance { to } => self.advance(*to)?,
                Step::Poll => self.poll()?,
                Step::DecideFix { fix, accept, note } => {
                    self.wait_idle();
                    let item = QueueItem::Fix(fix.clone());
                    let id = self.state().decision_id(&item).ok_or_else(|| ServiceError::Conflict(format!("{} is not awaiting a decision", item.key())))?;
                    self.decide(&item.key(), &id, *accept, note)?;
                }
                Step::DecideReport { report, accept, note } => {
                    self.wait_idle();
                    let item = QueueItem::Report(report.clone());
                    let id = self.state().decision_id(&item).ok_or_else(|| ServiceError::Conflict(format!("{} is not awaiting a decision", item.key())))?;
                    self.decide(&item.key(), &id, *accept, note)?;
                }
                Step::Flag { target, note } => {
                    let id = format!("flag:{target}#{}", self.state().seq);
                    self.flag(&id, target, note)?;
                }
            }
            self.wait_idle();
        }
        Ok(())
    }

    /// The patch a fix makes to the submission that was published.
    pub fn fix_diff(&self, id: &FixId) -> Result<String, ServiceError> {
        let state = self.state();
        let fix = state.fixes.get(id).ok_or_else(|| ServiceError::NotFound(format!("fix {id}")))?;
        let base = state.target(&fix.team).map(|t| t.commit.clone()).ok_or_else(|| ServiceError::NotFound("published submission".into()))?;
        repo::diff(&self.mirror(&fix.team), &base, &fix.commit).map_err(ServiceError::Internal)
    }
}

fn json_files(dir: &Path) -> Vec<(String, String)> {
    let Ok(rd) = std::fs::read_dir(dir) else { return Vec::new() };
    let mut v: Vec<(String, String)> = rd
        .filter_map(Result::ok)
        .filter_map(|e| {
            let p = e.path();
            if p.extension()? != "json" {
                return None;
            }
            let stem = p.file_stem()?.to_str()?.to_owned();
            Some((stem, std::fs::read_to_string(&p).ok()?))
        })
        .collect();
    v.sort();
    v
}

/// Ingestion rules for a well-formed report: no self-breaks, published
/// targets only, and the per-target caps over held slots.
fn ingest_check(s: &ContestState, team: &TeamId, r: &BreakReport) -> Option<RejectReason> {
    if &r.breaker != team {
        return Some(RejectReason::Schema("breaker does not match the submitting team".into()));
    }
    if &r.target == team {
        return Some(RejectReason::SelfBreak);
    }
    if s.target(&r.target).is_none() {
        return Some(RejectReason::UnknownTarget);
    }
    let mut candidates: Vec<CapCandidate> = s
        .slot_holders(team, &r.target)
        .into_iter()
        .filter_map(|h| {
            Some(CapCandidate { id: h.id.clone(), breaker: h.breaker.clone(), target: h.target()?.clone(), category: h.category()? })
        })
        .collect();
    candidates.push(CapCandidate { id: ReportId::new("incoming"), breaker: team.clone(), target: r.target.clone(), category: r.category });
    match scoring::enforce_report_caps(&candidates, &s.scoring).pop().map(|(_, d)| d) {
        Some(CapDecision::LimitExceeded) => Some(RejectReason::CapExceeded),
        Some(CapDecision::CategoryExceeded) => Some(RejectReason::CategoryCapExceeded),
        _ => None,
    }
}

fn fix_check(s: &ContestState, team: &TeamId, covers: &[ReportId]) -> Option<String> {
    if s.target(team).is_none() {
        return Some("only builders of published submissions submit fixes".into());
    }
    if covers.is_empty() {
        return Some("a fix must cover at least one report".into());
    }
    let unique: BTreeSet<&ReportId> = covers.iter().collect();
    if unique.len() != covers.len() {
        return Some("a report is listed twice".into());
    }
    for rid in covers {
        let Some(r) = s.reports.get(rid) else { return Some(format!("unknown report {rid}")) };
        if r.target() != Some(team) {
            return Some(format!("report {rid} is not against this submission"));
        }
        if !r.accepted() {
            return Some(format!("report {rid} is not accepted"));
        }
        if s.fixes.values().any(|f| f.live() && f.covers.contains(rid)) {
            return Some(format!("report {rid} is already covered by another fix"));
        }
    }
    None
}

/// Every contest in one engine configuration.
pub struct Service {
    pub contests: BTreeMap<String, Arc<ContestRuntime>>,
    judge_token_sha256: String,
    pub poll_interval: std::time::Duration,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Caller {
    Judge,
    Team(TeamId),
    Anonymous,
}

impl Service {
    pub fn open(cfg: &super::config::EngineConfig) -> Result<Self, ServiceError> {
        let oracles = match &cfg.oracles {
            Some(o) => o.clone(),
            None => Oracles::beside_current_exe()?,
        };
        let workers = cfg.workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(4, |n| n.get()));
        let pool = Arc::new(
            rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .thread_name(|i| format!("breakit-worker-{i}"))
                .build()
                .map_err(|e| ServiceError::Internal(e.to_string()))?,
        );
        let mut contests = BTreeMap::new();
        for c in &cfg.contests {
            contests.insert(c.id.clone(), ContestRuntime::open(c.clone(), &cfg.store, oracles.clone(), pool.clone())?);
        }
        Ok(Self {
            contests,
            judge_token_sha256: token_hash(&cfg.judge_token),
            poll_interval: std::time::Duration::from_secs(cfg.poll_interval_secs),
        })
    }

    pub fn contest(&self, id: &str) -> Result<&Arc<ContestRuntime>, ServiceError> {
        self.contests.get(id).ok_or_else(|| ServiceError::NotFound(format!("contest {id}")))
    }

    pub fn caller(&self, contest: &ContestRuntime, token: Option<&str>) -> Caller {
        let Some(token) = token else { return Caller::Anonymous };
        let h = token_hash(token);
        if h == self.judge_token_sha256 {
            return Caller::Judge;
        }
        contest
            .state()
            .teams
            .values()
            .find(|t| t.info.token_sha256 == h)
            .map_or(Caller::Anonymous, |t| Caller::Team(t.info.id.clone()))
    }

    /// One round of deadline checks and polling for every contest.
    pub fn tick(&self) {
        let now = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_secs());
        for (id, c) in &self.contests {
            if let Err(e) = c.tick(now) {
                tracing::warn!("contest {id}: {e}");
            }
            if Operation::Poll.allowed_in(c.state().phase) {
                if let Err(e) = c.poll() {
                    tracing::warn!("contest {id}: poll: {e}");
                }
            }
        }
    }
}

/// For tests and tools: the status a fix would take from a finished state.
pub fn fix_status(state: &ContestState, id: &FixId) -> Option<FixStatus> {
    state.fixes.get(id).map(|f| f.status())
}
