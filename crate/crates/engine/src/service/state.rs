// Copyright (C) 2026 The breakit Authors. All rights reserved.
//
// SPDX-License-Identifier: Apache-2.0

//! Contest state as a fold over events, and the scoreboard derived from it.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use breakit_core::scoring::{
    self, AcceptedFix, AcceptedReport, BugCategory, FixId, Points, ReportId, ScoringConfig, ShipScore, TeamId,
};
use serde::{Deserialize, Serialize};

use super::events::*;
use crate::judge::{BreakReport, ChallengeLog, Problem, RejectReason, Status};
use crate::submission::{self, SuiteResult, TestCase};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StateError {
    #[error("contest not created")]
    NotCreated,
    #[error("contest already created")]
    AlreadyCreated,
    #[error("cannot move from {from:?} to {to:?}")]
    PhaseOrder { from: Phase, to: Phase },
    #[error("not allowed in the {0:?} phase")]
    WrongPhase(Phase),
    #[error("unknown team {0}")]
    UnknownTeam(TeamId),
    #[error("team {0} already registered")]
    DuplicateTeam(TeamId),
    #[error("unknown report {0}")]
    UnknownReport(ReportId),
    #[error("report {0} already received")]
    DuplicateReport(ReportId),
    #[error("report {0} already judged")]
    AlreadyJudged(ReportId),
    #[error("unknown fix {0}")]
    UnknownFix(FixId),
    #[error("fix {0} already received")]
    DuplicateFix(FixId),
    #[error("fix {0} already verified")]
    AlreadyVerified(FixId),
    #[error("targets already published")]
    AlreadyPublished,
    #[error("{0} is not awaiting a decision")]
    NotDecidable(String),
    #[error("decision id {0} does not match the pending item")]
    StaleDecision(String),
    #[error("decision id {0} already used")]
    DuplicateDecision(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotInfo {
    pub commit: String,
    pub path: PathBuf,
    pub scored: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestedSubmission {
    pub commit: String,
    pub outcome: BuildOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeamState {
    pub info: TeamInfo,
    pub snapshots: Vec<SnapshotInfo>,
    pub tested: Option<TestedSubmission>,
    pub unreachable: Option<String>,
}

impl TeamState {
    pub fn suite(&self) -> Option<&SuiteResult> {
        match &self.tested.as_ref()?.outcome {
            BuildOutcome::Built { suite, .. } => Some(suite),
            BuildOutcome::Failed { .. } => None,
        }
    }

    pub fn qualified(&self) -> bool {
        self.suite().is_some_and(SuiteResult::qualified)
    }

    pub fn snapshot(&self, commit: &str) -> Option<&SnapshotInfo> {
        self.snapshots.iter().find(|s| s.commit == commit)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportState {
    pub id: ReportId,
    pub breaker: TeamId,
    pub report: Option<BreakReport>,
    pub source: Option<PathBuf>,
    pub seq: u64,
    pub status: Status,
    /// The automated verdict, kept when a judge decides over it.
    pub judged: Option<Status>,
    pub audit: Option<PathBuf>,
    pub decidable_since: Option<u64>,
    pub decision: Option<String>,
}

impl ReportState {
    pub fn target(&self) -> Option<&TeamId> {
        self.report.as_ref().map(|r| &r.target)
    }

    pub fn category(&self) -> Option<BugCategory> {
        self.report.as_ref().map(|r| r.category)
    }

    /// Whether the report holds one of its breaker's slots on the target.
    pub fn holds_slot(&self) -> bool {
        !matches!(self.status, Status::Rejected { .. })
    }

    pub fn accepted(&self) -> bool {
        self.status == Status::Accepted
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixDecision {
    pub decision_id: String,
    pub accept: bool,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixState {
    pub id: FixId,
    pub team: TeamId,
    pub commit: String,
    pub covers: Vec<ReportId>,
    pub seq: u64,
    pub rejected: Option<String>,
    pub verification: Option<FixVerification>,
    pub decidable_since: Option<u64>,
    pub decision: Option<FixDecision>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixStatus {
    Rejected,
    Verifying,
    AutoRejected,
    AwaitingDecision,
    Accepted,
    RejectedByJudge,
}

impl FixState {
    pub fn status(&self) -> FixStatus {
        if self.rejected.is_some() {
            return FixStatus::Rejected;
        }
        match (&self.verification, &self.decision) {
            (None, _) => FixStatus::Verifying,
            (Some(v), _) if !v.passed => FixStatus::AutoRejected,
            (Some(_), None) => FixStatus::AwaitingDecision,
            (Some(_), Some(d)) if d.accept => FixStatus::Accepted,
            (Some(_), Some(_)) => FixStatus::RejectedByJudge,
        }
    }

    /// Still able to become an accepted fix.
    pub fn live(&self) -> bool {
        matches!(self.status(), FixStatus::Verifying | FixStatus::AwaitingDecision | FixStatus::Accepted)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlagRecord {
    pub decision_id: String,
    pub target: TeamId,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContestState {
    pub id: String,
    pub problem: Problem,
    pub scoring: ScoringConfig,
    pub hide_scores: bool,
    pub seed: u64,
    pub tests: Vec<TestCase>,
    pub phase: Phase,
    pub seq: u64,
    pub teams: BTreeMap<TeamId, TeamState>,
    pub targets: Vec<PublishedTarget>,
    pub orderings: BTreeMap<TeamId, Vec<TeamId>>,
    pub challenges: BTreeMap<TeamId, Vec<ChallengeLog>>,
    pub challenge_errors: BTreeMap<TeamId, String>,
    pub reports: BTreeMap<ReportId, ReportState>,
    pub fixes: BTreeMap<FixId, FixState>,
    pub decisions: BTreeSet<String>,
    pub flags: Vec<FlagRecord>,
}

impl ContestState {
    /// Folds `events`, numbered from 1.
    pub fn replay<'a>(events: impl IntoIterator<Item = &'a Event>) -> Result<Self, StateError> {
        let mut it = events.into_iter();
        let first = it.next().ok_or(StateError::NotCreated)?;
        let mut state = Self::create(first)?;
        for ev in it {
            state.apply(ev)?;
        }
        Ok(state)
    }

    /// The state as it stood when `phase` ended (or now, if it has not).
    pub fn replay_until<'a>(events: impl IntoIterator<Item = &'a Event>, phase: Phase) -> Result<Self, StateError> {
        let mut it = events.into_iter();
        let first = it.next().ok_or(StateError::NotCreated)?;
        let mut state = Self::create(first)?;
        for ev in it {
            if matches!(ev, Event::PhaseAdvanced { to } if *to > phase) {
                break;
            }
            state.apply(ev)?;
        }
        Ok(state)
    }

    pub fn create(ev: &Event) -> Result<Self, StateError> {
        let Event::ContestCreated { id, problem, scoring, hide_scores, seed, tests } = ev else {
            return Err(StateError::NotCreated);
        };
        Ok(Self {
            id: id.clone(),
            problem: *problem,
            scoring: *scoring,
            hide_scores: *hide_scores,
            seed: *seed,
            tests: tests.clone(),
            phase: Phase::Registration,
            seq: 1,
            teams: BTreeMap::new(),
            targets: Vec::new(),
            orderings: BTreeMap::new(),
            challenges: BTreeMap::new(),
            challenge_errors: BTreeMap::new(),
            reports: BTreeMap::new(),
            fixes: BTreeMap::new(),
            decisions: BTreeSet::new(),
            flags: Vec::new(),
        })
    }

    fn team_mut(&mut self, team: &TeamId) -> Result<&mut TeamState, StateError> {
        self.teams.get_mut(team).ok_or_else(|| StateError::UnknownTeam(team.clone()))
    }

    fn require(&self, phases: &[Phase]) -> Result<(), StateError> {
        if phases.contains(&self.phase) {
            Ok(())
        } else {
            Err(StateError::WrongPhase(self.phase))
        }
    }

    /// Applies one event, or leaves the state unchanged and says why not.
    pub fn apply(&mut self, ev: &Event) -> Result<(), StateError> {
        self.apply_inner(ev)?;
        self.seq += 1;
        Ok(())
    }

    // Every arm checks before it mutates.
    fn apply_inner(&mut self, ev: &Event) -> Result<(), StateError> {
        let seq = self.seq + 1;
        match ev {
            Event::ContestCreated { .. } => return Err(StateError::AlreadyCreated),
            Event::TeamRegistered { team } => {
                self.require(&[Phase::Registration])?;
                if self.teams.contains_key(&team.id) {
                    return Err(StateError::DuplicateTeam(team.id.clone()));
                }
                self.teams.insert(
                    team.id.clone(),
                    TeamState { info: team.clone(), snapshots: Vec::new(), tested: None, unreachable: None },
                );
            }
            Event::PhaseAdvanced { to } => {
                if self.phase.next() != Some(*to) {
                    return Err(StateError::PhaseOrder { from: self.phase, to: *to });
                }
                self.phase = *to;
            }
            Event::SnapshotArchived { team, commit, path, scored } => {
                let t = self.team_mut(team)?;
                t.unreachable = None;
                if t.snapshot(commit).is_none() {
                    t.snapshots.push(SnapshotInfo { commit: commit.clone(), path: path.clone(), scored: *scored });
                }
            }
            Event::RepositoryUnreachable { team, error } => {
                self.team_mut(team)?.unreachable = Some(error.clone());
            }
            Event::SubmissionTested { team, commit, outcome } => {
                self.require(&[Phase::Build])?;
                self.team_mut(team)?.tested = Some(TestedSubmission { commit: commit.clone(), outcome: outcome.clone() });
            }
            Event::TargetsPublished { targets, orderings, challenges, challenge_errors } => {
                self.require(&[Phase::Break])?;
                if !self.targets.is_empty() || !self.orderings.is_empty() {
                    return Err(StateError::AlreadyPublished);
                }
                self.targets = targets.clone();
                self.orderings = orderings.clone();
                self.challenges = challenges.clone();
                self.challenge_errors = challenge_errors.clone();
            }
            Event::BreakReceived { id, breaker, report, source, rejected } => {
                self.require(&[Phase::Break])?;
                if self.reports.contains_key(id) {
                    return Err(StateError::DuplicateReport(id.clone()));
                }
                self.team_mut(breaker)?;
                let status = match rejected {
                    Some(why) => Status::Rejected { why: why.clone() },
                    None => Status::Pending,
                };
                self.reports.insert(
                    id.clone(),
                    ReportState {
                        id: id.clone(),
                        breaker: breaker.clone(),
                        report: report.clone(),
                        source: source.clone(),
                        seq,
                        status,
                        judged: None,
                        audit: None,
                        decidable_since: None,
                        decision: None,
                    },
                );
            }
            Event::BreakJudged { id, status, audit } => {
                let r = self.reports.get_mut(id).ok_or_else(|| StateError::UnknownReport(id.clone()))?;
                if r.status != Status::Pending {
                    return Err(StateError::AlreadyJudged(id.clone()));
                }
                r.status = status.clone();
                r.judged = Some(status.clone());
                r.audit = audit.clone();
                if matches!(status, Status::Escalated { .. } | Status::Error { .. }) {
                    r.decidable_since = Some(seq);
                }
            }
            Event::FixReceived { id, team, commit, covers, rejected } => {
                self.require(&[Phase::Fix])?;
                if self.fixes.contains_key(id) {
                    return Err(StateError::DuplicateFix(id.clone()));
                }
                self.team_mut(team)?;
                self.fixes.insert(
                    id.clone(),
                    FixState {
                        id: id.clone(),
                        team: team.clone(),
                        commit: commit.clone(),
                        covers: covers.clone(),
                        seq,
                        rejected: rejected.clone(),
                        verification: None,
                        decidable_since: None,
                        decision: None,
                    },
                );
            }
            Event::FixVerified { id, verification } => {
                let f = self.fixes.get_mut(id).ok_or_else(|| StateError::UnknownFix(id.clone()))?;
                if f.verification.is_some() || f.rejected.is_some() {
                    return Err(StateError::AlreadyVerified(id.clone()));
                }
                f.verification = Some(verification.clone());
                if verification.passed {
                    f.decidable_since = Some(seq);
                }
            }
            Event::Decided { decision_id, item, accept, note } => {
                if self.decisions.contains(decision_id) {
                    return Err(StateError::DuplicateDecision(decision_id.clone()));
                }
                let expected = self.decision_id(item);
                match expected {
                    None => return Err(StateError::NotDecidable(item.key())),
                    Some(e) if &e != decision_id => return Err(StateError::StaleDecision(decision_id.clone())),
                    Some(_) => {}
                }
                match item {
                    QueueItem::Fix(id) => {
                        self.require(&[Phase::Fix])?;
                        let f = self.fixes.get_mut(id).ok_or_else(|| StateError::UnknownFix(id.clone()))?;
                        f.decision = Some(FixDecision { decision_id: decision_id.clone(), accept: *accept, note: note.clone() });
                    }
                    QueueItem::Report(id) => {
                        self.require(&[Phase::Break, Phase::Fix])?;
                        let r = self.reports.get_mut(id).ok_or_else(|| StateError::UnknownReport(id.clone()))?;
                        r.decision = Some(decision_id.clone());
                        r.status = if *accept {
                            Status::Accepted
                        } else {
                            Status::Rejected { why: RejectReason::Ruled(note.clone()) }
                        };
                    }
                }
                self.decisions.insert(decision_id.clone());
            }
            Event::TargetFlagged { decision_id, target, note } => {
                self.require(&[Phase::Break, Phase::Fix])?;
                if self.decisions.contains(decision_id) {
                    return Err(StateError::DuplicateDecision(decision_id.clone()));
                }
                self.team_mut(target)?;
                self.decisions.insert(decision_id.clone());
                self.flags.push(FlagRecord { decision_id: decision_id.clone(), target: target.clone(), note: note.clone() });
            }
        }
        Ok(())
    }

    /// The id a decision on `item` must carry, while it awaits one.
    pub fn decision_id(&self, item: &QueueItem) -> Option<String> {
        let since = match item {
            QueueItem::Fix(id) => {
                let f = self.fixes.get(id)?;
                (f.status() == FixStatus::AwaitingDecision).then_some(f.decidable_since?)?
            }
            QueueItem::Report(id) => {
                let r = self.reports.get(id)?;
                (r.decision.is_none()).then_some(r.decidable_since?)?
            }
        };
        Some(format!("{}#{since}", item.key()))
    }

    /// Items awaiting a human decision, fixes first.
    pub fn queue(&self) -> Vec<QueueItem> {
        let fixes = self.fixes.keys().map(|f| QueueItem::Fix(f.clone()));
        let reports = self.reports.keys().map(|r| QueueItem::Report(r.clone()));
        fixes.chain(reports).filter(|i| self.decision_id(i).is_some()).collect()
    }

    pub fn target(&self, team: &TeamId) -> Option<&PublishedTarget> {
        self.targets.iter().find(|t| &t.team == team)
    }

    /// Reports of `breaker` against `target` that hold a slot, in arrival
    /// order.
    pub fn slot_holders(&self, breaker: &TeamId, target: &TeamId) -> Vec<&ReportState> {
        let mut v: Vec<&ReportState> = self
            .reports
            .values()
            .filter(|r| &r.breaker == breaker && r.target() == Some(target) && r.holds_slot())
            .collect();
        v.sort_by_key(|r| r.seq);
        v
    }

    pub fn accepted_reports(&self) -> Vec<AcceptedReport> {
        let mut v: Vec<&ReportState> = self.reports.values().filter(|r| r.accepted()).collect();
        v.sort_by_key(|r| r.seq);
        v.into_iter()
            .filter_map(|r| {
                let b = r.report.as_ref()?;
                Some(AcceptedReport {
                    id: r.id.clone(),
                    breaker: r.breaker.clone(),
                    target: b.target.clone(),
                    category: b.category,
                })
            })
            .collect()
    }

    pub fn accepted_fixes(&self) -> Vec<AcceptedFix> {
        let accepted: BTreeSet<ReportId> = self.accepted_reports().into_iter().map(|r| r.id).collect();
        let mut v: Vec<&FixState> = self.fixes.values().filter(|f| f.status() == FixStatus::Accepted).collect();
        v.sort_by_key(|f| f.seq);
        v.into_iter()
            .map(|f| AcceptedFix {
                id: f.id.clone(),
                covered: f.covers.iter().filter(|r| accepted.contains(*r)).cloned().collect(),
            })
            .filter(|f| !f.covered.is_empty())
            .collect()
    }

    pub fn scoreboard(&self) -> Scoreboard {
        let cfg = &self.scoring;
        let reports = self.accepted_reports();
        let groups = scoring::group_by_fixes(&reports, &self.accepted_fixes()).unwrap_or_else(|_| {
            scoring::group_by_fixes(&reports, &[]).expect("no fixes cannot conflict")
        });
        let breaks = scoring::break_scores(&groups, cfg);
        let qualified: Vec<&SuiteResult> = self.teams.values().filter(|t| t.qualified()).filter_map(TeamState::suite).collect();

        let mut teams = Vec::new();
        for (id, t) in &self.teams {
            let ship = t.suite().filter(|s| s.qualified()).map(|s| {
                let perf = submission::performance_measures(s, &qualified);
                scoring::ship_score(&s.outcomes(), &perf, cfg).unwrap_or(ShipScore::NotQualified)
            });
            let ship = ship.and_then(|s| s.points());
            let mine: Vec<_> = groups.iter().filter(|g| &g.target == id).cloned().collect();
            let resilience = scoring::resilience_score(&mine, cfg);
            let break_total = breaks.get(id).copied().unwrap_or_else(|| Points::from_integer(0));
            let count = |f: &dyn Fn(&AcceptedReport) -> bool| {
                let mut c = CategoryCounts::new();
                for r in reports.iter().filter(|r| f(r)) {
                    *c.entry(r.category).or_default() += 1;
                }
                c
            };
            teams.push(TeamScore {
                team: id.clone(),
                name: t.info.name.clone(),
                qualified: ship.is_some(),
                ship: ship.map(|s| format!("{s:.2}")),
                resilience: scoring::format_points(&resilience),
                build_total: ship.map(|s| format!("{:.2}", s + ratio_f64(&resilience))),
                break_total: scoring::format_points(&break_total),
                resilience_exact: resilience.to_string(),
                break_exact: break_total.to_string(),
                found: count(&|r| &r.breaker == id),
                against: count(&|r| &r.target == id),
                flagged: self.flags.iter().any(|f| &f.target == id),
                ship_value: ship,
                build_value: ship.map(|s| s + ratio_f64(&resilience)),
                break_value: break_total,
            });
        }
        let mut build: Vec<&TeamScore> = teams.iter().filter(|t| t.qualified).collect();
        build.sort_by(|a, b| b.build_value.partial_cmp(&a.build_value).unwrap_or(std::cmp::Ordering::Equal).then(a.team.cmp(&b.team)));
        let mut brk: Vec<&TeamScore> = teams.iter().collect();
        brk.sort_by(|a, b| b.break_value.cmp(&a.break_value).then(a.team.cmp(&b.team)));
        Scoreboard {
            contest: self.id.clone(),
            phase: self.phase,
            build_ranking: build.iter().map(|t| t.team.clone()).collect(),
            break_ranking: brk.iter().map(|t| t.team.clone()).collect(),
            teams,
        }
    }
}

fn ratio_f64(p: &Points) -> f64 {
    *p.numer() as f64 / *p.denom() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeamScore {
    pub team: TeamId,
    pub name: String,
    pub qualified: bool,
    pub ship: Option<String>,
    pub resilience: String,
    pub build_total: Option<String>,
    pub break_total: String,
    /// Exact rationals behind the rounded figures.
    pub resilience_exact: String,
    pub break_exact: String,
    pub found: CategoryCounts,
    pub against: CategoryCounts,
    pub flagged: bool,
    #[serde(skip)]
    ship_value: Option<f64>,
    #[serde(skip)]
    build_value: Option<f64>,
    #[serde(skip)]
    break_value: Points,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scoreboard {
    pub contest: String,
    pub phase: Phase,
    pub teams: Vec<TeamScore>,
    pub build_ranking: Vec<TeamId>,
    pub break_ranking: Vec<TeamId>,
}

impl Scoreboard {
    /// `team,ship,resilience,break_total`, one row per team in id order;
    /// `NQ` marks a submission that did not qualify.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("team,ship,resilience,break_total\n");
        for t in &self.teams {
            let ship = t.ship.as_deref().unwrap_or("NQ");
            out += &format!("{},{ship},{},{}\n", t.team, t.resilience, t.break_total);
        }
        out
    }

    pub fn team(&self, id: &str) -> Option<&TeamScore> {
        self.teams.iter().find(|t| t.team.as_str() == id)
    }
}
