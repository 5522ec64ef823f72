// Copyright (C) 2026 The breakit Authors. All rights reserved.
//
// SPDX-License-Identifier: Apache-2.0

//! The contest event vocabulary. Every score is a function of these.

use std::collections::BTreeMap;
use std::path::PathBuf;

use breakit_core::scoring::{BugCategory, FixId, ReportId, ScoringConfig, TeamId};
use serde::{Deserialize, Serialize};

use crate::judge::{BreakReport, ChallengeLog, Problem, RejectReason, Status};
use crate::submission::{Artifact, BuildFailure, SuiteResult, TestCase};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Registration,
    Build,
    Break,
    Fix,
    Closed,
}

impl Phase {
    pub const ALL: [Phase; 5] = [Phase::Registration, Phase::Build, Phase::Break, Phase::Fix, Phase::Closed];

    pub fn next(self) -> Option<Phase> {
        Self::ALL.iter().position(|&p| p == self).and_then(|i| Self::ALL.get(i + 1)).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Registration => "registration",
            Phase::Build => "build",
            Phase::Break => "break",
            Phase::Fix => "fix",
            Phase::Closed => "closed",
        }
    }

    pub fn parse(s: &str) -> Option<Phase> {
        Self::ALL.into_iter().find(|p| p.as_str() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TeamInfo {
    pub id: TeamId,
    pub name: String,
    #[serde(default)]
    pub members: Vec<String>,
    pub repository: String,
    #[serde(default = "default_branch")]
    pub branch: String,
    /// Hex SHA-256 of the team's API token.
    pub token_sha256: String,
}

pub fn default_branch() -> String {
    "HEAD".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum BuildOutcome {
    Built { artifact: Artifact, suite: SuiteResult },
    Failed { failure: BuildFailure },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PublishedTarget {
    pub team: TeamId,
    pub commit: String,
    pub language: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "result", content = "detail", rename_all = "snake_case")]
pub enum CoverResult {
    /// The report's evidence no longer demonstrates a break.
    Flipped,
    StillBroken,
    /// The evidence cannot be re-checked mechanically.
    Manual,
    Error(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverCheck {
    pub report: ReportId,
    pub result: CoverResult,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixVerification {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub build_failure: Option<BuildFailure>,
    pub mandatory_passed: bool,
    pub reports: Vec<CoverCheck>,
    pub passed: bool,
}

/// Something a human judge decides.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", content = "id", rename_all = "snake_case")]
pub enum QueueItem {
    Fix(FixId),
    Report(ReportId),
}

impl QueueItem {
    pub fn key(&self) -> String {
        match self {
            QueueItem::Fix(f) => format!("fix:{f}"),
            QueueItem::Report(r) => format!("report:{r}"),
        }
    }

    pub fn parse(key: &str) -> Option<Self> {
        let (kind, id) = key.split_once(':')?;
        match kind {
            "fix" => Some(QueueItem::Fix(FixId::new(id))),
            "report" => Some(QueueItem::Report(ReportId::new(id))),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Event {
    ContestCreated {
        id: String,
        problem: Problem,
        scoring: ScoringConfig,
        hide_scores: bool,
        seed: u64,
        tests: Vec<TestCase>,
    },
    TeamRegistered {
        team: TeamInfo,
    },
    PhaseAdvanced {
        to: Phase,
    },
    SnapshotArchived {
        team: TeamId,
        commit: String,
        path: PathBuf,
        scored: bool,
    },
    RepositoryUnreachable {
        team: TeamId,
        error: String,
    },
    SubmissionTested {
        team: TeamId,
        commit: String,
        outcome: BuildOutcome,
    },
    TargetsPublished {
        targets: Vec<PublishedTarget>,
        orderings: BTreeMap<TeamId, Vec<TeamId>>,
        challenges: BTreeMap<TeamId, Vec<ChallengeLog>>,
        #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
        challenge_errors: BTreeMap<TeamId, String>,
    },
    BreakReceived {
        id: ReportId,
        breaker: TeamId,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        report: Option<BreakReport>,
        /// Snapshot the evidence was read from.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        source: Option<PathBuf>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rejected: Option<RejectReason>,
    },
    BreakJudged {
        id: ReportId,
        status: Status,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        audit: Option<PathBuf>,
    },
    FixReceived {
        id: FixId,
        team: TeamId,
        commit: String,
        covers: Vec<ReportId>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rejected: Option<String>,
    },
    FixVerified {
        id: FixId,
        verification: FixVerification,
    },
    Decided {
        decision_id: String,
        item: QueueItem,
        accept: bool,
        note: String,
    },
    TargetFlagged {
        decision_id: String,
        target: TeamId,
        note: String,
    },
}

/// Category counts on a dashboard.
pub type CategoryCounts = BTreeMap<BugCategory, usize>;
