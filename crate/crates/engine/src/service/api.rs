// Copyright (C) 2026 The breakit Authors. All rights reserved.
//
// SPDX-License-Identifier: Apache-2.0

//! The versioned HTTP API.
//!
//! Everything lives under `/v1`. Callers authenticate with
//! `Authorization: Bearer <token>`, either a team token or the judge token.
//! Errors are JSON objects `{"error": <kind>, "message": <text>}`.
//!
//! | method | path | who |
//! |---|---|---|
//! | GET | `/contests` | anyone |
//! | GET | `/contests/{c}` | anyone |
//! | GET | `/contests/{c}/scoreboard[?at=<phase>]` | anyone, judge only while scores are hidden |
//! | GET | `/contests/{c}/scoreboard.csv[?at=<phase>]` | as above |
//! | GET | `/contests/{c}/teams/{t}` | team `t` or judge |
//! | GET | `/contests/{c}/targets/{t}/challenges` | any team or judge |
//! | POST | `/contests/{c}/teams` | judge |
//! | POST | `/contests/{c}/breaks` | team |
//! | POST | `/contests/{c}/fixes` | team |
//! | GET | `/contests/{c}/judge/queue` | judge |
//! | GET | `/contests/{c}/judge/items/{item}` | judge |
//! | POST | `/contests/{c}/judge/items/{item}/decision` | judge |
//! | POST | `/contests/{c}/flags` | judge |
//! | POST | `/contests/{c}/phase` | judge |
//! | POST | `/contests/{c}/poll` | judge |
//! | GET | `/contests/{c}/events` | judge |

use std::collections::BTreeMap;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use breakit_core::scoring::{BugCategory, FixId, ReportId, ScoringConfig, TeamId};
use serde::{Deserialize, Serialize};

use super::config::TeamConfig;
use super::events::{BuildOutcome, FixVerification, Phase, PublishedTarget, QueueItem};
use super::runtime::{Caller, ContestRuntime, DecisionOutcome, Ingested, Service, ServiceError};
use super::state::{ContestState, FixStatus, Scoreboard, SnapshotInfo, TeamScore};
use crate::judge::{AuditBundle, BreakReport, Evidence, Problem, PublicChallenge, Status};
use crate::submission::{BuildFailure, SuiteResult};

impl ServiceError {
    fn status(&self) -> StatusCode {
        match self {
            ServiceError::NotFound(_) => StatusCode::NOT_FOUND,
            ServiceError::Unauthorized => StatusCode::UNAUTHORIZED,
            ServiceError::Forbidden => StatusCode::FORBIDDEN,
            ServiceError::WrongPhase(_) | ServiceError::Conflict(_) => StatusCode::CONFLICT,
            ServiceError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ServiceError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            ServiceError::NotFound(_) => "not_found",
            ServiceError::Unauthorized => "unauthorized",
            ServiceError::Forbidden => "forbidden",
            ServiceError::WrongPhase(_) => "wrong_phase",
            ServiceError::Conflict(_) => "conflict",
            ServiceError::BadRequest(_) => "bad_request",
            ServiceError::Internal(_) => "internal",
        }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        #[derive(Serialize)]
        struct Body<'a> {
            error: &'a str,
            message: String,
        }
        let body = Body { error: self.kind(), message: self.to_string() };
        (self.status(), Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ServiceError>;

fn bearer(headers: &HeaderMap) -> Option<&str> {
    headers.get(header::AUTHORIZATION)?.to_str().ok()?.strip_prefix("Bearer ").map(str::trim)
}

struct Ctx {
    contest: Arc<ContestRuntime>,
    caller: Caller,
}

impl Ctx {
    fn new(svc: &Service, id: &str, headers: &HeaderMap) -> ApiResult<Self> {
        let contest = svc.contest(id)?.clone();
        let caller = svc.caller(&contest, bearer(headers));
        Ok(Self { contest, caller })
    }

    fn judge(&self) -> ApiResult<()> {
        match self.caller {
            Caller::Judge => Ok(()),
            Caller::Anonymous => Err(ServiceError::Unauthorized),
            Caller::Team(_) => Err(ServiceError::Forbidden),
        }
    }

    fn team(&self) -> ApiResult<TeamId> {
        match &self.caller {
            Caller::Team(t) => Ok(t.clone()),
            Caller::Anonymous => Err(ServiceError::Unauthorized),
            Caller::Judge => Err(ServiceError::Forbidden),
        }
    }

    fn authenticated(&self) -> ApiResult<()> {
        match self.caller {
            Caller::Anonymous => Err(ServiceError::Unauthorized),
            _ => Ok(()),
        }
    }

    /// Scores are visible unless the contest hides them until it closes.
    fn scores_visible(&self, state: &ContestState) -> bool {
        !state.hide_scores || state.phase == Phase::Closed || self.caller == Caller::Judge
    }
}

/// Runs blocking engine work off the async executor.
async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f).await.map_err(|e| ServiceError::Internal(e.to_string()))?
}

pub fn router(svc: Arc<Service>) -> Router {
    Router::new()
        .route("/v1/contests", get(list_contests))
        .route("/v1/contests/{c}", get(contest))
        .route("/v1/contests/{c}/scoreboard", get(scoreboard))
        .route("/v1/contests/{c}/scoreboard.csv", get(scoreboard_csv))
        .route("/v1/contests/{c}/teams", post(register))
        .route("/v1/contests/{c}/teams/{t}", get(dashboard))
        .route("/v1/contests/{c}/targets/{t}/challenges", get(challenges))
        .route("/v1/contests/{c}/breaks", post(submit_break))
        .route("/v1/contests/{c}/fixes", post(submit_fix))
        .route("/v1/contests/{c}/judge/queue", get(queue))
        .route("/v1/contests/{c}/judge/items/{item}", get(item))
        .route("/v1/contests/{c}/judge/items/{item}/decision", post(decide))
        .route("/v1/contests/{c}/flags", post(flag))
        .route("/v1/contests/{c}/phase", post(advance))
        .route("/v1/contests/{c}/poll", post(poll))
        .route("/v1/contests/{c}/events", get(events))
        .with_state(svc)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContestSummary {
    pub id: String,
    pub problem: Problem,
    pub phase: Phase,
    pub deadlines: BTreeMap<Phase, u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TeamEntry {
    pub id: TeamId,
    pub name: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContestView {
    pub id: String,
    pub problem: Problem,
    pub phase: Phase,
    pub deadlines: BTreeMap<Phase, u64>,
    pub scoring: ScoringConfig,
    pub hide_scores: bool,
    pub seq: u64,
    pub teams: Vec<TeamEntry>,
    pub targets: Vec<PublishedTarget>,
}

fn summary(c: &ContestRuntime) -> ContestSummary {
    let s = c.state();
    ContestSummary { id: s.id.clone(), problem: s.problem, phase: s.phase, deadlines: c.cfg.deadlines.clone() }
}

async fn list_contests(State(svc): State<Arc<Service>>) -> Json<Vec<ContestSummary>> {
    Json(svc.contests.values().map(|c| summary(c)).collect())
}

async fn contest(State(svc): State<Arc<Service>>, Path(c): Path<String>) -> ApiResult<Json<ContestView>> {
    let rt = svc.contest(&c)?;
    let s = rt.state();
    Ok(Json(ContestView {
        id: s.id.clone(),
        problem: s.problem,
        phase: s.phase,
        deadlines: rt.cfg.deadlines.clone(),
        scoring: s.scoring,
        hide_scores: s.hide_scores,
        seq: s.seq,
        teams: s.teams.values().map(|t| TeamEntry { id: t.info.id.clone(), name: t.info.name.clone() }).collect(),
        targets: s.targets.clone(),
    }))
}

#[derive(Debug, Deserialize)]
struct AtPhase {
    at: Option<Phase>,
}

async fn board(svc: Arc<Service>, c: String, headers: HeaderMap, at: Option<Phase>) -> ApiResult<Scoreboard> {
    let ctx = Ctx::new(&svc, &c, &headers)?;
    if !ctx.scores_visible(&ctx.contest.state()) {
        return Err(if ctx.caller == Caller::Anonymous { ServiceError::Unauthorized } else { ServiceError::Forbidden });
    }
    blocking(move || ctx.contest.scoreboard(at)).await
}

async fn scoreboard(
    State(svc): State<Arc<Service>>,
    Path(c): Path<String>,
    Query(q): Query<AtPhase>,
    headers: HeaderMap,
) -> ApiResult<Json<Scoreboard>> {
    board(svc, c, headers, q.at).await.map(Json)
}

async fn scoreboard_csv(
    State(svc): State<Arc<Service>>,
    Path(c): Path<String>,
    Query(q): Query<AtPhase>,
    headers: HeaderMap,
) -> ApiResult<impl IntoResponse> {
    let b = board(svc, c, headers, q.at).await?;
    Ok(([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], b.to_csv()))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubmittedReport {
    pub id: ReportId,
    pub target: Option<TeamId>,
    pub category: Option<BugCategory>,
    pub status: Status,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportAgainst {
    pub id: ReportId,
    pub category: BugCategory,
    pub status: Status,
    pub evidence: Evidence,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FixSummary {
    pub id: FixId,
    pub commit: String,
    pub covers: Vec<ReportId>,
    pub status: FixStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rejected: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verification: Option<FixVerification>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubmissionView {
    pub commit: String,
    pub qualified: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub suite: Option<SuiteResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub build_failure: Option<BuildFailure>,
}

/// What a team sees about itself.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Dashboard {
    pub id: TeamId,
    pub name: String,
    pub members: Vec<String>,
    pub phase: Phase,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub unreachable: Option<String>,
    pub snapshots: Vec<SnapshotInfo>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub submission: Option<SubmissionView>,
    /// This team's randomized view of the published targets.
    pub targets: Vec<PublishedTarget>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub score: Option<TeamScore>,
    pub reports: Vec<SubmittedReport>,
    pub against: Vec<ReportAgainst>,
    pub fixes: Vec<FixSummary>,
}

async fn dashboard(
    State(svc): State<Arc<Service>>,
    Path((c, t)): Path<(String, TeamId)>,
    headers: HeaderMap,
) -> ApiResult<Json<Dashboard>> {
    let ctx = Ctx::new(&svc, &c, &headers)?;
    match &ctx.caller {
        Caller::Judge => {}
        Caller::Team(me) if *me == t => {}
        Caller::Team(_) => return Err(ServiceError::Forbidden),
        Caller::Anonymous => return Err(ServiceError::Unauthorized),
    }
    let s = ctx.contest.state();
    let team = s.teams.get(&t).ok_or_else(|| ServiceError::NotFound(format!("team {t}")))?;
    let submission = team.tested.as_ref().map(|ts| match &ts.outcome {
        BuildOutcome::Built { suite, .. } => SubmissionView {
            commit: ts.commit.clone(),
            qualified: suite.qualified(),
            suite: Some(suite.clone()),
            build_failure: None,
        },
        BuildOutcome::Failed { failure } => SubmissionView {
            commit: ts.commit.clone(),
            qualified: false,
            suite: None,
            build_failure: Some(failure.clone()),
        },
    });
    let targets = s
        .orderings
        .get(&t)
        .map(|o| o.iter().filter_map(|id| s.target(id).cloned()).collect())
        .unwrap_or_default();
    let score = ctx.scores_visible(&s).then(|| s.scoreboard()).and_then(|b| b.team(t.as_str()).cloned());
    let reports = s
        .reports
        .values()
        .filter(|r| r.breaker == t)
        .map(|r| SubmittedReport { id: r.id.clone(), target: r.target().cloned(), category: r.category(), status: r.status.clone() })
        .collect();
    let against = s
        .reports
        .values()
        .filter(|r| r.target() == Some(&t) && r.accepted())
        .filter_map(|r| {
            let b = r.report.as_ref()?;
            Some(ReportAgainst { id: r.id.clone(), category: b.category, status: r.status.clone(), evidence: b.evidence.clone() })
        })
        .collect();
    let fixes = s
        .fixes
        .values()
        .filter(|f| f.team == t)
        .map(|f| FixSummary {
            id: f.id.clone(),
            commit: f.commit.clone(),
            covers: f.covers.clone(),
            status: f.status(),
            rejected: f.rejected.clone(),
            verification: f.verification.clone(),
            note: f.decision.as_ref().map(|d| d.note.clone()),
        })
        .collect();
    Ok(Json(Dashboard {
        id: t.clone(),
        name: team.info.name.clone(),
        members: team.info.members.clone(),
        phase: s.phase,
        unreachable: team.unreachable.clone(),
        snapshots: team.snapshots.clone(),
        submission,
        targets,
        score,
        reports,
        against,
        fixes,
    }))
}

async fn challenges(
    State(svc): State<Arc<Service>>,
    Path((c, t)): Path<(String, TeamId)>,
    headers: HeaderMap,
) -> ApiResult<Json<Vec<PublicChallenge>>> {
    let ctx = Ctx::new(&svc, &c, &headers)?;
    ctx.authenticated()?;
    let s = ctx.contest.state();
    if s.phase < Phase::Break {
        return Err(ServiceError::WrongPhase("targets are not published yet".into()));
    }
    if s.target(&t).is_none() {
        return Err(ServiceError::NotFound(format!("target {t}")));
    }
    Ok(Json(s.challenges.get(&t).map(|v| v.iter().map(|c| c.public()).collect()).unwrap_or_default()))
}

async fn register(
    State(svc): State<Arc<Service>>,
    Path(c): Path<String>,
    headers: HeaderMap,
    Json(team): Json<TeamConfig>,
) -> ApiResult<(StatusCode, Json<TeamEntry>)> {
    let ctx = Ctx::new(&svc, &c, &headers)?;
    ctx.judge()?;
    if team.token.is_empty() {
        return Err(ServiceError::BadRequest("a team needs a token".into()));
    }
    ctx.contest.register(&team)?;
    Ok((StatusCode::CREATED, Json(TeamEntry { id: team.id, name: team.name })))
}

async fn submit_break(
    State(svc): State<Arc<Service>>,
    Path(c): Path<String>,
    headers: HeaderMap,
    body: String,
) -> ApiResult<(StatusCode, Json<Ingested<ReportId>>)> {
    let ctx = Ctx::new(&svc, &c, &headers)?;
    let team = ctx.team()?;
    let rt = ctx.contest.clone();
    let r = blocking(move || rt.submit_break(&team, &body, None, None)).await?;
    Ok((StatusCode::ACCEPTED, Json(r)))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixRequest {
    pub id: String,
    #[serde(default)]
    pub commit: Option<String>,
    pub covers: Vec<ReportId>,
}

async fn submit_fix(
    State(svc): State<Arc<Service>>,
    Path(c): Path<String>,
    headers: HeaderMap,
    Json(req): Json<FixRequest>,
) -> ApiResult<(StatusCode, Json<Ingested<FixId>>)> {
    let ctx = Ctx::new(&svc, &c, &headers)?;
    let team = ctx.team()?;
    let rt = ctx.contest.clone();
    let r = blocking(move || rt.submit_fix(&team, &req.id, req.commit, Ok(req.covers))).await?;
    Ok((StatusCode::ACCEPTED, Json(r)))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClaimedReport {
    pub id: ReportId,
    pub breaker: TeamId,
    pub category: Option<BugCategory>,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub evidence: Option<Evidence>,
}

/// An entry in the judge's queue.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum QueueEntry {
    Fix {
        item: String,
        decision_id: String,
        fix: FixId,
        team: TeamId,
        commit: String,
        covers: Vec<ClaimedReport>,
        verification: Option<FixVerification>,
    },
    /// A report the automated judge could not settle, such as an oracle
    /// disagreement.
    Report {
        item: String,
        decision_id: String,
        report: ClaimedReport,
        target: Option<TeamId>,
    },
}

fn claimed(s: &ContestState, id: &ReportId) -> ClaimedReport {
    match s.reports.get(id) {
        Some(r) => ClaimedReport {
            id: id.clone(),
            breaker: r.breaker.clone(),
            category: r.category(),
            status: r.status.clone(),
            evidence: r.report.as_ref().map(|b| b.evidence.clone()),
        },
        None => ClaimedReport {
            id: id.clone(),
            breaker: TeamId::new(""),
            category: None,
            status: Status::Error { note: "unknown report".into() },
            evidence: None,
        },
    }
}

fn entry(s: &ContestState, item: &QueueItem) -> Option<QueueEntry> {
    let decision_id = s.decision_id(item)?;
    Some(match item {
        QueueItem::Fix(id) => {
            let f = &s.fixes[id];
            QueueEntry::Fix {
                item: item.key(),
                decision_id,
                fix: id.clone(),
                team: f.team.clone(),
                commit: f.commit.clone(),
                covers: f.covers.iter().map(|r| claimed(s, r)).collect(),
                verification: f.verification.clone(),
            }
        }
        QueueItem::Report(id) => QueueEntry::Report {
            item: item.key(),
            decision_id,
            report: claimed(s, id),
            target: s.reports[id].target().cloned(),
        },
    })
}

async fn queue(State(svc): State<Arc<Service>>, Path(c): Path<String>, headers: HeaderMap) -> ApiResult<Json<Vec<QueueEntry>>> {
    let ctx = Ctx::new(&svc, &c, &headers)?;
    ctx.judge()?;
    let s = ctx.contest.state();
    Ok(Json(s.queue().iter().filter_map(|i| entry(&s, i)).collect()))
}

/// Everything a judge needs to decide one item.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ItemDetail {
    pub entry: QueueEntry,
    /// The fix's patch against the published submission.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diff: Option<String>,
    /// Audit bundles by report id.
    pub bundles: BTreeMap<ReportId, AuditBundle>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<BreakReport>,
}

async fn item(
    State(svc): State<Arc<Service>>,
    Path((c, key)): Path<(String, String)>,
    headers: HeaderMap,
) -> ApiResult<Json<ItemDetail>> {
    let ctx = Ctx::new(&svc, &c, &headers)?;
    ctx.judge()?;
    let rt = ctx.contest.clone();
    blocking(move || {
        let item = QueueItem::parse(&key).ok_or_else(|| ServiceError::BadRequest(format!("bad item {key}")))?;
        let s = rt.state();
        let entry = entry(&s, &item).ok_or_else(|| ServiceError::NotFound(format!("{key} is not awaiting a decision")))?;
        let reports: Vec<ReportId> = match &item {
            QueueItem::Fix(id) => s.fixes[id].covers.clone(),
            QueueItem::Report(id) => vec![id.clone()],
        };
        let mut bundles = BTreeMap::new();
        for r in &reports {
            if let Some(dir) = s.reports.get(r).and_then(|r| r.audit.as_ref()) {
                bundles.insert(r.clone(), AuditBundle::read(dir)?);
            }
        }
        let (diff, report) = match &item {
            QueueItem::Fix(id) => (rt.fix_diff(id).ok(), None),
            QueueItem::Report(id) => (None, s.reports[id].report.clone()),
        };
        Ok(Json(ItemDetail { entry, diff, bundles, report }))
    })
    .await
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecisionRequest {
    pub decision_id: String,
    pub accept: bool,
    pub note: String,
}

async fn decide(
    State(svc): State<Arc<Service>>,
    Path((c, key)): Path<(String, String)>,
    headers: HeaderMap,
    Json(req): Json<DecisionRequest>,
) -> ApiResult<Json<DecisionOutcome>> {
    let ctx = Ctx::new(&svc, &c, &headers)?;
    ctx.judge()?;
    ctx.contest.decide(&key, &req.decision_id, req.accept, &req.note).map(Json)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlagRequest {
    /// Supplied by the client so a repeated request is recognized.
    #[serde(default)]
    pub decision_id: Option<String>,
    pub target: TeamId,
    pub note: String,
}

async fn flag(
    State(svc): State<Arc<Service>>,
    Path(c): Path<String>,
    headers: HeaderMap,
    Json(req): Json<FlagRequest>,
) -> ApiResult<Json<DecisionOutcome>> {
    let ctx = Ctx::new(&svc, &c, &headers)?;
    ctx.judge()?;
    let id = req.decision_id.unwrap_or_else(|| format!("flag:{}#{}", req.target, ctx.contest.state().seq));
    ctx.contest.flag(&id, &req.target, &req.note).map(Json)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseRequest {
    pub to: Phase,
}

async fn advance(
    State(svc): State<Arc<Service>>,
    Path(c): Path<String>,
    headers: HeaderMap,
    Json(req): Json<PhaseRequest>,
) -> ApiResult<Json<ContestSummary>> {
    let ctx = Ctx::new(&svc, &c, &headers)?;
    ctx.judge()?;
    let rt = ctx.contest.clone();
    blocking(move || {
        rt.advance(req.to)?;
        Ok(Json(summary(&rt)))
    })
    .await
}

async fn poll(State(svc): State<Arc<Service>>, Path(c): Path<String>, headers: HeaderMap) -> ApiResult<StatusCode> {
    let ctx = Ctx::new(&svc, &c, &headers)?;
    ctx.judge()?;
    let rt = ctx.contest.clone();
    blocking(move || rt.poll()).await?;
    Ok(StatusCode::NO_CONTENT)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EventView {
    pub seq: u64,
    pub at_ms: u64,
    pub hash: String,
    pub event: super::events::Event,
}

async fn events(State(svc): State<Arc<Service>>, Path(c): Path<String>, headers: HeaderMap) -> ApiResult<Json<Vec<EventView>>> {
    let ctx = Ctx::new(&svc, &c, &headers)?;
    ctx.judge()?;
    Ok(Json(
        ctx.contest
            .records()
            .into_iter()
            .map(|r| EventView { seq: r.seq, at_ms: r.at_ms, hash: r.hash, event: r.event })
            .collect(),
    ))
}
