// Copyright (C) 2026 The breakit Authors. All rights reserved.
//
// SPDX-License-Identifier: Apache-2.0

mod support;

use std::path::Path;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use breakit_core::scoring::{BugCategory, TeamId};
use breakit_engine::judge::PublicChallenge;
use breakit_engine::service::config::{ContestConfig, EngineConfig, TeamConfig};
use breakit_engine::service::events::{Event, Phase};
use breakit_engine::service::{api, ContestRuntime, Operation, Service, ServiceError};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use support::attacks;
use support::contest::{log_manifest, report_json, Repo};
use tower::ServiceExt;

fn contest_cfg(id: &str, extra: &str, teams: &[(&str, &Path)]) -> ContestConfig {
    let mut text = format!(
        "id = \"{id}\"\nproblem = \"secure_log\"\nseed = 5\nmetrics = [\"space\"]\nchallenges = {{ count = 2, min_events = 10, max_events = 20 }}\n{extra}\n"
    );
    for (t, repo) in teams {
        text += &format!("[[team]]\nid = \"{t}\"\nname = \"{t}\"\nrepository = \"{}\"\ntoken = \"{t}-token\"\n", repo.display());
    }
    toml::from_str(&text).unwrap()
}

fn service(store: &Path, contests: Vec<ContestConfig>) -> Arc<Service> {
    let cfg = EngineConfig {
        store: store.to_path_buf(),
        listen: "127.0.0.1:0".into(),
        judge_token: "judge-token".into(),
        workers: Some(4),
        poll_interval_secs: 60,
        oracles: Some(support::oracles()),
        contests,
    };
    cfg.validate().unwrap();
    Arc::new(Service::open(&cfg).unwrap())
}

struct Api {
    app: Router,
    rt: tokio::runtime::Runtime,
}

impl Api {
    fn new(svc: Arc<Service>) -> Self {
        Self { app: api::router(svc), rt: tokio::runtime::Runtime::new().unwrap() }
    }

    fn call(&self, method: Method, uri: &str, token: Option<&str>, body: Option<Value>) -> (StatusCode, Value) {
        let mut req = Request::builder().method(method).uri(uri);
        if let Some(t) = token {
            req = req.header("authorization", format!("Bearer {t}"));
        }
        let body = match body {
            Some(v) => {
                req = req.header("content-type", "application/json");
                Body::from(v.to_string())
            }
            None => Body::empty(),
        };
        self.rt.block_on(async {
            let resp = self.app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
            let status = resp.status();
            let bytes = resp.into_body().collect().await.unwrap().to_bytes();
            let v = serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()));
            (status, v)
        })
    }

    fn get(&self, uri: &str, token: Option<&str>) -> (StatusCode, Value) {
        self.call(Method::GET, uri, token, None)
    }

    fn post(&self, uri: &str, token: Option<&str>, body: Value) -> (StatusCode, Value) {
        self.call(Method::POST, uri, token, Some(body))
    }
}

const J: Option<&str> = Some("judge-token");

fn totals(api: &Api, c: &str) -> Vec<(String, String, String)> {
    let (s, b) = api.get(&format!("/v1/contests/{c}/scoreboard"), J);
    assert_eq!(s, StatusCode::OK, "{b}");
    b["teams"]
        .as_array()
        .unwrap()
        .iter()
        .map(|t| (t["team"].as_str().unwrap().into(), t["resilience"].as_str().unwrap().into(), t["break_total"].as_str().unwrap().into()))
        .collect()
}

fn decided_events(rt: &ContestRuntime) -> usize {
    rt.records().iter().filter(|r| matches!(r.event, Event::Decided { .. })).count()
}

#[test]
fn privacy_breaks_grouped_by_an_accepted_fix_through_the_api() {
    let tmp = tempfile::tempdir().unwrap();
    let p = Repo::init(&tmp.path().join("p"));
    p.write("breakit.toml", &log_manifest("plaintext"));
    p.commit("plaintext");
    let a = Repo::init(&tmp.path().join("a"));
    a.write("breakit.toml", &log_manifest("sound"));
    a.commit("sound");
    let b = Repo::init(&tmp.path().join("b"));
    b.write("breakit.toml", &log_manifest("sound"));
    b.commit("sound");
    let svc = service(
        &tmp.path().join("store"),
        vec![contest_cfg("live", "", &[("p", &p.path), ("a", &a.path), ("b", &b.path)])],
    );
    let rt = svc.contest("live").unwrap().clone();
    let api = Api::new(svc);

    let (s, list) = api.get("/v1/contests", None);
    assert_eq!(s, StatusCode::OK);
    assert_eq!(list[0]["phase"], "registration");

    assert_eq!(api.post("/v1/contests/live/phase", Some("a-token"), json!({"to": "build"})).0, StatusCode::FORBIDDEN);
    assert_eq!(api.post("/v1/contests/live/phase", None, json!({"to": "build"})).0, StatusCode::UNAUTHORIZED);
    assert_eq!(api.post("/v1/contests/live/phase", J, json!({"to": "break"})).0, StatusCode::CONFLICT);
    assert_eq!(api.post("/v1/contests/live/phase", J, json!({"to": "build"})).0, StatusCode::OK);
    assert_eq!(api.post("/v1/contests/live/poll", J, json!({})).0, StatusCode::NO_CONTENT);
    let (_, dash) = api.get("/v1/contests/live/teams/p", Some("p-token"));
    assert_eq!(dash["submission"]["qualified"], true, "{dash}");
    assert_eq!(api.get("/v1/contests/live/teams/p", Some("a-token")).0, StatusCode::FORBIDDEN);

    assert_eq!(api.post("/v1/contests/live/phase", J, json!({"to": "break"})).0, StatusCode::OK);
    let (s, ch) = api.get("/v1/contests/live/targets/p/challenges", Some("a-token"));
    assert_eq!(s, StatusCode::OK);
    let ch: Vec<PublicChallenge> = serde_json::from_value(ch).unwrap();
    assert_eq!(ch.len(), 2);
    let secret = ch.iter().find(|c| c.transcript.is_none()).unwrap();
    let (_, dash) = api.get("/v1/contests/live/teams/a", Some("a-token"));
    let view: Vec<&str> = dash["targets"].as_array().unwrap().iter().map(|t| t["team"].as_str().unwrap()).collect();
    assert_eq!(view.len(), 2);
    assert!(!view.contains(&"a"));

    let mut ids = Vec::new();
    for breaker in ["a", "b"] {
        let evidence = attacks::plaintext_leak(secret).unwrap();
        let body: Value = serde_json::from_str(&report_json("leak", breaker, "p", BugCategory::Privacy, evidence)).unwrap();
        let (s, r) = api.post("/v1/contests/live/breaks", Some(&format!("{breaker}-token")), body.clone());
        assert_eq!(s, StatusCode::ACCEPTED, "{r}");
        assert!(r.get("rejected").is_none(), "{r}");
        ids.push(r["id"].as_str().unwrap().to_owned());
        // The same report again is a conflict and records nothing.
        let seq = rt.state().seq;
        assert_eq!(api.post("/v1/contests/live/breaks", Some(&format!("{breaker}-token")), body).0, StatusCode::CONFLICT);
        assert_eq!(rt.state().seq, seq);
    }
    rt.wait_idle();
    let (_, dash) = api.get("/v1/contests/live/teams/a", Some("a-token"));
    assert_eq!(dash["reports"][0]["status"]["status"], "accepted", "{dash}");
    let board = totals(&api, "live");
    assert_eq!(board[0], ("a".into(), "0.00".into(), "100.00".into()));
    assert_eq!(board[1], ("b".into(), "0.00".into(), "100.00".into()));
    assert_eq!(board[2], ("p".into(), "-100.00".into(), "0.00".into()));
    let at_break = api.get("/v1/contests/live/scoreboard.csv?at=break", J).1;

    assert_eq!(api.post("/v1/contests/live/phase", J, json!({"to": "fix"})).0, StatusCode::OK);
    p.write("breakit.toml", &log_manifest("sound"));
    let fixed = p.commit("encrypt the log");
    let fix = json!({"id": "f1", "commit": fixed, "covers": ids});
    // A fix to one's own submission cannot cover reports against another.
    let (s, r) = api.post("/v1/contests/live/fixes", Some("a-token"), json!({"id": "f1", "covers": ids}));
    assert_eq!(s, StatusCode::ACCEPTED);
    assert!(r["rejected"].as_str().unwrap().contains("not against"), "{r}");
    let (s, r) = api.post("/v1/contests/live/fixes", Some("p-token"), fix);
    assert_eq!(s, StatusCode::ACCEPTED, "{r}");
    rt.wait_idle();

    assert_eq!(api.get("/v1/contests/live/judge/queue", Some("p-token")).0, StatusCode::FORBIDDEN);
    let (_, q) = api.get("/v1/contests/live/judge/queue", J);
    assert_eq!(q.as_array().unwrap().len(), 1, "{q}");
    let entry = &q[0];
    assert_eq!(entry["kind"], "fix");
    assert_eq!(entry["verification"]["passed"], true, "{entry}");
    let item = entry["item"].as_str().unwrap().to_owned();
    let decision_id = entry["decision_id"].as_str().unwrap().to_owned();
    let (s, detail) = api.get(&format!("/v1/contests/live/judge/items/{item}"), J);
    assert_eq!(s, StatusCode::OK, "{detail}");
    assert!(detail["diff"].as_str().unwrap().contains("--flavor"));
    assert_eq!(detail["bundles"].as_object().unwrap().len(), 2);

    let uri = format!("/v1/contests/live/judge/items/{item}/decision");
    assert_eq!(api.post(&uri, J, json!({"decision_id": decision_id, "accept": true, "note": " "})).0, StatusCode::BAD_REQUEST);
    assert_eq!(api.post(&uri, J, json!({"decision_id": "fix:p:f1#1", "accept": true, "note": "x"})).0, StatusCode::CONFLICT);
    let decide = json!({"decision_id": decision_id, "accept": true, "note": "one defect: the log was cleartext"});
    let (s, first) = api.post(&uri, J, decide.clone());
    assert_eq!(s, StatusCode::OK);
    assert_eq!(first["duplicate"], false);
    let (s, again) = api.post(&uri, J, decide);
    assert_eq!(s, StatusCode::OK);
    assert_eq!(again["duplicate"], true);
    assert_eq!(decided_events(&rt), 1);

    let board = totals(&api, "live");
    assert_eq!(board[0].2, "50.00");
    assert_eq!(board[1].2, "50.00");
    assert_eq!(board[2].1, "-100.00");
    assert_eq!(api.get("/v1/contests/live/scoreboard.csv?at=break", J).1, at_break);

    let (s, ev) = api.get("/v1/contests/live/events", J);
    assert_eq!(s, StatusCode::OK);
    assert_eq!(ev.as_array().unwrap().len() as u64, rt.state().seq);
}

#[test]
fn hidden_scores_and_registration() {
    let tmp = tempfile::tempdir().unwrap();
    let svc = service(&tmp.path().join("store"), vec![contest_cfg("hidden", "hide_scores = true", &[])]);
    let api = Api::new(svc);
    let team = json!({"id": "t1", "name": "T1", "repository": "/nonexistent", "token": "t1-token"});
    assert_eq!(api.post("/v1/contests/hidden/teams", Some("nobody"), team.clone()).0, StatusCode::UNAUTHORIZED);
    assert_eq!(api.post("/v1/contests/hidden/teams", J, team.clone()).0, StatusCode::CREATED);
    assert_eq!(api.post("/v1/contests/hidden/teams", J, team).0, StatusCode::CONFLICT);
    assert_eq!(api.get("/v1/contests/hidden/scoreboard", None).0, StatusCode::UNAUTHORIZED);
    assert_eq!(api.get("/v1/contests/hidden/scoreboard", Some("t1-token")).0, StatusCode::FORBIDDEN);
    assert_eq!(api.get("/v1/contests/hidden/scoreboard", J).0, StatusCode::OK);
    assert_eq!(api.get("/v1/contests/nope", None).0, StatusCode::NOT_FOUND);
    let (_, c) = api.get("/v1/contests/hidden", None);
    assert_eq!(c["teams"][0]["id"], "t1");
    for to in ["build", "break", "fix", "closed"] {
        assert_eq!(api.post("/v1/contests/hidden/phase", J, json!({"to": to})).0, StatusCode::OK);
        if to == "build" {
            assert_eq!(api.post("/v1/contests/hidden/poll", J, json!({})).0, StatusCode::NO_CONTENT);
        }
    }
    assert_eq!(api.get("/v1/contests/hidden/scoreboard", None).0, StatusCode::OK);
    let (_, dash) = api.get("/v1/contests/hidden/teams/t1", Some("t1-token"));
    assert!(dash["unreachable"].is_string(), "{dash}");
}

fn attempt(rt: &Arc<ContestRuntime>, op: Operation, phase: Phase) -> Result<(), ServiceError> {
    let t = TeamId::new("t1");
    match op {
        Operation::RegisterTeam => rt.register(&TeamConfig {
            id: TeamId::new(format!("late-{}", phase.as_str())),
            name: "late".into(),
            members: vec![],
            repository: "/nonexistent".into(),
            branch: "HEAD".into(),
            token: format!("late-{}", phase.as_str()),
        }),
        Operation::Poll => rt.poll(),
        Operation::SubmitBreak => {
            rt.submit_break(&t, &report_json("r", "t1", "t2", BugCategory::Crash, attacks::long_name_crash()), None, None).map(drop)
        }
        Operation::SubmitFix => rt.submit_fix(&t, "f", None, Ok(vec![])).map(drop),
        Operation::DecideFix => rt.decide("fix:t1:f", "fix:t1:f#1", true, "n").map(drop),
        Operation::DecideReport => rt.decide("report:t1:r", "report:t1:r#1", true, "n").map(drop),
        Operation::Flag => rt.flag(&format!("flag-{}", phase.as_str()), &t, "n").map(drop),
        Operation::Advance => match phase.next() {
            Some(_) => Ok(()),
            None => rt.advance(Phase::Closed),
        },
    }
}

#[test]
fn every_mutation_is_gated_by_phase() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("missing");
    let svc = service(&tmp.path().join("store"), vec![contest_cfg("gates", "", &[("t1", &missing), ("t2", &missing)])]);
    let rt = svc.contest("gates").unwrap().clone();
    let mut phase = Phase::Registration;
    loop {
        for op in Operation::ALL {
            let before = rt.state().seq;
            let r = attempt(&rt, op, phase);
            rt.wait_idle();
            if op.allowed_in(phase) {
                assert!(!matches!(r, Err(ServiceError::WrongPhase(_))), "{op:?} in {phase:?}: {r:?}");
            } else {
                assert!(matches!(r, Err(ServiceError::WrongPhase(_))), "{op:?} in {phase:?}: {r:?}");
                assert_eq!(rt.state().seq, before, "{op:?} in {phase:?} recorded an event");
            }
        }
        // Skipping ahead or going back is refused too.
        assert!(matches!(rt.advance(Phase::Registration), Err(ServiceError::WrongPhase(_))));
        match phase.next() {
            Some(n) => {
                rt.advance(n).unwrap();
                phase = n;
            }
            None => break,
        }
    }
    assert_eq!(rt.state().phase, Phase::Closed);
}

#[test]
fn reopening_the_store_restores_the_contest() {
    let tmp = tempfile::tempdir().unwrap();
    let store = tmp.path().join("store");
    let missing = tmp.path().join("missing");
    let board = {
        let svc = service(&store, vec![contest_cfg("durable", "snapshot_every = 3", &[("t1", &missing)])]);
        let rt = svc.contest("durable").unwrap();
        rt.advance(Phase::Build).unwrap();
        rt.poll().unwrap();
        rt.advance(Phase::Break).unwrap();
        (rt.state(), rt.scoreboard(None).unwrap().to_csv())
    };
    let svc = service(&store, vec![contest_cfg("durable", "snapshot_every = 3", &[("t1", &missing)])]);
    let rt = svc.contest("durable").unwrap();
    assert_eq!(*rt.state(), *board.0);
    assert_eq!(rt.scoreboard(None).unwrap().to_csv(), board.1);
    assert!(store.join("durable/snapshot.json").is_file());
}
