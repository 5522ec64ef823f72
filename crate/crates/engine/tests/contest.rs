// Copyright (C) 2026 The breakit Authors. All rights reserved.
//
// SPDX-License-Identifier: Apache-2.0

mod support;

use std::path::Path;
use std::process::Command;

use breakit_core::scoring::{FixId, ReportId};
use breakit_engine::judge::{RejectReason, Status};
use breakit_engine::service::state::{ContestState, FixStatus};
use breakit_engine::service::store::read_log;
use support::contest::{golden, GOLDEN_CSV};

fn engine(args: &[&std::ffi::OsStr]) -> String {
    let out = Command::new(env!("CARGO_BIN_EXE_engine")).args(args).output().unwrap();
    assert!(out.status.success(), "engine {args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

const AT_BREAK_END: &str = "team,ship,resilience,break_total
alpha,250.00,0.00,75.00
bravo,250.00,-50.00,0.00
charlie,250.00,-100.00,25.00
delta,NQ,0.00,50.00
";

fn status(state: &ContestState, id: &str) -> Status {
    state.reports[&ReportId::new(id)].status.clone()
}

#[test]
fn scripted_mini_contest_and_replay() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = golden(tmp.path());
    let live = engine(&["run-contest".as_ref(), cfg.as_os_str()]);
    assert_eq!(live, GOLDEN_CSV);

    let log = tmp.path().join("store/golden/events.jsonl");
    assert_eq!(engine(&["replay".as_ref(), log.as_os_str()]), live);
    assert_eq!(engine(&["replay".as_ref(), log.as_os_str(), "--at".as_ref(), "break".as_ref()]), AT_BREAK_END);

    let records = read_log(&log).unwrap();
    let state = ContestState::replay(records.iter().map(|r| &r.event)).unwrap();
    assert_eq!(status(&state, "charlie:r2"), Status::Rejected { why: RejectReason::SelfBreak });
    assert_eq!(status(&state, "delta:r2"), Status::Rejected { why: RejectReason::NoDifference });
    assert_eq!(status(&state, "delta:r3"), Status::Rejected { why: RejectReason::UnknownTarget });
    assert_eq!(state.fixes[&FixId::new("bravo:f1")].status(), FixStatus::Accepted);
    assert_eq!(state.fixes[&FixId::new("charlie:f1")].status(), FixStatus::RejectedByJudge);
    assert_eq!(state.targets.len(), 3);
    assert!(state.challenges.values().all(|c| c.len() == 2));
    assert_eq!(state.flags.len(), 1);

    // A second run refuses the used store.
    let out = Command::new(env!("CARGO_BIN_EXE_engine")).arg("run-contest").arg(&cfg).output().unwrap();
    assert!(!out.status.success());
    assert_valid_audit(Path::new(&tmp.path().join("store/golden/audit")));
}

fn assert_valid_audit(dir: &Path) {
    let bundles: Vec<_> = std::fs::read_dir(dir).unwrap().collect();
    assert!(!bundles.is_empty());
    for b in bundles {
        assert!(b.unwrap().path().join("bundle.json").is_file());
    }
}
