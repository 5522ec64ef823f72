// Copyright (C) 2026 The breakit Authors. All rights reserved.
//
// SPDX-License-Identifier: Apache-2.0

//! Contestant repositories and the scripted mini-contest.

use std::path::{Path, PathBuf};
use std::process::Command;

use breakit_core::scoring::{BugCategory, TeamId};
use breakit_engine::judge::{BreakReport, Evidence};

use super::attacks;

pub fn git(dir: &Path, args: &[&str]) -> String {
    let out = Command::new("git")
        .arg("-C")
        .arg(dir)
        .args(["-c", "user.name=t", "-c", "user.email=t@example.com"])
        .args(args)
        .output()
        .unwrap();
    assert!(out.status.success(), "git {args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap().trim().to_owned()
}

pub struct Repo {
    pub path: PathBuf,
}

impl Repo {
    pub fn init(path: &Path) -> Self {
        std::fs::create_dir_all(path).unwrap();
        git(path, &["init", "-q", "-b", "main"]);
        Self { path: path.to_path_buf() }
    }

    pub fn write(&self, rel: &str, text: &str) -> &Self {
        let p = self.path.join(rel);
        std::fs::create_dir_all(p.parent().unwrap()).unwrap();
        std::fs::write(p, text).unwrap();
        self
    }

    pub fn commit(&self, msg: &str) -> String {
        git(&self.path, &["add", "-A"]);
        git(&self.path, &["commit", "-q", "--allow-empty", "-m", msg]);
        git(&self.path, &["rev-parse", "HEAD"])
    }

    /// Commits `manifest` on a side branch tagged `tag`, leaving `main`
    /// checked out.
    pub fn tagged_fix(&self, tag: &str, manifest: &str) -> String {
        git(&self.path, &["checkout", "-q", "-b", &format!("branch-{tag}")]);
        self.write("breakit.toml", manifest);
        let c = self.commit(tag);
        git(&self.path, &["tag", tag]);
        git(&self.path, &["checkout", "-q", "main"]);
        c
    }

    pub fn url(&self) -> String {
        self.path.display().to_string()
    }
}

pub fn log_manifest(flavor: &str) -> String {
    format!(
        "language = \"rust\"\n[entry]\nlogappend = [\"{}\", \"--flavor\", \"{flavor}\"]\nlogread = [\"{}\", \"--flavor\", \"{flavor}\"]\n",
        env!("CARGO_BIN_EXE_fixture-logappend"),
        env!("CARGO_BIN_EXE_fixture-logread"),
    )
}

/// A manifest that names only one entry point, so the build fails.
pub fn incomplete_manifest() -> String {
    format!("[entry]\nlogappend = [\"{}\"]\n", env!("CARGO_BIN_EXE_fixture-logappend"))
}

pub fn report_json(id: &str, breaker: &str, target: &str, category: BugCategory, evidence: Evidence) -> String {
    let r = BreakReport { breaker: TeamId::new(breaker), target: TeamId::new(target), ..attacks::report(id, category, evidence) };
    serde_json::to_string_pretty(&r).unwrap()
}

/// The final scoreboard the mini-contest must produce, worked by hand from
/// M = 50:
///
/// * every qualified submission passes its 3 mandatory tests (3 × 50) and 2
///   optional tests (2 × 25), and all log sizes tie so each gets the full
///   50 for the one space test: ship 250;
/// * alpha and charlie both find bravo's room-0 bug (correctness, 25); the
///   accepted fix groups them, so bravo loses 25 and each finder gets 12.5;
/// * alpha and delta both crash charlie (crash, 50 each); the judge rejects
///   charlie's fix as covering two defects, so charlie loses 100;
/// * delta does not qualify but still breaks.
pub const GOLDEN_CSV: &str = "team,ship,resilience,break_total
alpha,250.00,0.00,62.50
bravo,250.00,-25.00,0.00
charlie,250.00,-100.00,12.50
delta,NQ,0.00,50.00
";

/// Writes the repositories and configuration of the mini-contest under
/// `root` and returns the configuration path.
pub fn golden(root: &Path) -> PathBuf {
    let repos = root.join("repos");
    let crash = || attacks::long_name_crash();

    let alpha = Repo::init(&repos.join("alpha"));
    alpha
        .write("breakit.toml", &log_manifest("sound"))
        .write("breaks/r1.json", &report_json("r1", "alpha", "bravo", BugCategory::Correctness, attacks::room_zero_script()))
        .write("breaks/r2.json", &report_json("r2", "alpha", "charlie", BugCategory::Crash, crash()));
    alpha.commit("submission");

    let bravo = Repo::init(&repos.join("bravo"));
    bravo
        .write("breakit.toml", &log_manifest("quirky"))
        .write("fixes/f1.json", r#"{"covers": ["alpha:r1", "charlie:r1"], "commit": "fix-1"}"#);
    bravo.commit("submission");
    bravo.tagged_fix("fix-1", &log_manifest("sound"));

    let charlie = Repo::init(&repos.join("charlie"));
    charlie
        .write("breakit.toml", &log_manifest("crash"))
        .write("breaks/r1.json", &report_json("r1", "charlie", "bravo", BugCategory::Correctness, attacks::room_zero_script()))
        .write("breaks/r2.json", &report_json("r2", "charlie", "charlie", BugCategory::Crash, crash()))
        .write("fixes/f1.json", r#"{"covers": ["alpha:r2", "delta:r1"], "commit": "fix-1"}"#);
    charlie.commit("submission");
    charlie.tagged_fix("fix-1", &log_manifest("sound"));

    let delta = Repo::init(&repos.join("delta"));
    delta
        .write("breakit.toml", &incomplete_manifest())
        .write("breaks/r1.json", &report_json("r1", "delta", "charlie", BugCategory::Crash, crash()))
        .write("breaks/r2.json", &report_json("r2", "delta", "alpha", BugCategory::Correctness, attacks::room_zero_script()))
        .write("breaks/r3.json", &report_json("r3", "delta", "echo", BugCategory::Crash, crash()));
    delta.commit("submission");

    let team = |id: &str| format!("[[contest.team]]\nid = \"{id}\"\nname = \"Team {id}\"\nrepository = \"repos/{id}\"\ntoken = \"{id}-token\"\n\n");
    let mut cfg = String::from(
        "store = \"store\"\njudge_token = \"judge-token\"\nworkers = 4\n\n[[contest]]\nid = \"golden\"\nproblem = \"secure_log\"\nseed = 11\nmetrics = [\"space\"]\nchallenges = { count = 2, min_events = 10, max_events = 20 }\n\n",
    );
    for id in ["alpha", "bravo", "charlie", "delta"] {
        cfg += &team(id);
    }
    let steps = [
        "action = \"advance\"\nto = \"build\"",
        "action = \"poll\"",
        "action = \"advance\"\nto = \"break\"",
        "action = \"poll\"",
        "action = \"flag\"\ntarget = \"bravo\"\nnote = \"variable names look minified\"",
        "action = \"advance\"\nto = \"fix\"",
        "action = \"poll\"",
        "action = \"decide_fix\"\nfix = \"bravo:f1\"\naccept = true\nnote = \"one change to room-0 handling\"",
        "action = \"decide_fix\"\nfix = \"charlie:f1\"\naccept = false\nnote = \"replaces the whole implementation\"",
        "action = \"advance\"\nto = \"closed\"",
    ];
    for s in steps {
        cfg += &format!("[[contest.script]]\n{s}\n\n");
    }
    let path = root.join("engine.toml");
    std::fs::write(&path, cfg).unwrap();
    path
}
