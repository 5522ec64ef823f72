// Copyright (C) 2026 The breakit Authors. All rights reserved.
//
// SPDX-License-Identifier: Apache-2.0

//! The engine configuration file.
//!
//! ```toml
//! store = "store"
//! listen = "127.0.0.1:8080"
//! judge_token = "organizer-secret"
//! poll_interval_secs = 60
//!
//! [[contest]]
//! id = "fall"
//! problem = "atm"            # or "secure_log"
//! seed = 7
//! scoring = { multiplier = 50, per_target_report_limit = 5 }
//! allow_dependencies = ["libsodium"]
//! deadlines = { build = 1767225600, break = 1767830400 }
//!
//! [[contest.team]]
//! id = "team-a"
//! name = "Team A"
//! repository = "/srv/git/team-a.git"
//! token = "a-secret"
//!
//! [[contest.script]]
//! action = "advance"
//! to = "build"
//! ```
//!
//! Relative paths are taken from the configuration file's directory.
//! `script` lists the steps `engine run-contest` performs; deadlines are unix
//! seconds at which `engine serve` ends each phase.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use breakit_core::scoring::{FixId, ReportId, ScoringConfig, TeamId};
use serde::{Deserialize, Serialize};

use super::events::{default_branch, Phase};
use crate::judge::{ChallengeConfig, Oracles, Problem};
use crate::mitm::SessionConfig;
use crate::sandbox::Limits;
use crate::submission::Metric;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineConfig {
    pub store: PathBuf,
    #[serde(default = "default_listen")]
    pub listen: String,
    pub judge_token: String,
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default = "default_poll")]
    pub poll_interval_secs: u64,
    #[serde(default)]
    pub oracles: Option<Oracles>,
    #[serde(rename = "contest", default)]
    pub contests: Vec<ContestConfig>,
}

fn default_listen() -> String {
    "127.0.0.1:8080".into()
}

fn default_poll() -> u64 {
    60
}

fn default_snapshot_every() -> u64 {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContestConfig {
    pub id: String,
    pub problem: Problem,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub scoring: ScoringConfig,
    #[serde(default)]
    pub hide_scores: bool,
    #[serde(default)]
    pub limits: Limits,
    #[serde(default = "Limits::build")]
    pub build_limits: Limits,
    #[serde(default)]
    pub session: SessionConfig,
    #[serde(default)]
    pub challenges: ChallengeConfig,
    /// Performance metrics to score; all by default.
    #[serde(default)]
    pub metrics: Option<Vec<Metric>>,
    #[serde(default)]
    pub allow_dependencies: Vec<String>,
    #[serde(default)]
    pub deadlines: BTreeMap<Phase, u64>,
    #[serde(default = "default_snapshot_every")]
    pub snapshot_every: u64,
    #[serde(rename = "team", default)]
    pub teams: Vec<TeamConfig>,
    #[serde(default)]
    pub script: Option<Vec<Step>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TeamConfig {
    pub id: TeamId,
    pub name: String,
    #[serde(default)]
    pub members: Vec<String>,
    pub repository: String,
    #[serde(default = "default_branch")]
    pub branch: String,
    pub token: String,
}

/// One step of a scripted contest run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case", deny_unknown_fields)]
pub enum Step {
    Advance { to: Phase },
    Poll,
    DecideFix { fix: FixId, accept: bool, note: String },
    DecideReport { report: ReportId, accept: bool, note: String },
    Flag { target: TeamId, note: String },
}

impl ContestConfig {
    /// Advance through every phase, polling in each active one.
    pub fn default_script() -> Vec<Step> {
        let mut v = Vec::new();
        for to in [Phase::Build, Phase::Break, Phase::Fix] {
            v.push(Step::Advance { to });
            v.push(Step::Poll);
        }
        v.push(Step::Advance { to: Phase::Closed });
        v
    }
}

fn valid_id(s: &str) -> bool {
    !s.is_empty() && s.len() <= 64 && s.bytes().all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'-' || b == b'_')
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("reading {0}: {1}")]
    Read(PathBuf, std::io::Error),
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Invalid(String),
}

impl EngineConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read(path.to_path_buf(), e))?;
        let mut cfg: EngineConfig = toml::from_str(&text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve(base);
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve(&mut self, base: &Path) {
        self.store = base.join(&self.store);
        for c in &mut self.contests {
            for t in &mut c.teams {
                let p = base.join(&t.repository);
                if !t.repository.contains("://") && p.exists() {
                    t.repository = p.display().to_string();
                }
            }
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |s: String| Err(ConfigError::Invalid(s));
        let mut ids = std::collections::BTreeSet::new();
        for c in &self.contests {
            if !valid_id(&c.id) || !ids.insert(&c.id) {
                return bad(format!("bad or duplicate contest id {:?}", c.id));
            }
            c.scoring.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
            let mut teams = std::collections::BTreeSet::new();
            for t in &c.teams {
                if !valid_id(t.id.as_str()) || !teams.insert(&t.id) {
                    return bad(format!("bad or duplicate team id {:?}", t.id.as_str()));
                }
                if t.token.is_empty() || t.token == self.judge_token {
                    return bad(format!("team {} needs its own token", t.id));
                }
            }
        }
        if self.judge_token.is_empty() {
            return bad("judge_token is empty".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_the_documented_example() {
        let text = r#"
store = "store"
judge_token = "j"

[[contest]]
id = "fall"
problem = "atm"
scoring = { multiplier = 50, per_target_report_limit = 5 }
deadlines = { build = 10, break = 20 }

[[contest.team]]
id = "team-a"
name = "Team A"
repository = "/srv/git/team-a.git"
token = "a"

[[contest.script]]
action = "advance"
to = "build"

[[contest.script]]
action = "decide_fix"
fix = "team-a:f1"
accept = true
note = "one bug"
"#;
        let cfg: EngineConfig = toml::from_str(text).unwrap();
        cfg.validate().unwrap();
        let c = &cfg.contests[0];
        assert_eq!(c.deadlines[&Phase::Break], 20);
        assert_eq!(c.teams[0].branch, "HEAD");
        assert_eq!(c.script.as_ref().unwrap()[0], Step::Advance { to: Phase::Build });
        assert_eq!(cfg.poll_interval_secs, 60);
    }

    #[test]
    fn rejects_bad_ids_and_shared_tokens() {
        let mut cfg: EngineConfig = toml::from_str(
            "store = \"s\"\njudge_token = \"j\"\n[[contest]]\nid = \"c\"\nproblem = \"secure_log\"\n[[contest.team]]\nid = \"a\"\nname = \"A\"\nrepository = \"r\"\ntoken = \"j\"\n",
        )
        .unwrap();
        assert!(cfg.validate().is_err());
        cfg.contests[0].teams[0].token = "t".into();
        cfg.validate().unwrap();
        cfg.contests[0].teams[0].id = TeamId::new("Bad,Id");
        assert!(cfg.validate().is_err());
    }
}
