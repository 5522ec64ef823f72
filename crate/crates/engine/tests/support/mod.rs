// Copyright (C) 2026 The breakit Authors. All rights reserved.
//
// SPDX-License-Identifier: Apache-2.0

#![allow(dead_code)]

pub mod attacks;
pub mod contest;

use std::ffi::OsString;
use std::time::Duration;

use breakit_engine::judge::{LogTarget, Oracles};
use breakit_engine::mitm::{AtmTarget, SessionConfig};
use breakit_engine::sandbox::Workspace;

pub fn oracles() -> Oracles {
    Oracles {
        logappend: env!("CARGO_BIN_EXE_logappend").into(),
        logread: env!("CARGO_BIN_EXE_logread").into(),
        bank: env!("CARGO_BIN_EXE_bank").into(),
        atm: env!("CARGO_BIN_EXE_atm").into(),
    }
}

fn flavored(bin: &str, flavor: &str) -> Vec<OsString> {
    vec![bin.into(), "--flavor".into(), flavor.into()]
}

pub fn atm_fixture(flavor: &str) -> AtmTarget {
    AtmTarget {
        bank: flavored(env!("CARGO_BIN_EXE_fixture-bank"), flavor),
        atm: flavored(env!("CARGO_BIN_EXE_fixture-atm"), flavor),
    }
}

pub fn log_fixture(flavor: &str) -> LogTarget {
    LogTarget {
        logappend: flavored(env!("CARGO_BIN_EXE_fixture-logappend"), flavor),
        logread: flavored(env!("CARGO_BIN_EXE_fixture-logread"), flavor),
    }
}

pub fn mitm(strategy: &str) -> Vec<OsString> {
    vec![env!("CARGO_BIN_EXE_mitm-fixture").into(), strategy.into()]
}

pub fn quick_session() -> SessionConfig {
    SessionConfig {
        command_timeout: Duration::from_secs(2),
        session_timeout: Duration::from_secs(30),
        connect_timeout: Duration::from_secs(5),
        ..SessionConfig::default()
    }
}

pub fn workspace() -> (tempfile::TempDir, Workspace) {
    let t = tempfile::tempdir().unwrap();
    let w = Workspace::new(t.path()).unwrap();
    (t, w)
}
