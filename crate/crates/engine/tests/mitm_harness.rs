// Copyright (C) 2026 The breakit Authors. All rights reserved.
//
// SPDX-License-Identifier: Apache-2.0

mod support;

use breakit_engine::mitm::{self, Secrets, SessionRecord, Verdict};
use rand::SeedableRng;
use support::*;

fn session(flavor: &str, strategy: &str) -> (tempfile::TempDir, SessionRecord) {
    let (tmp, ws) = workspace();
    let secrets = Secrets::random(&mut rand::rngs::StdRng::seed_from_u64(11));
    let rec = mitm::run_session(&atm_fixture(flavor), &mitm(strategy), &ws, &quick_session(), secrets).unwrap();
    (tmp, rec)
}

fn integrity(flavor: &str, strategy: &str) -> (Verdict, SessionRecord, Option<mitm::Replay>) {
    let (tmp, rec) = session(flavor, strategy);
    let ws = breakit_engine::sandbox::Workspace::new(tmp.path()).unwrap();
    let (v, replay) = mitm::finalize_integrity(&rec, &oracles().atm_target(), &ws, &quick_session()).unwrap();
    (v, rec, replay)
}

#[test]
fn replay_breaks_deterministic_nonces_only() {
    assert_eq!(integrity("nonce-free", "replay").0, Verdict::Violation);
    assert_eq!(integrity("plaintext", "replay").0, Verdict::Violation);
    assert_eq!(integrity("sound", "replay").0, Verdict::NoViolation);
    assert_eq!(integrity("error-oracle", "replay").0, Verdict::NoViolation);
}

#[test]
fn passthrough_matches_the_reference_byte_for_byte() {
    for flavor in ["plaintext", "nonce-free", "malleable", "error-oracle", "sound"] {
        let (v, rec, replay) = integrity(flavor, "passthrough");
        assert_eq!(v, Verdict::NoViolation, "{flavor}");
        let replay = replay.unwrap();
        assert_eq!(rec.commands.len(), 9);
        for (t, o) in rec.commands.iter().zip(&replay.outcomes) {
            assert_eq!(t.outcome.stdout, o.stdout, "{flavor} {:?}", t.args);
            assert_eq!(t.outcome.exit, o.exit, "{flavor} {:?}", t.args);
        }
        assert!(rec.leaked_secrets().is_empty());
    }
}

#[test]
fn dropped_or_stalled_traffic_is_inconclusive() {
    for strategy in ["drop", "blackhole"] {
        let (v, rec, _) = integrity("sound", strategy);
        assert_eq!(v, Verdict::Inconclusive, "{strategy}");
        assert!(rec.has_channel_errors());
    }
}

#[test]
fn tampering_needs_a_missing_mac() {
    assert_eq!(integrity("malleable", "bitflip").0, Verdict::Violation);
    assert_eq!(integrity("plaintext", "bitflip").0, Verdict::Violation);
    assert_eq!(integrity("sound", "bitflip").0, Verdict::Inconclusive);
}

#[test]
fn privacy_leaks() {
    let (_t, rec) = session("plaintext", "sniff");
    assert_eq!(mitm::finalize_privacy(&rec), Verdict::Violation);
    let (_t, rec) = session("sound", "sniff");
    assert_eq!(mitm::finalize_privacy(&rec), Verdict::NoViolation);
    let (_t, rec) = session("error-oracle", "binsearch");
    assert_eq!(mitm::finalize_privacy(&rec), Verdict::Violation, "{:?}", rec.guesses);
    let (_t, rec) = session("sound", "binsearch");
    assert_eq!(mitm::finalize_privacy(&rec), Verdict::NoViolation);
    let (_t, rec) = session("sound", "random-guess");
    assert_eq!(mitm::finalize_privacy(&rec), Verdict::NoViolation);
}

#[test]
fn revealed_cards_do_not_count_as_breaks() {
    let (v, rec, _) = integrity("plaintext", "card");
    assert!(rec.revealed.contains("holder"));
    assert_eq!(v, Verdict::NoViolation);
}

#[test]
fn idle_and_absent_attackers() {
    let (v, rec, _) = integrity("sound", "idle");
    assert!(rec.done && rec.commands.is_empty());
    assert_eq!(v, Verdict::NoViolation);
    let (v, rec, _) = integrity("sound", "absent");
    assert!(rec.abort.is_some() && rec.control.is_empty());
    assert_eq!(v, Verdict::Inconclusive);
}
