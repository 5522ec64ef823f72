// Copyright (C) 2026 The breakit Authors. All rights reserved.
//
// SPDX-License-Identifier: Apache-2.0

//! Usage: `mitm-fixture <strategy> <listen-port> <bank-port> <control-port>`

use breakit_engine::fixtures::mitm::{run, Strategy};

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let parsed = match &args[..] {
        [s, l, b, c] => Strategy::parse(s).zip(l.parse().ok()).zip(b.parse().ok()).zip(c.parse().ok()),
        _ => None,
    };
    let Some((((strategy, listen), bank), control)) = parsed else {
        eprintln!("usage: mitm-fixture <strategy> <listen-port> <bank-port> <control-port>");
        std::process::exit(2);
    };
    if let Err(e) = run(strategy, listen, bank, control) {
        eprintln!("mitm-fixture: {e}");
        std::process::exit(1);
    }
}
