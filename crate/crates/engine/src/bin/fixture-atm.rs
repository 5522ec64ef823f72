// Copyright (C) 2026 The breakit Authors. All rights reserved.
//
// SPDX-License-Identifier: Apache-2.0

//! Usage: `fixture-atm --flavor <flavor> <atm args>...`

use breakit_engine::atm::{atm_main, Wire};

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let (wire, rest) = match args.split_first_chunk::<2>() {
        Some(([flag, name], rest)) if flag == "--flavor" => (Wire::parse(name), rest),
        _ => (None, &[][..]),
    };
    let Some(wire) = wire else {
        eprintln!("usage: fixture-atm --flavor <flavor> <args>...");
        std::process::exit(2);
    };
    std::process::exit(atm_main(wire, rest, &mut std::io::stdout().lock()));
}
