// Copyright (C) 2026 The breakit Authors. All rights reserved.
//
// SPDX-License-Identifier: Apache-2.0

//! Usage: `fixture-logread --flavor <flavor> <logread args>...`

use breakit_engine::fixtures::log::{read_main, LogFlavor};

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let (flavor, rest) = match args.split_first_chunk::<2>() {
        Some(([flag, name], rest)) if flag == "--flavor" => (LogFlavor::parse(name), rest),
        _ => (None, &[][..]),
    };
    let Some(flavor) = flavor else {
        eprintln!("usage: fixture-logread --flavor <flavor> <args>...");
        std::process::exit(2);
    };
    std::process::exit(read_main(flavor, rest, &mut std::io::stdout().lock()));
}
