// Copyright (C) 2026 The breakit Authors. All rights reserved.
//
// SPDX-License-Identifier: Apache-2.0

use breakit_engine::atm::{atm_main, Wire};

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let code = atm_main(Wire::Plain, &args, &mut std::io::stdout().lock());
    std::process::exit(code);
}
