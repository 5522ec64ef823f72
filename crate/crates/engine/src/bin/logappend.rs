// Copyright (C) 2026 The breakit Authors. All rights reserved.
//
// SPDX-License-Identifier: Apache-2.0

use breakit_engine::logtool::{append_with, EnvelopeStore};

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let code = append_with(&EnvelopeStore, &args, &mut std::io::stdout().lock());
    std::process::exit(code);
}
