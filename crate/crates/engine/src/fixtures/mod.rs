// Copyright (C) 2026 The breakit Authors. All rights reserved.
//
// SPDX-License-Identifier: Apache-2.0

//! Vulnerable submissions and attacker programs for testing the judge.

pub mod log;
pub mod mitm;
