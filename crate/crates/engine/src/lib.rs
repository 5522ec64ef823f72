// Copyright (C) 2026 The breakit Authors. All rights reserved.
//
// SPDX-License-Identifier: Apache-2.0

//! Contest engine: sandboxed execution, reference implementations of the two
//! contest problems, break judging, the MITM harness and the contest service.

pub mod atm;
pub mod fixtures;
pub mod judge;
pub mod logtool;
pub mod mitm;
pub mod sandbox;
pub mod service;
pub mod submission;
