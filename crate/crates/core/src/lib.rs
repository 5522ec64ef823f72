// Copyright (C) 2026 The breakit Authors. All rights reserved.
//
// SPDX-License-Identifier: Apache-2.0

//! Pure building blocks of a build-it/break-it/fix-it contest engine.
//!
//! Everything here is deterministic and free of IO so it can be embedded in
//! `no_std` environments with an allocator:
//!
//! - [`scoring`]: ship, resilience and break scores, fix-driven defect
//!   grouping and per-target report caps.
//! - [`gallery`]: the secure-log problem's event model, state machine and
//!   query semantics.
//! - [`envelope`]: the encrypt-then-MAC container the reference log tool
//!   writes.
//! - [`currency`] and [`bank`]: the ATM problem's amounts, accounts and
//!   printed summary lines.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod bank;
pub mod currency;
pub mod envelope;
pub mod gallery;
pub mod scoring;

pub use currency::Amount;
pub use scoring::{BugCategory, ScoringConfig, TeamId};
