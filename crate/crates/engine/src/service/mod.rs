// Copyright (C) 2026 The breakit Authors. All rights reserved.
//
// SPDX-License-Identifier: Apache-2.0

//! The contest service: event-sourced contest state, repository polling,
//! judging and the HTTP API.

pub mod api;
pub mod config;
pub mod events;
pub mod repo;
pub mod runtime;
pub mod state;
pub mod store;

pub use runtime::{Caller, ContestRuntime, Operation, Service, ServiceError};
