// Copyright (C) 2026 The breakit Authors. All rights reserved.
//
// SPDX-License-Identifier: Apache-2.0

//! `engine serve`, `engine run-contest` and `engine replay`.

use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context};
use breakit_engine::service::config::{ContestConfig, EngineConfig};
use breakit_engine::service::events::Phase;
use breakit_engine::service::state::ContestState;
use breakit_engine::service::store::{self, EVENTS_FILE};
use breakit_engine::service::{api, Service};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "engine", about = "Build-it, break-it, fix-it contest engine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Serve the HTTP API, polling repositories and enforcing deadlines.
    Serve {
        #[arg(long, short)]
        config: PathBuf,
        /// Overrides the configured listen address.
        #[arg(long)]
        listen: Option<String>,
    },
    /// Run each configured contest's script to completion against a fresh
    /// store and print the final scoreboards as CSV.
    RunContest { config: PathBuf },
    /// Rebuild a scoreboard from an event log.
    Replay {
        event_log: PathBuf,
        /// Stop at the end of this phase.
        #[arg(long)]
        at: Option<String>,
        /// Print the full scoreboard as JSON instead of CSV.
        #[arg(long)]
        json: bool,
    },
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()))
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("engine: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Serve { config, listen } => serve(EngineConfig::load(&config)?, listen),
        Command::RunContest { config } => run_contest(EngineConfig::load(&config)?),
        Command::Replay { event_log, at, json } => {
            let at = at.map(|p| Phase::parse(&p).with_context(|| format!("unknown phase {p}"))).transpose()?;
            let records = store::read_log(&event_log)?;
            let events = records.iter().map(|r| &r.event);
            let state = match at {
                Some(p) => ContestState::replay_until(events, p)?,
                None => ContestState::replay(events)?,
            };
            let board = state.scoreboard();
            if json {
                println!("{}", serde_json::to_string_pretty(&board)?);
            } else {
                print!("{}", board.to_csv());
            }
            Ok(())
        }
    }
}

fn run_contest(cfg: EngineConfig) -> anyhow::Result<()> {
    for c in &cfg.contests {
        let log = cfg.store.join(&c.id).join(EVENTS_FILE);
        if std::fs::metadata(&log).is_ok_and(|m| m.len() > 0) {
            bail!("{} already holds events; run-contest needs a fresh store", log.display());
        }
    }
    let svc = Service::open(&cfg)?;
    for c in &cfg.contests {
        let rt = svc.contest(&c.id)?;
        let script = c.script.clone().unwrap_or_else(ContestConfig::default_script);
        rt.run_script(&script).with_context(|| format!("contest {}", c.id))?;
        print!("{}", rt.scoreboard(None)?.to_csv());
    }
    Ok(())
}

fn serve(cfg: EngineConfig, listen: Option<String>) -> anyhow::Result<()> {
    let svc = Arc::new(Service::open(&cfg)?);
    let addr = listen.unwrap_or(cfg.listen.clone());

    let ticker = svc.clone();
    std::thread::Builder::new().name("poller".into()).spawn(move || loop {
        ticker.tick();
        std::thread::sleep(ticker.poll_interval);
    })?;

    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&addr).await.with_context(|| format!("binding {addr}"))?;
        tracing::info!("listening on {addr}");
        axum::serve(listener, api::router(svc))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        Ok(())
    })
}
