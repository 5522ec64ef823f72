// Copyright (C) 2026 The breakit Authors. All rights reserved.
//
// SPDX-License-Identifier: Apache-2.0

//! The bank server and atm client.
//!
//! ```text
//! bank [-p <port>] [-s <auth-file>]
//! atm [-s <auth-file>] [-i <ip>] [-p <port>] [-c <card-file>] -a <account>
//!     (-n <balance> | -d <amount> | -w <amount> | -g)
//! ```
//!
//! The bank writes a fresh auth file (refusing to overwrite one), prints
//! `created`, then serves one request per connection, sequentially. Each
//! successful operation prints its summary line on both sides, for example
//! `{"account":"alice","initial_balance":100.00}`. A session the bank cannot
//! parse or authenticate prints `protocol_error` and changes nothing.
//!
//! The atm exits 0 after printing the summary, 255 for rejected or malformed
//! commands, and 63 when the exchange with the bank fails or times out.
//! Creating an account writes a new card file (default `<account>.card`).
//!
//! On the wire every message is a frame: a version byte (1), a big-endian
//! `u32` body length and the body. The reference body is the JSON request
//! or response in the clear. The other [`Wire`] variants exist to seed
//! channel weaknesses for judge testing.

use std::collections::BTreeSet;
use std::io::{self, Read, Write};
use std::net::{IpAddr, Ipv4Addr, SocketAddr, TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::time::Duration;

use breakit_core::bank::{validate_account_name, CardSecret, Ledger, Operation, Request, CARD_SECRET_LEN};
use breakit_core::currency::Amount;
use chacha20::cipher::{KeyIvInit, StreamCipher};
use chacha20::ChaCha20;
use hmac::{Hmac, KeyInit, Mac};
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::Sha256;

pub const EXIT_OK: i32 = 0;
pub const EXIT_REJECTED: i32 = 255;
pub const EXIT_PROTOCOL: i32 = 63;

pub const DEFAULT_PORT: u16 = 3000;
pub const DEFAULT_AUTH_FILE: &str = "bank.auth";
pub const FRAME_VERSION: u8 = 1;
pub const MAX_FRAME: usize = 1 << 20;
pub const IO_TIMEOUT: Duration = Duration::from_secs(10);
pub const AUTH_LEN: usize = 32;

pub fn write_frame(w: &mut impl Write, body: &[u8]) -> io::Result<()> {
    let mut buf = Vec::with_capacity(5 + body.len());
    buf.push(FRAME_VERSION);
    buf.extend_from_slice(&(body.len() as u32).to_be_bytes());
    buf.extend_from_slice(body);
    w.write_all(&buf)?;
    w.flush()
}

pub fn read_frame(r: &mut impl Read) -> io::Result<Vec<u8>> {
    let mut head = [0u8; 5];
    r.read_exact(&mut head)?;
    let len = u32::from_be_bytes([head[1], head[2], head[3], head[4]]) as usize;
    if head[0] != FRAME_VERSION || len > MAX_FRAME {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "bad frame header"));
    }
    let mut body = vec![0u8; len];
    r.read_exact(&mut body)?;
    Ok(body)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireRequest {
    pub auth: String,
    pub op: Operation,
    pub account: String,
    pub card: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amount: Option<Amount>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nonce: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub challenge: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireResponse {
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<String>,
}

/// How request and response bodies are protected.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Wire {
    /// JSON in the clear; the reference protocol.
    Plain,
    /// Deterministic authenticated encryption, no freshness at all.
    NonceFree,
    /// Stream cipher with a random nonce and no authentication tag.
    Malleable,
    /// Fresh authenticated requests, but responses are not bound to them.
    Unbound,
    /// Per-connection bank challenge bound into both directions.
    Sound,
}

impl Wire {
    pub const ALL: [Wire; 5] = [Wire::Plain, Wire::NonceFree, Wire::Malleable, Wire::Unbound, Wire::Sound];

    pub fn name(self) -> &'static str {
        match self {
            Wire::Plain => "plaintext",
            Wire::NonceFree => "nonce-free",
            Wire::Malleable => "malleable",
            Wire::Unbound => "error-oracle",
            Wire::Sound => "sound",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|w| w.name() == s)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ProtocolError {
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
    #[error("malformed message")]
    Malformed,
    #[error("authentication failed")]
    Auth,
    #[error("replayed message")]
    Replay,
}

type HmacSha256 = Hmac<Sha256>;

/// Channel keys derived from the auth file secret.
#[derive(Clone)]
pub struct Keys {
    secret: [u8; AUTH_LEN],
    enc: [u8; 32],
    mac: [u8; 32],
}

fn prf(key: &[u8], label: &[u8]) -> [u8; 32] {
    let mut m = <HmacSha256 as KeyInit>::new_from_slice(key).expect("any key length");
    m.update(label);
    m.finalize().into_bytes().into()
}

impl Keys {
    pub fn new(secret: [u8; AUTH_LEN]) -> Self {
        Self {
            secret,
            enc: prf(&secret, b"enc"),
            mac: prf(&secret, b"mac"),
        }
    }

    pub fn auth_hex(&self) -> String {
        hex::encode(self.secret)
    }

    fn tag(&self, aad: &[u8], data: &[u8]) -> HmacSha256 {
        let mut m = <HmacSha256 as KeyInit>::new_from_slice(&self.mac).expect("any key length");
        m.update(&(aad.len() as u64).to_be_bytes());
        m.update(aad);
        m.update(data);
        m
    }

    fn xor(&self, nonce: &[u8; 12], data: &mut [u8]) {
        ChaCha20::new(&self.enc.into(), &(*nonce).into()).apply_keystream(data);
    }

    /// `nonce || ciphertext || tag`, the tag covering `aad` too.
    fn seal(&self, nonce: [u8; 12], plain: &[u8], aad: &[u8]) -> Vec<u8> {
        let mut out = nonce.to_vec();
        let mut ct = plain.to_vec();
        self.xor(&nonce, &mut ct);
        out.extend_from_slice(&ct);
        let tag = self.tag(aad, &out).finalize().into_bytes();
        out.extend_from_slice(&tag);
        out
    }

    fn open(&self, frame: &[u8], aad: &[u8]) -> Result<Vec<u8>, ProtocolError> {
        if frame.len() < 12 + 32 {
            return Err(ProtocolError::Malformed);
        }
        let (body, tag) = frame.split_at(frame.len() - 32);
        self.tag(aad, body).verify_slice(tag).map_err(|_| ProtocolError::Auth)?;
        let nonce: [u8; 12] = body[..12].try_into().unwrap();
        let mut pt = body[12..].to_vec();
        self.xor(&nonce, &mut pt);
        Ok(pt)
    }

    fn det_nonce(&self, plain: &[u8]) -> [u8; 12] {
        let full = prf(&self.mac, plain);
        full[..12].try_into().unwrap()
    }
}

fn encode<T: Serialize>(v: &T) -> Vec<u8> {
    serde_json::to_vec(v).expect("serializable")
}

fn decode<T: for<'de> Deserialize<'de>>(b: &[u8]) -> Result<T, ProtocolError> {
    serde_json::from_slice(b).map_err(|_| ProtocolError::Malformed)
}

/// Bank-side memory across sessions, for the variants that need it.
#[derive(Debug, Default)]
pub struct ServerState {
    seen_nonces: BTreeSet<String>,
}

impl Wire {
    fn protect(self, keys: &Keys, plain: &[u8], aad: &[u8]) -> Vec<u8> {
        match self {
            Wire::Plain => plain.to_vec(),
            Wire::NonceFree | Wire::Unbound => keys.seal(keys.det_nonce(plain), plain, &[]),
            Wire::Malleable => {
                let nonce: [u8; 12] = rand::rng().random();
                let mut out = nonce.to_vec();
                let mut ct = plain.to_vec();
                keys.xor(&nonce, &mut ct);
                out.extend_from_slice(&ct);
                out
            }
            Wire::Sound => keys.seal(rand::rng().random(), plain, aad),
        }
    }

    fn unprotect(self, keys: &Keys, frame: &[u8], aad: &[u8]) -> Result<Vec<u8>, ProtocolError> {
        match self {
            Wire::Plain => Ok(frame.to_vec()),
            Wire::NonceFree | Wire::Unbound => keys.open(frame, &[]),
            Wire::Malleable => {
                if frame.len() < 12 {
                    return Err(ProtocolError::Malformed);
                }
                let nonce: [u8; 12] = frame[..12].try_into().unwrap();
                let mut pt = frame[12..].to_vec();
                keys.xor(&nonce, &mut pt);
                Ok(pt)
            }
            Wire::Sound => keys.open(frame, aad),
        }
    }

    /// Client side of one session.
    pub fn client_exchange(
        self,
        stream: &mut TcpStream,
        keys: &Keys,
        mut req: WireRequest,
    ) -> Result<WireResponse, ProtocolError> {
        let mut challenge = Vec::new();
        if self == Wire::Sound {
            challenge = read_frame(stream)?;
            if challenge.len() != 16 {
                return Err(ProtocolError::Malformed);
            }
            req.challenge = Some(hex::encode(&challenge));
        }
        if self == Wire::Unbound {
            req.nonce = Some(hex::encode(rand::rng().random::<[u8; 16]>()));
        }
        write_frame(stream, &self.protect(keys, &encode(&req), &challenge))?;
        let mut resp_aad = challenge.clone();
        resp_aad.extend_from_slice(b"response");
        let body = self.unprotect(keys, &read_frame(stream)?, &resp_aad)?;
        decode(&body)
    }

    /// Bank side of one session.
    pub fn server_exchange(
        self,
        stream: &mut TcpStream,
        keys: &Keys,
        state: &mut ServerState,
        handle: &mut dyn FnMut(&WireRequest) -> WireResponse,
    ) -> Result<(), ProtocolError> {
        let mut challenge = Vec::new();
        if self == Wire::Sound {
            challenge = rand::rng().random::<[u8; 16]>().to_vec();
            write_frame(stream, &challenge)?;
        }
        let req: WireRequest = decode(&self.unprotect(keys, &read_frame(stream)?, &challenge)?)?;
        if req.auth != keys.auth_hex() {
            return Err(ProtocolError::Auth);
        }
        if self == Wire::Sound && req.challenge.as_deref() != Some(&hex::encode(&challenge)) {
            return Err(ProtocolError::Replay);
        }
        if self == Wire::Unbound {
            let nonce = req.nonce.clone().ok_or(ProtocolError::Malformed)?;
            if !state.seen_nonces.insert(nonce) {
                return Err(ProtocolError::Replay);
            }
        }
        let resp = handle(&req);
        let mut resp_aad = challenge;
        resp_aad.extend_from_slice(b"response");
        write_frame(stream, &self.protect(keys, &encode(&resp), &resp_aad))?;
        Ok(())
    }
}

fn read_auth(path: &Path) -> Option<Keys> {
    let text = std::fs::read_to_string(path).ok()?;
    let bytes = hex::decode(text.trim()).ok()?;
    Some(Keys::new(bytes.try_into().ok()?))
}

fn parse_port(s: &str) -> Option<u16> {
    if s.is_empty() || s.starts_with('0') || !s.bytes().all(|b| b.is_ascii_digit()) || s.len() > 5 {
        return None;
    }
    let p: u32 = s.parse().ok()?;
    (1024..=65535).contains(&p).then_some(p as u16)
}

fn valid_file_name(s: &str) -> bool {
    (1..=127).contains(&s.len())
        && s != "."
        && s != ".."
        && s.bytes().all(|b| matches!(b, b'_' | b'-' | b'.' | b'/' | b'0'..=b'9' | b'a'..=b'z'))
}

/// Handles one request against the ledger, printing the summary on success.
fn apply(ledger: &mut Ledger, req: &WireRequest, out: &mut dyn Write) -> WireResponse {
    let Ok(card) = CardSecret::from_hex(&req.card) else {
        return WireResponse { ok: false, summary: None };
    };
    let request = Request {
        op: req.op,
        account: req.account.clone(),
        card,
        amount: req.amount,
    };
    match ledger.execute(&request) {
        Ok(summary) => {
            let line = summary.to_string();
            let _ = writeln!(out, "{line}");
            let _ = out.flush();
            WireResponse { ok: true, summary: Some(line) }
        }
        Err(_) => WireResponse { ok: false, summary: None },
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BankArgs {
    pub port: u16,
    pub auth_file: PathBuf,
}

pub fn parse_bank(args: &[String]) -> Option<BankArgs> {
    let (mut port, mut auth) = (None, None);
    let mut it = args.iter();
    while let Some(a) = it.next() {
        match a.as_str() {
            "-p" if port.is_none() => port = Some(parse_port(it.next()?)?),
            "-s" if auth.is_none() => {
                let v = it.next()?;
                valid_file_name(v).then_some(())?;
                auth = Some(PathBuf::from(v));
            }
            _ => return None,
        }
    }
    Some(BankArgs {
        port: port.unwrap_or(DEFAULT_PORT),
        auth_file: auth.unwrap_or_else(|| DEFAULT_AUTH_FILE.into()),
    })
}

/// Runs the bank until killed. Returns only on startup failure.
pub fn bank_main(wire: Wire, args: &[String], out: &mut dyn Write) -> i32 {
    let Some(a) = parse_bank(args) else {
        return EXIT_REJECTED;
    };
    if a.auth_file.exists() {
        return EXIT_REJECTED;
    }
    let Ok(listener) = TcpListener::bind(SocketAddr::new(IpAddr::V4(Ipv4Addr::LOCALHOST), a.port)) else {
        return EXIT_REJECTED;
    };
    let secret: [u8; AUTH_LEN] = rand::rng().random();
    let keys = Keys::new(secret);
    if crate::logtool::replace_file(&a.auth_file, format!("{}\n", keys.auth_hex()).as_bytes()).is_err() {
        return EXIT_REJECTED;
    }
    let _ = writeln!(out, "created");
    let _ = out.flush();
    let mut ledger = Ledger::new();
    let mut state = ServerState::default();
    for conn in listener.incoming() {
        let Ok(mut stream) = conn else { continue };
        let _ = stream.set_read_timeout(Some(IO_TIMEOUT));
        let _ = stream.set_write_timeout(Some(IO_TIMEOUT));
        let mut handle = |req: &WireRequest| apply(&mut ledger, req, out);
        if wire.server_exchange(&mut stream, &keys, &mut state, &mut handle).is_err() {
            let _ = writeln!(out, "protocol_error");
            let _ = out.flush();
        }
    }
    EXIT_OK
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AtmArgs {
    pub auth_file: PathBuf,
    pub ip: Ipv4Addr,
    pub port: u16,
    pub card_file: PathBuf,
    pub account: String,
    pub op: Operation,
    pub amount: Option<Amount>,
}

pub fn parse_atm(args: &[String]) -> Option<AtmArgs> {
    let (mut auth, mut ip, mut port, mut card, mut account, mut op) = (None, None, None, None, None, None);
    fn once<T>(slot: &mut Option<T>, v: T) -> Option<()> {
        slot.replace(v).is_none().then_some(())
    }
    let mut it = args.iter();
    while let Some(a) = it.next() {
        match a.as_str() {
            "-s" => {
                let v = it.next()?;
                valid_file_name(v).then_some(())?;
                once(&mut auth, PathBuf::from(v))?
            }
            "-i" => {
                let v = it.next()?;
                let parsed: Ipv4Addr = v.parse().ok()?;
                (parsed.to_string() == *v).then_some(())?;
                once(&mut ip, parsed)?
            }
            "-p" => once(&mut port, parse_port(it.next()?)?)?,
            "-c" => {
                let v = it.next()?;
                valid_file_name(v).then_some(())?;
                once(&mut card, PathBuf::from(v))?
            }
            "-a" => {
                let v = it.next()?;
                validate_account_name(v).ok()?;
                once(&mut account, v.clone())?
            }
            "-n" | "-d" | "-w" => {
                let amount: Amount = it.next()?.parse().ok()?;
                let kind = match a.as_str() {
                    "-n" => Operation::Create,
                    "-d" => Operation::Deposit,
                    _ => Operation::Withdraw,
                };
                once(&mut op, (kind, Some(amount)))?
            }
            "-g" => once(&mut op, (Operation::GetBalance, None))?,
            _ => return None,
        }
    }
    let account = account?;
    let (op, amount) = op?;
    Some(AtmArgs {
        auth_file: auth.unwrap_or_else(|| DEFAULT_AUTH_FILE.into()),
        ip: ip.unwrap_or(Ipv4Addr::LOCALHOST),
        port: port.unwrap_or(DEFAULT_PORT),
        card_file: card.unwrap_or_else(|| format!("{account}.card").into()),
        account,
        op,
        amount,
    })
}

pub fn atm_main(wire: Wire, args: &[String], out: &mut dyn Write) -> i32 {
    let Some(a) = parse_atm(args) else {
        return EXIT_REJECTED;
    };
    let Some(keys) = read_auth(&a.auth_file) else {
        return EXIT_REJECTED;
    };
    let card = if a.op == Operation::Create {
        if a.card_file.exists() {
            return EXIT_REJECTED;
        }
        CardSecret::from_bytes(rand::rng().random::<[u8; CARD_SECRET_LEN]>())
    } else {
        match std::fs::read_to_string(&a.card_file).ok().and_then(|t| CardSecret::from_hex(t.trim()).ok()) {
            Some(c) => c,
            None => return EXIT_REJECTED,
        }
    };
    let req = WireRequest {
        auth: keys.auth_hex(),
        op: a.op,
        account: a.account.clone(),
        card: card.to_hex(),
        amount: a.amount,
        nonce: None,
        challenge: None,
    };
    let exchange = || -> Result<WireResponse, ProtocolError> {
        let addr = SocketAddr::new(IpAddr::V4(a.ip), a.port);
        let mut stream = TcpStream::connect_timeout(&addr, IO_TIMEOUT)?;
        stream.set_read_timeout(Some(IO_TIMEOUT))?;
        stream.set_write_timeout(Some(IO_TIMEOUT))?;
        wire.client_exchange(&mut stream, &keys, req)
    };
    match exchange() {
        Err(_) => EXIT_PROTOCOL,
        Ok(WireResponse { ok: true, summary: Some(line) }) => {
            if a.op == Operation::Create && crate::logtool::replace_file(&a.card_file, (card.to_hex() + "\n").as_bytes()).is_err() {
                return EXIT_REJECTED;
            }
            let _ = writeln!(out, "{line}");
            EXIT_OK
        }
        Ok(_) => EXIT_REJECTED,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn parses_atm_commands() {
        let a = parse_atm(&s(&["-a", "bob", "-d", "5.00", "-p", "4000"])).unwrap();
        assert_eq!(a.op, Operation::Deposit);
        assert_eq!(a.port, 4000);
        assert_eq!(a.card_file, PathBuf::from("bob.card"));
        for bad in [
            &["-a", "bob"][..],
            &["-a", "bob", "-g", "-g"],
            &["-a", "bob", "-d", "5"],
            &["-a", "Bob", "-g"],
            &["-a", "bob", "-g", "-p", "80"],
            &["-a", "bob", "-g", "-i", "1.2.3"],
            &["-a", "bob", "-g", "-i", "01.2.3.4"],
            &["-a", "bob", "-g", "extra"],
        ] {
            assert_eq!(parse_atm(&s(bad)), None, "{bad:?}");
        }
    }

    #[test]
    fn frames_round_trip_and_reject_bad_headers() {
        let mut buf = Vec::new();
        write_frame(&mut buf, b"hello").unwrap();
        assert_eq!(read_frame(&mut &buf[..]).unwrap(), b"hello");
        buf[0] = 2;
        assert!(read_frame(&mut &buf[..]).is_err());
        let huge = [1u8, 0xff, 0xff, 0xff, 0xff];
        assert!(read_frame(&mut &huge[..]).is_err());
    }

    #[test]
    fn every_wire_round_trips_a_session() {
        for wire in Wire::ALL {
            let keys = Keys::new([7; AUTH_LEN]);
            let listener = TcpListener::bind("127.0.0.1:0").unwrap();
            let port = listener.local_addr().unwrap().port();
            let k2 = keys.clone();
            let server = std::thread::spawn(move || {
                let (mut st, _) = listener.accept().unwrap();
                let mut state = ServerState::default();
                let mut handle = |r: &WireRequest| WireResponse {
                    ok: true,
                    summary: Some(format!("{}:{:?}", r.account, r.amount)),
                };
                wire.server_exchange(&mut st, &k2, &mut state, &mut handle).unwrap();
            });
            let mut st = TcpStream::connect(("127.0.0.1", port)).unwrap();
            let req = WireRequest {
                auth: keys.auth_hex(),
                op: Operation::Deposit,
                account: "amy".into(),
                card: "00".into(),
                amount: Some("1.50".parse().unwrap()),
                nonce: None,
                challenge: None,
            };
            let resp = wire.client_exchange(&mut st, &keys, req).unwrap();
            assert_eq!(resp.summary.as_deref(), Some("amy:Some(Amount(150))"), "{wire:?}");
            server.join().unwrap();
        }
    }

    #[test]
    fn sealed_messages_detect_tampering() {
        let keys = Keys::new([1; AUTH_LEN]);
        let mut frame = keys.seal([2; 12], b"payload", b"aad");
        assert_eq!(keys.open(&frame, b"aad").unwrap(), b"payload");
        assert!(keys.open(&frame, b"other").is_err());
        frame[14] ^= 1;
        assert!(keys.open(&frame, b"aad").is_err());
    }
}
