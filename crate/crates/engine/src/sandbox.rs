// Copyright (C) 2026 The breakit Authors. All rights reserved.
//
// SPDX-License-Identifier: Apache-2.0

//! Process isolation for untrusted programs.
//!
//! Every job runs in its own process group with resource limits, write access
//! confined to its working directory, and TCP restricted to an explicit port
//! list. Filesystem and network confinement use Landlock where the kernel
//! offers it; a job with no network also gets a private network namespace.

use std::ffi::OsString;
use std::io::{self, Read, Write};
use std::os::fd::{AsRawFd, OwnedFd};
use std::os::unix::process::CommandExt;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc;
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use landlock::{
    Access, AccessFs, AccessNet, NetPort, PathBeneath, PathFd, Ruleset, RulesetAttr,
    RulesetCreatedAttr, ABI,
};
use serde::{Deserialize, Serialize};

const LANDLOCK_ABI: ABI = ABI::V5;

/// How long to wait for a killed process group to be reaped.
pub const KILL_GRACE: Duration = Duration::from_secs(2);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Limits {
    #[serde(with = "secs")]
    pub wall: Duration,
    pub cpu_seconds: u64,
    pub memory_bytes: u64,
    pub output_bytes: usize,
    pub file_bytes: u64,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            wall: Duration::from_secs(20),
            cpu_seconds: 10,
            memory_bytes: 512 << 20,
            output_bytes: 64 << 20,
            file_bytes: 256 << 20,
        }
    }
}

impl Limits {
    /// Limits for compiling a submission.
    pub fn build() -> Self {
        Self {
            wall: Duration::from_secs(600),
            cpu_seconds: 600,
            memory_bytes: 4 << 30,
            ..Self::default()
        }
    }

    pub fn with_wall(mut self, wall: Duration) -> Self {
        self.wall = wall;
        self
    }
}

mod secs {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let v = f64::deserialize(d)?;
        Duration::try_from_secs_f64(v).map_err(serde::de::Error::custom)
    }
}

/// TCP access granted to a job.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Network {
    pub bind: Vec<u16>,
    pub connect: Vec<u16>,
}

impl Network {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn is_none(&self) -> bool {
        self.bind.is_empty() && self.connect.is_empty()
    }
}

/// One program invocation.
#[derive(Debug, Clone)]
pub struct Job {
    pub argv: Vec<OsString>,
    pub dir: PathBuf,
    pub stdin: Vec<u8>,
    pub network: Network,
    pub env: Vec<(String, String)>,
}

impl Job {
    pub fn new<I, S>(argv: I, dir: impl Into<PathBuf>) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<OsString>,
    {
        Self {
            argv: argv.into_iter().map(Into::into).collect(),
            dir: dir.into(),
            stdin: Vec::new(),
            network: Network::none(),
            env: Vec::new(),
        }
    }

    pub fn network(mut self, network: Network) -> Self {
        self.network = network;
        self
    }

    pub fn stdin(mut self, bytes: impl Into<Vec<u8>>) -> Self {
        self.stdin = bytes.into();
        self
    }

    pub fn env(mut self, key: &str, value: impl Into<String>) -> Self {
        self.env.push((key.into(), value.into()));
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Exit {
    Code(i32),
    Signal(i32),
    Timeout,
}

impl Exit {
    /// Termination by a signal that indicates a memory or arithmetic fault.
    pub fn is_fault(self) -> bool {
        matches!(
            self,
            Exit::Signal(libc::SIGSEGV | libc::SIGBUS | libc::SIGILL | libc::SIGFPE | libc::SIGABRT)
        )
    }

    pub fn code(self) -> Option<i32> {
        match self {
            Exit::Code(c) => Some(c),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    #[serde(with = "b64")]
    pub stdout: Vec<u8>,
    #[serde(with = "b64")]
    pub stderr: Vec<u8>,
    pub exit: Exit,
    pub wall_time: f64,
    pub peak_memory: u64,
}

impl RunOutcome {
    pub fn stdout_str(&self) -> String {
        String::from_utf8_lossy(&self.stdout).into_owned()
    }
}

/// Byte buffers serialize as base64 so audit records stay exact.
mod b64 {
    use base64::Engine;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(b: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&base64::engine::general_purpose::STANDARD.encode(b))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(d)?;
        base64::engine::general_purpose::STANDARD
            .decode(s)
            .map_err(serde::de::Error::custom)
    }
}

/// Whether this kernel enforces the filesystem and network rules.
pub fn landlock_available() -> bool {
    Ruleset::default()
        .handle_access(AccessFs::from_write(LANDLOCK_ABI))
        .and_then(|r| r.create())
        .map(|c| Option::<OwnedFd>::from(c).is_some())
        .unwrap_or(false)
}

fn build_ruleset(dir: &Path, network: &Network) -> io::Result<Option<OwnedFd>> {
    let err = |e: landlock::RulesetError| io::Error::other(e.to_string());
    let write = AccessFs::from_write(LANDLOCK_ABI);
    let file_write = write & AccessFs::from_file(LANDLOCK_ABI);
    let mut created = Ruleset::default()
        .handle_access(write)
        .map_err(err)?
        .handle_access(AccessNet::from_all(LANDLOCK_ABI))
        .map_err(err)?
        .create()
        .map_err(err)?;
    let dir_fd = PathFd::new(dir).map_err(|e| io::Error::other(e.to_string()))?;
    created = created.add_rule(PathBeneath::new(dir_fd, write)).map_err(err)?;
    if let Ok(null) = PathFd::new("/dev/null") {
        created = created.add_rule(PathBeneath::new(null, file_write)).map_err(err)?;
    }
    for &port in &network.bind {
        created = created.add_rule(NetPort::new(port, AccessNet::BindTcp)).map_err(err)?;
    }
    for &port in &network.connect {
        created = created.add_rule(NetPort::new(port, AccessNet::ConnectTcp)).map_err(err)?;
    }
    Ok(created.into())
}

struct Spawned {
    pid: libc::pid_t,
    started: Instant,
    exit_rx: mpsc::Receiver<(libc::c_int, libc::rusage)>,
    stdout: Arc<Mutex<Vec<u8>>>,
    stderr: Arc<Mutex<Vec<u8>>>,
    readers: Vec<JoinHandle<()>>,
    reaped: Option<(libc::c_int, libc::rusage)>,
}

fn collect(mut src: impl Read + Send + 'static, cap: usize) -> (Arc<Mutex<Vec<u8>>>, JoinHandle<()>) {
    let buf = Arc::new(Mutex::new(Vec::new()));
    let sink = buf.clone();
    let handle = std::thread::spawn(move || {
        let mut chunk = [0u8; 8192];
        loop {
            match src.read(&mut chunk) {
                Ok(0) | Err(_) => break,
                Ok(n) => {
                    let mut b = sink.lock().unwrap();
                    let room = cap.saturating_sub(b.len());
                    b.extend_from_slice(&chunk[..n.min(room)]);
                }
            }
        }
    });
    (buf, handle)
}

fn spawn_job(job: &Job, limits: &Limits) -> io::Result<Spawned> {
    let (program, args) = job
        .argv
        .split_first()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "empty argv"))?;
    std::fs::create_dir_all(&job.dir)?;
    let ruleset = build_ruleset(&job.dir, &job.network)?;
    let ruleset_fd = ruleset.as_ref().map(|fd| fd.as_raw_fd());
    let isolate_net = job.network.is_none();

    let mut cmd = Command::new(program);
    cmd.args(args)
        .current_dir(&job.dir)
        .env_clear()
        .env("PATH", std::env::var_os("PATH").unwrap_or_else(|| "/usr/bin:/bin".into()))
        .env("HOME", &job.dir)
        .env("LC_ALL", "C")
        .envs(job.env.iter().map(|(k, v)| (k, v)))
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped());
    let rl = [
        (libc::RLIMIT_CPU, limits.cpu_seconds),
        (libc::RLIMIT_AS, limits.memory_bytes),
        (libc::RLIMIT_FSIZE, limits.file_bytes),
        (libc::RLIMIT_CORE, 0),
    ];
    // SAFETY: the closure only makes async-signal-safe system calls.
    unsafe {
        cmd.pre_exec(move || {
            if libc::setpgid(0, 0) != 0 {
                return Err(io::Error::last_os_error());
            }
            for (res, v) in rl {
                let lim = libc::rlimit {
                    rlim_cur: v as libc::rlim_t,
                    rlim_max: v as libc::rlim_t,
                };
                if libc::setrlimit(res, &lim) != 0 {
                    return Err(io::Error::last_os_error());
                }
            }
            if isolate_net {
                libc::unshare(libc::CLONE_NEWNET);
            }
            if let Some(fd) = ruleset_fd {
                if libc::prctl(libc::PR_SET_NO_NEW_PRIVS, 1, 0, 0, 0) != 0 {
                    return Err(io::Error::last_os_error());
                }
                if libc::syscall(libc::SYS_landlock_restrict_self, fd, 0) != 0 {
                    return Err(io::Error::last_os_error());
                }
            }
            Ok(())
        });
    }
    let mut child = cmd.spawn()?;
    drop(ruleset);
    let started = Instant::now();
    let pid = child.id() as libc::pid_t;

    let mut stdin = child.stdin.take().expect("piped");
    let input = job.stdin.clone();
    std::thread::spawn(move || {
        let _ = stdin.write_all(&input);
    });
    let (stdout, h1) = collect(child.stdout.take().expect("piped"), limits.output_bytes);
    let (stderr, h2) = collect(child.stderr.take().expect("piped"), limits.output_bytes);

    let (tx, exit_rx) = mpsc::channel();
    std::thread::spawn(move || {
        let mut status = 0;
        // SAFETY: rusage is plain old data.
        let mut usage: libc::rusage = unsafe { std::mem::zeroed() };
        loop {
            // SAFETY: pid is our own unreaped child.
            let r = unsafe { libc::wait4(pid, &mut status, 0, &mut usage) };
            if r == pid || (r < 0 && io::Error::last_os_error().raw_os_error() != Some(libc::EINTR)) {
                break;
            }
        }
        let _ = tx.send((status, usage));
    });
    Ok(Spawned {
        pid,
        started,
        exit_rx,
        stdout,
        stderr,
        readers: vec![h1, h2],
        reaped: None,
    })
}

fn kill_group(pid: libc::pid_t) {
    // SAFETY: signalling a process group we created.
    unsafe {
        libc::killpg(pid, libc::SIGKILL);
    }
}

impl Spawned {
    fn wait(&mut self, timeout: Option<Duration>) -> Exit {
        let mut timed_out = false;
        let result = match (self.reaped, timeout) {
            (Some(r), _) => r,
            (None, Some(t)) => match self.exit_rx.recv_timeout(t) {
                Ok(r) => r,
                Err(_) => {
                    timed_out = true;
                    kill_group(self.pid);
                    self.exit_rx.recv().expect("waiter thread")
                }
            },
            (None, None) => self.exit_rx.recv().expect("waiter thread"),
        };
        self.reaped = Some(result);
        kill_group(self.pid);
        for h in self.readers.drain(..) {
            let _ = h.join();
        }
        let status = result.0;
        if timed_out {
            Exit::Timeout
        } else if libc::WIFSIGNALED(status) {
            Exit::Signal(libc::WTERMSIG(status))
        } else {
            Exit::Code(libc::WEXITSTATUS(status))
        }
    }

    fn outcome(&mut self, exit: Exit) -> RunOutcome {
        let usage = self.reaped.map(|r| r.1);
        RunOutcome {
            stdout: std::mem::take(&mut *self.stdout.lock().unwrap()),
            stderr: std::mem::take(&mut *self.stderr.lock().unwrap()),
            exit,
            wall_time: self.started.elapsed().as_secs_f64(),
            peak_memory: usage.map(|u| u.ru_maxrss.max(0) as u64 * 1024).unwrap_or(0),
        }
    }
}

impl Drop for Spawned {
    fn drop(&mut self) {
        if self.reaped.is_none() {
            kill_group(self.pid);
            let _ = self.exit_rx.recv_timeout(KILL_GRACE);
        }
    }
}

/// Runs `job` to completion or until the wall-clock limit.
pub fn run(job: &Job, limits: &Limits) -> io::Result<RunOutcome> {
    let mut s = spawn_job(job, limits)?;
    let exit = s.wait(Some(limits.wall));
    Ok(s.outcome(exit))
}

/// A long-running supervised process, killed with its group on drop.
pub struct Daemon {
    inner: Spawned,
}

/// Starts `job` in the background; the wall limit is not applied.
pub fn spawn(job: &Job, limits: &Limits) -> io::Result<Daemon> {
    Ok(Daemon {
        inner: spawn_job(job, limits)?,
    })
}

impl Daemon {
    pub fn pid(&self) -> u32 {
        self.inner.pid as u32
    }

    /// Output so far.
    pub fn stdout(&self) -> Vec<u8> {
        self.inner.stdout.lock().unwrap().clone()
    }

    /// Whether the process has exited on its own.
    pub fn has_exited(&mut self) -> bool {
        if self.inner.reaped.is_some() {
            return true;
        }
        match self.inner.exit_rx.try_recv() {
            Ok(r) => {
                self.inner.reaped = Some(r);
                true
            }
            Err(_) => false,
        }
    }

    /// Waits up to `timeout` for the process to exit by itself, then kills
    /// the group.
    pub fn finish(mut self, timeout: Duration) -> RunOutcome {
        let exit = self.inner.wait(Some(timeout));
        self.inner.outcome(exit)
    }

    /// Kills the process group immediately.
    pub fn kill(mut self) -> RunOutcome {
        if !self.has_exited() {
            kill_group(self.inner.pid);
        }
        let exit = self.inner.wait(Some(KILL_GRACE));
        let exit = match exit {
            Exit::Signal(libc::SIGKILL) => Exit::Timeout,
            e => e,
        };
        self.inner.outcome(exit)
    }
}

/// Allocates fresh, never reused directories under a root.
#[derive(Debug, Clone)]
pub struct Workspace {
    root: PathBuf,
}

static NEXT_DIR: AtomicU64 = AtomicU64::new(0);

impl Workspace {
    pub fn new(root: impl Into<PathBuf>) -> io::Result<Self> {
        let root = root.into();
        std::fs::create_dir_all(&root)?;
        Ok(Self {
            root: root.canonicalize()?,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn fresh(&self, label: &str) -> io::Result<PathBuf> {
        loop {
            let n = NEXT_DIR.fetch_add(1, Ordering::Relaxed);
            let dir = self.root.join(format!("{label}-{}-{n}", std::process::id()));
            match std::fs::create_dir(&dir) {
                Ok(()) => return Ok(dir),
                Err(e) if e.kind() == io::ErrorKind::AlreadyExists => continue,
                Err(e) => return Err(e),
            }
        }
    }
}

/// Counts non-zombie processes in process group `pgid` by scanning `/proc`.
pub fn live_group_members(pgid: i32) -> usize {
    let Ok(entries) = std::fs::read_dir("/proc") else {
        return 0;
    };
    entries
        .filter_map(|e| std::fs::read_to_string(e.ok()?.path().join("stat")).ok())
        .filter(|stat| {
            // Fields after the parenthesised command name: state ppid pgrp ...
            let Some(rest) = stat.rsplit_once(')').map(|(_, r)| r) else {
                return false;
            };
            let f: Vec<&str> = rest.split_whitespace().collect();
            f.len() > 2 && f[0] != "Z" && f[2].parse() == Ok(pgid)
        })
        .count()
}

/// Reserves a currently free loopback TCP port.
pub fn free_port() -> io::Result<u16> {
    let l = std::net::TcpListener::bind(("127.0.0.1", 0))?;
    Ok(l.local_addr()?.port())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ws() -> (tempfile::TempDir, Workspace) {
        let t = tempfile::tempdir().unwrap();
        let w = Workspace::new(t.path()).unwrap();
        (t, w)
    }

    #[test]
    fn captures_output_and_code() {
        let (_t, w) = ws();
        let job = Job::new(["/bin/sh", "-c", "printf 'a\\0b'; echo err >&2; exit 3"], w.fresh("j").unwrap());
        let out = run(&job, &Limits::default()).unwrap();
        assert_eq!(out.stdout, b"a\0b");
        assert_eq!(out.stderr, b"err\n");
        assert_eq!(out.exit, Exit::Code(3));
    }

    #[test]
    fn stdin_is_delivered() {
        let (_t, w) = ws();
        let job = Job::new(["/bin/cat"], w.fresh("j").unwrap()).stdin("hello");
        assert_eq!(run(&job, &Limits::default()).unwrap().stdout, b"hello");
    }

    #[test]
    fn timeout_kills_whole_group() {
        let (_t, w) = ws();
        let dir = w.fresh("j").unwrap();
        let job = Job::new(["/bin/sh", "-c", "sleep 30 & sleep 30 & echo $$; wait"], &dir);
        let out = run(&job, &Limits::default().with_wall(Duration::from_millis(300))).unwrap();
        assert_eq!(out.exit, Exit::Timeout);
        let pgid: i32 = out.stdout_str().trim().parse().unwrap();
        std::thread::sleep(Duration::from_millis(50));
        assert_eq!(live_group_members(pgid), 0, "process group survived");
    }

    #[test]
    fn fault_signals_are_reported() {
        let (_t, w) = ws();
        let job = Job::new(["/bin/sh", "-c", "kill -SEGV $$"], w.fresh("j").unwrap());
        let out = run(&job, &Limits::default()).unwrap();
        assert_eq!(out.exit, Exit::Signal(libc::SIGSEGV));
        assert!(out.exit.is_fault());
        assert!(!Exit::Code(1).is_fault());
    }

    #[test]
    fn writes_outside_workdir_fail() {
        if !landlock_available() {
            return;
        }
        let (t, w) = ws();
        let outside = t.path().join("outside.txt");
        let dir = w.fresh("j").unwrap();
        let script = format!("echo x > {}; echo y > inside.txt", outside.display());
        let job = Job::new(["/bin/sh", "-c", &script], &dir);
        run(&job, &Limits::default()).unwrap();
        assert!(!outside.exists());
        assert!(dir.join("inside.txt").exists());
    }

    #[test]
    fn output_is_capped() {
        let (_t, w) = ws();
        let job = Job::new(["/bin/sh", "-c", "yes | head -c 100000"], w.fresh("j").unwrap());
        let limits = Limits {
            output_bytes: 1000,
            ..Limits::default()
        };
        let out = run(&job, &limits).unwrap();
        assert_eq!(out.stdout.len(), 1000);
        assert_eq!(out.exit, Exit::Code(0));
    }

    #[test]
    fn fresh_dirs_are_distinct() {
        let (_t, w) = ws();
        let a = w.fresh("x").unwrap();
        let b = w.fresh("x").unwrap();
        assert_ne!(a, b);
    }
}
