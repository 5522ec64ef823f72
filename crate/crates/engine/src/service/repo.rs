// Copyright (C) 2026 The breakit Authors. All rights reserved.
//
// SPDX-License-Identifier: Apache-2.0

//! Contestant repositories, read through local bare mirrors with the git CLI.

use std::path::Path;
use std::process::{Command, Stdio};

fn git(args: &[&str]) -> Result<String, String> {
    let out = Command::new("git")
        .args(args)
        .env("GIT_TERMINAL_PROMPT", "0")
        .stdin(Stdio::null())
        .output()
        .map_err(|e| format!("git: {e}"))?;
    if out.status.success() {
        Ok(String::from_utf8_lossy(&out.stdout).into_owned())
    } else {
        Err(String::from_utf8_lossy(&out.stderr).trim().to_owned())
    }
}

fn path_str(p: &Path) -> Result<&str, String> {
    p.to_str().ok_or_else(|| format!("non-UTF-8 path {}", p.display()))
}

/// Creates or refreshes the mirror of `url` at `mirror`.
pub fn sync(url: &str, mirror: &Path) -> Result<(), String> {
    let m = path_str(mirror)?;
    if mirror.join("HEAD").exists() {
        git(&["-C", m, "fetch", "--prune", "--quiet", "origin", "+refs/*:refs/*"]).map(drop)
    } else {
        if let Some(parent) = mirror.parent() {
            std::fs::create_dir_all(parent).map_err(|e| e.to_string())?;
        }
        git(&["clone", "--mirror", "--quiet", url, m]).map(drop)
    }
}

/// The commit `rev` names in the mirror.
pub fn resolve(mirror: &Path, rev: &str) -> Result<String, String> {
    let spec = format!("{rev}^{{commit}}");
    git(&["-C", path_str(mirror)?, "rev-parse", "--verify", "--quiet", &spec])
        .map(|s| s.trim().to_owned())
        .map_err(|e| if e.is_empty() { format!("no commit {rev}") } else { e })
}

/// Extracts the tree of `commit` into `dest`, which must not exist yet.
pub fn archive(mirror: &Path, commit: &str, dest: &Path) -> Result<(), String> {
    let tmp = dest.with_extension("partial");
    let _ = std::fs::remove_dir_all(&tmp);
    std::fs::create_dir_all(&tmp).map_err(|e| e.to_string())?;
    let mut archive = Command::new("git")
        .args(["-C", path_str(mirror)?, "archive", "--format=tar", commit])
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| format!("git: {e}"))?;
    let tar = Command::new("tar")
        .args(["-x", "-C", path_str(&tmp)?])
        .stdin(archive.stdout.take().expect("piped"))
        .output()
        .map_err(|e| format!("tar: {e}"))?;
    let status = archive.wait().map_err(|e| e.to_string())?;
    if !status.success() || !tar.status.success() {
        return Err(format!("could not archive {commit}: {}", String::from_utf8_lossy(&tar.stderr).trim()));
    }
    std::fs::rename(&tmp, dest).map_err(|e| e.to_string())
}

/// `git diff` between two commits.
pub fn diff(mirror: &Path, from: &str, to: &str) -> Result<String, String> {
    git(&["-C", path_str(mirror)?, "diff", from, to])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn commit(repo: &Path, file: &str, text: &str) {
        std::fs::write(repo.join(file), text).unwrap();
        let r = repo.to_str().unwrap();
        git(&["-C", r, "add", "-A"]).unwrap();
        git(&["-C", r, "-c", "user.name=t", "-c", "user.email=t@example.com", "commit", "-q", "-m", "x"]).unwrap();
    }

    #[test]
    fn mirror_archive_and_diff() {
        let tmp = tempfile::tempdir().unwrap();
        let repo = tmp.path().join("repo");
        std::fs::create_dir(&repo).unwrap();
        git(&["init", "-q", repo.to_str().unwrap()]).unwrap();
        commit(&repo, "a.txt", "one\n");
        let mirror = tmp.path().join("m.git");
        sync(repo.to_str().unwrap(), &mirror).unwrap();
        let first = resolve(&mirror, "HEAD").unwrap();
        commit(&repo, "a.txt", "two\n");
        assert_eq!(resolve(&mirror, "HEAD").unwrap(), first);
        sync(repo.to_str().unwrap(), &mirror).unwrap();
        let second = resolve(&mirror, "HEAD").unwrap();
        assert_ne!(first, second);
        let dest = tmp.path().join("snap");
        archive(&mirror, &first, &dest).unwrap();
        assert_eq!(std::fs::read_to_string(dest.join("a.txt")).unwrap(), "one\n");
        assert!(diff(&mirror, &first, &second).unwrap().contains("+two"));
        assert!(resolve(&mirror, "nonexistent").is_err());
        assert!(sync("/nonexistent/repo", &tmp.path().join("x.git")).is_err());
    }
}
