//! Creation dates from git history.
//!
//! A function's creation date is the earliest committer timestamp that
//! `git blame` attributes to any of its lines at the sample's commit.

use std::collections::{BTreeMap, HashMap};
use std::io;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::{Arc, RwLock};

use chrono::{DateTime, NaiveDateTime};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{is_commit_sha, FunctionSample};
use crate::Timestamp;

/// Environment variable naming the git executable to use.
pub const GIT_ENV: &str = "SAMEPROJ_GIT";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProvenanceError {
    #[error("git executable {0:?} could not be run")]
    GitUnavailable(PathBuf),
    #[error("no git repository at {0:?}")]
    RepoMissing(PathBuf),
    #[error("commit {sha} not found in {repo:?}")]
    CommitMissing { repo: PathBuf, sha: String },
    #[error("{path} does not exist at commit {sha}")]
    FileMissing { sha: String, path: String },
    #[error("lines {start}-{end} are outside {path} ({file_lines} lines at {sha})")]
    RangeOutOfFile {
        path: String,
        sha: String,
        start: u32,
        end: u32,
        file_lines: usize,
    },
    #[error("no blame lines to take a creation date from")]
    EmptyInput,
    #[error("git {command} failed: {stderr}")]
    GitFailed { command: String, stderr: String },
    #[error("unparsable git output: {0}")]
    BadOutput(String),
}

impl ProvenanceError {
    /// True when the failure is about the environment rather than the data.
    pub fn is_environmental(&self) -> bool {
        matches!(self, ProvenanceError::GitUnavailable(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineBlame {
    pub file_path: String,
    pub line_no: u32,
    pub commit_sha: String,
    pub authored_ts: Timestamp,
}

/// Earliest timestamp over a function's lines.
pub fn creation_date(blames: &[LineBlame]) -> Result<Timestamp, ProvenanceError> {
    blames
        .iter()
        .map(|b| b.authored_ts)
        .min()
        .ok_or(ProvenanceError::EmptyInput)
}

/// Parse a git-style date (`2015-08-26 12:57:28 +0200`) into UTC seconds.
/// Dates without an offset are taken as UTC.
pub fn parse_git_date(text: &str) -> Option<Timestamp> {
    let text = text.trim();
    if let Ok(dt) = DateTime::parse_from_str(text, "%Y-%m-%d %H:%M:%S %z") {
        return Some(dt.timestamp());
    }
    NaiveDateTime::parse_from_str(text, "%Y-%m-%d %H:%M:%S")
        .ok()
        .map(|dt| dt.and_utc().timestamp())
}

#[derive(Debug, Clone)]
pub struct Git {
    bin: PathBuf,
}

impl Default for Git {
    fn default() -> Self {
        Git::new("git")
    }
}

impl Git {
    pub fn new(bin: impl Into<PathBuf>) -> Self {
        Git { bin: bin.into() }
    }

    /// Uses `$SAMEPROJ_GIT` when set, otherwise `git` from `PATH`.
    pub fn from_env() -> Self {
        match std::env::var_os(GIT_ENV) {
            Some(bin) if !bin.is_empty() => Git::new(bin),
            _ => Git::default(),
        }
    }

    pub fn bin(&self) -> &Path {
        &self.bin
    }

    fn output(&self, dir: Option<&Path>, args: &[&str]) -> Result<Output, ProvenanceError> {
        let mut cmd = Command::new(&self.bin);
        if let Some(dir) = dir {
            cmd.arg("-C").arg(dir);
        }
        cmd.args(args).env("LC_ALL", "C");
        cmd.output().map_err(|e| match e.kind() {
            io::ErrorKind::NotFound | io::ErrorKind::PermissionDenied => {
                ProvenanceError::GitUnavailable(self.bin.clone())
            }
            _ => ProvenanceError::GitFailed {
                command: args.join(" "),
                stderr: e.to_string(),
            },
        })
    }

    fn checked(&self, dir: &Path, args: &[&str]) -> Result<String, ProvenanceError> {
        let out = self.output(Some(dir), args)?;
        if !out.status.success() {
            return Err(ProvenanceError::GitFailed {
                command: args.join(" "),
                stderr: String::from_utf8_lossy(&out.stderr).trim().to_string(),
            });
        }
        Ok(String::from_utf8_lossy(&out.stdout).into_owned())
    }

    /// `git --version`, e.g. `git version 2.34.1`.
    pub fn version(&self) -> Result<String, ProvenanceError> {
        let out = self.output(None, &["--version"])?;
        if !out.status.success() {
            return Err(ProvenanceError::GitUnavailable(self.bin.clone()));
        }
        Ok(String::from_utf8_lossy(&out.stdout).trim().to_string())
    }

    pub fn ensure_repo(&self, repo: &Path) -> Result<(), ProvenanceError> {
        if !repo.is_dir() {
            return Err(ProvenanceError::RepoMissing(repo.to_path_buf()));
        }
        let out = self.output(Some(repo), &["rev-parse", "--git-dir"])?;
        if out.status.success() {
            Ok(())
        } else {
            Err(ProvenanceError::RepoMissing(repo.to_path_buf()))
        }
    }

    pub fn ensure_commit(&self, repo: &Path, sha: &str) -> Result<(), ProvenanceError> {
        let missing = || ProvenanceError::CommitMissing {
            repo: repo.to_path_buf(),
            sha: sha.to_string(),
        };
        if !is_commit_sha(sha) {
            return Err(missing());
        }
        let spec = format!("{sha}^{{commit}}");
        let out = self.output(Some(repo), &["cat-file", "-e", &spec])?;
        if out.status.success() {
            Ok(())
        } else {
            Err(missing())
        }
    }

    /// Committer time of the most recent commit on `HEAD`.
    pub fn head_commit_time(&self, repo: &Path) -> Result<Timestamp, ProvenanceError> {
        self.ensure_repo(repo)?;
        let text = self.checked(repo, &["log", "-1", "--format=%ct", "HEAD"])?;
        text.trim()
            .parse()
            .map_err(|_| ProvenanceError::BadOutput(text.trim().to_string()))
    }

    /// Blame every line of `path` at `sha` with `--line-porcelain`.
    fn blame_file(
        &self,
        repo: &Path,
        sha: &str,
        path: &str,
        ignore_revs: Option<&Path>,
    ) -> Result<Vec<LineBlame>, ProvenanceError> {
        self.ensure_repo(repo)?;
        self.ensure_commit(repo, sha)?;
        let object = format!("{sha}:{path}");
        let exists = self.output(Some(repo), &["cat-file", "-e", &object])?;
        if !exists.status.success() {
            return Err(ProvenanceError::FileMissing {
                sha: sha.to_string(),
                path: path.to_string(),
            });
        }

        let ignore_arg;
        let mut args = vec!["blame", "--line-porcelain"];
        if let Some(file) = ignore_revs {
            ignore_arg = file.to_string_lossy().into_owned();
            args.push("--ignore-revs-file");
            args.push(&ignore_arg);
        }
        args.extend([sha, "--", path]);
        let text = self.checked(repo, &args)?;
        parse_line_porcelain(&text, path)
    }
}

/// Parse `git blame --line-porcelain` output into one record per line,
/// using the `committer-time` header.
pub fn parse_line_porcelain(text: &str, path: &str) -> Result<Vec<LineBlame>, ProvenanceError> {
    let mut out = Vec::new();
    // Header values seen so far for each commit; porcelain mode only prints
    // them on a commit's first appearance.
    let mut times: HashMap<String, Timestamp> = HashMap::new();
    let mut current: Option<(String, u32)> = None;

    for line in text.lines() {
        if line.starts_with('\t') {
            let (sha, line_no) = current
                .take()
                .ok_or_else(|| ProvenanceError::BadOutput("content before header".into()))?;
            let ts = *times.get(&sha).ok_or_else(|| {
                ProvenanceError::BadOutput(format!("no committer-time for {sha}"))
            })?;
            out.push(LineBlame {
                file_path: path.to_string(),
                line_no,
                commit_sha: sha,
                authored_ts: ts,
            });
            continue;
        }
        let mut fields = line.split(' ');
        let head = fields.next().unwrap_or_default();
        if head.len() == 40 && head.bytes().all(|b| b.is_ascii_hexdigit()) {
            let _orig = fields.next();
            let final_line = fields
                .next()
                .and_then(|s| s.parse::<u32>().ok())
                .ok_or_else(|| ProvenanceError::BadOutput(line.to_string()))?;
            current = Some((head.to_string(), final_line));
        } else if head == "committer-time" {
            let (sha, _) = current
                .as_ref()
                .ok_or_else(|| ProvenanceError::BadOutput(line.to_string()))?;
            let ts = fields
                .next()
                .and_then(|s| s.parse::<Timestamp>().ok())
                .ok_or_else(|| ProvenanceError::BadOutput(line.to_string()))?;
            times.insert(sha.clone(), ts);
        }
    }
    Ok(out)
}

type CacheKey = (PathBuf, String, String);

/// Blame front-end with a per-(repo, sha, file) cache.
#[derive(Debug, Default)]
pub struct Blamer {
    git: Git,
    ignore_revs: Option<PathBuf>,
    cache: RwLock<HashMap<CacheKey, Arc<Vec<LineBlame>>>>,
}

impl Blamer {
    pub fn new(git: Git) -> Self {
        Blamer {
            git,
            ignore_revs: None,
            cache: RwLock::default(),
        }
    }

    /// Pass `--ignore-revs-file` to every blame call.
    pub fn with_ignore_revs(mut self, file: impl Into<PathBuf>) -> Self {
        self.ignore_revs = Some(file.into());
        self
    }

    pub fn git(&self) -> &Git {
        &self.git
    }

    fn file_blame(
        &self,
        repo: &Path,
        path: &str,
        sha: &str,
    ) -> Result<Arc<Vec<LineBlame>>, ProvenanceError> {
        let key = (repo.to_path_buf(), sha.to_string(), path.to_string());
        if let Some(hit) = self.cache.read().expect("blame cache poisoned").get(&key) {
            return Ok(Arc::clone(hit));
        }
        let lines = Arc::new(
            self.git
                .blame_file(repo, sha, path, self.ignore_revs.as_deref())?,
        );
        self.cache
            .write()
            .expect("blame cache poisoned")
            .insert(key, Arc::clone(&lines));
        Ok(lines)
    }

    /// One [`LineBlame`] per line in `line_start..=line_end`.
    pub fn blame_span(
        &self,
        repo: &Path,
        file_path: &str,
        commit_sha: &str,
        line_start: u32,
        line_end: u32,
    ) -> Result<Vec<LineBlame>, ProvenanceError> {
        let lines = self.file_blame(repo, file_path, commit_sha)?;
        let out_of_range = line_start == 0 || line_start > line_end || line_end as usize > lines.len();
        if out_of_range {
            return Err(ProvenanceError::RangeOutOfFile {
                path: file_path.to_string(),
                sha: commit_sha.to_string(),
                start: line_start,
                end: line_end,
                file_lines: lines.len(),
            });
        }
        Ok(lines[line_start as usize - 1..line_end as usize].to_vec())
    }

    pub fn creation_ts(&self, repo: &Path, sample: &FunctionSample) -> Result<Timestamp, ProvenanceError> {
        let blames = self.blame_span(
            repo,
            &sample.file_path,
            &sample.commit_sha,
            sample.line_start,
            sample.line_end,
        )?;
        creation_date(&blames)
    }
}

/// Checkout location for a repository slug: `<root>/<owner>/<name>`.
pub fn repo_dir(repos_root: &Path, repo_slug: &str) -> PathBuf {
    repo_slug.split('/').fold(repos_root.to_path_buf(), |p, part| p.join(part))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotationFailure {
    pub sample_id: String,
    pub error: ProvenanceError,
}

#[derive(Debug, Default)]
pub struct Annotation {
    /// Successfully dated samples, in input order.
    pub annotated: Vec<FunctionSample>,
    pub failures: Vec<AnnotationFailure>,
}

/// Date every sample. Repositories are processed in parallel, samples of
/// one repository sequentially. Failures are collected, never fatal.
pub fn annotate_corpus(samples: Vec<FunctionSample>, repos_root: &Path, blamer: &Blamer) -> Annotation {
    let mut by_repo: BTreeMap<String, Vec<(usize, FunctionSample)>> = BTreeMap::new();
    for (idx, sample) in samples.into_iter().enumerate() {
        by_repo.entry(sample.repo_slug.clone()).or_default().push((idx, sample));
    }

    let mut results: Vec<(usize, Result<FunctionSample, AnnotationFailure>)> = by_repo
        .into_par_iter()
        .flat_map_iter(|(slug, group)| {
            let dir = repo_dir(repos_root, &slug);
            group.into_iter().map(move |(idx, mut sample)| {
                let res = match blamer.creation_ts(&dir, &sample) {
                    Ok(ts) => {
                        sample.creation_ts = Some(ts);
                        Ok(sample)
                    }
                    Err(error) => Err(AnnotationFailure {
                        sample_id: sample.id.clone(),
                        error,
                    }),
                };
                (idx, res)
            })
        })
        .collect();
    results.sort_by_key(|(idx, _)| *idx);

    let mut out = Annotation::default();
    for (_, res) in results {
        match res {
            Ok(s) => out.annotated.push(s),
            Err(f) => out.failures.push(f),
        }
    }
    out
}
