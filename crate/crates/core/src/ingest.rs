//! CodeXGLUE / CodeSearchNet JSONL ingestion.
//!
//! Each input line is one JSON object describing a function. The required
//! keys are `repo`, `path`, `sha`, `url`, `language`, `code_tokens` and
//! `docstring_tokens`; `code`, `docstring` and `creation_ts` are read when
//! present and every other key is carried through untouched.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::Timestamp;

const REQUIRED_KEYS: [&str; 7] = [
    "repo",
    "path",
    "sha",
    "url",
    "language",
    "code_tokens",
    "docstring_tokens",
];

/// Keys owned by [`FunctionSample`]; everything else lands in `extra`.
const KNOWN_KEYS: [&str; 10] = [
    "repo",
    "path",
    "sha",
    "url",
    "language",
    "code_tokens",
    "docstring_tokens",
    "code",
    "docstring",
    "creation_ts",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    Java,
    Python,
}

impl Language {
    pub const ALL: [Language; 2] = [Language::Java, Language::Python];

    pub fn as_str(self) -> &'static str {
        match self {
            Language::Java => "java",
            Language::Python => "python",
        }
    }

    /// Language implied by a file extension, if it is one we handle.
    pub fn from_path(path: &str) -> Option<Language> {
        let ext = path.rsplit_once('.')?.1;
        match ext {
            "java" => Some(Language::Java),
            "py" => Some(Language::Python),
            _ => None,
        }
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown language {0:?} (expected java or python)")]
pub struct UnknownLanguage(pub String);

impl FromStr for Language {
    type Err = UnknownLanguage;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "java" => Ok(Language::Java),
            "python" | "py" => Ok(Language::Python),
            _ => Err(UnknownLanguage(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("not a GitHub blob URL with a line anchor: {0}")]
pub struct BadUrl(pub String);

/// Components of `https://github.com/<owner>/<name>/blob/<sha>/<path>#L<a>-L<b>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceLocation {
    pub repo_slug: String,
    pub commit_sha: String,
    pub file_path: String,
    pub line_start: u32,
    pub line_end: u32,
}

pub fn parse_source_url(url: &str) -> Result<SourceLocation, BadUrl> {
    let bad = || BadUrl(url.to_string());
    let rest = url
        .strip_prefix("https://")
        .or_else(|| url.strip_prefix("http://"))
        .unwrap_or(url);
    let (location, anchor) = rest.split_once('#').ok_or_else(bad)?;
    let mut parts = location.splitn(6, '/');
    let _host = parts.next().filter(|h| !h.is_empty()).ok_or_else(bad)?;
    let owner = parts.next().filter(|s| !s.is_empty()).ok_or_else(bad)?;
    let name = parts.next().filter(|s| !s.is_empty()).ok_or_else(bad)?;
    if parts.next() != Some("blob") {
        return Err(bad());
    }
    let sha = parts.next().filter(|s| is_commit_sha(s)).ok_or_else(bad)?;
    let file_path = parts.next().filter(|s| !s.is_empty()).ok_or_else(bad)?;

    let (line_start, line_end) = match anchor.split_once('-') {
        Some((a, b)) => (parse_line_anchor(a), parse_line_anchor(b)),
        None => {
            let line = parse_line_anchor(anchor);
            (line, line)
        }
    };
    let (line_start, line_end) = match (line_start, line_end) {
        (Some(a), Some(b)) if a <= b => (a, b),
        _ => return Err(bad()),
    };

    Ok(SourceLocation {
        repo_slug: format!("{owner}/{name}"),
        commit_sha: sha.to_string(),
        file_path: file_path.to_string(),
        line_start,
        line_end,
    })
}

fn parse_line_anchor(s: &str) -> Option<u32> {
    let digits = s.strip_prefix('L')?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok().filter(|&n| n >= 1)
}

pub fn is_commit_sha(s: &str) -> bool {
    s.len() == 40 && s.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f'))
}

/// One code/docstring pair with repository provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionSample {
    pub id: String,
    pub repo_slug: String,
    pub file_path: String,
    pub commit_sha: String,
    pub line_start: u32,
    pub line_end: u32,
    pub language: Language,
    pub code_tokens: Vec<String>,
    pub docstring_tokens: Vec<String>,
    pub raw_code: String,
    pub raw_docstring: String,
    pub source_url: String,
    pub creation_ts: Option<Timestamp>,
    /// Unrecognised input keys, re-emitted verbatim.
    pub extra: Map<String, Value>,
}

impl FunctionSample {
    pub fn make_id(repo_slug: &str, file_path: &str, line_start: u32) -> String {
        format!("{repo_slug}#{file_path}#{line_start}")
    }

    /// Checks every structural invariant. Called on construction by the
    /// parser, exposed so hand-built samples can be checked too.
    pub fn validate(&self) -> Result<(), String> {
        if self.line_start == 0 || self.line_start > self.line_end {
            return Err(format!(
                "invalid line span {}-{}",
                self.line_start, self.line_end
            ));
        }
        if self.code_tokens.is_empty() {
            return Err("code_tokens is empty".into());
        }
        if self.docstring_tokens.is_empty() {
            return Err("docstring_tokens is empty".into());
        }
        if !is_commit_sha(&self.commit_sha) {
            return Err(format!("sha {:?} is not 40 lowercase hex digits", self.commit_sha));
        }
        if Language::from_path(&self.file_path) != Some(self.language) {
            return Err(format!(
                "language {} does not match file extension of {}",
                self.language, self.file_path
            ));
        }
        let expected = Self::make_id(&self.repo_slug, &self.file_path, self.line_start);
        if self.id != expected {
            return Err(format!("id {:?} should be {:?}", self.id, expected));
        }
        Ok(())
    }

    /// The CodeSearchNet `partition` label, if the record carries one.
    pub fn partition(&self) -> Option<&str> {
        self.extra.get("partition").and_then(Value::as_str)
    }

    pub fn to_json(&self) -> Value {
        let mut obj = self.extra.clone();
        obj.insert("repo".into(), self.repo_slug.clone().into());
        obj.insert("path".into(), self.file_path.clone().into());
        obj.insert("sha".into(), self.commit_sha.clone().into());
        obj.insert("url".into(), self.source_url.clone().into());
        obj.insert("language".into(), self.language.as_str().into());
        obj.insert("code_tokens".into(), self.code_tokens.clone().into());
        obj.insert("docstring_tokens".into(), self.docstring_tokens.clone().into());
        obj.insert("code".into(), self.raw_code.clone().into());
        obj.insert("docstring".into(), self.raw_docstring.clone().into());
        if let Some(ts) = self.creation_ts {
            obj.insert("creation_ts".into(), ts.into());
        }
        Value::Object(obj)
    }

    pub fn from_json(value: Value) -> Result<FunctionSample, String> {
        let Value::Object(mut obj) = value else {
            return Err("record is not a JSON object".into());
        };
        if let Some(missing) = REQUIRED_KEYS.iter().find(|k| !obj.contains_key(**k)) {
            return Err(format!("missing required key {missing:?}"));
        }

        let repo = take_string(&mut obj, "repo")?;
        let path = take_string(&mut obj, "path")?;
        let sha = take_string(&mut obj, "sha")?;
        let url = take_string(&mut obj, "url")?;
        let language: Language = take_string(&mut obj, "language")?
            .parse()
            .map_err(|e: UnknownLanguage| e.to_string())?;
        let code_tokens = take_tokens(&mut obj, "code_tokens")?;
        let docstring_tokens = take_tokens(&mut obj, "docstring_tokens")?;
        let raw_code = take_optional_string(&mut obj, "code")?;
        let raw_docstring = take_optional_string(&mut obj, "docstring")?;
        let creation_ts = match obj.remove("creation_ts") {
            None | Some(Value::Null) => None,
            Some(v) => Some(v.as_i64().ok_or("creation_ts is not an integer")?),
        };
        debug_assert!(KNOWN_KEYS.iter().all(|k| !obj.contains_key(*k)));

        let loc = parse_source_url(&url).map_err(|e| e.to_string())?;
        if loc.repo_slug != repo || loc.commit_sha != sha || loc.file_path != path {
            return Err(format!(
                "url {url:?} disagrees with repo/sha/path fields"
            ));
        }

        let sample = FunctionSample {
            id: FunctionSample::make_id(&repo, &path, loc.line_start),
            repo_slug: repo,
            file_path: path,
            commit_sha: sha,
            line_start: loc.line_start,
            line_end: loc.line_end,
            language,
            code_tokens,
            docstring_tokens,
            raw_code,
            raw_docstring,
            source_url: url,
            creation_ts,
            extra: obj,
        };
        sample.validate()?;
        Ok(sample)
    }
}

fn take_string(obj: &mut Map<String, Value>, key: &str) -> Result<String, String> {
    match obj.remove(key) {
        Some(Value::String(s)) => Ok(s),
        Some(_) => Err(format!("{key:?} is not a string")),
        None => Err(format!("missing required key {key:?}")),
    }
}

fn take_optional_string(obj: &mut Map<String, Value>, key: &str) -> Result<String, String> {
    match obj.remove(key) {
        None | Some(Value::Null) => Ok(String::new()),
        Some(Value::String(s)) => Ok(s),
        Some(_) => Err(format!("{key:?} is not a string")),
    }
}

fn take_tokens(obj: &mut Map<String, Value>, key: &str) -> Result<Vec<String>, String> {
    match obj.remove(key) {
        Some(Value::Array(items)) => items
            .into_iter()
            .map(|v| match v {
                Value::String(s) => Ok(s),
                _ => Err(format!("{key:?} contains a non-string token")),
            })
            .collect(),
        Some(_) => Err(format!("{key:?} is not an array")),
        None => Err(format!("missing required key {key:?}")),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {reason}")]
pub struct MalformedLine {
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error(transparent)]
    Malformed(#[from] MalformedLine),
    #[error("read error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ParseMode {
    /// Abort on the first malformed line.
    #[default]
    Strict,
    /// Skip malformed lines and report them.
    Lenient,
}

#[derive(Debug, Default)]
pub struct ParseOutcome {
    pub samples: Vec<FunctionSample>,
    pub skipped: Vec<MalformedLine>,
}

/// Parse a JSONL stream. Blank lines are ignored; line numbers are 1-based.
pub fn parse_jsonl<R: BufRead>(reader: R, mode: ParseMode) -> Result<ParseOutcome, IngestError> {
    let mut out = ParseOutcome::default();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str::<Value>(&line)
            .map_err(|e| format!("invalid JSON: {e}"))
            .and_then(FunctionSample::from_json);
        match parsed {
            Ok(sample) => out.samples.push(sample),
            Err(reason) => {
                let err = MalformedLine { line: idx + 1, reason };
                match mode {
                    ParseMode::Strict => return Err(err.into()),
                    ParseMode::Lenient => out.skipped.push(err),
                }
            }
        }
    }
    Ok(out)
}

pub fn write_jsonl<'a, W, I>(mut writer: W, samples: I) -> std::io::Result<()>
where
    W: Write,
    I: IntoIterator<Item = &'a FunctionSample>,
{
    for sample in samples {
        serde_json::to_writer(&mut writer, &sample.to_json())?;
        writer.write_all(b"\n")?;
    }
    writer.flush()
}
