//! Test-only oracles and fixtures. Nothing here calls into the code paths it
//! is used to check.
#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::Command;

use rand::Rng;

pub const MASK: &str = "<mask>";

// ---------------------------------------------------------------- BLEU oracle

/// Count occurrences of `gram` in `tokens` by scanning every window.
fn occurrences(tokens: &[String], gram: &[String]) -> usize {
    if gram.len() > tokens.len() {
        return 0;
    }
    (0..=tokens.len() - gram.len())
        .filter(|&i| tokens[i..i + gram.len()] == *gram)
        .count()
}

/// Smoothed BLEU-4 by brute force: list every candidate n-gram, clip against
/// the reference by scanning, combine with a geometric mean computed as the
/// fourth root of the product.
pub fn brute_force_bleu(candidate: &[String], reference: &[String]) -> f64 {
    let c = candidate.len();
    let r = reference.len();
    let mut product = 1.0f64;
    for order in 1..=4usize {
        let mut distinct: Vec<&[String]> = Vec::new();
        if c >= order {
            for i in 0..=c - order {
                let g = &candidate[i..i + order];
                if !distinct.contains(&g) {
                    distinct.push(g);
                }
            }
        }
        let matched: usize = distinct
            .iter()
            .map(|g| occurrences(candidate, g).min(occurrences(reference, g)))
            .sum();
        let total = if c >= order { c - order + 1 } else { 0 };
        let p = if order == 1 {
            if total == 0 {
                0.0
            } else {
                matched as f64 / total as f64
            }
        } else {
            (matched as f64 + 1.0) / (total as f64 + 1.0)
        };
        product *= p;
    }
    if product == 0.0 {
        return 0.0;
    }
    let bp = if c > r { 1.0 } else { (1.0 - r as f64 / c as f64).exp() };
    100.0 * bp * product.powf(0.25)
}

pub fn random_tokens<R: Rng>(rng: &mut R, len: usize, vocab: usize) -> Vec<String> {
    (0..len).map(|_| format!("w{}", rng.gen_range(0..vocab))).collect()
}

// ------------------------------------------------------------ Wilcoxon oracle

/// Average ranks by counting: rank = #smaller + (#equal + 1) / 2.
pub fn ranks_by_counting(values: &[f64]) -> Vec<f64> {
    values
        .iter()
        .map(|&v| {
            let smaller = values.iter().filter(|&&w| w < v).count() as f64;
            let equal = values.iter().filter(|&&w| w == v).count() as f64;
            smaller + (equal + 1.0) / 2.0
        })
        .collect()
}

/// Two-sided p-value by enumerating all 2^n sign assignments of the
/// non-zero differences (zeros dropped first).
pub fn enumerated_wilcoxon_p(diffs: &[f64]) -> (f64, f64) {
    let nonzero: Vec<f64> = diffs.iter().copied().filter(|&d| d != 0.0).collect();
    let n = nonzero.len();
    if n == 0 {
        return (0.0, 1.0);
    }
    let abs: Vec<f64> = nonzero.iter().map(|d| d.abs()).collect();
    let ranks = ranks_by_counting(&abs);
    let observed: f64 = nonzero
        .iter()
        .zip(&ranks)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| r)
        .sum();
    let (mut le, mut ge) = (0u64, 0u64);
    for mask in 0u64..(1 << n) {
        let w: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
        // ranks are multiples of 1/2, so sums are exact in binary
        if w <= observed {
            le += 1;
        }
        if w >= observed {
            ge += 1;
        }
    }
    let total = (1u64 << n) as f64;
    (observed, (2.0 * le.min(ge) as f64 / total).min(1.0))
}

// --------------------------------------------------------------- noise checks

/// `max(1, round_half_up(rate_percent * n / 100))` in integer arithmetic.
pub fn expected_corruptions(n: usize, rate_percent: usize) -> usize {
    ((rate_percent * n + 50) / 100).max(1)
}

pub fn is_multiset_permutation(original: &[String], corrupted: &[String]) -> bool {
    let mut a = original.to_vec();
    let mut b = corrupted.to_vec();
    a.sort();
    b.sort();
    a == b
}

pub fn is_rotation(original: &[String], corrupted: &[String]) -> bool {
    let n = original.len();
    n == corrupted.len()
        && (0..n.max(1)).any(|k| {
            corrupted
                .iter()
                .enumerate()
                .all(|(i, t)| *t == original[(i + k) % n])
        })
}

pub fn is_subsequence(sub: &[String], full: &[String]) -> bool {
    let mut it = full.iter();
    sub.iter().all(|s| it.any(|f| f == s))
}

pub fn masked_positions(original: &[String], corrupted: &[String]) -> Option<usize> {
    if original.len() != corrupted.len() {
        return None;
    }
    let mut changed = 0;
    for (o, c) in original.iter().zip(corrupted) {
        if o != c {
            if c != MASK {
                return None;
            }
            changed += 1;
        }
    }
    Some(changed)
}

/// Length of the span replaced by the single mask, if `corrupted` has that
/// shape.
pub fn infilled_span(original: &[String], corrupted: &[String]) -> Option<usize> {
    let n = original.len();
    let m = corrupted.len();
    if m == 0 || m > n + 1 {
        return None;
    }
    let span = n + 1 - m;
    (0..m).find_map(|i| {
        let ok = corrupted[i] == MASK
            && corrupted[..i] == original[..i]
            && corrupted[i + 1..] == original[i + span..];
        ok.then_some(span)
    })
}

pub fn only_known_tokens(original: &[String], corrupted: &[String]) -> bool {
    let known: BTreeSet<&str> = original.iter().map(String::as_str).chain([MASK]).collect();
    corrupted.iter().all(|t| known.contains(t.as_str()))
}

// --------------------------------------------------------------- git fixtures

pub struct FixtureRepo {
    pub dir: PathBuf,
}

fn git(dir: &Path, args: &[&str], date: Option<&str>) -> String {
    let mut cmd = Command::new("git");
    cmd.arg("-C").arg(dir).args(args);
    cmd.env("GIT_CONFIG_NOSYSTEM", "1")
        .env("HOME", dir)
        .env("GIT_AUTHOR_NAME", "Fixture")
        .env("GIT_AUTHOR_EMAIL", "fixture@example.com")
        .env("GIT_COMMITTER_NAME", "Fixture")
        .env("GIT_COMMITTER_EMAIL", "fixture@example.com");
    if let Some(date) = date {
        cmd.env("GIT_AUTHOR_DATE", date).env("GIT_COMMITTER_DATE", date);
    }
    let out = cmd.output().expect("git runs");
    assert!(
        out.status.success(),
        "git {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap().trim().to_string()
}

impl FixtureRepo {
    pub fn init(dir: &Path) -> FixtureRepo {
        std::fs::create_dir_all(dir).unwrap();
        git(dir, &["init", "-q"], None);
        FixtureRepo { dir: dir.to_path_buf() }
    }

    /// Write `path` and commit it at `date` (`@<epoch> +0000` or ISO form);
    /// returns the commit sha.
    pub fn commit_file(&self, path: &str, contents: &str, date: &str) -> String {
        let full = self.dir.join(path);
        if let Some(parent) = full.parent() {
            std::fs::create_dir_all(parent).unwrap();
        }
        std::fs::write(full, contents).unwrap();
        git(&self.dir, &["add", path], None);
        git(&self.dir, &["commit", "-q", "-m", "fixture"], Some(date));
        git(&self.dir, &["rev-parse", "HEAD"], None)
    }

    /// Committer time of `sha` read straight from `git log`.
    pub fn commit_time(&self, sha: &str) -> i64 {
        git(&self.dir, &["log", "-1", "--format=%ct", sha], None).parse().unwrap()
    }
}

pub fn git_available() -> bool {
    Command::new("git").arg("--version").output().is_ok()
}
