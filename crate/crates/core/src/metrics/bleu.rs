use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

const MAX_ORDER: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BleuError {
    #[error("reference is empty")]
    EmptyReference,
    #[error("no candidate/reference pairs")]
    EmptyCorpus,
    #[error("unknown smoothing {0:?} (expected orange-add1, add1-all or none)")]
    UnknownSmoothing(String),
}

/// How n-gram precisions are smoothed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Smoothing {
    /// Add one to matches and totals for orders 2..=4; unigrams unsmoothed.
    #[default]
    OrangeAdd1,
    /// Add one at every order, unigrams included.
    Add1All,
    /// Plain BLEU precisions.
    None,
}

impl Smoothing {
    pub fn as_str(self) -> &'static str {
        match self {
            Smoothing::OrangeAdd1 => "orange-add1",
            Smoothing::Add1All => "add1-all",
            Smoothing::None => "none",
        }
    }

    fn offset(self, order: usize) -> usize {
        match self {
            Smoothing::OrangeAdd1 if order >= 2 => 1,
            Smoothing::Add1All => 1,
            _ => 0,
        }
    }
}

impl fmt::Display for Smoothing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Smoothing {
    type Err = BleuError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "orange-add1" => Ok(Smoothing::OrangeAdd1),
            "add1-all" => Ok(Smoothing::Add1All),
            "none" => Ok(Smoothing::None),
            _ => Err(BleuError::UnknownSmoothing(s.to_string())),
        }
    }
}

/// Sentence-level BLEU-4 components. `precisions[n - 1]` is the smoothed
/// n-gram precision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BleuBreakdown {
    pub precisions: [f64; MAX_ORDER],
    pub bp: f64,
    pub score: f64,
    pub cand_len: usize,
    pub ref_len: usize,
}

fn ngram_counts<T: AsRef<str>>(tokens: &[T], order: usize) -> HashMap<Vec<&str>, usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= order {
        for window in tokens.windows(order) {
            let key: Vec<&str> = window.iter().map(AsRef::as_ref).collect();
            *counts.entry(key).or_insert(0) += 1;
        }
    }
    counts
}

/// Smoothed BLEU-4 of one candidate against one reference, scaled to 0..=100.
///
/// An empty candidate has `bp = 0` and scores 0.
pub fn sentence_bleu4<C, R>(candidate: &[C], reference: &[R], smoothing: Smoothing) -> Result<BleuBreakdown, BleuError>
where
    C: AsRef<str>,
    R: AsRef<str>,
{
    if reference.is_empty() {
        return Err(BleuError::EmptyReference);
    }
    let cand_len = candidate.len();
    let ref_len = reference.len();

    let mut precisions = [0.0; MAX_ORDER];
    for (slot, order) in precisions.iter_mut().zip(1..=MAX_ORDER) {
        let cand = ngram_counts(candidate, order);
        let refs = ngram_counts(reference, order);
        let matched: usize = cand
            .iter()
            .map(|(gram, &c)| c.min(refs.get(gram).copied().unwrap_or(0)))
            .sum();
        let total = cand_len.saturating_sub(order - 1);
        let add = smoothing.offset(order);
        *slot = if total + add == 0 {
            0.0
        } else {
            (matched + add) as f64 / (total + add) as f64
        };
    }

    let bp = if cand_len > ref_len {
        1.0
    } else if cand_len == 0 {
        0.0
    } else {
        (1.0 - ref_len as f64 / cand_len as f64).exp()
    };

    let score = if precisions.iter().all(|&p| p > 0.0) {
        let log_mean = precisions.iter().map(|p| p.ln()).sum::<f64>() / MAX_ORDER as f64;
        100.0 * bp * log_mean.exp()
    } else {
        0.0
    };

    Ok(BleuBreakdown {
        precisions,
        bp,
        score,
        cand_len,
        ref_len,
    })
}

/// Mean of sentence scores.
pub fn corpus_bleu4<C, R>(pairs: &[(C, R)], smoothing: Smoothing) -> Result<f64, BleuError>
where
    C: AsRef<[String]>,
    R: AsRef<[String]>,
{
    if pairs.is_empty() {
        return Err(BleuError::EmptyCorpus);
    }
    let mut total = 0.0;
    for (cand, reference) in pairs {
        total += sentence_bleu4(cand.as_ref(), reference.as_ref(), smoothing)?.score;
    }
    Ok(total / pairs.len() as f64)
}

/// Whitespace tokenization with optional lowercasing, for raw-text inputs.
pub fn tokenize_whitespace(text: &str, lowercase: bool) -> Vec<String> {
    text.split_whitespace()
        .map(|t| if lowercase { t.to_lowercase() } else { t.to_string() })
        .collect()
}
