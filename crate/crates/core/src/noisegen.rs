//! Docstring corruption for denoising-decoder pretraining.
//!
//! Five noise modes in the style of BART: permutation, rotation, token
//! deletion, token masking and span infilling. Each training document gets
//! `noise_modes_per_sample` distinct modes.

use std::fmt;
use std::str::FromStr;

use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::PipelineConfig;
use crate::seed::{derive_seed, rng_from_seed};

pub const MASK_TOKEN: &str = "<mask>";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NoiseError {
    #[error("cannot corrupt an empty token sequence")]
    EmptyInput,
    #[error("need at least {need} tokens, got {have}")]
    TooShort { have: usize, need: usize },
    #[error("unknown noise mode {0:?}")]
    UnknownMode(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseMode {
    Permutation,
    Rotation,
    Deletion,
    Masking,
    Infilling,
}

impl NoiseMode {
    pub const ALL: [NoiseMode; 5] = [
        NoiseMode::Permutation,
        NoiseMode::Rotation,
        NoiseMode::Deletion,
        NoiseMode::Masking,
        NoiseMode::Infilling,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            NoiseMode::Permutation => "permutation",
            NoiseMode::Rotation => "rotation",
            NoiseMode::Deletion => "deletion",
            NoiseMode::Masking => "masking",
            NoiseMode::Infilling => "infilling",
        }
    }

    /// Fewest tokens the mode accepts.
    pub fn min_len(self) -> usize {
        match self {
            NoiseMode::Deletion => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for NoiseMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NoiseMode {
    type Err = NoiseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        NoiseMode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| NoiseError::UnknownMode(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoisedExample {
    pub original: Vec<String>,
    pub corrupted: Vec<String>,
    pub mode: NoiseMode,
    pub seed: u64,
}

/// Number of tokens to delete or mask: `max(1, round(p * n))`, rounding
/// halves up.
pub fn corruption_count(n: usize, p: f64) -> usize {
    // the epsilon absorbs binary error in products like 0.15 * 10
    let rounded = (p * n as f64 + 0.5 + 1e-9).floor() as usize;
    rounded.max(1)
}

fn non_empty(tokens: &[String]) -> Result<(), NoiseError> {
    if tokens.is_empty() {
        Err(NoiseError::EmptyInput)
    } else {
        Ok(())
    }
}

pub fn permute<R: Rng + ?Sized>(tokens: &[String], rng: &mut R) -> Result<Vec<String>, NoiseError> {
    non_empty(tokens)?;
    let mut out = tokens.to_vec();
    out.shuffle(rng);
    Ok(out)
}

/// `tokens[k..] ++ tokens[..k]`.
pub fn rotate_at(tokens: &[String], k: usize) -> Vec<String> {
    let mut out = tokens.to_vec();
    out.rotate_left(k % tokens.len().max(1));
    out
}

/// Rotate so a uniformly chosen token comes first. `k = 0` is allowed.
pub fn rotate<R: Rng + ?Sized>(tokens: &[String], rng: &mut R) -> Result<Vec<String>, NoiseError> {
    non_empty(tokens)?;
    let k = rng.gen_range(0..tokens.len());
    Ok(rotate_at(tokens, k))
}

/// Drop `max(1, round(p * n))` positions, capped so one token survives.
pub fn delete<R: Rng + ?Sized>(tokens: &[String], p: f64, rng: &mut R) -> Result<Vec<String>, NoiseError> {
    let n = tokens.len();
    if n < 2 {
        return Err(NoiseError::TooShort { have: n, need: 2 });
    }
    let d = corruption_count(n, p).min(n - 1);
    let mut dropped = vec![false; n];
    for i in index::sample(rng, n, d) {
        dropped[i] = true;
    }
    Ok(tokens
        .iter()
        .zip(dropped)
        .filter(|(_, gone)| !gone)
        .map(|(t, _)| t.clone())
        .collect())
}

/// Replace `max(1, round(p * n))` distinct positions with [`MASK_TOKEN`].
pub fn mask<R: Rng + ?Sized>(tokens: &[String], p: f64, rng: &mut R) -> Result<Vec<String>, NoiseError> {
    non_empty(tokens)?;
    let n = tokens.len();
    let d = corruption_count(n, p).min(n);
    let mut out = tokens.to_vec();
    for i in index::sample(rng, n, d) {
        out[i] = MASK_TOKEN.to_string();
    }
    Ok(out)
}

/// Poisson draw by CDF inversion of one uniform variate.
pub fn sample_poisson<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut k = 0usize;
    let mut pmf = (-lambda).exp();
    let mut cdf = pmf;
    // the cap only matters for u within rounding error of 1
    let cap = (lambda * 20.0) as usize + 100;
    while u >= cdf && k < cap {
        k += 1;
        pmf *= lambda / k as f64;
        cdf += pmf;
    }
    k
}

/// Replace `tokens[start..start + len]` with a single mask token.
pub fn infill_span(tokens: &[String], start: usize, len: usize) -> Vec<String> {
    let mut out = Vec::with_capacity(tokens.len() + 1 - len.min(tokens.len()));
    out.extend_from_slice(&tokens[..start]);
    out.push(MASK_TOKEN.to_string());
    out.extend_from_slice(&tokens[start + len..]);
    out
}

/// Span infilling with `L ~ Poisson(lambda)` clipped to `[0, n]`; the span
/// start is uniform over valid starts. `L = 0` inserts a bare mask.
pub fn infill<R: Rng + ?Sized>(tokens: &[String], lambda: f64, rng: &mut R) -> Result<Vec<String>, NoiseError> {
    non_empty(tokens)?;
    let n = tokens.len();
    let len = sample_poisson(lambda, rng).min(n);
    let start = rng.gen_range(0..=n - len);
    Ok(infill_span(tokens, start, len))
}

/// Apply one mode with its own seed.
pub fn apply_mode(
    tokens: &[String],
    mode: NoiseMode,
    cfg: &PipelineConfig,
    seed: u64,
) -> Result<NoisedExample, NoiseError> {
    let mut rng = rng_from_seed(seed);
    let corrupted = match mode {
        NoiseMode::Permutation => permute(tokens, &mut rng)?,
        NoiseMode::Rotation => rotate(tokens, &mut rng)?,
        NoiseMode::Deletion => delete(tokens, cfg.corruption_rate, &mut rng)?,
        NoiseMode::Masking => mask(tokens, cfg.corruption_rate, &mut rng)?,
        NoiseMode::Infilling => infill(tokens, cfg.poisson_lambda, &mut rng)?,
    };
    Ok(NoisedExample {
        original: tokens.to_vec(),
        corrupted,
        mode,
        seed,
    })
}

/// Choose `count` distinct modes uniformly, returned in canonical order.
pub fn choose_modes<R: Rng + ?Sized>(count: usize, rng: &mut R) -> Vec<NoiseMode> {
    let mut picked = index::sample(rng, NoiseMode::ALL.len(), count.min(NoiseMode::ALL.len())).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| NoiseMode::ALL[i]).collect()
}

/// Noise one document with `cfg.noise_modes_per_sample` distinct modes.
///
/// Everything is seeded from `(cfg.rng_seed, sample_id)`, so the output does
/// not depend on corpus order.
pub fn augment(doc: &[String], cfg: &PipelineConfig, sample_id: &str) -> Result<Vec<NoisedExample>, NoiseError> {
    if doc.len() < 2 {
        return Err(NoiseError::TooShort { have: doc.len(), need: 2 });
    }
    let sample_seed = derive_seed(cfg.rng_seed, sample_id);
    let modes = choose_modes(cfg.noise_modes_per_sample, &mut rng_from_seed(sample_seed));
    modes
        .into_iter()
        .map(|mode| apply_mode(doc, mode, cfg, derive_seed(sample_seed, mode.as_str())))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    const ORIGINAL: &str = "Return next line with tag masked with whitespace .";

    fn sorted(mut v: Vec<String>) -> Vec<String> {
        v.sort();
        v
    }

    #[test]
    fn rounding_rule() {
        assert_eq!(corruption_count(20, 0.15), 3);
        assert_eq!(corruption_count(10, 0.15), 2);
        assert_eq!(corruption_count(9, 0.15), 1);
        assert_eq!(corruption_count(2, 0.15), 1);
        assert_eq!(corruption_count(1, 0.15), 1);
        assert_eq!(corruption_count(30, 0.15), 5);
    }

    #[test]
    fn permutation_row_is_a_permutation() {
        let table = toks("with line . masked whitespace next tag with Return");
        assert_eq!(sorted(table), sorted(toks(ORIGINAL)));
        let out = permute(&toks(ORIGINAL), &mut rng_from_seed(1)).unwrap();
        assert_eq!(sorted(out), sorted(toks(ORIGINAL)));
        assert_eq!(permute(&toks("one"), &mut rng_from_seed(1)).unwrap(), toks("one"));
        assert_eq!(
            permute(&toks(ORIGINAL), &mut rng_from_seed(9)).unwrap(),
            permute(&toks(ORIGINAL), &mut rng_from_seed(9)).unwrap()
        );
    }

    #[test]
    fn rotation_row() {
        assert_eq!(
            rotate_at(&toks(ORIGINAL), 5),
            toks("masked with whitespace . Return next line with tag")
        );
        assert_eq!(rotate_at(&toks(ORIGINAL), 0), toks(ORIGINAL));
    }

    #[test]
    fn deletion_lengths() {
        let doc: Vec<String> = (0..20).map(|i| i.to_string()).collect();
        assert_eq!(delete(&doc, 0.15, &mut rng_from_seed(3)).unwrap().len(), 17);
        assert_eq!(delete(&toks("a b"), 0.15, &mut rng_from_seed(3)).unwrap().len(), 1);
        assert_eq!(
            delete(&toks("a"), 0.15, &mut rng_from_seed(3)),
            Err(NoiseError::TooShort { have: 1, need: 2 })
        );
    }

    #[test]
    fn masking_shapes() {
        assert_eq!(mask(&toks("a"), 0.15, &mut rng_from_seed(0)).unwrap(), vec![MASK_TOKEN]);
        let out = mask(&toks(ORIGINAL), 0.15, &mut rng_from_seed(0)).unwrap();
        assert_eq!(out.len(), 9);
        assert_eq!(out.iter().filter(|t| *t == MASK_TOKEN).count(), 1);
        assert_eq!(mask(&[], 0.15, &mut rng_from_seed(0)), Err(NoiseError::EmptyInput));
    }

    #[test]
    fn infilling_row() {
        let out = infill_span(&toks(ORIGINAL), 1, 3);
        assert_eq!(out, toks("Return <mask> tag masked with whitespace ."));
        let inserted = infill_span(&toks("a b"), 2, 0);
        assert_eq!(inserted, toks("a b <mask>"));
    }

    #[test]
    fn augment_two_distinct_modes() {
        let cfg = PipelineConfig::default();
        let out = augment(&toks(ORIGINAL), &cfg, "a/b#X.java#1").unwrap();
        assert_eq!(out.len(), 2);
        assert_ne!(out[0].mode, out[1].mode);
        assert_eq!(out, augment(&toks(ORIGINAL), &cfg, "a/b#X.java#1").unwrap());
        assert!(augment(&toks("x"), &cfg, "id").is_err());
    }

    #[test]
    fn mode_names_round_trip() {
        for m in NoiseMode::ALL {
            assert_eq!(m.as_str().parse::<NoiseMode>().unwrap(), m);
        }
        assert!("swap".parse::<NoiseMode>().is_err());
    }
}
