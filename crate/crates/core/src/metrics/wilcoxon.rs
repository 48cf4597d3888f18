use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

/// Largest count of non-zero differences scored with the exact null
/// distribution; larger samples use the normal approximation.
pub const EXACT_MAX_N: usize = 25;

const MIN_PAIRS: usize = 6;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CompareError {
    #[error("score lists differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least {MIN_PAIRS} paired scores, got {0}")]
    TooFewPairs(usize),
}

/// Treatment of zero differences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ZeroMethod {
    /// Drop zeros before ranking.
    #[default]
    Wilcox,
    /// Rank zeros with the rest, then drop them.
    Pratt,
}

/// Ranks of the non-zero absolute differences with their signs. Tied
/// magnitudes share the average of their ranks.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedRanks {
    pub ranks: Vec<f64>,
    pub positive: Vec<bool>,
    pub zeros: usize,
}

impl SignedRanks {
    pub fn len(&self) -> usize {
        self.ranks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranks.is_empty()
    }

    /// Sum of ranks of positive differences.
    pub fn w_plus(&self) -> f64 {
        self.ranks
            .iter()
            .zip(&self.positive)
            .filter(|(_, &p)| p)
            .map(|(r, _)| r)
            .sum()
    }
}

fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // 1-based ranks i+1..=j+1 share their mean
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

pub fn signed_ranks(diffs: &[f64], zero_method: ZeroMethod) -> SignedRanks {
    let zeros = diffs.iter().filter(|&&d| d == 0.0).count();
    let (ranks, positive) = match zero_method {
        ZeroMethod::Wilcox => {
            let nonzero: Vec<f64> = diffs.iter().copied().filter(|&d| d != 0.0).collect();
            let abs: Vec<f64> = nonzero.iter().map(|d| d.abs()).collect();
            (average_ranks(&abs), nonzero.iter().map(|&d| d > 0.0).collect())
        }
        ZeroMethod::Pratt => {
            let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
            let all = average_ranks(&abs);
            diffs
                .iter()
                .zip(all)
                .filter(|(&d, _)| d != 0.0)
                .map(|(&d, r)| (r, d > 0.0))
                .unzip()
        }
    };
    SignedRanks { ranks, positive, zeros }
}

/// Two-sided p-value from the exact permutation distribution of W+ given
/// the observed ranks: every sign assignment is equally likely under H0.
pub fn wilcoxon_exact_p(sr: &SignedRanks) -> f64 {
    if sr.is_empty() {
        return 1.0;
    }
    // average ranks are multiples of 1/2; work in half-rank units
    let doubled: Vec<usize> = sr.ranks.iter().map(|r| (r * 2.0).round() as usize).collect();
    let max_sum: usize = doubled.iter().sum();
    let mut counts = vec![0.0f64; max_sum + 1];
    counts[0] = 1.0;
    let mut reach = 0;
    for &r in &doubled {
        for s in (0..=reach).rev() {
            if counts[s] != 0.0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    let total = 2f64.powi(sr.len() as i32);
    let observed = (sr.w_plus() * 2.0).round() as usize;
    let lower: f64 = counts[..=observed].iter().sum();
    let upper: f64 = counts[observed..].iter().sum();
    (2.0 * lower.min(upper) / total).min(1.0)
}

/// Two-sided p-value from the normal approximation with continuity
/// correction. Mean and variance come from the actual ranks, which folds in
/// the tie correction.
pub fn wilcoxon_normal_p(sr: &SignedRanks) -> f64 {
    if sr.is_empty() {
        return 1.0;
    }
    let mean = sr.ranks.iter().sum::<f64>() / 2.0;
    let var = sr.ranks.iter().map(|r| r * r).sum::<f64>() / 4.0;
    let dev = ((sr.w_plus() - mean).abs() - 0.5).max(0.0);
    let z = dev / var.sqrt();
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    (2.0 * std_normal.sf(z)).min(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedComparison {
    /// `a[i] - b[i]`.
    pub per_sample_diffs: Vec<f64>,
    pub mean_diff: f64,
    /// W+, the rank sum of positive differences.
    pub wilcoxon_stat: f64,
    pub p_value: f64,
    pub noticeable: bool,
    /// Number of non-zero differences that entered the test.
    pub n_used: usize,
    /// `"exact"`, `"normal"` or `"none"` when every difference is zero.
    pub method: String,
    pub all_zero_diffs: bool,
}

/// Paired two-sided Wilcoxon signed-rank test plus a practical-significance
/// check on the mean difference.
pub fn compare_models(
    scores_a: &[f64],
    scores_b: &[f64],
    threshold: f64,
    zero_method: ZeroMethod,
) -> Result<PairedComparison, CompareError> {
    if scores_a.len() != scores_b.len() {
        return Err(CompareError::LengthMismatch(scores_a.len(), scores_b.len()));
    }
    let n = scores_a.len();
    if n < MIN_PAIRS {
        return Err(CompareError::TooFewPairs(n));
    }
    let diffs: Vec<f64> = scores_a.iter().zip(scores_b).map(|(a, b)| a - b).collect();
    let mean_diff = scores_a.iter().sum::<f64>() / n as f64 - scores_b.iter().sum::<f64>() / n as f64;
    let noticeable = mean_diff.abs() >= threshold;

    let sr = signed_ranks(&diffs, zero_method);
    let (p_value, method) = if sr.is_empty() {
        (1.0, "none")
    } else if sr.len() <= EXACT_MAX_N {
        (wilcoxon_exact_p(&sr), "exact")
    } else {
        (wilcoxon_normal_p(&sr), "normal")
    };

    Ok(PairedComparison {
        wilcoxon_stat: sr.w_plus(),
        n_used: sr.len(),
        all_zero_diffs: sr.is_empty(),
        method: method.to_string(),
        per_sample_diffs: diffs,
        mean_diff,
        p_value,
        noticeable,
    })
}
