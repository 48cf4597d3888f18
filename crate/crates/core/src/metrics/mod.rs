//! Smooth BLEU-4 scoring and paired model comparison.

mod bleu;
mod report;
mod wilcoxon;

pub use bleu::{corpus_bleu4, sentence_bleu4, tokenize_whitespace, BleuBreakdown, BleuError, Smoothing};
pub use report::{read_aligned, AlignedPair, BleuReport, ComparisonBlock, ReportError, SampleScore};
pub use wilcoxon::{
    compare_models, signed_ranks, wilcoxon_exact_p, wilcoxon_normal_p, CompareError, PairedComparison,
    SignedRanks, ZeroMethod, EXACT_MAX_N,
};
