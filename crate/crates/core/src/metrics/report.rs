//! Prediction/reference files and the JSON score report.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::bleu::{sentence_bleu4, tokenize_whitespace, BleuError, Smoothing};
use super::wilcoxon::{compare_models, CompareError, PairedComparison, ZeroMethod};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("prediction file has {0} lines but reference file has {1}")]
    LineCountMismatch(usize, usize),
    #[error("id {0:?} appears more than once")]
    DuplicateId(String),
    #[error("id {0:?} has a prediction but no reference")]
    MissingReference(String),
    #[error("reports share no sample ids")]
    NoCommonIds,
    #[error("sample {id}: {source}")]
    Bleu { id: String, source: BleuError },
    #[error(transparent)]
    Compare(#[from] CompareError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlignedPair {
    pub id: String,
    pub candidate: String,
    pub reference: String,
}

/// Split `id<TAB>text` lines; returns `None` unless every line has a tab.
fn keyed_lines(text: &str) -> Option<Vec<(String, String)>> {
    let lines: Vec<&str> = text.lines().collect();
    if lines.is_empty() || !lines.iter().all(|l| l.contains('\t')) {
        return None;
    }
    Some(
        lines
            .into_iter()
            .map(|l| {
                let (id, rest) = l.split_once('\t').expect("checked above");
                (id.to_string(), rest.to_string())
            })
            .collect(),
    )
}

/// Pair hypotheses with references. When both files use `id<TAB>text`
/// lines they are joined on id (in prediction order); otherwise lines are
/// paired by position and the id is the 0-based line number.
pub fn read_aligned(predictions: &str, references: &str) -> Result<Vec<AlignedPair>, ReportError> {
    if let (Some(preds), Some(refs)) = (keyed_lines(predictions), keyed_lines(references)) {
        let mut by_id = BTreeMap::new();
        for (id, text) in refs {
            if by_id.insert(id.clone(), text).is_some() {
                return Err(ReportError::DuplicateId(id));
            }
        }
        let mut seen = HashSet::new();
        return preds
            .into_iter()
            .map(|(id, candidate)| {
                if !seen.insert(id.clone()) {
                    return Err(ReportError::DuplicateId(id));
                }
                let reference = by_id
                    .get(&id)
                    .cloned()
                    .ok_or_else(|| ReportError::MissingReference(id.clone()))?;
                Ok(AlignedPair { id, candidate, reference })
            })
            .collect();
    }

    let preds: Vec<&str> = predictions.lines().collect();
    let refs: Vec<&str> = references.lines().collect();
    if preds.len() != refs.len() {
        return Err(ReportError::LineCountMismatch(preds.len(), refs.len()));
    }
    Ok(preds
        .into_iter()
        .zip(refs)
        .enumerate()
        .map(|(i, (c, r))| AlignedPair {
            id: i.to_string(),
            candidate: c.to_string(),
            reference: r.to_string(),
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleScore {
    pub id: String,
    pub score: f64,
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    pub p4: f64,
    pub bp: f64,
    pub cand_len: usize,
    pub ref_len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonBlock {
    pub model_a: String,
    pub model_b: String,
    pub threshold: f64,
    pub zero_method: ZeroMethod,
    #[serde(flatten)]
    pub result: PairedComparison,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BleuReport {
    pub corpus_score: f64,
    pub smoothing: Smoothing,
    pub lowercase: bool,
    pub per_sample: Vec<SampleScore>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub comparisons: Vec<ComparisonBlock>,
}

impl BleuReport {
    /// Score aligned pairs; texts are split on whitespace.
    pub fn score(pairs: &[AlignedPair], smoothing: Smoothing, lowercase: bool) -> Result<BleuReport, ReportError> {
        let per_sample = pairs
            .iter()
            .map(|p| {
                let cand = tokenize_whitespace(&p.candidate, lowercase);
                let reference = tokenize_whitespace(&p.reference, lowercase);
                let b = sentence_bleu4(&cand, &reference, smoothing).map_err(|source| ReportError::Bleu {
                    id: p.id.clone(),
                    source,
                })?;
                Ok(SampleScore {
                    id: p.id.clone(),
                    score: b.score,
                    p1: b.precisions[0],
                    p2: b.precisions[1],
                    p3: b.precisions[2],
                    p4: b.precisions[3],
                    bp: b.bp,
                    cand_len: b.cand_len,
                    ref_len: b.ref_len,
                })
            })
            .collect::<Result<Vec<_>, ReportError>>()?;
        if per_sample.is_empty() {
            return Err(ReportError::Bleu {
                id: String::new(),
                source: BleuError::EmptyCorpus,
            });
        }
        let corpus_score = per_sample.iter().map(|s| s.score).sum::<f64>() / per_sample.len() as f64;
        Ok(BleuReport {
            corpus_score,
            smoothing,
            lowercase,
            per_sample,
            comparisons: Vec::new(),
        })
    }

    /// Pair two reports on sample id (order of `self`) and run the paired
    /// test on their sentence scores.
    pub fn compare(
        &self,
        other: &BleuReport,
        threshold: f64,
        zero_method: ZeroMethod,
    ) -> Result<PairedComparison, ReportError> {
        let theirs: BTreeMap<&str, f64> = other.per_sample.iter().map(|s| (s.id.as_str(), s.score)).collect();
        let (a, b): (Vec<f64>, Vec<f64>) = self
            .per_sample
            .iter()
            .filter_map(|s| theirs.get(s.id.as_str()).map(|&o| (s.score, o)))
            .unzip();
        if a.is_empty() {
            return Err(ReportError::NoCommonIds);
        }
        Ok(compare_models(&a, &b, threshold, zero_method)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn positional_alignment() {
        let pairs = read_aligned("a b\nc d\n", "a b\nc e\n").unwrap();
        assert_eq!(pairs.len(), 2);
        assert_eq!(pairs[1].id, "1");
        assert!(matches!(read_aligned("a\n", "a\nb\n"), Err(ReportError::LineCountMismatch(1, 2))));
    }

    #[test]
    fn keyed_alignment() {
        let pairs = read_aligned("2\tx y\n1\tp q\n", "1\tp q\n2\tx z\n").unwrap();
        assert_eq!(pairs[0].id, "2");
        assert_eq!(pairs[0].reference, "x z");
        assert!(matches!(
            read_aligned("3\tx\n", "1\tx\n"),
            Err(ReportError::MissingReference(_))
        ));
    }

    #[test]
    fn identical_files_score_100() {
        let text = "returns the value\nsets the name of the user\n";
        let report = BleuReport::score(&read_aligned(text, text).unwrap(), Smoothing::OrangeAdd1, false).unwrap();
        assert_eq!(report.corpus_score, 100.0);
        let json = serde_json::to_value(&report).unwrap();
        assert_eq!(json["per_sample"][0]["p1"], 1.0);
        assert_eq!(json["smoothing"], "orange-add1");
    }
}
