//! Feasibility of same-project training and training-cost ratios.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::ProjectCorpus;
use crate::Timestamp;

pub const SECONDS_PER_DAY: i64 = 86_400;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalyticsError {
    #[error("no samples")]
    EmptyInput,
    #[error("timestamps are not sorted")]
    Unsorted,
    #[error("last activity {last} precedes inception {inception}")]
    ActivityBeforeInception { inception: Timestamp, last: Timestamp },
    #[error("sample count threshold must be positive")]
    ZeroThreshold,
    #[error("{0} must be positive")]
    NonPositiveInput(&'static str),
    #[error("project sample {0} has no creation timestamp")]
    MissingTimestamp(String),
}

fn whole_days(from: Timestamp, to: Timestamp) -> i64 {
    (to - from).div_euclid(SECONDS_PER_DAY)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityRow {
    pub repo_slug: String,
    pub samples: usize,
    pub inception_ts: Timestamp,
    pub last_activity_ts: Timestamp,
    pub lifespan_days: i64,
    /// Days from inception until the n-th sample exists; absent when the
    /// project never reaches n samples.
    pub days_to_n: Option<i64>,
    /// Share of the lifespan left once n samples exist.
    pub benefit_fraction: Option<f64>,
}

/// `(lifespan - days_to_n) / lifespan`, clamped to `[0, 1]`. Undefined for
/// a zero-day lifespan.
pub fn benefit_fraction(lifespan_days: i64, days_to_n: i64) -> Option<f64> {
    if lifespan_days <= 0 {
        return None;
    }
    let f = (lifespan_days - days_to_n) as f64 / lifespan_days as f64;
    Some(f.clamp(0.0, 1.0))
}

/// Feasibility row from ascending sample creation times and the time of the
/// repository's last commit.
pub fn feasibility(
    repo_slug: &str,
    timestamps: &[Timestamp],
    last_activity_ts: Timestamp,
    n: usize,
) -> Result<FeasibilityRow, AnalyticsError> {
    if n == 0 {
        return Err(AnalyticsError::ZeroThreshold);
    }
    let inception = *timestamps.first().ok_or(AnalyticsError::EmptyInput)?;
    if timestamps.windows(2).any(|w| w[0] > w[1]) {
        return Err(AnalyticsError::Unsorted);
    }
    if last_activity_ts < inception {
        return Err(AnalyticsError::ActivityBeforeInception {
            inception,
            last: last_activity_ts,
        });
    }
    let lifespan_days = whole_days(inception, last_activity_ts);
    let days_to_n = timestamps.get(n - 1).map(|&t| whole_days(inception, t));
    Ok(FeasibilityRow {
        repo_slug: repo_slug.to_string(),
        samples: timestamps.len(),
        inception_ts: inception,
        last_activity_ts,
        lifespan_days,
        days_to_n,
        benefit_fraction: days_to_n.and_then(|d| benefit_fraction(lifespan_days, d)),
    })
}

pub fn project_feasibility(
    project: &ProjectCorpus,
    last_activity_ts: Timestamp,
    n: usize,
) -> Result<FeasibilityRow, AnalyticsError> {
    let timestamps = project
        .samples
        .iter()
        .map(|s| s.creation_ts.ok_or_else(|| AnalyticsError::MissingTimestamp(s.id.clone())))
        .collect::<Result<Vec<_>, _>>()?;
    feasibility(&project.repo_slug, &timestamps, last_activity_ts, n)
}

/// Median; the mean of the two middle values for even counts.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len().is_multiple_of(2) {
        (v[mid - 1] + v[mid]) / 2.0
    } else {
        v[mid]
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CohortMedians {
    pub lifespan_days: f64,
    /// Over rows that reached n samples.
    pub days_to_n: Option<f64>,
}

impl CohortMedians {
    /// Benefit fraction implied by the two medians.
    pub fn benefit_fraction(&self) -> Option<f64> {
        let d = self.days_to_n?;
        (self.lifespan_days > 0.0).then(|| ((self.lifespan_days - d) / self.lifespan_days).clamp(0.0, 1.0))
    }
}

pub fn cohort_medians(rows: &[FeasibilityRow]) -> Result<CohortMedians, AnalyticsError> {
    let lifespans: Vec<f64> = rows.iter().map(|r| r.lifespan_days as f64).collect();
    let days: Vec<f64> = rows.iter().filter_map(|r| r.days_to_n).map(|d| d as f64).collect();
    Ok(CohortMedians {
        lifespan_days: median(&lifespans).ok_or(AnalyticsError::EmptyInput)?,
        days_to_n: median(&days),
    })
}

/// Same-project over cross-project training work, counted in sample-epochs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostRatio {
    pub same_samples: u64,
    pub same_epochs: u64,
    pub cross_samples: u64,
    pub cross_epochs: u64,
    pub ratio: f64,
}

impl CostRatio {
    pub fn percent(&self) -> f64 {
        self.ratio * 100.0
    }
}

pub fn cost_ratio(
    same_samples: u64,
    same_epochs: u64,
    cross_samples: u64,
    cross_epochs: u64,
) -> Result<CostRatio, AnalyticsError> {
    for (value, name) in [
        (same_samples, "same_samples"),
        (same_epochs, "same_epochs"),
        (cross_samples, "cross_samples"),
        (cross_epochs, "cross_epochs"),
    ] {
        if value == 0 {
            return Err(AnalyticsError::NonPositiveInput(name));
        }
    }
    let ratio = (same_samples as f64 * same_epochs as f64) / (cross_samples as f64 * cross_epochs as f64);
    Ok(CostRatio {
        same_samples,
        same_epochs,
        cross_samples,
        cross_epochs,
        ratio,
    })
}

pub fn feasibility_markdown(rows: &[FeasibilityRow], n: usize) -> String {
    let mut out = format!("| Project | Samples | Lifespan (days) | Days to {n} samples | Benefit |\n|---|---|---|---|---|\n");
    for r in rows {
        let days = r.days_to_n.map_or("-".to_string(), |d| d.to_string());
        let benefit = r
            .benefit_fraction
            .map_or("-".to_string(), |b| format!("{:.1}%", b * 100.0));
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} |",
            r.repo_slug, r.samples, r.lifespan_days, days, benefit
        );
    }
    if let Ok(m) = cohort_medians(rows) {
        let days = m.days_to_n.map_or("-".to_string(), |d| format!("{d}"));
        let benefit = m
            .benefit_fraction()
            .map_or("-".to_string(), |b| format!("{:.1}%", b * 100.0));
        let _ = writeln!(out, "| **median** | | {} | {} | {} |", m.lifespan_days, days, benefit);
    }
    out
}

pub fn cost_markdown(rows: &[(String, CostRatio)]) -> String {
    let mut out = String::from(
        "| Setting | Same-project samples | Epochs | Cross-project samples | Epochs | Ratio |\n|---|---|---|---|---|---|\n",
    );
    for (label, c) in rows {
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} | {:.2}% |",
            label,
            c.same_samples,
            c.same_epochs,
            c.cross_samples,
            c.cross_epochs,
            c.percent()
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const DAY: i64 = SECONDS_PER_DAY;

    #[test]
    fn everything_on_day_zero() {
        let ts = vec![1_000; 100];
        let row = feasibility("a/b", &ts, 1_000 + 1000 * DAY, 100).unwrap();
        assert_eq!(row.lifespan_days, 1000);
        assert_eq!(row.days_to_n, Some(0));
        assert_eq!(row.benefit_fraction, Some(1.0));
    }

    #[test]
    fn python_cohort_medians() {
        let f = benefit_fraction(1365, 496).unwrap();
        assert!((f - 0.64).abs() < 0.005);
    }

    #[test]
    fn java_cohort_fraction_is_computed_not_quoted() {
        let f = benefit_fraction(2872, 335).unwrap();
        assert!((f - 0.8834).abs() < 1e-4);
    }

    #[test]
    fn short_project_never_reaches_n() {
        let ts: Vec<i64> = (0..50).map(|i| i * DAY).collect();
        let row = feasibility("a/b", &ts, 400 * DAY, 100).unwrap();
        assert_eq!(row.days_to_n, None);
        assert_eq!(row.benefit_fraction, None);
    }

    #[test]
    fn days_floor() {
        let ts = [0, DAY - 1, 2 * DAY + 5];
        let row = feasibility("a/b", &ts, 10 * DAY - 1, 2).unwrap();
        assert_eq!(row.days_to_n, Some(0));
        assert_eq!(row.lifespan_days, 9);
        let row = feasibility("a/b", &ts, 10 * DAY - 1, 3).unwrap();
        assert_eq!(row.days_to_n, Some(2));
    }

    #[test]
    fn feasibility_errors() {
        assert_eq!(feasibility("a/b", &[], 0, 1), Err(AnalyticsError::EmptyInput));
        assert_eq!(feasibility("a/b", &[5, 1], 10, 1), Err(AnalyticsError::Unsorted));
        assert!(matches!(
            feasibility("a/b", &[5], 1, 1),
            Err(AnalyticsError::ActivityBeforeInception { .. })
        ));
    }

    #[test]
    fn medians() {
        assert_eq!(median(&[1.0, 2.0, 3.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]), Some(2.5));
        assert_eq!(median(&[]), None);
        assert_eq!(cohort_medians(&[]), Err(AnalyticsError::EmptyInput));
    }

    #[test]
    fn cost_ratios() {
        let c = cost_ratio(1341, 30, 164_923, 10).unwrap();
        assert!((c.ratio - 40_230.0 / 1_649_230.0).abs() < 1e-15);
        assert_eq!(cost_ratio(0, 30, 1, 10), Err(AnalyticsError::NonPositiveInput("same_samples")));
        assert!(cost_markdown(&[("Java".into(), c)]).contains("2.44%"));
    }
}
