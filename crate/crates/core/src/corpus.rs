//! Per-project datasets with a leakage-safe time-series split.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{self, File};
use std::io::{self, BufWriter};
use std::path::{Path, PathBuf};

use rand::seq::{index, SliceRandom};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::PipelineConfig;
use crate::ingest::{write_jsonl, FunctionSample, Language};
use crate::seed::{derive_seed, rng_from_seed};
use crate::Timestamp;

/// Smallest project we are willing to split.
pub const MIN_PROJECT_SAMPLES: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CorpusError {
    #[error("sample {0} has no creation timestamp")]
    MissingTimestamp(String),
    #[error("project {repo} has {have} samples, need at least {need}")]
    TooFewSamples { repo: String, have: usize, need: usize },
    #[error("project {0}: every candidate boundary is inside one timestamp group, training set would be empty")]
    DegenerateSplit(String),
    #[error("samples are not sorted by (creation_ts, id)")]
    Unsorted,
    #[error("project {0} mixes languages")]
    MixedLanguages(String),
    #[error("cannot draw {k} samples from {available}")]
    KTooLarge { k: usize, available: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Valid, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }
}

/// Training-set size bucket.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Category {
    /// More than `category_hi` training samples.
    I,
    /// Between `category_lo` and `category_hi`, inclusive.
    II,
    /// Fewer than `category_lo`.
    III,
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Category::I => "I",
            Category::II => "II",
            Category::III => "III",
        })
    }
}

pub fn categorize(train_count: usize, cfg: &PipelineConfig) -> Category {
    if train_count > cfg.category_hi {
        Category::I
    } else if train_count >= cfg.category_lo {
        Category::II
    } else {
        Category::III
    }
}

fn sort_key(s: &FunctionSample) -> (Option<Timestamp>, &str) {
    (s.creation_ts, s.id.as_str())
}

/// Group samples by repository, each group sorted by `(creation_ts, id)`.
pub fn segment(
    samples: impl IntoIterator<Item = FunctionSample>,
) -> Result<BTreeMap<String, Vec<FunctionSample>>, CorpusError> {
    let mut groups: BTreeMap<String, Vec<FunctionSample>> = BTreeMap::new();
    for s in samples {
        if s.creation_ts.is_none() {
            return Err(CorpusError::MissingTimestamp(s.id));
        }
        groups.entry(s.repo_slug.clone()).or_default().push(s);
    }
    for group in groups.values_mut() {
        group.sort_by(|a, b| sort_key(a).cmp(&sort_key(b)));
    }
    Ok(groups)
}

/// Index layout of a split over `n` time-sorted items.
///
/// Items `0..train_len` are training data; `valid` and `test` hold indices
/// from `train_len..n`, each list ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitPlan {
    pub train_len: usize,
    pub valid: Vec<usize>,
    pub test: Vec<usize>,
}

/// Training prefix length under the conservative rule.
///
/// Starts at `floor(ratio * n)` and moves earlier while the item just before
/// the cut shares its timestamp with the item at the cut. Returns `None`
/// when that walks the cut back to zero.
pub fn conservative_cut(timestamps: &[Timestamp], train_ratio: f64) -> Option<usize> {
    let n = timestamps.len();
    let mut cut = ((train_ratio * n as f64).floor() as usize).min(n.saturating_sub(1));
    while cut > 0 && timestamps[cut - 1] == timestamps[cut] {
        cut -= 1;
    }
    (cut > 0).then_some(cut)
}

/// Split ascending timestamps into train/valid/test. The holdout is
/// shuffled with `seed`; test receives the larger half.
pub fn plan_split(
    timestamps: &[Timestamp],
    train_ratio: f64,
    seed: u64,
) -> Result<SplitPlan, CorpusError> {
    if timestamps.windows(2).any(|w| w[0] > w[1]) {
        return Err(CorpusError::Unsorted);
    }
    let n = timestamps.len();
    let train_len = conservative_cut(timestamps, train_ratio)
        .ok_or_else(|| CorpusError::DegenerateSplit(String::new()))?;

    let mut holdout: Vec<usize> = (train_len..n).collect();
    holdout.shuffle(&mut rng_from_seed(seed));
    let test_len = holdout.len().div_ceil(2);
    let mut test = holdout[..test_len].to_vec();
    let mut valid = holdout[test_len..].to_vec();
    test.sort_unstable();
    valid.sort_unstable();
    Ok(SplitPlan { train_len, valid, test })
}

/// One project's samples, their split assignment and category.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectCorpus {
    pub repo_slug: String,
    pub language: Language,
    pub samples: Vec<FunctionSample>,
    pub split: BTreeMap<String, Split>,
    pub category: Category,
    /// Earliest holdout timestamp.
    pub boundary_ts: Timestamp,
    pub seed: u64,
}

impl ProjectCorpus {
    pub fn part(&self, which: Split) -> impl Iterator<Item = &FunctionSample> + '_ {
        self.samples
            .iter()
            .filter(move |s| self.split.get(&s.id) == Some(&which))
    }

    pub fn count(&self, which: Split) -> usize {
        self.split.values().filter(|&&s| s == which).count()
    }

    /// Checks ordering, coverage, leakage safety and category consistency.
    pub fn check_invariants(&self, cfg: &PipelineConfig) -> Result<(), String> {
        if self.samples.windows(2).any(|w| sort_key(&w[0]) > sort_key(&w[1])) {
            return Err("samples not sorted by (creation_ts, id)".into());
        }
        if self.split.len() != self.samples.len()
            || self.samples.iter().any(|s| !self.split.contains_key(&s.id))
        {
            return Err("split does not cover exactly the sample ids".into());
        }
        let ts = |which| self.part(which).filter_map(|s| s.creation_ts);
        let train_max = ts(Split::Train).max();
        let holdout_min = ts(Split::Valid).chain(ts(Split::Test)).min();
        if let (Some(a), Some(b)) = (train_max, holdout_min) {
            if a >= b {
                return Err(format!("train timestamp {a} not before holdout timestamp {b}"));
            }
        }
        if categorize(self.count(Split::Train), cfg) != self.category {
            return Err("category inconsistent with training size".into());
        }
        Ok(())
    }

    pub fn manifest(&self, cfg: &PipelineConfig) -> SplitManifest {
        SplitManifest {
            repo: self.repo_slug.clone(),
            language: self.language,
            counts: SplitCounts {
                train: self.count(Split::Train),
                valid: self.count(Split::Valid),
                test: self.count(Split::Test),
            },
            category: self.category,
            boundary_ts: self.boundary_ts,
            seed: self.seed,
            config: cfg.clone(),
        }
    }
}

/// Time-split one project's sorted samples.
///
/// The holdout shuffle seed is derived from `cfg.rng_seed` and the repo
/// slug, so each project's split is independent of the others.
pub fn time_split(project: Vec<FunctionSample>, cfg: &PipelineConfig) -> Result<ProjectCorpus, CorpusError> {
    let repo = project
        .first()
        .map(|s| s.repo_slug.clone())
        .unwrap_or_default();
    if project.len() < MIN_PROJECT_SAMPLES {
        return Err(CorpusError::TooFewSamples {
            repo,
            have: project.len(),
            need: MIN_PROJECT_SAMPLES,
        });
    }
    let mut timestamps = Vec::with_capacity(project.len());
    for s in &project {
        timestamps.push(s.creation_ts.ok_or_else(|| CorpusError::MissingTimestamp(s.id.clone()))?);
    }
    if project.windows(2).any(|w| sort_key(&w[0]) > sort_key(&w[1])) {
        return Err(CorpusError::Unsorted);
    }
    let language = project[0].language;
    if project.iter().any(|s| s.language != language || s.repo_slug != repo) {
        return Err(CorpusError::MixedLanguages(repo));
    }

    let seed = derive_seed(cfg.rng_seed, &repo);
    let plan = plan_split(&timestamps, cfg.train_ratio, seed).map_err(|e| match e {
        CorpusError::DegenerateSplit(_) => CorpusError::DegenerateSplit(repo.clone()),
        other => other,
    })?;

    let mut split = BTreeMap::new();
    for s in &project[..plan.train_len] {
        split.insert(s.id.clone(), Split::Train);
    }
    for &i in &plan.valid {
        split.insert(project[i].id.clone(), Split::Valid);
    }
    for &i in &plan.test {
        split.insert(project[i].id.clone(), Split::Test);
    }

    Ok(ProjectCorpus {
        repo_slug: repo,
        language,
        category: categorize(plan.train_len, cfg),
        boundary_ts: timestamps[plan.train_len],
        samples: project,
        split,
        seed,
    })
}

/// Draw `k` items uniformly without replacement, keeping their order.
pub fn subsample_training<T: Clone>(train: &[T], k: usize, seed: u64) -> Result<Vec<T>, CorpusError> {
    if k == 0 || k > train.len() {
        return Err(CorpusError::KTooLarge { k, available: train.len() });
    }
    let mut picked = index::sample(&mut rng_from_seed(seed), train.len(), k).into_vec();
    picked.sort_unstable();
    Ok(picked.into_iter().map(|i| train[i].clone()).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train: usize,
    pub valid: usize,
    pub test: usize,
}

/// Per-project `manifest.json` written next to the split files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub repo: String,
    pub language: Language,
    pub counts: SplitCounts,
    pub category: Category,
    pub boundary_ts: Timestamp,
    pub seed: u64,
    pub config: PipelineConfig,
}

/// Project counts per (language, category), with per-language totals.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct CategoryTable {
    pub counts: BTreeMap<Language, BTreeMap<Category, usize>>,
    pub totals: BTreeMap<Language, usize>,
}

impl CategoryTable {
    pub fn get(&self, language: Language, category: Category) -> usize {
        self.counts
            .get(&language)
            .and_then(|m| m.get(&category))
            .copied()
            .unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.totals.is_empty()
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (Language, Category)>) -> Self {
        let mut table = CategoryTable::default();
        for (lang, cat) in pairs {
            *table.counts.entry(lang).or_default().entry(cat).or_default() += 1;
            *table.totals.entry(lang).or_default() += 1;
        }
        table
    }

    pub fn to_markdown(&self) -> String {
        let langs: Vec<Language> = self.totals.keys().copied().collect();
        let mut out = String::from("| Category |");
        for l in &langs {
            out.push_str(&format!(" {l} |"));
        }
        out.push_str("\n|---|");
        out.push_str(&"---|".repeat(langs.len()));
        out.push('\n');
        for cat in [Category::I, Category::II, Category::III] {
            out.push_str(&format!("| Category {cat} |"));
            for &l in &langs {
                out.push_str(&format!(" {} |", self.get(l, cat)));
            }
            out.push('\n');
        }
        out.push_str("| Total |");
        for l in &langs {
            out.push_str(&format!(" {} |", self.totals[l]));
        }
        out.push('\n');
        out
    }
}

pub fn tabulate_categories(corpora: &[ProjectCorpus]) -> CategoryTable {
    CategoryTable::from_pairs(corpora.iter().map(|c| (c.language, c.category)))
}

pub fn tabulate_manifests(manifests: &[SplitManifest]) -> CategoryTable {
    CategoryTable::from_pairs(manifests.iter().map(|m| (m.language, m.category)))
}

/// Directory name for a project's split files (`owner__name`).
pub fn project_dir_name(repo_slug: &str) -> String {
    repo_slug.replace('/', "__")
}

/// Write `train.jsonl`, `valid.jsonl`, `test.jsonl` and `manifest.json`
/// under `out_dir/<owner>__<name>/`. Returns the written paths.
pub fn write_project(corpus: &ProjectCorpus, out_dir: &Path, cfg: &PipelineConfig) -> io::Result<Vec<PathBuf>> {
    let dir = out_dir.join(project_dir_name(&corpus.repo_slug));
    fs::create_dir_all(&dir)?;
    let mut written = Vec::new();
    for which in Split::ALL {
        let path = dir.join(format!("{}.jsonl", which.as_str()));
        write_jsonl(BufWriter::new(File::create(&path)?), corpus.part(which))?;
        written.push(path);
    }
    let path = dir.join("manifest.json");
    let mut text = serde_json::to_string_pretty(&corpus.manifest(cfg))?;
    text.push('\n');
    fs::write(&path, text)?;
    written.push(path);
    Ok(written)
}
