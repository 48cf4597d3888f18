use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use sameproj_core::analytics::{
    cohort_medians, cost_markdown, cost_ratio, feasibility as feasibility_row, feasibility_markdown, CohortMedians,
};
use sameproj_core::corpus::{
    categorize, segment, tabulate_manifests, time_split, write_project, CategoryTable, CorpusError, SplitManifest,
};
use sameproj_core::identlex::overlap_matrix;
use sameproj_core::ingest::{parse_jsonl, write_jsonl, FunctionSample, ParseMode};
use sameproj_core::metrics::{read_aligned, BleuReport, ComparisonBlock, ZeroMethod};
use sameproj_core::noisegen::{augment, NoiseError};
use sameproj_core::provenance::{annotate_corpus, repo_dir, Blamer, Git, ProvenanceError};
use sameproj_core::{Category, CostRatio, FeasibilityRow, Language, OverlapMatrix, PipelineConfig};

use crate::manifest::RunLog;
use crate::{Command, Environment};

/// Run one subcommand; returns the effective configuration.
pub(crate) fn execute(command: Command, mut cfg: PipelineConfig, log: &mut RunLog) -> Result<PipelineConfig> {
    match command {
        Command::Ingest { input, out, lang, parse } => ingest(&input, &out, lang, parse.mode(), log)?,
        Command::Dates { input, out, repos, ignore_revs, parse } => {
            dates(&input, &out, &repos, ignore_revs.as_deref(), parse.mode(), log)?
        }
        Command::Split { input, out, lang } => split(&input, &out, lang, &cfg, log)?,
        Command::Overlap { input, out, group_size, lang } => overlap(&input, &out, group_size, lang, log)?,
        Command::Noise { input, out, assume_train, lang } => noise(&input, &out, assume_train, lang, &cfg, log)?,
        Command::Bleu { pred, reference, smoothing, lowercase, out } => {
            log.input(&pred);
            log.input(&reference);
            let preds = read_text(&pred)?;
            let refs = read_text(&reference)?;
            let report = BleuReport::score(&read_aligned(&preds, &refs)?, smoothing, lowercase)?;
            emit_json(&report, out.as_deref(), log)?;
            eprintln!("corpus BLEU {:.2} over {} samples", report.corpus_score, report.per_sample.len());
        }
        Command::Compare { a, b, threshold, pratt, out } => {
            if let Some(t) = threshold {
                cfg.bleu_noticeable_threshold = t;
            }
            compare(&a, &b, pratt, &cfg, out.as_deref(), log)?
        }
        Command::Feasibility { input, repos, n, lang, out } => feasibility(&input, &repos, n, lang, out.as_deref(), log)?,
        Command::Cost { cross, same, split_dir, lang, out } => {
            cost(cross, same, split_dir.as_deref(), lang, &cfg, out.as_deref(), log)?
        }
        Command::Report { split_dir, overlap, feasibility, cost, out } => report(
            split_dir.as_deref(),
            overlap.as_deref(),
            feasibility.as_deref(),
            cost.as_deref(),
            &out,
            log,
        )?,
    }
    Ok(cfg)
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn read_samples(path: &Path, mode: ParseMode, log: &mut RunLog) -> Result<Vec<FunctionSample>> {
    log.input(path);
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let outcome = parse_jsonl(BufReader::new(file), mode).with_context(|| format!("parsing {}", path.display()))?;
    for skipped in &outcome.skipped {
        eprintln!("warning: {}: skipped {skipped}", path.display());
    }
    Ok(outcome.samples)
}

fn keep_language(samples: Vec<FunctionSample>, lang: Option<Language>) -> Vec<FunctionSample> {
    match lang {
        Some(l) => samples.into_iter().filter(|s| s.language == l).collect(),
        None => samples,
    }
}

fn create_parent(path: &Path) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    Ok(())
}

fn write_samples(path: &Path, samples: &[FunctionSample], log: &mut RunLog) -> Result<()> {
    create_parent(path)?;
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    write_jsonl(BufWriter::new(file), samples)?;
    log.output(path);
    Ok(())
}

fn write_file(path: &Path, text: &str, log: &mut RunLog) -> Result<()> {
    create_parent(path)?;
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    log.output(path);
    Ok(())
}

fn pretty<T: Serialize>(value: &T) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(text)
}

/// Write JSON to `out` with a manifest beside it, or print it.
fn emit_json<T: Serialize>(value: &T, out: Option<&Path>, log: &mut RunLog) -> Result<()> {
    let text = pretty(value)?;
    match out {
        Some(path) => {
            log.manifest_beside(path, false);
            write_file(path, &text, log)
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_stem().unwrap_or_default().to_os_string();
    name.push(suffix);
    path.with_file_name(name)
}

fn git_version(git: &Git) -> Result<String> {
    git.version()
        .map_err(|e| Environment(format!("{e}; set {} to the git executable", sameproj_core::provenance::GIT_ENV)).into())
}

fn ingest(input: &Path, out: &Path, lang: Option<Language>, mode: ParseMode, log: &mut RunLog) -> Result<()> {
    log.manifest_beside(out, false);
    let samples = keep_language(read_samples(input, mode, log)?, lang);
    let mut seen = std::collections::HashSet::new();
    if let Some(dup) = samples.iter().find(|s| !seen.insert(s.id.as_str())) {
        bail!("duplicate sample id {}", dup.id);
    }
    write_samples(out, &samples, log)?;
    eprintln!("ingested {} samples", samples.len());
    Ok(())
}

#[derive(Serialize)]
struct FailureLine<'a> {
    id: &'a str,
    error: String,
}

fn dates(
    input: &Path,
    out: &Path,
    repos: &Path,
    ignore_revs: Option<&Path>,
    mode: ParseMode,
    log: &mut RunLog,
) -> Result<()> {
    log.manifest_beside(out, false);
    let git = Git::from_env();
    log.git_version = Some(git_version(&git)?);
    let samples = read_samples(input, mode, log)?;
    let mut blamer = Blamer::new(git);
    if let Some(file) = ignore_revs {
        log.input(file);
        blamer = blamer.with_ignore_revs(file);
    }
    let result = annotate_corpus(samples, repos, &blamer);
    if let Some(env) = result.failures.iter().find(|f| f.error.is_environmental()) {
        return Err(env.error.clone()).with_context(|| format!("dating {}", env.sample_id));
    }
    write_samples(out, &result.annotated, log)?;

    let failures_path = sibling(out, ".failures.jsonl");
    let mut text = String::new();
    for f in &result.failures {
        let line = FailureLine {
            id: &f.sample_id,
            error: f.error.to_string(),
        };
        text.push_str(&serde_json::to_string(&line)?);
        text.push('\n');
    }
    write_file(&failures_path, &text, log)?;
    eprintln!(
        "dated {} samples, {} failures (see {})",
        result.annotated.len(),
        result.failures.len(),
        failures_path.display()
    );
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct SkippedProject {
    repo: String,
    reason: String,
}

#[derive(Serialize)]
struct SplitSummary<'a> {
    categories: &'a CategoryTable,
    projects: Vec<&'a SplitManifest>,
    skipped: Vec<SkippedProject>,
}

fn split(input: &Path, out: &Path, lang: Option<Language>, cfg: &PipelineConfig, log: &mut RunLog) -> Result<()> {
    log.manifest_beside(out, true);
    let samples = keep_language(read_samples(input, ParseMode::Strict, log)?, lang);
    let projects = segment(samples)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;

    let mut manifests = Vec::new();
    let mut skipped = Vec::new();
    for (repo, samples) in projects {
        match time_split(samples, cfg) {
            Ok(corpus) => {
                for path in write_project(&corpus, out, cfg)? {
                    log.output(&path);
                }
                manifests.push(corpus.manifest(cfg));
            }
            Err(e @ (CorpusError::TooFewSamples { .. } | CorpusError::DegenerateSplit(_) | CorpusError::MixedLanguages(_))) => {
                eprintln!("warning: skipping {repo}: {e}");
                skipped.push(SkippedProject {
                    repo,
                    reason: e.to_string(),
                });
            }
            Err(e) => return Err(e.into()),
        }
    }
    let table = tabulate_manifests(&manifests);
    let summary = SplitSummary {
        categories: &table,
        projects: manifests.iter().collect(),
        skipped,
    };
    write_file(&out.join("categories.json"), &pretty(&summary)?, log)?;
    write_file(&out.join("categories.md"), &table.to_markdown(), log)?;
    eprintln!("split {} projects, skipped {}", manifests.len(), summary.skipped.len());
    Ok(())
}

fn overlap(input: &Path, out: &Path, group_size: usize, lang: Option<Language>, log: &mut RunLog) -> Result<()> {
    log.manifest_beside(out, false);
    let samples = keep_language(read_samples(input, ParseMode::Strict, log)?, lang);
    let projects = segment(samples)?;
    let view: Vec<(&str, &[FunctionSample])> = projects
        .iter()
        .filter(|(repo, samples)| {
            let enough = samples.len() >= 2 * group_size;
            if !enough {
                eprintln!("warning: skipping {repo}: fewer than {} samples", 2 * group_size);
            }
            enough
        })
        .map(|(repo, samples)| (repo.as_str(), samples.as_slice()))
        .collect();
    if view.is_empty() {
        bail!("no project has {} samples", 2 * group_size);
    }
    let matrix = overlap_matrix(&view, group_size)?;
    write_file(out, &matrix.to_csv()?, log)?;
    write_file(&sibling(out, ".json"), &pretty(&matrix)?, log)?;
    print!("{}", matrix.to_markdown());
    if !matrix.is_diagonally_dominant() {
        eprintln!("note: matrix is not diagonally dominant");
    }
    Ok(())
}

#[derive(Serialize)]
struct NoisePair<'a> {
    id: &'a str,
    src: &'a [String],
    tgt: &'a [String],
    mode: sameproj_core::NoiseMode,
    seed: u64,
}

fn noise(
    input: &Path,
    out: &Path,
    assume_train: bool,
    lang: Option<Language>,
    cfg: &PipelineConfig,
    log: &mut RunLog,
) -> Result<()> {
    log.manifest_beside(out, false);
    let samples = keep_language(read_samples(input, ParseMode::Strict, log)?, lang);
    for s in &samples {
        match s.partition() {
            Some("train") => {}
            None if assume_train => {}
            None => bail!("{} has no partition label; only training data may be noised (pass --assume-train to accept unlabeled records)", s.id),
            Some(other) => bail!("{} is labeled {other:?}; only the train partition may be noised", s.id),
        }
    }

    create_parent(out)?;
    let mut w = BufWriter::new(File::create(out).with_context(|| format!("creating {}", out.display()))?);
    let (mut pairs, mut short) = (0usize, 0usize);
    for s in &samples {
        let examples = match augment(&s.docstring_tokens, cfg, &s.id) {
            Ok(ex) => ex,
            Err(NoiseError::TooShort { .. }) => {
                short += 1;
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        for ex in &examples {
            let pair = NoisePair {
                id: &s.id,
                src: &ex.corrupted,
                tgt: &ex.original,
                mode: ex.mode,
                seed: ex.seed,
            };
            serde_json::to_writer(&mut w, &pair)?;
            w.write_all(b"\n")?;
            pairs += 1;
        }
    }
    w.flush()?;
    log.output(out);
    eprintln!("wrote {pairs} pairs; {short} docstrings too short to noise");
    Ok(())
}

fn load_report(path: &Path, log: &mut RunLog) -> Result<BleuReport> {
    log.input(path);
    serde_json::from_str(&read_text(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn model_name(path: &Path) -> String {
    path.file_stem().unwrap_or_default().to_string_lossy().into_owned()
}

fn compare(a: &Path, b: &Path, pratt: bool, cfg: &PipelineConfig, out: Option<&Path>, log: &mut RunLog) -> Result<()> {
    let ra = load_report(a, log)?;
    let rb = load_report(b, log)?;
    let zero_method = if pratt { ZeroMethod::Pratt } else { ZeroMethod::Wilcox };
    let result = ra.compare(&rb, cfg.bleu_noticeable_threshold, zero_method)?;
    eprintln!(
        "mean difference {:.2} BLEU, p = {:.4} ({}), noticeable: {}",
        result.mean_diff, result.p_value, result.method, result.noticeable
    );
    let block = ComparisonBlock {
        model_a: model_name(a),
        model_b: model_name(b),
        threshold: cfg.bleu_noticeable_threshold,
        zero_method,
        result,
    };
    emit_json(&block, out, log)
}

#[derive(Serialize, Deserialize)]
struct FeasibilityReport {
    n: usize,
    rows: Vec<FeasibilityRow>,
    medians: CohortMedians,
    benefit_fraction: Option<f64>,
    skipped: Vec<SkippedProject>,
}

fn feasibility(
    input: &Path,
    repos: &Path,
    n: usize,
    lang: Option<Language>,
    out: Option<&Path>,
    log: &mut RunLog,
) -> Result<()> {
    let git = Git::from_env();
    log.git_version = Some(git_version(&git)?);
    let samples = keep_language(read_samples(input, ParseMode::Strict, log)?, lang);
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for (repo, samples) in segment(samples)? {
        let last = match git.head_commit_time(&repo_dir(repos, &repo)) {
            Ok(t) => t,
            Err(e @ ProvenanceError::RepoMissing(_)) => {
                eprintln!("warning: skipping {repo}: {e}");
                skipped.push(SkippedProject {
                    repo,
                    reason: e.to_string(),
                });
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        let timestamps: Vec<i64> = samples.iter().filter_map(|s| s.creation_ts).collect();
        let last = last.max(*timestamps.last().expect("segment yields non-empty projects"));
        rows.push(feasibility_row(&repo, &timestamps, last, n)?);
    }
    if rows.is_empty() {
        bail!("no project could be analysed");
    }
    let medians = cohort_medians(&rows)?;
    print!("{}", feasibility_markdown(&rows, n));
    let report = FeasibilityReport {
        n,
        benefit_fraction: medians.benefit_fraction(),
        rows,
        medians,
        skipped,
    };
    emit_json(&report, out, log)
}

#[derive(Serialize, Deserialize)]
struct CostRow {
    label: String,
    #[serde(flatten)]
    cost: CostRatio,
}

fn read_manifests(dir: &Path, log: &mut RunLog) -> Result<Vec<SplitManifest>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path().join("manifest.json")))
        .filter(|p| p.is_file())
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            log.input(p);
            serde_json::from_str(&read_text(p)?).with_context(|| format!("parsing {}", p.display()))
        })
        .collect()
}

fn cost(
    cross: u64,
    same: Option<u64>,
    split_dir: Option<&Path>,
    lang: Option<Language>,
    cfg: &PipelineConfig,
    out: Option<&Path>,
    log: &mut RunLog,
) -> Result<()> {
    let ratio = |same: u64| cost_ratio(same, cfg.same_epochs as u64, cross, cfg.cross_epochs as u64);
    let mut rows = Vec::new();
    if let Some(same) = same {
        rows.push(CostRow {
            label: "same-project".into(),
            cost: ratio(same)?,
        });
    }
    if let Some(dir) = split_dir {
        let manifests: Vec<SplitManifest> = read_manifests(dir, log)?
            .into_iter()
            .filter(|m| lang.is_none_or(|l| m.language == l))
            .collect();
        let trains: Vec<u64> = manifests
            .iter()
            .filter(|m| categorize(m.counts.train, cfg) != Category::III)
            .map(|m| m.counts.train as u64)
            .collect();
        let Some(&largest) = trains.iter().max() else {
            bail!("no category I or II project under {}", dir.display());
        };
        rows.push(CostRow {
            label: "largest project".into(),
            cost: ratio(largest)?,
        });
        rows.push(CostRow {
            label: "categories I+II".into(),
            cost: ratio(trains.iter().sum())?,
        });
    }
    let table: Vec<(String, CostRatio)> = rows.iter().map(|r| (r.label.clone(), r.cost)).collect();
    print!("{}", cost_markdown(&table));
    emit_json(&rows, out, log)
}

fn report(
    split_dir: Option<&Path>,
    overlap: Option<&Path>,
    feasibility: Option<&Path>,
    cost: Option<&Path>,
    out: &Path,
    log: &mut RunLog,
) -> Result<()> {
    log.manifest_beside(out, false);
    let mut md = String::from("# sameproj report\n");
    if let Some(dir) = split_dir {
        let manifests = read_manifests(dir, log)?;
        md.push_str("\n## Projects per category\n\n");
        md.push_str(&tabulate_manifests(&manifests).to_markdown());
        md.push_str("\n## Split sizes\n\n| Project | Language | Train | Valid | Test | Category |\n|---|---|---|---|---|---|\n");
        let mut by_lang: BTreeMap<(Language, std::cmp::Reverse<usize>, &str), &SplitManifest> = BTreeMap::new();
        for m in &manifests {
            by_lang.insert((m.language, std::cmp::Reverse(m.counts.train), &m.repo), m);
        }
        for m in by_lang.values() {
            md.push_str(&format!(
                "| {} | {} | {} | {} | {} | {} |\n",
                m.repo, m.language, m.counts.train, m.counts.valid, m.counts.test, m.category
            ));
        }
    }
    if let Some(path) = overlap {
        log.input(path);
        let m: OverlapMatrix = serde_json::from_str(&read_text(path)?)?;
        md.push_str("\n## Identifier overlap\n\n");
        md.push_str(&m.to_markdown());
    }
    if let Some(path) = feasibility {
        log.input(path);
        let f: FeasibilityReport = serde_json::from_str(&read_text(path)?)?;
        md.push_str("\n## Feasibility\n\n");
        md.push_str(&feasibility_markdown(&f.rows, f.n));
    }
    if let Some(path) = cost {
        log.input(path);
        let rows: Vec<CostRow> = serde_json::from_str(&read_text(path)?)?;
        md.push_str("\n## Training cost\n\n");
        let table: Vec<(String, CostRatio)> = rows.into_iter().map(|r| (r.label, r.cost)).collect();
        md.push_str(&cost_markdown(&table));
    }
    write_file(out, &md, log)
}
