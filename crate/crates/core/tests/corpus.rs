use sameproj_core::corpus::{
    categorize, project_dir_name, segment, subsample_training, time_split, write_project, Split, SplitCounts,
};
use sameproj_core::ingest::{FunctionSample, Language};
use sameproj_core::{Category, PipelineConfig};
use serde::Deserialize;

fn sample(repo: &str, line: u32, ts: i64) -> FunctionSample {
    let sha = "89abcdef0123456789abcdef0123456789abcdef";
    let path = "pkg/mod.py";
    FunctionSample::from_json(serde_json::json!({
        "repo": repo, "path": path, "sha": sha,
        "url": format!("https://github.com/{repo}/blob/{sha}/{path}#L{line}-L{}", line + 3),
        "language": "python",
        "code_tokens": ["def", "f", "(", ")", ":"], "docstring_tokens": ["Does", "f"],
        "code": "def f():\n    return 1", "docstring": "Does f",
        "partition": "train", "creation_ts": ts,
    }))
    .unwrap()
}

fn project(repo: &str, n: u32) -> Vec<FunctionSample> {
    let all = (0..n).map(|i| sample(repo, 10 * i + 1, 1_500_000_000 + (i as i64 / 3) * 86_400));
    segment(all).unwrap().remove(repo).unwrap()
}

#[derive(Deserialize)]
struct Row {
    repo: String,
    language: Language,
    counts: SplitCounts,
}

#[test]
fn published_rows_are_consistent_with_the_rules() {
    let rows: Vec<Row> = serde_json::from_str(include_str!("fixtures/published_projects.json")).unwrap();
    let cfg = PipelineConfig::default();
    for r in &rows {
        assert!(r.counts.test.abs_diff(r.counts.valid) <= 1, "{}", r.repo);
        let c = categorize(r.counts.train, &cfg);
        assert_eq!(c == Category::III, r.counts.train < 100, "{}", r.repo);
    }
    let java_cumulative: usize = rows
        .iter()
        .filter(|r| r.language == Language::Java && categorize(r.counts.train, &cfg) != Category::III)
        .map(|r| r.counts.train)
        .sum();
    assert_eq!(java_cumulative, 5122);
}

#[test]
fn written_projects_are_byte_identical_across_runs() {
    let cfg = PipelineConfig { rng_seed: 7, ..PipelineConfig::default() };
    let corpus = time_split(project("acme/tool", 60), &cfg).unwrap();
    corpus.check_invariants(&cfg).unwrap();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let files_a = write_project(&corpus, a.path(), &cfg).unwrap();
    let again = time_split(project("acme/tool", 60), &cfg).unwrap();
    let files_b = write_project(&again, b.path(), &cfg).unwrap();
    assert_eq!(files_a.len(), 4);
    for (fa, fb) in files_a.iter().zip(&files_b) {
        assert_eq!(std::fs::read(fa).unwrap(), std::fs::read(fb).unwrap(), "{fa:?}");
    }
    let dir = a.path().join(project_dir_name("acme/tool"));
    let train = std::fs::read_to_string(dir.join("train.jsonl")).unwrap();
    assert_eq!(train.lines().count(), corpus.count(Split::Train));
    let first: serde_json::Value = serde_json::from_str(train.lines().next().unwrap()).unwrap();
    assert_eq!(first["partition"], "train");
    assert_eq!(first["docstring"], "Does f");
}

#[test]
fn different_seeds_shuffle_the_holdout_differently() {
    let base = PipelineConfig::default();
    let a = time_split(project("acme/tool", 90), &base).unwrap();
    let b = time_split(project("acme/tool", 90), &PipelineConfig { rng_seed: 1, ..base.clone() }).unwrap();
    assert_eq!(a.count(Split::Train), b.count(Split::Train));
    assert_ne!(a.split, b.split);
}

#[test]
fn subsampling_is_seeded_and_order_preserving() {
    let train: Vec<u32> = (0..500).collect();
    let a = subsample_training(&train, 100, 5).unwrap();
    assert_eq!(a, subsample_training(&train, 100, 5).unwrap());
    assert_eq!(a.len(), 100);
    assert!(a.windows(2).all(|w| w[0] < w[1]));
    assert!(subsample_training(&train, 501, 5).is_err());
}
