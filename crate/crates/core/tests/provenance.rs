mod common;

use std::path::Path;

use sameproj_core::ingest::FunctionSample;
use sameproj_core::provenance::{annotate_corpus, Blamer, Git, ProvenanceError};

use common::{git_available, FixtureRepo};

fn sample(repo: &str, path: &str, sha: &str, start: u32, end: u32) -> FunctionSample {
    FunctionSample::from_json(serde_json::json!({
        "repo": repo, "path": path, "sha": sha,
        "url": format!("https://github.com/{repo}/blob/{sha}/{path}#L{start}-L{end}"),
        "language": "java",
        "code_tokens": ["void", "f"], "docstring_tokens": ["Does", "f"],
    }))
    .unwrap()
}

const FILE_V1: &str = "class A {\n  void f() {\n    g();\n  }\n\n  void h() {\n    k();\n  }\n}\n";
const FILE_V2: &str = "class A {\n  void f() {\n    g2();\n  }\n\n  void h() {\n    k();\n  }\n}\n";

fn fixture(root: &Path) -> (FixtureRepo, String, String) {
    let repo = FixtureRepo::init(&root.join("acme").join("widgets"));
    let first = repo.commit_file("src/A.java", FILE_V1, "2019-03-01 10:00:00 +0000");
    let second = repo.commit_file("src/A.java", FILE_V2, "2020-06-15 08:30:00 +0200");
    (repo, first, second)
}

#[test]
fn edited_body_keeps_the_older_date() {
    if !git_available() {
        return;
    }
    let tmp = tempfile::tempdir().unwrap();
    let (repo, first, second) = fixture(tmp.path());
    let blamer = Blamer::new(Git::default());
    let s = sample("acme/widgets", "src/A.java", &second, 2, 4);
    assert_eq!(blamer.creation_ts(&repo.dir, &s).unwrap(), repo.commit_time(&first));

    let lines = blamer.blame_span(&repo.dir, "src/A.java", &second, 3, 3).unwrap();
    assert_eq!(lines[0].authored_ts, repo.commit_time(&second));
    assert_eq!(lines[0].commit_sha, second);
}

#[test]
fn annotate_corpus_collects_failures_in_order() {
    if !git_available() {
        return;
    }
    let tmp = tempfile::tempdir().unwrap();
    let (repo, first, second) = fixture(tmp.path());
    let blamer = Blamer::new(Git::default());
    let samples = vec![
        sample("acme/widgets", "src/A.java", &second, 6, 8),
        sample("acme/absent", "src/A.java", &second, 1, 2),
        sample("acme/widgets", "src/A.java", &second, 8, 40),
        sample("acme/widgets", "src/B.java", &second, 1, 2),
        sample("acme/widgets", "src/A.java", &"f".repeat(40), 1, 2),
        sample("acme/widgets", "src/A.java", &first, 2, 4),
    ];
    let ids: Vec<String> = samples.iter().map(|s| s.id.clone()).collect();
    let out = annotate_corpus(samples.clone(), tmp.path(), &blamer);

    assert_eq!(out.annotated.len(), 2);
    assert_eq!(out.annotated[0].creation_ts, Some(repo.commit_time(&first)));
    assert_eq!(out.annotated[1].creation_ts, Some(repo.commit_time(&first)));
    let kinds: Vec<&ProvenanceError> = out.failures.iter().map(|f| &f.error).collect();
    assert!(matches!(kinds[0], ProvenanceError::RepoMissing(_)));
    assert!(matches!(kinds[1], ProvenanceError::RangeOutOfFile { file_lines: 9, .. }));
    assert!(matches!(kinds[2], ProvenanceError::FileMissing { .. }));
    assert!(matches!(kinds[3], ProvenanceError::CommitMissing { .. }));
    assert_eq!(out.failures[0].sample_id, ids[1]);
    assert!(kinds.iter().all(|e| !e.is_environmental()));

    let again = annotate_corpus(samples, tmp.path(), &blamer);
    assert_eq!(again.annotated, out.annotated);
    assert_eq!(again.failures, out.failures);
}

#[test]
fn annotated_records_survive_reannotation() {
    if !git_available() {
        return;
    }
    let tmp = tempfile::tempdir().unwrap();
    let (_, _, second) = fixture(tmp.path());
    let blamer = Blamer::new(Git::default());
    let once = annotate_corpus(vec![sample("acme/widgets", "src/A.java", &second, 2, 4)], tmp.path(), &blamer);
    let twice = annotate_corpus(once.annotated.clone(), tmp.path(), &Blamer::new(Git::default()));
    assert_eq!(once.annotated, twice.annotated);
}

#[test]
fn ignore_revs_skips_a_formatting_commit() {
    if !git_available() {
        return;
    }
    let tmp = tempfile::tempdir().unwrap();
    let (repo, first, second) = fixture(tmp.path());
    let ignore = tmp.path().join("ignore-revs");
    std::fs::write(&ignore, format!("{second}\n")).unwrap();
    let blamer = Blamer::new(Git::default()).with_ignore_revs(&ignore);
    let lines = blamer.blame_span(&repo.dir, "src/A.java", &second, 3, 3).unwrap();
    assert_eq!(lines[0].authored_ts, repo.commit_time(&first));
}

#[test]
fn missing_git_is_environmental() {
    let tmp = tempfile::tempdir().unwrap();
    let blamer = Blamer::new(Git::new("/nonexistent/git-binary"));
    std::fs::create_dir_all(tmp.path().join("a").join("b")).unwrap();
    let err = blamer
        .blame_span(&tmp.path().join("a").join("b"), "X.java", &"a".repeat(40), 1, 1)
        .unwrap_err();
    assert!(err.is_environmental(), "{err:?}");
    assert!(Git::new("/nonexistent/git-binary").version().unwrap_err().is_environmental());
}

#[test]
fn head_commit_time_is_last_activity() {
    if !git_available() {
        return;
    }
    let tmp = tempfile::tempdir().unwrap();
    let (repo, _, second) = fixture(tmp.path());
    assert_eq!(Git::default().head_commit_time(&repo.dir).unwrap(), repo.commit_time(&second));
}
