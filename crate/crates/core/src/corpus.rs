//! Corpus ingestion, seeded sampling and task enumeration.
//!
//! Corpora are stored in the `flat-v1` layout:
//!
//! ```text
//! <root>/manifest.json                 (optional)
//! <root>/<language>/<id>/main.<ext>
//! <root>/<language>/<id>/tests/<k>.in  (optional, empty stdin when absent)
//! <root>/<language>/<id>/tests/<k>.out
//! ```

use crate::lang::Language;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed corpus at {path}: {reason}")]
    Malformed { path: PathBuf, reason: String },
    #[error("unknown corpus layout `{0}` (supported: flat-v1)")]
    UnknownLayout(String),
    #[error("language {language} has {available} snippets, {requested} requested")]
    InsufficientSnippets {
        language: Language,
        available: usize,
        requested: usize,
    },
    #[error("target map translates {0} into itself")]
    SelfTranslation(Language),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Layout {
    #[default]
    #[serde(rename = "flat-v1")]
    FlatV1,
}

impl FromStr for Layout {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "flat-v1" => Ok(Layout::FlatV1),
            other => Err(CorpusError::UnknownLayout(other.to_string())),
        }
    }
}

impl fmt::Display for Layout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Layout::FlatV1 => f.write_str("flat-v1"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestCase {
    pub stdin: String,
    pub expected_stdout: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Snippet {
    pub id: String,
    pub language: Language,
    pub source: String,
    pub tests: Vec<TestCase>,
}

/// The unit of experimentation. Field order is the canonical sort order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TranslationTask {
    pub dataset: String,
    pub source_lang: Language,
    pub snippet_id: String,
    pub target_lang: Language,
}

impl fmt::Display for TranslationTask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{}/{}->{}",
            self.dataset, self.source_lang, self.snippet_id, self.target_lang
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedSnippet {
    pub path: PathBuf,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub skipped: Vec<SkippedSnippet>,
}

#[derive(Debug, Deserialize)]
struct Manifest {
    dataset_name: String,
    languages: Vec<String>,
}

/// A dataset, with snippets sorted by (language, id).
#[derive(Debug, Clone)]
pub struct Corpus {
    pub dataset: String,
    pub snippets: Vec<Arc<Snippet>>,
    pub report: LoadReport,
}

impl Corpus {
    pub fn count_by_language(&self) -> BTreeMap<Language, usize> {
        let mut counts = BTreeMap::new();
        for s in &self.snippets {
            *counts.entry(s.language).or_insert(0) += 1;
        }
        counts
    }
}

pub fn load_corpus(root: &Path, layout: Layout) -> Result<Corpus, CorpusError> {
    match layout {
        Layout::FlatV1 => load_flat_v1(root),
    }
}

fn load_flat_v1(root: &Path) -> Result<Corpus, CorpusError> {
    let meta = fs::metadata(root).map_err(io_err(root))?;
    if !meta.is_dir() {
        return Err(CorpusError::Malformed {
            path: root.to_path_buf(),
            reason: "corpus root is not a directory".into(),
        });
    }

    let manifest_path = root.join("manifest.json");
    let (dataset, languages) = if manifest_path.exists() {
        let text = fs::read_to_string(&manifest_path).map_err(io_err(&manifest_path))?;
        let manifest: Manifest =
            serde_json::from_str(&text).map_err(|e| CorpusError::Malformed {
                path: manifest_path.clone(),
                reason: e.to_string(),
            })?;
        let mut langs = BTreeSet::new();
        for l in &manifest.languages {
            let lang = l.parse::<Language>().map_err(|e| CorpusError::Malformed {
                path: manifest_path.clone(),
                reason: e.to_string(),
            })?;
            if !root.join(lang.id()).is_dir() {
                return Err(CorpusError::Malformed {
                    path: manifest_path.clone(),
                    reason: format!("language `{lang}` listed but {}/ is missing", lang.id()),
                });
            }
            langs.insert(lang);
        }
        (manifest.dataset_name, langs)
    } else {
        let name = root
            .canonicalize()
            .ok()
            .and_then(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
            .unwrap_or_else(|| "dataset".to_string());
        let langs = Language::ALL
            .into_iter()
            .filter(|l| root.join(l.id()).is_dir())
            .collect();
        (name, langs)
    };

    let mut snippets = Vec::new();
    let mut report = LoadReport::default();
    for lang in languages {
        let lang_dir = root.join(lang.id());
        let mut ids: Vec<(String, PathBuf)> = Vec::new();
        for entry in fs::read_dir(&lang_dir).map_err(io_err(&lang_dir))? {
            let entry = entry.map_err(io_err(&lang_dir))?;
            let path = entry.path();
            if path.is_dir() {
                ids.push((entry.file_name().to_string_lossy().into_owned(), path));
            }
        }
        ids.sort();
        for (id, dir) in ids {
            match load_snippet(&dir, &id, lang)? {
                Ok(snippet) => snippets.push(Arc::new(snippet)),
                Err(reason) => report.skipped.push(SkippedSnippet { path: dir, reason }),
            }
        }
    }

    Ok(Corpus {
        dataset,
        snippets,
        report,
    })
}

/// Outer error is fatal, inner error is a skip reason.
fn load_snippet(
    dir: &Path,
    id: &str,
    language: Language,
) -> Result<Result<Snippet, String>, CorpusError> {
    let src_path = dir.join(format!("main.{}", language.extension()));
    if !src_path.is_file() {
        return Ok(Err(format!("missing main.{}", language.extension())));
    }
    let bytes = fs::read(&src_path).map_err(io_err(&src_path))?;
    let Ok(source) = String::from_utf8(bytes) else {
        return Ok(Err("source is not valid UTF-8".into()));
    };
    if source.trim().is_empty() {
        return Ok(Err("empty source".into()));
    }

    let tests_dir = dir.join("tests");
    if !tests_dir.is_dir() {
        return Ok(Err("no tests".into()));
    }
    let mut inputs = BTreeSet::new();
    let mut outputs = BTreeSet::new();
    for entry in fs::read_dir(&tests_dir).map_err(io_err(&tests_dir))? {
        let entry = entry.map_err(io_err(&tests_dir))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        let Some((stem, ext)) = name.rsplit_once('.') else {
            continue;
        };
        let Ok(k) = stem.parse::<u32>() else { continue };
        match ext {
            "in" => {
                inputs.insert(k);
            }
            "out" => {
                outputs.insert(k);
            }
            _ => {}
        }
    }
    if let Some(orphan) = inputs.difference(&outputs).next() {
        return Err(CorpusError::Malformed {
            path: tests_dir.join(format!("{orphan}.in")),
            reason: "test input without matching .out".into(),
        });
    }
    if outputs.is_empty() {
        return Ok(Err("no tests".into()));
    }

    let mut tests = Vec::with_capacity(outputs.len());
    for k in outputs {
        let out_path = tests_dir.join(format!("{k}.out"));
        let in_path = tests_dir.join(format!("{k}.in"));
        let expected_stdout = read_text(&out_path)?;
        let stdin = if inputs.contains(&k) {
            read_text(&in_path)?
        } else {
            String::new()
        };
        tests.push(TestCase {
            stdin,
            expected_stdout,
        });
    }

    Ok(Ok(Snippet {
        id: id.to_string(),
        language,
        source,
        tests,
    }))
}

fn read_text(path: &Path) -> Result<String, CorpusError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    String::from_utf8(bytes).map_err(|_| CorpusError::Malformed {
        path: path.to_path_buf(),
        reason: "test file is not valid UTF-8".into(),
    })
}

/// Snippets chosen for one experiment, sorted by (language, id).
#[derive(Debug, Clone)]
pub struct SnippetSet {
    pub dataset: String,
    pub snippets: Vec<Arc<Snippet>>,
}

impl SnippetSet {
    pub fn len(&self) -> usize {
        self.snippets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snippets.is_empty()
    }

    pub fn get(&self, language: Language, id: &str) -> Option<&Arc<Snippet>> {
        self.snippets
            .binary_search_by(|s| (s.language, s.id.as_str()).cmp(&(language, id)))
            .ok()
            .map(|i| &self.snippets[i])
    }

    pub fn resolve(&self, task: &TranslationTask) -> Option<&Arc<Snippet>> {
        if task.dataset != self.dataset {
            return None;
        }
        self.get(task.source_lang, &task.snippet_id)
    }
}

/// Deterministic per-language sample. Each language draws from its own
/// ChaCha stream so the choice for one language does not depend on how many
/// snippets the others have.
pub fn sample_snippets(
    corpus: &Corpus,
    per_language: usize,
    seed: u64,
) -> Result<SnippetSet, CorpusError> {
    let mut by_lang: BTreeMap<Language, Vec<Arc<Snippet>>> = BTreeMap::new();
    for s in &corpus.snippets {
        by_lang.entry(s.language).or_default().push(Arc::clone(s));
    }

    let mut chosen = Vec::new();
    for (lang, mut pool) in by_lang {
        if per_language > pool.len() {
            return Err(CorpusError::InsufficientSnippets {
                language: lang,
                available: pool.len(),
                requested: per_language,
            });
        }
        pool.sort_by(|a, b| a.id.cmp(&b.id));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(lang as u64);
        let mut picked: Vec<usize> =
            rand::seq::index::sample(&mut rng, pool.len(), per_language).into_vec();
        picked.sort_unstable();
        chosen.extend(picked.into_iter().map(|i| Arc::clone(&pool[i])));
    }
    chosen.sort_by(|a, b| (a.language, &a.id).cmp(&(b.language, &b.id)));

    Ok(SnippetSet {
        dataset: corpus.dataset.clone(),
        snippets: chosen,
    })
}

/// Allowed target languages per source language.
pub type TargetMap = BTreeMap<Language, BTreeSet<Language>>;

/// Every language in `langs` translated into every other one.
pub fn all_pairs(langs: &[Language]) -> TargetMap {
    langs
        .iter()
        .map(|&src| {
            let targets = langs.iter().copied().filter(|&t| t != src).collect();
            (src, targets)
        })
        .collect()
}

/// Java and Python sources, each into the other plus C, C++ and Go.
pub fn java_python_targets() -> TargetMap {
    use Language::*;
    let mut map = TargetMap::new();
    map.insert(Java, [Cpp, C, Go, Python].into_iter().collect());
    map.insert(Python, [Cpp, C, Go, Java].into_iter().collect());
    map
}

pub fn validate_targets(targets: &TargetMap) -> Result<(), CorpusError> {
    for (src, dsts) in targets {
        if dsts.contains(src) {
            return Err(CorpusError::SelfTranslation(*src));
        }
    }
    Ok(())
}

pub fn enumerate_tasks(
    snippets: &SnippetSet,
    targets: &TargetMap,
) -> Result<Vec<TranslationTask>, CorpusError> {
    validate_targets(targets)?;
    let mut tasks = Vec::new();
    for s in &snippets.snippets {
        let Some(dsts) = targets.get(&s.language) else {
            continue;
        };
        for &target_lang in dsts {
            tasks.push(TranslationTask {
                dataset: snippets.dataset.clone(),
                source_lang: s.language,
                snippet_id: s.id.clone(),
                target_lang,
            });
        }
    }
    tasks.sort();
    Ok(tasks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn write_snippet(root: &Path, lang: Language, id: &str, tests: usize) {
        let dir = root.join(lang.id()).join(id);
        fs::create_dir_all(dir.join("tests")).unwrap();
        fs::write(dir.join(format!("main.{}", lang.extension())), "print(1)\n").unwrap();
        for k in 0..tests {
            fs::write(dir.join("tests").join(format!("{k}.in")), "").unwrap();
            fs::write(dir.join("tests").join(format!("{k}.out")), "1\n").unwrap();
        }
    }

    fn synthetic(counts: &[(Language, usize)]) -> SnippetSet {
        let mut snippets = Vec::new();
        for &(lang, n) in counts {
            for i in 0..n {
                snippets.push(Arc::new(Snippet {
                    id: format!("s{i:04}"),
                    language: lang,
                    source: "x".into(),
                    tests: vec![TestCase {
                        stdin: String::new(),
                        expected_stdout: String::new(),
                    }],
                }));
            }
        }
        snippets.sort_by(|a, b| (a.language, &a.id).cmp(&(b.language, &b.id)));
        SnippetSet {
            dataset: "synthetic".into(),
            snippets,
        }
    }

    #[test]
    fn loads_two_python_snippets() {
        let tmp = tempfile::tempdir().unwrap();
        write_snippet(tmp.path(), Language::Python, "a", 1);
        write_snippet(tmp.path(), Language::Python, "b", 1);
        let corpus = load_corpus(tmp.path(), Layout::FlatV1).unwrap();
        assert_eq!(corpus.snippets.len(), 2);
        assert!(corpus.report.skipped.is_empty());
        assert_eq!(corpus.snippets[0].tests[0].expected_stdout, "1\n");
    }

    #[test]
    fn snippet_without_tests_is_skipped() {
        let tmp = tempfile::tempdir().unwrap();
        write_snippet(tmp.path(), Language::Python, "a", 1);
        write_snippet(tmp.path(), Language::Python, "b", 0);
        let corpus = load_corpus(tmp.path(), Layout::FlatV1).unwrap();
        assert_eq!(corpus.snippets.len(), 1);
        assert_eq!(corpus.report.skipped.len(), 1);
        assert!(corpus.report.skipped[0].path.ends_with("b"));
    }

    #[test]
    fn missing_root_is_fatal() {
        let err = load_corpus(Path::new("/nonexistent/corpus/root"), Layout::FlatV1).unwrap_err();
        assert!(matches!(err, CorpusError::Io { .. }));
    }

    #[test]
    fn malformed_manifest_names_path() {
        let tmp = tempfile::tempdir().unwrap();
        fs::write(tmp.path().join("manifest.json"), "{ not json").unwrap();
        let err = load_corpus(tmp.path(), Layout::FlatV1).unwrap_err();
        match err {
            CorpusError::Malformed { path, .. } => assert!(path.ends_with("manifest.json")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn manifest_names_dataset_and_restricts_languages() {
        let tmp = tempfile::tempdir().unwrap();
        write_snippet(tmp.path(), Language::Python, "a", 1);
        write_snippet(tmp.path(), Language::C, "a", 1);
        fs::write(
            tmp.path().join("manifest.json"),
            r#"{"dataset_name": "codenet", "languages": ["python"]}"#,
        )
        .unwrap();
        let corpus = load_corpus(tmp.path(), Layout::FlatV1).unwrap();
        assert_eq!(corpus.dataset, "codenet");
        assert_eq!(corpus.snippets.len(), 1);
        assert_eq!(corpus.snippets[0].language, Language::Python);
    }

    #[test]
    fn orphan_test_input_is_malformed() {
        let tmp = tempfile::tempdir().unwrap();
        write_snippet(tmp.path(), Language::Python, "a", 1);
        fs::write(tmp.path().join("python/a/tests/7.in"), "x").unwrap();
        assert!(matches!(
            load_corpus(tmp.path(), Layout::FlatV1),
            Err(CorpusError::Malformed { .. })
        ));
    }

    #[test]
    fn layout_parsing() {
        assert_eq!("flat-v1".parse::<Layout>().unwrap(), Layout::FlatV1);
        assert!("flat-v2".parse::<Layout>().is_err());
    }

    fn corpus_of(set: SnippetSet) -> Corpus {
        Corpus {
            dataset: set.dataset,
            snippets: set.snippets,
            report: LoadReport::default(),
        }
    }

    #[test]
    fn sampling_1000_from_five_languages() {
        let corpus = corpus_of(synthetic(
            &Language::ALL.map(|l| (l, 250 + l as usize)),
        ));
        let set = sample_snippets(&corpus, 200, 7).unwrap();
        assert_eq!(set.len(), 1000);
        for lang in Language::ALL {
            assert_eq!(set.snippets.iter().filter(|s| s.language == lang).count(), 200);
        }
    }

    #[test]
    fn sampling_is_deterministic_and_seed_sensitive() {
        let corpus = corpus_of(synthetic(&[(Language::Go, 50), (Language::C, 40)]));
        let ids = |seed| -> Vec<String> {
            sample_snippets(&corpus, 10, seed)
                .unwrap()
                .snippets
                .iter()
                .map(|s| format!("{}/{}", s.language, s.id))
                .collect()
        };
        assert_eq!(ids(3), ids(3));
        assert_ne!(ids(3), ids(4));
    }

    #[test]
    fn sampling_zero_and_insufficient() {
        let corpus = corpus_of(synthetic(&[(Language::Go, 5), (Language::Java, 3)]));
        assert!(sample_snippets(&corpus, 0, 1).unwrap().is_empty());
        match sample_snippets(&corpus, 4, 1).unwrap_err() {
            CorpusError::InsufficientSnippets { language, .. } => {
                assert_eq!(language, Language::Java)
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn enumerates_4000_all_pairs_tasks() {
        let set = synthetic(&Language::ALL.map(|l| (l, 200)));
        let tasks = enumerate_tasks(&set, &all_pairs(&Language::ALL)).unwrap();
        assert_eq!(tasks.len(), 4000);
    }

    #[test]
    fn enumerates_1996_java_python_tasks() {
        let set = synthetic(&[(Language::Java, 249), (Language::Python, 250)]);
        let tasks = enumerate_tasks(&set, &java_python_targets()).unwrap();
        assert_eq!(tasks.len(), 1996);
    }

    #[test]
    fn empty_set_and_self_translation() {
        let set = synthetic(&[]);
        assert!(enumerate_tasks(&set, &all_pairs(&Language::ALL))
            .unwrap()
            .is_empty());
        let mut bad = TargetMap::new();
        bad.insert(Language::Go, [Language::Go].into_iter().collect());
        assert!(matches!(
            enumerate_tasks(&set, &bad),
            Err(CorpusError::SelfTranslation(Language::Go))
        ));
    }

    #[test]
    fn tasks_are_sorted_and_resolve_uniquely() {
        let set = synthetic(&[(Language::Python, 7), (Language::C, 5)]);
        let targets = all_pairs(&[Language::Python, Language::C, Language::Go]);
        let tasks = enumerate_tasks(&set, &targets).unwrap();
        let mut sorted = tasks.clone();
        sorted.sort();
        assert_eq!(tasks, sorted);
        // independent recount: sum over snippets of |targets(lang)|
        let expected: usize = set
            .snippets
            .iter()
            .map(|s| targets.get(&s.language).map_or(0, |t| t.len()))
            .sum();
        assert_eq!(tasks.len(), expected);
        let unique: HashSet<_> = tasks.iter().collect();
        assert_eq!(unique.len(), tasks.len());
        for t in &tasks {
            let s = set.resolve(t).expect("task resolves");
            assert_eq!(s.id, t.snippet_id);
        }
    }
}
