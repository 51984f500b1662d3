//! Compiles and runs candidate programs against test cases.
//!
//! A candidate succeeds when it compiles, every test run exits with status 0
//! inside the time limit, and every normalized stdout equals the expected
//! output. Tests run in order and judging stops at the first failure.

mod process;

pub use process::{run_limited, RunOutcome};

use crate::corpus::TestCase;
use crate::lang::Language;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Duration;

pub const DETAIL_CAP: usize = 4096;
const PROBE_TIMEOUT: Duration = Duration::from_secs(20);

#[derive(Debug, thiserror::Error)]
pub enum JudgeError {
    #[error("sandbox setup failed: {0}")]
    Infrastructure(String),
    #[error("invalid toolchain for {language}: {reason}")]
    InvalidToolchain { language: Language, reason: String },
    #[error("invalid limits: {0}")]
    InvalidLimits(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Toolchain {
    pub language: Language,
    /// Empty for languages that run the source directly.
    pub compile_cmd: Vec<String>,
    pub run_cmd: Vec<String>,
    pub source_filename: String,
    pub version_probe_cmd: Vec<String>,
}

fn argv(parts: &[&str]) -> Vec<String> {
    parts.iter().map(|s| s.to_string()).collect()
}

impl Toolchain {
    pub fn default_for(language: Language) -> Toolchain {
        use Language::*;
        let (compile, run, file, probe): (&[&str], &[&str], &str, &[&str]) = match language {
            C => (
                &["gcc", "-O2", "-std=gnu11", "-o", "{bin}", "{src}", "-lm"],
                &["{bin}"],
                "main.c",
                &["gcc", "--version"],
            ),
            Cpp => (
                &["g++", "-O2", "-std=gnu++17", "-o", "{bin}", "{src}"],
                &["{bin}"],
                "main.cpp",
                &["g++", "--version"],
            ),
            Go => (
                &["go", "build", "-o", "{bin}", "{src}"],
                &["{bin}"],
                "main.go",
                &["go", "version"],
            ),
            Java => (
                &["javac", "-d", "{dir}", "{src}"],
                &["java", "-cp", "{dir}", "Main"],
                "Main.java",
                &["javac", "-version"],
            ),
            Python => (
                &["python3", "-m", "py_compile", "{src}"],
                &["python3", "{src}"],
                "main.py",
                &["python3", "--version"],
            ),
        };
        Toolchain {
            language,
            compile_cmd: argv(compile),
            run_cmd: argv(run),
            source_filename: file.to_string(),
            version_probe_cmd: argv(probe),
        }
    }

    pub fn defaults() -> Vec<Toolchain> {
        Language::ALL.into_iter().map(Toolchain::default_for).collect()
    }

    pub fn validate(&self) -> Result<(), JudgeError> {
        let bad = |reason: String| JudgeError::InvalidToolchain {
            language: self.language,
            reason,
        };
        if self.run_cmd.is_empty() {
            return Err(bad("run_cmd is empty".into()));
        }
        if self.version_probe_cmd.is_empty() {
            return Err(bad("version_probe_cmd is empty".into()));
        }
        if self.source_filename.is_empty() || self.source_filename.contains('/') {
            return Err(bad(format!("bad source filename {:?}", self.source_filename)));
        }
        for arg in self.compile_cmd.iter().chain(&self.run_cmd) {
            for p in crate::prompt::placeholders(arg) {
                if !matches!(p, "src" | "bin" | "dir") {
                    return Err(bad(format!("unknown placeholder {{{p}}} in {arg:?}")));
                }
            }
        }
        Ok(())
    }

    fn expand(&self, template: &[String], dir: &Path) -> Vec<String> {
        let dir_s = dir.display().to_string();
        let src = dir.join(&self.source_filename).display().to_string();
        let bin = dir.join("main").display().to_string();
        let mut values = BTreeMap::new();
        values.insert("src", src.as_str());
        values.insert("bin", bin.as_str());
        values.insert("dir", dir_s.as_str());
        template
            .iter()
            .map(|a| crate::prompt::fill(a, &values))
            .collect()
    }
}

fn secs(v: f64) -> Duration {
    Duration::from_secs_f64(v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Limits {
    pub compile_timeout_secs: f64,
    pub run_timeout_secs: f64,
    pub max_output_bytes: u64,
    /// Compare raw stdout instead of normalized stdout.
    pub strict_compare: bool,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            compile_timeout_secs: 60.0,
            run_timeout_secs: 10.0,
            max_output_bytes: 1 << 20,
            strict_compare: false,
        }
    }
}

impl Limits {
    pub fn validate(&self) -> Result<(), JudgeError> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.compile_timeout_secs) || !positive(self.run_timeout_secs) {
            return Err(JudgeError::InvalidLimits("timeouts must be positive".into()));
        }
        if self.max_output_bytes == 0 {
            return Err(JudgeError::InvalidLimits("max_output_bytes must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum VerdictKind {
    Success,
    CompileError,
    RuntimeError,
    Timeout,
    WrongOutput,
    ToolMissing,
}

impl fmt::Display for VerdictKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub kind: VerdictKind,
    pub detail: String,
    pub failing_test: Option<usize>,
}

impl Verdict {
    fn new(kind: VerdictKind, detail: String, failing_test: Option<usize>) -> Self {
        Verdict {
            kind,
            detail: truncate_detail(detail),
            failing_test,
        }
    }

    pub fn is_success(&self) -> bool {
        self.kind == VerdictKind::Success
    }
}

fn truncate_detail(mut s: String) -> String {
    if s.len() > DETAIL_CAP {
        let mut cut = DETAIL_CAP;
        while !s.is_char_boundary(cut) {
            cut -= 1;
        }
        s.truncate(cut);
    }
    s
}

/// Canonical form used for output comparison: lossy UTF-8, LF line
/// endings, no trailing whitespace per line, no trailing blank lines.
pub fn normalize_output(bytes: &[u8]) -> String {
    let text = String::from_utf8_lossy(bytes).replace("\r\n", "\n");
    let lines: Vec<&str> = text.split('\n').map(str::trim_end).collect();
    let mut out = lines.join("\n");
    let keep = out.trim_end_matches('\n').len();
    out.truncate(keep);
    out
}

/// Availability of each toolchain: the probe's version line, or `None`.
pub type AvailabilityReport = BTreeMap<Language, Option<String>>;

pub fn probe_toolchains(toolchains: &[Toolchain]) -> AvailabilityReport {
    let mut report = AvailabilityReport::new();
    let dir = std::env::temp_dir();
    for tc in toolchains {
        let version = run_limited(&tc.version_probe_cmd, &dir, b"", PROBE_TIMEOUT, 64 * 1024)
            .ok()
            .filter(RunOutcome::success)
            .map(|out| {
                let text = if out.stdout.iter().any(|b| !b.is_ascii_whitespace()) {
                    out.stdout
                } else {
                    out.stderr
                };
                String::from_utf8_lossy(&text)
                    .lines()
                    .find(|l| !l.trim().is_empty())
                    .unwrap_or("")
                    .trim()
                    .to_string()
            });
        report.insert(tc.language, version);
    }
    report
}

fn sanitize(bytes: &[u8], dir: &Path) -> String {
    let text = String::from_utf8_lossy(bytes);
    let dir_s = dir.display().to_string();
    let mut text = text.replace(&dir_s, "{dir}");
    // macOS-style and canonicalized temp paths
    if let Ok(canon) = dir.canonicalize() {
        text = text.replace(&canon.display().to_string(), "{dir}");
    }
    text
}

fn first_difference(expected: &str, actual: &str) -> String {
    let (mut e, mut a) = (expected.split('\n'), actual.split('\n'));
    let mut line = 1;
    loop {
        match (e.next(), a.next()) {
            (Some(x), Some(y)) if x == y => line += 1,
            (x, y) => {
                let show = |s: Option<&str>| match s {
                    Some(s) => format!("{:?}", s.chars().take(200).collect::<String>()),
                    None => "end of output".to_string(),
                };
                return format!("line {line}: expected {}, got {}", show(x), show(y));
            }
        }
    }
}

/// Judges one candidate in a fresh temporary directory under `sandbox_root`
/// (the system temp dir when `None`). The toolchain is assumed available;
/// a compiler or interpreter that cannot be spawned yields `ToolMissing`.
pub fn judge_translation(
    candidate: &str,
    tests: &[TestCase],
    toolchain: &Toolchain,
    limits: &Limits,
    sandbox_root: Option<&Path>,
) -> Result<Verdict, JudgeError> {
    let infra = |e: std::io::Error| JudgeError::Infrastructure(e.to_string());
    let workdir = match sandbox_root {
        Some(root) => {
            std::fs::create_dir_all(root).map_err(infra)?;
            tempfile::Builder::new().prefix("judge-").tempdir_in(root)
        }
        None => tempfile::Builder::new().prefix("judge-").tempdir(),
    }
    .map_err(infra)?;
    let dir = workdir.path();
    std::fs::write(dir.join(&toolchain.source_filename), candidate).map_err(infra)?;
    let max_out = usize::try_from(limits.max_output_bytes).unwrap_or(usize::MAX);

    let spawn_failed = |e: std::io::Error| -> Result<Verdict, JudgeError> {
        if e.kind() == std::io::ErrorKind::NotFound {
            Ok(Verdict::new(VerdictKind::ToolMissing, e.to_string(), None))
        } else {
            Err(JudgeError::Infrastructure(e.to_string()))
        }
    };

    if !toolchain.compile_cmd.is_empty() {
        let cmd = toolchain.expand(&toolchain.compile_cmd, dir);
        let out = match run_limited(&cmd, dir, b"", secs(limits.compile_timeout_secs), max_out) {
            Ok(out) => out,
            Err(e) => return spawn_failed(e),
        };
        if out.timed_out {
            return Ok(Verdict::new(
                VerdictKind::CompileError,
                format!(
                    "compilation exceeded {}s",
                    limits.compile_timeout_secs
                ),
                None,
            ));
        }
        if !out.success() {
            let mut detail = sanitize(&out.stderr, dir);
            if detail.trim().is_empty() {
                detail = sanitize(&out.stdout, dir);
            }
            if detail.trim().is_empty() {
                detail = out.describe_status();
            }
            return Ok(Verdict::new(VerdictKind::CompileError, detail, None));
        }
    }

    let run_cmd = toolchain.expand(&toolchain.run_cmd, dir);
    for (i, test) in tests.iter().enumerate() {
        let out = match run_limited(
            &run_cmd,
            dir,
            test.stdin.as_bytes(),
            secs(limits.run_timeout_secs),
            max_out,
        ) {
            Ok(out) => out,
            Err(e) => return spawn_failed(e),
        };
        if out.output_exceeded {
            return Ok(Verdict::new(
                VerdictKind::WrongOutput,
                format!(
                    "test {i}: output exceeded {} bytes",
                    limits.max_output_bytes
                ),
                Some(i),
            ));
        }
        if out.timed_out {
            return Ok(Verdict::new(
                VerdictKind::Timeout,
                format!("test {i}: exceeded {}s", limits.run_timeout_secs),
                Some(i),
            ));
        }
        if !out.success() {
            return Ok(Verdict::new(
                VerdictKind::RuntimeError,
                format!(
                    "test {i}: {}\n{}",
                    out.describe_status(),
                    sanitize(&out.stderr, dir)
                ),
                Some(i),
            ));
        }
        let (expected, actual) = if limits.strict_compare {
            (
                test.expected_stdout.clone(),
                String::from_utf8_lossy(&out.stdout).into_owned(),
            )
        } else {
            (
                normalize_output(test.expected_stdout.as_bytes()),
                normalize_output(&out.stdout),
            )
        };
        if expected != actual {
            return Ok(Verdict::new(
                VerdictKind::WrongOutput,
                format!("test {i}: {}", first_difference(&expected, &actual)),
                Some(i),
            ));
        }
    }
    Ok(Verdict::new(VerdictKind::Success, String::new(), None))
}

/// Toolchains plus their probed availability.
#[derive(Debug, Clone)]
pub struct Judge {
    toolchains: BTreeMap<Language, Toolchain>,
    availability: AvailabilityReport,
    limits: Limits,
    sandbox_root: Option<PathBuf>,
}

impl Judge {
    /// Validates and probes `toolchains`.
    pub fn new(
        toolchains: Vec<Toolchain>,
        limits: Limits,
        sandbox_root: Option<PathBuf>,
    ) -> Result<Judge, JudgeError> {
        limits.validate()?;
        for tc in &toolchains {
            tc.validate()?;
        }
        let availability = probe_toolchains(&toolchains);
        Ok(Judge {
            toolchains: toolchains.into_iter().map(|t| (t.language, t)).collect(),
            availability,
            limits,
            sandbox_root,
        })
    }

    pub fn availability(&self) -> &AvailabilityReport {
        &self.availability
    }

    pub fn limits(&self) -> &Limits {
        &self.limits
    }

    pub fn is_available(&self, language: Language) -> bool {
        matches!(self.availability.get(&language), Some(Some(_)))
    }

    pub fn judge(
        &self,
        candidate: &str,
        language: Language,
        tests: &[TestCase],
    ) -> Result<Verdict, JudgeError> {
        let Some(tc) = self.toolchains.get(&language).filter(|_| self.is_available(language))
        else {
            return Ok(Verdict::new(
                VerdictKind::ToolMissing,
                format!("no available toolchain for {language}"),
                None,
            ));
        };
        judge_translation(
            candidate,
            tests,
            tc,
            &self.limits,
            self.sandbox_root.as_deref(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalization_examples() {
        assert_eq!(normalize_output(b"1 \n2\n\n"), "1\n2");
        assert_eq!(normalize_output(b"1\r\n2"), "1\n2");
        assert_eq!(normalize_output(b""), normalize_output(b""));
        assert_eq!(normalize_output(b"\n\n  \n"), "");
        assert_eq!(normalize_output(b"  a"), "  a");
        assert_eq!(normalize_output(&[0x66, 0xff]), "f\u{fffd}");
    }

    #[test]
    fn default_toolchains_validate() {
        for tc in Toolchain::defaults() {
            tc.validate().unwrap();
        }
        let mut tc = Toolchain::default_for(Language::C);
        tc.run_cmd = vec!["{out}".into()];
        assert!(tc.validate().is_err());
    }

    #[test]
    fn expansion_substitutes_paths() {
        let tc = Toolchain::default_for(Language::Java);
        let cmd = tc.expand(&tc.compile_cmd, Path::new("/w"));
        assert_eq!(cmd, vec!["javac", "-d", "/w", "/w/Main.java"]);
    }

    #[test]
    fn probe_reports_missing_tools() {
        let mut missing = Toolchain::default_for(Language::Go);
        missing.version_probe_cmd = vec!["no-such-compiler-xyz".into(), "--version".into()];
        let mut present = Toolchain::default_for(Language::Python);
        present.version_probe_cmd = vec!["sh".into(), "-c".into(), "echo tool 1.0".into()];
        let report = probe_toolchains(&[missing, present]);
        assert_eq!(report[&Language::Go], None);
        assert_eq!(report[&Language::Python].as_deref(), Some("tool 1.0"));
        assert!(probe_toolchains(&[]).is_empty());
    }

    fn shell_toolchain(compile: &str) -> Toolchain {
        Toolchain {
            language: Language::Python,
            compile_cmd: if compile.is_empty() {
                vec![]
            } else {
                vec!["sh".into(), "-c".into(), compile.into()]
            },
            run_cmd: vec!["sh".into(), "{src}".into()],
            source_filename: "main.sh".into(),
            version_probe_cmd: vec!["sh".into(), "-c".into(), "echo sh".into()],
        }
    }

    fn tests(pairs: &[(&str, &str)]) -> Vec<TestCase> {
        pairs
            .iter()
            .map(|(i, o)| TestCase {
                stdin: i.to_string(),
                expected_stdout: o.to_string(),
            })
            .collect()
    }

    fn limits(run: f64) -> Limits {
        Limits {
            run_timeout_secs: run,
            ..Limits::default()
        }
    }

    #[test]
    fn classification_with_shell_programs() {
        let tc = shell_toolchain("");
        let t = tests(&[("3\n", "3\n"), ("4\n", "4\n")]);
        let judge = |src: &str| judge_translation(src, &t, &tc, &limits(2.0), None).unwrap();

        assert_eq!(judge("read x; echo $x").kind, VerdictKind::Success);
        assert_eq!(judge("read x; echo \"$x   \"").kind, VerdictKind::Success);
        let v = judge("read x; echo 3");
        assert_eq!((v.kind, v.failing_test), (VerdictKind::WrongOutput, Some(1)));
        let v = judge("exit 1");
        assert_eq!((v.kind, v.failing_test), (VerdictKind::RuntimeError, Some(0)));
        let v = judge("while :; do :; done");
        assert_eq!((v.kind, v.failing_test), (VerdictKind::Timeout, Some(0)));
        let v = judge("yes");
        assert_eq!(v.kind, VerdictKind::WrongOutput);
    }

    #[test]
    fn compile_failure_and_missing_tool() {
        let t = tests(&[("", "")]);
        let tc = shell_toolchain("echo \"broken: $PWD\" >&2; exit 1");
        let v = judge_translation("", &t, &tc, &limits(1.0), None).unwrap();
        assert_eq!(v.kind, VerdictKind::CompileError);
        assert!(v.detail.starts_with("broken: {dir}"), "{}", v.detail);

        let mut tc = shell_toolchain("");
        tc.run_cmd = vec!["no-such-interpreter-xyz".into()];
        let v = judge_translation("", &t, &tc, &limits(1.0), None).unwrap();
        assert_eq!(v.kind, VerdictKind::ToolMissing);
    }

    #[test]
    fn strict_compare_disables_normalization() {
        let tc = shell_toolchain("");
        let t = tests(&[("", "a\n")]);
        let strict = Limits {
            strict_compare: true,
            ..limits(2.0)
        };
        let v = judge_translation("echo 'a '", &t, &tc, &strict, None).unwrap();
        assert_eq!(v.kind, VerdictKind::WrongOutput);
        let v = judge_translation("echo 'a '", &t, &tc, &limits(2.0), None).unwrap();
        assert_eq!(v.kind, VerdictKind::Success);
    }

    #[test]
    fn sandbox_dirs_are_fresh_and_removed() {
        let root = tempfile::tempdir().unwrap();
        let tc = shell_toolchain("");
        let t = tests(&[("", "0\n")]);
        // a file left by one judgment must not be visible to the next
        let src = "ls | grep -c leftover; touch leftover";
        for _ in 0..2 {
            let v = judge_translation(src, &t, &tc, &limits(2.0), Some(root.path())).unwrap();
            assert_eq!(v.kind, VerdictKind::Success, "{}", v.detail);
        }
        assert_eq!(std::fs::read_dir(root.path()).unwrap().count(), 0);
    }

    #[test]
    fn unavailable_language_is_tool_missing() {
        let mut tc = Toolchain::default_for(Language::Go);
        tc.version_probe_cmd = vec!["no-such-compiler-xyz".into()];
        let judge = Judge::new(vec![tc], Limits::default(), None).unwrap();
        let v = judge.judge("package main", Language::Go, &[]).unwrap();
        assert_eq!(v.kind, VerdictKind::ToolMissing);
        let v = judge.judge("x", Language::C, &[]).unwrap();
        assert_eq!(v.kind, VerdictKind::ToolMissing);
    }

    #[test]
    fn detail_is_capped() {
        let long = "é".repeat(5000);
        let v = Verdict::new(VerdictKind::CompileError, long, None);
        assert!(v.detail.len() <= DETAIL_CAP);
    }
}
