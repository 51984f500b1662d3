//! The five source languages the harness translates between.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Language identifier. Ordering is alphabetical by id, which is also the
/// task enumeration order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    C,
    Cpp,
    Go,
    Java,
    Python,
}

impl Language {
    pub const ALL: [Language; 5] = [
        Language::C,
        Language::Cpp,
        Language::Go,
        Language::Java,
        Language::Python,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Language::C => "c",
            Language::Cpp => "cpp",
            Language::Go => "go",
            Language::Java => "java",
            Language::Python => "python",
        }
    }

    /// Source file extension, without the dot.
    pub fn extension(self) -> &'static str {
        match self {
            Language::C => "c",
            Language::Cpp => "cpp",
            Language::Go => "go",
            Language::Java => "java",
            Language::Python => "py",
        }
    }

    /// Human-facing name used inside prompts.
    pub fn display_name(self) -> &'static str {
        match self {
            Language::C => "C",
            Language::Cpp => "C++",
            Language::Go => "Go",
            Language::Java => "Java",
            Language::Python => "Python",
        }
    }

    /// Label placed after the opening fence when asking for code.
    pub fn fence_label(self) -> &'static str {
        self.id()
    }

    /// Fence labels a model might plausibly use for this language.
    pub fn fence_aliases(self) -> &'static [&'static str] {
        match self {
            Language::C => &["c", "h"],
            Language::Cpp => &["cpp", "c++", "cxx", "cc", "hpp"],
            Language::Go => &["go", "golang"],
            Language::Java => &["java"],
            Language::Python => &["python", "py", "python3"],
        }
    }

    pub fn from_extension(ext: &str) -> Option<Language> {
        Language::ALL.into_iter().find(|l| l.extension() == ext)
    }

    pub(crate) fn uses_hash_comments(self) -> bool {
        matches!(self, Language::Python)
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown language `{0}` (expected one of c, cpp, go, java, python)")]
pub struct UnknownLanguage(pub String);

impl FromStr for Language {
    type Err = UnknownLanguage;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "c" => Ok(Language::C),
            "cpp" => Ok(Language::Cpp),
            "go" => Ok(Language::Go),
            "java" => Ok(Language::Java),
            "python" => Ok(Language::Python),
            other => Err(UnknownLanguage(other.to_string())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_round_trip() {
        for lang in Language::ALL {
            assert_eq!(lang.id().parse::<Language>().unwrap(), lang);
            assert_eq!(Language::from_extension(lang.extension()), Some(lang));
        }
        assert!("C++".parse::<Language>().is_err());
    }

    #[test]
    fn ordering_is_alphabetical_by_id() {
        let mut ids: Vec<_> = Language::ALL.iter().map(|l| l.id()).collect();
        let sorted = {
            let mut s = ids.clone();
            s.sort();
            s
        };
        assert_eq!(ids, sorted);
        ids.dedup();
        assert_eq!(ids.len(), 5);
    }
}
