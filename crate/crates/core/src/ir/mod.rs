//! Intermediate representations: flattened syntax trees computed locally,
//! and natural-language summaries supplied by the exemplar bank or a model.

mod token_tree;
mod tree;

pub use token_tree::{parse_token_tree, TokenTreeParser, BUILTIN_PARSER_ID};
pub use tree::{flatten, is_atom, SyntaxTree, TOKEN_HEAD};

use crate::lang::Language;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("parse error at byte {offset}: {message}")]
pub struct ParseError {
    pub offset: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum IrError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("no parser `{id}` registered for {language}")]
    UnknownParser { language: Language, id: String },
    #[error("parser `{id}` is already registered for {language}")]
    DuplicateParser { language: Language, id: String },
    #[error("parser `{id}` produced a malformed tree: {reason}")]
    MalformedTree { id: String, reason: String },
    #[error("NL summary is empty")]
    EmptySummary,
}

/// Adapter interface for syntax parsers. Implementations must be pure.
pub trait SyntaxParser: Send + Sync {
    fn id(&self) -> &str;
    fn parse(&self, source: &str, language: Language) -> Result<SyntaxTree, ParseError>;
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlattenedAst {
    pub text: String,
    pub language: Language,
    pub parser_id: String,
}

/// Parsers available per language. The built-in token-tree parser is
/// registered for all five languages by default.
#[derive(Clone)]
pub struct ParserRegistry {
    parsers: BTreeMap<(Language, String), Arc<dyn SyntaxParser>>,
}

impl Default for ParserRegistry {
    fn default() -> Self {
        let mut registry = ParserRegistry::empty();
        for lang in Language::ALL {
            registry
                .register(lang, Arc::new(TokenTreeParser))
                .expect("fresh registry");
        }
        registry
    }
}

impl std::fmt::Debug for ParserRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_set().entries(self.parsers.keys()).finish()
    }
}

impl ParserRegistry {
    pub fn empty() -> Self {
        ParserRegistry {
            parsers: BTreeMap::new(),
        }
    }

    pub fn register(
        &mut self,
        language: Language,
        parser: Arc<dyn SyntaxParser>,
    ) -> Result<(), IrError> {
        let key = (language, parser.id().to_string());
        if self.parsers.contains_key(&key) {
            return Err(IrError::DuplicateParser {
                language,
                id: key.1,
            });
        }
        self.parsers.insert(key, parser);
        Ok(())
    }

    pub fn has(&self, language: Language, parser_id: &str) -> bool {
        self.parsers.contains_key(&(language, parser_id.to_string()))
    }

    pub fn extract_ast(
        &self,
        source: &str,
        language: Language,
        parser_id: &str,
    ) -> Result<FlattenedAst, IrError> {
        let parser = self
            .parsers
            .get(&(language, parser_id.to_string()))
            .ok_or_else(|| IrError::UnknownParser {
                language,
                id: parser_id.to_string(),
            })?;
        let tree = parser.parse(source, language)?;
        tree.validate().map_err(|reason| IrError::MalformedTree {
            id: parser_id.to_string(),
            reason,
        })?;
        Ok(FlattenedAst {
            text: flatten(&tree),
            language,
            parser_id: parser_id.to_string(),
        })
    }
}

/// Flattens `source` with the built-in parser.
pub fn extract_ast(source: &str, language: Language) -> Result<FlattenedAst, IrError> {
    let tree = parse_token_tree(source, language)?;
    Ok(FlattenedAst {
        text: flatten(&tree),
        language,
        parser_id: BUILTIN_PARSER_ID.to_string(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SummaryOrigin {
    ExemplarBank,
    ModelGenerated,
}

pub const DEFAULT_SUMMARY_CAP: usize = 4096;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NlSummary {
    pub text: String,
    pub origin: SummaryOrigin,
    pub truncated: bool,
}

impl NlSummary {
    pub fn new(text: &str, origin: SummaryOrigin) -> Result<Self, IrError> {
        Self::with_cap(text, origin, DEFAULT_SUMMARY_CAP)
    }

    /// Caps the summary at `cap` characters, cutting back to the last
    /// whitespace boundary when the cut would split a word.
    pub fn with_cap(text: &str, origin: SummaryOrigin, cap: usize) -> Result<Self, IrError> {
        let text = text.trim();
        if text.is_empty() {
            return Err(IrError::EmptySummary);
        }
        let Some((cut, next)) = text.char_indices().nth(cap) else {
            return Ok(NlSummary {
                text: text.to_string(),
                origin,
                truncated: false,
            });
        };
        let head = &text[..cut];
        let kept = if next.is_whitespace() {
            head
        } else {
            match head.rfind(char::is_whitespace) {
                Some(i) => &head[..i],
                None => head,
            }
        };
        let kept = kept.trim_end();
        if kept.is_empty() {
            return Err(IrError::EmptySummary);
        }
        Ok(NlSummary {
            text: kept.to_string(),
            origin,
            truncated: true,
        })
    }
}
