//! Language-agnostic token-tree parser: lexes identifiers, numbers, string
//! literals and operators, drops comments, and nests tokens by balanced
//! `()`, `[]` and `{}`.

use super::tree::SyntaxTree;
use super::{ParseError, SyntaxParser};
use crate::lang::Language;

pub const BUILTIN_PARSER_ID: &str = "builtin-token-tree";

#[derive(Debug, Default, Clone, Copy)]
pub struct TokenTreeParser;

impl SyntaxParser for TokenTreeParser {
    fn id(&self) -> &str {
        BUILTIN_PARSER_ID
    }

    fn parse(&self, source: &str, language: Language) -> Result<SyntaxTree, ParseError> {
        parse_token_tree(source, language)
    }
}

// Longest first so maximal munch works with a linear scan.
const OPERATORS: &[&str] = &[
    "<<=", ">>=", "...", "**=", "//=", "&^=", "===", "!==", ">>>", "<=>", "->*", "==", "!=",
    "<=", ">=", "&&", "||", "++", "--", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "<<",
    ">>", "->", "::", ":=", "**", "//", "<-", "&^", "##",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Delim {
    Paren,
    Bracket,
    Brace,
}

impl Delim {
    fn open(c: char) -> Option<Delim> {
        match c {
            '(' => Some(Delim::Paren),
            '[' => Some(Delim::Bracket),
            '{' => Some(Delim::Brace),
            _ => None,
        }
    }

    fn close(c: char) -> Option<Delim> {
        match c {
            ')' => Some(Delim::Paren),
            ']' => Some(Delim::Bracket),
            '}' => Some(Delim::Brace),
            _ => None,
        }
    }

    fn tag(self) -> &'static str {
        match self {
            Delim::Paren => "paren",
            Delim::Bracket => "bracket",
            Delim::Brace => "brace",
        }
    }
}

struct Frame {
    delim: Delim,
    offset: usize,
    children: Vec<SyntaxTree>,
}

pub fn parse_token_tree(source: &str, language: Language) -> Result<SyntaxTree, ParseError> {
    let bytes = source.as_bytes();
    let mut root: Vec<SyntaxTree> = Vec::new();
    let mut stack: Vec<Frame> = Vec::new();
    let mut pos = 0;

    fn push(stack: &mut [Frame], root: &mut Vec<SyntaxTree>, t: SyntaxTree) {
        match stack.last_mut() {
            Some(frame) => frame.children.push(t),
            None => root.push(t),
        }
    }

    while pos < bytes.len() {
        let rest = &source[pos..];
        let c = rest.chars().next().expect("non-empty remainder");

        if c.is_whitespace() {
            pos += c.len_utf8();
            continue;
        }

        // comments
        if language.uses_hash_comments() {
            if c == '#' {
                pos += rest.find('\n').unwrap_or(rest.len());
                continue;
            }
        } else if rest.starts_with("//") {
            pos += rest.find('\n').unwrap_or(rest.len());
            continue;
        } else if let Some(body) = rest.strip_prefix("/*") {
            pos += body.find("*/").map_or(rest.len(), |i| i + 4);
            continue;
        }

        if let Some(delim) = Delim::open(c) {
            stack.push(Frame {
                delim,
                offset: pos,
                children: Vec::new(),
            });
            pos += 1;
            continue;
        }
        if let Some(delim) = Delim::close(c) {
            match stack.pop() {
                Some(frame) if frame.delim == delim => {
                    let group = SyntaxTree::tagged("group", delim.tag(), frame.children);
                    push(&mut stack, &mut root, group);
                    pos += 1;
                    continue;
                }
                Some(frame) => {
                    return Err(ParseError {
                        offset: pos,
                        message: format!(
                            "`{c}` closes a {} opened at offset {}",
                            frame.delim.tag(),
                            frame.offset
                        ),
                    })
                }
                None => {
                    return Err(ParseError {
                        offset: pos,
                        message: format!("unmatched closing `{c}`"),
                    })
                }
            }
        }

        let len = if c == '"' || c == '\'' || (c == '`' && language == Language::Go) {
            string_len(rest, c).ok_or_else(|| ParseError {
                offset: pos,
                message: "unterminated string literal".into(),
            })?
        } else if c.is_ascii_digit() {
            number_len(rest)
        } else if is_ident_start(c) {
            rest.char_indices()
                .find(|&(_, ch)| !is_ident_continue(ch))
                .map_or(rest.len(), |(i, _)| i)
        } else {
            OPERATORS
                .iter()
                .find(|op| rest.starts_with(*op))
                .map_or(c.len_utf8(), |op| op.len())
        };
        push(&mut stack, &mut root, SyntaxTree::token(&rest[..len]));
        pos += len;
    }

    if let Some(frame) = stack.first() {
        // report the outermost unclosed delimiter
        return Err(ParseError {
            offset: frame.offset,
            message: format!("unclosed {}", frame.delim.tag()),
        });
    }
    Ok(SyntaxTree::node("root", root))
}

fn is_ident_start(c: char) -> bool {
    c.is_alphabetic() || c == '_' || (!c.is_ascii() && !c.is_whitespace() && !c.is_control())
}

fn is_ident_continue(c: char) -> bool {
    is_ident_start(c) || c.is_ascii_digit() || c.is_numeric()
}

/// Length in bytes of a quoted literal starting at `rest[0] == quote`,
/// or `None` when unterminated. Backticks (Go raw strings) have no escapes.
fn string_len(rest: &str, quote: char) -> Option<usize> {
    let mut escaped = false;
    for (i, ch) in rest.char_indices().skip(1) {
        if escaped {
            escaped = false;
        } else if ch == '\\' && quote != '`' {
            escaped = true;
        } else if ch == quote {
            return Some(i + ch.len_utf8());
        }
    }
    None
}

fn number_len(rest: &str) -> usize {
    let mut prev = '\0';
    for (i, ch) in rest.char_indices() {
        let exponent_sign = (ch == '+' || ch == '-') && matches!(prev, 'e' | 'E' | 'p' | 'P');
        if !(ch.is_ascii_alphanumeric() || ch == '_' || ch == '.' || exponent_sign) {
            return i;
        }
        prev = ch;
    }
    rest.len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::tree::flatten;

    fn flat(src: &str, lang: Language) -> String {
        flatten(&parse_token_tree(src, lang).unwrap())
    }

    #[test]
    fn brace_and_paren_nesting() {
        assert_eq!(
            flat("f(x){y;}", Language::C),
            r#"(root (tok "f") (group paren (tok "x")) (group brace (tok "y") (tok ";")))"#
        );
    }

    #[test]
    fn empty_source() {
        assert_eq!(flat("", Language::Java), "(root)");
        assert_eq!(flat("  \n\t", Language::Java), "(root)");
    }

    #[test]
    fn unclosed_paren_offset() {
        let err = parse_token_tree("f(", Language::C).unwrap_err();
        assert_eq!(err.offset, 1);
    }

    #[test]
    fn mismatched_close_offset() {
        let err = parse_token_tree("a[b)", Language::Go).unwrap_err();
        assert_eq!(err.offset, 3);
        let err = parse_token_tree("x}", Language::Go).unwrap_err();
        assert_eq!(err.offset, 1);
    }

    #[test]
    fn comments_are_stripped_per_language() {
        assert_eq!(
            flat("a // b\n/* c\n d */ e", Language::Cpp),
            r#"(root (tok "a") (tok "e"))"#
        );
        assert_eq!(flat("a # b\nc", Language::Python), r#"(root (tok "a") (tok "c"))"#);
        // `#` is a token in C
        assert_eq!(
            flat("#include <x.h>", Language::C),
            r##"(root (tok "#") (tok "include") (tok "<") (tok "x") (tok ".") (tok "h") (tok ">"))"##
        );
        // `//` is floor division in Python
        assert_eq!(
            flat("a // b", Language::Python),
            r#"(root (tok "a") (tok "//") (tok "b"))"#
        );
    }

    #[test]
    fn strings_are_single_tokens() {
        assert_eq!(
            flat(r#"printf("%d (x)\n", a);"#, Language::C),
            r#"(root (tok "printf") (group paren (tok "\"%d (x)\\n\"") (tok ",") (tok "a")) (tok ";"))"#
        );
        assert_eq!(flat("`a\\b`", Language::Go), r#"(root (tok "`a\\b`"))"#);
        assert!(parse_token_tree("\"abc", Language::Java).is_err());
    }

    #[test]
    fn operators_and_numbers() {
        assert_eq!(
            flat("i += 1e-5 >>= x->y", Language::Cpp),
            r#"(root (tok "i") (tok "+=") (tok "1e-5") (tok ">>=") (tok "x") (tok "->") (tok "y"))"#
        );
        assert_eq!(
            flat("x := 0x1F", Language::Go),
            r#"(root (tok "x") (tok ":=") (tok "0x1F"))"#
        );
    }

    #[test]
    fn non_ascii_identifiers() {
        assert_eq!(flat("größe = 1", Language::Python), r#"(root (tok "größe") (tok "=") (tok "1"))"#);
    }
}
