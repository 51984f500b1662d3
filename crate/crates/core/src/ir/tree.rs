use std::fmt::Write;

/// Generic syntax tree handed to the flattener. Parsers produce these;
/// the built-in parser only emits `root`, `group` and tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SyntaxTree {
    Node {
        kind: String,
        /// Optional second atom printed after the kind, e.g. `paren`.
        tag: Option<String>,
        children: Vec<SyntaxTree>,
    },
    Token(String),
}

/// Head word reserved for leaves.
pub const TOKEN_HEAD: &str = "tok";

impl SyntaxTree {
    pub fn node(kind: impl Into<String>, children: Vec<SyntaxTree>) -> Self {
        SyntaxTree::Node {
            kind: kind.into(),
            tag: None,
            children,
        }
    }

    pub fn tagged(kind: impl Into<String>, tag: impl Into<String>, children: Vec<SyntaxTree>) -> Self {
        SyntaxTree::Node {
            kind: kind.into(),
            tag: Some(tag.into()),
            children,
        }
    }

    pub fn token(lexeme: impl Into<String>) -> Self {
        SyntaxTree::Token(lexeme.into())
    }

    /// Checks that every kind and tag is a bare atom, so flattening stays
    /// unambiguous.
    pub fn validate(&self) -> Result<(), String> {
        match self {
            SyntaxTree::Token(_) => Ok(()),
            SyntaxTree::Node {
                kind,
                tag,
                children,
            } => {
                if !is_atom(kind) {
                    return Err(format!("invalid node kind {kind:?}"));
                }
                if kind == TOKEN_HEAD {
                    return Err(format!("node kind `{TOKEN_HEAD}` is reserved for tokens"));
                }
                if let Some(tag) = tag {
                    if !is_atom(tag) {
                        return Err(format!("invalid node tag {tag:?}"));
                    }
                }
                children.iter().try_for_each(SyntaxTree::validate)
            }
        }
    }
}

pub fn is_atom(s: &str) -> bool {
    !s.is_empty()
        && s.chars()
            .all(|c| !c.is_whitespace() && !c.is_control() && !matches!(c, '(' | ')' | '"' | '\\'))
}

/// Renders a tree as a single-line s-expression.
pub fn flatten(tree: &SyntaxTree) -> String {
    let mut out = String::new();
    write_tree(tree, &mut out);
    out
}

fn write_tree(tree: &SyntaxTree, out: &mut String) {
    match tree {
        SyntaxTree::Token(lexeme) => {
            out.push_str("(tok \"");
            escape_into(lexeme, out);
            out.push_str("\")");
        }
        SyntaxTree::Node {
            kind,
            tag,
            children,
        } => {
            out.push('(');
            out.push_str(kind);
            if let Some(tag) = tag {
                out.push(' ');
                out.push_str(tag);
            }
            for child in children {
                out.push(' ');
                write_tree(child, out);
            }
            out.push(')');
        }
    }
}

fn escape_into(s: &str, out: &mut String) {
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if c.is_control() => {
                let _ = write!(out, "\\u{{{:x}}}", c as u32);
            }
            c => out.push(c),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn escapes_quotes_and_backslashes() {
        assert_eq!(flatten(&SyntaxTree::token("a\"b")), r#"(tok "a\"b")"#);
        assert_eq!(flatten(&SyntaxTree::token("a\\b")), r#"(tok "a\\b")"#);
        assert_eq!(flatten(&SyntaxTree::token("a\nb")), r#"(tok "a\nb")"#);
    }

    #[test]
    fn empty_root() {
        assert_eq!(flatten(&SyntaxTree::node("root", vec![])), "(root)");
    }

    #[test]
    fn tagged_nodes_and_spacing() {
        let t = SyntaxTree::node(
            "root",
            vec![
                SyntaxTree::token("f"),
                SyntaxTree::tagged("group", "paren", vec![SyntaxTree::token("x")]),
            ],
        );
        assert_eq!(flatten(&t), r#"(root (tok "f") (group paren (tok "x")))"#);
    }

    #[test]
    fn validation_rejects_bad_atoms() {
        assert!(SyntaxTree::node("a b", vec![]).validate().is_err());
        assert!(SyntaxTree::node("tok", vec![]).validate().is_err());
        assert!(SyntaxTree::tagged("g", "(x", vec![]).validate().is_err());
        assert!(SyntaxTree::node("", vec![]).validate().is_err());
        assert!(SyntaxTree::node("call_expr", vec![SyntaxTree::token("(")])
            .validate()
            .is_ok());
    }
}
