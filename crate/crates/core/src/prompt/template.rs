//! Versioned prompt templates, laid out as `<root>/<strategy>/<stage>.txt`
//! with a `VERSION` file at the root.

use super::strategy::PromptStrategy;
use super::PromptError;
use include_dir::{include_dir, Dir};
use std::collections::BTreeMap;
use std::path::Path;

static BUNDLED: Dir<'_> = include_dir!("$CARGO_MANIFEST_DIR/assets/templates");

/// Placeholders a template may reference.
pub const PLACEHOLDERS: &[&str] = &[
    "source_language",
    "target_language",
    "source_fence",
    "target_fence",
    "source_code",
    "source_ast",
    "exemplar_source",
    "exemplar_target",
    "exemplar_ir",
    "reasoning_steps",
    "ir_payload",
];

#[derive(Debug, Clone)]
pub struct TemplateSet {
    version: String,
    stages: BTreeMap<(String, usize), String>,
}

impl TemplateSet {
    pub fn bundled() -> Self {
        let version = BUNDLED
            .get_file("VERSION")
            .and_then(|f| f.contents_utf8())
            .expect("bundled templates carry a VERSION file")
            .trim()
            .to_string();
        let mut files = Vec::new();
        for strategy in PromptStrategy::all() {
            let name = strategy.canonical_name();
            for stage in 1..=strategy.stage_count() {
                let rel = format!("{name}/{stage}.txt");
                let text = BUNDLED
                    .get_file(&rel)
                    .and_then(|f| f.contents_utf8())
                    .unwrap_or_else(|| panic!("bundled template {rel} missing"));
                files.push((name.clone(), stage, text.to_string()));
            }
        }
        Self::from_parts(version, files).expect("bundled templates are valid")
    }

    pub fn load_dir(root: &Path) -> Result<Self, PromptError> {
        let read = |p: &Path| {
            std::fs::read_to_string(p).map_err(|e| PromptError::Template {
                path: p.display().to_string(),
                reason: e.to_string(),
            })
        };
        let version = read(&root.join("VERSION"))?.trim().to_string();
        let mut files = Vec::new();
        for strategy in PromptStrategy::all() {
            let name = strategy.canonical_name();
            for stage in 1..=strategy.stage_count() {
                let text = read(&root.join(&name).join(format!("{stage}.txt")))?;
                files.push((name.clone(), stage, text));
            }
        }
        Self::from_parts(version, files)
    }

    fn from_parts(
        version: String,
        files: Vec<(String, usize, String)>,
    ) -> Result<Self, PromptError> {
        if version.is_empty() || version.contains(char::is_whitespace) {
            return Err(PromptError::Template {
                path: "VERSION".into(),
                reason: format!("invalid version {version:?}"),
            });
        }
        let mut stages = BTreeMap::new();
        for (name, stage, text) in files {
            for placeholder in placeholders(&text) {
                if !PLACEHOLDERS.contains(&placeholder) {
                    return Err(PromptError::Template {
                        path: format!("{name}/{stage}.txt"),
                        reason: format!("unknown placeholder {{{placeholder}}}"),
                    });
                }
            }
            stages.insert((name, stage), text);
        }
        Ok(TemplateSet { version, stages })
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn get(&self, strategy: &PromptStrategy, stage: usize) -> Option<&str> {
        self.stages
            .get(&(strategy.canonical_name(), stage))
            .map(String::as_str)
    }

    pub fn template_id(&self, strategy: &PromptStrategy, stage: usize) -> String {
        format!("{}/{}@{}", strategy.canonical_name(), stage, self.version)
    }
}

fn is_placeholder_char(c: char) -> bool {
    c.is_ascii_lowercase() || c == '_'
}

/// Placeholder names referenced by `text`, in order of appearance.
pub fn placeholders(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut rest = text;
    while let Some(start) = rest.find('{') {
        let after = &rest[start + 1..];
        match after.find('}') {
            Some(end) if end > 0 && after[..end].chars().all(is_placeholder_char) => {
                out.push(&after[..end]);
                rest = &after[end + 1..];
            }
            _ => rest = after,
        }
    }
    out
}

/// Single-pass substitution: values are never rescanned, and placeholders
/// without a value are left in place.
pub fn fill(template: &str, values: &BTreeMap<&str, &str>) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(start) = rest.find('{') {
        out.push_str(&rest[..start]);
        let after = &rest[start + 1..];
        match after.find('}') {
            Some(end) if end > 0 && after[..end].chars().all(is_placeholder_char) => {
                match values.get(&after[..end]) {
                    Some(v) => out.push_str(v),
                    None => out.push_str(&rest[start..start + end + 2]),
                }
                rest = &after[end + 1..];
            }
            _ => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}
