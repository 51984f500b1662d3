//! Turns a raw model response into a candidate program.
//!
//! Fenced-block extraction runs first. The line heuristics then run to a
//! fixpoint so that re-running extraction on its own output is a no-op:
//! drop a leading "Here is"/"Here's" line, strip the whitespace prefix of
//! the first line, and delete lines starting with "End of Code".

use crate::lang::Language;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExtractionPath {
    Fenced,
    WholeResponse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    /// took the first fenced block labelled for the target language
    FenceTargetLabel,
    /// took the first fenced block, whatever its label
    FenceFirstBlock,
    DropHereIsLine,
    TrimFirstLine,
    DropEndOfCodeLines,
    NormalizeTrailingNewline,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateCode {
    pub text: String,
    pub extraction_path: ExtractionPath,
    pub rules_applied: Vec<Rule>,
}

const HERE_IS: [&str; 2] = ["Here is", "Here's"];
const END_OF_CODE: &str = "End of Code";
const FENCE: &str = "```";

struct Block<'a> {
    label: &'a str,
    lines: Vec<&'a str>,
}

fn fenced_blocks(raw: &str) -> Vec<Block<'_>> {
    let mut blocks = Vec::new();
    let mut current: Option<Block<'_>> = None;
    for line in raw.split('\n') {
        let trimmed = line.trim_start();
        match current.take() {
            None => {
                if let Some(label) = trimmed.strip_prefix(FENCE) {
                    current = Some(Block {
                        label: label.trim(),
                        lines: Vec::new(),
                    });
                }
            }
            Some(mut block) => {
                if trimmed.starts_with(FENCE) {
                    blocks.push(block);
                } else {
                    block.lines.push(line);
                    current = Some(block);
                }
            }
        }
    }
    // an unclosed fence runs to the end of the response
    if let Some(block) = current {
        blocks.push(block);
    }
    blocks
}

fn label_matches(label: &str, lang: Language) -> bool {
    let first = label
        .split(|c: char| c.is_whitespace() || c == '{' || c == ',')
        .next()
        .unwrap_or("")
        .to_ascii_lowercase();
    lang.fence_aliases().contains(&first.as_str())
}

pub fn extract_code(raw: &str, target_lang: Language) -> CandidateCode {
    let mut rules = Vec::new();
    let blocks = fenced_blocks(raw);
    let (mut lines, extraction_path): (Vec<&str>, _) =
        match blocks.iter().position(|b| label_matches(b.label, target_lang)) {
            Some(i) => {
                rules.push(Rule::FenceTargetLabel);
                (blocks[i].lines.clone(), ExtractionPath::Fenced)
            }
            None if !blocks.is_empty() => {
                rules.push(Rule::FenceFirstBlock);
                (blocks[0].lines.clone(), ExtractionPath::Fenced)
            }
            None => (raw.split('\n').collect(), ExtractionPath::WholeResponse),
        };

    loop {
        let mut changed = false;
        if let Some(first) = lines.first() {
            let head = first.trim_start();
            if HERE_IS.iter().any(|p| head.starts_with(p)) {
                lines.remove(0);
                rules.push(Rule::DropHereIsLine);
                changed = true;
            }
        }
        if let Some(first) = lines.first_mut() {
            let trimmed = first.trim_start();
            if trimmed.len() != first.len() {
                *first = trimmed;
                rules.push(Rule::TrimFirstLine);
                changed = true;
            }
        }
        let before = lines.len();
        lines.retain(|l| !l.trim_start().starts_with(END_OF_CODE));
        if lines.len() != before {
            rules.push(Rule::DropEndOfCodeLines);
            changed = true;
        }
        if !changed {
            break;
        }
    }

    let joined = lines.join("\n");
    let body = joined.trim_end_matches('\n');
    let text = if body.is_empty() {
        String::new()
    } else {
        format!("{body}\n")
    };
    if text != joined {
        rules.push(Rule::NormalizeTrailingNewline);
    }
    CandidateCode {
        text,
        extraction_path,
        rules_applied: rules,
    }
}
