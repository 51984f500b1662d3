//! Renders prompting strategies into concrete prompt stages.

mod exemplar;
mod strategy;
mod template;

pub use exemplar::{Exemplar, ExemplarBank};
pub use strategy::{IrKind, PromptStrategy, StrategyError, StrategyKind};
pub use template::{fill, placeholders, TemplateSet, PLACEHOLDERS};

use crate::corpus::TranslationTask;
use crate::ir::FlattenedAst;
use crate::lang::Language;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub const IR_PAYLOAD_SLOT: &str = "{ir_payload}";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PromptError {
    #[error("exemplar bank has no {from}->{to} pair")]
    MissingExemplar { from: Language, to: Language },
    #[error("{strategy} needs a local AST of the source")]
    MissingLocalAst { strategy: String },
    #[error("template {template_id} references {{{name}}}, which {strategy} cannot fill")]
    UnfilledPlaceholder {
        template_id: String,
        strategy: String,
        name: String,
    },
    #[error("template error in {path}: {reason}")]
    Template { path: String, reason: String },
    #[error("exemplar error in {path}: {reason}")]
    Exemplar { path: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageOutput {
    IrPayload,
    TargetCode,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptStage {
    pub template_id: String,
    pub rendered_text: String,
    pub expects: StageOutput,
}

impl PromptStage {
    /// Substitutes a previous stage's output into the `{ir_payload}` slot.
    /// Only outer whitespace is trimmed from the payload.
    pub fn with_ir_payload(&self, payload: &str) -> String {
        let mut values = BTreeMap::new();
        values.insert("ir_payload", payload.trim());
        fill(&self.rendered_text, &values)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptPlan {
    pub stages: Vec<PromptStage>,
}

/// Exemplar-side block for one IR, as embedded in chain-of-thought prompts.
pub fn exemplar_ir_block(ir: IrKind, exemplar: &Exemplar) -> String {
    match ir {
        IrKind::Nl => format!(
            "Example natural-language summary:\n{}",
            exemplar.nl_summary
        ),
        IrKind::Ast => format!(
            "Example flattened abstract syntax tree:\n{}",
            exemplar.flattened_ast
        ),
    }
}

/// Instruction line asking the model to reason through one IR.
pub fn reasoning_step(ir: IrKind) -> &'static str {
    match ir {
        IrKind::Nl => {
            "- Write a natural-language summary of what the code reads, computes and prints."
        }
        IrKind::Ast => {
            "- Write the flattened abstract syntax tree of the code, in the same s-expression format as the example."
        }
    }
}

#[derive(Debug, Clone)]
pub struct PromptRenderer {
    templates: TemplateSet,
    bank: ExemplarBank,
}

impl Default for PromptRenderer {
    fn default() -> Self {
        PromptRenderer::new(TemplateSet::bundled(), ExemplarBank::bundled())
    }
}

impl PromptRenderer {
    pub fn new(templates: TemplateSet, bank: ExemplarBank) -> Self {
        PromptRenderer { templates, bank }
    }

    pub fn templates(&self) -> &TemplateSet {
        &self.templates
    }

    pub fn bank(&self) -> &ExemplarBank {
        &self.bank
    }

    pub fn lookup_exemplar(
        &self,
        source: Language,
        target: Language,
    ) -> Result<&Exemplar, PromptError> {
        self.bank.lookup(source, target)
    }

    /// Whether `render` needs a local AST for this strategy.
    pub fn needs_local_ast(strategy: &PromptStrategy) -> bool {
        strategy.kind() == StrategyKind::CoT && strategy.uses(IrKind::Ast)
    }

    pub fn render(
        &self,
        strategy: &PromptStrategy,
        task: &TranslationTask,
        source: &str,
        local_ast: Option<&FlattenedAst>,
    ) -> Result<PromptPlan, PromptError> {
        let name = strategy.canonical_name();
        let mut values: BTreeMap<&str, String> = BTreeMap::new();
        values.insert("source_language", task.source_lang.display_name().into());
        values.insert("target_language", task.target_lang.display_name().into());
        values.insert("source_fence", task.source_lang.fence_label().into());
        values.insert("target_fence", task.target_lang.fence_label().into());
        values.insert("source_code", source.into());

        let mut ast_suffix = String::new();
        match strategy.kind() {
            StrategyKind::ZeroShot | StrategyKind::TwoStep => {}
            StrategyKind::OneShot | StrategyKind::CoT => {
                let ex = self.bank.lookup(task.source_lang, task.target_lang)?;
                values.insert("exemplar_source", ex.source_code.clone());
                values.insert("exemplar_target", ex.target_code.clone());
                if strategy.kind() == StrategyKind::CoT {
                    let blocks: Vec<String> = strategy
                        .ir_sequence()
                        .iter()
                        .map(|&ir| exemplar_ir_block(ir, ex))
                        .collect();
                    values.insert("exemplar_ir", blocks.join("\n\n"));
                    let steps: Vec<&str> = strategy
                        .ir_sequence()
                        .iter()
                        .map(|&ir| reasoning_step(ir))
                        .collect();
                    values.insert("reasoning_steps", steps.join("\n"));
                }
            }
        }
        if Self::needs_local_ast(strategy) {
            let ast = local_ast.ok_or_else(|| PromptError::MissingLocalAst {
                strategy: name.clone(),
            })?;
            values.insert("source_ast", ast.text.clone());
            ast_suffix = format!("+source-ast:{}", ast.parser_id);
        }

        let borrowed: BTreeMap<&str, &str> =
            values.iter().map(|(k, v)| (*k, v.as_str())).collect();
        let mut stages = Vec::with_capacity(strategy.stage_count());
        for stage in 1..=strategy.stage_count() {
            let template_id = self.templates.template_id(strategy, stage);
            let template = self.templates.get(strategy, stage).ok_or_else(|| {
                PromptError::Template {
                    path: format!("{name}/{stage}.txt"),
                    reason: "missing".into(),
                }
            })?;
            let expects = if stage < strategy.stage_count() {
                StageOutput::IrPayload
            } else {
                StageOutput::TargetCode
            };
            for p in placeholders(template) {
                let slot_ok = p == "ir_payload" && stage > 1;
                if !slot_ok && !borrowed.contains_key(p) {
                    return Err(PromptError::UnfilledPlaceholder {
                        template_id,
                        strategy: name.clone(),
                        name: p.to_string(),
                    });
                }
            }
            stages.push(PromptStage {
                template_id: format!("{template_id}{ast_suffix}"),
                rendered_text: fill(template, &borrowed),
                expects,
            });
        }
        Ok(PromptPlan { stages })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir;

    fn task(src: Language, tgt: Language) -> TranslationTask {
        TranslationTask {
            dataset: "d".into(),
            source_lang: src,
            snippet_id: "s1".into(),
            target_lang: tgt,
        }
    }

    const JAVA_SRC: &str = "public class Main {\n    public static void main(String[] a) {\n        System.out.println(\"hi {target_language}\");\n    }\n}\n";

    fn render(name: &str, t: &TranslationTask, src: &str) -> Result<PromptPlan, PromptError> {
        let strategy: PromptStrategy = name.parse().unwrap();
        let ast = ir::extract_ast(src, t.source_lang).unwrap();
        PromptRenderer::default().render(&strategy, t, src, Some(&ast))
    }

    #[test]
    fn zero_shot_has_source_and_target_name_only() {
        let t = task(Language::Java, Language::Python);
        let plan = render("0SP", &t, JAVA_SRC).unwrap();
        assert_eq!(plan.stages.len(), 1);
        let text = &plan.stages[0].rendered_text;
        assert!(text.contains(JAVA_SRC));
        assert!(text.contains("Python"));
        assert!(text.contains("```python"));
        let ex = PromptRenderer::default()
            .lookup_exemplar(Language::Java, Language::Python)
            .unwrap()
            .clone();
        assert!(!text.contains(&ex.target_code));
        assert!(!text.contains(&ex.nl_summary));
    }

    #[test]
    fn cot_nl_ast_orders_nl_before_ast() {
        let t = task(Language::Java, Language::Python);
        let plan = render("CoT-NL-AST", &t, JAVA_SRC).unwrap();
        let text = &plan.stages[0].rendered_text;
        let renderer = PromptRenderer::default();
        let ex = renderer.lookup_exemplar(Language::Java, Language::Python).unwrap();
        let nl = text.find(&ex.nl_summary).unwrap();
        let ast = text.find(&ex.flattened_ast).unwrap();
        assert!(nl < ast);
        let src = text.find(&ex.source_code).unwrap();
        let tgt = text.find(&ex.target_code).unwrap();
        assert!(src < nl && ast < tgt);
        assert!(plan.stages[0].template_id.ends_with("+source-ast:builtin-token-tree"));
    }

    #[test]
    fn two_step_ast_has_payload_slot() {
        let t = task(Language::C, Language::Go);
        let src = "int main(void) { return 0; }\n";
        let plan = render("2S-AST", &t, src).unwrap();
        assert_eq!(plan.stages.len(), 2);
        assert_eq!(plan.stages[0].expects, StageOutput::IrPayload);
        assert_eq!(plan.stages[1].expects, StageOutput::TargetCode);
        assert!(plan.stages[0].rendered_text.contains(src));
        assert!(plan.stages[0].rendered_text.contains("abstract syntax tree"));
        assert!(plan.stages[1].rendered_text.contains(IR_PAYLOAD_SLOT));
        assert!(plan.stages[1].rendered_text.contains("Go"));
        let filled = plan.stages[1].with_ir_payload("  (root)\n");
        assert!(filled.contains("\n(root)\n"));
        assert!(!filled.contains(IR_PAYLOAD_SLOT));
    }

    #[test]
    fn source_placeholders_are_not_expanded() {
        let t = task(Language::Java, Language::C);
        let plan = render("1SP", &t, JAVA_SRC).unwrap();
        assert!(plan.stages[0].rendered_text.contains("hi {target_language}"));
    }

    #[test]
    fn one_shot_and_cot_share_the_exemplar() {
        let t = task(Language::Cpp, Language::Go);
        let src = "int main() { return 0; }";
        let ex = PromptRenderer::default()
            .lookup_exemplar(Language::Cpp, Language::Go)
            .unwrap()
            .clone();
        for name in ["1SP", "CoT-NL", "CoT-AST-NL"] {
            let text = render(name, &t, src).unwrap().stages[0].rendered_text.clone();
            assert!(text.contains(&ex.source_code), "{name}");
            assert!(text.contains(&ex.target_code), "{name}");
        }
    }

    #[test]
    fn missing_requirements_are_errors() {
        let renderer = PromptRenderer::new(TemplateSet::bundled(), ExemplarBank::default());
        let t = task(Language::Cpp, Language::Go);
        let s: PromptStrategy = "1SP".parse().unwrap();
        assert!(matches!(
            renderer.render(&s, &t, "x", None),
            Err(PromptError::MissingExemplar { .. })
        ));
        let s: PromptStrategy = "CoT-AST".parse().unwrap();
        assert!(matches!(
            PromptRenderer::default().render(&s, &t, "x", None),
            Err(PromptError::MissingLocalAst { .. })
        ));
        // zero-shot and two-step never need a local AST
        for name in ["0SP", "2S-AST", "2S-NL-AST"] {
            let s: PromptStrategy = name.parse().unwrap();
            assert!(PromptRenderer::default().render(&s, &t, "x", None).is_ok());
        }
    }

    #[test]
    fn two_step_plans_carry_no_exemplar_content() {
        let renderer = PromptRenderer::default();
        for s in PromptStrategy::all() {
            if s.kind() != StrategyKind::TwoStep {
                continue;
            }
            for ex in renderer.bank().iter() {
                let t = task(ex.source_lang, ex.target_lang);
                let plan = renderer.render(&s, &t, "x = 1", None).unwrap();
                for stage in &plan.stages {
                    assert!(!stage.rendered_text.contains(&ex.target_code));
                    assert!(!stage.rendered_text.contains(&ex.nl_summary));
                }
            }
        }
    }
}
