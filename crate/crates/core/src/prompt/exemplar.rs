//! Worked translation examples shared by one-shot and chain-of-thought
//! prompts. One directory per ordered pair, named `<source>-<target>`,
//! holding `source.<ext>`, `target.<ext>`, `nl.txt` and `ast.txt`.

use super::PromptError;
use crate::lang::Language;
use include_dir::{include_dir, Dir};
use std::collections::BTreeMap;
use std::path::Path;

static BUNDLED: Dir<'_> = include_dir!("$CARGO_MANIFEST_DIR/assets/exemplars");

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Exemplar {
    pub source_lang: Language,
    pub target_lang: Language,
    pub source_code: String,
    pub target_code: String,
    pub nl_summary: String,
    pub flattened_ast: String,
}

#[derive(Debug, Clone, Default)]
pub struct ExemplarBank {
    pairs: BTreeMap<(Language, Language), Exemplar>,
}

impl ExemplarBank {
    pub fn bundled() -> Self {
        let mut bank = ExemplarBank::default();
        for dir in BUNDLED.dirs() {
            let name = dir.path().to_string_lossy().into_owned();
            let (src, tgt) = parse_pair_name(&name).expect("bundled exemplar dir names are pairs");
            let file = |rel: String| -> String {
                BUNDLED
                    .get_file(dir.path().join(&rel))
                    .and_then(|f| f.contents_utf8())
                    .unwrap_or_else(|| panic!("bundled exemplar {name}/{rel} missing"))
                    .to_string()
            };
            let ex = Exemplar {
                source_lang: src,
                target_lang: tgt,
                source_code: file(format!("source.{}", src.extension())),
                target_code: file(format!("target.{}", tgt.extension())),
                nl_summary: file("nl.txt".into()),
                flattened_ast: file("ast.txt".into()),
            };
            bank.insert(ex).expect("bundled exemplars are valid");
        }
        bank
    }

    pub fn load_dir(root: &Path) -> Result<Self, PromptError> {
        let bad = |path: &Path, reason: String| PromptError::Exemplar {
            path: path.display().to_string(),
            reason,
        };
        let mut bank = ExemplarBank::default();
        let entries = std::fs::read_dir(root).map_err(|e| bad(root, e.to_string()))?;
        let mut dirs = Vec::new();
        for entry in entries {
            let entry = entry.map_err(|e| bad(root, e.to_string()))?;
            if entry.path().is_dir() {
                dirs.push(entry.path());
            }
        }
        dirs.sort();
        for dir in dirs {
            let name = dir.file_name().unwrap().to_string_lossy().into_owned();
            let Some((src, tgt)) = parse_pair_name(&name) else {
                return Err(bad(&dir, "directory name is not <source>-<target>".into()));
            };
            let read = |rel: String| {
                let p = dir.join(rel);
                std::fs::read_to_string(&p).map_err(|e| bad(&p, e.to_string()))
            };
            let ex = Exemplar {
                source_lang: src,
                target_lang: tgt,
                source_code: read(format!("source.{}", src.extension()))?,
                target_code: read(format!("target.{}", tgt.extension()))?,
                nl_summary: read("nl.txt".into())?,
                flattened_ast: read("ast.txt".into())?,
            };
            bank.insert(ex).map_err(|reason| bad(&dir, reason))?;
        }
        Ok(bank)
    }

    fn insert(&mut self, mut ex: Exemplar) -> Result<(), String> {
        if ex.source_lang == ex.target_lang {
            return Err("self-pair exemplar".into());
        }
        for field in [
            &mut ex.source_code,
            &mut ex.target_code,
            &mut ex.nl_summary,
            &mut ex.flattened_ast,
        ] {
            let trimmed = field.trim_end().to_string();
            if trimmed.trim().is_empty() {
                return Err("empty exemplar field".into());
            }
            *field = trimmed;
        }
        if ex.flattened_ast.contains('\n') {
            return Err("ast.txt must be a single line".into());
        }
        let key = (ex.source_lang, ex.target_lang);
        if self.pairs.insert(key, ex).is_some() {
            return Err("duplicate exemplar pair".into());
        }
        Ok(())
    }

    pub fn lookup(&self, source: Language, target: Language) -> Result<&Exemplar, PromptError> {
        self.pairs
            .get(&(source, target))
            .ok_or(PromptError::MissingExemplar { from: source, to: target })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Exemplar> {
        self.pairs.values()
    }
}

fn parse_pair_name(name: &str) -> Option<(Language, Language)> {
    let (a, b) = name.split_once('-')?;
    Some((a.parse().ok()?, b.parse().ok()?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir;

    #[test]
    fn bundled_bank_covers_all_twenty_pairs() {
        let bank = ExemplarBank::bundled();
        assert_eq!(bank.len(), 20);
        for s in Language::ALL {
            for t in Language::ALL {
                if s != t {
                    let ex = bank.lookup(s, t).unwrap();
                    assert_eq!((ex.source_lang, ex.target_lang), (s, t));
                }
            }
        }
    }

    #[test]
    fn self_pair_is_never_stored() {
        let bank = ExemplarBank::bundled();
        assert!(matches!(
            bank.lookup(Language::Go, Language::Go),
            Err(PromptError::MissingExemplar { .. })
        ));
    }

    #[test]
    fn bundled_asts_match_builtin_parser() {
        for ex in ExemplarBank::bundled().iter() {
            let ast = ir::extract_ast(&ex.source_code, ex.source_lang).unwrap();
            assert_eq!(
                ast.text, ex.flattened_ast,
                "{}-{}",
                ex.source_lang, ex.target_lang
            );
        }
    }

    #[test]
    fn load_dir_matches_bundled() {
        let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("assets/exemplars");
        let disk = ExemplarBank::load_dir(&root).unwrap();
        assert_eq!(disk.pairs, ExemplarBank::bundled().pairs);
    }
}
