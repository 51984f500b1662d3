use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StrategyKind {
    ZeroShot,
    OneShot,
    TwoStep,
    CoT,
}

/// An intermediate representation a strategy routes through.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum IrKind {
    Nl,
    Ast,
}

impl IrKind {
    pub fn label(self) -> &'static str {
        match self {
            IrKind::Nl => "NL",
            IrKind::Ast => "AST",
        }
    }
}

/// A prompting strategy. Only the ten values in [`PromptStrategy::ALL`]
/// can be constructed through [`PromptStrategy::new`] or parsing.
/// Ordering follows [`PromptStrategy::ALL_NAMES`].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PromptStrategy {
    kind: StrategyKind,
    ir_sequence: Vec<IrKind>,
}

impl Ord for PromptStrategy {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.table_index().cmp(&other.table_index())
    }
}

impl PartialOrd for PromptStrategy {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StrategyError {
    #[error("unknown strategy `{name}`; valid names: {}", valid_names().join(", "))]
    UnknownName { name: String },
    #[error("invalid IR sequence {sequence:?} for {kind:?}")]
    InvalidSequence {
        kind: StrategyKind,
        sequence: Vec<IrKind>,
    },
}

fn valid_names() -> Vec<String> {
    PromptStrategy::all()
        .iter()
        .map(PromptStrategy::canonical_name)
        .collect()
}

impl PromptStrategy {
    pub const ALL_NAMES: [&'static str; 10] = [
        "0SP",
        "1SP",
        "2S-NL",
        "2S-AST",
        "2S-NL-AST",
        "2S-AST-NL",
        "CoT-NL",
        "CoT-AST",
        "CoT-NL-AST",
        "CoT-AST-NL",
    ];

    pub fn new(kind: StrategyKind, ir_sequence: Vec<IrKind>) -> Result<Self, StrategyError> {
        let ok = match kind {
            StrategyKind::ZeroShot | StrategyKind::OneShot => ir_sequence.is_empty(),
            StrategyKind::TwoStep | StrategyKind::CoT => match ir_sequence.as_slice() {
                [_] => true,
                [a, b] => a != b,
                _ => false,
            },
        };
        if !ok {
            return Err(StrategyError::InvalidSequence {
                kind,
                sequence: ir_sequence,
            });
        }
        Ok(PromptStrategy { kind, ir_sequence })
    }

    /// All ten strategies, in table order.
    pub fn all() -> Vec<PromptStrategy> {
        Self::ALL_NAMES
            .iter()
            .map(|n| n.parse().expect("canonical names parse"))
            .collect()
    }

    pub fn kind(&self) -> StrategyKind {
        self.kind
    }

    pub fn ir_sequence(&self) -> &[IrKind] {
        &self.ir_sequence
    }

    pub fn uses(&self, ir: IrKind) -> bool {
        self.ir_sequence.contains(&ir)
    }

    /// Number of model calls one task costs under this strategy.
    pub fn stage_count(&self) -> usize {
        match self.kind {
            StrategyKind::TwoStep => 2,
            _ => 1,
        }
    }

    pub fn canonical_name(&self) -> String {
        let prefix = match self.kind {
            StrategyKind::ZeroShot => return "0SP".into(),
            StrategyKind::OneShot => return "1SP".into(),
            StrategyKind::TwoStep => "2S",
            StrategyKind::CoT => "CoT",
        };
        let mut name = prefix.to_string();
        for ir in &self.ir_sequence {
            name.push('-');
            name.push_str(ir.label());
        }
        name
    }

    /// Position in [`PromptStrategy::ALL_NAMES`].
    pub fn table_index(&self) -> usize {
        let name = self.canonical_name();
        Self::ALL_NAMES
            .iter()
            .position(|n| *n == name)
            .expect("constructed strategies are in ALL_NAMES")
    }
}

impl FromStr for PromptStrategy {
    type Err = StrategyError;

    fn from_str(name: &str) -> Result<Self, Self::Err> {
        let unknown = || StrategyError::UnknownName {
            name: name.to_string(),
        };
        let mut parts = name.split('-');
        let kind = match parts.next() {
            Some("0SP") => StrategyKind::ZeroShot,
            Some("1SP") => StrategyKind::OneShot,
            Some("2S") => StrategyKind::TwoStep,
            Some("CoT") => StrategyKind::CoT,
            _ => return Err(unknown()),
        };
        let sequence = parts
            .map(|p| match p {
                "NL" => Ok(IrKind::Nl),
                "AST" => Ok(IrKind::Ast),
                _ => Err(unknown()),
            })
            .collect::<Result<Vec<_>, _>>()?;
        PromptStrategy::new(kind, sequence).map_err(|_| unknown())
    }
}

impl fmt::Display for PromptStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical_name())
    }
}

impl Serialize for PromptStrategy {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.canonical_name())
    }
}

impl<'de> Deserialize<'de> for PromptStrategy {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let name = String::deserialize(d)?;
        name.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_table_labels() {
        let s: PromptStrategy = "CoT-NL-AST".parse().unwrap();
        assert_eq!(s.kind(), StrategyKind::CoT);
        assert_eq!(s.ir_sequence(), &[IrKind::Nl, IrKind::Ast]);
        let s: PromptStrategy = "0SP".parse().unwrap();
        assert_eq!(s.kind(), StrategyKind::ZeroShot);
        assert!(s.ir_sequence().is_empty());
    }

    #[test]
    fn rejects_unknown_names() {
        for bad in ["2S-FOO", "cot-nl", "2S", "CoT-NL-NL", "0SP-NL", "", "CoT-NL-AST-NL"] {
            let err = bad.parse::<PromptStrategy>().unwrap_err();
            assert!(err.to_string().contains("CoT-AST-NL"), "{err}");
        }
    }

    #[test]
    fn exactly_ten_strategies_round_trip() {
        let all = PromptStrategy::all();
        assert_eq!(all.len(), 10);
        for s in &all {
            assert_eq!(&s.canonical_name().parse::<PromptStrategy>().unwrap(), s);
        }
        let two_step = all.iter().filter(|s| s.stage_count() == 2).count();
        assert_eq!(two_step, 4);
    }

    #[test]
    fn constructor_enforces_sequence_shape() {
        assert!(PromptStrategy::new(StrategyKind::ZeroShot, vec![IrKind::Nl]).is_err());
        assert!(PromptStrategy::new(StrategyKind::CoT, vec![]).is_err());
        assert!(PromptStrategy::new(StrategyKind::TwoStep, vec![IrKind::Ast, IrKind::Ast]).is_err());
        assert!(PromptStrategy::new(StrategyKind::TwoStep, vec![IrKind::Ast, IrKind::Nl]).is_ok());
    }

    #[test]
    fn serde_uses_canonical_name() {
        let s: PromptStrategy = "2S-AST-NL".parse().unwrap();
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(json, "\"2S-AST-NL\"");
        assert_eq!(serde_json::from_str::<PromptStrategy>(&json).unwrap(), s);
        assert!(serde_json::from_str::<PromptStrategy>("\"3SP\"").is_err());
    }
}
