//! Success-rate tables, deltas against a baseline strategy, and rendering.

use crate::judge::VerdictKind;
use crate::lang::Language;
use crate::orchestrator::ExperimentRecord;
use crate::prompt::PromptStrategy;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupField {
    ModelId,
    Strategy,
    Dataset,
    SourceLang,
    TargetLang,
}

impl GroupField {
    pub const ALL: [GroupField; 5] = [
        GroupField::ModelId,
        GroupField::Strategy,
        GroupField::Dataset,
        GroupField::SourceLang,
        GroupField::TargetLang,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GroupField::ModelId => "model_id",
            GroupField::Strategy => "strategy",
            GroupField::Dataset => "dataset",
            GroupField::SourceLang => "source_lang",
            GroupField::TargetLang => "target_lang",
        }
    }

    fn header(self) -> &'static str {
        match self {
            GroupField::ModelId => "Model",
            GroupField::Strategy => "Prompt",
            GroupField::Dataset => "Dataset",
            GroupField::SourceLang => "Source",
            GroupField::TargetLang => "Target",
        }
    }

    fn extract(self, r: &ExperimentRecord) -> KeyPart {
        match self {
            GroupField::ModelId => KeyPart::Text(r.model_id.clone()),
            GroupField::Strategy => KeyPart::Strategy(r.strategy.clone()),
            GroupField::Dataset => KeyPart::Text(r.task.dataset.clone()),
            GroupField::SourceLang => KeyPart::Lang(r.task.source_lang),
            GroupField::TargetLang => KeyPart::Lang(r.task.target_lang),
        }
    }
}

impl FromStr for GroupField {
    type Err = ReportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let alias = match s {
            "model" => "model_id",
            "prompt" => "strategy",
            "source" => "source_lang",
            "target" => "target_lang",
            other => other,
        };
        GroupField::ALL
            .into_iter()
            .find(|f| f.name() == alias)
            .ok_or_else(|| ReportError::UnknownField(s.to_string()))
    }
}

/// Parses a comma-separated grouping spec such as `model,strategy,dataset`.
pub fn parse_group_spec(spec: &str) -> Result<Vec<GroupField>, ReportError> {
    let mut fields: Vec<GroupField> = Vec::new();
    for part in spec.split(',').filter(|p| !p.trim().is_empty()) {
        let f: GroupField = part.parse()?;
        if fields.contains(&f) {
            return Err(ReportError::DuplicateField(f.name().to_string()));
        }
        fields.push(f);
    }
    Ok(fields)
}

/// One component of a row key. Strategies sort in table order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum KeyPart {
    Text(String),
    Lang(Language),
    Strategy(PromptStrategy),
}

impl fmt::Display for KeyPart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KeyPart::Text(s) => f.write_str(s),
            KeyPart::Lang(l) => f.write_str(l.id()),
            KeyPart::Strategy(s) => f.write_str(&s.canonical_name()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    #[default]
    Micro,
    MacroOverPairs,
}

impl FromStr for Aggregation {
    type Err = ReportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "micro" => Ok(Aggregation::Micro),
            "macro" | "macro-over-pairs" => Ok(Aggregation::MacroOverPairs),
            other => Err(ReportError::UnknownAggregation(other.to_string())),
        }
    }
}

impl fmt::Display for Aggregation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Aggregation::Micro => "micro",
            Aggregation::MacroOverPairs => "macro-over-pairs",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Markdown,
}

impl FromStr for Format {
    type Err = ReportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            "markdown" | "md" => Ok(Format::Markdown),
            other => Err(ReportError::UnknownFormat(other.to_string())),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("no records to aggregate")]
    Empty,
    #[error("unknown grouping field `{0}` (model_id, strategy, dataset, source_lang, target_lang)")]
    UnknownField(String),
    #[error("grouping field `{0}` given twice")]
    DuplicateField(String),
    #[error("unknown aggregation `{0}` (micro, macro)")]
    UnknownAggregation(String),
    #[error("unknown format `{0}` (csv, json, markdown)")]
    UnknownFormat(String),
    #[error("deltas need `strategy` in the grouping")]
    NoStrategyColumn,
    #[error("no {baseline} baseline row for group {group}")]
    MissingBaseline { baseline: String, group: String },
    #[error("I/O error at {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub key: Vec<KeyPart>,
    /// Judged records counted in the rate.
    pub total: u64,
    pub successes: u64,
    /// Exact percentage in [0, 100]; `None` when nothing was judged.
    pub success_pct: Option<BigRational>,
    pub incomplete: u64,
    pub tool_missing: u64,
    /// Exact percentage-point difference to the baseline row.
    pub delta_pp: Option<BigRational>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricTable {
    pub group_by: Vec<GroupField>,
    pub aggregation: Aggregation,
    pub baseline: Option<PromptStrategy>,
    pub rows: Vec<MetricRow>,
}

fn ratio(num: u64, den: u64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

fn hundred() -> BigRational {
    BigRational::from_integer(BigInt::from(100))
}

#[derive(Default)]
struct Tally {
    total: u64,
    successes: u64,
    incomplete: u64,
    tool_missing: u64,
    pairs: BTreeMap<(Language, Language), (u64, u64)>,
}

/// Aggregates records into one row per distinct key. Incomplete records and
/// ToolMissing verdicts are counted separately and left out of the rate.
pub fn success_rate(
    records: &[ExperimentRecord],
    group_by: &[GroupField],
    aggregation: Aggregation,
) -> Result<MetricTable, ReportError> {
    if records.is_empty() {
        return Err(ReportError::Empty);
    }
    let mut groups: BTreeMap<Vec<KeyPart>, Tally> = BTreeMap::new();
    for r in records {
        let key = group_by.iter().map(|f| f.extract(r)).collect();
        let t = groups.entry(key).or_default();
        let kind = r.verdict.as_ref().map(|v| v.kind);
        match (r.is_complete(), kind) {
            (false, _) | (true, None) => t.incomplete += 1,
            (true, Some(VerdictKind::ToolMissing)) => t.tool_missing += 1,
            (true, Some(k)) => {
                let ok = u64::from(k == VerdictKind::Success);
                t.total += 1;
                t.successes += ok;
                let p = t
                    .pairs
                    .entry((r.task.source_lang, r.task.target_lang))
                    .or_default();
                p.0 += ok;
                p.1 += 1;
            }
        }
    }
    let rows = groups
        .into_iter()
        .map(|(key, t)| {
            let rate = match aggregation {
                _ if t.total == 0 => None,
                Aggregation::Micro => Some(ratio(t.successes, t.total)),
                Aggregation::MacroOverPairs => {
                    let sum = t
                        .pairs
                        .values()
                        .fold(BigRational::zero(), |acc, &(s, n)| acc + ratio(s, n));
                    Some(sum / BigRational::from_integer(BigInt::from(t.pairs.len())))
                }
            };
            MetricRow {
                key,
                total: t.total,
                successes: t.successes,
                success_pct: rate.map(|r| r * hundred()),
                incomplete: t.incomplete,
                tool_missing: t.tool_missing,
                delta_pp: None,
            }
        })
        .collect();
    Ok(MetricTable {
        group_by: group_by.to_vec(),
        aggregation,
        baseline: None,
        rows,
    })
}

/// Fills `delta_pp` of every row with its rate minus the rate of the
/// `baseline` row sharing all other key parts.
pub fn delta_vs_baseline(
    mut table: MetricTable,
    baseline: &PromptStrategy,
) -> Result<MetricTable, ReportError> {
    let col = table
        .group_by
        .iter()
        .position(|f| *f == GroupField::Strategy)
        .ok_or(ReportError::NoStrategyColumn)?;
    let residual = |key: &[KeyPart]| -> Vec<KeyPart> {
        key.iter()
            .enumerate()
            .filter(|(i, _)| *i != col)
            .map(|(_, k)| k.clone())
            .collect()
    };
    let base: BTreeMap<Vec<KeyPart>, Option<BigRational>> = table
        .rows
        .iter()
        .filter(|r| r.key[col] == KeyPart::Strategy(baseline.clone()))
        .map(|r| (residual(&r.key), r.success_pct.clone()))
        .collect();
    for row in &mut table.rows {
        let group = residual(&row.key);
        let Some(Some(base_pct)) = base.get(&group) else {
            let shown: Vec<String> = group.iter().map(ToString::to_string).collect();
            return Err(ReportError::MissingBaseline {
                baseline: baseline.canonical_name(),
                group: if shown.is_empty() {
                    "(all)".into()
                } else {
                    shown.join("/")
                },
            });
        };
        row.delta_pp = row.success_pct.as_ref().map(|p| p - base_pct);
    }
    table.baseline = Some(baseline.clone());
    Ok(table)
}

/// Rounds to one decimal, halves away from zero.
pub fn format_one_decimal(value: &BigRational) -> String {
    let tenths = value.abs() * BigRational::from_integer(BigInt::from(10));
    let half = BigRational::new(BigInt::from(1), BigInt::from(2));
    let rounded = (tenths + half).floor().to_integer();
    let whole = &rounded / BigInt::from(10);
    let frac = &rounded % BigInt::from(10);
    let sign = if value.is_negative() && !rounded.is_zero() {
        "-"
    } else {
        ""
    };
    format!("{sign}{whole}.{frac}")
}

pub fn format_pct(value: Option<&BigRational>) -> String {
    value.map_or_else(|| "n/a".into(), format_one_decimal)
}

pub fn format_delta(value: Option<&BigRational>) -> String {
    match value {
        None => "n/a".into(),
        Some(v) => {
            let s = format_one_decimal(v);
            if s.starts_with('-') {
                s
            } else {
                format!("+{s}")
            }
        }
    }
}

#[derive(Serialize)]
struct JsonRow {
    key: BTreeMap<&'static str, String>,
    total: u64,
    successes: u64,
    success_pct: String,
    success_pct_exact: Option<String>,
    incomplete: u64,
    tool_missing: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    delta_pp: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    delta_pp_exact: Option<String>,
}

#[derive(Serialize)]
struct JsonTable {
    aggregation: String,
    group_by: Vec<&'static str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    baseline: Option<String>,
    rows: Vec<JsonRow>,
}

/// Renders a table. Output is deterministic for a given table.
pub fn emit(table: &MetricTable, format: Format) -> String {
    match format {
        Format::Csv => emit_csv(table),
        Format::Json => emit_json(table),
        Format::Markdown => emit_markdown(table),
    }
}

pub fn emit_to_file(
    table: &MetricTable,
    format: Format,
    path: &std::path::Path,
) -> Result<(), ReportError> {
    std::fs::write(path, emit(table, format)).map_err(|source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn emit_csv(table: &MetricTable) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let mut header: Vec<String> = table.group_by.iter().map(|f| f.name().to_string()).collect();
    header.extend(
        ["aggregation", "total", "successes", "success_pct", "incomplete", "tool_missing"]
            .map(String::from),
    );
    if table.baseline.is_some() {
        header.push("delta_pp".into());
    }
    w.write_record(&header).expect("in-memory write");
    for row in &table.rows {
        let mut rec: Vec<String> = row.key.iter().map(ToString::to_string).collect();
        rec.push(table.aggregation.to_string());
        rec.push(row.total.to_string());
        rec.push(row.successes.to_string());
        rec.push(format_pct(row.success_pct.as_ref()));
        rec.push(row.incomplete.to_string());
        rec.push(row.tool_missing.to_string());
        if table.baseline.is_some() {
            rec.push(format_delta(row.delta_pp.as_ref()));
        }
        w.write_record(&rec).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

fn emit_json(table: &MetricTable) -> String {
    let doc = JsonTable {
        aggregation: table.aggregation.to_string(),
        group_by: table.group_by.iter().map(|f| f.name()).collect(),
        baseline: table.baseline.as_ref().map(PromptStrategy::canonical_name),
        rows: table
            .rows
            .iter()
            .map(|row| JsonRow {
                key: table
                    .group_by
                    .iter()
                    .zip(&row.key)
                    .map(|(f, k)| (f.name(), k.to_string()))
                    .collect(),
                total: row.total,
                successes: row.successes,
                success_pct: format_pct(row.success_pct.as_ref()),
                success_pct_exact: row.success_pct.as_ref().map(ToString::to_string),
                incomplete: row.incomplete,
                tool_missing: row.tool_missing,
                delta_pp: table
                    .baseline
                    .as_ref()
                    .map(|_| format_delta(row.delta_pp.as_ref())),
                delta_pp_exact: row.delta_pp.as_ref().map(ToString::to_string),
            })
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("table serializes");
    s.push('\n');
    s
}

/// One table per model when the grouping includes the model, with the
/// remaining key columns, then counts and the success percentage.
fn emit_markdown(table: &MetricTable) -> String {
    let model_col = table.group_by.iter().position(|f| *f == GroupField::ModelId);
    let mut sections: BTreeMap<Option<String>, Vec<&MetricRow>> = BTreeMap::new();
    for row in &table.rows {
        let model = model_col.map(|c| row.key[c].to_string());
        sections.entry(model).or_default().push(row);
    }
    let mut out = String::new();
    for (model, rows) in sections {
        if !out.is_empty() {
            out.push('\n');
        }
        if let Some(m) = &model {
            out.push_str(&format!("### {m}\n\n"));
        }
        let mut head: Vec<&str> = vec![];
        if model.is_some() {
            head.push("Model");
        }
        head.extend(
            table
                .group_by
                .iter()
                .filter(|f| **f != GroupField::ModelId)
                .map(|f| f.header()),
        );
        head.extend(["Judged", "Success", "Success %"]);
        if let Some(b) = &table.baseline {
            out.push_str(&format!(
                "Aggregation: {}; delta in points vs {}\n\n",
                table.aggregation,
                b.canonical_name()
            ));
            head.push("Delta");
        } else {
            out.push_str(&format!("Aggregation: {}\n\n", table.aggregation));
        }
        out.push_str(&format!("| {} |\n", head.join(" | ")));
        let numeric = 3 + usize::from(table.baseline.is_some());
        let align: Vec<&str> = (0..head.len())
            .map(|i| if i + numeric >= head.len() { "---:" } else { "---" })
            .collect();
        out.push_str(&format!("| {} |\n", align.join(" | ")));
        for row in rows {
            let mut cells: Vec<String> = Vec::new();
            if let Some(m) = &model {
                cells.push(m.clone());
            }
            for (i, k) in row.key.iter().enumerate() {
                if Some(i) != model_col {
                    cells.push(k.to_string());
                }
            }
            cells.push(row.total.to_string());
            cells.push(row.successes.to_string());
            cells.push(format_pct(row.success_pct.as_ref()));
            if table.baseline.is_some() {
                cells.push(format_delta(row.delta_pp.as_ref()));
            }
            out.push_str(&format!("| {} |\n", cells.join(" | ")));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::TranslationTask;
    use crate::orchestrator::{RecordStatus, VerdictRecord, RECORD_VERSION};

    fn rec(src: Language, tgt: Language, id: usize, kind: Option<VerdictKind>) -> ExperimentRecord {
        ExperimentRecord {
            v: RECORD_VERSION,
            run_id: "r".into(),
            task: TranslationTask {
                dataset: "d".into(),
                source_lang: src,
                snippet_id: format!("s{id}"),
                target_lang: tgt,
            },
            strategy: "0SP".parse().unwrap(),
            model_id: "m".into(),
            stages: vec![],
            candidate: None,
            verdict: kind.map(|kind| VerdictRecord {
                kind,
                detail_digest: String::new(),
                failing_test: None,
            }),
            status: if kind.is_some() {
                RecordStatus::Complete
            } else {
                RecordStatus::Incomplete
            },
            error: None,
            judge_wall_ms: 0,
            created_at: String::new(),
        }
    }

    use Language::{Java, Python, C};
    use VerdictKind::{Success, WrongOutput};

    fn pct(t: &MetricTable) -> String {
        format_pct(t.rows[0].success_pct.as_ref())
    }

    #[test]
    fn micro_and_macro_examples() {
        let balanced = vec![
            rec(C, Python, 0, Some(Success)),
            rec(C, Python, 1, Some(WrongOutput)),
            rec(Python, C, 0, Some(WrongOutput)),
            rec(Python, C, 1, Some(WrongOutput)),
        ];
        for agg in [Aggregation::Micro, Aggregation::MacroOverPairs] {
            assert_eq!(pct(&success_rate(&balanced, &[], agg).unwrap()), "25.0");
        }
        let skewed = vec![
            rec(C, Python, 0, Some(Success)),
            rec(Python, C, 0, Some(WrongOutput)),
            rec(Python, C, 1, Some(WrongOutput)),
            rec(Python, C, 2, Some(WrongOutput)),
        ];
        assert_eq!(pct(&success_rate(&skewed, &[], Aggregation::Micro).unwrap()), "25.0");
        assert_eq!(
            pct(&success_rate(&skewed, &[], Aggregation::MacroOverPairs).unwrap()),
            "50.0"
        );
    }

    #[test]
    fn incomplete_and_tool_missing_are_separate() {
        let recs = vec![
            rec(C, Java, 0, Some(Success)),
            rec(C, Java, 1, Some(VerdictKind::ToolMissing)),
            rec(C, Java, 2, None),
        ];
        let t = success_rate(&recs, &[], Aggregation::Micro).unwrap();
        assert_eq!((t.rows[0].total, t.rows[0].tool_missing, t.rows[0].incomplete), (1, 1, 1));
        assert_eq!(pct(&t), "100.0");
    }

    #[test]
    fn empty_is_an_error() {
        assert!(matches!(
            success_rate(&[], &[], Aggregation::Micro),
            Err(ReportError::Empty)
        ));
    }

    #[test]
    fn rounding_is_half_up() {
        let r = |n: i64, d: i64| BigRational::new(BigInt::from(n), BigInt::from(d));
        assert_eq!(format_one_decimal(&r(485 * 100, 1996)), "24.3");
        assert_eq!(format_one_decimal(&r(351 * 100, 1996)), "17.6");
        assert_eq!(format_one_decimal(&r(1, 20)), "0.1");
        assert_eq!(format_one_decimal(&r(-1, 20)), "-0.1");
        assert_eq!(format_one_decimal(&r(-1, 100)), "0.0");
        assert_eq!(format_delta(Some(&r(0, 1))), "+0.0");
    }

    #[test]
    fn delta_requires_baseline_rows() {
        let mut recs = vec![rec(C, Python, 0, Some(Success))];
        let mut other = rec(C, Python, 1, Some(WrongOutput));
        other.strategy = "CoT-NL".parse().unwrap();
        recs.push(other);
        let fields = [GroupField::Strategy];
        let t = success_rate(&recs, &fields, Aggregation::Micro).unwrap();
        let base: PromptStrategy = "0SP".parse().unwrap();
        let d = delta_vs_baseline(t.clone(), &base).unwrap();
        assert_eq!(format_delta(d.rows[0].delta_pp.as_ref()), "+0.0");
        assert_eq!(format_delta(d.rows[1].delta_pp.as_ref()), "-100.0");
        let missing: PromptStrategy = "1SP".parse().unwrap();
        assert!(matches!(
            delta_vs_baseline(t, &missing),
            Err(ReportError::MissingBaseline { .. })
        ));
    }

    #[test]
    fn csv_single_row_is_two_lines() {
        let t = success_rate(&[rec(C, Python, 0, Some(Success))], &[GroupField::Strategy], Aggregation::Micro)
            .unwrap();
        let csv = emit(&t, Format::Csv);
        assert_eq!(csv.lines().count(), 2);
        assert!(csv.ends_with('\n') && !csv.contains('\r'));
        assert_eq!(csv, emit(&t, Format::Csv));
    }

    #[test]
    fn group_spec_parsing() {
        assert_eq!(
            parse_group_spec("model,prompt,dataset").unwrap(),
            vec![GroupField::ModelId, GroupField::Strategy, GroupField::Dataset]
        );
        assert!(parse_group_spec("model,model").is_err());
        assert!(parse_group_spec("color").is_err());
    }
}
