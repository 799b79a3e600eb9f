//! Connective-level study of model outputs: exact-match distribution,
//! detection of newly fused connecting strings, and a four-way error
//! taxonomy with pattern mining over incorrectly mixed connectives.
//!
//! Classification is total and priority-ordered: an output equal to one of
//! the seven references is an exact match; an output that keeps both
//! opinions verbatim and joins them with a known fused connective (a
//! template head combined with another template's tail clause, or a head
//! plus comma) is a new fusion; everything else is an error, subtyped by
//! the most objectively checkable condition first.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::corpus::{
    join_tokens, tokenize, PredictionRecord, SnippetInstance, TemplateId, Token,
};
use crate::metrics::{isolate_connective, resolve, EvalError};
use crate::template;

/// Placeholder substituted for the negative opinion's first word when
/// abstracting incorrect-mixing patterns.
pub const NEGATIVE_FIRST_WORD_PLACEHOLDER: &str = "[first word from the negative opinion]";

/// Error subtypes, in classification priority order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorSubtype {
    InputModification,
    MissingAlthough,
    OnInsertion,
    IncorrectMixing,
}

impl ErrorSubtype {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorSubtype::InputModification => "input_modification",
            ErrorSubtype::MissingAlthough => "missing_although",
            ErrorSubtype::OnInsertion => "on_insertion",
            ErrorSubtype::IncorrectMixing => "incorrect_mixing",
        }
    }
}

/// Verdict for one prediction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConnectiveClass {
    /// Token-for-token equal to this template's reference.
    ExactTemplate(TemplateId),
    /// Opinions intact, joined by this fused connecting string.
    NewFusion(String),
    Error(ErrorSubtype),
}

impl ConnectiveClass {
    pub fn kind(&self) -> &'static str {
        match self {
            ConnectiveClass::ExactTemplate(_) => "exact_template",
            ConnectiveClass::NewFusion(_) => "new_fusion",
            ConnectiveClass::Error(_) => "error",
        }
    }
}

fn heads() -> Vec<Vec<Token>> {
    ["but", "however", "yet", "on the other hand"]
        .iter()
        .map(|s| tokenize(s))
        .collect()
}

fn tails() -> Vec<Vec<Token>> {
    [
        "",
        ",",
        ", some users have also mentioned that",
        ", there are people who have complained that",
        ", a few users have complained that",
    ]
    .iter()
    .map(|s| tokenize(s))
    .collect()
}

/// Candidate fused connecting strings: every template head crossed with
/// every template tail clause (including the bare head and head-plus-comma
/// forms), minus the connectives that already belong to the inventory.
pub fn fusion_inventory() -> Vec<Vec<Token>> {
    let template_connectives: Vec<Vec<Token>> = template::inventory()
        .iter()
        .filter(|t| t.prefix().is_empty())
        .map(|t| t.connective_tokens())
        .collect();
    let mut forms = Vec::new();
    for head in heads() {
        for tail in tails() {
            let mut form = head.clone();
            form.extend_from_slice(&tail);
            if !template_connectives.contains(&form) && !forms.contains(&form) {
                forms.push(form);
            }
        }
    }
    forms
}

/// Classifier with an extensible new-fusion inventory.
#[derive(Debug, Clone)]
pub struct ConnectiveClassifier {
    fusion_forms: Vec<Vec<Token>>,
}

impl Default for ConnectiveClassifier {
    fn default() -> Self {
        ConnectiveClassifier {
            fusion_forms: fusion_inventory(),
        }
    }
}

impl ConnectiveClassifier {
    pub fn new() -> Self {
        Self::default()
    }

    /// Extends the built-in fusion inventory with additional forms.
    pub fn with_extra_fusions(extra: impl IntoIterator<Item = Vec<Token>>) -> Self {
        let mut classifier = Self::default();
        for form in extra {
            if !classifier.fusion_forms.contains(&form) {
                classifier.fusion_forms.push(form);
            }
        }
        classifier
    }

    pub fn fusion_forms(&self) -> &[Vec<Token>] {
        &self.fusion_forms
    }

    /// Total classification of one prediction against its instance.
    pub fn classify(
        &self,
        prediction: &PredictionRecord,
        instance: &SnippetInstance,
    ) -> ConnectiveClass {
        let output = prediction.output_tokens();

        for reference in instance.references() {
            if output == reference.tokens.as_slice() {
                return ConnectiveClass::ExactTemplate(reference.template_id);
            }
        }

        let pos = instance.pair().positive().tokens();
        let neg = instance.pair().negative().tokens();
        for form in &self.fusion_forms {
            if is_infix_assembly(output, pos, form, neg) {
                return ConnectiveClass::NewFusion(join_tokens(form));
            }
        }

        if find_contiguous(output, pos, 0)
            .and_then(|at| find_contiguous(output, neg, at + pos.len()))
            .is_none()
        {
            return ConnectiveClass::Error(ErrorSubtype::InputModification);
        }

        if instance.chosen_template().get() == 4
            && !pos.is_empty()
            && output.len() >= 2
            && output[0] == pos[0]
            && output[1] == pos[0]
        {
            return ConnectiveClass::Error(ErrorSubtype::MissingAlthough);
        }

        let isolated = isolate_connective(output, instance.input_tokens());
        let bare_on = isolated.len() == 1 && isolated[0] == "on";
        let on_comma = isolated.len() == 2 && isolated[0] == "on" && isolated[1] == ",";
        if bare_on || on_comma {
            return ConnectiveClass::Error(ErrorSubtype::OnInsertion);
        }

        ConnectiveClass::Error(ErrorSubtype::IncorrectMixing)
    }
}

/// Classifies with the default fusion inventory.
pub fn classify(prediction: &PredictionRecord, instance: &SnippetInstance) -> ConnectiveClass {
    ConnectiveClassifier::new().classify(prediction, instance)
}

fn is_infix_assembly(output: &[Token], pos: &[Token], connective: &[Token], neg: &[Token]) -> bool {
    let expected_len = pos.len() + 1 + connective.len() + neg.len() + 1;
    if output.len() != expected_len {
        return false;
    }
    let full_stop = Token::full_stop();
    let dot = std::slice::from_ref(&full_stop);
    let mut at = 0;
    for part in [pos, dot, connective, neg, dot] {
        if &output[at..at + part.len()] != part {
            return false;
        }
        at += part.len();
    }
    true
}

fn find_contiguous(haystack: &[Token], needle: &[Token], from: usize) -> Option<usize> {
    if needle.is_empty() {
        return Some(from.min(haystack.len()));
    }
    if haystack.len() < needle.len() || from > haystack.len() - needle.len() {
        return None;
    }
    (from..=haystack.len() - needle.len()).find(|&i| &haystack[i..i + needle.len()] == needle)
}

/// The connective region of an output whose opinions are intact: the tokens
/// between the positive and negative opinion occurrences, without the
/// joining full stop. Falls back to multiset isolation when the opinions
/// cannot be located.
fn mixing_connective(output: &[Token], instance: &SnippetInstance) -> Vec<Token> {
    let pos = instance.pair().positive().tokens();
    let neg = instance.pair().negative().tokens();
    if let Some(pos_at) = find_contiguous(output, pos, 0) {
        let after_pos = pos_at + pos.len();
        if let Some(neg_at) = find_contiguous(output, neg, after_pos) {
            let mut region = &output[after_pos..neg_at];
            if region.first().map(Token::as_str) == Some(".") {
                region = &region[1..];
            }
            return region.to_vec();
        }
    }
    isolate_connective(output, instance.input_tokens())
}

/// One abstracted incorrect-mixing pattern with its share of all failures.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixingPattern {
    pub pattern: String,
    pub count: usize,
    pub fraction: f64,
}

/// Abstracts each incorrectly mixed connective by replacing tokens equal to
/// the negative opinion's first word with a placeholder, then ranks the
/// resulting pattern strings. Fractions are relative to all failure cases.
pub fn mine_mixing_patterns(
    cases: &[(&PredictionRecord, &SnippetInstance)],
    total_failures: usize,
) -> Vec<MixingPattern> {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for (prediction, instance) in cases {
        let connective = mixing_connective(prediction.output_tokens(), instance);
        let neg_first = instance.pair().negative().tokens().first();
        let pattern = connective
            .iter()
            .map(|t| {
                if Some(t) == neg_first {
                    NEGATIVE_FIRST_WORD_PLACEHOLDER.to_string()
                } else {
                    t.as_str().to_string()
                }
            })
            .collect::<Vec<_>>()
            .join(" ");
        *counts.entry(pattern).or_default() += 1;
    }
    let mut patterns: Vec<MixingPattern> = counts
        .into_iter()
        .map(|(pattern, count)| MixingPattern {
            pattern,
            count,
            fraction: if total_failures == 0 {
                0.0
            } else {
                count as f64 / total_failures as f64
            },
        })
        .collect();
    patterns.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.pattern.cmp(&b.pattern)));
    patterns
}

/// One classified prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionClass {
    pub instance_id: String,
    pub class: ConnectiveClass,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct AnalysisCounts {
    pub evaluated: usize,
    pub exact: usize,
    pub new_fusion: usize,
    pub failures: usize,
    pub skipped: usize,
}

/// Corpus-level connective study. Each distribution is normalized by its
/// own denominator: exact matches, new fusions, and failures respectively;
/// mixing-pattern fractions are relative to all failures.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisReport {
    pub counts: AnalysisCounts,
    pub exact_match_fraction: f64,
    pub exact_distribution: BTreeMap<String, f64>,
    pub new_fusion_fraction: f64,
    pub new_distribution: BTreeMap<String, f64>,
    pub error_fraction: f64,
    pub error_distribution: BTreeMap<ErrorSubtype, f64>,
    pub mixing_patterns: Vec<MixingPattern>,
    pub per_prediction: Vec<PredictionClass>,
}

/// Classifies every prediction and aggregates the four distributions.
pub fn analyze_corpus(
    predictions: &[PredictionRecord],
    instances: &[SnippetInstance],
) -> Result<AnalysisReport, EvalError> {
    let (pairs, skipped) = resolve(predictions, instances)?;
    let classifier = ConnectiveClassifier::new();
    let classified: Vec<(&PredictionRecord, &SnippetInstance, ConnectiveClass)> = pairs
        .par_iter()
        .map(|(prediction, instance)| {
            (*prediction, *instance, classifier.classify(prediction, instance))
        })
        .collect();

    let evaluated = classified.len();
    let mut exact_counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut new_counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut error_counts: BTreeMap<ErrorSubtype, usize> = BTreeMap::new();
    let mut mixing_cases: Vec<(&PredictionRecord, &SnippetInstance)> = Vec::new();

    for (prediction, instance, class) in &classified {
        match class {
            ConnectiveClass::ExactTemplate(id) => {
                *exact_counts
                    .entry(template::template(*id).connective_label())
                    .or_default() += 1;
            }
            ConnectiveClass::NewFusion(form) => {
                *new_counts.entry(form.clone()).or_default() += 1;
            }
            ConnectiveClass::Error(subtype) => {
                *error_counts.entry(*subtype).or_default() += 1;
                if *subtype == ErrorSubtype::IncorrectMixing {
                    mixing_cases.push((prediction, instance));
                }
            }
        }
    }

    let exact = exact_counts.values().sum::<usize>();
    let new_fusion = new_counts.values().sum::<usize>();
    let failures = error_counts.values().sum::<usize>();

    let normalize = |counts: BTreeMap<String, usize>, denom: usize| -> BTreeMap<String, f64> {
        counts
            .into_iter()
            .map(|(k, v)| (k, v as f64 / denom as f64))
            .collect()
    };
    let fraction = |count: usize| {
        if evaluated == 0 {
            0.0
        } else {
            count as f64 / evaluated as f64
        }
    };

    let mixing_patterns = mine_mixing_patterns(&mixing_cases, failures);
    let per_prediction = classified
        .iter()
        .map(|(prediction, _, class)| PredictionClass {
            instance_id: prediction.instance_id().to_string(),
            class: class.clone(),
        })
        .collect();

    Ok(AnalysisReport {
        counts: AnalysisCounts {
            evaluated,
            exact,
            new_fusion,
            failures,
            skipped,
        },
        exact_match_fraction: fraction(exact),
        exact_distribution: if exact == 0 {
            BTreeMap::new()
        } else {
            normalize(exact_counts, exact)
        },
        new_fusion_fraction: fraction(new_fusion),
        new_distribution: if new_fusion == 0 {
            BTreeMap::new()
        } else {
            normalize(new_counts, new_fusion)
        },
        error_fraction: fraction(failures),
        error_distribution: if failures == 0 {
            BTreeMap::new()
        } else {
            error_counts
                .into_iter()
                .map(|(k, v)| (k, v as f64 / failures as f64))
                .collect()
        },
        mixing_patterns,
        per_prediction,
    })
}
