//! Segment post-processing rules and popularity-threshold selection.
//!
//! Five rules decide whether an extracted opinion segment is usable:
//!
//! 1. drop segments shorter than `min_words`,
//! 2. strip leading and trailing punctuation tokens,
//! 3. require at least one noun or pronoun and one main or auxiliary verb,
//! 4. drop segments containing first-person words,
//! 5. strip leading connectives ("because", "and", "but", ...).
//!
//! The stripping rules (2 and 5) run first and iterate to a fixed point, so
//! length and content checks judge the cleaned tokens: "but , great value"
//! is judged on the two remaining words and rejected.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{PosTag, Segment, Token};

/// Default first-person word list (rule 4).
pub const FIRST_PERSON_WORDS: &[&str] = &[
    "i", "me", "my", "myself", "mine", "we", "us", "our", "ourselves",
];

/// Default leading-connective list (rule 5).
pub const LEADING_CONNECTIVES: &[&str] = &[
    "because", "and", "before", "but", "however", "now", "of", "then", "&", "or",
];

/// Default popularity threshold: a segment enters a summary only when it was
/// sampled strictly more than this many times.
pub const DEFAULT_POPULARITY_THRESHOLD: u64 = 18;

#[derive(Debug, Error)]
pub enum FilterError {
    #[error("untagged segment: {text:?} (enable heuristic tagging or supply tags)")]
    UntaggedSegment { text: String },
    #[error("segment {text:?} of product {product_id:?} has no sample_count")]
    MissingSampleCount { product_id: String, text: String },
    #[error("invalid filter config: {0}")]
    InvalidConfig(String),
}

/// Tunable knobs for the filter rules.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterConfig {
    pub min_words: usize,
    pub first_person_words: BTreeSet<String>,
    pub leading_connectives: BTreeSet<String>,
    pub popularity_threshold: u64,
    /// Fall back to the built-in closed-class tagger when a segment carries
    /// no tags. Lower fidelity than supplied tags; off by default.
    pub heuristic_pos: bool,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            min_words: 3,
            first_person_words: FIRST_PERSON_WORDS.iter().map(|s| s.to_string()).collect(),
            leading_connectives: LEADING_CONNECTIVES.iter().map(|s| s.to_string()).collect(),
            popularity_threshold: DEFAULT_POPULARITY_THRESHOLD,
            heuristic_pos: false,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<(), FilterError> {
        if self.min_words < 1 {
            return Err(FilterError::InvalidConfig("min_words must be >= 1".into()));
        }
        Ok(())
    }
}

/// Rule a segment was rejected by, if any.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    TooShort,
    NoNounOrVerb,
    FirstPerson,
}

impl RejectReason {
    pub fn as_str(self) -> &'static str {
        match self {
            RejectReason::TooShort => "too_short",
            RejectReason::NoNounOrVerb => "no_noun_or_verb",
            RejectReason::FirstPerson => "first_person",
        }
    }
}

/// Result of filtering one segment: the cleaned tokens plus either a pass or
/// the first rule that failed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilterOutcome {
    rejected_by: Option<RejectReason>,
    transformed_tokens: Vec<Token>,
    transformed_tags: Option<Vec<PosTag>>,
}

impl FilterOutcome {
    pub fn kept(&self) -> bool {
        self.rejected_by.is_none()
    }

    pub fn rejected_by(&self) -> Option<RejectReason> {
        self.rejected_by
    }

    /// Tokens after the stripping rules, regardless of the verdict.
    pub fn transformed_tokens(&self) -> &[Token] {
        &self.transformed_tokens
    }

    /// Tags aligned with the transformed tokens, when the input had tags.
    pub fn transformed_tags(&self) -> Option<&[PosTag]> {
        self.transformed_tags.as_deref()
    }
}

/// Removes punctuation-only tokens from both ends (rule 2). Interior
/// punctuation is untouched.
pub fn strip_edge_punctuation(tokens: &[Token]) -> &[Token] {
    let mut lo = 0;
    let mut hi = tokens.len();
    while lo < hi && tokens[lo].is_punctuation() {
        lo += 1;
    }
    while hi > lo && tokens[hi - 1].is_punctuation() {
        hi -= 1;
    }
    &tokens[lo..hi]
}

/// Removes any leading occurrences of the configured connectives (rule 5).
pub fn strip_leading_connectives<'a>(tokens: &'a [Token], config: &FilterConfig) -> &'a [Token] {
    let mut lo = 0;
    while lo < tokens.len() && config.leading_connectives.contains(tokens[lo].as_str()) {
        lo += 1;
    }
    &tokens[lo..]
}

/// Applies rules 2 and 5 repeatedly until the tokens stop changing; both
/// rules only trim the edges, so the result is a subrange of the input.
fn transform_window(tokens: &[Token], config: &FilterConfig) -> (usize, usize) {
    let mut lo = 0;
    let mut hi = tokens.len();
    loop {
        let before = (lo, hi);
        while lo < hi && tokens[lo].is_punctuation() {
            lo += 1;
        }
        while hi > lo && tokens[hi - 1].is_punctuation() {
            hi -= 1;
        }
        while lo < hi && config.leading_connectives.contains(tokens[lo].as_str()) {
            lo += 1;
        }
        if (lo, hi) == before {
            return (lo, hi);
        }
    }
}

/// True when the tags contain a noun or pronoun and a verb or auxiliary.
pub fn has_content_tags(tags: &[PosTag]) -> bool {
    let has_nominal = tags
        .iter()
        .any(|t| matches!(t, PosTag::Noun | PosTag::Pronoun));
    let has_verbal = tags.iter().any(|t| matches!(t, PosTag::Verb | PosTag::Aux));
    has_nominal && has_verbal
}

/// Rule 3 over a whole segment, using its tags or the heuristic tagger when
/// `config.heuristic_pos` is set.
pub fn has_content_pos(segment: &Segment, config: &FilterConfig) -> Result<bool, FilterError> {
    match segment.tags() {
        Some(tags) => Ok(has_content_tags(tags)),
        None if config.heuristic_pos => Ok(has_content_tags(&heuristic_tags(segment.tokens()))),
        None => Err(FilterError::UntaggedSegment {
            text: segment.text().to_string(),
        }),
    }
}

/// Rule 4: exact token membership in the first-person list, never substring
/// matching ("fine" does not match "mine").
pub fn contains_first_person(tokens: &[Token], config: &FilterConfig) -> bool {
    tokens
        .iter()
        .any(|t| config.first_person_words.contains(t.as_str()))
}

/// Runs all five rules in order: strip (2, 5), length (1), content POS (3),
/// first person (4). The first failing rule is recorded.
pub fn filter_segment(segment: &Segment, config: &FilterConfig) -> Result<FilterOutcome, FilterError> {
    let tokens = segment.tokens();
    let (lo, hi) = transform_window(tokens, config);
    let transformed_tokens = tokens[lo..hi].to_vec();
    let transformed_tags = segment.tags().map(|tags| tags[lo..hi].to_vec());

    let rejected_by = if transformed_tokens.len() < config.min_words {
        Some(RejectReason::TooShort)
    } else {
        let tags_ok = match &transformed_tags {
            Some(tags) => has_content_tags(tags),
            None if config.heuristic_pos => has_content_tags(&heuristic_tags(&transformed_tokens)),
            None => {
                return Err(FilterError::UntaggedSegment {
                    text: segment.text().to_string(),
                })
            }
        };
        if !tags_ok {
            Some(RejectReason::NoNounOrVerb)
        } else if contains_first_person(&transformed_tokens, config) {
            Some(RejectReason::FirstPerson)
        } else {
            None
        }
    };

    Ok(FilterOutcome {
        rejected_by,
        transformed_tokens,
        transformed_tags,
    })
}

/// Keeps exactly the segments sampled strictly more often than the
/// configured threshold, grouped by (product, polarity). The output order is
/// canonical, so it does not depend on the input order.
pub fn popularity_select(
    segments: Vec<Segment>,
    config: &FilterConfig,
) -> Result<Vec<Segment>, FilterError> {
    let mut selected = Vec::new();
    for segment in segments {
        let count = segment
            .sample_count()
            .ok_or_else(|| FilterError::MissingSampleCount {
                product_id: segment.product_id().to_string(),
                text: segment.text().to_string(),
            })?;
        if count > config.popularity_threshold {
            selected.push(segment);
        }
    }
    selected.sort_by(|a, b| {
        (a.product_id(), a.polarity(), a.text(), a.sample_count()).cmp(&(
            b.product_id(),
            b.polarity(),
            b.text(),
            b.sample_count(),
        ))
    });
    Ok(selected)
}

const PRONOUNS: &[&str] = &[
    "i", "you", "he", "she", "it", "we", "they", "me", "him", "her", "us", "them", "myself",
    "yourself", "himself", "herself", "itself", "ourselves", "themselves", "mine", "yours", "hers",
    "ours", "theirs", "this", "these", "those", "someone", "somebody", "something", "anyone",
    "anybody", "anything", "everyone", "everybody", "everything", "nobody", "nothing", "one",
];

const AUXILIARIES: &[&str] = &[
    "am", "is", "are", "was", "were", "be", "been", "being", "have", "has", "had", "having", "do",
    "does", "did", "will", "would", "shall", "should", "can", "could", "may", "might", "must",
    "'s", "'re", "'m", "'ve", "'d", "'ll",
];

const FUNCTION_WORDS: &[&str] = &[
    "the", "a", "an", "and", "or", "but", "because", "if", "while", "although", "though",
    "however", "yet", "so", "very", "quite", "too", "just", "not", "no", "never", "also", "even",
    "still", "really", "then", "than", "that", "which", "who", "whom", "whose", "what", "when",
    "where", "why", "how", "there", "here", "of", "in", "on", "at", "to", "for", "with", "from",
    "by", "about", "into", "over", "under", "after", "before", "between", "during", "without",
    "within", "against", "some", "any", "all", "both", "each", "every", "few", "many", "much",
    "more", "most", "other", "such", "only", "own", "same", "as", "again", "further", "once",
    "out", "off", "up", "down", "now",
];

/// Closed-class lexicon tagger: pronoun and auxiliary lists, a function-word
/// list, -ness/-ment/-ion noun suffixes, -ed/-ing/-s verb suffixes, and a
/// noun default for remaining open-class words. Lower fidelity than tags
/// from a real tagger; intended as a fallback.
pub fn heuristic_tags(tokens: &[Token]) -> Vec<PosTag> {
    tokens.iter().map(heuristic_tag).collect()
}

fn heuristic_tag(token: &Token) -> PosTag {
    let s = token.as_str();
    if token.is_punctuation() || s.chars().all(|c| c.is_ascii_digit()) {
        return PosTag::Other;
    }
    if PRONOUNS.contains(&s) {
        return PosTag::Pronoun;
    }
    if AUXILIARIES.contains(&s) || s.ends_with("n't") {
        return PosTag::Aux;
    }
    if FUNCTION_WORDS.contains(&s) {
        return PosTag::Other;
    }
    if s.len() > 4 && (s.ends_with("ness") || s.ends_with("ment") || s.ends_with("ion")) {
        return PosTag::Noun;
    }
    if s.len() > 3 && (s.ends_with("ed") || s.ends_with("ing")) {
        return PosTag::Verb;
    }
    if s.len() > 2 && s.ends_with('s') && !s.ends_with("ss") {
        return PosTag::Verb;
    }
    PosTag::Noun
}
