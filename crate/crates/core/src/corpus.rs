//! Canonical data types and tokenization shared by the whole pipeline.
//!
//! Every downstream stage — filtering, template rendering, scoring,
//! connective analysis — operates on the token sequences produced here, so
//! the tokenizer is the single normalization point: text is lowercased,
//! split on whitespace, and common punctuation is detached into
//! single-character tokens. Apostrophes and hyphens stay attached to their
//! word exactly as found in the source ("415's" stays one token, "it 's"
//! stays two).

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Punctuation characters that [`tokenize`] detaches from the edges of a
/// whitespace-delimited chunk, each becoming its own token.
pub const DETACHED_PUNCTUATION: &[char] = &['.', ',', '!', '?', ';', ':', '"', '&', '(', ')'];

/// Characters counted as punctuation when testing whether a whole token is
/// punctuation-only. Broader than [`DETACHED_PUNCTUATION`]: a free-standing
/// "-" is punctuation even though hyphens are never detached from words.
pub const PUNCTUATION_CHARS: &[char] = &[
    '.', ',', '!', '?', ';', ':', '\'', '"', '&', '-', '(', ')',
];

/// Errors raised while constructing or decoding corpus data.
#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("invalid token {token:?}: {reason}")]
    InvalidToken { token: String, reason: &'static str },
    #[error("tags length {found} does not match token count {expected}")]
    TagsLength { expected: usize, found: usize },
    #[error("expected a {expected} segment, found {found}")]
    PolarityMismatch { expected: Polarity, found: Polarity },
    #[error("segments belong to different products: {left:?} vs {right:?}")]
    ProductMismatch { left: String, right: String },
    #[error("instance {id}: invalid references: {reason}")]
    InvalidReferences { id: String, reason: String },
    #[error("prediction {instance_id}: empty output")]
    EmptyOutput { instance_id: String },
    #[error("template id {0} outside 1..=7")]
    TemplateIdRange(u8),
    #[error("line {line}: missing field {field}")]
    MissingField { line: usize, field: &'static str },
    #[error("line {line}: invalid {field}: {message}")]
    InvalidField {
        line: usize,
        field: &'static str,
        message: String,
    },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("{path}: {source}")]
    File {
        path: String,
        source: std::io::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One lowercase token with no internal whitespace.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Token(String);

impl Token {
    /// Validates and wraps a single token.
    pub fn new(text: &str) -> Result<Self, CorpusError> {
        if text.is_empty() {
            return Err(CorpusError::InvalidToken {
                token: text.to_string(),
                reason: "empty",
            });
        }
        if text.chars().any(char::is_whitespace) {
            return Err(CorpusError::InvalidToken {
                token: text.to_string(),
                reason: "contains whitespace",
            });
        }
        if text != text.to_lowercase() {
            return Err(CorpusError::InvalidToken {
                token: text.to_string(),
                reason: "not lowercase",
            });
        }
        Ok(Token(text.to_string()))
    }

    /// Internal constructor for strings the tokenizer already normalized.
    pub(crate) fn trusted(text: String) -> Self {
        debug_assert!(!text.is_empty() && !text.chars().any(char::is_whitespace));
        Token(text)
    }

    /// The "." token used to join opinions into an input sequence.
    pub fn full_stop() -> Self {
        Token(".".to_string())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// True when every character is punctuation ([`PUNCTUATION_CHARS`]).
    pub fn is_punctuation(&self) -> bool {
        self.0.chars().all(|c| PUNCTUATION_CHARS.contains(&c))
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for Token {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

impl PartialEq<&str> for Token {
    fn eq(&self, other: &&str) -> bool {
        self.0 == **other
    }
}

/// Lowercases, splits on whitespace, and detaches leading/trailing
/// [`DETACHED_PUNCTUATION`] characters as single-character tokens.
///
/// Apostrophes and hyphens are kept as found, so "415's" tokenizes to one
/// token while "it 's" tokenizes to two. Idempotent on already-spaced text:
/// re-tokenizing the space-joined output reproduces it exactly.
pub fn tokenize(text: &str) -> Vec<Token> {
    let lowered = text.to_lowercase();
    let mut out = Vec::new();
    for chunk in lowered.split_whitespace() {
        let chars: Vec<char> = chunk.chars().collect();
        let mut lo = 0;
        let mut hi = chars.len();
        while lo < hi && DETACHED_PUNCTUATION.contains(&chars[lo]) {
            lo += 1;
        }
        while hi > lo && DETACHED_PUNCTUATION.contains(&chars[hi - 1]) {
            hi -= 1;
        }
        for &c in &chars[..lo] {
            out.push(Token::trusted(c.to_string()));
        }
        if lo < hi {
            out.push(Token::trusted(chars[lo..hi].iter().collect()));
        }
        for &c in &chars[hi..] {
            out.push(Token::trusted(c.to_string()));
        }
    }
    out
}

/// Joins tokens with single spaces, the canonical text form of a sequence.
pub fn join_tokens(tokens: &[Token]) -> String {
    let mut s = String::new();
    for (i, t) in tokens.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        s.push_str(t.as_str());
    }
    s
}

/// Opinion class of a segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Positive,
    Negative,
}

impl Polarity {
    pub fn as_str(self) -> &'static str {
        match self {
            Polarity::Positive => "positive",
            Polarity::Negative => "negative",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "positive" => Some(Polarity::Positive),
            "negative" => Some(Polarity::Negative),
            _ => None,
        }
    }
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Coarse part-of-speech class attached to a token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PosTag {
    Noun,
    Pronoun,
    Verb,
    Aux,
    Other,
}

impl PosTag {
    pub fn as_str(self) -> &'static str {
        match self {
            PosTag::Noun => "noun",
            PosTag::Pronoun => "pronoun",
            PosTag::Verb => "verb",
            PosTag::Aux => "aux",
            PosTag::Other => "other",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "noun" => Some(PosTag::Noun),
            "pronoun" => Some(PosTag::Pronoun),
            "verb" => Some(PosTag::Verb),
            "aux" => Some(PosTag::Aux),
            "other" => Some(PosTag::Other),
            _ => None,
        }
    }
}

impl fmt::Display for PosTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Dataset split an instance belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "train" => Some(Split::Train),
            "validation" => Some(Split::Validation),
            "test" => Some(Split::Test),
            _ => None,
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Identifier of one of the seven fusion templates, always in 1..=7.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TemplateId(u8);

impl TemplateId {
    /// Size of the template inventory.
    pub const COUNT: usize = 7;

    pub fn new(raw: u8) -> Result<Self, CorpusError> {
        if (1..=Self::COUNT as u8).contains(&raw) {
            Ok(TemplateId(raw))
        } else {
            Err(CorpusError::TemplateIdRange(raw))
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }

    /// All template ids in ascending order.
    pub fn all() -> impl Iterator<Item = TemplateId> {
        (1..=Self::COUNT as u8).map(TemplateId)
    }
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One opinion phrase with its polarity, tokenization, and optional
/// popularity count and part-of-speech tags.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    product_id: String,
    text: String,
    tokens: Vec<Token>,
    polarity: Polarity,
    sample_count: Option<u64>,
    tags: Option<Vec<PosTag>>,
}

impl Segment {
    /// Builds a segment; `tokens` is always the tokenization of `text`.
    pub fn new(product_id: impl Into<String>, text: impl Into<String>, polarity: Polarity) -> Self {
        let text = text.into();
        let tokens = tokenize(&text);
        Segment {
            product_id: product_id.into(),
            text,
            tokens,
            polarity,
            sample_count: None,
            tags: None,
        }
    }

    /// Builds a segment from tokens via their canonical joined text.
    pub fn from_tokens(
        product_id: impl Into<String>,
        tokens: &[Token],
        polarity: Polarity,
    ) -> Self {
        Segment::new(product_id, join_tokens(tokens), polarity)
    }

    pub fn with_sample_count(mut self, count: u64) -> Self {
        self.sample_count = Some(count);
        self
    }

    pub fn with_tags(mut self, tags: Vec<PosTag>) -> Result<Self, CorpusError> {
        if tags.len() != self.tokens.len() {
            return Err(CorpusError::TagsLength {
                expected: self.tokens.len(),
                found: tags.len(),
            });
        }
        self.tags = Some(tags);
        Ok(self)
    }

    pub fn product_id(&self) -> &str {
        &self.product_id
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn polarity(&self) -> Polarity {
        self.polarity
    }

    pub fn sample_count(&self) -> Option<u64> {
        self.sample_count
    }

    pub fn tags(&self) -> Option<&[PosTag]> {
        self.tags.as_deref()
    }
}

/// One positive and one negative segment about the same product.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OpinionPair {
    product_id: String,
    positive: Segment,
    negative: Segment,
}

impl OpinionPair {
    pub fn new(positive: Segment, negative: Segment) -> Result<Self, CorpusError> {
        if positive.polarity() != Polarity::Positive {
            return Err(CorpusError::PolarityMismatch {
                expected: Polarity::Positive,
                found: positive.polarity(),
            });
        }
        if negative.polarity() != Polarity::Negative {
            return Err(CorpusError::PolarityMismatch {
                expected: Polarity::Negative,
                found: negative.polarity(),
            });
        }
        if positive.product_id() != negative.product_id() {
            return Err(CorpusError::ProductMismatch {
                left: positive.product_id().to_string(),
                right: negative.product_id().to_string(),
            });
        }
        Ok(OpinionPair {
            product_id: positive.product_id().to_string(),
            positive,
            negative,
        })
    }

    pub fn product_id(&self) -> &str {
        &self.product_id
    }

    pub fn positive(&self) -> &Segment {
        &self.positive
    }

    pub fn negative(&self) -> &Segment {
        &self.negative
    }
}

/// One template rendering of a pair, used as a gold output when scoring.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reference {
    pub template_id: TemplateId,
    pub tokens: Vec<Token>,
}

/// A generated dataset entry: the pair, its joined input sequence, the seven
/// reference realizations, and the split it belongs to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SnippetInstance {
    id: String,
    pair: OpinionPair,
    input_tokens: Vec<Token>,
    references: Vec<Reference>,
    split: Split,
    chosen_template: TemplateId,
}

impl SnippetInstance {
    /// Validates that the references cover template ids 1..=7 exactly and
    /// derives the input sequence (positive tokens, ".", negative tokens, ".").
    pub fn new(
        id: impl Into<String>,
        pair: OpinionPair,
        mut references: Vec<Reference>,
        chosen_template: TemplateId,
        split: Split,
    ) -> Result<Self, CorpusError> {
        let id = id.into();
        if references.len() != TemplateId::COUNT {
            return Err(CorpusError::InvalidReferences {
                id,
                reason: format!("expected {} entries, found {}", TemplateId::COUNT, references.len()),
            });
        }
        references.sort_by_key(|r| r.template_id);
        if !references.iter().map(|r| r.template_id).eq(TemplateId::all()) {
            return Err(CorpusError::InvalidReferences {
                id,
                reason: "template ids must cover 1..=7 exactly".to_string(),
            });
        }
        let mut input_tokens =
            Vec::with_capacity(pair.positive().tokens().len() + pair.negative().tokens().len() + 2);
        input_tokens.extend_from_slice(pair.positive().tokens());
        input_tokens.push(Token::full_stop());
        input_tokens.extend_from_slice(pair.negative().tokens());
        input_tokens.push(Token::full_stop());
        Ok(SnippetInstance {
            id,
            pair,
            input_tokens,
            references,
            split,
            chosen_template,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn pair(&self) -> &OpinionPair {
        &self.pair
    }

    pub fn input_tokens(&self) -> &[Token] {
        &self.input_tokens
    }

    /// References ordered by template id.
    pub fn references(&self) -> &[Reference] {
        &self.references
    }

    pub fn reference(&self, template_id: TemplateId) -> &Reference {
        &self.references[(template_id.get() - 1) as usize]
    }

    pub fn chosen_template(&self) -> TemplateId {
        self.chosen_template
    }

    pub fn chosen_reference(&self) -> &Reference {
        self.reference(self.chosen_template)
    }

    pub fn split(&self) -> Split {
        self.split
    }

    /// Positive then negative opinion tokens, without the joining full stops.
    pub fn opinion_tokens(&self) -> Vec<Token> {
        let mut v = Vec::with_capacity(
            self.pair.positive().tokens().len() + self.pair.negative().tokens().len(),
        );
        v.extend_from_slice(self.pair.positive().tokens());
        v.extend_from_slice(self.pair.negative().tokens());
        v
    }
}

/// A model output tied to the instance it answers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredictionRecord {
    instance_id: String,
    output_tokens: Vec<Token>,
}

impl PredictionRecord {
    pub fn new(instance_id: impl Into<String>, output_text: &str) -> Result<Self, CorpusError> {
        let instance_id = instance_id.into();
        let output_tokens = tokenize(output_text);
        if output_tokens.is_empty() {
            return Err(CorpusError::EmptyOutput { instance_id });
        }
        Ok(PredictionRecord {
            instance_id,
            output_tokens,
        })
    }

    pub fn from_tokens(
        instance_id: impl Into<String>,
        tokens: &[Token],
    ) -> Result<Self, CorpusError> {
        Self::new(instance_id, &join_tokens(tokens))
    }

    pub fn instance_id(&self) -> &str {
        &self.instance_id
    }

    pub fn output_tokens(&self) -> &[Token] {
        &self.output_tokens
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(text: &str) -> Vec<String> {
        tokenize(text).iter().map(|t| t.as_str().to_string()).collect()
    }

    #[test]
    fn tokenize_detaches_punctuation_and_lowercases() {
        assert_eq!(
            toks("it works great . However , camera is not good ."),
            ["it", "works", "great", ".", "however", ",", "camera", "is", "not", "good", "."]
        );
    }

    #[test]
    fn tokenize_empty_input() {
        assert!(tokenize("").is_empty());
        assert!(tokenize("   \t\n").is_empty());
    }

    #[test]
    fn tokenize_keeps_apostrophes_as_found() {
        assert_eq!(
            toks("display was quite bland, didn't enjoy much"),
            ["display", "was", "quite", "bland", ",", "didn't", "enjoy", "much"]
        );
        assert_eq!(toks("the 415's are great"), ["the", "415's", "are", "great"]);
        assert_eq!(toks("it 's just annoying"), ["it", "'s", "just", "annoying"]);
    }

    #[test]
    fn tokenize_splits_edge_runs() {
        assert_eq!(toks("(good)"), ["(", "good", ")"]);
        assert_eq!(toks("..."), [".", ".", "."]);
        assert_eq!(toks("value!."), ["value", "!", "."]);
    }

    #[test]
    fn tokenize_idempotent_on_joined_output() {
        for text in [
            "it works great . However , camera is not good .",
            "display was quite bland, didn't enjoy much",
            "(good) value!. it 's... fine - really",
        ] {
            let once = tokenize(text);
            let twice = tokenize(&join_tokens(&once));
            assert_eq!(once, twice);
        }
    }

    #[test]
    fn token_validation() {
        assert!(Token::new("good").is_ok());
        assert!(Token::new("").is_err());
        assert!(Token::new("two words").is_err());
        assert!(Token::new("Upper").is_err());
    }

    #[test]
    fn punctuation_tokens() {
        assert!(Token::new(".").unwrap().is_punctuation());
        assert!(Token::new("-").unwrap().is_punctuation());
        assert!(Token::new("!?").unwrap().is_punctuation());
        assert!(!Token::new("415's").unwrap().is_punctuation());
    }

    #[test]
    fn segment_tokens_match_text() {
        let seg = Segment::new("p1", "Great SOUND, overall.", Polarity::Positive);
        assert_eq!(seg.tokens(), tokenize(seg.text()).as_slice());
    }

    #[test]
    fn segment_tags_length_checked() {
        let seg = Segment::new("p1", "speed was brilliant", Polarity::Positive);
        assert!(seg.clone().with_tags(vec![PosTag::Noun, PosTag::Aux, PosTag::Other]).is_ok());
        let seg = Segment::new("p1", "speed was brilliant", Polarity::Positive);
        assert!(seg.with_tags(vec![PosTag::Noun]).is_err());
    }

    #[test]
    fn pair_checks_polarity_and_product() {
        let pos = Segment::new("p1", "it works great", Polarity::Positive);
        let neg = Segment::new("p1", "camera is not good", Polarity::Negative);
        assert!(OpinionPair::new(pos.clone(), neg.clone()).is_ok());
        assert!(OpinionPair::new(neg.clone(), pos.clone()).is_err());
        let other = Segment::new("p2", "camera is not good", Polarity::Negative);
        assert!(OpinionPair::new(pos, other).is_err());
    }

    #[test]
    fn instance_input_sequence() {
        let pos = Segment::new("p1", "it works great", Polarity::Positive);
        let neg = Segment::new("p1", "camera is not good", Polarity::Negative);
        let pair = OpinionPair::new(pos, neg).unwrap();
        let references: Vec<Reference> = TemplateId::all()
            .map(|template_id| Reference {
                template_id,
                tokens: tokenize(&format!("ref {}", template_id)),
            })
            .collect();
        let instance = SnippetInstance::new(
            "p1:0",
            pair,
            references,
            TemplateId::new(2).unwrap(),
            Split::Train,
        )
        .unwrap();
        let expected = tokenize("it works great . camera is not good .");
        assert_eq!(instance.input_tokens(), expected.as_slice());
        assert_eq!(instance.opinion_tokens(), tokenize("it works great camera is not good"));
    }

    #[test]
    fn instance_requires_full_reference_set() {
        let pos = Segment::new("p1", "it works great", Polarity::Positive);
        let neg = Segment::new("p1", "camera is not good", Polarity::Negative);
        let pair = OpinionPair::new(pos, neg).unwrap();
        let refs: Vec<Reference> = TemplateId::all()
            .take(6)
            .map(|template_id| Reference {
                template_id,
                tokens: tokenize("x y"),
            })
            .collect();
        let err = SnippetInstance::new("p1:0", pair, refs, TemplateId::new(1).unwrap(), Split::Test);
        assert!(err.is_err());
    }

    #[test]
    fn prediction_rejects_empty_output() {
        assert!(PredictionRecord::new("i1", "").is_err());
        assert!(PredictionRecord::new("i1", "fine .").is_ok());
    }

    #[test]
    fn template_id_range() {
        assert!(TemplateId::new(0).is_err());
        assert!(TemplateId::new(8).is_err());
        assert_eq!(TemplateId::all().count(), 7);
    }
}
