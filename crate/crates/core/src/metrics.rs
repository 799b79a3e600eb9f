//! Recall metrics for fused outputs, evaluated along three aspects:
//!
//! 1. input preservation — token-level longest-common-subsequence recall
//!    between the prediction and the opinion tokens it had to carry through
//!    unchanged;
//! 2. output quality — trigram and quadgram recall against the closest of
//!    the seven references;
//! 3. connective quality — bigram and trigram recall over connecting
//!    strings, i.e. what remains after removing every token still available
//!    in the input multiset.
//!
//! All metrics are recall-only and computed per instance; corpus numbers
//! are arithmetic means.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::corpus::{PredictionRecord, SnippetInstance, TemplateId, Token};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("prediction references unknown instance id {0:?}")]
    UnknownInstance(String),
    #[error("duplicate prediction for instance id {0:?}")]
    DuplicatePrediction(String),
    #[error("duplicate instance id {0:?} in dataset")]
    DuplicateInstance(String),
    #[error("prediction {prediction:?} scored against instance {instance:?}")]
    InstanceMismatch { prediction: String, instance: String },
}

/// Clipped n-gram recall: for each distinct reference n-gram, matches are
/// capped at its reference count; the sum is divided by the total number of
/// reference n-grams. A reference with no n-grams scores 1.0 only when the
/// candidate equals it exactly.
pub fn ngram_recall(candidate: &[Token], reference: &[Token], n: usize) -> f64 {
    assert!(n >= 1, "n-gram order must be at least 1");
    if reference.len() < n {
        return if candidate == reference { 1.0 } else { 0.0 };
    }
    let total = reference.len() - n + 1;
    let mut ref_counts: HashMap<&[Token], usize> = HashMap::new();
    for gram in reference.windows(n) {
        *ref_counts.entry(gram).or_default() += 1;
    }
    let mut matched = 0usize;
    if candidate.len() >= n {
        let mut cand_counts: HashMap<&[Token], usize> = HashMap::new();
        for gram in candidate.windows(n) {
            *cand_counts.entry(gram).or_default() += 1;
        }
        for (gram, ref_count) in &ref_counts {
            if let Some(cand_count) = cand_counts.get(gram) {
                matched += (*cand_count).min(*ref_count);
            }
        }
    }
    matched as f64 / total as f64
}

/// Longest-common-subsequence recall: |LCS| / |reference|. An empty
/// reference scores 1.0 only against an empty candidate.
pub fn lcs_recall(candidate: &[Token], reference: &[Token]) -> f64 {
    if reference.is_empty() {
        return if candidate.is_empty() { 1.0 } else { 0.0 };
    }
    lcs_length(candidate, reference) as f64 / reference.len() as f64
}

fn lcs_length(a: &[Token], b: &[Token]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; b.len() + 1];
    let mut curr = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            curr[j + 1] = if x == y {
                prev[j] + 1
            } else {
                prev[j + 1].max(curr[j])
            };
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[b.len()]
}

/// Order-preserving multiset removal: scans the output left to right and
/// drops a token while the input multiset still holds an unconsumed copy.
/// The survivors are, ideally, exactly the connecting string.
pub fn isolate_connective(output: &[Token], input: &[Token]) -> Vec<Token> {
    let mut available: HashMap<&Token, usize> = HashMap::new();
    for t in input {
        *available.entry(t).or_default() += 1;
    }
    let mut survivors = Vec::new();
    for t in output {
        match available.get_mut(t) {
            Some(count) if *count > 0 => *count -= 1,
            _ => survivors.push(t.clone()),
        }
    }
    survivors
}

/// Per-instance metric values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InstanceScore {
    pub instance_id: String,
    pub rouge_l_input: f64,
    pub rouge_3_best: f64,
    pub rouge_4_best: f64,
    pub conn_rouge_2: f64,
    pub conn_rouge_3: f64,
    pub best_reference_id: TemplateId,
}

/// Corpus-level arithmetic means of the five per-instance fractions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusMeans {
    pub rouge_l_input: f64,
    pub rouge_3_best: f64,
    pub rouge_4_best: f64,
    pub conn_rouge_2: f64,
    pub conn_rouge_3: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct EvalCounts {
    pub evaluated: usize,
    pub skipped: usize,
}

/// Scores for a whole prediction file: one row per evaluated instance
/// (ordered by instance id) plus corpus means when anything was evaluated.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub per_instance: Vec<InstanceScore>,
    pub corpus: Option<CorpusMeans>,
    pub counts: EvalCounts,
}

/// Scores one prediction against its instance.
///
/// Input preservation is measured against the opinion tokens (the joining
/// full stops are an input-encoding artifact, and the prefix template does
/// not reproduce the first one). Quality metrics take the maximum over the
/// seven references; the best reference is the quadgram argmax, with trigram
/// recall then the lowest template id breaking ties. Connective metrics
/// compare isolated connecting strings, again maximized over references.
pub fn score_instance(
    prediction: &PredictionRecord,
    instance: &SnippetInstance,
) -> Result<InstanceScore, EvalError> {
    if prediction.instance_id() != instance.id() {
        return Err(EvalError::InstanceMismatch {
            prediction: prediction.instance_id().to_string(),
            instance: instance.id().to_string(),
        });
    }
    let output = prediction.output_tokens();
    let opinion_tokens = instance.opinion_tokens();
    let rouge_l_input = lcs_recall(output, &opinion_tokens);

    let mut rouge_3_best = 0.0f64;
    let mut rouge_4_best = 0.0f64;
    let mut best_reference_id = instance.references()[0].template_id;
    let mut best_key = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for reference in instance.references() {
        let r3 = ngram_recall(output, &reference.tokens, 3);
        let r4 = ngram_recall(output, &reference.tokens, 4);
        rouge_3_best = rouge_3_best.max(r3);
        rouge_4_best = rouge_4_best.max(r4);
        if (r4, r3) > best_key {
            best_key = (r4, r3);
            best_reference_id = reference.template_id;
        }
    }

    let input = instance.input_tokens();
    let isolated_output = isolate_connective(output, input);
    let mut conn_rouge_2 = 0.0f64;
    let mut conn_rouge_3 = 0.0f64;
    for reference in instance.references() {
        let isolated_reference = isolate_connective(&reference.tokens, input);
        conn_rouge_2 = conn_rouge_2.max(ngram_recall(&isolated_output, &isolated_reference, 2));
        conn_rouge_3 = conn_rouge_3.max(ngram_recall(&isolated_output, &isolated_reference, 3));
    }

    Ok(InstanceScore {
        instance_id: instance.id().to_string(),
        rouge_l_input,
        rouge_3_best,
        rouge_4_best,
        conn_rouge_2,
        conn_rouge_3,
        best_reference_id,
    })
}

pub(crate) type ResolvedPairs<'a> = Vec<(&'a PredictionRecord, &'a SnippetInstance)>;

/// Resolves predictions against instances by id; errors on duplicates on
/// either side and on predictions without an instance. Returns the matched
/// pairs ordered by instance id plus the count of instances left unscored.
pub(crate) fn resolve<'a>(
    predictions: &'a [PredictionRecord],
    instances: &'a [SnippetInstance],
) -> Result<(ResolvedPairs<'a>, usize), EvalError> {
    let mut by_id: HashMap<&str, &SnippetInstance> = HashMap::with_capacity(instances.len());
    for instance in instances {
        if by_id.insert(instance.id(), instance).is_some() {
            return Err(EvalError::DuplicateInstance(instance.id().to_string()));
        }
    }
    let mut seen: HashMap<&str, ()> = HashMap::with_capacity(predictions.len());
    let mut pairs = Vec::with_capacity(predictions.len());
    for prediction in predictions {
        let id = prediction.instance_id();
        if seen.insert(id, ()).is_some() {
            return Err(EvalError::DuplicatePrediction(id.to_string()));
        }
        let instance = by_id
            .get(id)
            .ok_or_else(|| EvalError::UnknownInstance(id.to_string()))?;
        pairs.push((prediction, *instance));
    }
    pairs.sort_by(|a, b| a.1.id().cmp(b.1.id()));
    let skipped = instances.len() - pairs.len();
    Ok((pairs, skipped))
}

/// Scores every prediction and aggregates corpus means. Instances without a
/// prediction are counted as skipped; an empty prediction set produces a
/// report with no corpus means.
pub fn score_corpus(
    predictions: &[PredictionRecord],
    instances: &[SnippetInstance],
) -> Result<EvalReport, EvalError> {
    let (pairs, skipped) = resolve(predictions, instances)?;
    let per_instance: Vec<InstanceScore> = pairs
        .par_iter()
        .map(|(prediction, instance)| score_instance(prediction, instance))
        .collect::<Result<_, _>>()?;

    let corpus = if per_instance.is_empty() {
        None
    } else {
        let n = per_instance.len() as f64;
        let mut sums = [0.0f64; 5];
        for score in &per_instance {
            sums[0] += score.rouge_l_input;
            sums[1] += score.rouge_3_best;
            sums[2] += score.rouge_4_best;
            sums[3] += score.conn_rouge_2;
            sums[4] += score.conn_rouge_3;
        }
        Some(CorpusMeans {
            rouge_l_input: sums[0] / n,
            rouge_3_best: sums[1] / n,
            rouge_4_best: sums[2] / n,
            conn_rouge_2: sums[3] / n,
            conn_rouge_3: sums[4] / n,
        })
    };

    Ok(EvalReport {
        counts: EvalCounts {
            evaluated: per_instance.len(),
            skipped,
        },
        per_instance,
        corpus,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{tokenize, OpinionPair, Polarity, Segment, Split};
    use crate::template::{references_for, template};

    fn instance(id: &str, pos: &str, neg: &str, chosen: u8) -> SnippetInstance {
        let pair = OpinionPair::new(
            Segment::new("p1", pos, Polarity::Positive),
            Segment::new("p1", neg, Polarity::Negative),
        )
        .unwrap();
        let references = references_for(&pair).unwrap();
        SnippetInstance::new(
            id,
            pair,
            references,
            TemplateId::new(chosen).unwrap(),
            Split::Test,
        )
        .unwrap()
    }

    #[test]
    fn ngram_recall_identity_and_disjoint() {
        let x = tokenize("a b c d e");
        assert_eq!(ngram_recall(&x, &x, 3), 1.0);
        let y = tokenize("p q r s");
        assert_eq!(ngram_recall(&y, &x, 3), 0.0);
    }

    #[test]
    fn ngram_recall_partial() {
        let cand = tokenize("a b c d");
        let reference = tokenize("a b c e");
        assert_eq!(ngram_recall(&cand, &reference, 3), 0.5);
    }

    #[test]
    fn ngram_recall_zero_ngram_reference() {
        let short = tokenize("hi");
        assert_eq!(ngram_recall(&short, &short, 3), 1.0);
        let other = tokenize("hi there");
        assert_eq!(ngram_recall(&other, &short, 3), 0.0);
        let empty: Vec<Token> = Vec::new();
        assert_eq!(ngram_recall(&empty, &empty, 2), 1.0);
        assert_eq!(ngram_recall(&short, &empty, 2), 0.0);
    }

    #[test]
    fn ngram_recall_clips_repeats() {
        let cand = tokenize("a a a a");
        let reference = tokenize("a a b");
        // Reference bigrams: "a a", "a b"; candidate holds three "a a".
        assert_eq!(ngram_recall(&cand, &reference, 2), 0.5);
    }

    #[test]
    fn lcs_recall_full_containment() {
        let input = tokenize("display is awesome . battery takes long time to charge .");
        let output = tokenize("display is awesome . however , battery takes long time to charge .");
        assert_eq!(lcs_recall(&output, &input), 1.0);
    }

    #[test]
    fn lcs_recall_basic() {
        let x = tokenize("a b c");
        assert_eq!(lcs_recall(&x, &x), 1.0);
        let cand = tokenize("a x b y c");
        let reference = tokenize("a b c d");
        assert_eq!(lcs_recall(&cand, &reference), 0.75);
        let empty: Vec<Token> = Vec::new();
        assert_eq!(lcs_recall(&empty, &empty), 1.0);
        assert_eq!(lcs_recall(&x, &empty), 0.0);
        assert_eq!(lcs_recall(&empty, &x), 0.0);
    }

    #[test]
    fn isolate_connective_recovers_template_connective() {
        let output =
            tokenize("it works great . however , some users have also mentioned that camera is not good .");
        let input = tokenize("it works great . camera is not good .");
        assert_eq!(
            isolate_connective(&output, &input),
            tokenize("however , some users have also mentioned that")
        );
    }

    #[test]
    fn isolate_connective_output_equals_input() {
        let input = tokenize("it works great . camera is not good .");
        assert!(isolate_connective(&input, &input).is_empty());
    }

    #[test]
    fn isolate_connective_low_quality_connective() {
        let output = tokenize("it works great . on , some users have also mentioned that camera is not good .");
        let input = tokenize("it works great . camera is not good .");
        assert_eq!(
            isolate_connective(&output, &input),
            tokenize("on , some users have also mentioned that")
        );
    }

    #[test]
    fn perfect_prediction_scores_all_ones() {
        let inst = instance("i1", "it works great", "camera is not good", 5);
        for reference in inst.references() {
            let pred = PredictionRecord::from_tokens("i1", &reference.tokens).unwrap();
            let score = score_instance(&pred, &inst).unwrap();
            assert_eq!(score.rouge_l_input, 1.0, "template {}", reference.template_id);
            assert_eq!(score.rouge_3_best, 1.0, "template {}", reference.template_id);
            assert_eq!(score.rouge_4_best, 1.0, "template {}", reference.template_id);
            assert_eq!(score.conn_rouge_2, 1.0, "template {}", reference.template_id);
            assert_eq!(score.conn_rouge_3, 1.0, "template {}", reference.template_id);
        }
    }

    #[test]
    fn prediction_without_connective_scores_zero_connective() {
        let inst = instance("i1", "it works great", "camera is not good", 2);
        let pred = PredictionRecord::from_tokens("i1", inst.input_tokens()).unwrap();
        let score = score_instance(&pred, &inst).unwrap();
        assert_eq!(score.rouge_l_input, 1.0);
        assert_eq!(score.conn_rouge_2, 0.0);
        assert_eq!(score.conn_rouge_3, 0.0);
    }

    #[test]
    fn missing_opinion_word_lowers_input_preservation() {
        let inst = instance("i1", "it works great", "camera is not good", 2);
        let pred = PredictionRecord::new("i1", "it works great . however camera is not .").unwrap();
        let score = score_instance(&pred, &inst).unwrap();
        assert!(score.rouge_l_input < 1.0);
    }

    #[test]
    fn best_reference_follows_quadgram_then_trigram() {
        let inst = instance("i1", "the sound is quite clear", "the strap broke right away", 1);
        let t6 = template(TemplateId::new(6).unwrap());
        let pred =
            PredictionRecord::from_tokens("i1", &t6.render(inst.pair()).unwrap()).unwrap();
        let score = score_instance(&pred, &inst).unwrap();
        assert_eq!(score.best_reference_id.get(), 6);
    }

    #[test]
    fn score_instance_checks_id() {
        let inst = instance("i1", "it works great", "camera is not good", 1);
        let pred = PredictionRecord::new("other", "it works great").unwrap();
        assert!(matches!(
            score_instance(&pred, &inst),
            Err(EvalError::InstanceMismatch { .. })
        ));
    }

    #[test]
    fn corpus_means_are_arithmetic() {
        let a = instance("a", "it works great", "camera is not good", 2);
        let b = instance("b", "sound is clear", "strap broke early", 2);
        let perfect = PredictionRecord::from_tokens("a", &a.chosen_reference().tokens).unwrap();
        let partial = PredictionRecord::new("b", "sound is clear . however strap").unwrap();
        let report = score_corpus(&[perfect, partial], &[a, b]).unwrap();
        let means = report.corpus.unwrap();
        let per: Vec<f64> = report.per_instance.iter().map(|s| s.rouge_3_best).collect();
        assert_eq!(means.rouge_3_best, (per[0] + per[1]) / 2.0);
        assert_eq!(report.counts.evaluated, 2);
        assert_eq!(report.counts.skipped, 0);
    }

    #[test]
    fn empty_predictions_produce_no_means() {
        let a = instance("a", "it works great", "camera is not good", 2);
        let report = score_corpus(&[], &[a]).unwrap();
        assert!(report.corpus.is_none());
        assert_eq!(report.counts.evaluated, 0);
        assert_eq!(report.counts.skipped, 1);
    }

    #[test]
    fn duplicate_and_unknown_predictions_error() {
        let a = instance("a", "it works great", "camera is not good", 2);
        let p1 = PredictionRecord::new("a", "it works great").unwrap();
        let p2 = PredictionRecord::new("a", "it works great").unwrap();
        assert!(matches!(
            score_corpus(&[p1.clone(), p2], std::slice::from_ref(&a)),
            Err(EvalError::DuplicatePrediction(_))
        ));
        let stray = PredictionRecord::new("zzz", "it works great").unwrap();
        let err = score_corpus(&[stray], &[a]).unwrap_err();
        assert!(err.to_string().contains("zzz"));
    }

    #[test]
    fn report_is_ordered_by_instance_id() {
        let a = instance("a", "it works great", "camera is not good", 1);
        let b = instance("b", "sound is clear", "strap broke early", 2);
        let pa = PredictionRecord::from_tokens("a", &a.chosen_reference().tokens).unwrap();
        let pb = PredictionRecord::from_tokens("b", &b.chosen_reference().tokens).unwrap();
        let report = score_corpus(&[pb, pa], &[b, a]).unwrap();
        let ids: Vec<&str> = report.per_instance.iter().map(|s| s.instance_id.as_str()).collect();
        assert_eq!(ids, ["a", "b"]);
    }
}
