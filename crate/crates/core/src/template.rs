//! The seven-template inventory and dataset generation.
//!
//! Each template fuses one positive and one negative opinion into a single
//! comparative snippet. Six templates insert their connective between the
//! opinions; template 4 additionally prepends "although". Rendering is pure
//! concatenation, so opinion tokens are never altered and a rendered
//! snippet always contains both opinions verbatim.

use std::sync::OnceLock;

use thiserror::Error;

use crate::corpus::{
    tokenize, CorpusError, OpinionPair, Polarity, Reference, Segment, SnippetInstance, Split,
    TemplateId, Token,
};

#[derive(Debug, Error)]
pub enum TemplateError {
    #[error("cannot render empty {side} opinion for product {product_id:?}")]
    EmptyOpinion { side: Polarity, product_id: String },
    #[error("segment {text:?} has {found} polarity, expected {expected}")]
    WrongPolarity {
        text: String,
        expected: Polarity,
        found: Polarity,
    },
    #[error("invalid split fractions: {0}")]
    InvalidSplits(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

/// One fusion pattern: tokens before the positive slot, between the slots,
/// and after the negative slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    id: TemplateId,
    prefix: Vec<Token>,
    infix: Vec<Token>,
    suffix: Vec<Token>,
}

impl Template {
    pub fn new(
        id: TemplateId,
        prefix: Vec<Token>,
        infix: Vec<Token>,
        suffix: Vec<Token>,
    ) -> Self {
        Template {
            id,
            prefix,
            infix,
            suffix,
        }
    }

    pub fn id(&self) -> TemplateId {
        self.id
    }

    pub fn prefix(&self) -> &[Token] {
        &self.prefix
    }

    pub fn infix(&self) -> &[Token] {
        &self.infix
    }

    pub fn suffix(&self) -> &[Token] {
        &self.suffix
    }

    /// The template's connective tokens: everything it contributes except
    /// the structural full stops.
    pub fn connective_tokens(&self) -> Vec<Token> {
        self.prefix
            .iter()
            .chain(self.infix.iter())
            .chain(self.suffix.iter())
            .filter(|t| t.as_str() != ".")
            .cloned()
            .collect()
    }

    /// Human-readable connective, with a slot marker for prefix templates
    /// whose connective wraps around the positive opinion.
    pub fn connective_label(&self) -> String {
        let strip_dots = |tokens: &[Token]| -> Vec<String> {
            tokens
                .iter()
                .filter(|t| t.as_str() != ".")
                .map(|t| t.as_str().to_string())
                .collect()
        };
        if self.prefix.is_empty() {
            strip_dots(&self.infix)
                .into_iter()
                .chain(strip_dots(&self.suffix))
                .collect::<Vec<_>>()
                .join(" ")
        } else {
            let mut parts = strip_dots(&self.prefix);
            parts.push("[positive opinion]".to_string());
            parts.extend(strip_dots(&self.infix));
            parts.extend(strip_dots(&self.suffix));
            parts.join(" ")
        }
    }

    /// prefix + positive + infix + negative + suffix.
    pub fn render(&self, pair: &OpinionPair) -> Result<Vec<Token>, TemplateError> {
        if pair.positive().tokens().is_empty() {
            return Err(TemplateError::EmptyOpinion {
                side: Polarity::Positive,
                product_id: pair.product_id().to_string(),
            });
        }
        if pair.negative().tokens().is_empty() {
            return Err(TemplateError::EmptyOpinion {
                side: Polarity::Negative,
                product_id: pair.product_id().to_string(),
            });
        }
        let mut out = Vec::with_capacity(
            self.prefix.len()
                + pair.positive().tokens().len()
                + self.infix.len()
                + pair.negative().tokens().len()
                + self.suffix.len(),
        );
        out.extend_from_slice(&self.prefix);
        out.extend_from_slice(pair.positive().tokens());
        out.extend_from_slice(&self.infix);
        out.extend_from_slice(pair.negative().tokens());
        out.extend_from_slice(&self.suffix);
        Ok(out)
    }
}

fn template_from_parts(id: u8, prefix: &str, infix: &str, suffix: &str) -> Template {
    Template::new(
        TemplateId::new(id).expect("inventory ids are valid"),
        tokenize(prefix),
        tokenize(infix),
        tokenize(suffix),
    )
}

/// The fixed seven-template inventory, ordered by id.
pub fn inventory() -> &'static [Template] {
    static INVENTORY: OnceLock<Vec<Template>> = OnceLock::new();
    INVENTORY.get_or_init(|| {
        vec![
            template_from_parts(1, "", ". but ,", "."),
            template_from_parts(2, "", ". however", "."),
            template_from_parts(3, "", ". on the other hand ,", "."),
            template_from_parts(4, "although", ", according to a few users", "."),
            template_from_parts(5, "", ". yet , some users have also mentioned that", "."),
            template_from_parts(6, "", ". however , there are people who have complained that", "."),
            template_from_parts(7, "", ". on the other hand , a few users have complained that", "."),
        ]
    })
}

/// Looks up an inventory template by id.
pub fn template(id: TemplateId) -> &'static Template {
    &inventory()[(id.get() - 1) as usize]
}

/// All seven renderings of a pair, ordered by template id.
pub fn references_for(pair: &OpinionPair) -> Result<Vec<Reference>, TemplateError> {
    inventory()
        .iter()
        .map(|t| {
            Ok(Reference {
                template_id: t.id(),
                tokens: t.render(pair)?,
            })
        })
        .collect()
}

/// How templates are assigned to pairs during generation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GenerationStrategy {
    /// One instance per pair, template rotating with the pair index.
    RoundRobin,
    /// One instance per pair, template drawn deterministically from the seed.
    SeededRandom { seed: u64 },
    /// Seven instances per pair, one for each template.
    AllTemplates,
}

impl GenerationStrategy {
    fn seed_material(self) -> u64 {
        match self {
            GenerationStrategy::SeededRandom { seed } => seed,
            _ => 0,
        }
    }
}

/// Fractions of products assigned to train/validation/test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl SplitSpec {
    pub fn new(train: f64, validation: f64, test: f64) -> Result<Self, TemplateError> {
        let spec = SplitSpec {
            train,
            validation,
            test,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), TemplateError> {
        for (name, v) in [
            ("train", self.train),
            ("validation", self.validation),
            ("test", self.test),
        ] {
            if !(0.0..=1.0).contains(&v) || !v.is_finite() {
                return Err(TemplateError::InvalidSplits(format!(
                    "{name} fraction {v} outside [0, 1]"
                )));
            }
        }
        let sum = self.train + self.validation + self.test;
        if (sum - 1.0).abs() > 1e-6 {
            return Err(TemplateError::InvalidSplits(format!(
                "fractions sum to {sum}, expected 1.0"
            )));
        }
        Ok(())
    }
}

impl Default for SplitSpec {
    /// Default train/validation/test product fractions.
    fn default() -> Self {
        SplitSpec {
            train: 0.786,
            validation: 0.098,
            test: 0.116,
        }
    }
}

/// A product left out of generation and why.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedProduct {
    pub product_id: String,
    pub missing: Polarity,
}

/// Result of dataset generation.
#[derive(Debug, Clone)]
pub struct DatasetBuild {
    pub instances: Vec<SnippetInstance>,
    pub skipped: Vec<SkippedProduct>,
    /// Ids of instances whose positive and negative opinions have the same
    /// text. Legal but suspicious; callers may want to warn.
    pub degenerate: Vec<String>,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

fn hash_str(s: &str) -> u64 {
    // FNV-1a, folded through splitmix for better avalanche.
    let mut h: u64 = 0xcbf29ce484222325;
    for b in s.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x100000001b3);
    }
    splitmix64(h)
}

fn check_polarity(segments: &[Segment], expected: Polarity) -> Result<(), TemplateError> {
    for s in segments {
        if s.polarity() != expected {
            return Err(TemplateError::WrongPolarity {
                text: s.text().to_string(),
                expected,
                found: s.polarity(),
            });
        }
    }
    Ok(())
}

/// Assigns each product to a split: products are ordered by a seeded hash
/// of their id and partitioned by the rounded fractions, so one product
/// never straddles two splits and the assignment is reproducible.
fn assign_splits(
    product_ids: &[&str],
    spec: &SplitSpec,
    seed: u64,
) -> std::collections::BTreeMap<String, Split> {
    let mut ranked: Vec<(u64, &str)> = product_ids
        .iter()
        .map(|id| (splitmix64(hash_str(id) ^ seed), *id))
        .collect();
    ranked.sort();
    let n = ranked.len();
    let n_train = ((n as f64) * spec.train).round() as usize;
    let n_validation = (((n as f64) * spec.validation).round() as usize).min(n - n_train.min(n));
    let n_train = n_train.min(n);
    let mut out = std::collections::BTreeMap::new();
    for (rank, (_, id)) in ranked.into_iter().enumerate() {
        let split = if rank < n_train {
            Split::Train
        } else if rank < n_train + n_validation {
            Split::Validation
        } else {
            Split::Test
        };
        out.insert(id.to_string(), split);
    }
    out
}

/// Builds the full cross product of positive and negative summary segments
/// per product, assigns templates per the strategy, and splits by product.
/// Products missing one polarity are skipped and reported.
pub fn build_dataset(
    positives: &[Segment],
    negatives: &[Segment],
    strategy: GenerationStrategy,
    split_spec: &SplitSpec,
) -> Result<DatasetBuild, TemplateError> {
    split_spec.validate()?;
    check_polarity(positives, Polarity::Positive)?;
    check_polarity(negatives, Polarity::Negative)?;

    use std::collections::BTreeMap;
    let mut products: BTreeMap<&str, (Vec<&Segment>, Vec<&Segment>)> = BTreeMap::new();
    for s in positives {
        products.entry(s.product_id()).or_default().0.push(s);
    }
    for s in negatives {
        products.entry(s.product_id()).or_default().1.push(s);
    }

    let mut skipped = Vec::new();
    let mut viable: Vec<&str> = Vec::new();
    for (product_id, (pos, neg)) in &products {
        if pos.is_empty() || neg.is_empty() {
            skipped.push(SkippedProduct {
                product_id: product_id.to_string(),
                missing: if pos.is_empty() {
                    Polarity::Positive
                } else {
                    Polarity::Negative
                },
            });
        } else {
            viable.push(product_id);
        }
    }
    let splits = assign_splits(&viable, split_spec, strategy.seed_material());

    let template_ids: Vec<TemplateId> = TemplateId::all().collect();
    let mut instances = Vec::new();
    let mut degenerate = Vec::new();

    for (product_id, (pos, neg)) in &products {
        if pos.is_empty() || neg.is_empty() {
            continue;
        }
        let split = splits[*product_id];
        let mut pair_index = 0usize;
        for p in pos {
            for n in neg {
                let pair = OpinionPair::new((*p).clone(), (*n).clone())?;
                let is_degenerate = p.text() == n.text();
                let references = references_for(&pair)?;
                match strategy {
                    GenerationStrategy::AllTemplates => {
                        for &template_id in &template_ids {
                            let id = format!("{product_id}:{pair_index:06}:{template_id}");
                            if is_degenerate {
                                degenerate.push(id.clone());
                            }
                            instances.push(SnippetInstance::new(
                                id,
                                pair.clone(),
                                references.clone(),
                                template_id,
                                split,
                            )?);
                        }
                    }
                    GenerationStrategy::RoundRobin => {
                        let template_id = template_ids[pair_index % template_ids.len()];
                        let id = format!("{product_id}:{pair_index:06}");
                        if is_degenerate {
                            degenerate.push(id.clone());
                        }
                        instances.push(SnippetInstance::new(id, pair, references, template_id, split)?);
                    }
                    GenerationStrategy::SeededRandom { seed } => {
                        let draw = splitmix64(hash_str(product_id) ^ seed ^ (pair_index as u64));
                        let template_id = template_ids[(draw % template_ids.len() as u64) as usize];
                        let id = format!("{product_id}:{pair_index:06}");
                        if is_degenerate {
                            degenerate.push(id.clone());
                        }
                        instances.push(SnippetInstance::new(id, pair, references, template_id, split)?);
                    }
                }
                pair_index += 1;
            }
        }
    }

    Ok(DatasetBuild {
        instances,
        skipped,
        degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::join_tokens;

    fn pair(pos: &str, neg: &str) -> OpinionPair {
        OpinionPair::new(
            Segment::new("p1", pos, Polarity::Positive),
            Segment::new("p1", neg, Polarity::Negative),
        )
        .unwrap()
    }

    #[test]
    fn inventory_shape() {
        let inv = inventory();
        assert_eq!(inv.len(), 7);
        let t1 = &inv[0];
        assert!(t1.prefix().is_empty());
        assert_eq!(join_tokens(t1.infix()), ". but ,");
        assert_eq!(join_tokens(t1.suffix()), ".");
        let t4 = &inv[3];
        assert_eq!(join_tokens(t4.prefix()), "although");
        assert_eq!(join_tokens(t4.infix()), ", according to a few users");
        assert_eq!(join_tokens(t4.suffix()), ".");
        let with_prefix: Vec<u8> = inv
            .iter()
            .filter(|t| !t.prefix().is_empty())
            .map(|t| t.id().get())
            .collect();
        assert_eq!(with_prefix, [4]);
    }

    #[test]
    fn render_infix_template() {
        let t2 = template(TemplateId::new(2).unwrap());
        let rendered = t2.render(&pair("the display is awesome", "camera is not good")).unwrap();
        assert_eq!(
            join_tokens(&rendered),
            "the display is awesome . however camera is not good ."
        );
    }

    #[test]
    fn render_prefix_template() {
        let t4 = template(TemplateId::new(4).unwrap());
        let rendered = t4
            .render(&pair(
                "the retractil system works fine",
                "the pads are sort of squarish",
            ))
            .unwrap();
        assert_eq!(
            join_tokens(&rendered),
            "although the retractil system works fine , according to a few users the pads are sort of squarish ."
        );
    }

    #[test]
    fn render_custom_connective() {
        // The engine renders any template value, not only the inventory.
        let custom = Template::new(
            TemplateId::new(6).unwrap(),
            vec![],
            tokenize(". however , some users have also mentioned that"),
            tokenize("."),
        );
        let rendered = custom.render(&pair("it works great", "camera is not good")).unwrap();
        assert_eq!(
            join_tokens(&rendered),
            "it works great . however , some users have also mentioned that camera is not good ."
        );
    }

    #[test]
    fn render_rejects_empty_opinion() {
        let t1 = template(TemplateId::new(1).unwrap());
        let p = OpinionPair::new(
            Segment::new("p1", "", Polarity::Positive),
            Segment::new("p1", "bad sound", Polarity::Negative),
        )
        .unwrap();
        assert!(t1.render(&p).is_err());
    }

    #[test]
    fn references_are_distinct_and_contain_opinions() {
        let p = pair("it works great", "camera is not good");
        let refs = references_for(&p).unwrap();
        assert_eq!(refs.len(), 7);
        for i in 0..refs.len() {
            for j in (i + 1)..refs.len() {
                assert_ne!(refs[i].tokens, refs[j].tokens);
            }
        }
        let pos = tokenize("it works great");
        let neg = tokenize("camera is not good");
        for r in &refs {
            let joined = join_tokens(&r.tokens);
            assert!(joined.contains(&join_tokens(&pos)));
            assert!(joined.contains(&join_tokens(&neg)));
        }
    }

    #[test]
    fn references_allow_identical_opinion_texts() {
        let p = pair("it is fine overall", "it is fine overall");
        let refs = references_for(&p).unwrap();
        assert_eq!(refs.len(), 7);
    }

    #[test]
    fn connective_tokens_and_labels() {
        assert_eq!(
            join_tokens(&template(TemplateId::new(1).unwrap()).connective_tokens()),
            "but ,"
        );
        assert_eq!(
            join_tokens(&template(TemplateId::new(4).unwrap()).connective_tokens()),
            "although , according to a few users"
        );
        assert_eq!(
            template(TemplateId::new(4).unwrap()).connective_label(),
            "although [positive opinion] , according to a few users"
        );
        assert_eq!(
            template(TemplateId::new(7).unwrap()).connective_label(),
            "on the other hand , a few users have complained that"
        );
    }

    fn segments(product: &str, polarity: Polarity, texts: &[&str]) -> Vec<Segment> {
        texts
            .iter()
            .map(|t| Segment::new(product, *t, polarity))
            .collect()
    }

    #[test]
    fn cross_product_counts() {
        let pos = segments("p1", Polarity::Positive, &[
            "screen is great",
            "battery lasts long",
            "sound is clear",
            "keyboard feels solid",
            "setup was quick",
        ]);
        let neg = segments("p1", Polarity::Negative, &[
            "camera is not good",
            "speakers are weak",
            "case feels cheap",
            "fan is loud",
            "charger runs hot",
        ]);
        let build = build_dataset(
            &pos,
            &neg,
            GenerationStrategy::RoundRobin,
            &SplitSpec::default(),
        )
        .unwrap();
        assert_eq!(build.instances.len(), 25);
        assert!(build.skipped.is_empty());
    }

    #[test]
    fn all_templates_mode_yields_seven_per_pair() {
        let pos = segments("p1", Polarity::Positive, &["screen is great"]);
        let neg = segments("p1", Polarity::Negative, &["camera is not good"]);
        let build = build_dataset(
            &pos,
            &neg,
            GenerationStrategy::AllTemplates,
            &SplitSpec::default(),
        )
        .unwrap();
        assert_eq!(build.instances.len(), 7);
        let refs = &build.instances[0].references().to_vec();
        for inst in &build.instances {
            assert_eq!(inst.references(), refs.as_slice());
        }
        let chosen: Vec<u8> = build.instances.iter().map(|i| i.chosen_template().get()).collect();
        assert_eq!(chosen, [1, 2, 3, 4, 5, 6, 7]);
    }

    #[test]
    fn products_never_straddle_splits() {
        let mut pos = Vec::new();
        let mut neg = Vec::new();
        for i in 0..50 {
            let product = format!("p{i:03}");
            pos.extend(segments(&product, Polarity::Positive, &["screen is great", "sound is clear"]));
            neg.extend(segments(&product, Polarity::Negative, &["camera is not good"]));
        }
        let spec = SplitSpec::new(0.8, 0.1, 0.1).unwrap();
        let build = build_dataset(&pos, &neg, GenerationStrategy::RoundRobin, &spec).unwrap();
        use std::collections::BTreeMap;
        let mut by_product: BTreeMap<&str, std::collections::BTreeSet<Split>> = BTreeMap::new();
        for inst in &build.instances {
            by_product
                .entry(inst.pair().product_id())
                .or_default()
                .insert(inst.split());
        }
        for (product, splits) in by_product {
            assert_eq!(splits.len(), 1, "product {product} in multiple splits");
        }
    }

    #[test]
    fn skips_products_missing_a_polarity() {
        let pos = segments("p1", Polarity::Positive, &["screen is great"]);
        let neg = segments("p2", Polarity::Negative, &["camera is not good"]);
        let build = build_dataset(
            &pos,
            &neg,
            GenerationStrategy::RoundRobin,
            &SplitSpec::default(),
        )
        .unwrap();
        assert!(build.instances.is_empty());
        assert_eq!(build.skipped.len(), 2);
    }

    #[test]
    fn degenerate_pairs_are_flagged_but_generated() {
        let pos = segments("p1", Polarity::Positive, &["it is fine overall"]);
        let neg = segments("p1", Polarity::Negative, &["it is fine overall", "fan is loud"]);
        let build = build_dataset(
            &pos,
            &neg,
            GenerationStrategy::RoundRobin,
            &SplitSpec::default(),
        )
        .unwrap();
        assert_eq!(build.instances.len(), 2);
        assert_eq!(build.degenerate.len(), 1);
        assert!(build.instances.iter().any(|i| i.id() == build.degenerate[0]));
    }

    #[test]
    fn generation_is_deterministic() {
        let pos = segments("p1", Polarity::Positive, &["screen is great", "sound is clear"]);
        let neg = segments("p1", Polarity::Negative, &["camera is not good", "fan is loud"]);
        for strategy in [
            GenerationStrategy::RoundRobin,
            GenerationStrategy::SeededRandom { seed: 13 },
            GenerationStrategy::AllTemplates,
        ] {
            let a = build_dataset(&pos, &neg, strategy, &SplitSpec::default()).unwrap();
            let b = build_dataset(&pos, &neg, strategy, &SplitSpec::default()).unwrap();
            assert_eq!(a.instances, b.instances);
        }
    }

    #[test]
    fn split_spec_validation() {
        assert!(SplitSpec::new(0.5, 0.3, 0.2).is_ok());
        assert!(SplitSpec::new(0.5, 0.3, 0.1).is_err());
        assert!(SplitSpec::new(-0.1, 0.6, 0.5).is_err());
    }

    #[test]
    fn wrong_polarity_input_rejected() {
        let pos = segments("p1", Polarity::Negative, &["mislabeled segment here"]);
        let neg = segments("p1", Polarity::Negative, &["camera is not good"]);
        assert!(build_dataset(
            &pos,
            &neg,
            GenerationStrategy::RoundRobin,
            &SplitSpec::default()
        )
        .is_err());
    }
}
