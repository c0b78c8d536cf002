//! Seeded synthetic corpora with known structure, for tests and experiments.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{CommentRecord, EntityDocument, Label, Vocabulary};
use crate::personality::EssayRecord;
use crate::Result;

/// Documents drawn from disjoint per-topic vocabularies.
#[derive(Debug, Clone)]
pub struct TopicCorpus {
    pub vocab: Vocabulary,
    pub docs: Vec<EntityDocument>,
    /// Topic of each document.
    pub topics: Vec<usize>,
}

fn words(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

/// `topics × docs_per_topic` documents of `tokens_per_doc` tokens, each
/// token uniform over its topic's `words_per_topic` words.
pub fn topic_corpus(
    topics: usize,
    docs_per_topic: usize,
    words_per_topic: usize,
    tokens_per_doc: usize,
    seed: u64,
) -> Result<TopicCorpus> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pools: Vec<Vec<String>> = (0..topics)
        .map(|t| words(&format!("topic{t}w"), words_per_topic))
        .collect();
    let mut texts = Vec::new();
    let mut ids = Vec::new();
    let mut labels = Vec::new();
    for (t, pool) in pools.iter().enumerate() {
        for d in 0..docs_per_topic {
            let text: Vec<&str> = (0..tokens_per_doc)
                .map(|_| pool.choose(&mut rng).unwrap().as_str())
                .collect();
            texts.push(text.join(" "));
            ids.push(format!("t{t}-d{d:04}"));
            labels.push(t);
        }
    }
    let vocab = Vocabulary::build(texts.iter().map(String::as_str), 1)?;
    let docs = ids
        .into_iter()
        .zip(&texts)
        .map(|(entity_id, text)| EntityDocument {
            entity_id,
            tokens: vocab.encode_text(text),
        })
        .collect();
    Ok(TopicCorpus {
        vocab,
        docs,
        topics: labels,
    })
}

/// One cue word per trait; an essay mentions a trait's cue exactly when it
/// has that trait.
pub const TRAIT_CUES: [&str; 5] = ["curious", "tidy", "party", "kind", "worried"];

/// Essays whose traits are each decided by the presence of one cue word.
pub fn separable_essays(n: usize, filler_tokens: usize, seed: u64) -> Vec<EssayRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let filler = words("essayfill", 40);
    (0..n)
        .map(|_| {
            let traits: [bool; 5] = core::array::from_fn(|_| rng.random_bool(0.5));
            let mut tokens: Vec<&str> = (0..filler_tokens)
                .map(|_| filler.choose(&mut rng).unwrap().as_str())
                .collect();
            for (t, &on) in traits.iter().enumerate() {
                if on {
                    tokens.push(TRAIT_CUES[t]);
                }
            }
            tokens.shuffle(&mut rng);
            EssayRecord {
                text: tokens.join(" "),
                traits,
            }
        })
        .collect()
}

/// Labelled comments where `label = 1` exactly when the cue word is present.
pub const CUE_WORD: &str = "yeahright";

pub fn cue_corpus(n: usize, users: usize, forums: usize, seed: u64) -> Vec<CommentRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let filler = words("cuefill", 30);
    (0..n)
        .map(|i| {
            let sarcastic = rng.random_bool(0.5);
            let mut tokens: Vec<&str> = (0..rng.random_range(3..8))
                .map(|_| filler.choose(&mut rng).unwrap().as_str())
                .collect();
            if sarcastic {
                tokens.push(CUE_WORD);
            }
            tokens.shuffle(&mut rng);
            CommentRecord {
                id: format!("c{i:05}"),
                user_id: format!("u{}", rng.random_range(0..users)),
                forum_id: format!("f{}", rng.random_range(0..forums)),
                text: tokens.join(" "),
                label: Some(if sarcastic { Label::Sarcastic } else { Label::NonSarcastic }),
            }
        })
        .collect()
}

/// Parameters of [`contextual_corpus`].
#[derive(Debug, Clone, PartialEq)]
pub struct ContextualSpec {
    pub users: usize,
    pub forums: usize,
    pub comments: usize,
    /// Logit weight of the user's hidden group (±1).
    pub user_weight: f64,
    /// Logit weight of the forum's hidden leaning (±1).
    pub forum_weight: f64,
    /// Logit weight of the lexical cue (±1, visible as presence of
    /// [`CUE_WORD`]).
    pub cue_weight: f64,
    /// Probability that a style word comes from the user's own group pool.
    pub style_purity: f64,
    pub style_tokens: usize,
    pub topic_tokens: usize,
    pub filler_tokens: usize,
    pub essays: usize,
    pub seed: u64,
}

impl Default for ContextualSpec {
    fn default() -> Self {
        Self {
            users: 200,
            forums: 20,
            comments: 5000,
            user_weight: 2.5,
            forum_weight: 1.0,
            cue_weight: 2.0,
            style_purity: 0.6,
            style_tokens: 3,
            topic_tokens: 2,
            filler_tokens: 4,
            essays: 400,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ContextualCorpus {
    pub comments: Vec<CommentRecord>,
    pub essays: Vec<EssayRecord>,
    /// Hidden group of each user.
    pub user_group: BTreeMap<String, i8>,
    /// Hidden leaning of each forum.
    pub forum_sign: BTreeMap<String, i8>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + libm::exp(-x))
}

/// Comments whose sarcasm depends on who writes them, where, and a cue.
///
/// Each user belongs to one of two groups and draws style words mostly from
/// that group's pool; each forum has its own topic words and a leaning. The
/// label is Bernoulli with logit
/// `user_weight·g + forum_weight·f + cue_weight·c`. A single comment carries
/// only a few style words, so the group is weakly visible in one comment but
/// clear in a user's whole history. The essays tie the extraversion trait
/// to the first style pool, so the personality view also sees the group.
pub fn contextual_corpus(spec: &ContextualSpec) -> ContextualCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let pools = [words("stylea", 20), words("styleb", 20)];
    let filler = words("common", 50);
    let topics: Vec<Vec<String>> = (0..spec.forums).map(|f| words(&format!("forum{f}topic"), 5)).collect();

    let user_group: BTreeMap<String, i8> = (0..spec.users)
        .map(|u| (format!("user{u:03}"), if rng.random_bool(0.5) { 1 } else { -1 }))
        .collect();
    let forum_sign: BTreeMap<String, i8> = (0..spec.forums)
        .map(|f| (format!("forum{f:02}"), if rng.random_bool(0.5) { 1 } else { -1 }))
        .collect();
    let user_ids: Vec<&String> = user_group.keys().collect();
    let forum_ids: Vec<&String> = forum_sign.keys().collect();

    let mut comments = Vec::with_capacity(spec.comments);
    for i in 0..spec.comments {
        let u = rng.random_range(0..spec.users);
        let f = rng.random_range(0..spec.forums);
        let g = user_group[user_ids[u]];
        let s = forum_sign[forum_ids[f]];
        let cue = rng.random_bool(0.5);
        let c = if cue { 1.0 } else { -1.0 };
        let own = if g > 0 { 0 } else { 1 };
        let mut tokens: Vec<&str> = Vec::new();
        for _ in 0..spec.style_tokens {
            let pool = if rng.random_bool(spec.style_purity) { own } else { 1 - own };
            tokens.push(pools[pool].choose(&mut rng).unwrap());
        }
        for _ in 0..spec.topic_tokens {
            tokens.push(topics[f].choose(&mut rng).unwrap());
        }
        for _ in 0..spec.filler_tokens {
            tokens.push(filler.choose(&mut rng).unwrap());
        }
        if cue {
            tokens.push(CUE_WORD);
        }
        tokens.shuffle(&mut rng);
        let logit = spec.user_weight * g as f64 + spec.forum_weight * s as f64 + spec.cue_weight * c;
        let sarcastic = rng.random_bool(sigmoid(logit));
        comments.push(CommentRecord {
            id: format!("c{i:05}"),
            user_id: user_ids[u].clone(),
            forum_id: forum_ids[f].clone(),
            text: tokens.join(" "),
            label: Some(if sarcastic { Label::Sarcastic } else { Label::NonSarcastic }),
        });
    }

    let essays = (0..spec.essays)
        .map(|_| {
            let extravert = rng.random_bool(0.5);
            let main = if extravert { 0 } else { 1 };
            let mut traits: [bool; 5] = core::array::from_fn(|_| rng.random_bool(0.5));
            traits[2] = extravert;
            let mut tokens: Vec<&str> = Vec::new();
            for _ in 0..8 {
                let pool = if rng.random_bool(0.85) { main } else { 1 - main };
                tokens.push(pools[pool].choose(&mut rng).unwrap());
            }
            for _ in 0..8 {
                tokens.push(filler.choose(&mut rng).unwrap());
            }
            for (t, &on) in traits.iter().enumerate() {
                if on && t != 2 {
                    tokens.push(TRAIT_CUES[t]);
                }
            }
            tokens.shuffle(&mut rng);
            EssayRecord {
                text: tokens.join(" "),
                traits,
            }
        })
        .collect();

    ContextualCorpus {
        comments,
        essays,
        user_group,
        forum_sign,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn topic_corpus_shape() {
        let c = topic_corpus(2, 3, 5, 10, 1).unwrap();
        assert_eq!(c.docs.len(), 6);
        assert!(c.docs.iter().all(|d| d.tokens.len() == 10));
        // 10 topic words plus the three specials
        assert_eq!(c.vocab.len(), 13);
    }

    #[test]
    fn essays_follow_cues() {
        for e in separable_essays(20, 10, 2) {
            for (t, cue) in TRAIT_CUES.iter().enumerate() {
                assert_eq!(e.traits[t], e.text.split(' ').any(|w| w == *cue));
            }
        }
    }

    #[test]
    fn contextual_corpus_is_seeded() {
        let spec = ContextualSpec {
            comments: 50,
            essays: 10,
            ..ContextualSpec::default()
        };
        let a = contextual_corpus(&spec);
        let b = contextual_corpus(&spec);
        assert_eq!(a.comments, b.comments);
        assert_eq!(a.essays, b.essays);
        assert_eq!(a.user_group.len(), 200);
    }
}
