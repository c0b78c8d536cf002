//! Big-Five trait pretraining and per-user personality vectors.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::corpus::{TokenId, Vocabulary};
use crate::embedding::EmbeddingTable;
use crate::textcnn::{encode_padded, train_classifier, CnnConfig, CnnModel, Example, Head, History, Loss, TrainConfig};
use crate::{Error, Result};

/// Openness, conscientiousness, extraversion, agreeableness, neuroticism.
pub const TRAITS: [&str; 5] = ["O", "C", "E", "A", "N"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EssayRecord {
    pub text: String,
    pub traits: [bool; 5],
}

/// Trains the trait classifier on essays, one sigmoid output per trait.
pub fn pretrain(
    essays: &[EssayRecord],
    vocab: &Vocabulary,
    config: CnnConfig,
    training: &TrainConfig,
    init_seed: u64,
) -> Result<(CnnModel<f32>, History)> {
    pretrain_from(essays, vocab, CnnModel::new(config, init_seed)?, training)
}

/// [`pretrain`] starting from a given model, e.g. one with imported word
/// vectors.
pub fn pretrain_from(
    essays: &[EssayRecord],
    vocab: &Vocabulary,
    model: CnnModel<f32>,
    training: &TrainConfig,
) -> Result<(CnnModel<f32>, History)> {
    let config = &model.config;
    if config.head != Head::Sigmoid || config.classes != TRAITS.len() {
        return Err(Error::contract("personality model needs a five-way sigmoid head"));
    }
    if config.extra_dim != 0 {
        return Err(Error::contract("personality model takes no side features"));
    }
    if essays.len() < 2 {
        return Err(Error::contract(format!(
            "personality pretraining needs at least 2 essays, got {}",
            essays.len()
        )));
    }
    if let Some(i) = essays.iter().position(|e| e.text.trim().is_empty()) {
        return Err(Error::contract(format!("essay {i} has empty text")));
    }
    let mut informative = false;
    for (t, name) in TRAITS.iter().enumerate() {
        let positives = essays.iter().filter(|e| e.traits[t]).count();
        if positives == 0 || positives == essays.len() {
            log::warn!("trait {name} has a single class in the essays; its output is degenerate");
        } else {
            informative = true;
        }
    }
    if !informative {
        return Err(Error::contract("every trait column holds a single class"));
    }
    if training.loss != Loss::BinaryCrossEntropy {
        return Err(Error::contract("personality pretraining uses per-trait binary cross-entropy"));
    }
    let data: Vec<Example<f32>> = essays
        .iter()
        .map(|e| Example {
            tokens: encode_padded(vocab, &e.text, config.max_len),
            extra: Vec::new(),
            target: e.traits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
        })
        .collect();
    train_classifier(model, &data, training)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PersonalityStatus {
    Ok,
    /// The user has no comments; the vector is all zeros.
    NoComments,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PersonalityVector {
    pub vector: Vec<f32>,
    pub status: PersonalityStatus,
}

/// Mean hidden activation over a user's padded comments.
///
/// Each coordinate is summed in `f64` over values sorted in ascending
/// order, so the result does not depend on comment order.
pub fn user_personality(model: &CnnModel<f32>, comments: &[Vec<TokenId>]) -> Result<PersonalityVector> {
    let dim = model.config.hidden;
    if comments.is_empty() {
        log::warn!("user without comments gets a zero personality vector");
        return Ok(PersonalityVector {
            vector: vec![0.0; dim],
            status: PersonalityStatus::NoComments,
        });
    }
    let mut columns = vec![Vec::with_capacity(comments.len()); dim];
    for tokens in comments {
        let q = model.hidden(tokens, &[])?;
        for (col, v) in columns.iter_mut().zip(q) {
            col.push(v);
        }
    }
    let n = comments.len() as f64;
    let vector = columns
        .into_iter()
        .map(|mut col| {
            col.sort_by(f32::total_cmp);
            (col.iter().map(|&v| v as f64).sum::<f64>() / n) as f32
        })
        .collect();
    Ok(PersonalityVector {
        vector,
        status: PersonalityStatus::Ok,
    })
}

/// Personality vectors for every user, keyed and ordered by user id.
pub fn personality_table(
    model: &CnnModel<f32>,
    vocab: &Vocabulary,
    texts_by_user: &BTreeMap<String, Vec<&str>>,
) -> Result<EmbeddingTable> {
    let mut table = EmbeddingTable::new(model.config.hidden);
    for (user, texts) in texts_by_user {
        let padded: Vec<Vec<TokenId>> = texts
            .iter()
            .map(|t| encode_padded(vocab, t, model.config.max_len))
            .collect();
        table.push(user.clone(), &user_personality(model, &padded)?.vector)?;
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textcnn::pad_or_truncate;

    fn model() -> CnnModel<f32> {
        let cfg = CnnConfig {
            embedding_dim: 4,
            feature_maps: 3,
            hidden: 6,
            max_len: 8,
            ..CnnConfig::personality(10)
        };
        let mut m = CnnModel::new(cfg, 11).unwrap();
        // positive bias keeps every ReLU unit active
        m.b1.fill(0.3);
        m
    }

    #[test]
    fn mean_of_one_is_that_comment() {
        let m = model();
        let c = pad_or_truncate(&[3, 4, 5], 8);
        let q = m.hidden(&c, &[]).unwrap();
        assert_eq!(user_personality(&m, &[c]).unwrap().vector, q);
    }

    #[test]
    fn mean_of_two() {
        let m = model();
        let a = pad_or_truncate(&[3, 4, 5], 8);
        let b = pad_or_truncate(&[6, 7], 8);
        let (qa, qb) = (m.hidden(&a, &[]).unwrap(), m.hidden(&b, &[]).unwrap());
        let expect: Vec<f32> = qa.iter().zip(&qb).map(|(x, y)| (x + y) / 2.0).collect();
        assert_eq!(user_personality(&m, &[a, b]).unwrap().vector, expect);
    }

    #[test]
    fn order_and_duplication_do_not_matter() {
        let m = model();
        let cs: Vec<Vec<TokenId>> = [[3u32, 4, 5].as_slice(), &[6, 7], &[8, 9, 2, 3]]
            .iter()
            .map(|t| pad_or_truncate(t, 8))
            .collect();
        let base = user_personality(&m, &cs).unwrap().vector;
        let reversed: Vec<_> = cs.iter().rev().cloned().collect();
        assert_eq!(user_personality(&m, &reversed).unwrap().vector, base);
        let doubled: Vec<_> = cs.iter().chain(&cs).cloned().collect();
        assert_eq!(user_personality(&m, &doubled).unwrap().vector, base);
        assert!(base.iter().all(|v| v.is_finite() && *v >= 0.0));
    }

    #[test]
    fn no_comments_gives_zero_with_status() {
        let p = user_personality(&model(), &[]).unwrap();
        assert_eq!(p.status, PersonalityStatus::NoComments);
        assert!(p.vector.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn one_essay_is_rejected() {
        let vocab = Vocabulary::build(["a b c"], 1).unwrap();
        let essays = [EssayRecord {
            text: "a b c".into(),
            traits: [true; 5],
        }];
        let cfg = CnnConfig {
            embedding_dim: 4,
            feature_maps: 2,
            hidden: 3,
            max_len: 6,
            ..CnnConfig::personality(vocab.len())
        };
        let err = pretrain(&essays, &vocab, cfg, &TrainConfig::new(Loss::BinaryCrossEntropy), 0);
        assert!(matches!(err, Err(Error::Contract(_))));
    }
}
